//! `plan-lr`: derive the scale-aware learning-rate schedule from a corpus.

use std::fs::File;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;

use traj_exit_core::ingest;
use traj_exit_core::lr_planner::{self, CategoryWeights, LrPlan, ScaleThresholds};

use crate::commands::{input_err, CmdResult};
use crate::manifest::{self, RunManifest};

#[derive(Debug, Args)]
pub struct PlanLrArgs {
    /// Bounding-box corpus CSV (image_id,class,width,height)
    #[arg(long)]
    pub corpus: PathBuf,
    /// Size thresholds in pixels as `small_max,medium_max`
    #[arg(long, default_value = "32,96")]
    pub thresholds: String,
    /// Category weights as `small,medium,large`
    #[arg(long, default_value = "1.5,1.0,0.7")]
    pub weights: String,
    /// Base learning rate
    #[arg(long, default_value_t = 1e-3)]
    pub eta0: f64,
    /// Output directory for schedule.json and manifest.json; the table always
    /// goes to standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_floats(spec: &str, want: usize, what: &str) -> Result<Vec<f64>, anyhow::Error> {
    let values: Result<Vec<f64>, _> = spec.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let values = values.with_context(|| format!("cannot parse {what} from `{spec}`"))?;
    anyhow::ensure!(
        values.len() == want,
        "{what} needs {want} comma-separated values, got {}",
        values.len()
    );
    Ok(values)
}

pub fn run(args: &PlanLrArgs) -> CmdResult {
    let th = parse_floats(&args.thresholds, 2, "--thresholds").map_err(input_err)?;
    let thresholds = ScaleThresholds::new(th[0], th[1]).map_err(input_err)?;
    let w = parse_floats(&args.weights, 3, "--weights").map_err(input_err)?;
    let weights = CategoryWeights::new(w[0], w[1], w[2]).map_err(input_err)?;

    let file = File::open(&args.corpus)
        .with_context(|| format!("open corpus {}", args.corpus.display()))
        .map_err(input_err)?;
    let corpus = ingest::parse_bbox_corpus(file)
        .with_context(|| format!("parse corpus {}", args.corpus.display()))
        .map_err(input_err)?;
    crate::commands::warn_unknown_classes(corpus.iter().map(|b| b.class_label.as_str()), "corpus");

    let composition = lr_planner::compose(&corpus, &thresholds, &weights).map_err(input_err)?;
    let schedule = lr_planner::schedule(&composition, args.eta0).map_err(input_err)?;

    print!("{}", lr_planner::render_table(&composition, &schedule, &thresholds));

    if let Some(out) = &args.out {
        let plan = LrPlan::new(&composition, &schedule);
        let mut bytes = serde_json::to_vec_pretty(&plan)
            .context("serialize schedule")
            .map_err(input_err)?;
        bytes.push(b'\n');
        manifest::write_file(out, "schedule.json", &bytes).map_err(input_err)?;
        let manifest = RunManifest::new("plan-lr", out)
            .input("corpus", args.corpus.display())
            .input("thresholds", &args.thresholds)
            .input("weights", &args.weights)
            .input("eta0", args.eta0);
        manifest::write_manifest(out, &manifest).map_err(input_err)?;
    }
    Ok(())
}
