//! `simulate`: replay a frame stream against vessel trajectories, project
//! per-frame latency, and write the report, timeline, and decision log.

use std::fs::File;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};

use traj_exit_core::ingest::{self, FrameStreamMeta};
use traj_exit_core::sim::{self, CostOnlyBackend, DetectorBackend, ReplayBackend};

use crate::commands::{
    classify_sim_error, input_err, load_policy, load_profile, load_trajectories, CmdResult, FormatArg,
};
use crate::manifest::{self, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    /// Account latency only; no detections
    Cost,
    /// Replay precomputed detections filtered by the active head selection
    Replay,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Trajectory log (CSV or JSONL)
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Log encoding; inferred from the extension when omitted
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Number of frames in the stream
    #[arg(long)]
    pub frames: u64,
    /// Frame rate of the stream (never inferred)
    #[arg(long)]
    pub fps: f64,
    /// Timestamp of frame 0; defaults to the start of the trajectory overlap
    #[arg(long)]
    pub t0: Option<f64>,
    /// Policy config JSON
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Distance threshold override, meters
    #[arg(long)]
    pub tau1: Option<f64>,
    /// Closure-rate threshold override, m/s
    #[arg(long)]
    pub tau2: Option<f64>,
    /// Bundled profile name (nano, small, medium, deployment) or a path to a
    /// profile JSON
    #[arg(long, default_value = "deployment")]
    pub profile: String,
    #[arg(long, value_enum, default_value_t = BackendArg::Cost)]
    pub backend: BackendArg,
    /// Detections JSONL, required with `--backend replay`
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Output directory for report.json, timeline.csv, decisions.jsonl, and
    /// manifest.json
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SimulateArgs) -> CmdResult {
    let trajectories = load_trajectories(&args.trajectories, args.format)?;
    let cfg = load_policy(args.policy.as_deref(), args.tau1, args.tau2)?;
    let profile = load_profile(&args.profile)?;

    let t0 = args.t0.unwrap_or_else(|| {
        trajectories
            .iter()
            .map(|t| t.first_t())
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let meta = FrameStreamMeta::new(args.frames, args.fps, t0).map_err(input_err)?;

    let backend: Box<dyn DetectorBackend> = match args.backend {
        BackendArg::Cost => Box::new(CostOnlyBackend),
        BackendArg::Replay => {
            let path = args.detections.as_ref().ok_or_else(|| {
                input_err(anyhow::anyhow!("--backend replay requires --detections"))
            })?;
            let file = File::open(path)
                .with_context(|| format!("open detections {}", path.display()))
                .map_err(input_err)?;
            let records = ingest::parse_detections(file)
                .with_context(|| format!("parse detections {}", path.display()))
                .map_err(input_err)?;
            Box::new(ReplayBackend::new(records))
        }
    };

    let run = sim::run_multi(&trajectories, &meta, &cfg, &profile, backend.as_ref())
        .map_err(classify_sim_error)?;

    let mut report_json = Vec::new();
    sim::write_report_json(&run.report, &mut report_json).map_err(classify_sim_error)?;
    let mut timeline_csv = Vec::new();
    sim::export_timeline(&run.report, &mut timeline_csv).map_err(classify_sim_error)?;
    let mut decisions_jsonl = Vec::new();
    sim::write_decisions_jsonl(&run.decisions, &mut decisions_jsonl).map_err(classify_sim_error)?;

    manifest::write_file(&args.out, "report.json", &report_json).map_err(input_err)?;
    manifest::write_file(&args.out, "timeline.csv", &timeline_csv).map_err(input_err)?;
    manifest::write_file(&args.out, "decisions.jsonl", &decisions_jsonl).map_err(input_err)?;
    let manifest = RunManifest::new("simulate", &args.out)
        .input("trajectories", args.trajectories.display())
        .input("frames", args.frames)
        .input("fps", args.fps)
        .input("t0", t0)
        .input("profile", &args.profile)
        .input(
            "backend",
            match args.backend {
                BackendArg::Cost => "cost",
                BackendArg::Replay => "replay",
            },
        )
        .config(args.policy.as_deref());
    let manifest = match &args.detections {
        Some(path) => manifest.input("detections", path.display()),
        None => manifest,
    };
    manifest::write_manifest(&args.out, &manifest).map_err(input_err)?;

    let report = &run.report;
    println!(
        "Processed {} frames over {} windows: {} low ({}) / {} full ({}). \
         Adaptive total {:.2} s vs full-model baseline {:.2} s (saving {:.2}%). \
         Outputs in {}.",
        report.frame_count,
        report.per_window_timeline.len(),
        report.frames_low,
        cfg.low_set,
        report.frames_full,
        cfg.full_set,
        report.total_latency_ms / 1000.0,
        report.full_model_baseline_ms / 1000.0,
        report.latency_saving_pct,
        args.out.display(),
    );
    Ok(())
}
