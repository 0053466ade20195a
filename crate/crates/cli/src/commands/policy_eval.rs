//! `policy-eval`: per-window motion cues and head selections for a
//! trajectory log, no frame stream or cost profile required.

use std::path::PathBuf;

use clap::Args;

use traj_exit_core::policy::{self};
use traj_exit_core::sim::{self, WindowTimelineEntry};

use crate::commands::{classify_sim_error, input_err, load_policy, load_trajectories, CmdResult, FormatArg};
use crate::manifest::{self, RunManifest};

#[derive(Debug, Args)]
pub struct PolicyEvalArgs {
    /// Trajectory log (CSV or JSONL)
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Log encoding; inferred from the extension when omitted
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Policy config JSON
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Distance threshold override, meters
    #[arg(long)]
    pub tau1: Option<f64>,
    /// Closure-rate threshold override, m/s
    #[arg(long)]
    pub tau2: Option<f64>,
    /// Optional output directory for timeline.csv and manifest.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &PolicyEvalArgs) -> CmdResult {
    let trajectories = load_trajectories(&args.trajectories, args.format)?;
    let cfg = load_policy(args.policy.as_deref(), args.tau1, args.tau2)?;

    let windows = sim::build_windows(&trajectories).map_err(classify_sim_error)?;
    let decisions = policy::window_decisions(&windows, &cfg).map_err(input_err)?;

    println!("{:>6}  {:>12}  {:>10}  {:>8}  heads", "window", "t_start", "d_m", "v_mps");
    for (window, decision) in windows.iter().zip(&decisions) {
        println!(
            "{:>6}  {:>12.3}  {:>10.3}  {:>8.3}  {}",
            window.window_index, window.t_start, window.d_t, window.v_t, decision.selection
        );
    }

    if let Some(out) = &args.out {
        let timeline: Vec<WindowTimelineEntry> = windows
            .iter()
            .zip(&decisions)
            .map(|(w, d)| WindowTimelineEntry {
                window: w.window_index,
                t_start: w.t_start,
                d_m: w.d_t,
                v_mps: w.v_t,
                heads: d.selection,
            })
            .collect();
        let mut csv = Vec::new();
        sim::export_window_timeline(&timeline, &mut csv).map_err(classify_sim_error)?;
        manifest::write_file(out, "timeline.csv", &csv).map_err(input_err)?;
        let manifest = RunManifest::new("policy-eval", out)
            .input("trajectories", args.trajectories.display())
            .config(args.policy.as_deref());
        manifest::write_manifest(out, &manifest).map_err(input_err)?;
    }
    Ok(())
}
