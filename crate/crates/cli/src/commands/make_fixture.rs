//! `make-fixture`: generate a synthetic trajectory log, frame metadata, and
//! detections file with a known easy/hard layout.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;

use traj_exit_core::ingest;
use traj_exit_core::sim::fixture::{self, FixtureSpec, HardLayout};

use crate::commands::{input_err, CmdResult};
use crate::manifest::{self, RunManifest};

#[derive(Debug, Args)]
pub struct MakeFixtureArgs {
    /// Named preset; `paper` is the bundled 125 s / 3686-frame scenario with
    /// a 3027/659 low/full split under the default policy
    #[arg(long, conflicts_with_all = ["duration", "fps", "all_easy", "all_hard", "hard_windows", "full_frames"])]
    pub preset: Option<String>,
    /// Recording length in whole seconds (one window per second)
    #[arg(long)]
    pub duration: Option<u32>,
    /// Frame rate of the synthetic stream
    #[arg(long)]
    pub fps: Option<f64>,
    /// Timestamp of the first fix and frame
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    /// Keep every window easy (the default layout)
    #[arg(long)]
    pub all_easy: bool,
    /// Make every window hard
    #[arg(long, conflicts_with = "all_easy")]
    pub all_hard: bool,
    /// Hard window indices, e.g. `3,5,10-14`
    #[arg(long, conflicts_with_all = ["all_easy", "all_hard"])]
    pub hard_windows: Option<String>,
    /// Choose hard windows so exactly this many frames run the full model
    #[arg(long, conflicts_with_all = ["all_easy", "all_hard", "hard_windows"])]
    pub full_frames: Option<u64>,
    /// RNG seed for geometry jitter and detections
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_window_list(spec: &str) -> Result<Vec<usize>, anyhow::Error> {
    let mut windows = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if let Some((lo, hi)) = part.split_once('-') {
            let lo: usize = lo.trim().parse().with_context(|| format!("bad range `{part}`"))?;
            let hi: usize = hi.trim().parse().with_context(|| format!("bad range `{part}`"))?;
            anyhow::ensure!(lo <= hi, "empty range `{part}`");
            windows.extend(lo..=hi);
        } else {
            windows.push(part.parse().with_context(|| format!("bad window index `{part}`"))?);
        }
    }
    Ok(windows)
}

fn build_spec(args: &MakeFixtureArgs) -> Result<FixtureSpec, anyhow::Error> {
    if let Some(preset) = &args.preset {
        anyhow::ensure!(preset == "paper", "unknown preset `{preset}` (available: paper)");
        let mut spec = FixtureSpec::paper(args.seed);
        spec.t0 = args.t0;
        return Ok(spec);
    }
    let duration = args.duration.context("--duration is required without --preset")?;
    let fps = args.fps.context("--fps is required without --preset")?;
    let layout = if args.all_hard {
        HardLayout::AllHard
    } else if let Some(spec) = &args.hard_windows {
        HardLayout::Windows(parse_window_list(spec)?)
    } else if let Some(frames) = args.full_frames {
        HardLayout::ExactFullFrames(frames)
    } else {
        HardLayout::AllEasy
    };
    Ok(FixtureSpec {
        duration_s: duration,
        fps,
        t0: args.t0,
        layout,
        seed: args.seed,
    })
}

pub fn run(args: &MakeFixtureArgs) -> CmdResult {
    let spec = build_spec(args).map_err(input_err)?;
    let fixture = fixture::generate(&spec).map_err(input_err)?;

    let mut trajectories_csv = Vec::new();
    ingest::write_trajectories_csv(&mut trajectories_csv, &fixture.trajectories).map_err(input_err)?;
    let mut detections_jsonl = Vec::new();
    ingest::write_detections_jsonl(&mut detections_jsonl, &fixture.detections).map_err(input_err)?;
    let mut meta_json = serde_json::to_vec_pretty(&fixture.meta)
        .context("serialize frame meta")
        .map_err(input_err)?;
    meta_json.push(b'\n');

    manifest::write_file(&args.out, "trajectories.csv", &trajectories_csv).map_err(input_err)?;
    manifest::write_file(&args.out, "frames_meta.json", &meta_json).map_err(input_err)?;
    manifest::write_file(&args.out, "detections.jsonl", &detections_jsonl).map_err(input_err)?;
    let manifest = RunManifest::new("make-fixture", &args.out)
        .input("spec", format!("{spec:?}"))
        .seed(args.seed);
    manifest::write_manifest(&args.out, &manifest).map_err(input_err)?;

    println!(
        "Fixture: {} s at {} fps, {} frames over {} windows; {} hard windows; \
         expected split {} low / {} full under the default policy. Outputs in {}.",
        spec.duration_s,
        fixture.meta.fps,
        fixture.meta.frame_count,
        spec.duration_s,
        fixture.hard_windows.len(),
        fixture.expected_frames_low,
        fixture.expected_frames_full,
        args.out.display(),
    );
    Ok(())
}
