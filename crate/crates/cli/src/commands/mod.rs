//! Subcommand implementations and the input-loading helpers they share.

pub mod make_fixture;
pub mod plan_lr;
pub mod policy_eval;
pub mod simulate;

use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, Context};
use clap::ValueEnum;

use traj_exit_core::cost_model::{builtin, DetectorProfile};
use traj_exit_core::geo_motion::GeoError;
use traj_exit_core::ingest::{self, TrajectoryFormat};
use traj_exit_core::policy::PolicyConfig;
use traj_exit_core::sim::SimError;
use traj_exit_core::Trajectory;

/// Command failure, split by exit code: input/schema errors exit 2,
/// semantic errors (coverage or overlap mismatches) exit 3.
#[derive(Debug)]
pub enum CmdError {
    Input(anyhow::Error),
    Semantic(anyhow::Error),
}

pub type CmdResult = Result<(), CmdError>;

pub fn input_err(err: impl Into<anyhow::Error>) -> CmdError {
    CmdError::Input(err.into())
}

/// The class labels this tooling was built around. Others are accepted (the
/// planner and replay work on any corpus) but worth flagging.
pub const KNOWN_CLASSES: [&str; 2] = ["ASV", "Boat"];

pub fn warn_unknown_classes<'a>(labels: impl Iterator<Item = &'a str>, what: &str) {
    let mut unknown: Vec<&str> = labels.filter(|l| !KNOWN_CLASSES.contains(l)).collect();
    unknown.sort_unstable();
    unknown.dedup();
    if !unknown.is_empty() {
        log::warn!("{what} contains class labels beyond ASV/Boat: {}", unknown.join(", "));
    }
}

/// Simulation failures are semantic when the inputs parsed but do not fit
/// together (coverage gaps, disjoint trajectories); otherwise input errors.
pub fn classify_sim_error(err: SimError) -> CmdError {
    match &err {
        SimError::Coverage { .. }
        | SimError::Geo(GeoError::NoOverlap)
        | SimError::Geo(GeoError::DegenerateOverlap { .. })
        | SimError::Geo(GeoError::OutOfCoverage { .. }) => CmdError::Semantic(err.into()),
        _ => CmdError::Input(err.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for TrajectoryFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::Csv => TrajectoryFormat::Csv,
            FormatArg::Jsonl => TrajectoryFormat::Jsonl,
        }
    }
}

/// Loads a trajectory log; without an explicit format, `.jsonl`/`.ndjson`
/// extensions select JSONL and anything else is read as CSV.
pub fn load_trajectories(path: &Path, format: Option<FormatArg>) -> Result<Vec<Trajectory>, CmdError> {
    let format = match format {
        Some(f) => f.into(),
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => TrajectoryFormat::Jsonl,
            _ => TrajectoryFormat::Csv,
        },
    };
    let file = File::open(path)
        .with_context(|| format!("open trajectories {}", path.display()))
        .map_err(CmdError::Input)?;
    let trajectories = ingest::parse_trajectories(file, format)
        .with_context(|| format!("parse trajectories {}", path.display()))
        .map_err(CmdError::Input)?;
    if trajectories.len() < 2 {
        return Err(input_err(anyhow!(
            "need at least two vessels, found {} in {}",
            trajectories.len(),
            path.display()
        )));
    }
    Ok(trajectories)
}

/// Builds the effective policy config: defaults, then the `--policy` file,
/// then any explicit threshold overrides.
pub fn load_policy(
    policy_path: Option<&Path>,
    tau1: Option<f64>,
    tau2: Option<f64>,
) -> Result<PolicyConfig, CmdError> {
    let mut cfg = match policy_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("read policy {}", path.display()))
                .map_err(CmdError::Input)?;
            serde_json::from_str(&text)
                .with_context(|| format!("parse policy {}", path.display()))
                .map_err(CmdError::Input)?
        }
        None => PolicyConfig::default(),
    };
    if let Some(tau1) = tau1 {
        cfg.tau1_m = tau1;
    }
    if let Some(tau2) = tau2 {
        cfg.tau2_mps = tau2;
    }
    cfg.validate().map_err(input_err)?;
    Ok(cfg)
}

/// Resolves `--profile`: one of the bundled names (`nano`, `small`,
/// `medium`, `deployment`) or a path to a profile JSON file.
pub fn load_profile(spec: &str) -> Result<DetectorProfile, CmdError> {
    if let Some(profile) = builtin::by_name(spec) {
        return Ok(profile);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path)
        .with_context(|| {
            format!(
                "read profile {} (not a bundled name; those are {})",
                path.display(),
                builtin::NAMES.join(", ")
            )
        })
        .map_err(CmdError::Input)?;
    DetectorProfile::from_json_str(&text)
        .with_context(|| format!("parse profile {}", path.display()))
        .map_err(CmdError::Input)
}
