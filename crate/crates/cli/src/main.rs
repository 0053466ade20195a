//! `traj-exit`: trajectory-aware adaptive inference control from the command
//! line.
//!
//! Subcommands cover the whole pipeline: `plan-lr` derives a scale-aware
//! learning-rate schedule from a bounding-box corpus, `policy-eval` shows the
//! per-window head selections for a trajectory log, `simulate` replays a
//! frame stream and projects latency, and `make-fixture` generates synthetic
//! inputs for all of the above.
//!
//! Exit codes: 0 on success, 2 for input or schema errors, 3 for semantic
//! errors such as a frame stream the trajectories do not cover. Set
//! `TRAJ_EXIT_LOG` (e.g. `info`, `debug`) to control log verbosity.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{make_fixture, plan_lr, policy_eval, simulate, CmdError};

#[derive(Parser)]
#[command(
    name = "traj-exit",
    version,
    about = "Trajectory-aware adaptive inference control for multi-head detectors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the scale-aware per-head learning-rate schedule from a
    /// bounding-box corpus
    PlanLr(plan_lr::PlanLrArgs),
    /// Evaluate the head-selection policy per motion window (no frame
    /// stream or profile needed)
    PolicyEval(policy_eval::PolicyEvalArgs),
    /// Replay a frame stream against vessel trajectories and project latency
    Simulate(simulate::SimulateArgs),
    /// Generate a synthetic trajectory / frame-meta / detections fixture
    MakeFixture(make_fixture::MakeFixtureArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TRAJ_EXIT_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::PlanLr(args) => plan_lr::run(&args),
        Command::PolicyEval(args) => policy_eval::run(&args),
        Command::Simulate(args) => simulate::run(&args),
        Command::MakeFixture(args) => make_fixture::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Input(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
        Err(CmdError::Semantic(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(3)
        }
    }
}
