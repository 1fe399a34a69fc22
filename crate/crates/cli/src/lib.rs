//! `scvx` command-line front end.
//!
//! ```text
//! scvx run <scenario.json> [--out DIR] [--builtin quadrotor] [--no-obstacles]
//!          [--epsilon E] [--max-iter K] [--dump-subproblems] [--sweep]
//! ```
//!
//! Exit codes: 0 converged, 1 succession cap reached, 2 infeasible scenario,
//! 3 solver failure, 4 bad input.

// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;
mod run;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use scvx::{QuadrotorScenario, ScvxError};

pub use output::{write_outputs, RunReport};
pub use run::{run_scenario, RunOptions, RunOutcome};

pub const EXIT_CONVERGED: u8 = 0;
pub const EXIT_MAX_SUCCESSIONS: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_BAD_INPUT: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "scvx", version, about = "Successive convexification trajectory solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find a feasible start, run the solver and write the results.
    Run(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    Quadrotor,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario files (JSON). More than one requires --sweep.
    pub scenarios: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Use a built-in scenario instead of a file.
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,
    /// Drop every obstacle from the scenario.
    #[arg(long)]
    pub no_obstacles: bool,
    /// Override the scenario's convergence threshold.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Maximum number of successions.
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    /// Write every subproblem as a triplet text file.
    #[arg(long)]
    pub dump_subproblems: bool,
    /// Run several scenarios concurrently, one output directory each.
    #[arg(long)]
    pub sweep: bool,
}

/// Exit code for a library error.
pub fn exit_code(e: &ScvxError) -> u8 {
    match e {
        ScvxError::InfeasibleScenario(_) | ScvxError::InfeasibleAnchor { .. } => EXIT_INFEASIBLE,
        ScvxError::Solver { .. } | ScvxError::Licq { .. } | ScvxError::Singularity { .. } => EXIT_SOLVER,
        ScvxError::Dimension(_)
        | ScvxError::InvalidProblem(_)
        | ScvxError::NotConvex { .. }
        | ScvxError::Unsupported(_)
        | ScvxError::Parse(_) => EXIT_BAD_INPUT,
    }
}

pub fn load_scenario(path: &Path) -> Result<QuadrotorScenario, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn options(args: &RunArgs, out_dir: PathBuf) -> RunOptions {
    RunOptions {
        out_dir,
        no_obstacles: args.no_obstacles,
        epsilon: args.epsilon,
        max_successions: args.max_iter,
        dump_subproblems: args.dump_subproblems,
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    match &cli.command {
        Command::Run(args) => execute_run(args, out, err),
    }
}

fn execute_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let bad = |err: &mut dyn Write, msg: &str| {
        let _ = writeln!(err, "error: {msg}");
        EXIT_BAD_INPUT
    };
    if args.epsilon.is_some_and(|e| !(e > 0.0)) {
        return bad(err, "--epsilon must be positive");
    }
    if args.max_iter == 0 {
        return bad(err, "--max-iter must be at least 1");
    }

    let mut jobs: Vec<(String, QuadrotorScenario)> = Vec::new();
    match (args.builtin, args.scenarios.as_slice()) {
        (Some(Builtin::Quadrotor), []) => jobs.push(("quadrotor".into(), QuadrotorScenario::default())),
        (Some(_), _) => return bad(err, "--builtin cannot be combined with scenario files"),
        (None, []) => return bad(err, "no scenario given; pass a file or --builtin quadrotor"),
        (None, [_, _, ..]) if !args.sweep => return bad(err, "several scenarios need --sweep"),
        (None, paths) => {
            for p in paths {
                match load_scenario(p) {
                    Ok(sc) => {
                        let name = p.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
                        jobs.push((name, sc));
                    }
                    Err(msg) => return bad(err, &msg),
                }
            }
        }
    }

    if !args.sweep {
        let (_, sc) = &jobs[0];
        let outcome = run_scenario(sc, &options(args, args.out.clone()));
        let _ = out.write_all(outcome.stdout.as_bytes());
        let _ = err.write_all(outcome.stderr.as_bytes());
        return outcome.code;
    }

    let mut names: Vec<&str> = jobs.iter().map(|(n, _)| n.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return bad(err, "scenario file names must be distinct in a sweep");
    }
    let outcomes: Vec<RunOutcome> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(name, sc)| {
                let opts = options(args, args.out.join(name));
                s.spawn(move || run_scenario(sc, &opts))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
    });
    let mut code = EXIT_CONVERGED;
    for ((name, _), o) in jobs.iter().zip(&outcomes) {
        let _ = writeln!(out, "== {name} (exit {})", o.code);
        let _ = out.write_all(o.stdout.as_bytes());
        let _ = err.write_all(o.stderr.as_bytes());
        code = code.max(o.code);
    }
    code
}
