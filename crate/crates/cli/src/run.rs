use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use scvx::{
    convex_relaxation, find_feasible_start, scvx, PenaltyConfig, QuadrotorScenario, ScvxConfig, ScvxStatus,
    TrustRegionSchedule,
};

use crate::output::{write_outputs, Checks, RunReport};
use crate::{exit_code, EXIT_CONVERGED, EXIT_MAX_SUCCESSIONS, EXIT_SOLVER};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub no_obstacles: bool,
    pub epsilon: Option<f64>,
    pub max_successions: usize,
    pub dump_subproblems: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
    pub report: Option<RunReport>,
}

impl RunOutcome {
    fn error(code: u8, msg: String) -> Self {
        Self {
            code,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
            report: None,
        }
    }
}

/// Initializer, solver and output files for one scenario.
pub fn run_scenario(scenario: &QuadrotorScenario, opts: &RunOptions) -> RunOutcome {
    let started = Instant::now();
    let mut sc = scenario.clone();
    if opts.no_obstacles {
        sc.obstacles.clear();
    }
    if let Some(e) = opts.epsilon {
        sc.epsilon = e;
    }
    let problem = match sc.build() {
        Ok(p) => p,
        Err(e) => return RunOutcome::error(exit_code(&e), e.to_string()),
    };
    let penalty = if sc.lambda > 0.0 {
        PenaltyConfig::penalty(sc.lambda)
    } else {
        PenaltyConfig::equality()
    };
    let config = ScvxConfig {
        epsilon: sc.epsilon,
        max_successions: opts.max_successions,
        penalty,
        keep_programs: opts.dump_subproblems,
        ..Default::default()
    };

    let start = match find_feasible_start(
        &problem,
        penalty.mode,
        &sc.initial_guess(),
        &TrustRegionSchedule::default(),
        &config.solver,
    ) {
        Ok(s) => s,
        Err(e) => return RunOutcome::error(exit_code(&e), e.to_string()),
    };
    let report = match scvx(&problem, &start.point, &config) {
        Ok(r) => r,
        Err(e) => return RunOutcome::error(exit_code(&e), e.to_string()),
    };

    let mut stderr = String::new();
    let floor = match convex_relaxation(&problem, &config) {
        Ok((v, _)) => Some(v),
        Err(e) => {
            let _ = writeln!(stderr, "warning: relaxation floor unavailable: {e}");
            None
        }
    };
    for w in start.warnings.iter().chain(&report.warnings) {
        let _ = writeln!(stderr, "warning: {w}");
    }

    let record = sc.record(report.final_iterate());
    let mut checks = Checks::compute(&sc, &problem, &report, &record);
    checks.above_floor = floor.map(|v| record.cost >= v - 1e-7);
    let run = RunReport {
        scenario: sc.clone(),
        status: report.status.clone(),
        cost: record.cost,
        successions: report.successions,
        subproblem_solves: report.subproblem_solves,
        initializer_solves: start.solves,
        initializer_violation: start.violation_trace.clone(),
        relaxation_floor: floor,
        checks,
        trajectory: record,
        solve: report,
    };

    let code = match &run.status {
        ScvxStatus::Converged => EXIT_CONVERGED,
        ScvxStatus::MaxSuccessions => EXIT_MAX_SUCCESSIONS,
        ScvxStatus::Failed { reason } => {
            let _ = writeln!(stderr, "error: {reason}");
            EXIT_SOLVER
        }
    };
    if let Err(e) = write_outputs(&opts.out_dir, &run) {
        let _ = writeln!(stderr, "error: writing outputs to {}: {e}", opts.out_dir.display());
        return RunOutcome {
            code: crate::EXIT_BAD_INPUT,
            stdout: String::new(),
            stderr,
            report: Some(run),
        };
    }

    let stdout = iteration_table(&run, &start.violation_trace, started.elapsed().as_secs_f64());
    RunOutcome {
        code,
        stdout,
        stderr,
        report: Some(run),
    }
}

fn iteration_table(run: &RunReport, init_trace: &[f64], seconds: f64) -> String {
    let r = &run.solve;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "initializer: {} solves, violation {:.3e} -> {:.3e}",
        run.initializer_solves,
        init_trace.first().copied().unwrap_or(0.0),
        init_trace.last().copied().unwrap_or(0.0)
    );
    let _ = writeln!(s, "{:>3}  {:>16}  {:>10}  {:>11}  {:>5}  {:>9}", "k", "P(z^k)", "decrease", "min margin", "ipm", "ms");
    for k in 0..r.iterates.len() {
        let dec = if k == 0 {
            "-".to_string()
        } else {
            format!("{:.3e}", r.penalty_values[k - 1] - r.penalty_values[k])
        };
        let (its, ms) = r
            .subsolver_stats
            .get(k)
            .map_or(("-".into(), "-".into()), |st| (st.iterations.to_string(), format!("{:.2}", st.seconds * 1e3)));
        let _ = writeln!(
            s,
            "{k:>3}  {:>16.9}  {dec:>10}  {:>11.3e}  {its:>5}  {ms:>9}",
            r.penalty_values[k], r.feasibility_margins[k]
        );
    }
    let status = match &run.status {
        ScvxStatus::Converged => "converged".to_string(),
        ScvxStatus::MaxSuccessions => "succession cap reached".to_string(),
        ScvxStatus::Failed { reason } => format!("failed: {reason}"),
    };
    let _ = writeln!(
        s,
        "{status}: cost {:.6}, {} successions, {} subproblem solves, fixed-point residual {}, {:.3} s",
        run.cost,
        run.successions,
        run.subproblem_solves,
        r.fixed_point_residual.map_or("-".into(), |v| format!("{v:.3e}")),
        seconds
    );
    s
}
