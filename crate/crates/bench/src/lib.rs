//! Fixtures shared by the benchmarks.

use scvx::conic::ConicProgram;
use scvx::subproblem::assemble;
use scvx::{
    build_feasible_region, find_feasible_start, OptimalControlProblem, PenaltyConfig, PenaltyMode, QuadrotorScenario,
    StackedVariable, TrustRegionSchedule,
};

pub struct Fixture {
    pub scenario: QuadrotorScenario,
    pub problem: OptimalControlProblem,
    /// Feasible start found from the straight-line guess.
    pub start: StackedVariable,
    /// First subproblem of the run.
    pub subproblem: ConicProgram,
}

pub fn quadrotor() -> Fixture {
    let scenario = QuadrotorScenario::default();
    let problem = scenario.build().expect("built-in scenario is valid");
    let start = find_feasible_start(
        &problem,
        PenaltyMode::Equality,
        &scenario.initial_guess(),
        &TrustRegionSchedule::default(),
        &Default::default(),
    )
    .expect("built-in scenario is feasible")
    .point;
    let region = build_feasible_region(&problem, PenaltyMode::Equality, start.as_slice()).expect("start is feasible");
    let subproblem = assemble(&problem, &PenaltyConfig::equality(), &region)
        .expect("subproblem assembles")
        .program;
    Fixture {
        scenario,
        problem,
        start,
        subproblem,
    }
}
