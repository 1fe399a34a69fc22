//! Report JSON and plot-data CSV files.
//!
//! Every float is written as `{:.16e}` (17 significant digits) and wall-clock
//! timings are left out, so equal inputs give byte-identical files.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use scvx::{OptimalControlProblem, QuadrotorScenario, ScvxStatus, SolveReport, TrajectoryRecord};
use serde::Serialize;
use serde_json::ser::Formatter;

#[derive(Debug, Clone, Serialize)]
pub struct Checks {
    /// Smallest `‖H x_i − p_c‖ − r` over steps and obstacles.
    pub min_margin: f64,
    /// `max |g(z*)|`
    pub max_defect: f64,
    /// Largest deviation of the end states from their prescribed values.
    pub max_pin_error: f64,
    pub max_base_violation: f64,
    /// `cost ≥ relaxation floor` up to 1e-7, when the floor is known.
    pub above_floor: Option<bool>,
}

impl Checks {
    pub fn compute(
        sc: &QuadrotorScenario,
        problem: &OptimalControlProblem,
        report: &SolveReport,
        record: &TrajectoryRecord,
    ) -> Self {
        let y = report.final_iterate().as_slice();
        let max_defect = problem
            .eval_g(y)
            .map(|g| g.iter().fold(0.0_f64, |a, v| a.max(v.abs())))
            .unwrap_or(f64::INFINITY);
        let last = record.positions.len() - 1;
        let pins = [
            (record.positions[0], sc.p0),
            (record.velocities[0], sc.v0),
            (record.positions[last], sc.pf),
            (record.velocities[last], sc.vf),
        ];
        let max_pin_error = pins
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0_f64, f64::max);
        Self {
            min_margin: if sc.obstacles.is_empty() { f64::INFINITY } else { record.min_margin() },
            max_defect,
            max_pin_error,
            max_base_violation: problem.base_set.violation(y),
            above_floor: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: QuadrotorScenario,
    pub status: ScvxStatus,
    /// `Σ ‖u_i‖` including the terminal control.
    pub cost: f64,
    pub successions: usize,
    pub subproblem_solves: usize,
    pub initializer_solves: usize,
    pub initializer_violation: Vec<f64>,
    /// Optimum with every keep-out constraint dropped.
    pub relaxation_floor: Option<f64>,
    pub checks: Checks,
    pub trajectory: TrajectoryRecord,
    pub solve: SolveReport,
}

struct FixedFloats;

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

fn strip_timings(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            map.remove("seconds");
            map.values_mut().for_each(strip_timings);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

pub fn report_json(run: &RunReport) -> io::Result<Vec<u8>> {
    let mut value = serde_json::to_value(run)?;
    strip_timings(&mut value);
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(buf)
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(cells: impl IntoIterator<Item = String>) -> String {
    let mut s = cells.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn trajectory_csv(sc: &QuadrotorScenario, rec: &TrajectoryRecord) -> String {
    let mut header: Vec<String> = ["t", "px", "py", "pz", "vx", "vy", "vz", "ux", "uy", "uz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..sc.obstacles.len()).map(|j| format!("margin_{j}")));
    let mut out = row(header);
    for i in 0..rec.times.len() {
        let mut cells = vec![f(rec.times[i])];
        cells.extend(rec.positions[i].iter().map(|v| f(*v)));
        cells.extend(rec.velocities[i].iter().map(|v| f(*v)));
        cells.extend(rec.controls[i].iter().map(|v| f(*v)));
        cells.extend(rec.margins[i].iter().map(|v| f(*v)));
        out += &row(cells);
    }
    out
}

/// Points of the ground-plane path, then each obstacle outline.
fn ground_track_csv(sc: &QuadrotorScenario, rec: &TrajectoryRecord) -> String {
    const OUTLINE: usize = 64;
    let mut out = row(["series", "index", "x", "y"].map(String::from));
    for (i, p) in rec.positions.iter().enumerate() {
        out += &row(["path".into(), i.to_string(), f(p[0]), f(p[1])]);
    }
    for (j, o) in sc.obstacles.iter().enumerate() {
        for k in 0..=OUTLINE {
            let a = std::f64::consts::TAU * k as f64 / OUTLINE as f64;
            let (x, y) = (o.p_c[0] + o.r * a.cos(), o.p_c[1] + o.r * a.sin());
            out += &row([format!("obstacle_{j}"), k.to_string(), f(x), f(y)]);
        }
    }
    out
}

fn path3d_csv(rec: &TrajectoryRecord) -> String {
    let mut out = row(["t", "x", "y", "z"].map(String::from));
    for (t, p) in rec.times.iter().zip(&rec.positions) {
        out += &row([f(*t), f(p[0]), f(p[1]), f(p[2])]);
    }
    out
}

fn cost_curve_csv(report: &SolveReport) -> String {
    let mut out = row(["k", "penalty", "min_margin", "base_violation"].map(String::from));
    for k in 0..report.penalty_values.len() {
        out += &row([
            k.to_string(),
            f(report.penalty_values[k]),
            f(report.feasibility_margins[k]),
            f(report.base_violations[k]),
        ]);
    }
    out
}

/// Writes `report.json` and the four CSV files, plus one triplet file per
/// subproblem when the report kept them.
pub fn write_outputs(dir: &Path, run: &RunReport) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report_json(run)?)?;
    fs::write(dir.join("trajectory.csv"), trajectory_csv(&run.scenario, &run.trajectory))?;
    fs::write(dir.join("ground_track.csv"), ground_track_csv(&run.scenario, &run.trajectory))?;
    fs::write(dir.join("path3d.csv"), path3d_csv(&run.trajectory))?;
    fs::write(dir.join("cost_curve.csv"), cost_curve_csv(&run.solve))?;
    if !run.solve.programs.is_empty() {
        let sub = dir.join("subproblems");
        fs::create_dir_all(&sub)?;
        for (k, p) in run.solve.programs.iter().enumerate() {
            fs::write(sub.join(format!("solve_{:02}.txt", k + 1)), p.to_triplet_text())?;
        }
    }
    Ok(())
}
