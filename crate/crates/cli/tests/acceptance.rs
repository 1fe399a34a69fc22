//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails. All tolerances are pinned below.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scvx::conic::{self, solution_residuals, Cone, ConicProgram, ProgramBuilder, SolveStatus, SolverSettings, SparseMatrix};
use scvx::linearizer::verify_invariance;
use scvx::sampler::HitAndRun;
use scvx::{
    build_feasible_region, convex_relaxation, find_feasible_start, project, project_generic, scvx, ConstraintKind,
    ConstraintSpec, ConvexFn, OptimalControlProblem, PenaltyMode, QuadrotorScenario, ScvxConfig, ScvxStatus,
    SolveReport, StackedVariable, TrustRegionSchedule,
};

const COST_LO: f64 = 242.9;
const COST_HI: f64 = 247.8;
const MAX_SUCCESSIONS: u64 = 10;
const MARGIN_TOL: f64 = 1e-7;
const DEFECT_TOL: f64 = 1e-7;
const PIN_TOL: f64 = 1e-7;
const RUNTIME_LIMIT_S: f64 = 10.0;
const MONOTONE_TOL: f64 = 1e-9;
const BASE_TOL: f64 = 1e-7;
const REGION_SAMPLES: usize = 10_000;
const FIXED_POINT_TOL: f64 = 1e-6;
const PROJECTION_AGREE_TOL: f64 = 1e-6;
const PROJECTION_INSTANCES: usize = 100;
const GRID_STEP: f64 = 1e-3;
const GRID_TOL: f64 = 2e-3;
const GRID_INSTANCES: usize = 20;
const NONEXPANSIVE_PAIRS: usize = 1000;
const SOCP_COUNT: usize = 200;
const SOCP_TOL: f64 = 1e-8;
const KKT_TOL: f64 = 1e-8;
const DEGENERATE_TOL: f64 = 1e-7;
const FD_POINTS: usize = 100;
const FD_TOL: f64 = 1e-5;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

struct Benchmark {
    problem: OptimalControlProblem,
    z0: StackedVariable,
    report: SolveReport,
}

fn benchmark() -> Benchmark {
    let sc = QuadrotorScenario::default();
    let problem = sc.build().unwrap();
    let start = find_feasible_start(
        &problem,
        PenaltyMode::Equality,
        &sc.initial_guess(),
        &TrustRegionSchedule::default(),
        &Default::default(),
    )
    .unwrap();
    let report = scvx(&problem, &start.point, &ScvxConfig::default()).unwrap();
    Benchmark {
        problem,
        z0: start.point,
        report,
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn benchmark_reproduction() -> Verdict {
    let dir = std::env::temp_dir().join(format!("scvx-acceptance-{}", std::process::id()));
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_scvx"))
        .args(["run", "--builtin", "quadrotor", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    let secs = started.elapsed().as_secs_f64();
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap_or_default();
    let _ = std::fs::remove_dir_all(&dir);
    let r: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(_) => return verdict(false, format!("no report (exit {:?})", out.status.code())),
    };
    let cost = r["cost"].as_f64().unwrap_or(f64::NAN);
    let succ = r["successions"].as_u64().unwrap_or(u64::MAX);
    let margin = r["checks"]["min_margin"].as_f64().unwrap_or(f64::NAN);
    let defect = r["checks"]["max_defect"].as_f64().unwrap_or(f64::NAN);
    let pins = r["checks"]["max_pin_error"].as_f64().unwrap_or(f64::NAN);
    let margins = r["trajectory"]["margins"].as_array().map_or(0, |m| {
        m.iter().map(|row| row.as_array().map_or(0, Vec::len)).sum::<usize>()
    });
    let pass = out.status.code() == Some(0)
        && r["status"]["state"] == "converged"
        && (COST_LO..=COST_HI).contains(&cost)
        && succ <= MAX_SUCCESSIONS
        && margins == 50
        && margin >= -MARGIN_TOL
        && defect <= DEFECT_TOL
        && pins <= PIN_TOL
        && secs < RUNTIME_LIMIT_S;
    verdict(
        pass,
        format!(
            "cost {cost:.4} in [{COST_LO}, {COST_HI}], successions {succ} <= {MAX_SUCCESSIONS}, \
             {margins} margins min {margin:.2e} >= -{MARGIN_TOL:e}, defect {defect:.1e}, pins {pins:.1e}, \
             {secs:.2} s < {RUNTIME_LIMIT_S} s"
        ),
    )
}

fn monotone_decrease(b: &Benchmark) -> Verdict {
    let worst = b
        .report
        .penalty_values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    verdict(
        worst <= MONOTONE_TOL,
        format!(
            "largest increase {worst:.2e} <= {MONOTONE_TOL:e} over {} successions",
            b.report.successions
        ),
    )
}

fn recursive_feasibility(b: &Benchmark) -> Verdict {
    let r = &b.report;
    let margin = r.feasibility_margins.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    let base = r.base_violations.iter().fold(0.0_f64, |a, v| a.max(*v));
    let defect = r
        .iterates
        .iter()
        .map(|y| max_abs(&b.problem.eval_g(y.as_slice()).unwrap()))
        .fold(0.0_f64, f64::max);
    let region = build_feasible_region(&b.problem, PenaltyMode::Equality, b.z0.as_slice()).unwrap();
    let inv = verify_invariance(&b.problem, &region, REGION_SAMPLES, 1).unwrap();
    let pass = margin >= -MARGIN_TOL
        && base <= BASE_TOL
        && defect <= DEFECT_TOL
        && inv.anchor_ok
        && inv.samples == REGION_SAMPLES
        && inv.violations == 0;
    verdict(
        pass,
        format!(
            "iterate margin {margin:.2e}, base {base:.1e}, defect {defect:.1e}; \
             {} samples of F_z0, {} violations, worst q {:.2e}",
            inv.samples, inv.violations, inv.worst_margin
        ),
    )
}

fn fixed_point_certificate(b: &Benchmark) -> Verdict {
    let r = &b.report;
    let res = r.fixed_point_residual.unwrap_or(f64::INFINITY);
    let again = scvx(&b.problem, r.final_iterate(), &ScvxConfig::default()).unwrap();
    let pass = r.status == ScvxStatus::Converged
        && res < FIXED_POINT_TOL
        && again.status == ScvxStatus::Converged
        && again.subproblem_solves == 1
        && again.successions == 0;
    verdict(
        pass,
        format!(
            "P(z*) - Phi(z*) = {res:.2e} < {FIXED_POINT_TOL:e}; restart took {} solve(s), {} successions",
            again.subproblem_solves, again.successions
        ),
    )
}

fn spec(func: ConvexFn) -> ConstraintSpec {
    ConstraintSpec {
        kind: ConstraintKind::StateConstraint,
        step: 0,
        component: 0,
        indices: (0..func.dim()).collect(),
        func,
    }
}

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn random_set(rng: &mut ChaCha8Rng, kind: usize) -> ConvexFn {
    let d = rng.random_range(2..6);
    match kind {
        0 => ConvexFn::ball((0..d).map(|_| rng.random_range(-3.0..3.0)).collect(), rng.random_range(0.2..3.0)),
        1 => {
            let a = unit(rng, d);
            let mut b = unit(rng, d);
            let p: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            b.iter_mut().zip(&a).for_each(|(x, y)| *x -= p * y);
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            b.iter_mut().for_each(|x| *x /= nb);
            let c = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            ConvexFn::norm_minus_radius(vec![a, b], c, rng.random_range(0.2..3.0))
        }
        _ => ConvexFn::affine((0..d).map(|_| rng.random_range(-2.0..2.0)).collect(), rng.random_range(-1.0..1.0)),
    }
}

/// Nearest of the points `p0 + t·dir`, `t` on a grid of spacing `step`.
fn line_grid(p0: [f64; 2], dir: [f64; 2], z: &[f64], span: f64) -> Vec<f64> {
    let k = (span / GRID_STEP).round() as i64;
    (-k..=k)
        .map(|i| {
            let t = i as f64 * GRID_STEP;
            vec![p0[0] + t * dir[0], p0[1] + t * dir[1]]
        })
        .min_by(|a, b| dist(a, z).total_cmp(&dist(b, z)))
        .unwrap()
}

fn circle_grid(c: [f64; 2], r: f64, z: &[f64]) -> Vec<f64> {
    let n = (std::f64::consts::TAU / GRID_STEP).ceil() as usize;
    (0..n)
        .map(|k| {
            let phi = k as f64 * GRID_STEP;
            vec![c[0] + r * phi.cos(), c[1] + r * phi.sin()]
        })
        .min_by(|a, b| dist(a, z).total_cmp(&dist(b, z)))
        .unwrap()
}

fn projection_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut agree = 0.0_f64;
    for case in 0..PROJECTION_INSTANCES {
        let s = spec(random_set(&mut rng, case % 3));
        let d = s.func.dim();
        let z = loop {
            let z: Vec<f64> = (0..d).map(|_| rng.random_range(-6.0..6.0)).collect();
            if s.eval(&z) > 1e-3 {
                break z;
            }
        };
        let a = project(&s, &z).unwrap().point;
        let c = project_generic(&s, &z, 1e-9).unwrap().point;
        agree = agree.max(dist(&a, &c));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut grid = 0.0_f64;
    for case in 0..GRID_INSTANCES {
        let z = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let (f, oracle) = match case % 3 {
            0 => {
                let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let r = rng.random_range(0.3..2.0);
                (ConvexFn::ball(c.to_vec(), r), circle_grid(c, r, &z))
            }
            1 => {
                let a = unit(&mut rng, 2);
                let c = rng.random_range(-0.5..0.5);
                let r = rng.random_range(0.2..0.6);
                let side = if a[0] * z[0] + a[1] * z[1] > c { 1.0 } else { -1.0 };
                let off = c + side * r;
                let oracle = line_grid([off * a[0], off * a[1]], [-a[1], a[0]], &z, 10.0);
                (ConvexFn::norm_minus_radius(vec![a], vec![c], r), oracle)
            }
            _ => {
                let a = unit(&mut rng, 2);
                let b = rng.random_range(-0.5..0.5);
                let oracle = line_grid([-b * a[0], -b * a[1]], [-a[1], a[0]], &z, 10.0);
                (ConvexFn::affine(a, b), oracle)
            }
        };
        let got = project(&spec(f.clone()), &z).unwrap().point;
        let want = if f.eval(&z) <= 0.0 { z.clone() } else { oracle };
        grid = grid.max(dist(&got, &want));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut expansion = f64::NEG_INFINITY;
    for case in 0..NONEXPANSIVE_PAIRS {
        let s = spec(random_set(&mut rng, case % 3));
        let d = s.func.dim();
        let a: Vec<f64> = (0..d).map(|_| rng.random_range(-6.0..6.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.random_range(-6.0..6.0)).collect();
        let pa = project(&s, &a).unwrap().point;
        let pb = project(&s, &b).unwrap().point;
        expansion = expansion.max(dist(&pa, &pb) - dist(&a, &b));
    }

    let pass = agree <= PROJECTION_AGREE_TOL && grid <= GRID_TOL && expansion <= 1e-12;
    verdict(
        pass,
        format!(
            "analytic vs conic {agree:.1e} <= {PROJECTION_AGREE_TOL:e} ({PROJECTION_INSTANCES}), \
             grid {grid:.1e} <= {GRID_TOL:e} ({GRID_INSTANCES}), \
             max expansion {expansion:.1e} over {NONEXPANSIVE_PAIRS} pairs"
        ),
    )
}

/// Cone program built around a chosen complementary primal-dual pair.
fn random_socp(rng: &mut ChaCha8Rng) -> (ConicProgram, f64) {
    let n = rng.random_range(2..12);
    let mut cones = Vec::new();
    let p = rng.random_range(0..n.min(3));
    if p > 0 {
        cones.push(Cone::Zero(p));
    }
    cones.push(Cone::NonNeg(rng.random_range(1..8)));
    for _ in 0..rng.random_range(1..4) {
        cones.push(Cone::Soc(rng.random_range(2..6)));
    }
    let m: usize = cones.iter().map(Cone::dim).sum();
    let mut s = vec![0.0; m];
    let mut z = vec![0.0; m];
    let mut row = 0;
    for k in &cones {
        let d = k.dim();
        match k {
            Cone::Zero(_) => (0..d).for_each(|i| z[row + i] = rng.random_range(-1.0..1.0)),
            Cone::NonNeg(_) => {
                for i in 0..d {
                    let v = rng.random_range(0.1..2.0);
                    if rng.random_bool(0.5) {
                        s[row + i] = v;
                    } else {
                        z[row + i] = v;
                    }
                }
            }
            Cone::Soc(_) => {
                let v: Vec<f64> = (0..d - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
                let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let (ks, kz) = (rng.random_range(0.2..2.0), rng.random_range(0.2..2.0));
                s[row] = ks * nv;
                z[row] = kz * nv;
                for i in 0..d - 1 {
                    s[row + 1 + i] = ks * v[i];
                    z[row + 1 + i] = -kz * v[i];
                }
            }
        }
        row += d;
    }
    let mut trip = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.random_bool(0.6) {
                trip.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    let a = SparseMatrix::from_triplets(m, n, &trip);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = a.mul_vec(&x).iter().zip(&s).map(|(p, q)| p + q).collect();
    let c: Vec<f64> = a.tmul_vec(&z).iter().map(|v| -v).collect();
    let obj = c.iter().zip(&x).map(|(p, q)| p * q).sum();
    (ConicProgram { c, a, b, cones }, obj)
}

fn hand_examples_ok(settings: &SolverSettings) -> bool {
    let close = |a: f64, b: f64| (a - b).abs() <= KKT_TOL;
    // min x s.t. x ≥ 1
    let mut pb = ProgramBuilder::new();
    let x = pb.add_columns(1).start;
    pb.add_cost(x, 1.0);
    pb.add_nonneg(&[conic::LinExpr::var(x).plus_constant(-1.0)]);
    let p1 = pb.build();
    let s1 = conic::solve(&p1, settings).unwrap();
    // min t s.t. (t, 3, 4) ∈ soc
    let mut pb = ProgramBuilder::new();
    let t = pb.add_columns(1).start;
    pb.add_cost(t, 1.0);
    pb.add_soc(&[conic::LinExpr::var(t), conic::LinExpr::constant(3.0), conic::LinExpr::constant(4.0)]);
    let p2 = pb.build();
    let s2 = conic::solve(&p2, settings).unwrap();
    // min x1 + x2 s.t. x1 + x2 = 1, x ≥ 0, with the row written as A x = b
    let p3 = ConicProgram {
        c: vec![1.0, 1.0],
        a: SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]], 2),
        b: vec![1.0, 0.0, 0.0],
        cones: vec![Cone::Zero(1), Cone::NonNeg(2)],
    };
    let s3 = conic::solve(&p3, settings).unwrap();
    [&s1, &s2, &s3].iter().all(|s| s.status == SolveStatus::Optimal)
        && close(s1.x[0], 1.0)
        && close(s2.x[0], 5.0)
        && close(s3.primal_objective(&p3), 1.0)
        && close(s3.z[0], -1.0)
}

fn conic_solver() -> Verdict {
    let settings = SolverSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    let mut solved = 0;
    let mut programs = Vec::new();
    for _ in 0..SOCP_COUNT {
        let (prog, obj) = random_socp(&mut rng);
        let sol = conic::solve(&prog, &settings).unwrap();
        let r = solution_residuals(&prog, &sol);
        let w = r.primal.max(r.dual).max(r.gap);
        worst = worst.max(w);
        if sol.status == SolveStatus::Optimal
            && w <= SOCP_TOL
            && (sol.primal_objective(&prog) - obj).abs() <= 1e-6 * (1.0 + obj.abs())
        {
            solved += 1;
        }
        programs.push(prog);
    }
    let hand = hand_examples_ok(&settings);
    let deterministic = programs.iter().take(20).all(|p| {
        let a = conic::solve(p, &settings).unwrap();
        let b = conic::solve(p, &settings).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        bits(&a.x) == bits(&b.x) && bits(&a.z) == bits(&b.z) && bits(&a.s) == bits(&b.s)
    });
    verdict(
        solved == SOCP_COUNT && hand && deterministic,
        format!(
            "{solved}/{SOCP_COUNT} random SOCPs at {SOCP_TOL:e} (worst residual {worst:.1e}); \
             hand examples {}; bitwise resolve {}",
            if hand { "match" } else { "differ" },
            if deterministic { "identical" } else { "differs" }
        ),
    )
}

fn convex_degeneration() -> Verdict {
    let sc = QuadrotorScenario::default().without_obstacles();
    let p = sc.build().unwrap();
    let start = find_feasible_start(
        &p,
        PenaltyMode::Equality,
        &sc.initial_guess(),
        &TrustRegionSchedule::default(),
        &Default::default(),
    )
    .unwrap();
    let cfg = ScvxConfig::default();
    let r = scvx(&p, &start.point, &cfg).unwrap();
    let (direct, _) = convex_relaxation(&p, &cfg).unwrap();
    let gap = (r.final_value() - direct).abs();
    verdict(
        r.status == ScvxStatus::Converged && r.successions == 1 && gap <= DEGENERATE_TOL,
        format!(
            "{} succession(s), cost {:.6} vs direct {direct:.6}, difference {gap:.1e} <= {DEGENERATE_TOL:e}",
            r.successions,
            r.final_value()
        ),
    )
}

fn gradient_suite(b: &Benchmark) -> Verdict {
    let p = &b.problem;
    let mut pb = ProgramBuilder::new();
    let cols: Vec<usize> = pb.add_columns(p.dims.n_y()).collect();
    p.base_set.encode(&mut pb, &cols);
    let prog = pb.build();
    let mut walk = HitAndRun::centered(&prog).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for _ in 0..FD_POINTS {
        for _ in 0..5 {
            walk.step(&mut rng).unwrap();
        }
        let y = walk.current().to_vec();
        let jac = p.jacobian_q(&y).unwrap();
        for (j, spec) in p.constraints().iter().enumerate() {
            for &k in &spec.indices {
                let h = 1e-6 * (1.0 + y[k].abs());
                let (mut yp, mut ym) = (y.clone(), y.clone());
                yp[k] += h;
                ym[k] -= h;
                let fd = (spec.eval(&yp) - spec.eval(&ym)) / (2.0 * h);
                worst = worst.max((fd - jac[(j, k)]).abs() / jac[(j, k)].abs().max(1.0));
            }
        }
    }
    verdict(
        worst <= FD_TOL,
        format!("worst relative error {worst:.1e} <= {FD_TOL:e} on {FD_POINTS} points"),
    )
}

fn main() {
    let b = benchmark();
    let checks: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("benchmark-reproduction", Box::new(benchmark_reproduction)),
        ("monotone-decrease", Box::new(|| monotone_decrease(&b))),
        ("recursive-feasibility", Box::new(|| recursive_feasibility(&b))),
        ("fixed-point-certificate", Box::new(|| fixed_point_certificate(&b))),
        ("projection-correctness", Box::new(projection_correctness)),
        ("conic-solver", Box::new(conic_solver)),
        ("convex-degeneration", Box::new(convex_degeneration)),
        ("gradient-suite", Box::new(|| gradient_suite(&b))),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
