//! Randomly generated cone programs with a known optimal primal-dual pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scvx::conic::{self, solution_residuals, Cone, ConicProgram, SolveStatus, SolverSettings, SparseMatrix};

/// Builds `(program, x*, objective*)`: picks `x*`, complementary `s*, z*`
/// in the cone, then sets `b = A x* + s*` and `c = −Aᵀ z*`.
fn feasible_program(rng: &mut ChaCha8Rng) -> (ConicProgram, f64) {
    let n = rng.random_range(2..12);
    let mut cones = Vec::new();
    let p = rng.random_range(0..n.min(3));
    if p > 0 {
        cones.push(Cone::Zero(p));
    }
    let l = rng.random_range(1..8);
    cones.push(Cone::NonNeg(l));
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
            Cone::Zero(_) => {
                for i in 0..d {
                    z[row + i] = rng.random_range(-1.0..1.0);
                }
            }
            Cone::NonNeg(_) => {
                for i in 0..d {
                    if rng.random_bool(0.5) {
                        s[row + i] = rng.random_range(0.1..2.0);
                    } else {
                        z[row + i] = rng.random_range(0.1..2.0);
                    }
                }
            }
            Cone::Soc(_) => {
                let v: Vec<f64> = (0..d - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
                let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                match rng.random_range(0..3) {
                    0 => {
                        // both on the boundary, complementary
                        let ks = rng.random_range(0.2..2.0);
                        let kz = rng.random_range(0.2..2.0);
                        s[row] = ks * nv;
                        z[row] = kz * nv;
                        for i in 0..d - 1 {
                            s[row + 1 + i] = ks * v[i];
                            z[row + 1 + i] = -kz * v[i];
                        }
                    }
                    1 => {
                        s[row] = nv + rng.random_range(0.1..1.0);
                        s[row + 1..row + d].copy_from_slice(&v);
                    }
                    _ => {
                        z[row] = nv + rng.random_range(0.1..1.0);
                        z[row + 1..row + d].copy_from_slice(&v);
                    }
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
    let ax = a.mul_vec(&x);
    let b: Vec<f64> = ax.iter().zip(&s).map(|(p, q)| p + q).collect();
    let c: Vec<f64> = a.tmul_vec(&z).iter().map(|v| -v).collect();
    let obj: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
    (ConicProgram { c, a, b, cones }, obj)
}

#[test]
fn random_feasible_programs_solve_to_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let settings = SolverSettings::default();
    let mut failures = Vec::new();
    for case in 0..200 {
        let (prog, obj) = feasible_program(&mut rng);
        let sol = conic::solve(&prog, &settings).unwrap();
        let r = solution_residuals(&prog, &sol);
        let cx = sol.primal_objective(&prog);
        let ok = sol.status == SolveStatus::Optimal
            && r.primal <= 1e-8
            && r.dual <= 1e-8
            && r.gap <= 1e-8
            && (cx - obj).abs() <= 1e-6 * (1.0 + obj.abs());
        if !ok {
            failures.push(format!("case {case}: {:?} it={} {:?} cx={cx} obj={obj}", sol.status, sol.iterations, r));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn weak_duality_holds_at_returned_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let settings = SolverSettings::default();
    for case in 0..50 {
        let (prog, _) = feasible_program(&mut rng);
        let sol = conic::solve(&prog, &settings).unwrap();
        let cx = sol.primal_objective(&prog);
        let bz: f64 = prog.b.iter().zip(&sol.z).map(|(p, q)| p * q).sum();
        let sz: f64 = sol.s.iter().zip(&sol.z).map(|(p, q)| p * q).sum();
        // dual value −bᵀz ≤ cᵀx, with the gap equal to sᵀz up to residuals
        assert!(-bz <= cx + 1e-7 * (1.0 + cx.abs()), "case {case}");
        assert!((cx + bz - sz).abs() <= 1e-6 * (1.0 + cx.abs()), "case {case}");
        assert!(sz >= -1e-9, "case {case}");
    }
}

#[test]
fn cost_scaling_scales_the_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let settings = SolverSettings::default();
    for _ in 0..30 {
        let (prog, obj) = feasible_program(&mut rng);
        let alpha = rng.random_range(0.1..10.0);
        let mut scaled = prog.clone();
        scaled.c.iter_mut().for_each(|v| *v *= alpha);
        let sol = conic::solve(&scaled, &settings).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let v = sol.primal_objective(&scaled);
        assert!((v - alpha * obj).abs() <= 1e-6 * (1.0 + alpha * obj.abs()));
    }
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(72);
    let settings = SolverSettings::default();
    for _ in 0..20 {
        let (prog, _) = feasible_program(&mut rng);
        let a = conic::solve(&prog, &settings).unwrap();
        // through the text dump and back
        let text = prog.to_triplet_text();
        let again = ConicProgram::from_triplet_text(&text).unwrap();
        assert_eq!(again, prog);
        let b = conic::solve(&again, &settings).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.x), bits(&b.x));
        assert_eq!(bits(&a.s), bits(&b.s));
        assert_eq!(bits(&a.z), bits(&b.z));
        assert_eq!(a.iterations, b.iterations);
    }
}
