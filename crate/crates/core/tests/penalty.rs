//! Exact penalty objective and its exactness on a small nonlinear problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scvx::{
    penalty_value, scvx, BaseConstraint, BaseSet, ConvexFn, Objective, OptimalControlProblem, PenaltyConfig,
    ProblemDims, QuadrotorScenario, ScvxConfig, ScvxError, ScvxStatus, StackedVariable, StageCost,
};

fn boxed(dims: ProblemDims, lo: f64, hi: f64) -> BaseSet {
    let mut base = BaseSet::default();
    for i in 0..dims.n_y() {
        base.push(BaseConstraint::Bounds {
            index: i,
            lower: lo,
            upper: hi,
        });
    }
    base
}

#[test]
fn zero_weight_is_the_objective() {
    let sc = QuadrotorScenario::default();
    let p = sc.build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let y: Vec<f64> = (0..p.dims.n_y()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let got = penalty_value(&p, &PenaltyConfig::penalty(0.0), &y).unwrap();
        assert_eq!(got, p.objective_value(&y));
    }
}

#[test]
fn defect_sum_times_weight() {
    // J ≡ 0, g = x₀ − x₁ = (1, −1), λ = 2
    let dims = ProblemDims::new(2, 1, 2, 0).unwrap();
    let p = OptimalControlProblem::new(
        dims,
        vec![ConvexFn::affine(vec![0.0; 3], 0.0), ConvexFn::affine(vec![0.0; 3], 0.0)],
        vec![],
        boxed(dims, -5.0, 5.0),
        Objective {
            stage: StageCost::Quadratic {
                state_weights: vec![0.0; 2],
                control_weights: vec![0.0],
            },
            offset: 0.0,
        },
    )
    .unwrap();
    let y = StackedVariable::stack(&dims, &[vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![0.3]]).unwrap();
    assert_eq!(p.eval_g(y.as_slice()).unwrap(), vec![1.0, -1.0]);
    assert_eq!(penalty_value(&p, &PenaltyConfig::penalty(2.0), y.as_slice()).unwrap(), 4.0);
}

#[test]
fn midpoint_convex_for_affine_dynamics() {
    let p = QuadrotorScenario::default().build().unwrap();
    let cfg = PenaltyConfig::penalty(5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let a: Vec<f64> = (0..p.dims.n_y()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..p.dims.n_y()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let lhs = penalty_value(&p, &cfg, &m).unwrap();
        let rhs = 0.5 * (penalty_value(&p, &cfg, &a).unwrap() + penalty_value(&p, &cfg, &b).unwrap());
        assert!(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()));
    }
}

/// `x' = x + u + 0.1x²` from 0 to `target` in two steps, minimizing
/// `|u₀| + |u₁|`.
fn scalar_nonlinear(target: f64) -> OptimalControlProblem {
    let dims = ProblemDims::new(1, 1, 3, 0).unwrap();
    let mut base = boxed(dims, -3.0, 3.0);
    base.push(BaseConstraint::Pin { index: 0, value: 0.0 });
    base.push(BaseConstraint::Pin { index: 2, value: target });
    OptimalControlProblem::new(
        dims,
        vec![ConvexFn::quadratic(vec![vec![0.2, 0.0], vec![0.0, 0.0]], vec![0.0, 1.0], 0.0)],
        vec![],
        base,
        Objective::control_norm(),
    )
    .unwrap()
}

#[test]
fn nonlinear_dynamics_need_penalty_mode() {
    let p = scalar_nonlinear(1.0);
    let z0 = StackedVariable(vec![0.0, 0.5, 1.0, 1.0, 1.0]);
    let err = scvx(&p, &z0, &ScvxConfig::default()).unwrap_err();
    assert!(matches!(err, ScvxError::Unsupported(_)), "{err}");
}

#[test]
fn large_weight_drives_defects_to_zero() {
    let p = scalar_nonlinear(1.0);
    // g = (0.5, 0.525) ≥ 0
    let z0 = StackedVariable(vec![0.0, 0.5, 1.0, 1.0, 1.0]);
    let cfg = ScvxConfig {
        penalty: PenaltyConfig::penalty(10.0),
        ..Default::default()
    };
    let rep = scvx(&p, &z0, &cfg).unwrap();
    assert_eq!(rep.status, ScvxStatus::Converged);
    assert!(rep.dynamics_l1 <= 1e-6, "‖g‖₁ = {:e}", rep.dynamics_l1);
    assert!(rep.penalty_exact);
    // u₀ = x₁ and u₁ = 0 with x₁ + 0.1x₁² = 1
    let x1 = (1.4f64.sqrt() - 1.0) / 0.2;
    let y = rep.final_iterate().as_slice();
    assert!((y[1] - x1).abs() <= 1e-4, "{y:?}");
    assert!((rep.final_value() - x1).abs() <= 1e-4);
    for w in rep.penalty_values.windows(2) {
        assert!(w[1] <= w[0] + 1e-9);
    }
}

#[test]
fn small_weight_is_flagged() {
    // g ≥ 0 allows x' ≤ x + u + 0.1x², so descending is free if λ is tiny
    let p = scalar_nonlinear(-1.0);
    let z0 = StackedVariable(vec![0.0, -0.5, -1.0, 0.0, 0.0]);
    let cfg = ScvxConfig {
        penalty: PenaltyConfig::penalty(0.01),
        ..Default::default()
    };
    let rep = scvx(&p, &z0, &cfg).unwrap();
    assert!(!rep.penalty_exact);
    assert!(rep.dynamics_l1 > 0.5);
    assert!(rep.warnings.iter().any(|w| w.contains("not exact")));
}
