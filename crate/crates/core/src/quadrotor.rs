//! Multi-rotor minimum-fuel obstacle avoidance.
//!
//! State `x = (p, v) ∈ R⁶`, control `u ∈ R³` (commanded acceleration),
//! zero-order-hold double integrator `x_{i+1} = A x_i + B(u_i + g)`. Keep-out
//! zones are vertical cylinders over disks in the ground plane.

use serde::{Deserialize, Serialize};

use crate::convex_fn::ConvexFn;
use crate::error::{Result, ScvxError};
use crate::problem::{BaseConstraint, BaseSet, Objective, OptimalControlProblem, ProblemDims, StackedVariable, StageCost};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub p_c: [f64; 2],
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct QuadrotorScenario {
    pub N: usize,
    pub t_f: f64,
    pub V_max: f64,
    pub u_max: f64,
    pub g_vec: [f64; 3],
    /// Degrees.
    pub theta_cone: f64,
    pub n_hat: [f64; 3],
    pub p0: [f64; 3],
    pub v0: [f64; 3],
    pub pf: [f64; 3],
    pub vf: [f64; 3],
    pub obstacles: Vec<Obstacle>,
    pub lambda: f64,
    pub epsilon: f64,
}

impl Default for QuadrotorScenario {
    fn default() -> Self {
        Self {
            N: 25,
            t_f: 15.0,
            V_max: 2.0,
            u_max: 13.33,
            g_vec: [0.0, 0.0, -9.81],
            theta_cone: 30.0,
            n_hat: [0.0, 0.0, 1.0],
            p0: [-8.0, -1.0, 0.0],
            v0: [0.0; 3],
            pf: [8.0, 1.0, 0.5],
            vf: [0.0; 3],
            obstacles: vec![
                Obstacle { p_c: [-1.0, 0.0], r: 3.0 },
                Obstacle { p_c: [4.0, -1.0], r: 1.5 },
            ],
            lambda: 0.0,
            epsilon: 1e-6,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `H` selecting the ground-plane position from the state.
pub fn ground_selector() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    ]
}

impl QuadrotorScenario {
    pub fn dt(&self) -> f64 {
        self.t_f / (self.N as f64 - 1.0)
    }

    pub fn without_obstacles(mut self) -> Self {
        self.obstacles.clear();
        self
    }

    /// Control applied after the last point: zero net acceleration.
    pub fn terminal_control(&self) -> [f64; 3] {
        self.g_vec.map(|g| -g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ScvxError::InvalidProblem(m));
        if self.N < 2 || !(self.t_f > 0.0) {
            return bad(format!("need N ≥ 2 and t_f > 0 (got N={}, t_f={})", self.N, self.t_f));
        }
        if !(self.V_max > 0.0) || !(self.u_max > 0.0) {
            return bad("V_max and u_max must be positive".into());
        }
        if (norm(&self.n_hat) - 1.0).abs() > 1e-9 {
            return bad(format!("n_hat must be a unit vector, norm is {}", norm(&self.n_hat)));
        }
        if !(self.theta_cone > 0.0 && self.theta_cone < 90.0) {
            return bad(format!("theta_cone {} outside (0, 90) degrees", self.theta_cone));
        }
        if !(self.lambda >= 0.0) || !(self.epsilon > 0.0) {
            return bad("need lambda ≥ 0 and epsilon > 0".into());
        }
        let all = [self.g_vec, self.n_hat, self.p0, self.v0, self.pf, self.vf];
        if all.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite vector entry".into());
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            if !(o.r > 0.0) || !o.p_c.iter().all(|v| v.is_finite()) {
                return bad(format!("obstacle {k}: radius must be positive"));
            }
            for (name, p) in [("p0", self.p0), ("pf", self.pf)] {
                let d = ((p[0] - o.p_c[0]).powi(2) + (p[1] - o.p_c[1]).powi(2)).sqrt();
                if d <= o.r {
                    return bad(format!("{name} lies inside obstacle {k}"));
                }
            }
        }
        for (name, v) in [("v0", self.v0), ("vf", self.vf)] {
            if norm(&v) > self.V_max {
                return bad(format!("{name} exceeds V_max"));
            }
        }
        let hold = self.terminal_control();
        let cos = self.theta_cone.to_radians().cos();
        if norm(&hold) > self.u_max || dot(&self.n_hat, &hold) < norm(&hold) * cos - 1e-12 {
            return bad("hover control −g_vec is outside the control set".into());
        }
        Ok(())
    }

    pub fn dims(&self) -> ProblemDims {
        ProblemDims {
            n: 6,
            m: 3,
            t: self.N,
            s: self.obstacles.len(),
        }
    }

    /// Builds the discrete problem; see the module docs.
    pub fn build(&self) -> Result<OptimalControlProblem> {
        self.validate()?;
        let dims = self.dims();
        let dt = self.dt();

        // f(x, u) = (A − I) x + B (u + g)
        let mut dynamics = Vec::with_capacity(6);
        for j in 0..6 {
            let mut lin = vec![0.0; 9];
            let k = j % 3;
            let bj = if j < 3 { 0.5 * dt * dt } else { dt };
            if j < 3 {
                lin[3 + k] = dt;
            }
            lin[6 + k] = bj;
            dynamics.push(ConvexFn::affine(lin, bj * self.g_vec[k]));
        }

        let state_constraints = self
            .obstacles
            .iter()
            .map(|o| ConvexFn::norm_minus_radius(ground_selector(), o.p_c.to_vec(), o.r))
            .collect();

        let mut base = BaseSet::default();
        let last = dims.t - 1;
        for (i, x) in [(0, [self.p0, self.v0]), (last, [self.pf, self.vf])] {
            for (idx, value) in dims.state_range(i).zip(x.iter().flatten()) {
                base.push(BaseConstraint::Pin { index: idx, value: *value });
            }
        }
        // Loose position box: no trajectory with ‖v‖ ≤ V_max leaves it.
        let reach = self.V_max * self.t_f;
        for i in 0..dims.t {
            let r = dims.state_range(i);
            for k in 0..3 {
                base.push(BaseConstraint::Bounds {
                    index: r.start + k,
                    lower: self.p0[k].min(self.pf[k]) - reach,
                    upper: self.p0[k].max(self.pf[k]) + reach,
                });
            }
            base.push(BaseConstraint::NormBall {
                indices: (r.start + 3..r.end).collect(),
                center: vec![0.0; 3],
                radius: self.V_max,
            });
        }
        for i in 0..dims.t - 1 {
            let u: Vec<usize> = dims.control_range(i).collect();
            base.push(BaseConstraint::NormBall {
                indices: u.clone(),
                center: vec![0.0; 3],
                radius: self.u_max,
            });
            base.push(BaseConstraint::ThrustCone {
                indices: u,
                axis: self.n_hat.to_vec(),
                half_angle: self.theta_cone.to_radians(),
            });
        }

        let objective = Objective {
            stage: StageCost::ControlNorm,
            offset: norm(&self.terminal_control()),
        };
        OptimalControlProblem::new(dims, dynamics, state_constraints, base, objective)
    }

    /// Straight-line positions, velocities zero apart from the pinned
    /// endpoints, hover controls.
    pub fn initial_guess(&self) -> StackedVariable {
        let dims = self.dims();
        let last = (dims.t - 1) as f64;
        let states: Vec<Vec<f64>> = (0..dims.t)
            .map(|i| {
                let s = i as f64 / last;
                let mut x: Vec<f64> = (0..3).map(|k| self.p0[k] + s * (self.pf[k] - self.p0[k])).collect();
                let v = if i == 0 {
                    self.v0
                } else if i == dims.t - 1 {
                    self.vf
                } else {
                    [0.0; 3]
                };
                x.extend_from_slice(&v);
                x
            })
            .collect();
        let controls = vec![self.terminal_control().to_vec(); dims.t - 1];
        StackedVariable::stack(&dims, &states, &controls).expect("dimensions are consistent")
    }

    pub fn record(&self, y: &StackedVariable) -> TrajectoryRecord {
        let dims = self.dims();
        let dt = self.dt();
        let mut rec = TrajectoryRecord::default();
        for i in 0..dims.t {
            let x = y.state(&dims, i);
            rec.times.push(i as f64 * dt);
            rec.positions.push([x[0], x[1], x[2]]);
            rec.velocities.push([x[3], x[4], x[5]]);
            let u = if i + 1 < dims.t {
                let u = y.control(&dims, i);
                [u[0], u[1], u[2]]
            } else {
                self.terminal_control()
            };
            rec.controls.push(u);
            rec.margins.push(
                self.obstacles
                    .iter()
                    .map(|o| ((x[0] - o.p_c[0]).powi(2) + (x[1] - o.p_c[1]).powi(2)).sqrt() - o.r)
                    .collect(),
            );
        }
        rec.cost = rec.controls.iter().map(|u| norm(u)).sum();
        rec
    }
}

/// Trajectory in physical terms. `controls` has one entry per point; the
/// last is the fixed terminal control.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
    pub controls: Vec<[f64; 3]>,
    /// `‖H x_i − p_c‖ − r` per step and obstacle.
    pub margins: Vec<Vec<f64>>,
    /// `Σ ‖u_i‖`
    pub cost: f64,
}

impl TrajectoryRecord {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().flatten().fold(f64::INFINITY, |a, v| a.min(*v))
    }
}
