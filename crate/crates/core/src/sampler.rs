//! Hit-and-run sampling of a convex set given in cone-program row form,
//! `{x : b − A x ∈ K}`.
//!
//! Zero-cone rows define an affine subspace; directions are drawn in its
//! null space so every sample satisfies them to rounding error. Chords are
//! computed exactly per cone block.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::conic::{self, orthant_step, soc_step, Cone, ConicProgram, SolveStatus, SolverSettings};
use crate::error::{Result, ScvxError};

pub struct HitAndRun<'a> {
    program: &'a ConicProgram,
    /// Columns span the null space of the zero-cone rows.
    basis: DMatrix<f64>,
    x: Vec<f64>,
    slack: Vec<f64>,
}

impl<'a> HitAndRun<'a> {
    /// Starts from `start`, which must lie in the relative interior.
    pub fn new(program: &'a ConicProgram, start: Vec<f64>) -> Result<Self> {
        let n = program.num_vars();
        let mut eq_rows = Vec::new();
        let mut row = 0;
        for k in &program.cones {
            if let Cone::Zero(d) = k {
                eq_rows.extend(row..row + d);
            }
            row += k.dim();
        }
        let basis = if eq_rows.is_empty() {
            DMatrix::identity(n, n)
        } else {
            let e = program.a.select_rows(&eq_rows).to_dense();
            null_space(&e, n)
        };
        let mut s = Self {
            program,
            basis,
            slack: Vec::new(),
            x: start,
        };
        s.slack = s.slack_at(&s.x);
        Ok(s)
    }

    /// Starting point near the analytic center, from a zero-cost solve.
    pub fn centered(program: &'a ConicProgram) -> Result<Self> {
        let mut feas = program.clone();
        feas.c.iter_mut().for_each(|v| *v = 0.0);
        let sol = conic::solve(&feas, &SolverSettings::default())?;
        if sol.status != SolveStatus::Optimal {
            return Err(ScvxError::Solver {
                status: sol.status,
                iterations: sol.iterations,
                context: "interior point for sampling".into(),
            });
        }
        Self::new(program, sol.x)
    }

    fn slack_at(&self, x: &[f64]) -> Vec<f64> {
        let ax = self.program.a.mul_vec(x);
        self.program.b.iter().zip(ax).map(|(b, a)| b - a).collect()
    }

    pub fn current(&self) -> &[f64] {
        &self.x
    }

    /// Feasible interval `[lo, hi]` of `x + α d` where `ds = −A d`.
    fn chord(&self, ds: &[f64]) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut row = 0;
        for k in &self.program.cones {
            let r = row..row + k.dim();
            row += k.dim();
            let (u, d) = (&self.slack[r.clone()], &ds[r]);
            let neg: Vec<f64> = d.iter().map(|v| -v).collect();
            let (up, down) = match k {
                Cone::Zero(_) => continue,
                Cone::NonNeg(_) => (orthant_step(u, d), orthant_step(u, &neg)),
                Cone::Soc(_) => (soc_step(u, d), soc_step(u, &neg)),
            };
            hi = hi.min(up);
            lo = lo.max(-down);
        }
        (lo, hi)
    }

    /// One hit-and-run move; returns the new point.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> Result<&[f64]> {
        let k = self.basis.ncols();
        if k == 0 {
            return Ok(&self.x);
        }
        let xi: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let mut d = vec![0.0; self.x.len()];
        for (j, v) in xi.iter().enumerate() {
            for (i, di) in d.iter_mut().enumerate() {
                *di += self.basis[(i, j)] * v;
            }
        }
        let ad = self.program.a.mul_vec(&d);
        let ds: Vec<f64> = ad.iter().map(|v| -v).collect();
        let (lo, hi) = self.chord(&ds);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(ScvxError::InvalidProblem("sampled set is unbounded".into()));
        }
        let alpha = if hi > lo { rng.random_range(lo..=hi) } else { 0.0 };
        for (x, di) in self.x.iter_mut().zip(&d) {
            *x += alpha * di;
        }
        for (s, di) in self.slack.iter_mut().zip(&ds) {
            *s += alpha * di;
        }
        Ok(&self.x)
    }
}

/// Orthonormal basis of `{x : E x = 0}` from the SVD of `E`.
fn null_space(e: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    let p = e.len();
    let mat = DMatrix::from_fn(p, n, |i, j| e[i][j]);
    // pad to square so the SVD returns a full right basis
    let square = if p < n {
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (p, n)).copy_from(&mat);
        m
    } else {
        mat
    };
    let svd = square.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let top = svd.singular_values.iter().fold(0.0_f64, |a, v| a.max(*v));
    let tol = 1e-10 * top.max(1.0);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= tol)
        .collect();
    let mut basis = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        for j in 0..n {
            basis[(j, c)] = vt[(i, j)];
        }
    }
    basis
}
