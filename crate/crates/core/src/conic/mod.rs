//! Primal-dual interior-point solver for cone programs over the zero cone,
//! the nonnegative orthant and second-order cones.
//!
//! A [`ConicProgram`] is
//!
//! ```text
//! minimize    cᵀx
//! subject to  A x + s = b,   s ∈ K = K₁ × … × K_r
//! ```
//!
//! with dual `maximize −bᵀz  s.t.  Aᵀz + c = 0, z ∈ K*`.

mod builder;
mod cones;
mod ipm;
mod kkt;
mod sparse;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use builder::{LinExpr, ProgramBuilder};
pub use cones::Cone;
pub(crate) use cones::{orthant_step, soc_step};
pub use sparse::SparseMatrix;

use crate::error::{Result, ScvxError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub c: Vec<f64>,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// Checks dimensions and cone sizes.
    pub fn validate(&self) -> Result<()> {
        if self.a.cols() != self.c.len() || self.a.rows() != self.b.len() {
            return Err(ScvxError::Dimension(format!(
                "A is {}x{}, c has {} entries, b has {}",
                self.a.rows(),
                self.a.cols(),
                self.c.len(),
                self.b.len()
            )));
        }
        let total: usize = self.cones.iter().map(Cone::dim).sum();
        if total != self.b.len() {
            return Err(ScvxError::Dimension(format!(
                "cone dimensions sum to {total}, program has {} rows",
                self.b.len()
            )));
        }
        if let Some(bad) = self.cones.iter().find(|k| matches!(k, Cone::Soc(0))) {
            return Err(ScvxError::Dimension(format!("empty {} cone", bad.name())));
        }
        let finite = self.c.iter().chain(&self.b).all(|v| v.is_finite())
            && self.a.triplets().iter().all(|t| t.2.is_finite());
        if !finite {
            return Err(ScvxError::Dimension("non-finite program data".into()));
        }
        Ok(())
    }

    /// Text dump: a header line, the cone list, then `c`, `b`, and the
    /// `(row, col, value)` triplets of `A`, one per line.
    ///
    /// ```text
    /// conic-program rows <m> cols <n> nnz <k>
    /// cones zero:3 nonneg:2 soc:4
    /// c <j> <value>
    /// b <i> <value>
    /// a <i> <j> <value>
    /// ```
    pub fn to_triplet_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "conic-program rows {} cols {} nnz {}",
            self.num_rows(),
            self.num_vars(),
            self.a.nnz()
        );
        out.push_str("cones");
        for k in &self.cones {
            let _ = write!(out, " {}:{}", k.name(), k.dim());
        }
        out.push('\n');
        for (j, v) in self.c.iter().enumerate() {
            let _ = writeln!(out, "c {j} {v:.17e}");
        }
        for (i, v) in self.b.iter().enumerate() {
            let _ = writeln!(out, "b {i} {v:.17e}");
        }
        for (i, j, v) in self.a.triplets() {
            let _ = writeln!(out, "a {i} {j} {v:.17e}");
        }
        out
    }

    /// Inverse of [`Self::to_triplet_text`].
    pub fn from_triplet_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| ScvxError::Parse(format!("triplet dump: {msg}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if header.len() != 7 || header[0] != "conic-program" {
            return Err(bad("bad header"));
        }
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| bad(s));
        let parse_f64 = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
        let rows = parse_usize(header[2])?;
        let cols = parse_usize(header[4])?;
        let cone_line = lines.next().ok_or_else(|| bad("missing cones"))?;
        let mut cones = Vec::new();
        for tok in cone_line.split_whitespace().skip(1) {
            let (kind, dim) = tok.split_once(':').ok_or_else(|| bad(tok))?;
            let dim = parse_usize(dim)?;
            cones.push(match kind {
                "zero" => Cone::Zero(dim),
                "nonneg" => Cone::NonNeg(dim),
                "soc" => Cone::Soc(dim),
                _ => return Err(bad(kind)),
            });
        }
        let mut c = vec![0.0; cols];
        let mut b = vec![0.0; rows];
        let mut trip = Vec::new();
        for line in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            match t.as_slice() {
                ["c", j, v] => *c.get_mut(parse_usize(j)?).ok_or_else(|| bad(j))? = parse_f64(v)?,
                ["b", i, v] => *b.get_mut(parse_usize(i)?).ok_or_else(|| bad(i))? = parse_f64(v)?,
                ["a", i, j, v] => {
                    let (i, j) = (parse_usize(i)?, parse_usize(j)?);
                    if i >= rows || j >= cols {
                        return Err(bad(line));
                    }
                    trip.push((i, j, parse_f64(v)?));
                }
                [] => {}
                _ => return Err(bad(line)),
            }
        }
        let prog = Self {
            c,
            a: SparseMatrix::from_triplets(rows, cols, &trip),
            b,
            cones,
        };
        prog.validate()?;
        Ok(prog)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
    NumericalError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Bound on each of the three normalized residuals.
    pub tol: f64,
    pub max_iter: usize,
    /// Static regularization of the reduced KKT matrix.
    pub static_reg: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            static_reg: 1e-8,
        }
    }
}

/// Normalized residuals of a primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖Ax + s − b‖ / (1 + ‖b‖)`
    pub primal: f64,
    /// `‖Aᵀz + c‖ / (1 + ‖c‖)`
    pub dual: f64,
    /// `|cᵀx + bᵀz| / (1 + |cᵀx|)`
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    /// Dual variable, one entry per row of `A`.
    pub z: Vec<f64>,
    pub status: SolveStatus,
    /// Absolute duality gap `cᵀx + bᵀz`.
    pub gap: f64,
    pub iterations: usize,
    pub residuals: Residuals,
}

impl ConicSolution {
    pub fn primal_objective(&self, program: &ConicProgram) -> f64 {
        dot(&program.c, &self.x)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Recomputes the three normalized residuals from raw program data.
pub fn residuals(program: &ConicProgram, x: &[f64], s: &[f64], z: &[f64]) -> Residuals {
    let mut rp = program.a.mul_vec(x);
    for ((r, si), bi) in rp.iter_mut().zip(s).zip(&program.b) {
        *r += si - bi;
    }
    let mut rd = program.a.tmul_vec(z);
    for (r, ci) in rd.iter_mut().zip(&program.c) {
        *r += ci;
    }
    let cx = dot(&program.c, x);
    let bz = dot(&program.b, z);
    Residuals {
        primal: norm2(&rp) / (1.0 + norm2(&program.b)),
        dual: norm2(&rd) / (1.0 + norm2(&program.c)),
        gap: (cx + bz).abs() / (1.0 + cx.abs()),
    }
}

/// Residuals of a returned solution.
pub fn solution_residuals(program: &ConicProgram, sol: &ConicSolution) -> Residuals {
    residuals(program, &sol.x, &sol.s, &sol.z)
}

/// Solves `program` with the homogeneous self-dual interior-point method.
///
/// Never panics on bad numerics; failures come back as a status.
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution> {
    program.validate()?;
    Ok(ipm::solve(program, settings))
}
