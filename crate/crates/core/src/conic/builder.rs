use std::ops::Range;

use super::{Cone, ConicProgram, SparseMatrix};

/// Affine expression `Σ coef·x[col] + constant` over program columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(col: usize) -> Self {
        Self {
            terms: vec![(col, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(mut self, col: usize, coef: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((col, coef));
        }
        self
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, k: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }

    pub fn add(mut self, other: &LinExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(c, k)| k * x[*c]).sum::<f64>()
    }
}

/// Incremental construction of a [`ConicProgram`]: each cone constraint is
/// given as the list of affine expressions its slack must equal,
/// `s = expr(x) ∈ K`.
#[derive(Debug, Clone, Default)]
pub struct ProgramBuilder {
    n_cols: usize,
    c: Vec<f64>,
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<Cone>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_columns(&mut self, k: usize) -> Range<usize> {
        let start = self.n_cols;
        self.n_cols += k;
        self.c.resize(self.n_cols, 0.0);
        start..self.n_cols
    }

    pub fn num_cols(&self) -> usize {
        self.n_cols
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn add_cost(&mut self, col: usize, coef: f64) {
        self.c[col] += coef;
    }

    fn push_rows(&mut self, exprs: &[LinExpr]) -> Range<usize> {
        let start = self.b.len();
        for (k, e) in exprs.iter().enumerate() {
            let row = start + k;
            for &(col, coef) in &e.terms {
                assert!(col < self.n_cols, "column {col} not allocated");
                self.triplets.push((row, col, -coef));
            }
            self.b.push(e.constant);
        }
        start..self.b.len()
    }

    fn push_cone(&mut self, cone: Cone) {
        match (self.cones.last_mut(), cone) {
            (Some(Cone::Zero(d)), Cone::Zero(k)) | (Some(Cone::NonNeg(d)), Cone::NonNeg(k)) => *d += k,
            _ => self.cones.push(cone),
        }
    }

    /// Rows `expr = 0`.
    pub fn add_zero(&mut self, exprs: &[LinExpr]) -> Range<usize> {
        if exprs.is_empty() {
            return self.b.len()..self.b.len();
        }
        self.push_cone(Cone::Zero(exprs.len()));
        self.push_rows(exprs)
    }

    /// Rows `expr ≥ 0`.
    pub fn add_nonneg(&mut self, exprs: &[LinExpr]) -> Range<usize> {
        if exprs.is_empty() {
            return self.b.len()..self.b.len();
        }
        self.push_cone(Cone::NonNeg(exprs.len()));
        self.push_rows(exprs)
    }

    /// One second-order cone `expr₀ ≥ ‖(expr₁, …)‖`.
    pub fn add_soc(&mut self, exprs: &[LinExpr]) -> Range<usize> {
        assert!(!exprs.is_empty(), "empty second-order cone");
        self.push_cone(Cone::Soc(exprs.len()));
        self.push_rows(exprs)
    }

    pub fn build(self) -> ConicProgram {
        ConicProgram {
            a: SparseMatrix::from_triplets(self.b.len(), self.n_cols, &self.triplets),
            c: self.c,
            b: self.b,
            cones: self.cones,
        }
    }
}
