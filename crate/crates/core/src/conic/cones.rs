//! Cone algebra for the nonnegative orthant and second-order cones:
//! Jordan products, Nesterov–Todd scaling, and exact step-to-boundary.

use serde::{Deserialize, Serialize};

/// One block of the product cone, in row order of a [`super::ConicProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    /// `s = 0`; the dual variable is free.
    Zero(usize),
    /// `s ≥ 0` componentwise.
    NonNeg(usize),
    /// `s₀ ≥ ‖s₁..‖₂`.
    Soc(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::NonNeg(d) | Cone::Soc(d) => d,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Cone::Zero(_) => "zero",
            Cone::NonNeg(_) => "nonneg",
            Cone::Soc(_) => "soc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BlockKind {
    NonNeg,
    Soc,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Block {
    pub kind: BlockKind,
    pub offset: usize,
    pub dim: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.dim
    }
}

/// The inequality part (orthant and second-order cones) of a product cone,
/// laid out contiguously.
#[derive(Debug, Clone)]
pub(crate) struct ConeSet {
    pub blocks: Vec<Block>,
    pub dim: usize,
}

/// Nesterov–Todd scaling of one block.
#[derive(Debug, Clone)]
pub(crate) enum BlockScaling {
    NonNeg { w: Vec<f64> },
    Soc { eta: f64, wbar: Vec<f64> },
}

#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    pub blocks: Vec<BlockScaling>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `u₀² − ‖u₁‖²`, computed as a product of sum and difference.
fn soc_residual(u: &[f64]) -> f64 {
    let n1 = norm(&u[1..]);
    (u[0] - n1) * (u[0] + n1)
}

impl ConeSet {
    /// Builds the inequality cone set from the non-zero cones in `cones`,
    /// merging consecutive orthant blocks.
    pub fn from_cones<'a>(cones: impl Iterator<Item = &'a Cone>) -> Self {
        let mut blocks: Vec<Block> = Vec::new();
        let mut offset = 0;
        for cone in cones {
            match *cone {
                Cone::Zero(_) => {}
                Cone::NonNeg(d) => {
                    if d == 0 {
                        continue;
                    }
                    if let Some(last) = blocks.last_mut() {
                        if last.kind == BlockKind::NonNeg && last.offset + last.dim == offset {
                            last.dim += d;
                            offset += d;
                            continue;
                        }
                    }
                    blocks.push(Block {
                        kind: BlockKind::NonNeg,
                        offset,
                        dim: d,
                    });
                    offset += d;
                }
                Cone::Soc(d) => {
                    blocks.push(Block {
                        kind: BlockKind::Soc,
                        offset,
                        dim: d,
                    });
                    offset += d;
                }
            }
        }
        Self { blocks, dim: offset }
    }

    /// Barrier degree: one per orthant coordinate, one per second-order cone.
    pub fn degree(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::NonNeg => b.dim,
                BlockKind::Soc => 1,
            })
            .sum()
    }

    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        for b in &self.blocks {
            match b.kind {
                BlockKind::NonNeg => e[b.range()].iter_mut().for_each(|v| *v = 1.0),
                BlockKind::Soc => e[b.offset] = 1.0,
            }
        }
        e
    }

    /// Smallest `α` such that `v + α e` lies in the closed cone.
    pub fn boundary_shift(&self, v: &[f64]) -> f64 {
        let mut alpha = f64::NEG_INFINITY;
        for b in &self.blocks {
            let u = &v[b.range()];
            let a = match b.kind {
                BlockKind::NonNeg => u.iter().fold(f64::NEG_INFINITY, |m, x| m.max(-x)),
                BlockKind::Soc => norm(&u[1..]) - u[0],
            };
            alpha = alpha.max(a);
        }
        alpha
    }

    /// Computes the NT scaling point for strictly interior `s`, `z` and
    /// returns it with `λ = W z = W⁻¹ s`. `None` if a block has left the
    /// interior.
    pub fn nt_scaling(&self, s: &[f64], z: &[f64]) -> Option<(Scaling, Vec<f64>)> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut lambda = vec![0.0; self.dim];
        for b in &self.blocks {
            let (sb, zb) = (&s[b.range()], &z[b.range()]);
            match b.kind {
                BlockKind::NonNeg => {
                    let mut w = Vec::with_capacity(b.dim);
                    for i in 0..b.dim {
                        if !(sb[i] > 0.0 && zb[i] > 0.0) {
                            return None;
                        }
                        w.push((sb[i] / zb[i]).sqrt());
                        lambda[b.offset + i] = (sb[i] * zb[i]).sqrt();
                    }
                    blocks.push(BlockScaling::NonNeg { w });
                }
                BlockKind::Soc => {
                    let sres = soc_residual(sb);
                    let zres = soc_residual(zb);
                    if !(sres > 0.0 && zres > 0.0 && sb[0] > 0.0 && zb[0] > 0.0) {
                        return None;
                    }
                    let (sn, zn) = (sres.sqrt(), zres.sqrt());
                    let sz: f64 = dot(sb, zb) / (sn * zn);
                    let gamma = ((1.0 + sz) / 2.0).sqrt();
                    let mut wbar = vec![0.0; b.dim];
                    wbar[0] = (sb[0] / sn + zb[0] / zn) / (2.0 * gamma);
                    for i in 1..b.dim {
                        wbar[i] = (sb[i] / sn - zb[i] / zn) / (2.0 * gamma);
                    }
                    let eta = (sres / zres).sqrt().sqrt();
                    let scaling = BlockScaling::Soc { eta, wbar };
                    let l = &mut lambda[b.range()];
                    apply_block(&scaling, zb, l, false);
                    blocks.push(scaling);
                }
            }
        }
        Some((Scaling { blocks }, lambda))
    }

    /// `out = W v` (or `W⁻¹ v` when `inverse`).
    pub fn apply_scaling(&self, sc: &Scaling, v: &[f64], out: &mut [f64], inverse: bool) {
        for (b, bs) in self.blocks.iter().zip(&sc.blocks) {
            apply_block(bs, &v[b.range()], &mut out[b.range()], inverse);
        }
    }

    /// Jordan product `u ∘ v`.
    pub fn jordan_prod(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for b in &self.blocks {
            let (ub, vb) = (&u[b.range()], &v[b.range()]);
            let o = &mut out[b.range()];
            match b.kind {
                BlockKind::NonNeg => {
                    for i in 0..b.dim {
                        o[i] = ub[i] * vb[i];
                    }
                }
                BlockKind::Soc => {
                    o[0] = dot(ub, vb);
                    for i in 1..b.dim {
                        o[i] = ub[0] * vb[i] + vb[0] * ub[i];
                    }
                }
            }
        }
        out
    }

    /// Solves `λ ∘ x = v` for `x` (the inverse Jordan product `λ ⋄ v`).
    pub fn jordan_div(&self, lambda: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for b in &self.blocks {
            let (lb, vb) = (&lambda[b.range()], &v[b.range()]);
            let o = &mut out[b.range()];
            match b.kind {
                BlockKind::NonNeg => {
                    for i in 0..b.dim {
                        o[i] = vb[i] / lb[i];
                    }
                }
                BlockKind::Soc => {
                    let rho = soc_residual(lb);
                    let l1v1 = dot(&lb[1..], &vb[1..]);
                    let x0 = (lb[0] * vb[0] - l1v1) / rho;
                    o[0] = x0;
                    for i in 1..b.dim {
                        o[i] = (vb[i] - x0 * lb[i]) / lb[0];
                    }
                }
            }
        }
        out
    }

    /// Largest `α ≥ 0` with `u + α d` in the closed cone, for `u` in the
    /// cone. Infinite when the whole ray stays inside.
    pub fn max_step(&self, u: &[f64], d: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for b in &self.blocks {
            let (ub, db) = (&u[b.range()], &d[b.range()]);
            let a = match b.kind {
                BlockKind::NonNeg => orthant_step(ub, db),
                BlockKind::Soc => soc_step(ub, db),
            };
            alpha = alpha.min(a);
        }
        alpha
    }
}

fn apply_block(bs: &BlockScaling, v: &[f64], out: &mut [f64], inverse: bool) {
    match bs {
        BlockScaling::NonNeg { w } => {
            for i in 0..w.len() {
                out[i] = if inverse { v[i] / w[i] } else { v[i] * w[i] };
            }
        }
        BlockScaling::Soc { eta, wbar } => {
            let w1v1 = dot(&wbar[1..], &v[1..]);
            let (sign, scale) = if inverse { (-1.0, 1.0 / eta) } else { (1.0, *eta) };
            out[0] = scale * (wbar[0] * v[0] + sign * w1v1);
            let coef = w1v1 / (1.0 + wbar[0]) + sign * v[0];
            for i in 1..v.len() {
                out[i] = scale * (v[i] + coef * wbar[i]);
            }
        }
    }
}

pub(crate) fn orthant_step(u: &[f64], d: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (ui, di) in u.iter().zip(d) {
        if *di < 0.0 {
            alpha = alpha.min(-ui / di);
        }
    }
    alpha.max(0.0)
}

/// Exact distance along `d` from `u` to the boundary of the second-order cone.
pub(crate) fn soc_step(u: &[f64], d: &[f64]) -> f64 {
    let a = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let b = u[0] * d[0] - dot(&u[1..], &d[1..]);
    let c = soc_residual(u).max(0.0);
    let mut alpha = f64::INFINITY;
    if d[0] < 0.0 {
        alpha = (-u[0] / d[0]).max(0.0);
    }
    // f(α) = aα² + 2bα + c; first positive root.
    let root = if a.abs() <= 1e-300 {
        if b < 0.0 {
            -c / (2.0 * b)
        } else {
            f64::INFINITY
        }
    } else {
        let disc = b * b - a * c;
        if disc < 0.0 {
            f64::INFINITY
        } else {
            let q = -(b + b.signum() * disc.sqrt());
            let r1 = if a != 0.0 { q / a } else { f64::INFINITY };
            let r2 = if q != 0.0 { c / q } else { f64::INFINITY };
            [r1, r2]
                .into_iter()
                .filter(|r| *r >= 0.0)
                .fold(f64::INFINITY, f64::min)
        }
    };
    alpha.min(root).max(0.0)
}
