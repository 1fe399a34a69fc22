//! KKT system of the interior-point method.
//!
//! The scaled system
//!
//! ```text
//! [ 0  Aᵀ  Gᵀ  ] [x]   [rx]
//! [ A  0   0   ] [y] = [ry]
//! [ G  0  -W²  ] [z]   [rz]
//! ```
//!
//! is regularized to the quasi-definite matrix
//! `[[δI, Aᵀ, Gᵀ], [A, -δI, 0], [G, 0, -W² - δI]]` and factored as `LDLᵀ`
//! in envelope (skyline) storage after a reverse Cuthill–McKee ordering.
//! Iterative refinement runs against the unregularized system.

use std::collections::VecDeque;

use super::cones::{BlockKind, BlockScaling, ConeSet, Scaling};
use super::sparse::SparseMatrix;

/// Pivots smaller than this (with the expected sign) are replaced.
const PIVOT_EPS: f64 = 1e-13;
const DYNAMIC_REG: f64 = 7e-8;
const MAX_REFINE: usize = 12;

pub(crate) struct Kkt<'a> {
    a: &'a SparseMatrix,
    g: &'a SparseMatrix,
    cones: &'a ConeSet,
    n: usize,
    p: usize,
    m: usize,
    static_reg: f64,
    /// `perm[new] = old`
    perm: Vec<usize>,
    iperm: Vec<usize>,
    first: Vec<usize>,
    ptr: Vec<usize>,
    vals: Vec<f64>,
    scaling: Option<Scaling>,
    pub dynamic_regularizations: usize,
}

impl<'a> Kkt<'a> {
    pub fn new(a: &'a SparseMatrix, g: &'a SparseMatrix, cones: &'a ConeSet, static_reg: f64) -> Self {
        let n = a.cols();
        let p = a.rows();
        let m = g.rows();
        let dim = n + p + m;

        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); dim];
        let mut link = |i: usize, j: usize| {
            adj[i].push(j);
            adj[j].push(i);
        };
        for r in 0..p {
            for (c, _) in a.row(r) {
                link(n + r, c);
            }
        }
        for r in 0..m {
            for (c, _) in g.row(r) {
                link(n + p + r, c);
            }
        }
        for b in &cones.blocks {
            if b.kind == BlockKind::Soc {
                for i in b.range() {
                    for j in b.offset..i {
                        link(n + p + i, n + p + j);
                    }
                }
            }
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }

        let perm = reverse_cuthill_mckee(&adj);
        let mut iperm = vec![0; dim];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first: Vec<usize> = (0..dim).collect();
        for (old, list) in adj.iter().enumerate() {
            let i = iperm[old];
            for &nb in list {
                let j = iperm[nb];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut ptr = Vec::with_capacity(dim + 1);
        ptr.push(0);
        for i in 0..dim {
            ptr.push(ptr[i] + i - first[i] + 1);
        }
        let vals = vec![0.0; ptr[dim]];

        Self {
            a,
            g,
            cones,
            n,
            p,
            m,
            static_reg,
            perm,
            iperm,
            first,
            ptr,
            vals,
            scaling: None,
            dynamic_regularizations: 0,
        }
    }

    /// Number of stored entries in the factor envelope.
    #[allow(dead_code)]
    pub fn envelope_size(&self) -> usize {
        self.vals.len()
    }

    fn idx(&self, old_i: usize, old_j: usize) -> usize {
        let (mut i, mut j) = (self.iperm[old_i], self.iperm[old_j]);
        if i < j {
            std::mem::swap(&mut i, &mut j);
        }
        debug_assert!(j >= self.first[i]);
        self.ptr[i] + j - self.first[i]
    }

    /// Assembles and factors the regularized matrix for scaling `sc`.
    pub fn factor(&mut self, sc: Scaling) {
        let (n, p) = (self.n, self.p);
        let zo = n + p;
        self.vals.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            let k = self.idx(j, j);
            self.vals[k] += self.static_reg;
        }
        for r in 0..p {
            let k = self.idx(n + r, n + r);
            self.vals[k] -= self.static_reg;
            for (c, v) in self.a.row(r) {
                let k = self.idx(n + r, c);
                self.vals[k] += v;
            }
        }
        for r in 0..self.m {
            for (c, v) in self.g.row(r) {
                let k = self.idx(zo + r, c);
                self.vals[k] += v;
            }
        }
        for (b, bs) in self.cones.blocks.iter().zip(&sc.blocks) {
            match bs {
                BlockScaling::NonNeg { w } => {
                    for (i, wi) in w.iter().enumerate() {
                        let r = zo + b.offset + i;
                        let k = self.idx(r, r);
                        self.vals[k] -= wi * wi + self.static_reg;
                    }
                }
                BlockScaling::Soc { eta, wbar } => {
                    // W² = η² (2 w̄ w̄ᵀ − J)
                    let e2 = eta * eta;
                    for i in 0..b.dim {
                        for j in 0..=i {
                            let mut v = 2.0 * wbar[i] * wbar[j];
                            if i == j {
                                v += if i == 0 { -1.0 } else { 1.0 };
                            }
                            let k = self.idx(zo + b.offset + i, zo + b.offset + j);
                            self.vals[k] -= e2 * v;
                            if i == j {
                                self.vals[k] -= self.static_reg;
                            }
                        }
                    }
                }
            }
        }
        self.scaling = Some(sc);
        self.factor_envelope();
    }

    fn factor_envelope(&mut self) {
        let dim = self.n + self.p + self.m;
        let mut regs = 0;
        for i in 0..dim {
            let fi = self.first[i];
            let (head, tail) = self.vals.split_at_mut(self.ptr[i]);
            let row_i = &mut tail[..i - fi + 1];
            // row_i[k - fi] holds t_ik = L_ik D_k while j sweeps
            for j in fi..i {
                let fj = self.first[j];
                let start = fi.max(fj);
                let row_j = &head[self.ptr[j]..self.ptr[j + 1]];
                let mut s = row_i[j - fi];
                let ti = &row_i[start - fi..j - fi];
                let lj = &row_j[start - fj..j - fj];
                for (a, b) in ti.iter().zip(lj) {
                    s -= a * b;
                }
                row_i[j - fi] = s;
            }
            let mut d = row_i[i - fi];
            for k in fi..i {
                let dk = head[self.ptr[k + 1] - 1];
                let t = row_i[k - fi];
                let l = t / dk;
                d -= t * l;
                row_i[k - fi] = l;
            }
            let old = self.perm[i];
            let sign = if old < self.n { 1.0 } else { -1.0 };
            if sign * d <= PIVOT_EPS {
                d = sign * DYNAMIC_REG;
                regs += 1;
            }
            row_i[i - fi] = d;
        }
        self.dynamic_regularizations = regs;
    }

    fn solve_factored(&self, rhs: &mut [f64]) {
        let dim = rhs.len();
        let mut x: Vec<f64> = (0..dim).map(|i| rhs[self.perm[i]]).collect();
        for i in 0..dim {
            let fi = self.first[i];
            let row = &self.vals[self.ptr[i]..self.ptr[i + 1]];
            let mut s = x[i];
            for (k, l) in (fi..i).zip(row) {
                s -= l * x[k];
            }
            x[i] = s;
        }
        for i in 0..dim {
            x[i] /= self.vals[self.ptr[i + 1] - 1];
        }
        for i in (0..dim).rev() {
            let fi = self.first[i];
            let row = &self.vals[self.ptr[i]..self.ptr[i + 1]];
            let xi = x[i];
            for (k, l) in (fi..i).zip(row) {
                x[k] -= l * xi;
            }
        }
        for i in 0..dim {
            rhs[self.perm[i]] = x[i];
        }
    }

    fn w_squared(&self, v: &[f64]) -> Vec<f64> {
        let sc = self.scaling.as_ref().expect("factor first");
        let mut t = vec![0.0; v.len()];
        let mut out = vec![0.0; v.len()];
        self.cones.apply_scaling(sc, v, &mut t, false);
        self.cones.apply_scaling(sc, &t, &mut out, false);
        out
    }

    fn factored_step(&self, ex: &[f64], ey: &[f64], ez: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rhs = Vec::with_capacity(self.n + self.p + self.m);
        rhs.extend_from_slice(ex);
        rhs.extend_from_slice(ey);
        rhs.extend_from_slice(ez);
        self.solve_factored(&mut rhs);
        let z = rhs.split_off(self.n + self.p);
        let y = rhs.split_off(self.n);
        (rhs, y, z)
    }

    /// Solves the unregularized three-block system with iterative refinement.
    pub fn solve(&self, rx: &[f64], ry: &[f64], rz: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (mut x, mut y, mut z) = self.factored_step(rx, ry, rz);
        let scale = 1.0 + inf_norm(rx).max(inf_norm(ry)).max(inf_norm(rz));
        let mut last = f64::INFINITY;
        for _ in 0..MAX_REFINE {
            // residual of the exact system
            let mut ex = rx.to_vec();
            self.a.gemv_t(-1.0, &y, &mut ex);
            self.g.gemv_t(-1.0, &z, &mut ex);
            let mut ey = ry.to_vec();
            self.a.gemv(-1.0, &x, &mut ey);
            let mut ez = rz.to_vec();
            self.g.gemv(-1.0, &x, &mut ez);
            let w2z = self.w_squared(&z);
            for (e, v) in ez.iter_mut().zip(&w2z) {
                *e += v;
            }
            let err = inf_norm(&ex).max(inf_norm(&ey)).max(inf_norm(&ez));
            if err <= 1e-15 * scale || err >= 0.5 * last {
                break;
            }
            last = err;
            let (dx, dy, dz) = self.factored_step(&ex, &ey, &ez);
            axpy(&mut x, &dx);
            axpy(&mut y, &dy);
            axpy(&mut z, &dz);
        }
        (x, y, z)
    }
}

fn axpy(x: &mut [f64], d: &[f64]) {
    for (a, b) in x.iter_mut().zip(d) {
        *a += b;
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Reverse Cuthill–McKee ordering; returns `perm[new] = old`.
fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs = |start: usize, visited: &mut Vec<bool>, order: &mut Vec<usize>| {
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            nbrs.sort_by_key(|&u| (degree[u], u));
            for u in nbrs {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    };

    while order.len() < n {
        let start = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
            .unwrap();
        // one pseudo-peripheral sweep: restart from the far end of a BFS
        let mut probe_visited = visited.clone();
        let mut probe = Vec::new();
        bfs(start, &mut probe_visited, &mut probe);
        let far = *probe.last().unwrap();
        bfs(far, &mut visited, &mut order);
    }
    order.reverse();
    order
}
