//! Homogeneous self-dual embedding with Nesterov–Todd scaled Mehrotra
//! predictor-corrector steps.
//!
//! Internally the zero-cone rows become equalities `A x = b` with free
//! multipliers `y`, and the remaining rows become `G x + s = h, s ∈ K`.
//! The embedding variables `(x, y, z, s, τ, κ)` satisfy
//!
//! ```text
//! Aᵀy + Gᵀz + cτ = 0,  Ax = bτ,  Gx + s = hτ,  κ + cᵀx + bᵀy + hᵀz = 0.
//! ```

use super::cones::{BlockScaling, ConeSet, Scaling};
use super::kkt::Kkt;
use super::sparse::SparseMatrix;
use super::{dot, norm2, residuals, Cone, ConicProgram, ConicSolution, SolveStatus, SolverSettings};

const STEP_FRACTION: f64 = 0.99;
const MIN_STEP: f64 = 1e-10;

struct Split {
    a: SparseMatrix,
    b: Vec<f64>,
    g: SparseMatrix,
    h: Vec<f64>,
    eq_rows: Vec<usize>,
    cone_rows: Vec<usize>,
    cones: ConeSet,
}

fn split(program: &ConicProgram) -> Split {
    let mut eq_rows = Vec::new();
    let mut cone_rows = Vec::new();
    let mut row = 0;
    for k in &program.cones {
        let r = row..row + k.dim();
        match k {
            Cone::Zero(_) => eq_rows.extend(r),
            _ => cone_rows.extend(r),
        }
        row += k.dim();
    }
    Split {
        a: program.a.select_rows(&eq_rows),
        b: eq_rows.iter().map(|&r| program.b[r]).collect(),
        g: program.a.select_rows(&cone_rows),
        h: cone_rows.iter().map(|&r| program.b[r]).collect(),
        cones: ConeSet::from_cones(program.cones.iter()),
        eq_rows,
        cone_rows,
    }
}

fn identity_scaling(cones: &ConeSet) -> Scaling {
    use super::cones::BlockKind;
    Scaling {
        blocks: cones
            .blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::NonNeg => BlockScaling::NonNeg { w: vec![1.0; b.dim] },
                BlockKind::Soc => {
                    let mut wbar = vec![0.0; b.dim];
                    wbar[0] = 1.0;
                    BlockScaling::Soc { eta: 1.0, wbar }
                }
            })
            .collect(),
    }
}

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

fn axpy(out: &mut [f64], alpha: f64, d: &[f64]) {
    for (o, v) in out.iter_mut().zip(d) {
        *o += alpha * v;
    }
}

pub(super) fn solve(program: &ConicProgram, settings: &SolverSettings) -> ConicSolution {
    let sp = split(program);
    let n = program.num_vars();
    let m = sp.cones.dim;
    let c = &program.c;
    let degree = sp.cones.degree() as f64;
    let e = sp.cones.identity();

    let mut kkt = Kkt::new(&sp.a, &sp.g, &sp.cones, settings.static_reg);

    // Initial point from two least-squares solves with W = I.
    kkt.factor(identity_scaling(&sp.cones));
    let (x0, _, zp) = kkt.solve(&vec![0.0; n], &sp.b, &sp.h);
    let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
    let (_, y0, zd) = kkt.solve(&neg_c, &vec![0.0; sp.b.len()], &vec![0.0; m]);
    let mut s0: Vec<f64> = zp.iter().map(|v| -v).collect();
    let alpha_p = sp.cones.boundary_shift(&s0);
    if alpha_p >= -1e-8 {
        axpy(&mut s0, 1.0 + alpha_p.max(0.0), &e);
    }
    let mut z0 = zd;
    let alpha_d = sp.cones.boundary_shift(&z0);
    if alpha_d >= -1e-8 {
        axpy(&mut z0, 1.0 + alpha_d.max(0.0), &e);
    }
    let mut it = Iterate {
        x: x0,
        y: y0,
        z: z0,
        s: s0,
        tau: 1.0,
        kappa: 1.0,
    };

    let bnorm = (norm2(&sp.b).powi(2) + norm2(&sp.h).powi(2)).sqrt();
    let cnorm = norm2(c);

    let status;
    let mut iterations = 0;
    loop {
        // residuals of the embedding
        let mut rx = c.iter().map(|v| v * it.tau).collect::<Vec<_>>();
        sp.a.gemv_t(1.0, &it.y, &mut rx);
        sp.g.gemv_t(1.0, &it.z, &mut rx);
        let mut ry: Vec<f64> = sp.b.iter().map(|v| v * it.tau).collect();
        sp.a.gemv(-1.0, &it.x, &mut ry);
        let mut rz: Vec<f64> = sp.h.iter().zip(&it.s).map(|(h, s)| h * it.tau - s).collect();
        sp.g.gemv(-1.0, &it.x, &mut rz);
        let cx = dot(c, &it.x);
        let by = dot(&sp.b, &it.y);
        let hz = dot(&sp.h, &it.z);
        let rt = it.kappa + cx + by + hz;

        // termination
        let pres = (norm2(&ry).powi(2) + norm2(&rz).powi(2)).sqrt() / it.tau / (1.0 + bnorm);
        let dres = norm2(&rx) / it.tau / (1.0 + cnorm);
        let gap = (cx + by + hz).abs() / it.tau / (1.0 + (cx / it.tau).abs());
        if pres <= settings.tol && dres <= settings.tol && gap <= settings.tol {
            status = SolveStatus::Optimal;
            break;
        }
        if it.kappa > it.tau {
            let mut aty = sp.a.tmul_vec(&it.y);
            sp.g.gemv_t(1.0, &it.z, &mut aty);
            if by + hz < 0.0 && norm2(&aty) <= settings.tol * -(by + hz) {
                status = SolveStatus::PrimalInfeasible;
                break;
            }
            let ax = sp.a.mul_vec(&it.x);
            let mut gxs = it.s.clone();
            sp.g.gemv(1.0, &it.x, &mut gxs);
            let pr = (norm2(&ax).powi(2) + norm2(&gxs).powi(2)).sqrt();
            if cx < 0.0 && pr <= settings.tol * -cx {
                status = SolveStatus::DualInfeasible;
                break;
            }
        }
        if iterations >= settings.max_iter {
            status = SolveStatus::MaxIter;
            break;
        }

        let Some((sc, lambda)) = sp.cones.nt_scaling(&it.s, &it.z) else {
            status = SolveStatus::NumericalError;
            break;
        };
        kkt.factor(sc.clone());
        let (x1, y1, z1) = kkt.solve(&neg_c, &sp.b, &sp.h);
        let denom_base = -dot(c, &x1) - dot(&sp.b, &y1) - dot(&sp.h, &z1);
        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / (degree + 1.0);

        let direction = |sigma: f64, ds: &[f64], dkappa: f64| -> Direction {
            let k = 1.0 - sigma;
            let dx: Vec<f64> = rx.iter().map(|v| -k * v).collect();
            let dy: Vec<f64> = ry.iter().map(|v| k * v).collect();
            let lds = sp.cones.jordan_div(&lambda, ds);
            let mut wl = vec![0.0; m];
            sp.cones.apply_scaling(&sc, &lds, &mut wl, false);
            let dz: Vec<f64> = rz.iter().zip(&wl).map(|(r, w)| k * r + w).collect();
            let (x2, y2, z2) = kkt.solve(&dx, &dy, &dz);
            let num = k * rt - dkappa / it.tau + dot(c, &x2) + dot(&sp.b, &y2) + dot(&sp.h, &z2);
            let dtau = num / (it.kappa / it.tau + denom_base);
            let mut d = Direction {
                x: x2,
                y: y2,
                z: z2,
                s: vec![0.0; m],
                tau: dtau,
                kappa: -(dkappa + it.kappa * dtau) / it.tau,
            };
            axpy(&mut d.x, dtau, &x1);
            axpy(&mut d.y, dtau, &y1);
            axpy(&mut d.z, dtau, &z1);
            // Δs = -W(λ⋄d_s) - W²Δz
            let mut wdz = vec![0.0; m];
            sp.cones.apply_scaling(&sc, &d.z, &mut wdz, false);
            let mut w2dz = vec![0.0; m];
            sp.cones.apply_scaling(&sc, &wdz, &mut w2dz, false);
            for i in 0..m {
                d.s[i] = -wl[i] - w2dz[i];
            }
            d
        };

        let step_len = |d: &Direction| -> f64 {
            let mut a = sp.cones.max_step(&it.s, &d.s).min(sp.cones.max_step(&it.z, &d.z));
            if d.tau < 0.0 {
                a = a.min(-it.tau / d.tau);
            }
            if d.kappa < 0.0 {
                a = a.min(-it.kappa / d.kappa);
            }
            a
        };

        // predictor
        let ds_aff = sp.cones.jordan_prod(&lambda, &lambda);
        let aff = direction(0.0, &ds_aff, it.kappa * it.tau);
        let alpha_aff = step_len(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // corrector
        let mut winv_ds = vec![0.0; m];
        sp.cones.apply_scaling(&sc, &aff.s, &mut winv_ds, true);
        let mut w_dz = vec![0.0; m];
        sp.cones.apply_scaling(&sc, &aff.z, &mut w_dz, false);
        let mut ds = sp.cones.jordan_prod(&winv_ds, &w_dz);
        for i in 0..m {
            ds[i] += ds_aff[i] - sigma * mu * e[i];
        }
        let dk = it.kappa * it.tau + aff.kappa * aff.tau - sigma * mu;
        let d = direction(sigma, &ds, dk);
        let alpha = (STEP_FRACTION * step_len(&d)).min(1.0);
        if !(alpha > MIN_STEP) || !d.tau.is_finite() {
            status = SolveStatus::NumericalError;
            break;
        }

        axpy(&mut it.x, alpha, &d.x);
        axpy(&mut it.y, alpha, &d.y);
        axpy(&mut it.z, alpha, &d.z);
        axpy(&mut it.s, alpha, &d.s);
        it.tau += alpha * d.tau;
        it.kappa += alpha * d.kappa;
        iterations += 1;
    }

    finish(program, &sp, it, status, iterations)
}

fn finish(program: &ConicProgram, sp: &Split, it: Iterate, status: SolveStatus, iterations: usize) -> ConicSolution {
    let rows = program.num_rows();
    let scale = match status {
        SolveStatus::PrimalInfeasible => {
            let v = -(dot(&sp.b, &it.y) + dot(&sp.h, &it.z));
            1.0 / v
        }
        SolveStatus::DualInfeasible => -1.0 / dot(&program.c, &it.x),
        _ => 1.0 / it.tau,
    };
    let x: Vec<f64> = it.x.iter().map(|v| v * scale).collect();
    let mut s = vec![0.0; rows];
    let mut z = vec![0.0; rows];
    for (k, &r) in sp.eq_rows.iter().enumerate() {
        z[r] = it.y[k] * scale;
    }
    for (k, &r) in sp.cone_rows.iter().enumerate() {
        z[r] = it.z[k] * scale;
        s[r] = it.s[k] * scale;
    }
    let res = residuals(program, &x, &s, &z);
    let gap = dot(&program.c, &x) + dot(&program.b, &z);
    ConicSolution {
        x,
        s,
        z,
        status,
        gap,
        iterations,
        residuals: res,
    }
}
