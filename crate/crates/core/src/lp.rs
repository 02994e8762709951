//! Linear programming.
//!
//! * [`maximize_leq`]: dense tableau simplex for small programs
//!   `max cᵀx s.t. Ax ≤ b, x ≥ 0` with `b ≥ 0`, so the slack basis is
//!   feasible from the start. The programs of the null space computations
//!   are highly degenerate; long degenerate runs switch the entering rule
//!   to Bland's, which cannot cycle.
//! * [`l1_minimize`]: primal-dual interior point method for
//!   `min ‖z‖₁ s.t. Cz = y`, written as the standard-form program over
//!   `z = u − v`, `u, v ≥ 0`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{norm2, Cholesky, DenseMatrix, HouseholderQr};

const PIVOT_TOL: f64 = 1e-11;
const RHS_CLAMP: f64 = 1e-9;
const BLAND_AFTER: usize = 50;
const POLISH_REL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Unbounded,
}

pub fn maximize_leq(c: &[f64], a: &DenseMatrix, b: &[f64]) -> Result<LpOutcome> {
    let (rows, n) = (a.rows(), a.cols());
    if c.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.len(),
        });
    }
    if b.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            found: b.len(),
        });
    }
    if b.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidInput("simplex needs b >= 0"));
    }
    let width = n + rows + 1;
    let mut t = vec![0.0; (rows + 1) * width];
    for r in 0..rows {
        t[r * width..r * width + n].copy_from_slice(a.row(r));
        t[r * width + n + r] = 1.0;
        t[r * width + width - 1] = b[r];
    }
    let obj = rows * width;
    for j in 0..n {
        t[obj + j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + rows).collect();

    let max_pivots = 200 * (rows + n) + 1000;
    let mut degenerate_streak = 0;
    for _ in 0..max_pivots {
        // Dantzig's rule, with Bland's rule during long degenerate runs.
        let candidates = (0..n + rows).filter(|&j| t[obj + j] < -PIVOT_TOL);
        let enter = if degenerate_streak > BLAND_AFTER {
            candidates.min()
        } else {
            candidates.min_by(|&i, &j| t[obj + i].total_cmp(&t[obj + j]))
        };
        let Some(enter) = enter else {
            let mut x = vec![0.0; n];
            for (r, &bv) in basis.iter().enumerate() {
                if bv < n {
                    x[bv] = t[r * width + width - 1];
                }
            }
            return Ok(LpOutcome::Optimal {
                value: t[obj + width - 1],
                x,
            });
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..rows {
            let coef = t[r * width + enter];
            if coef > PIVOT_TOL {
                let ratio = t[r * width + width - 1] / coef;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-14 * lratio.abs().max(1.0)
                            || (ratio <= lratio + 1e-14 * lratio.abs().max(1.0) && basis[r] < basis[lr])
                        {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        let Some((pr, ratio)) = leave else {
            return Ok(LpOutcome::Unbounded);
        };
        degenerate_streak = if ratio <= PIVOT_TOL { degenerate_streak + 1 } else { 0 };
        pivot(&mut t, width, rows + 1, pr, enter);
        basis[pr] = enter;
        // Rounding must not push a basic variable below zero.
        for r in 0..rows {
            let rhs = &mut t[r * width + width - 1];
            if *rhs < 0.0 && *rhs > -RHS_CLAMP {
                *rhs = 0.0;
            }
        }
    }
    Err(Error::InvalidInput("simplex pivot limit exceeded"))
}

fn pivot(t: &mut [f64], width: usize, total_rows: usize, pr: usize, pc: usize) {
    let p = t[pr * width + pc];
    for j in 0..width {
        t[pr * width + j] /= p;
    }
    t[pr * width + pc] = 1.0;
    let pivot_row: Vec<f64> = t[pr * width..(pr + 1) * width].to_vec();
    for r in 0..total_rows {
        if r == pr {
            continue;
        }
        let f = t[r * width + pc];
        if f != 0.0 {
            let row = &mut t[r * width..(r + 1) * width];
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[pc] = 0.0;
        }
    }
}

/// Iteration cap of [`l1_minimize`].
pub const IPM_MAX_ITERS: usize = 200;

/// Solution of `min ‖z‖₁ s.t. Cz = y` by Mehrotra's predictor-corrector
/// method. Stops when the relative primal and dual residuals and the
/// relative duality gap are all below `tol`. Once the gap and the dual
/// residual are small the dominant entries are refit exactly, since the
/// primal residual of the normal equations stalls near machine precision.
pub fn l1_minimize(c: &DenseMatrix, y: &[f64], tol: f64) -> Result<Vec<f64>> {
    let (m, n) = (c.rows(), c.cols());
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: y.len(),
        });
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidInput("tolerance must lie in (0, 1)"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let y_scale = 1.0 + norm2(y);
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; n];
    let mut su = vec![1.0; n];
    let mut sv = vec![1.0; n];
    let mut lambda = vec![0.0; m];

    for _ in 0..IPM_MAX_ITERS {
        let z: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        let rb: Vec<f64> = c.matvec(&z).iter().zip(y).map(|(a, b)| a - b).collect();
        let g = c.matvec_t(&lambda);
        let rcu: Vec<f64> = (0..n).map(|i| g[i] + su[i] - 1.0).collect();
        let rcv: Vec<f64> = (0..n).map(|i| -g[i] + sv[i] - 1.0).collect();
        let complementarity: f64 = (0..n).map(|i| u[i] * su[i] + v[i] * sv[i]).sum();
        let mu = complementarity / (2 * n) as f64;
        let primal: f64 = u.iter().chain(&v).sum();
        let rc_norm = libm::hypot(norm2(&rcu), norm2(&rcv));
        let dual_ok = rc_norm <= tol * (1.0 + libm::sqrt((2 * n) as f64));
        let gap_ok = complementarity <= tol * (1.0 + primal);
        if dual_ok && gap_ok {
            if norm2(&rb) <= tol * y_scale {
                return Ok(z);
            }
            // The normal equations lose accuracy near the optimum; finish
            // on the identified support instead.
            if let Some(polished) = polish_on_support(c, y, &z, tol * y_scale) {
                return Ok(polished);
            }
        }

        let du: Vec<f64> = (0..n).map(|i| u[i] / su[i]).collect();
        let dv: Vec<f64> = (0..n).map(|i| v[i] / sv[i]).collect();
        let d: Vec<f64> = du.iter().zip(&dv).map(|(a, b)| a + b).collect();
        let chol = factor_regularized(&c.weighted_gram(&d))?;

        // Newton direction for the complementarity right-hand side (r3u, r3v).
        let direction = |r3u: &[f64], r3v: &[f64]| {
            let t: Vec<f64> = (0..n)
                .map(|i| r3u[i] / su[i] - r3v[i] / sv[i] + du[i] * rcu[i] - dv[i] * rcv[i])
                .collect();
            let ct = c.matvec(&t);
            let rhs: Vec<f64> = (0..m).map(|i| -rb[i] - ct[i]).collect();
            let dl = chol.solve(&rhs);
            let h = c.matvec_t(&dl);
            let dsu: Vec<f64> = (0..n).map(|i| -rcu[i] - h[i]).collect();
            let dsv: Vec<f64> = (0..n).map(|i| -rcv[i] + h[i]).collect();
            let dxu: Vec<f64> = (0..n).map(|i| (r3u[i] - u[i] * dsu[i]) / su[i]).collect();
            let dxv: Vec<f64> = (0..n).map(|i| (r3v[i] - v[i] * dsv[i]) / sv[i]).collect();
            (dxu, dxv, dl, dsu, dsv)
        };

        let r3u: Vec<f64> = (0..n).map(|i| -u[i] * su[i]).collect();
        let r3v: Vec<f64> = (0..n).map(|i| -v[i] * sv[i]).collect();
        let (au, av, _, asu, asv) = direction(&r3u, &r3v);
        let ap = max_step(&u, &au).min(max_step(&v, &av)).min(1.0);
        let ad = max_step(&su, &asu).min(max_step(&sv, &asv)).min(1.0);
        let mu_aff: f64 = (0..n)
            .map(|i| (u[i] + ap * au[i]) * (su[i] + ad * asu[i]) + (v[i] + ap * av[i]) * (sv[i] + ad * asv[i]))
            .sum::<f64>()
            / (2 * n) as f64;
        let ratio = mu_aff / mu;
        let sigma = (ratio * ratio * ratio).min(1.0);

        let r3u: Vec<f64> = (0..n).map(|i| -u[i] * su[i] - au[i] * asu[i] + sigma * mu).collect();
        let r3v: Vec<f64> = (0..n).map(|i| -v[i] * sv[i] - av[i] * asv[i] + sigma * mu).collect();
        let (xu, xv, dl, dsu, dsv) = direction(&r3u, &r3v);
        let ap = (0.995 * max_step(&u, &xu).min(max_step(&v, &xv))).min(1.0);
        let ad = (0.995 * max_step(&su, &dsu).min(max_step(&sv, &dsv))).min(1.0);
        for i in 0..n {
            u[i] += ap * xu[i];
            v[i] += ap * xv[i];
            su[i] += ad * dsu[i];
            sv[i] += ad * dsv[i];
        }
        for (l, d) in lambda.iter_mut().zip(&dl) {
            *l += ad * d;
        }
    }
    Err(Error::NotConverged {
        iterations: IPM_MAX_ITERS,
    })
}

/// Exact solve of `C_T z_T = y` on the support `T` of the dominant entries
/// of `z`; `None` if `T` is not a well-posed basis or the fit is poor.
fn polish_on_support(c: &DenseMatrix, y: &[f64], z: &[f64], residual_tol: f64) -> Option<Vec<f64>> {
    let scale = z.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let support: Vec<usize> = (0..z.len()).filter(|&i| z[i].abs() > POLISH_REL * scale).collect();
    if support.is_empty() || support.len() > c.rows() {
        return None;
    }
    let zt = HouseholderQr::new(&c.select_columns(&support))
        .solve_least_squares(y)
        .ok()?;
    if support.iter().zip(&zt).any(|(&i, v)| v.signum() != z[i].signum()) {
        return None;
    }
    let mut out = vec![0.0; z.len()];
    for (&i, v) in support.iter().zip(zt) {
        out[i] = v;
    }
    let fit: Vec<f64> = c.matvec(&out).iter().zip(y).map(|(a, b)| a - b).collect();
    (norm2(&fit) <= residual_tol).then_some(out)
}

/// Largest `α ≤ 1` (unscaled) keeping `x + α·dx ≥ 0`.
fn max_step(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, d)| **d < 0.0)
        .map(|(xi, d)| -xi / d)
        .fold(f64::INFINITY, f64::min)
        .min(1.0 / 0.995)
}

/// Cholesky with a diagonal shift of growing size when pivots vanish
/// near the end of the interior point iteration.
fn factor_regularized(m: &DenseMatrix) -> Result<Cholesky> {
    let n = m.rows();
    let scale = (0..n).map(|i| m.get(i, i)).fold(0.0, f64::max);
    let mut shift = 0.0;
    for _ in 0..8 {
        let mut shifted = m.clone();
        for i in 0..n {
            shifted.set(i, i, m.get(i, i) + shift);
        }
        match Cholesky::factor(&shifted) {
            Ok(f) => return Ok(f),
            Err(_) => shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 },
        }
    }
    Cholesky::factor(m)
}
