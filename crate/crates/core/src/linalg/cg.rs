use alloc::vec;
use alloc::vec::Vec;

use super::{axpy, dot, norm2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutput {
    pub x: Vec<f64>,
    pub iters: usize,
}

/// Conjugate gradients for a symmetric positive-definite operator, warm
/// started at `x0`. Stops at the first iterate with
/// `‖apply(x) − b‖₂ ≤ rel_tol·‖b‖₂`, or after `max_iters` iterations.
pub fn cg_solve<F>(apply: F, b: &[f64], x0: &[f64], rel_tol: f64, max_iters: usize) -> Result<CgOutput>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidInput("cg rel_tol must lie in (0, 1)"));
    }
    cg_solve_abs(apply, b, x0, rel_tol * norm2(b), max_iters)
}

/// Same as [`cg_solve`] with an absolute residual threshold.
pub fn cg_solve_abs<F>(mut apply: F, b: &[f64], x0: &[f64], abs_tol: f64, max_iters: usize) -> Result<CgOutput>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    if max_iters == 0 {
        return Err(Error::InvalidInput("cg max_iters must be at least 1"));
    }
    let mut x = x0.to_vec();
    let mut ap = vec![0.0; n];
    let true_residual = |apply: &mut F, x: &[f64], ap: &mut Vec<f64>| -> Vec<f64> {
        apply(x, ap);
        b.iter().zip(ap.iter()).map(|(bi, ai)| bi - ai).collect()
    };
    let mut r = true_residual(&mut apply, &x, &mut ap);
    let mut rs = dot(&r, &r);
    if libm::sqrt(rs) <= abs_tol {
        return Ok(CgOutput { x, iters: 0 });
    }
    let mut p = r.clone();
    for it in 1..=max_iters {
        apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::Breakdown { iteration: it });
        }
        let alpha = rs / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let mut rs_new = dot(&r, &r);
        if libm::sqrt(rs_new) <= abs_tol {
            // Confirm with the true residual; restart from it if the
            // recursive one has drifted.
            r = true_residual(&mut apply, &x, &mut ap);
            rs_new = dot(&r, &r);
            if libm::sqrt(rs_new) <= abs_tol {
                return Ok(CgOutput { x, iters: it });
            }
            p.copy_from_slice(&r);
            rs = rs_new;
            continue;
        }
        let beta = rs_new / rs;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rs = rs_new;
    }
    Ok(CgOutput { x, iters: max_iters })
}
