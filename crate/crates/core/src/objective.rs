//! Smoothed ℓ1 objective `J_ε`, its quadratic majorizer and the IRLS
//! weight and smoothing rules.
//!
//! Per coordinate, `j_ε(t) = |t|` for `|t| > ε` and `(t²/ε + ε)/2`
//! otherwise. It is a scaled Huber function, continuously differentiable,
//! and satisfies `|t| ≤ j_ε(t) ≤ |t| + ε`.

use alloc::vec::Vec;

/// Indices of the `s` largest-magnitude entries, ascending. Among equal
/// magnitudes the smaller index wins.
pub fn top_s_indices(x: &[f64], s: usize) -> Vec<usize> {
    let s = s.min(x.len());
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut top = order[..s].to_vec();
    top.sort_unstable();
    top
}

/// `σ_s(x)_ℓ1`: ℓ1 mass outside the `s` largest-magnitude entries.
pub fn best_s_term_error(x: &[f64], s: usize) -> f64 {
    if s >= x.len() {
        return 0.0;
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| a.total_cmp(b));
    // Ascending summation of the N − s smallest magnitudes.
    mags[..x.len() - s].iter().sum()
}

#[inline]
pub fn smoothed_abs(t: f64, eps: f64) -> f64 {
    let a = t.abs();
    if a > eps {
        a
    } else {
        0.5 * (t * t / eps + eps)
    }
}

/// `J_ε(x)`. At `ε = 0` this is the ℓ1 norm (the pointwise limit).
pub fn smoothed_objective(x: &[f64], eps: f64) -> f64 {
    if eps == 0.0 {
        return crate::linalg::norm1(x);
    }
    x.iter().map(|&t| smoothed_abs(t, eps)).sum()
}

/// `∇J_ε(x)`, piecewise `sign(xᵢ)` above ε and `xᵢ/ε` below.
pub fn smoothed_gradient(x: &[f64], eps: f64) -> Vec<f64> {
    x.iter()
        .map(|&t| if t.abs() > eps { t.signum() } else { t / eps })
        .collect()
}

/// `wᵢ = 1/max(|xᵢ|, ε)`.
pub fn weights(x: &[f64], eps: f64) -> Vec<f64> {
    x.iter().map(|&t| 1.0 / t.abs().max(eps)).collect()
}

/// `Q_ε(z, x) = J_ε(x) + ½⟨z, Wz⟩ − ½⟨x, Wx⟩` with `W = diag(weights(x, ε))`.
pub fn quadratic_majorizer(z: &[f64], x: &[f64], eps: f64) -> f64 {
    assert_eq!(z.len(), x.len());
    let mut quad = 0.0;
    for (&zi, &xi) in z.iter().zip(x) {
        let w = 1.0 / xi.abs().max(eps);
        quad += w * (zi * zi - xi * xi);
    }
    smoothed_objective(x, eps) + 0.5 * quad
}

/// `min(ε_prev, σ_s(x_next)/N)`; `ε_prev` may be `+∞`.
pub fn smoothing_update(eps_prev: f64, x_next: &[f64], s: usize) -> f64 {
    let n = x_next.len() as f64;
    eps_prev.min(best_s_term_error(x_next, s) / n)
}
