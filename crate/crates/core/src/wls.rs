//! The weighted least-squares step
//! `x⁺ = argmin ⟨z, diag(w) z⟩ subject to Az = y`.
//!
//! Two interchangeable routes:
//!
//! * [`wls_direct`] solves the m×m system `(A W⁻¹ Aᵀ) z = y` by Cholesky
//!   and returns `W⁻¹ Aᵀ z`.
//! * [`wls_woodbury`] uses that `W⁻¹ = ε·I + diag(|xᵢ| − ε)` restricted to
//!   the active set `I = {i : |xᵢ| > ε}`. With the thin factors of `A`, the
//!   step reduces to the |I|×|I| system
//!   `G γ = ỹ_I`, `G = ε·diag(|xᵢ| − ε)⁻¹ + (Vᵀ)_Iᵀ (Vᵀ)_I`,
//!   solved by warm-started conjugate gradients, followed by
//!   `x⁺ = ỹ − V (Vᵀ)_I γ + Q_I γ`. `G` stays well conditioned as ε → 0
//!   while `A W⁻¹ Aᵀ` does not.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::irls::{SolverConfig, StepPath, WlsPath};
use crate::linalg::{
    cg_solve_abs, dot, norm2, singular_values, thin_factorization, Cholesky, DenseMatrix, RangeFactors,
};

/// Sorted indices `{i : |xᵢ| > ε}` (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn active_set(x: &[f64], eps: f64) -> ActiveSet {
    ActiveSet {
        indices: (0..x.len()).filter(|&i| x[i].abs() > eps).collect(),
    }
}

/// Solution `γ` of the previous Woodbury step, over its active set.
#[derive(Debug, Clone, PartialEq)]
pub struct WoodburyWarmStart {
    pub prev_active: ActiveSet,
    pub prev_gamma: Vec<f64>,
}

impl WoodburyWarmStart {
    /// `γ⁽⁰⁾`: previous values on `I ∩ I_prev`, zero elsewhere.
    pub fn project_onto(&self, active: &ActiveSet) -> Vec<f64> {
        let prev = &self.prev_active.indices;
        let mut out = vec![0.0; active.len()];
        let mut j = 0;
        for (k, &i) in active.indices.iter().enumerate() {
            while j < prev.len() && prev[j] < i {
                j += 1;
            }
            if j < prev.len() && prev[j] == i {
                out[k] = self.prev_gamma[j];
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WoodburyOutput {
    pub x: Vec<f64>,
    pub active: ActiveSet,
    pub gamma: Vec<f64>,
    pub cg_iters: usize,
}

impl WoodburyOutput {
    pub fn warm_start(&self) -> WoodburyWarmStart {
        WoodburyWarmStart {
            prev_active: self.active.clone(),
            prev_gamma: self.gamma.clone(),
        }
    }
}

/// Weighted least squares through the normal equations of size m×m.
pub fn wls_direct(a: &DenseMatrix, y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (a.rows(), a.cols());
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: y.len(),
        });
    }
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: w.len(),
        });
    }
    if w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput("weights must be positive and finite"));
    }
    let winv: Vec<f64> = w.iter().map(|v| 1.0 / v).collect();
    let chol = Cholesky::factor(&a.weighted_gram(&winv))?;
    let ynorm = norm2(y);
    let mut z = chol.solve(y);
    let mut x = scaled_adjoint(a, &winv, &z);
    // Refine against the true feasibility residual `y − A x`.
    for _ in 0..3 {
        let r: Vec<f64> = a.matvec(&x).iter().zip(y).map(|(ax, yi)| yi - ax).collect();
        if norm2(&r) <= 1e-15 * ynorm {
            break;
        }
        let dz = chol.solve(&r);
        for (zi, d) in z.iter_mut().zip(dz) {
            *zi += d;
        }
        x = scaled_adjoint(a, &winv, &z);
    }
    Ok(x)
}

fn scaled_adjoint(a: &DenseMatrix, winv: &[f64], z: &[f64]) -> Vec<f64> {
    let mut x = a.matvec_t(z);
    for (xi, d) in x.iter_mut().zip(winv) {
        *xi *= d;
    }
    x
}

/// Woodbury-reduced weighted least squares for the weights
/// `1/max(|x_prev,i|, ε)`.
pub fn wls_woodbury(
    factors: &RangeFactors,
    x_prev: &[f64],
    eps: f64,
    warm: Option<&WoodburyWarmStart>,
    cg_rel_tol: f64,
    cg_max_iters: usize,
) -> Result<WoodburyOutput> {
    let n = factors.n();
    let m = factors.m();
    if x_prev.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x_prev.len(),
        });
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput("woodbury step needs a finite eps > 0"));
    }
    let active = active_set(x_prev, eps);
    if active.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let idx = &active.indices;
    let diag: Vec<f64> = idx.iter().map(|&i| eps / (x_prev[i].abs() - eps)).collect();
    let v = &factors.v;
    // G γ = diag ∘ γ + (Vᵀ)_Iᵀ ((Vᵀ)_I γ); row i of V is column i of Vᵀ.
    let mut tmp = vec![0.0; m];
    let mut apply_g = |g: &[f64], out: &mut [f64]| {
        tmp.iter_mut().for_each(|t| *t = 0.0);
        for (k, &i) in idx.iter().enumerate() {
            crate::linalg::axpy(g[k], v.row(i), &mut tmp);
        }
        for (k, &i) in idx.iter().enumerate() {
            out[k] = diag[k] * g[k] + dot(v.row(i), &tmp);
        }
    };

    let rhs: Vec<f64> = idx.iter().map(|&i| factors.y_tilde[i]).collect();
    let gamma0 = match warm {
        Some(w) => w.project_onto(&active),
        None => vec![0.0; idx.len()],
    };
    let mut g0 = vec![0.0; idx.len()];
    apply_g(&gamma0, &mut g0);
    let h: Vec<f64> = rhs.iter().zip(&g0).map(|(b, g)| b - g).collect();
    let threshold = cg_rel_tol * norm2(&rhs);
    let cg = cg_solve_abs(&mut apply_g, &h, &vec![0.0; idx.len()], threshold, cg_max_iters)?;
    let gamma: Vec<f64> = gamma0.iter().zip(&cg.x).map(|(a, b)| a + b).collect();

    let mut coeff = vec![0.0; m];
    for (k, &i) in idx.iter().enumerate() {
        crate::linalg::axpy(gamma[k], v.row(i), &mut coeff);
    }
    let mut x = factors.y_tilde.clone();
    for (i, xi) in x.iter_mut().enumerate() {
        *xi -= dot(v.row(i), &coeff);
    }
    for (k, &i) in idx.iter().enumerate() {
        x[i] += gamma[k];
    }
    Ok(WoodburyOutput {
        x,
        active,
        gamma,
        cg_iters: cg.iters,
    })
}

/// Chooses the route for one step. `Auto` takes the Woodbury path once ε
/// is finite and the active set is nonempty and no larger than
/// `woodbury_active_fraction · m`.
pub fn select_path(config: &SolverConfig, eps: f64, active_size: usize, m: usize) -> StepPath {
    match config.wls_path {
        WlsPath::Direct => StepPath::Direct,
        WlsPath::Woodbury => StepPath::Woodbury,
        WlsPath::Auto => {
            if eps.is_finite() && active_size > 0 && (active_size as f64) <= config.woodbury_active_fraction * m as f64
            {
                StepPath::Woodbury
            } else {
                StepPath::Direct
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    /// κ₂ of the Woodbury system matrix G.
    pub kappa_g: f64,
    /// κ₂ of `A W⁻¹ Aᵀ`.
    pub kappa_full: f64,
}

/// 2-norm condition numbers of the two linear systems at a given state.
pub fn condition_diagnostics(a: &DenseMatrix, w: &[f64], x_prev: &[f64], eps: f64) -> Result<ConditionReport> {
    let n = a.cols();
    if w.len() != n || x_prev.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: w.len().min(x_prev.len()),
        });
    }
    let active = active_set(x_prev, eps);
    if active.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    // σ(A W^{-1/2})² are the eigenvalues of A W⁻¹ Aᵀ; working with the
    // square root keeps small eigenvalues accurate.
    let mut b = a.clone();
    for i in 0..b.rows() {
        for (bij, wj) in b.row_mut(i).iter_mut().zip(w) {
            *bij /= libm::sqrt(*wj);
        }
    }
    let sb = singular_values(&b);
    let ratio = sb[0] / sb[sb.len() - 1];
    let kappa_full = ratio * ratio;

    let factors = thin_factorization(a, &vec![0.0; a.rows()])?;
    let k = active.len();
    let mut g = DenseMatrix::zeros(k, k);
    for (p, &i) in active.indices.iter().enumerate() {
        for (q, &j) in active.indices.iter().enumerate().take(p + 1) {
            let mut val = dot(factors.v.row(i), factors.v.row(j));
            if p == q {
                val += eps / (x_prev[i].abs() - eps);
            }
            g.set(p, q, val);
            g.set(q, p, val);
        }
    }
    let sg = singular_values(&g);
    let kappa_g = sg[0] / sg[sg.len() - 1];
    Ok(ConditionReport { kappa_g, kappa_full })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::thin_factorization;

    #[test]
    fn active_set_strict() {
        assert_eq!(active_set(&[3.0, 0.1, -0.5], 0.5).indices, vec![0]);
        assert!(active_set(&[0.0; 4], 0.1).is_empty());
        assert_eq!(active_set(&[1.0, -2.0], 0.5).indices, vec![0, 1]);
    }

    #[test]
    fn direct_examples() {
        let a = DenseMatrix::from_rows(&[&[1.0, 1.0]]).unwrap();
        let x = wls_direct(&a, &[2.0], &[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let x = wls_direct(&a, &[3.0], &[1.0, 2.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn direct_rejects_bad_weights() {
        let a = DenseMatrix::from_rows(&[&[1.0, 1.0]]).unwrap();
        assert!(wls_direct(&a, &[1.0], &[1.0, 0.0]).is_err());
        assert!(wls_direct(&a, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn warm_projection_keeps_common_indices() {
        let warm = WoodburyWarmStart {
            prev_active: ActiveSet { indices: vec![1, 3, 4] },
            prev_gamma: vec![10.0, 30.0, 40.0],
        };
        let now = ActiveSet {
            indices: vec![0, 3, 4, 7],
        };
        assert_eq!(warm.project_onto(&now), vec![0.0, 30.0, 40.0, 0.0]);
    }

    #[test]
    fn woodbury_matches_direct_small() {
        let a = DenseMatrix::from_rows(&[&[1.0, 0.0, 1.0, 0.5], &[0.0, 1.0, 1.0, -0.5]]).unwrap();
        let y = [2.0, 0.5];
        let f = thin_factorization(&a, &y).unwrap();
        let x_prev = [1.5, 0.02, 0.4, -0.01];
        let eps = 0.05;
        let wb = wls_woodbury(&f, &x_prev, eps, None, 1e-14, 50).unwrap();
        let w: Vec<f64> = x_prev.iter().map(|v: &f64| 1.0 / v.abs().max(eps)).collect();
        let direct = wls_direct(&a, &y, &w).unwrap();
        for (p, q) in wb.x.iter().zip(&direct) {
            assert!((p - q).abs() < 1e-12, "{p} vs {q}");
        }
    }

    #[test]
    fn woodbury_empty_active_set() {
        let a = DenseMatrix::from_rows(&[&[1.0, 1.0]]).unwrap();
        let f = thin_factorization(&a, &[1.0]).unwrap();
        assert_eq!(
            wls_woodbury(&f, &[0.1, 0.1], 0.5, None, 1e-12, 10),
            Err(Error::EmptyActiveSet)
        );
    }

    #[test]
    fn select_path_rules() {
        let cfg = SolverConfig::default();
        assert_eq!(select_path(&cfg, f64::INFINITY, 1, 10), StepPath::Direct);
        assert_eq!(select_path(&cfg, 0.1, 10, 10), StepPath::Direct);
        assert_eq!(select_path(&cfg, 0.1, 2, 10), StepPath::Woodbury);
        assert_eq!(select_path(&cfg, 0.1, 0, 10), StepPath::Direct);
        let forced = SolverConfig {
            wls_path: WlsPath::Direct,
            ..SolverConfig::default()
        };
        assert_eq!(select_path(&forced, 0.1, 2, 10), StepPath::Direct);
    }

    #[test]
    fn condition_numbers_identity_weights() {
        let a = DenseMatrix::from_rows(&[&[2.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]).unwrap();
        let r = condition_diagnostics(&a, &[1.0; 3], &[1.0, 1.0, 1.0], 0.5).unwrap();
        assert!((r.kappa_full - 4.0).abs() < 1e-12);
        assert!(r.kappa_g.is_finite() && r.kappa_g >= 1.0);
    }
}
