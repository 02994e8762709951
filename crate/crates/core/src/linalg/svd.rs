use alloc::vec;
use alloc::vec::Vec;

use super::{dot, DenseMatrix, HouseholderQr};
use crate::error::{Error, Result};

/// Relative threshold `σ_min > RANK_THRESHOLD · σ_max` for full row rank.
pub const RANK_THRESHOLD: f64 = 1e-12;

const MAX_SWEEPS: usize = 80;

/// Thin SVD data of a full-row-rank `A = U·diag(σ)·Vᵀ` plus the minimum
/// ℓ2-norm solution `ỹ = V·diag(σ)⁻¹·Uᵀy` of `Az = y`.
#[derive(Debug, Clone)]
pub struct RangeFactors {
    /// N×m, orthonormal columns spanning range(Aᵀ).
    pub v: DenseMatrix,
    /// m×m orthogonal.
    pub u: DenseMatrix,
    /// Nonincreasing, all positive.
    pub sigma: Vec<f64>,
    pub y_tilde: Vec<f64>,
}

impl RangeFactors {
    pub fn m(&self) -> usize {
        self.u.rows()
    }

    pub fn n(&self) -> usize {
        self.v.rows()
    }

    /// `U·diag(σ)·Vᵀ`
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.sigma.iter().enumerate() {
                us.set(i, j, us.get(i, j) * s);
            }
        }
        us.matmul(&self.v.transpose())
    }

    /// `(I − V·Vᵀ)·x`, the component of `x` orthogonal to range(Aᵀ).
    pub fn range_residual(&self, x: &[f64]) -> Vec<f64> {
        let c = self.v.matvec_t(x);
        let p = self.v.matvec(&c);
        x.iter().zip(p).map(|(a, b)| a - b).collect()
    }
}

/// One-sided (Hestenes) Jacobi on the columns of `b`. Returns the rotated
/// columns `B·J` and the accumulated rotation `J` as columns.
fn one_sided_jacobi(mut b: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let c = b.len();
    let mut j: Vec<Vec<f64>> = (0..c)
        .map(|i| {
            let mut e = vec![0.0; c];
            e[i] = 1.0;
            e
        })
        .collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha = dot(&b[p], &b[p]);
                let beta = dot(&b[q], &b[q]);
                let gamma = dot(&b[p], &b[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let cs = 1.0 / libm::sqrt(1.0 + t * t);
                let sn = cs * t;
                rotate(&mut b, p, q, cs, sn);
                rotate(&mut j, p, q, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }
    (b, j)
}

#[inline]
fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, cs: f64, sn: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = cs * xp - sn * xq;
        *y = sn * xp + cs * xq;
    }
}

/// Column norms after Jacobi, with the permutation sorting them in
/// nonincreasing order.
fn sorted_norms(cols: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let norms: Vec<f64> = cols.iter().map(|c| libm::sqrt(dot(c, c))).collect();
    let mut order: Vec<usize> = (0..cols.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    (order.iter().map(|&i| norms[i]).collect(), order)
}

/// Singular values of any matrix, nonincreasing.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    let qr = if a.rows() >= a.cols() {
        HouseholderQr::new(a)
    } else {
        HouseholderQr::of_transpose(a)
    };
    let r = qr.r();
    let cols = (0..r.cols()).map(|j| r.column(j)).collect();
    let (b, _) = one_sided_jacobi(cols);
    sorted_norms(&b).0
}

/// Thin factorization of a full-row-rank `A` (m ≤ N) and the precomputed
/// vector `ỹ` with `A·ỹ = y`.
pub fn thin_factorization(a: &DenseMatrix, y: &[f64]) -> Result<RangeFactors> {
    let (m, n) = (a.rows(), a.cols());
    if m > n {
        return Err(Error::InvalidInput("thin factorization needs m <= N"));
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: y.len(),
        });
    }
    // Aᵀ = Q·R, so A = Rᵀ·Qᵀ; Jacobi on the columns of Rᵀ (rows of R)
    // gives Rᵀ = U·Σ·Wᵀ and hence V = Q·W.
    let qr = HouseholderQr::of_transpose(a);
    let r = qr.r();
    let cols = (0..m).map(|i| r.row(i).to_vec()).collect();
    let (b, w) = one_sided_jacobi(cols);
    let (sigma, order) = sorted_norms(&b);
    let smax = sigma[0];
    let smin = sigma[m - 1];
    if !(smax > 0.0) || smin <= RANK_THRESHOLD * smax {
        return Err(Error::RankDeficient {
            ratio: if smax > 0.0 { smin / smax } else { 0.0 },
        });
    }
    let mut u = DenseMatrix::zeros(m, m);
    let mut v = DenseMatrix::zeros(n, m);
    let mut buf = vec![0.0; n];
    for (k, &src) in order.iter().enumerate() {
        for i in 0..m {
            u.set(i, k, b[src][i] / sigma[k]);
        }
        buf.iter_mut().for_each(|x| *x = 0.0);
        buf[..m].copy_from_slice(&w[src]);
        qr.apply_q(&mut buf);
        for (i, x) in buf.iter().enumerate() {
            v.set(i, k, *x);
        }
    }
    let uty = u.matvec_t(y);
    let scaled: Vec<f64> = uty.iter().zip(&sigma).map(|(c, s)| c / s).collect();
    let y_tilde = v.matvec(&scaled);
    Ok(RangeFactors { v, u, sigma, y_tilde })
}
