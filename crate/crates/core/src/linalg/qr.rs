use alloc::vec;
use alloc::vec::Vec;

use super::{dot, DenseMatrix, RANK_THRESHOLD};
use crate::error::{Error, Result};

/// Householder QR of a tall matrix `C = Q·R` (n×p, n ≥ p).
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    n: usize,
    p: usize,
    /// Upper triangle holds R; column-major.
    r: Vec<f64>,
    /// Reflector k acts on rows k..n as `I − beta·v·vᵀ`.
    reflectors: Vec<(Vec<f64>, f64)>,
}

impl HouseholderQr {
    pub fn new(c: &DenseMatrix) -> Self {
        // Column-major copy of C is the row-major data of Cᵀ.
        Self::from_col_major(c.rows(), c.cols(), c.transpose().into_vec())
    }

    /// Factors `Aᵀ` without forming it explicitly.
    pub fn of_transpose(a: &DenseMatrix) -> Self {
        Self::from_col_major(a.cols(), a.rows(), a.as_slice().to_vec())
    }

    fn from_col_major(n: usize, p: usize, mut c: Vec<f64>) -> Self {
        assert!(n >= p, "Householder QR needs at least as many rows as columns");
        let mut reflectors = Vec::with_capacity(p);
        for k in 0..p {
            let col = &c[k * n + k..(k + 1) * n];
            let norm = libm::sqrt(dot(col, col));
            let mut v = col.to_vec();
            if norm == 0.0 {
                reflectors.push((v, 0.0));
                continue;
            }
            let alpha = if v[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vv = dot(&v, &v);
            let beta = if vv > 0.0 { 2.0 / vv } else { 0.0 };
            for j in k..p {
                let cj = &mut c[j * n + k..(j + 1) * n];
                let s = beta * dot(&v, cj);
                for (ci, vi) in cj.iter_mut().zip(&v) {
                    *ci -= s * vi;
                }
            }
            c[k * n + k] = alpha;
            for i in k + 1..n {
                c[k * n + i] = 0.0;
            }
            reflectors.push((v, beta));
        }
        Self { n, p, r: c, reflectors }
    }

    pub fn r(&self) -> DenseMatrix {
        let mut r = DenseMatrix::zeros(self.p, self.p);
        for j in 0..self.p {
            for i in 0..=j {
                r.set(i, j, self.r[j * self.n + i]);
            }
        }
        r
    }

    /// `x ← Q·x`
    pub fn apply_q(&self, x: &mut [f64]) {
        for (k, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            reflect(&mut x[k..], v, *beta);
        }
    }

    /// `x ← Qᵀ·x`
    pub fn apply_qt(&self, x: &mut [f64]) {
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            reflect(&mut x[k..], v, *beta);
        }
    }

    /// Least-squares solution of `C x ≈ b`.
    pub fn solve_least_squares(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: b.len(),
            });
        }
        self.check_rank()?;
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let mut x = qtb[..self.p].to_vec();
        for i in (0..self.p).rev() {
            let mut acc = x[i];
            for j in i + 1..self.p {
                acc -= self.r[j * self.n + i] * x[j];
            }
            x[i] = acc / self.r[i * self.n + i];
        }
        Ok(x)
    }

    /// Minimum-norm solution of `Cᵀ λ = c`.
    pub fn solve_transposed(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: c.len(),
            });
        }
        self.check_rank()?;
        let mut z = vec![0.0; self.n];
        for i in 0..self.p {
            let mut acc = c[i];
            for j in 0..i {
                acc -= self.r[i * self.n + j] * z[j];
            }
            z[i] = acc / self.r[i * self.n + i];
        }
        self.apply_q(&mut z);
        Ok(z)
    }

    fn check_rank(&self) -> Result<()> {
        let diag: Vec<f64> = (0..self.p).map(|i| self.r[i * self.n + i].abs()).collect();
        let max = diag.iter().copied().fold(0.0, f64::max);
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        if !(max > 0.0) || min <= RANK_THRESHOLD * max {
            return Err(Error::RankDeficient {
                ratio: if max > 0.0 { min / max } else { 0.0 },
            });
        }
        Ok(())
    }

    /// First p columns of Q (n×p).
    pub fn thin_q(&self) -> DenseMatrix {
        self.q_columns(self.p)
    }

    /// Square orthogonal Q (n×n); its trailing n−p columns span the
    /// orthogonal complement of range(C).
    pub fn full_q(&self) -> DenseMatrix {
        self.q_columns(self.n)
    }

    fn q_columns(&self, count: usize) -> DenseMatrix {
        let mut q = DenseMatrix::zeros(self.n, count);
        let mut e = vec![0.0; self.n];
        for j in 0..count {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.apply_q(&mut e);
            for (i, v) in e.iter().enumerate() {
                q.set(i, j, *v);
            }
        }
        q
    }
}

#[inline]
fn reflect(x: &mut [f64], v: &[f64], beta: f64) {
    if beta == 0.0 {
        return;
    }
    let s = beta * dot(v, x);
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}
