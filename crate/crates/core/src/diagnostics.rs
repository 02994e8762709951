//! Convergence metrics, support identification, null space property
//! constants and runtime certifiers of the global rate bounds.
//!
//! The certifiers check the rate statements on a recorded trace, with a
//! multiplicative slack of `1 + 1e-8` for floating-point accumulation:
//!
//! * global rate: `gap(k) ≤ q^{k−1} gap(1)` and
//!   `‖x^k − x_*‖₁ ≤ 9 q^{k−1} ‖x^1 − x_*‖₁` with `q = 1 − c/(ρ₁N)`,
//!   anchored at `k = 1` because `J` is not defined at `ε₀ = +∞`;
//! * sandwich: `(1−ρ_s)/(1+ρ_s)‖x − x_*‖₁ − 2σ_s(x_*) ≤ J_ε(x) − ‖x_*‖₁
//!   ≤ 3σ_s(x)` whenever `ε ≤ σ_s(x)/N`;
//! * approximately sparse: `‖x^k − x_*‖₁ ≤ 20 σ_s(x_*)` after
//!   `⌈3072 ρ₁ N ln(‖x^0 − x_*‖₁/σ_s(x_*))⌉` iterations.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::irls::IterationRecord;
use crate::linalg::{dist1, norm1, singular_values, DenseMatrix, HouseholderQr, RANK_THRESHOLD};
use crate::lp::{maximize_leq, LpOutcome};
use crate::objective::{best_s_term_error, smoothed_objective, top_s_indices};

/// Absolute constant of the global rate bound for exactly sparse vectors.
pub const GLOBAL_RATE_CONSTANT: f64 = 1.0 / 768.0;
/// Absolute constant of the rate bound for approximately sparse vectors.
pub const APPROX_RATE_CONSTANT: f64 = 1.0 / 3072.0;
const CERT_SLACK: f64 = 1e-8;

/// Reference support: `supp(x_*)` when it has at most `s` entries,
/// otherwise the `s` largest-magnitude coordinates (ties by index).
pub fn truth_support(x_star: &[f64], s: usize) -> Vec<usize> {
    let supp: Vec<usize> = (0..x_star.len()).filter(|&i| x_star[i] != 0.0).collect();
    if supp.len() <= s {
        supp
    } else {
        top_s_indices(x_star, s)
    }
}

/// Whether the largest-magnitude coordinates of `x_k` are exactly the
/// reference support of `x_star`.
pub fn support_identified(x_k: &[f64], x_star: &[f64], s: usize) -> bool {
    let support = truth_support(x_star, s);
    top_s_indices(x_k, support.len()) == support
}

/// Rate quantities per trace position; `None` where undefined.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateMetrics {
    pub mu: Vec<Option<f64>>,
    pub mu_l1: Vec<Option<f64>>,
    pub zeta: Vec<Option<f64>>,
    pub support_flags: Vec<Option<bool>>,
}

pub fn convergence_factors(trace: &[IterationRecord], x_star: Option<&[f64]>, s: usize) -> Result<RateMetrics> {
    let x_star = x_star.ok_or(Error::MissingGroundTruth)?;
    if trace.iter().skip(1).any(|r| r.l1_err.is_none()) {
        return Err(Error::MissingGroundTruth);
    }
    let support = truth_support(x_star, s);
    let min_mag = support.iter().map(|&i| x_star[i].abs()).fold(f64::INFINITY, f64::min);
    let quotient = |num: Option<f64>, den: Option<f64>| match (num, den) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    let mut metrics = RateMetrics::default();
    for (pos, rec) in trace.iter().enumerate() {
        let prev = pos.checked_sub(1).map(|p| &trace[p]);
        metrics.mu.push(prev.and_then(|p| quotient(rec.gap, p.gap)));
        metrics.mu_l1.push(prev.and_then(|p| quotient(rec.l1_err, p.l1_err)));
        metrics.zeta.push(match rec.l1_err {
            Some(e) if min_mag.is_finite() && min_mag > 0.0 => Some(e / min_mag),
            _ => None,
        });
        metrics.support_flags.push(rec.support_ok);
    }
    Ok(metrics)
}

/// First gap ratio `gap(k)/gap(k−1)` that is defined along the trace.
pub fn first_gap_ratio(trace: &[IterationRecord]) -> Option<f64> {
    trace.windows(2).find_map(|w| match (w[1].gap, w[0].gap) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NspMethod {
    ExactLP,
    BruteForceSigns,
    /// Closed form for a null space of dimension at most one.
    NullDim1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NspReport {
    pub order: usize,
    pub rho: f64,
    pub satisfied: bool,
    pub method: NspMethod,
}

impl NspReport {
    fn new(order: usize, rho: f64, method: NspMethod) -> Self {
        Self {
            order,
            rho,
            satisfied: rho < 1.0,
            method,
        }
    }
}

/// Orthonormal basis of ker(A) as the columns of an N×(N−m) matrix, or
/// `None` for a trivial kernel.
pub fn null_space_basis(a: &DenseMatrix) -> Result<Option<DenseMatrix>> {
    let (m, n) = (a.rows(), a.cols());
    if m > n {
        return Err(Error::InvalidInput("null space computation needs m <= N"));
    }
    let sv = singular_values(a);
    if !(sv[0] > 0.0) || sv[m - 1] <= RANK_THRESHOLD * sv[0] {
        return Err(Error::RankDeficient {
            ratio: if sv[0] > 0.0 { sv[m - 1] / sv[0] } else { 0.0 },
        });
    }
    if m == n {
        return Ok(None);
    }
    let q = HouseholderQr::of_transpose(a).full_q();
    let cols: Vec<usize> = (m..n).collect();
    Ok(Some(q.select_columns(&cols)))
}

/// `max Σ_{i∈S} σᵢ vᵢ` over `v = B c` with `‖v_{S^c}‖₁ ≤ 1`.
fn support_lp(basis: &DenseMatrix, support: &[usize], signs: &[f64]) -> Result<f64> {
    let (n, d) = (basis.rows(), basis.cols());
    let off: Vec<usize> = (0..n).filter(|i| !support.contains(i)).collect();
    let q = off.len();
    let cols = 2 * d + q;
    let rows = 2 * q + 1;
    let mut c = vec![0.0; cols];
    for (&i, &sg) in support.iter().zip(signs) {
        for k in 0..d {
            c[k] += sg * basis.get(i, k);
            c[d + k] -= sg * basis.get(i, k);
        }
    }
    let mut a = DenseMatrix::zeros(rows, cols);
    let mut b = vec![0.0; rows];
    for (r, &j) in off.iter().enumerate() {
        for k in 0..d {
            let v = basis.get(j, k);
            a.set(2 * r, k, v);
            a.set(2 * r, d + k, -v);
            a.set(2 * r + 1, k, -v);
            a.set(2 * r + 1, d + k, v);
        }
        a.set(2 * r, 2 * d + r, -1.0);
        a.set(2 * r + 1, 2 * d + r, -1.0);
        a.set(2 * q, 2 * d + r, 1.0);
    }
    b[2 * q] = 1.0;
    Ok(match maximize_leq(&c, &a, &b)? {
        LpOutcome::Optimal { value, .. } => value.max(0.0),
        LpOutcome::Unbounded => f64::INFINITY,
    })
}

/// `ρ₁ = max_{v ∈ ker A∖{0}} maxᵢ |vᵢ| / ‖v_{−i}‖₁`. An unbounded program
/// (a zero column of A) gives `ρ₁ = +∞`.
pub fn nsp_rho1(a: &DenseMatrix) -> Result<NspReport> {
    let Some(basis) = null_space_basis(a)? else {
        return Ok(NspReport::new(1, 0.0, NspMethod::NullDim1));
    };
    let n = basis.rows();
    if basis.cols() == 1 {
        let v = basis.column(0);
        let total = norm1(&v);
        let rho = v
            .iter()
            .map(|vi| {
                let rest = total - vi.abs();
                if rest > 0.0 {
                    vi.abs() / rest
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        return Ok(NspReport::new(1, rho, NspMethod::NullDim1));
    }
    let mut rho = 0.0f64;
    for i in 0..n {
        for sign in [1.0, -1.0] {
            rho = rho.max(support_lp(&basis, &[i], &[sign])?);
        }
    }
    Ok(NspReport::new(1, rho, NspMethod::ExactLP))
}

/// `ρ_s` by enumerating all supports of size `s` and sign patterns.
/// Limited to `N ≤ 20`, `s ≤ 3`.
pub fn nsp_rho_s_bruteforce(a: &DenseMatrix, s: usize) -> Result<NspReport> {
    let n = a.cols();
    if n > 20 || s > 3 {
        return Err(Error::TooLarge);
    }
    if s == 0 || s > n {
        return Err(Error::InvalidInput("order must lie in 1..=N"));
    }
    let Some(basis) = null_space_basis(a)? else {
        return Ok(NspReport::new(s, 0.0, NspMethod::BruteForceSigns));
    };
    let mut rho = 0.0f64;
    let mut support: Vec<usize> = (0..s).collect();
    let mut signs = vec![0.0; s];
    loop {
        for pattern in 0..(1u32 << s) {
            for (k, sg) in signs.iter_mut().enumerate() {
                *sg = if pattern >> k & 1 == 1 { -1.0 } else { 1.0 };
            }
            rho = rho.max(support_lp(&basis, &support, &signs)?);
        }
        // Next combination in lexicographic order.
        let mut k = s;
        while k > 0 && support[k - 1] == n - s + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        support[k - 1] += 1;
        for t in k..s {
            support[t] = support[t - 1] + 1;
        }
    }
    Ok(NspReport::new(s, rho, NspMethod::BruteForceSigns))
}

/// Constant `c` in the rate factor `1 − c/(ρ₁N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateConstant {
    /// `c = 1/768`.
    Absolute,
    /// `c_ρs = (3/4 − ρ_s)²/48` for exactly sparse ground truth.
    Sharper {
        rho_s: f64,
    },
    Custom(f64),
}

impl RateConstant {
    pub fn value(&self) -> f64 {
        match *self {
            RateConstant::Absolute => GLOBAL_RATE_CONSTANT,
            RateConstant::Sharper { rho_s } => (0.75 - rho_s) * (0.75 - rho_s) / 48.0,
            RateConstant::Custom(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCertificate {
    /// `q = 1 − c/(ρ₁N)`
    pub factor: f64,
    pub gap_ok: bool,
    pub l1_ok: bool,
    pub first_gap_violation: Option<usize>,
    pub first_l1_violation: Option<usize>,
}

impl RateCertificate {
    pub fn passed(&self) -> bool {
        self.gap_ok && self.l1_ok
    }
}

/// Checks the global linear rate on a trace with ground-truth columns.
pub fn certify_global_rate(
    trace: &[IterationRecord],
    rho1: f64,
    n: usize,
    constant: RateConstant,
) -> Result<RateCertificate> {
    if !(rho1 > 0.0 && rho1 < 0.5) {
        return Err(Error::HypothesisUnmet("requires 0 < rho_1 < 1/2"));
    }
    if let RateConstant::Sharper { rho_s } = constant {
        if !(rho_s >= rho1 && rho_s < 0.5) {
            return Err(Error::HypothesisUnmet("requires rho_1 <= rho_s < 1/2"));
        }
    }
    let anchor = trace
        .iter()
        .find(|r| r.k == 1)
        .ok_or(Error::InvalidInput("trace has no k = 1 record"))?;
    let (Some(gap1), Some(err1)) = (anchor.gap, anchor.l1_err) else {
        return Err(Error::MissingGroundTruth);
    };
    if !gap1.is_finite() {
        return Err(Error::InvalidInput("gap(1) is not finite"));
    }
    let q = 1.0 - constant.value() / (rho1 * n as f64);
    let mut cert = RateCertificate {
        factor: q,
        gap_ok: true,
        l1_ok: true,
        first_gap_violation: None,
        first_l1_violation: None,
    };
    for rec in trace.iter().filter(|r| r.k >= 1) {
        let decay = libm::pow(q, (rec.k - 1) as f64);
        if let Some(gap) = rec.gap {
            if gap > decay * gap1 * (1.0 + CERT_SLACK) && cert.gap_ok {
                cert.gap_ok = false;
                cert.first_gap_violation = Some(rec.k);
            }
        }
        if let Some(err) = rec.l1_err {
            if err > 9.0 * decay * err1 * (1.0 + CERT_SLACK) && cert.l1_ok {
                cert.l1_ok = false;
                cert.first_l1_violation = Some(rec.k);
            }
        }
    }
    Ok(cert)
}

/// Two-sided bound on `J_ε(x) − ‖x_*‖₁` for a feasible `x`.
pub fn certify_sandwich(x: &[f64], x_star: &[f64], eps: f64, rho_s: f64, s: usize) -> Result<bool> {
    if x.len() != x_star.len() {
        return Err(Error::DimensionMismatch {
            expected: x_star.len(),
            found: x.len(),
        });
    }
    if !(0.0..1.0).contains(&rho_s) {
        return Err(Error::HypothesisUnmet("requires rho_s < 1"));
    }
    let n = x.len() as f64;
    let sigma_x = best_s_term_error(x, s);
    if !(eps >= 0.0) || eps > sigma_x / n {
        return Err(Error::HypothesisUnmet("requires eps <= sigma_s(x)/N"));
    }
    let gap = smoothed_objective(x, eps) - norm1(x_star);
    let lower = (1.0 - rho_s) / (1.0 + rho_s) * dist1(x, x_star) - 2.0 * best_s_term_error(x_star, s);
    let upper = 3.0 * sigma_x;
    Ok(lower - CERT_SLACK <= gap && gap <= upper + CERT_SLACK)
}

/// Checks the eventual accuracy `‖x^k − x_*‖₁ ≤ 20 σ_s(x_*)` for an
/// approximately sparse ground truth.
pub fn certify_approx_sparse(trace: &[IterationRecord], x_star: &[f64], s: usize, rho1: f64, n: usize) -> Result<bool> {
    if !(0.0..0.125).contains(&rho1) {
        return Err(Error::HypothesisUnmet("requires rho_1 < 1/8"));
    }
    let sigma = best_s_term_error(x_star, s);
    if !(sigma > 0.0) {
        return Err(Error::HypothesisUnmet("x_star is exactly s-sparse"));
    }
    let anchor = trace
        .iter()
        .find(|r| r.l1_err.is_some())
        .ok_or(Error::MissingGroundTruth)?;
    let err0 = anchor.l1_err.unwrap_or(0.0);
    let horizon = if err0 > sigma {
        libm::ceil(rho1 * n as f64 * libm::log(err0 / sigma) / APPROX_RATE_CONSTANT) as usize
    } else {
        0
    };
    let start = anchor.k + horizon;
    Ok(trace
        .iter()
        .filter(|r| r.k >= start)
        .filter_map(|r| r.l1_err)
        .all(|e| e <= 20.0 * sigma * (1.0 + CERT_SLACK)))
}
