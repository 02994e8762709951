//! The IRLS main loop for `min ‖x‖₁ s.t. Ax = y`.
//!
//! Each iteration
//!
//! 1. solves the weighted least-squares problem with the current weights,
//! 2. updates `ε ← min(ε, σ_s(x)/N)`,
//! 3. sets `wᵢ = 1/max(|xᵢ|, ε)`.
//!
//! Starting from `ε₀ = +∞` and uniform weights, the first iterate is the
//! minimum ℓ2-norm solution.

use alloc::vec;
use alloc::vec::Vec;

use crate::diagnostics::{support_identified, truth_support};
use crate::error::{Error, Result};
use crate::linalg::{dist1, norm1, norm2, thin_factorization, DenseMatrix, RangeFactors};
use crate::objective::{smoothed_objective, smoothing_update, weights};
use crate::wls::{active_set, select_path, wls_direct, wls_woodbury, WoodburyWarmStart};

/// Basis pursuit instance: measurements `y = A x` of an (approximately)
/// `s`-sparse vector, with optional ground truth for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub a: DenseMatrix,
    pub y: Vec<f64>,
    pub s: usize,
    pub x_star: Option<Vec<f64>>,
}

impl Problem {
    pub fn new(a: DenseMatrix, y: Vec<f64>, s: usize, x_star: Option<Vec<f64>>) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        if y.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if m > n {
            return Err(Error::InvalidInput("need m <= N"));
        }
        if s == 0 || s >= n {
            return Err(Error::InvalidInput("need 1 <= s < N"));
        }
        if let Some(xs) = &x_star {
            if xs.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: xs.len(),
                });
            }
            if xs.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
            let r: Vec<f64> = a.matvec(xs).iter().zip(&y).map(|(p, q)| p - q).collect();
            if norm2(&r) > 1e-8 * norm2(&y).max(1.0) {
                return Err(Error::InvalidInput("x_star is inconsistent with y"));
            }
        }
        Ok(Self { a, y, s, x_star })
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    /// `‖Ax − y‖₂ / ‖y‖₂` (absolute when `y = 0`).
    pub fn feasibility_residual(&self, x: &[f64]) -> f64 {
        let r: Vec<f64> = self.a.matvec(x).iter().zip(&self.y).map(|(p, q)| p - q).collect();
        let ny = norm2(&self.y);
        if ny > 0.0 {
            norm2(&r) / ny
        } else {
            norm2(&r)
        }
    }
}

/// How the weighted least-squares step is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WlsPath {
    Direct,
    Woodbury,
    Auto,
}

/// The route actually taken in one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPath {
    Direct,
    Woodbury,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `‖x⁺ − x‖₁ ≤ rel_change_tol · max(1, ‖x‖₁)` and the
    /// smoothing is negligible (see [`irls_run`]).
    pub rel_change_tol: f64,
    /// Any `ε` at or below this counts as negligible.
    pub eps_floor: f64,
    pub wls_path: WlsPath,
    pub woodbury_active_fraction: f64,
    pub cg_rel_tol: f64,
    /// Defaults to `4m` when `None`.
    pub cg_max_iters: Option<usize>,
    pub record_trace: bool,
    /// Keep every iterate `x^k` in the output (memory heavy).
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_change_tol: 1e-10,
            eps_floor: 1e-14,
            wls_path: WlsPath::Auto,
            woodbury_active_fraction: 0.5,
            cg_rel_tol: 1e-12,
            cg_max_iters: None,
            record_trace: true,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1"));
        }
        if !(self.rel_change_tol > 0.0) || !(self.eps_floor > 0.0) || !(self.cg_rel_tol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive"));
        }
        if self.cg_rel_tol >= 1.0 {
            return Err(Error::InvalidInput("cg_rel_tol must be below 1"));
        }
        if !(self.woodbury_active_fraction > 0.0 && self.woodbury_active_fraction <= 1.0) {
            return Err(Error::InvalidInput("woodbury_active_fraction must lie in (0, 1]"));
        }
        if self.cg_max_iters == Some(0) {
            return Err(Error::InvalidInput("cg_max_iters must be at least 1"));
        }
        Ok(())
    }

    pub fn cg_cap(&self, m: usize) -> usize {
        self.cg_max_iters.unwrap_or(4 * m).max(1)
    }
}

/// Iterate `x^k`, smoothing `ε_k` and weights `w_k` after `k` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    /// `None` before the first step of a weight-only initialization.
    pub x: Option<Vec<f64>>,
    pub eps: f64,
    pub w: Vec<f64>,
    pub k: usize,
    pub warm: Option<WoodburyWarmStart>,
}

impl IterateState {
    /// `w = 1`, `ε = +∞`, no iterate.
    pub fn uniform(n: usize) -> Self {
        Self {
            x: None,
            eps: f64::INFINITY,
            w: vec![1.0; n],
            k: 0,
            warm: None,
        }
    }

    /// `ε = 0` marks an exactly `s`-sparse feasible iterate; the weights
    /// are not formed in that case.
    pub fn is_exact(&self) -> bool {
        self.eps == 0.0
    }
}

/// How to start a run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// `w₀ = 1`, `ε₀ = +∞`.
    Uniform,
    /// Given positive weights and smoothing, no iterate.
    Weights { w0: Vec<f64>, eps0: f64 },
    /// A starting iterate; `w₀ = weights(x₀, ε₀)`.
    Iterate { x0: Vec<f64>, eps0: f64 },
}

impl InitialState {
    fn into_state(self, n: usize) -> Result<IterateState> {
        match self {
            InitialState::Uniform => Ok(IterateState::uniform(n)),
            InitialState::Weights { w0, eps0 } => {
                if w0.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: w0.len(),
                    });
                }
                if w0.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || !(eps0 > 0.0) {
                    return Err(Error::InvalidInput("initial weights must be positive"));
                }
                Ok(IterateState {
                    x: None,
                    eps: eps0,
                    w: w0,
                    k: 0,
                    warm: None,
                })
            }
            InitialState::Iterate { x0, eps0 } => {
                if x0.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: x0.len(),
                    });
                }
                if !(eps0 > 0.0) || x0.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput("initial iterate needs eps0 > 0"));
                }
                let w = weights(&x0, eps0);
                Ok(IterateState {
                    x: Some(x0),
                    eps: eps0,
                    w,
                    k: 0,
                    warm: None,
                })
            }
        }
    }
}

/// Per-iteration metrics. Optional fields are `None` where undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub eps: f64,
    /// `J_{ε_k}(x^k)`; ℓ1 norm at `ε = +∞`, absent without an iterate.
    pub j: Option<f64>,
    /// `J_{ε_k}(x^k) − ‖x_*‖₁`
    pub gap: Option<f64>,
    /// `‖x^k − x_*‖₁`
    pub l1_err: Option<f64>,
    /// `gap(k)/gap(k−1)`
    pub mu: Option<f64>,
    /// `l1_err(k)/l1_err(k−1)`
    pub mu_l1: Option<f64>,
    /// `‖x^k − x_*‖₁ / min_{i∈S} |(x_*)ᵢ|`
    pub zeta: Option<f64>,
    pub support_ok: Option<bool>,
    pub path: StepPath,
    pub cg_iters: usize,
    pub feas_residual: Option<f64>,
}

impl IterationRecord {
    fn new(problem: &Problem, k: usize, eps: f64, x: Option<&[f64]>, path: StepPath, cg_iters: usize) -> Self {
        let mut rec = IterationRecord {
            k,
            eps,
            j: None,
            gap: None,
            l1_err: None,
            mu: None,
            mu_l1: None,
            zeta: None,
            support_ok: None,
            path,
            cg_iters,
            feas_residual: None,
        };
        let Some(x) = x else { return rec };
        let j = if eps.is_finite() {
            smoothed_objective(x, eps)
        } else {
            norm1(x)
        };
        rec.j = Some(j);
        rec.feas_residual = Some(problem.feasibility_residual(x));
        if let Some(xs) = &problem.x_star {
            rec.gap = Some(j - norm1(xs));
            let err = dist1(x, xs);
            rec.l1_err = Some(err);
            let support = truth_support(xs, problem.s);
            let min_mag = support.iter().map(|&i| xs[i].abs()).fold(f64::INFINITY, f64::min);
            if min_mag.is_finite() && min_mag > 0.0 {
                rec.zeta = Some(err / min_mag);
            }
            rec.support_ok = Some(support_identified(x, xs, problem.s));
        }
        rec
    }

    /// Fills `mu` and `mu_l1` from the previous record.
    fn link(&mut self, prev: &IterationRecord) {
        self.mu = ratio(self.gap, prev.gap);
        self.mu_l1 = ratio(self.l1_err, prev.l1_err);
    }
}

fn ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    }
}

/// One IRLS iteration. The returned state has `ε = 0` (see
/// [`IterateState::is_exact`]) when the new iterate is `s`-sparse.
pub fn irls_step(
    state: &IterateState,
    problem: &Problem,
    config: &SolverConfig,
    factors: Option<&RangeFactors>,
) -> Result<(IterateState, IterationRecord)> {
    if state.is_exact() {
        return Err(Error::InvalidInput("state is already an exact sparse solution"));
    }
    let m = problem.m();
    let mut path = StepPath::Direct;
    let mut active_size = 0;
    if let (Some(x), true) = (&state.x, state.eps.is_finite()) {
        active_size = active_set(x, state.eps).len();
        path = select_path(config, state.eps, active_size, m);
    }
    if active_size == 0 || factors.is_none() {
        path = StepPath::Direct;
    }

    let mut cg_iters = 0;
    let mut warm = None;
    let x_next = match (path, &state.x, factors) {
        (StepPath::Woodbury, Some(x), Some(f)) => {
            let out = wls_woodbury(
                f,
                x,
                state.eps,
                state.warm.as_ref(),
                config.cg_rel_tol,
                config.cg_cap(m),
            )?;
            cg_iters = out.cg_iters;
            warm = Some(out.warm_start());
            out.x
        }
        _ => wls_direct(&problem.a, &problem.y, &state.w)?,
    };

    let eps_next = smoothing_update(state.eps, &x_next, problem.s);
    let w_next = if eps_next > 0.0 {
        weights(&x_next, eps_next)
    } else {
        Vec::new()
    };
    let record = IterationRecord::new(problem, state.k + 1, eps_next, Some(&x_next), path, cg_iters);
    let next = IterateState {
        x: Some(x_next),
        eps: eps_next,
        w: w_next,
        k: state.k + 1,
        warm,
    };
    Ok((next, record))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    ExactSparse,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub x: Vec<f64>,
    /// Records for `k = 0..=iterations` when `record_trace` is set.
    pub trace: Vec<IterationRecord>,
    pub status: RunStatus,
    pub iterations: usize,
    /// `x^1, x^2, …` when `record_iterates` is set (plus `x^0` first if
    /// the run started from an iterate).
    pub iterates: Vec<Vec<f64>>,
}

/// Runs IRLS until one of
///
/// * `ε = 0`: the iterate is exactly `s`-sparse ([`RunStatus::ExactSparse`]),
/// * `‖x^{k+1} − x^k‖₁ ≤ tol·max(1, ‖x^k‖₁)` and the smoothing is
///   negligible, `N·ε_{k+1} ≤ tol·max(1, ‖x^{k+1}‖₁)` or `ε_{k+1} ≤ eps_floor`
///   ([`RunStatus::Converged`]),
/// * `max_iters` steps ([`RunStatus::MaxIters`]).
pub fn irls_run(problem: &Problem, config: &SolverConfig, init: InitialState) -> Result<RunOutput> {
    config.validate()?;
    let n = problem.n();
    let mut state = init.into_state(n)?;
    let factors = match config.wls_path {
        WlsPath::Direct => None,
        _ => Some(thin_factorization(&problem.a, &problem.y)?),
    };

    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut prev = IterationRecord::new(problem, 0, state.eps, state.x.as_deref(), StepPath::Direct, 0);
    if config.record_iterates {
        if let Some(x0) = &state.x {
            iterates.push(x0.clone());
        }
    }
    if config.record_trace {
        trace.push(prev.clone());
    }

    let tol = config.rel_change_tol;
    let mut status = RunStatus::MaxIters;
    let mut iterations = 0;
    for _ in 0..config.max_iters {
        let (next, mut record) = irls_step(&state, problem, config, factors.as_ref())?;
        record.link(&prev);
        iterations += 1;
        let x_next = next.x.as_deref().unwrap_or(&[]);
        if config.record_iterates {
            iterates.push(x_next.to_vec());
        }
        if config.record_trace {
            trace.push(record.clone());
        }
        if next.is_exact() {
            status = RunStatus::ExactSparse;
            state = next;
            break;
        }
        let converged = match &state.x {
            Some(x) => {
                let scale_prev = norm1(x).max(1.0);
                let scale_next = norm1(x_next).max(1.0);
                dist1(x_next, x) <= tol * scale_prev
                    && (n as f64 * next.eps <= tol * scale_next || next.eps <= config.eps_floor)
            }
            None => false,
        };
        state = next;
        prev = record;
        if converged {
            status = RunStatus::Converged;
            break;
        }
    }
    Ok(RunOutput {
        x: state.x.unwrap_or_else(|| vec![0.0; n]),
        trace,
        status,
        iterations,
        iterates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Problem {
        let a = DenseMatrix::from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]).unwrap();
        Problem::new(a, vec![2.0, 0.0], 1, Some(vec![2.0, 0.0, 0.0])).unwrap()
    }

    #[test]
    fn problem_validation() {
        let a = DenseMatrix::from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]).unwrap();
        assert!(Problem::new(a.clone(), vec![1.0], 1, None).is_err());
        assert!(Problem::new(a.clone(), vec![1.0, 0.0], 3, None).is_err());
        assert!(Problem::new(a.clone(), vec![1.0, 0.0], 0, None).is_err());
        assert!(Problem::new(a, vec![1.0, 0.0], 1, Some(vec![2.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn first_step_is_min_norm() {
        let p = tiny();
        let cfg = SolverConfig::default();
        let (st, rec) = irls_step(&IterateState::uniform(3), &p, &cfg, None).unwrap();
        // Aᵀ(AAᵀ)⁻¹y with AAᵀ = [[2,1],[1,2]]: z = (4/3, −2/3), x = (4/3, −2/3, 2/3).
        let x = st.x.unwrap();
        for (a, b) in x.iter().zip([4.0 / 3.0, -2.0 / 3.0, 2.0 / 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(rec.k, 1);
        assert!((st.eps - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn zero_data_is_exact_after_one_step() {
        let a = DenseMatrix::from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]).unwrap();
        let p = Problem::new(a, vec![0.0, 0.0], 1, None).unwrap();
        let out = irls_run(&p, &SolverConfig::default(), InitialState::Uniform).unwrap();
        assert_eq!(out.status, RunStatus::ExactSparse);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, vec![0.0; 3]);
    }

    #[test]
    fn tiny_instance_recovers() {
        let p = tiny();
        let out = irls_run(&p, &SolverConfig::default(), InitialState::Uniform).unwrap();
        assert_ne!(out.status, RunStatus::MaxIters);
        assert!(dist1(&out.x, &[2.0, 0.0, 0.0]) <= 1e-8);
        assert_eq!(out.trace.len(), out.iterations + 1);
        assert_eq!(out.trace[0].eps, f64::INFINITY);
        assert!(out.trace[0].j.is_none());
    }

    #[test]
    fn max_iters_reported() {
        let p = tiny();
        let cfg = SolverConfig {
            max_iters: 1,
            ..SolverConfig::default()
        };
        let out = irls_run(&p, &cfg, InitialState::Uniform).unwrap();
        assert_eq!(out.status, RunStatus::MaxIters);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SolverConfig {
            woodbury_active_fraction: 0.0,
            ..SolverConfig::default()
        };
        assert!(irls_run(&tiny(), &cfg, InitialState::Uniform).is_err());
    }
}
