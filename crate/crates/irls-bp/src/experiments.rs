//! Gaussian ensembles, adversarial initialization and the rate and
//! dimension-dependence experiment drivers.
//!
//! Every trial is a pure function of `(seed, trial index)`: its generator
//! is ChaCha8 seeded with `seed` on stream `trial`. Trials run on the
//! ambient rayon pool and results are returned in trial order, so output
//! does not depend on the number of threads.

use irls_bp_core::diagnostics::{first_gap_ratio, truth_support};
use irls_bp_core::linalg::HouseholderQr;
use irls_bp_core::linalg::{dist1, norm1};
use irls_bp_core::lp::l1_minimize;
use irls_bp_core::objective::{best_s_term_error, smoothing_update, weights};
use irls_bp_core::{irls_run, DenseMatrix, InitialState, IterationRecord, Problem, RunStatus, SolverConfig};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

/// Relative ℓ1 accuracy that counts as exact recovery.
pub const SUCCESS_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Core(#[from] irls_bp_core::Error),
    #[error("measurement count {m} is not below N = {n}")]
    ResultNotLessThanN { m: usize, n: usize },
    #[error("invalid ensemble: {0}")]
    InvalidSpec(String),
    #[error("adversarial initialization failed: {0}")]
    InnerSolveFailed(String),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// `⌊c_m · s · ln(N/s)⌋`, required to be below `N`.
pub fn measurement_count(n: usize, s: usize, c_m: f64) -> Result<usize> {
    if s == 0 || s >= n {
        return Err(ExperimentError::InvalidSpec(format!(
            "need 0 < s < N, got s = {s}, N = {n}"
        )));
    }
    if c_m <= 0.0 || !c_m.is_finite() {
        return Err(ExperimentError::InvalidSpec(format!("c_m must be positive, got {c_m}")));
    }
    let m = (c_m * s as f64 * (n as f64 / s as f64).ln()).floor() as usize;
    if m >= n {
        return Err(ExperimentError::ResultNotLessThanN { m, n });
    }
    Ok(m)
}

/// Generator for trial `trial` of an ensemble seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `A` with i.i.d. `N(0, 1/m)` entries, uniformly random support of size
/// `s` carrying a uniformly random unit vector, and `y = A x_*`.
pub fn gen_gaussian_problem(n: usize, m: usize, s: usize, seed: u64) -> Result<Problem> {
    gen_gaussian_problem_with(n, m, s, &mut trial_rng(seed, 0))
}

pub fn gen_gaussian_problem_with<R: Rng + ?Sized>(n: usize, m: usize, s: usize, rng: &mut R) -> Result<Problem> {
    if !(s < m && m < n) || s == 0 {
        return Err(ExperimentError::InvalidSpec(format!(
            "need 0 < s < m < N, got s = {s}, m = {m}, N = {n}"
        )));
    }
    let normal = Normal::new(0.0, 1.0 / (m as f64).sqrt()).expect("positive standard deviation");
    let entries: Vec<f64> = (0..m * n).map(|_| normal.sample(rng)).collect();
    let a = DenseMatrix::new(m, n, entries)?;
    let mut support = sample(rng, n, s).into_vec();
    support.sort_unstable();
    let mut values: Vec<f64> = (0..s).map(|_| StandardNormal.sample(rng)).collect();
    let scale = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    values.iter_mut().for_each(|v| *v /= scale);
    let mut x_star = vec![0.0; n];
    for (&i, &v) in support.iter().zip(&values) {
        x_star[i] = v;
    }
    let y = a.matvec(&x_star);
    Ok(Problem::new(a, y, s, Some(x_star))?)
}

/// Spreads ℓ1 mass `tail_l1` over the zero coordinates of `x_star`.
/// `σ_s` of the result equals `tail_l1` as long as no tail entry exceeds
/// the smallest nonzero of `x_star`.
pub fn add_tail(x_star: &[f64], tail_l1: f64, seed: u64) -> Result<Vec<f64>> {
    if tail_l1 < 0.0 || !tail_l1.is_finite() {
        return Err(ExperimentError::InvalidSpec(format!(
            "tail mass must be nonnegative, got {tail_l1}"
        )));
    }
    let mut out = x_star.to_vec();
    let zeros: Vec<usize> = (0..x_star.len()).filter(|&i| x_star[i] == 0.0).collect();
    if tail_l1 == 0.0 || zeros.is_empty() {
        return Ok(out);
    }
    let mut rng = trial_rng(seed, u64::MAX);
    let raw: Vec<f64> = zeros
        .iter()
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            if g == 0.0 {
                f64::MIN_POSITIVE
            } else {
                g
            }
        })
        .collect();
    let total: f64 = raw.iter().map(|v| v.abs()).sum();
    for (&i, &v) in zeros.iter().zip(&raw) {
        out[i] = tail_l1 * v / total;
    }
    Ok(out)
}

/// Replaces the ground truth by `x_star` and recomputes `y = A x_star`.
pub fn with_ground_truth(problem: &Problem, x_star: Vec<f64>) -> Result<Problem> {
    let y = problem.a.matvec(&x_star);
    Ok(Problem::new(problem.a.clone(), y, problem.s, Some(x_star))?)
}

/// Starting point that hides the true support: the ℓ1 minimizer of the
/// system restricted to the complement of the support, padded with zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryInit {
    pub w0: Vec<f64>,
    pub x0: Vec<f64>,
    pub eps0: f64,
}

impl AdversaryInit {
    pub fn initial_state(&self) -> InitialState {
        InitialState::Iterate {
            x0: self.x0.clone(),
            eps0: self.eps0,
        }
    }
}

/// Solver for the restricted ℓ1 problem of the adversarial start.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerSolver {
    /// Primal-dual interior point method to the given tolerance.
    InteriorPoint { tol: f64 },
    /// IRLS itself with target sparsity `m`: the restricted minimizer is
    /// generically `m`-sparse, so `σ_m` vanishes at the solution. Slow,
    /// since the restricted matrix has no useful null space property; a
    /// run that stops at its iteration cap is accepted if feasible.
    Irls(SolverConfig),
}

impl Default for InnerSolver {
    fn default() -> Self {
        InnerSolver::InteriorPoint { tol: 1e-11 }
    }
}

/// `x⁰` is the ℓ1 minimizer of `A_{S^c} z = y` padded with zeros on `S`,
/// `ε₀ = σ_s(x⁰)/N` and `w₀ = weights(x⁰, ε₀)`. When `A_{S^c}` has no
/// more columns than rows the restricted system is generically
/// inconsistent; `z` is then its least-squares solution, which is unique
/// and so also of least ℓ1 norm among the least-squares solutions.
pub fn adversary_initial_weights(problem: &Problem, inner: &InnerSolver) -> Result<AdversaryInit> {
    let x_star = problem.x_star.as_ref().ok_or(irls_bp_core::Error::MissingGroundTruth)?;
    let n = problem.n();
    let m = problem.m();
    let support = truth_support(x_star, problem.s);
    let complement: Vec<usize> = (0..n).filter(|i| support.binary_search(i).is_err()).collect();
    let restricted = problem.a.select_columns(&complement);
    let failed = |e: irls_bp_core::Error| ExperimentError::InnerSolveFailed(e.to_string());
    let z = if complement.len() <= m {
        HouseholderQr::new(&restricted)
            .solve_least_squares(&problem.y)
            .map_err(failed)?
    } else {
        match inner {
            InnerSolver::InteriorPoint { tol } => l1_minimize(&restricted, &problem.y, *tol).map_err(failed)?,
            InnerSolver::Irls(config) => {
                let sub = Problem::new(restricted, problem.y.clone(), m, None).map_err(failed)?;
                let mut config = config.clone();
                config.record_trace = false;
                config.record_iterates = false;
                let out = irls_run(&sub, &config, InitialState::Uniform).map_err(failed)?;
                if sub.feasibility_residual(&out.x) > 1e-8 {
                    return Err(ExperimentError::InnerSolveFailed("inner iterate is infeasible".into()));
                }
                out.x
            }
        }
    };
    let mut x0 = vec![0.0; n];
    for (&i, &v) in complement.iter().zip(&z) {
        x0[i] = v;
    }
    let eps0 = smoothing_update(f64::INFINITY, &x0, problem.s);
    if eps0.is_nan() || eps0 <= 0.0 {
        return Err(ExperimentError::InnerSolveFailed(
            "restricted minimizer is s-sparse".into(),
        ));
    }
    let w0 = weights(&x0, eps0);
    Ok(AdversaryInit { w0, x0, eps0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementRule {
    Fixed(usize),
    /// `⌊c_m · s · ln(N/s)⌋`
    Log {
        c_m: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Uniform,
    Adversary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub n: usize,
    pub s: usize,
    pub m: MeasurementRule,
    pub trials: usize,
    pub seed: u64,
    pub init: InitMode,
    /// ℓ1 mass added off the support of each ground truth.
    pub tail_l1: f64,
}

impl EnsembleSpec {
    pub fn new(n: usize, s: usize, m: MeasurementRule, trials: usize, seed: u64) -> Self {
        Self {
            n,
            s,
            m,
            trials,
            seed,
            init: InitMode::Uniform,
            tail_l1: 0.0,
        }
    }

    /// Validates the spec and returns the measurement count.
    pub fn measurements(&self) -> Result<usize> {
        if self.trials == 0 {
            return Err(ExperimentError::InvalidSpec("trials must be at least 1".into()));
        }
        let m = match self.m {
            MeasurementRule::Fixed(m) => m,
            MeasurementRule::Log { c_m } => measurement_count(self.n, self.s, c_m)?,
        };
        if !(self.s > 0 && self.s < m && m < self.n) {
            return Err(ExperimentError::InvalidSpec(format!(
                "need 0 < s < m < N, got s = {}, m = {m}, N = {}",
                self.s, self.n
            )));
        }
        Ok(m)
    }

    /// Problem of trial `trial`, including the optional tail.
    pub fn problem(&self, trial: usize) -> Result<Problem> {
        let m = self.measurements()?;
        let mut rng = trial_rng(self.seed, trial as u64);
        let problem = gen_gaussian_problem_with(self.n, m, self.s, &mut rng)?;
        if self.tail_l1 > 0.0 {
            let x_star = problem.x_star.clone().unwrap_or_default();
            let tail_seed: u64 = rng.random();
            return with_ground_truth(&problem, add_tail(&x_star, self.tail_l1, tail_seed)?);
        }
        Ok(problem)
    }
}

/// Outcome of one trial of the rate experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub trace: Vec<IterationRecord>,
    pub status: Option<RunStatus>,
    pub x: Vec<f64>,
    /// `‖x − x_*‖₁ ≤ 1e-8 ‖x_*‖₁` at the end of the run.
    pub success: bool,
    /// First `k` with relative ℓ1 error at most `SUCCESS_TOL`.
    pub iters_to_accuracy: Option<usize>,
    pub mu1: Option<f64>,
    pub error: Option<String>,
}

impl TrialResult {
    /// First `k` at which the top entries of `x^k` match the support.
    pub fn first_support_identified(&self) -> Option<usize> {
        self.trace.iter().find(|r| r.support_ok == Some(true)).map(|r| r.k)
    }

    /// First `k` with `ζ(k) < 1`.
    pub fn first_zeta_below_one(&self) -> Option<usize> {
        self.trace.iter().find(|r| r.zeta.is_some_and(|z| z < 1.0)).map(|r| r.k)
    }
}

/// Runs one trial: problem generation, optional adversarial start, full
/// IRLS run. Solver errors are reported in the result, not propagated.
pub fn run_trial(spec: &EnsembleSpec, trial: usize, config: &SolverConfig) -> Result<TrialResult> {
    let m = spec.measurements()?;
    let mut result = TrialResult {
        trial,
        n: spec.n,
        m,
        s: spec.s,
        trace: Vec::new(),
        status: None,
        x: Vec::new(),
        success: false,
        iters_to_accuracy: None,
        mu1: None,
        error: None,
    };
    let problem = spec.problem(trial)?;
    let x_star = problem.x_star.clone().unwrap_or_default();
    let init = match spec.init {
        InitMode::Uniform => Ok(InitialState::Uniform),
        InitMode::Adversary => adversary_initial_weights(&problem, &InnerSolver::default()).map(|a| a.initial_state()),
    };
    let run = init.and_then(|init| Ok(irls_run(&problem, config, init)?));
    match run {
        Ok(out) => {
            let scale = norm1(&x_star);
            result.success = dist1(&out.x, &x_star) <= SUCCESS_TOL * scale;
            result.iters_to_accuracy = out
                .trace
                .iter()
                .find(|r| r.l1_err.is_some_and(|e| e <= SUCCESS_TOL * scale))
                .map(|r| r.k);
            result.mu1 = first_gap_ratio(&out.trace);
            result.status = Some(out.status);
            result.trace = out.trace;
            result.x = out.x;
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    Ok(result)
}

/// All trials of `spec`, in trial order.
pub fn run_rate_experiment(spec: &EnsembleSpec, config: &SolverConfig) -> Result<Vec<TrialResult>> {
    spec.measurements()?;
    (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, t, config))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimDepRow {
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    /// Trials that produced a first gap ratio.
    pub valid: usize,
    pub mean_mu1: f64,
    /// `1/(1 − mean μ(1))`
    pub inv_one_minus_mu1: f64,
}

/// First gap ratio under adversarial initialization, per dimension.
///
/// With the adversarial start `J_{ε₀}(x⁰)` is finite, so `μ(1)` is the
/// ratio `gap(1)/gap(0)`; only one outer step is taken.
pub fn run_dimdep_experiment(
    dims: &[usize],
    s: usize,
    c_m: f64,
    trials: usize,
    seed: u64,
    config: &SolverConfig,
    inner: &InnerSolver,
) -> Result<Vec<DimDepRow>> {
    if dims.is_empty() || dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::InvalidSpec(
            "dimensions must be strictly increasing".into(),
        ));
    }
    let mut outer = config.clone();
    outer.max_iters = 1;
    outer.record_trace = true;
    let mut rows = Vec::with_capacity(dims.len());
    for (level, &n) in dims.iter().enumerate() {
        let mut spec = EnsembleSpec::new(
            n,
            s,
            MeasurementRule::Log { c_m },
            trials,
            seed ^ ((level as u64) << 32),
        );
        spec.init = InitMode::Adversary;
        let m = spec.measurements()?;
        let ratios: Vec<Option<f64>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let problem = spec.problem(t).ok()?;
                let adv = adversary_initial_weights(&problem, inner).ok()?;
                let out = irls_run(&problem, &outer, adv.initial_state()).ok()?;
                first_gap_ratio(&out.trace)
            })
            .collect();
        let valid: Vec<f64> = ratios.into_iter().flatten().collect();
        let mean_mu1 = if valid.is_empty() {
            f64::NAN
        } else {
            valid.iter().sum::<f64>() / valid.len() as f64
        };
        rows.push(DimDepRow {
            n,
            m,
            trials,
            valid: valid.len(),
            mean_mu1,
            inv_one_minus_mu1: 1.0 / (1.0 - mean_mu1),
        });
    }
    Ok(rows)
}

/// Sample Pearson correlation; `NaN` for fewer than two points or zero
/// variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return f64::NAN;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// `σ_s` of the ground truth of `problem`, zero without one.
pub fn ground_truth_tail(problem: &Problem) -> f64 {
    problem.x_star.as_ref().map_or(0.0, |x| best_s_term_error(x, problem.s))
}
