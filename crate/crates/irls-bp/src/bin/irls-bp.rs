//! `irls-bp`: generate problems, solve them with IRLS, certify the rate
//! bounds on a trace and run the random experiments.
//!
//! Exit codes: 0 success, 1 iteration cap reached or a certificate
//! failed, 2 invalid flags, 3 I/O or file format failure, 4 solver error.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use irls_bp::experiments::{
    adversary_initial_weights, run_dimdep_experiment, run_rate_experiment, EnsembleSpec, ExperimentError, InitMode,
    InnerSolver, MeasurementRule,
};
use irls_bp::io::{self, FormatError};
use irls_bp_core::diagnostics::{
    certify_approx_sparse, certify_global_rate, certify_sandwich, nsp_rho1, nsp_rho_s_bruteforce, RateConstant,
};
use irls_bp_core::objective::best_s_term_error;
use irls_bp_core::{irls_run, InitialState, IterationRecord, Problem, RunStatus, SolverConfig, WlsPath};

/// Largest N for which ρ₁ is computed without being asked.
const AUTO_RHO1_MAX_N: usize = 64;

#[derive(Parser)]
#[command(
    name = "irls-bp",
    version,
    about = "IRLS for basis pursuit: solver, certifiers and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random Gaussian problem with a sparse ground truth.
    Gen(GenArgs),
    /// Run IRLS on a problem file and write its trace.
    Solve(SolveArgs),
    /// Check the convergence theorems on a recorded trace.
    Certify(CertifyArgs),
    /// Run a random experiment and write its table.
    Experiment {
        #[command(subcommand)]
        kind: ExperimentKind,
        /// Worker threads; 0 uses all cores.
        #[arg(long, env = "IRLS_BP_THREADS", global = true)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, conflicts_with = "cm")]
    m: Option<usize>,
    /// m = ⌊cm · s · ln(N/s)⌋; the default rule uses cm = 2.
    #[arg(long)]
    cm: Option<f64>,
    #[arg(long)]
    s: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// ℓ1 mass added off the support of the ground truth.
    #[arg(long, default_value_t = 0.0)]
    tail_l1: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum WlsArg {
    Direct,
    Woodbury,
    Auto,
}

impl From<WlsArg> for WlsPath {
    fn from(w: WlsArg) -> Self {
        match w {
            WlsArg::Direct => WlsPath::Direct,
            WlsArg::Woodbury => WlsPath::Woodbury,
            WlsArg::Auto => WlsPath::Auto,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Relative ℓ1 change tolerance of the stopping rule.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = WlsArg::Auto)]
    wls: WlsArg,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.max_iters,
            rel_change_tol: self.tol,
            wls_path: self.wls.into(),
            ..SolverConfig::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Start from the adversarial initialization (needs xstar).
    #[arg(long)]
    adversary: bool,
    #[arg(long)]
    trace: PathBuf,
    /// Final iterate, one line.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Iterates x^1, x^2, ..., one per line.
    #[arg(long)]
    iterates: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, conflicts_with = "compute_rho1")]
    rho1: Option<f64>,
    #[arg(long)]
    compute_rho1: bool,
    /// NSP constant of order s; computed when s = 1 or N ≤ 20, s ≤ 3.
    #[arg(long)]
    rho_s: Option<f64>,
    /// Also check the accuracy bound for approximately sparse ground truth.
    #[arg(long)]
    approx_sparse: bool,
    /// Iterates written by `solve --iterates`, for the exact sandwich check.
    #[arg(long)]
    iterates: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentKind {
    /// Per-iteration convergence metrics of independent trials.
    Rates(RatesArgs),
    /// First gap ratio under adversarial initialization versus N.
    Dimdep(DimdepArgs),
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, conflicts_with = "cm")]
    m: Option<usize>,
    #[arg(long)]
    cm: Option<f64>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    adversary: bool,
    #[arg(long, default_value_t = 0.0)]
    tail_l1: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DimdepArgs {
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 40)]
    s: usize,
    #[arg(long, default_value_t = 2.0)]
    cm: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Io(String),
    Solver(String),
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Core(e) => Failure::Solver(e.to_string()),
            other => Failure::Io(other.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidSpec(_) | ExperimentError::ResultNotLessThanN { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Solver(other.to_string()),
        }
    }
}

impl From<irls_bp_core::Error> for Failure {
    fn from(e: irls_bp_core::Error) -> Self {
        Failure::Solver(e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Gen(args) => gen(args),
        Command::Solve(args) => solve(args),
        Command::Certify(args) => certify(args),
        Command::Experiment { kind, threads } => experiment(kind, threads),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver error: {msg}");
            ExitCode::from(4)
        }
    }
}

fn measurement_rule(m: Option<usize>, cm: Option<f64>) -> MeasurementRule {
    match m {
        Some(m) => MeasurementRule::Fixed(m),
        None => MeasurementRule::Log { c_m: cm.unwrap_or(2.0) },
    }
}

fn gen(args: GenArgs) -> Outcome {
    let mut spec = EnsembleSpec::new(args.n, args.s, measurement_rule(args.m, args.cm), 1, args.seed);
    spec.tail_l1 = args.tail_l1;
    let problem = spec.problem(0)?;
    io::write_problem(&args.out, &problem)?;
    Ok(0)
}

fn solve(args: SolveArgs) -> Outcome {
    let problem = io::read_problem(&args.problem)?;
    let mut config = args.solver.config();
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    config.record_iterates = args.iterates.is_some();
    let init = if args.adversary {
        if problem.x_star.is_none() {
            return Err(Failure::Usage("--adversary needs a problem with xstar".into()));
        }
        adversary_initial_weights(&problem, &InnerSolver::default())?.initial_state()
    } else {
        InitialState::Uniform
    };
    let started_from_iterate = matches!(init, InitialState::Iterate { .. });
    let out = irls_run(&problem, &config, init)?;
    io::write_trace_file(&args.trace, &out.trace)?;
    if let Some(path) = &args.solution {
        io::write_vectors(path, std::slice::from_ref(&out.x))?;
    }
    if let Some(path) = &args.iterates {
        let skip = usize::from(started_from_iterate);
        io::write_vectors(path, &out.iterates[skip..])?;
    }
    eprintln!("{:?} after {} iterations", out.status, out.iterations);
    Ok(match out.status {
        RunStatus::MaxIters => 1,
        RunStatus::Converged | RunStatus::ExactSparse => 0,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Pass,
    Fail,
    HypothesisUnmet,
    Inconclusive,
    Skipped,
}

impl Verdict {
    fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::HypothesisUnmet => "HYPOTHESIS-UNMET",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Skipped => "SKIPPED",
        }
    }

    fn from_check(r: irls_bp_core::Result<bool>) -> Result<Self, Failure> {
        match r {
            Ok(true) => Ok(Verdict::Pass),
            Ok(false) => Ok(Verdict::Fail),
            Err(irls_bp_core::Error::HypothesisUnmet(_)) => Ok(Verdict::HypothesisUnmet),
            Err(e) => Err(e.into()),
        }
    }
}

fn certify(args: CertifyArgs) -> Outcome {
    let problem = io::read_problem(&args.problem)?;
    let trace = io::read_trace_file(&args.trace)?;
    let Some(x_star) = problem.x_star.clone() else {
        return Err(Failure::Usage("certification needs a problem with xstar".into()));
    };
    if trace.iter().skip(1).any(|r| r.l1_err.is_none() || r.gap.is_none()) {
        return Err(Failure::Usage("trace lacks ground-truth columns".into()));
    }
    let n = problem.n();
    let s = problem.s;
    let rho1 = match args.rho1 {
        Some(r) => Some(r),
        None if args.compute_rho1 || n <= AUTO_RHO1_MAX_N => Some(nsp_rho1(&problem.a)?.rho),
        None => None,
    };
    let rho_s = match (args.rho_s, rho1) {
        (Some(r), _) => Some(r),
        (None, Some(r)) if s == 1 => Some(r),
        (None, _) if n <= 20 && s <= 3 => Some(nsp_rho_s_bruteforce(&problem.a, s)?.rho),
        _ => None,
    };
    if let Some(r) = rho1 {
        println!("rho1 = {}", io::fmt_real(r));
    }
    if let Some(r) = rho_s {
        println!("rho_s = {}", io::fmt_real(r));
    }

    let rate = |constant: RateConstant| -> Result<Verdict, Failure> {
        let Some(r1) = rho1 else { return Ok(Verdict::Skipped) };
        Verdict::from_check(certify_global_rate(&trace, r1, n, constant).map(|c| c.passed()))
    };
    let mut lines = vec![("global-rate c=1/768", rate(RateConstant::Absolute)?)];
    lines.push((
        "global-rate sharper c",
        match rho_s {
            Some(rs) => rate(RateConstant::Sharper { rho_s: rs })?,
            None => Verdict::Skipped,
        },
    ));
    let iterates = args.iterates.as_deref().map(io::read_vectors).transpose()?;
    lines.push(("sandwich", sandwich(&problem, &trace, iterates.as_deref(), rho_s)?));
    let consistent = trace
        .iter()
        .filter(|r| r.zeta.is_some_and(|z| z < 1.0))
        .all(|r| r.support_ok == Some(true));
    lines.push((
        "support-consistency",
        if consistent { Verdict::Pass } else { Verdict::Fail },
    ));
    if args.approx_sparse {
        lines.push((
            "approx-sparse",
            match rho1 {
                Some(r1) => Verdict::from_check(certify_approx_sparse(&trace, &x_star, s, r1, n))?,
                None => Verdict::Skipped,
            },
        ));
    }
    let mut failed = false;
    for (name, verdict) in &lines {
        println!("{name}: {}", verdict.label());
        failed |= *verdict == Verdict::Fail;
    }
    Ok(u8::from(failed))
}

/// With iterates the two-sided bound is checked exactly. From the trace
/// alone the lower bound is exact and the upper bound is implied by
/// `gap ≤ 3Nε_k`, since `Nε_k ≤ σ_s(x^k)` along IRLS.
fn sandwich(
    problem: &Problem,
    trace: &[IterationRecord],
    iterates: Option<&[Vec<f64>]>,
    rho_s: Option<f64>,
) -> Result<Verdict, Failure> {
    let Some(rho_s) = rho_s else {
        return Ok(Verdict::Skipped);
    };
    if !(0.0..1.0).contains(&rho_s) {
        return Ok(Verdict::HypothesisUnmet);
    }
    let x_star = problem.x_star.as_deref().unwrap_or_default();
    let s = problem.s;
    let n = problem.n() as f64;
    let records = trace.iter().filter(|r| r.k >= 1);
    if let Some(iterates) = iterates {
        for r in records {
            let x = iterates
                .get(r.k - 1)
                .ok_or_else(|| Failure::Usage(format!("iterates file has no line for k = {}", r.k)))?;
            match Verdict::from_check(certify_sandwich(x, x_star, r.eps, rho_s, s))? {
                Verdict::Pass => {}
                other => return Ok(other),
            }
        }
        return Ok(Verdict::Pass);
    }
    let sigma_star = best_s_term_error(x_star, s);
    let factor = (1.0 - rho_s) / (1.0 + rho_s);
    let mut verdict = Verdict::Pass;
    for r in records {
        let (gap, err) = (r.gap.unwrap_or(0.0), r.l1_err.unwrap_or(0.0));
        if gap < factor * err - 2.0 * sigma_star - 1e-8 {
            return Ok(Verdict::Fail);
        }
        if gap > 3.0 * n * r.eps + 1e-8 {
            verdict = Verdict::Inconclusive;
        }
    }
    Ok(verdict)
}

fn experiment(kind: ExperimentKind, threads: Option<usize>) -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    pool.install(|| match kind {
        ExperimentKind::Rates(args) => rates(args),
        ExperimentKind::Dimdep(args) => dimdep(args),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn rates(args: RatesArgs) -> Outcome {
    let config = args.solver.config();
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut spec = EnsembleSpec::new(
        args.n,
        args.s,
        measurement_rule(args.m, args.cm),
        args.trials,
        args.seed,
    );
    spec.tail_l1 = args.tail_l1;
    if args.adversary {
        spec.init = InitMode::Adversary;
    }
    spec.measurements()?;
    let results = run_rate_experiment(&spec, &config)?;
    io::write_rates_table(create(&args.out)?, &results)?;
    let ok = results.iter().filter(|r| r.success).count();
    eprintln!("{ok}/{} trials recovered x_star", results.len());
    Ok(0)
}

fn dimdep(args: DimdepArgs) -> Outcome {
    let config = SolverConfig::default();
    let rows = run_dimdep_experiment(
        &args.dims,
        args.s,
        args.cm,
        args.trials,
        args.seed,
        &config,
        &InnerSolver::default(),
    )?;
    io::write_dimdep_table(create(&args.out)?, &rows)?;
    Ok(0)
}
