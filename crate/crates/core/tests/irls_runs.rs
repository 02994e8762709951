use irls_bp_core::linalg::{dist2, norm2, thin_factorization, DenseMatrix};
use irls_bp_core::objective::weights;
use irls_bp_core::wls::{active_set, condition_diagnostics, wls_direct, wls_woodbury};
use irls_bp_core::{
    irls_run, irls_step, InitialState, IterateState, Problem, RunOutput, RunStatus, SolverConfig, WlsPath,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian_problem(seed: u64, n: usize, m: usize, s: usize) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let data = (0..m * n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let a = DenseMatrix::new(m, n, data).unwrap();
    let mut x = vec![0.0; n];
    for i in sample(&mut rng, n, s) {
        x[i] = rng.sample(StandardNormal);
    }
    let y = a.matvec(&x);
    Problem::new(a, y, s, Some(x)).unwrap()
}

fn traced(max_iters: usize, path: WlsPath) -> SolverConfig {
    SolverConfig {
        max_iters,
        wls_path: path,
        record_iterates: true,
        ..SolverConfig::default()
    }
}

/// Per-iteration invariants of a uniform-start run: descent of the
/// smoothed objective, monotone smoothing, feasibility and the
/// optimality certificate `W_k x^{k+1} ∈ range(Aᵀ)`.
fn check_run_invariants(problem: &Problem, out: &RunOutput) {
    check_descent_and_feasibility(out);
    check_kkt(problem, out);
}

fn check_descent_and_feasibility(out: &RunOutput) {
    let trace = &out.trace;
    for pair in trace.windows(2) {
        assert!(pair[1].eps <= pair[0].eps, "eps increased at k = {}", pair[1].k);
        if let (Some(prev), Some(next)) = (pair[0].j, pair[1].j) {
            if pair[0].k >= 1 {
                assert!(next <= prev + 1e-10 * prev.max(1.0), "J increased at k = {}", pair[1].k);
            }
        }
    }
    for rec in trace.iter().skip(1) {
        assert!(rec.feas_residual.unwrap() <= 1e-10, "infeasible at k = {}", rec.k);
        assert!(rec.j.unwrap() >= 0.0);
    }
}

fn check_kkt(problem: &Problem, out: &RunOutput) {
    let f = thin_factorization(&problem.a, &problem.y).unwrap();
    let trace = &out.trace;
    let n = problem.n();
    for (k, x_next) in out.iterates.iter().enumerate() {
        let w = if k == 0 {
            vec![1.0; n]
        } else {
            weights(&out.iterates[k - 1], trace[k].eps)
        };
        let wx: Vec<f64> = w.iter().zip(x_next).map(|(a, b)| a * b).collect();
        let off = norm2(&f.range_residual(&wx));
        assert!(off <= 1e-8 * norm2(&wx), "KKT residual {off:e} at k = {}", k + 1);
    }
}

#[test]
fn weighted_step_example() {
    let a = DenseMatrix::from_rows(&[&[1.0, 1.0]]).unwrap();
    let problem = Problem::new(a, vec![3.0], 1, None).unwrap();
    let state = IterateState {
        x: None,
        eps: f64::INFINITY,
        w: vec![1.0, 2.0],
        k: 0,
        warm: None,
    };
    let (next, rec) = irls_step(&state, &problem, &SolverConfig::default(), None).unwrap();
    let x = next.x.unwrap();
    assert!(dist2(&x, &[2.0, 1.0]) < 1e-14);
    assert_eq!(rec.k, 1);
    // σ₁(2, 1) = 1, so ε₁ = 1/2.
    assert!((next.eps - 0.5).abs() < 1e-15);
}

#[test]
fn tiny_instance_recovers() {
    let a = DenseMatrix::from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]).unwrap();
    let problem = Problem::new(a, vec![2.0, 0.0], 1, Some(vec![2.0, 0.0, 0.0])).unwrap();
    let out = irls_run(&problem, &traced(500, WlsPath::Auto), InitialState::Uniform).unwrap();
    assert!(out.trace.last().unwrap().l1_err.unwrap() <= 1e-8);
    check_run_invariants(&problem, &out);
}

#[test]
fn random_runs_keep_invariants() {
    for seed in 0..8 {
        let problem = gaussian_problem(seed, 120, 50, 6);
        for path in [WlsPath::Direct, WlsPath::Auto] {
            let out = irls_run(&problem, &traced(300, path), InitialState::Uniform).unwrap();
            assert_ne!(out.status, RunStatus::MaxIters, "seed {seed}");
            check_run_invariants(&problem, &out);
            let err = out.trace.last().unwrap().l1_err.unwrap();
            let scale: f64 = problem.x_star.as_ref().unwrap().iter().map(|v| v.abs()).sum();
            assert!(err <= 1e-8 * scale, "seed {seed} {path:?}: error {err:e}");
        }
    }
}

// The Woodbury assembly leaves an absolute error near machine precision
// in the inactive coordinates, which `W` scales by 1/ε; the range
// certificate is therefore only checked for the direct and automatic routes.
#[test]
fn forced_woodbury_runs_descend() {
    for seed in 0..8 {
        let problem = gaussian_problem(seed, 120, 50, 6);
        let out = irls_run(&problem, &traced(300, WlsPath::Woodbury), InitialState::Uniform).unwrap();
        assert_ne!(out.status, RunStatus::MaxIters, "seed {seed}");
        check_descent_and_feasibility(&out);
    }
}

#[test]
fn forced_paths_agree_on_final_solution() {
    let problem = gaussian_problem(11, 150, 60, 8);
    let direct = irls_run(&problem, &traced(300, WlsPath::Direct), InitialState::Uniform).unwrap();
    let woodbury = irls_run(&problem, &traced(300, WlsPath::Woodbury), InitialState::Uniform).unwrap();
    assert!(dist2(&direct.x, &woodbury.x) <= 1e-8 * norm2(&direct.x));
}

#[test]
fn woodbury_matches_direct_on_random_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..50 {
        let m = rng.random_range(5..30);
        let n = rng.random_range(m + 1..3 * m + 10);
        let scale = 1.0 / (m as f64).sqrt();
        let data = (0..m * n)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let a = DenseMatrix::new(m, n, data).unwrap();
        let y: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let x_prev: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * 10f64.powf(rng.random_range(-4.0..0.5)))
            .collect();
        let mut mags: Vec<f64> = x_prev.iter().map(|v| v.abs()).collect();
        mags.sort_by(|p, q| p.total_cmp(q));
        let eps = match case % 3 {
            // Every coordinate active.
            0 => 0.5 * mags[0],
            // A single active coordinate.
            1 => 0.5 * (mags[n - 1] + mags[n - 2]),
            _ => mags[rng.random_range(0..n - 1)] * 1.0001,
        };
        let active = active_set(&x_prev, eps);
        assert!(!active.is_empty());
        let f = thin_factorization(&a, &y).unwrap();
        let wb = wls_woodbury(&f, &x_prev, eps, None, 1e-14, 10 * n).unwrap();
        let w = weights(&x_prev, eps);
        let direct = wls_direct(&a, &y, &w).unwrap();
        let rel = dist2(&wb.x, &direct) / norm2(&direct);
        assert!(rel <= 1e-8, "case {case}: |I| = {}, rel diff {rel:e}", active.len());
        for x in [&wb.x, &direct] {
            assert!(dist2(&a.matvec(x), &y) <= 1e-10 * norm2(&y));
            let wx: Vec<f64> = w.iter().zip(x.iter()).map(|(p, q)| p * q).collect();
            assert!(norm2(&f.range_residual(&wx)) <= 1e-8 * norm2(&wx));
        }
    }
}

#[test]
fn exact_warm_start_needs_almost_no_cg() {
    let problem = gaussian_problem(5, 100, 40, 5);
    let f = thin_factorization(&problem.a, &problem.y).unwrap();
    let x = problem.x_star.clone().unwrap();
    let x_prev: Vec<f64> = x.iter().map(|v| v + 1e-3).collect();
    let eps = 1e-3 / 2.0;
    let first = wls_woodbury(&f, &x_prev, eps, None, 1e-12, 400).unwrap();
    let again = wls_woodbury(&f, &x_prev, eps, Some(&first.warm_start()), 1e-12, 400).unwrap();
    assert!(again.cg_iters <= 2, "{} iterations", again.cg_iters);
    assert!(dist2(&again.x, &first.x) <= 1e-10 * norm2(&first.x));
}

#[test]
fn woodbury_system_stays_well_conditioned() {
    let problem = gaussian_problem(8, 100, 40, 5);
    let out = irls_run(&problem, &traced(500, WlsPath::Auto), InitialState::Uniform).unwrap();
    let last = out.trace.last().unwrap();
    assert!(last.eps <= 1e-10, "eps {:e}", last.eps);
    let w = weights(&out.x, last.eps);
    let report = condition_diagnostics(&problem.a, &w, &out.x, last.eps).unwrap();
    assert!(report.kappa_g < report.kappa_full);
    assert!(report.kappa_g <= 1e6 && report.kappa_full >= 1e8, "{report:?}");
}

#[test]
fn zero_data_is_exact_after_one_step() {
    let problem = gaussian_problem(3, 30, 10, 2);
    let zero = Problem::new(problem.a.clone(), vec![0.0; 10], 2, None).unwrap();
    let out = irls_run(&zero, &SolverConfig::default(), InitialState::Uniform).unwrap();
    assert_eq!(out.status, RunStatus::ExactSparse);
    assert_eq!(out.iterations, 1);
    assert!(out.x.iter().all(|v| *v == 0.0));
}
