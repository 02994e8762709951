use irls_bp_core::linalg::{
    cg_solve, dist2, norm2, singular_values, solve_spd, thin_factorization, DenseMatrix, HouseholderQr,
};
use irls_bp_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `BᵀB + I`
fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let b = gaussian(rng, n, n);
    let mut m = b.transpose().matmul(&b);
    for i in 0..n {
        m.set(i, i, m.get(i, i) + 1.0);
    }
    m
}

fn residual(m: &DenseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r: Vec<f64> = m.matvec(x).iter().zip(b).map(|(p, q)| p - q).collect();
    norm2(&r)
}

#[test]
fn spd_solve_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let m = random_spd(&mut rng, 8);
        let b = gaussian_vec(&mut rng, 8);
        let x = solve_spd(&m, &b).unwrap();
        assert!(residual(&m, &x, &b) <= 1e-12 * norm2(&b));
    }
    assert_eq!(
        solve_spd(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap(),
        vec![1.0, 2.0, 3.0]
    );
    assert_eq!(
        solve_spd(&DenseMatrix::from_diag(&[2.0, 4.0]), &[2.0, 4.0]).unwrap(),
        vec![1.0, 1.0]
    );
    let indefinite = DenseMatrix::from_diag(&[1.0, -1.0]);
    assert!(matches!(
        solve_spd(&indefinite, &[1.0, 1.0]),
        Err(Error::NotPositiveDefinite { .. })
    ));
}

#[test]
fn cg_agrees_with_cholesky() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..100 {
        let n = rng.random_range(1..=32);
        let m = random_spd(&mut rng, n);
        let b = gaussian_vec(&mut rng, n);
        let reference = solve_spd(&m, &b).unwrap();
        let out = cg_solve(
            |v, out| out.copy_from_slice(&m.matvec(v)),
            &b,
            &vec![0.0; n],
            1e-12,
            4 * n,
        )
        .unwrap();
        let rel = dist2(&out.x, &reference) / norm2(&reference);
        assert!(rel <= 1e-8, "case {case}: n = {n}, relative error {rel:e}");
    }
}

#[test]
fn cg_examples() {
    let out = cg_solve(|v, o| o.copy_from_slice(v), &[3.0, 4.0], &[0.0, 0.0], 1e-12, 10).unwrap();
    assert_eq!(out.iters, 1);
    assert!(dist2(&out.x, &[3.0, 4.0]) < 1e-14);
    let diag = [1.0, 10.0];
    let out = cg_solve(
        |v, o| {
            o[0] = diag[0] * v[0];
            o[1] = diag[1] * v[1];
        },
        &[1.0, 10.0],
        &[0.0, 0.0],
        1e-12,
        10,
    )
    .unwrap();
    assert!(out.iters <= 2);
    assert!(dist2(&out.x, &[1.0, 1.0]) < 1e-12);
}

/// `Q diag(λ) Qᵀ` for a random orthogonal Q.
fn with_spectrum(rng: &mut ChaCha8Rng, eigenvalues: &[f64]) -> DenseMatrix {
    let n = eigenvalues.len();
    let q = HouseholderQr::new(&gaussian(rng, n, n)).thin_q();
    let scaled = q.matmul(&DenseMatrix::from_diag(eigenvalues));
    let mut m = scaled.matmul(&q.transpose());
    // Exact symmetry.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

#[test]
fn cg_terminates_with_few_distinct_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 1..=5 {
        for _ in 0..5 {
            let n = 24;
            let levels: Vec<f64> = (0..k).map(|j| 1.0 + 2.0 * j as f64).collect();
            let spectrum: Vec<f64> = (0..n).map(|i| levels[i % k]).collect();
            let m = with_spectrum(&mut rng, &spectrum);
            let b = gaussian_vec(&mut rng, n);
            let out = cg_solve(|v, o| o.copy_from_slice(&m.matvec(v)), &b, &vec![0.0; n], 1e-10, 4 * n).unwrap();
            assert!(out.iters <= k + 1, "{k} eigenvalues took {} iterations", out.iters);
            assert!(residual(&m, &out.x, &b) <= 1e-9 * norm2(&b));
        }
    }
}

#[test]
fn range_factor_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..100 {
        let m = rng.random_range(1..=16);
        let n = rng.random_range(m..=64);
        let a = gaussian(&mut rng, m, n);
        let y = gaussian_vec(&mut rng, m);
        let f = thin_factorization(&a, &y).unwrap();
        let eye = DenseMatrix::identity(m);
        assert!(
            f.v.transpose().matmul(&f.v).max_abs_diff(&eye) <= 1e-10,
            "case {case}: VᵀV"
        );
        assert!(
            f.u.transpose().matmul(&f.u).max_abs_diff(&eye) <= 1e-10,
            "case {case}: UᵀU"
        );
        let recon = f.reconstruct();
        let mut diff = 0.0;
        for i in 0..m {
            for j in 0..n {
                diff += (recon.get(i, j) - a.get(i, j)).powi(2);
            }
        }
        assert!(diff.sqrt() <= 1e-10 * a.frobenius(), "case {case}: reconstruction");
        assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]) && f.sigma.iter().all(|s| *s > 0.0));
        assert!(
            dist2(&a.matvec(&f.y_tilde), &y) <= 1e-10 * norm2(&y),
            "case {case}: A ỹ = y"
        );
        // ỹ is the minimum-norm solution: it lies in range(Aᵀ).
        assert!(norm2(&f.range_residual(&f.y_tilde)) <= 1e-10 * norm2(&f.y_tilde));
    }
}

#[test]
fn factorization_examples() {
    let a = DenseMatrix::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]).unwrap();
    let f = thin_factorization(&a, &[1.0, 2.0]).unwrap();
    assert!((f.sigma[0] - 1.0).abs() < 1e-14 && (f.sigma[1] - 1.0).abs() < 1e-14);
    assert!(dist2(&f.y_tilde, &[1.0, 2.0, 0.0]) < 1e-14);
    let a = DenseMatrix::from_rows(&[&[2.0, 0.0, 0.0, 0.0], &[0.0, 3.0, 0.0, 0.0]]).unwrap();
    let f = thin_factorization(&a, &[2.0, 3.0]).unwrap();
    assert!((f.sigma[0] - 3.0).abs() < 1e-14 && (f.sigma[1] - 2.0).abs() < 1e-14);
    assert!(dist2(&f.y_tilde, &[1.0, 1.0, 0.0, 0.0]) < 1e-14);
    let rank_one = DenseMatrix::from_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]]).unwrap();
    assert!(matches!(
        thin_factorization(&rank_one, &[1.0, 2.0]),
        Err(Error::RankDeficient { .. })
    ));
}

#[test]
fn singular_values_of_gaussian_match_gram_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = gaussian(&mut rng, 6, 15);
    let sv = singular_values(&a);
    let trace: f64 = sv.iter().map(|s| s * s).sum();
    assert!((trace - a.frobenius().powi(2)).abs() <= 1e-10 * trace);
}
