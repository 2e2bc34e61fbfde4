//! Kernel ridge regression checked against independently written solvers.

mod common;

use common::{cubic, dot, gauss_solve, problem, standardize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sil2shape::regress::{KernelSpec, KrrModel, TargetKind};

#[test]
fn dual_solution_matches_dense_elimination() {
    for (n, d, m, lambda, seed) in [(12, 4, 1, 0.1, 1), (30, 8, 3, 0.5, 2), (50, 20, 10, 0.1, 3), (40, 514, 3, 0.1, 4)] {
        let (x, y) = problem(n, d, m, seed);
        let kernel = KernelSpec {
            degree: 3,
            scale: 1.0 / d as f64,
            offset: 1.0,
        };
        let model = KrrModel::fit(&x, &y, kernel, lambda, TargetKind::Custom(m)).unwrap();

        let (xs, yc, ..) = standardize(&x, &y);
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (kernel.scale * dot(&xs[i], &xs[j]) + kernel.offset).powi(3);
            }
            a[i][i] += lambda;
        }
        let oracle = gauss_solve(a, yc);
        let alpha = model.dual_coefficients();
        let scale = oracle.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
        for i in 0..n {
            for k in 0..m {
                let diff = (alpha[i * m + k] - oracle[i][k]).abs();
                assert!(diff <= 1e-8 * scale, "n={n} d={d}: alpha[{i}][{k}] off by {diff:e} (scale {scale})");
            }
        }
    }
}

#[test]
fn linear_kernel_matches_primal_ridge() {
    let (x, y) = problem(25, 5, 2, 7);
    let (xs, yc, mean, sd, ym) = standardize(&x, &y);
    for (scale, lambda) in [(1.0, 0.3), (0.2, 2.0), (1.0 / 514.0, 0.1)] {
        let kernel = KernelSpec {
            degree: 1,
            scale,
            offset: 0.0,
        };
        let model = KrrModel::fit(&x, &y, kernel, lambda, TargetKind::Custom(2)).unwrap();
        // The kernel scale s turns (sXXᵀ + λI)⁻¹ into ridge with λ/s.
        let d = xs[0].len();
        let mut xtx = vec![vec![0.0; d]; d];
        let mut xty = vec![vec![0.0; 2]; d];
        for (r, t) in xs.iter().zip(&yc) {
            for i in 0..d {
                for j in 0..d {
                    xtx[i][j] += r[i] * r[j];
                }
                for k in 0..2 {
                    xty[i][k] += r[i] * t[k];
                }
            }
        }
        for (i, row) in xtx.iter_mut().enumerate() {
            row[i] += lambda / scale;
        }
        let w = gauss_solve(xtx, xty);
        let probe = [0.7, -1.1, 2.4, 0.0, -0.3];
        let z: Vec<f64> = (0..d).map(|j| (probe[j] - mean[j]) / sd[j]).collect();
        let pred = model.predict(&probe).unwrap();
        for k in 0..2 {
            let primal = ym[k] + (0..d).map(|j| z[j] * w[j][k]).sum::<f64>();
            assert!((pred[k] - primal).abs() <= 1e-6 * primal.abs().max(1e-12), "{} vs {primal}", pred[k]);
        }
    }
}

#[test]
fn linear_kernel_recovers_exact_line() {
    let xs = [-2.0, -0.5, 1.0, 2.5, 4.0];
    let x: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v, 0.0, 0.0]).collect();
    let y: Vec<Vec<f64>> = xs.iter().map(|&v| vec![2.0 * v]).collect();
    let kernel = KernelSpec {
        degree: 1,
        scale: 1.0,
        offset: 0.0,
    };
    let model = KrrModel::fit(&x, &y, kernel, 1e-10, TargetKind::Custom(1)).unwrap();
    for (r, t) in x.iter().zip(&y) {
        assert!((model.predict(r).unwrap()[0] - t[0]).abs() < 1e-6);
    }
}

#[test]
fn tiny_lambda_interpolates() {
    let (x, y) = problem(20, 6, 3, 9);
    let model = KrrModel::fit(&x, &y, cubic(6), 1e-8, TargetKind::Measurements).unwrap();
    for (r, t) in x.iter().zip(&y) {
        for (p, q) in model.predict(r).unwrap().iter().zip(t) {
            assert!((p - q).abs() <= 1e-4 * q.abs().max(1.0), "{p} vs {q}");
        }
    }
}

#[test]
fn duplicated_rows_leave_predictions_unchanged() {
    // Repeating every row keeps the standardization identical, and in the
    // interpolating regime the doubled Gram system has the same fitted function.
    let (x, y) = problem(15, 5, 1, 10);
    let k = cubic(5);
    let once = KrrModel::fit(&x, &y, k, 1e-9, TargetKind::Custom(1)).unwrap();
    let x2: Vec<_> = x.iter().chain(&x).cloned().collect();
    let y2: Vec<_> = y.iter().chain(&y).cloned().collect();
    let twice = KrrModel::fit(&x2, &y2, k, 1e-9, TargetKind::Custom(1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for probe in x.iter().cloned().chain((0..10).map(|_| (0..5).map(|_| rng.random_range(-3.0..3.0)).collect())) {
        let (a, b) = (once.predict(&probe).unwrap()[0], twice.predict(&probe).unwrap()[0]);
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}
