//! Oracles and fixtures shared by the integration test targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sil2shape::bodymodel::{sample_shapes, BodyModel};
use sil2shape::embedding::AeConfig;
use sil2shape::regress::KernelSpec;
use sil2shape::silhouette::{rasterize, SilhouettePair, ViewSpec};

/// Gaussian elimination with partial pivoting; solves `a·x = b` for each
/// column of `b`.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            for k in 0..b[row].len() {
                b[row][k] -= f * b[col][k];
            }
        }
    }
    let m = b[0].len();
    let mut x = vec![vec![0.0; m]; n];
    for row in (0..n).rev() {
        for k in 0..m {
            let s: f64 = (row + 1..n).map(|j| a[row][j] * x[j][k]).sum();
            x[row][k] = (b[row][k] - s) / a[row][row];
        }
    }
    x
}

/// Population-standardized columns (constant columns only centered) and
/// centered targets, computed independently of the library.
pub fn standardize(x: &[Vec<f64>], y: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let d = x[0].len();
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..d)
        .map(|j| {
            let s = (x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
            if s == 0.0 {
                1.0
            } else {
                s
            }
        })
        .collect();
    let xs = x.iter().map(|r| (0..d).map(|j| (r[j] - mean[j]) / sd[j]).collect()).collect();
    let m = y[0].len();
    let ym: Vec<f64> = (0..m).map(|j| y.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let yc = y.iter().map(|r| (0..m).map(|j| r[j] - ym[j]).collect()).collect();
    (xs, yc, mean, sd, ym)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Degree-3 kernel with the mean-inner-product scale for `d` inputs.
pub fn cubic(d: usize) -> KernelSpec {
    KernelSpec {
        degree: 3,
        scale: 1.0 / d as f64,
        offset: 1.0,
    }
}

pub fn problem(n: usize, d: usize, m: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
    let y = x
        .iter()
        .map(|r| (0..m).map(|k| r[k % d] * r[(k + 1) % d] + 0.5 * r[(k + 2) % d] + rng.random_range(-0.2..0.2)).collect())
        .collect();
    (x, y)
}

pub fn body_pairs(model: &BodyModel, count: usize, size: usize, seed: u64) -> Vec<SilhouettePair> {
    sample_shapes(count, 1.0, seed)
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, beta)| {
            let mesh = model.deform(beta);
            let front = rasterize(&mesh, &ViewSpec::front(), size, size).unwrap();
            let side = rasterize(&mesh, &ViewSpec::side(), size, size).unwrap();
            SilhouettePair::new(front, side, format!("s{i}")).unwrap()
        })
        .collect()
}

pub fn tiny() -> AeConfig {
    AeConfig {
        channels: 4,
        latent_dim: 8,
        ..AeConfig::new(32, 32)
    }
}

