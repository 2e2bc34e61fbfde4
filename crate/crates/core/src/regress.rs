//! Polynomial kernel ridge regression from silhouette embeddings plus
//! height and weight to shape coefficients or girth measurements.
//!
//! Fitting works in the dual: with standardized inputs `X` and centered
//! targets `Y`, the coefficients solve `(K + λI)·α = Y` for the Gram matrix
//! `K`, and a prediction is `k(x, X)·α` plus the target mean.

use std::fs;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix};

use crate::embedding::{EmbeddingVector, LATENT_DIM};
use crate::error::{Error, IoContext, Result};

pub const FEATURE_DIM: usize = 2 * LATENT_DIM + 2;
pub const KRR_MAGIC: &[u8; 8] = b"S2SKRR1\0";

/// `[front embedding | side embedding | height_mm | weight_kg]`, unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Front embedding, side embedding, height, weight.
    pub fn split(&self) -> (&[f64], &[f64], f64, f64) {
        (
            &self.values[..LATENT_DIM],
            &self.values[LATENT_DIM..2 * LATENT_DIM],
            self.values[2 * LATENT_DIM],
            self.values[2 * LATENT_DIM + 1],
        )
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub fn build_features(front: &EmbeddingVector, side: &EmbeddingVector, height_mm: f64, weight_kg: f64) -> Result<FeatureVector> {
    for (what, z) in [("front embedding", front), ("side embedding", side)] {
        if z.len() != LATENT_DIM {
            return Err(Error::Sizing {
                what,
                expected: LATENT_DIM,
                got: z.len(),
            });
        }
    }
    if !(height_mm > 0.0 && height_mm.is_finite() && weight_kg > 0.0 && weight_kg.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "height and weight must be positive, got {height_mm} mm / {weight_kg} kg"
        )));
    }
    let mut values = Vec::with_capacity(FEATURE_DIM);
    values.extend_from_slice(front.values());
    values.extend_from_slice(side.values());
    values.push(height_mm);
    values.push(weight_kg);
    Ok(FeatureVector { values })
}

/// `k(a, b) = (scale·⟨a, b⟩ + offset)^degree`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub degree: u32,
    pub scale: f64,
    pub offset: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            degree: 3,
            scale: 1.0 / FEATURE_DIM as f64,
            offset: 1.0,
        }
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 || !(self.scale > 0.0 && self.scale.is_finite()) || !self.offset.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid polynomial kernel {self:?}")));
        }
        Ok(())
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        self.apply(dot)
    }

    fn apply(&self, dot: f64) -> f64 {
        (self.scale * dot + self.offset).powi(self.degree as i32)
    }
}

/// Polynomial kernel of degree 3 and ridge constant 0.1.
pub fn default_hyperparams() -> (KernelSpec, f64) {
    (KernelSpec::default(), 0.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    ShapeParams,
    Measurements,
    /// Any other output width (diagnostics and tests).
    Custom(usize),
}

impl TargetKind {
    pub fn dim(self) -> usize {
        match self {
            TargetKind::ShapeParams => crate::bodymodel::NUM_BETAS,
            TargetKind::Measurements => 3,
            TargetKind::Custom(d) => d,
        }
    }

    fn code(self) -> u32 {
        match self {
            TargetKind::ShapeParams => 0,
            TargetKind::Measurements => 1,
            TargetKind::Custom(_) => 2,
        }
    }

    fn from_code(code: u32, dim: usize) -> Option<Self> {
        let kind = match code {
            0 => TargetKind::ShapeParams,
            1 => TargetKind::Measurements,
            2 => TargetKind::Custom(dim),
            _ => return None,
        };
        (kind.dim() == dim).then_some(kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel {
    kernel: KernelSpec,
    lambda: f64,
    kind: TargetKind,
    feat_mean: Vec<f64>,
    feat_scale: Vec<f64>,
    target_mean: Vec<f64>,
    /// Standardized training inputs, `n × d` row-major.
    train: Vec<f64>,
    /// Dual coefficients, `n × m` row-major.
    alpha: Vec<f64>,
}

fn row_matrix<R: AsRef<[f64]>>(rows: &[R], what: &'static str) -> Result<(usize, Vec<f64>)> {
    let d = rows.first().map_or(0, |r| r.as_ref().len());
    let mut flat = Vec::with_capacity(rows.len() * d);
    for r in rows {
        let r = r.as_ref();
        if r.len() != d {
            return Err(Error::Sizing {
                what,
                expected: d,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        flat.extend_from_slice(r);
    }
    Ok((d, flat))
}

impl KrrModel {
    pub fn fit<R: AsRef<[f64]>, S: AsRef<[f64]>>(features: &[R], targets: &[S], kernel: KernelSpec, lambda: f64, kind: TargetKind) -> Result<Self> {
        kernel.validate()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        let n = features.len();
        if n < 2 {
            return Err(Error::Dataset(format!("kernel ridge regression needs at least 2 samples, got {n}")));
        }
        if targets.len() != n {
            return Err(Error::Sizing {
                what: "target rows",
                expected: n,
                got: targets.len(),
            });
        }
        let (d, mut x) = row_matrix(features, "features")?;
        let (m, mut y) = row_matrix(targets, "targets")?;
        if d == 0 {
            return Err(Error::InvalidArgument("features are empty".into()));
        }
        if m != kind.dim() {
            return Err(Error::Sizing {
                what: "target width",
                expected: kind.dim(),
                got: m,
            });
        }

        let (feat_mean, feat_scale) = column_stats(&x, n, d);
        for row in x.chunks_mut(d) {
            for ((v, mu), s) in row.iter_mut().zip(&feat_mean).zip(&feat_scale) {
                *v = (*v - mu) / s;
            }
        }
        let (target_mean, _) = column_stats(&y, n, m);
        for row in y.chunks_mut(m) {
            for (v, mu) in row.iter_mut().zip(&target_mean) {
                *v -= mu;
            }
        }

        let mut system = gram(&x, n, d, &kernel);
        for i in 0..n {
            system[(i, i)] += lambda;
        }
        let chol = Cholesky::new(system).ok_or(Error::Factorization { lambda })?;
        let rhs = DMatrix::from_row_slice(n, m, &y);
        let sol = chol.solve(&rhs);
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization { lambda });
        }
        let alpha = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| sol[(i, j)]).collect();

        Ok(Self {
            kernel,
            lambda,
            kind,
            feat_mean,
            feat_scale,
            target_mean,
            train: x,
            alpha,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn num_samples(&self) -> usize {
        self.alpha.len() / self.output_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.feat_mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.target_mean.len()
    }

    /// `n × m` row-major.
    pub fn dual_coefficients(&self) -> &[f64] {
        &self.alpha
    }

    /// Gram matrix of the stored (standardized) training inputs.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        gram(&self.train, self.num_samples(), self.input_dim(), &self.kernel)
    }

    /// Applies the training standardization to a raw input.
    pub fn standardize(&self, feature: &[f64]) -> Result<Vec<f64>> {
        if feature.len() != self.input_dim() {
            return Err(Error::Sizing {
                what: "feature vector",
                expected: self.input_dim(),
                got: feature.len(),
            });
        }
        if feature.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(feature.iter().zip(&self.feat_mean).zip(&self.feat_scale).map(|((v, mu), s)| (v - mu) / s).collect())
    }

    pub fn predict(&self, feature: &[f64]) -> Result<Vec<f64>> {
        let z = self.standardize(feature)?;
        let (d, m) = (self.input_dim(), self.output_dim());
        let mut out = self.target_mean.clone();
        for (row, a) in self.train.chunks(d).zip(self.alpha.chunks(m)) {
            let k = self.kernel.eval(row, &z);
            for (o, ai) in out.iter_mut().zip(a) {
                *o += k * ai;
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = KRR_MAGIC.to_vec();
        for v in [self.num_samples() as u32, self.input_dim() as u32, self.output_dim() as u32, self.kernel.degree, self.kind.code()] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let scalars = [self.kernel.scale, self.kernel.offset, self.lambda];
        for v in scalars.iter().chain(&self.feat_mean).chain(&self.feat_scale).chain(&self.target_mean).chain(&self.train).chain(&self.alpha) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, out).at(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).at(path)?;
        let bad = |msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: msg.into(),
        };
        if bytes.len() < 28 || &bytes[..8] != KRR_MAGIC {
            return Err(bad("not a regression model file"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap());
        let (n, d, m) = (word(0) as usize, word(1) as usize, word(2) as usize);
        let kind = TargetKind::from_code(word(4), m).ok_or_else(|| bad("unknown target kind"))?;
        let expected = 28 + 8 * (3 + 2 * d + m + n * d + n * m);
        if bytes.len() != expected {
            return Err(bad("regression model size does not match its header"));
        }
        let vals: Vec<f64> = bytes[28..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let mut rest = &vals[3..];
        let mut take = |k: usize| {
            let (head, tail) = rest.split_at(k);
            rest = tail;
            head.to_vec()
        };
        let model = Self {
            kernel: KernelSpec {
                degree: word(3),
                scale: vals[0],
                offset: vals[1],
            },
            lambda: vals[2],
            kind,
            feat_mean: take(d),
            feat_scale: take(d),
            target_mean: take(m),
            train: take(n * d),
            alpha: take(n * m),
        };
        model.kernel.validate()?;
        Ok(model)
    }
}

/// Per-column mean and population standard deviation; constant columns get
/// a scale of 1 so they are only centered.
fn column_stats(x: &[f64], n: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; d];
    for row in x.chunks(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for row in x.chunks(d) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let scale = var
        .iter()
        .zip(&mean)
        .map(|(s, m)| {
            let sd = (s / n as f64).sqrt();
            if sd <= 1e-12 * m.abs().max(1.0) {
                1.0
            } else {
                sd
            }
        })
        .collect();
    (mean, scale)
}

fn gram(x: &[f64], n: usize, d: usize, kernel: &KernelSpec) -> DMatrix<f64> {
    let xm = DMatrix::from_row_slice(n, d, x);
    let mut k = &xm * xm.transpose();
    k.iter_mut().for_each(|v| *v = kernel.apply(*v));
    // Symmetrize exactly against floating-point asymmetry of the product.
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = avg;
            k[(j, i)] = avg;
        }
    }
    k
}
