//! Principal-component baseline for silhouette embeddings.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::{EmbeddingVector, LATENT_DIM};
use crate::error::{Error, IoContext, Result};
use crate::silhouette::Silhouette;

pub const PCA_MAGIC: &[u8; 8] = b"S2SPCA1\0";

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    width: usize,
    height: usize,
    mean: Vec<f64>,
    /// `k × pixels`, row-major, orthonormal rows ordered by decreasing variance.
    components: Vec<f64>,
    num_components: usize,
}

impl PcaModel {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn num_components(&self) -> usize {
        self.num_components
    }

    pub fn component(&self, i: usize) -> &[f64] {
        let p = self.mean.len();
        &self.components[i * p..(i + 1) * p]
    }

    /// Keeps only the leading `k` components.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.num_components);
        Self {
            components: self.components[..k * self.mean.len()].to_vec(),
            num_components: k,
            ..self.clone()
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = PCA_MAGIC.to_vec();
        for v in [self.width, self.height, self.num_components] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in self.mean.iter().chain(&self.components) {
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
        if bytes.len() < 20 || &bytes[..8] != PCA_MAGIC {
            return Err(bad("not a PCA model file"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
        let (width, height, k) = (word(0), word(1), word(2));
        let p = width * height;
        if bytes.len() != 20 + 8 * p * (k + 1) {
            return Err(bad("PCA model size does not match its header"));
        }
        let vals: Vec<f64> = bytes[20..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self {
            width,
            height,
            mean: vals[..p].to_vec(),
            components: vals[p..].to_vec(),
            num_components: k,
        })
    }
}

fn check_dims(model: &PcaModel, img: &Silhouette) -> Result<()> {
    if img.dims() != model.dims() {
        return Err(Error::Resolution {
            expected: model.dims(),
            got: img.dims(),
        });
    }
    Ok(())
}

/// Fits up to `max_components` principal directions (capped by the sample
/// and pixel counts) from the SVD of the mean-centered image matrix.
pub fn pca_fit(images: &[&Silhouette], max_components: usize) -> Result<PcaModel> {
    if images.len() < 2 {
        return Err(Error::Dataset(format!("PCA needs at least 2 images, got {}", images.len())));
    }
    let (width, height) = images[0].dims();
    let p = width * height;
    let n = images.len();
    if let Some(bad) = images.iter().find(|i| i.dims() != (width, height)) {
        return Err(Error::Resolution {
            expected: (width, height),
            got: bad.dims(),
        });
    }
    let mut mean = vec![0.0; p];
    for img in images {
        for (m, &v) in mean.iter_mut().zip(img.pixels()) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, p, |r, c| images[r].pixels()[c] as f64 - mean[c]);
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Degenerate("SVD did not return right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let k = max_components.min(n).min(p).min(order.len());
    let mut components = Vec::with_capacity(k * p);
    for &row in &order[..k] {
        components.extend(v_t.row(row).iter());
    }
    Ok(PcaModel {
        width,
        height,
        mean,
        components,
        num_components: k,
    })
}

/// Projection coefficients, zero-padded to [`LATENT_DIM`].
pub fn pca_encode(model: &PcaModel, image: &Silhouette) -> Result<EmbeddingVector> {
    check_dims(model, image)?;
    let values: Vec<f64> = image.pixels().iter().map(|&v| v as f64).collect();
    pca_encode_values(model, &values)
}

/// Projection of an arbitrary real-valued image.
pub fn pca_encode_values(model: &PcaModel, image: &[f64]) -> Result<EmbeddingVector> {
    if image.len() != model.mean.len() {
        return Err(Error::Sizing {
            what: "image pixels",
            expected: model.mean.len(),
            got: image.len(),
        });
    }
    let centered: Vec<f64> = image.iter().zip(&model.mean).map(|(v, m)| v - m).collect();
    let mut z = vec![0.0; LATENT_DIM.max(model.num_components)];
    for (i, zi) in z.iter_mut().take(model.num_components).enumerate() {
        *zi = model.component(i).iter().zip(&centered).map(|(c, x)| c * x).sum();
    }
    EmbeddingVector::new(z)
}

/// Mean plus back-projection, clamped to `[0, 1]`.
pub fn pca_decode(model: &PcaModel, z: &EmbeddingVector) -> Result<Vec<f64>> {
    if z.len() < model.num_components {
        return Err(Error::Sizing {
            what: "PCA coefficients",
            expected: model.num_components,
            got: z.len(),
        });
    }
    let mut out = model.mean.clone();
    for (i, &zi) in z.values().iter().take(model.num_components).enumerate() {
        if zi != 0.0 {
            for (o, c) in out.iter_mut().zip(model.component(i)) {
                *o += zi * c;
            }
        }
    }
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(out)
}
