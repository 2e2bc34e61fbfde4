//! Linear shape-basis body model: a fixed-pose template mesh plus a
//! displacement basis with one column per shape coefficient.

mod io;
mod mesh;
mod procedural;
pub mod shapes;

use std::fmt;

use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub use io::{load_mesh, load_model, save_mesh, save_model, MODEL_MAGIC};
pub use mesh::{Face, TriMesh};
pub use procedural::{make_procedural_model, ProceduralBodyConfig, SHAPE_AXES};

pub const NUM_BETAS: usize = 10;

/// Shape coefficients β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeParams {
    beta: [f64; NUM_BETAS],
}

impl ShapeParams {
    pub fn new(beta: &[f64]) -> Result<Self> {
        let beta: [f64; NUM_BETAS] = beta.try_into().map_err(|_| Error::Sizing {
            what: "shape coefficients",
            expected: NUM_BETAS,
            got: beta.len(),
        })?;
        if !beta.iter().all(|b| b.is_finite()) {
            return Err(Error::NonFinite("shape coefficients"));
        }
        Ok(Self { beta })
    }

    pub fn zeros() -> Self {
        Self { beta: [0.0; NUM_BETAS] }
    }

    /// Unit vector along basis direction `k`.
    pub fn unit(k: usize) -> Self {
        let mut beta = [0.0; NUM_BETAS];
        beta[k] = 1.0;
        Self { beta }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: f64, other: &ShapeParams, b: f64) -> Self {
        let mut beta = [0.0; NUM_BETAS];
        for (k, out) in beta.iter_mut().enumerate() {
            *out = a * self.beta[k] + b * other.beta[k];
        }
        Self { beta }
    }
}

impl fmt::Display for ShapeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.beta.iter().map(|b| format!("{b:.4}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Template mesh in the fixed pose plus per-vertex displacement basis.
///
/// Frame: Y up, feet at y = 0, front view looks along −Z, meters.
#[derive(Debug, Clone)]
pub struct BodyModel {
    template: TriMesh,
    /// Row-major `(vertex, axis, coefficient)`.
    shape_dirs: Vec<f64>,
}

impl BodyModel {
    pub fn new(template: TriMesh, shape_dirs: Vec<f64>) -> Result<Self> {
        let expected = template.num_vertices() * 3 * NUM_BETAS;
        if shape_dirs.len() != expected {
            return Err(Error::Sizing {
                what: "shape_dirs (vertices x 3 x 10)",
                expected,
                got: shape_dirs.len(),
            });
        }
        if !shape_dirs.iter().all(|d| d.is_finite()) {
            return Err(Error::NonFinite("shape_dirs"));
        }
        template.check_watertight()?;
        Ok(Self { template, shape_dirs })
    }

    pub fn template(&self) -> &TriMesh {
        &self.template
    }

    pub fn num_vertices(&self) -> usize {
        self.template.num_vertices()
    }

    pub fn shape_dirs(&self) -> &[f64] {
        &self.shape_dirs
    }

    /// Displacement of every vertex along basis column `k`.
    pub fn basis_column(&self, k: usize) -> Vec<nalgebra::Vector3<f64>> {
        (0..self.num_vertices())
            .map(|v| {
                let base = v * 3 * NUM_BETAS;
                nalgebra::Vector3::new(
                    self.shape_dirs[base + k],
                    self.shape_dirs[base + NUM_BETAS + k],
                    self.shape_dirs[base + 2 * NUM_BETAS + k],
                )
            })
            .collect()
    }

    /// Template plus the basis contracted with β. Faces are shared with the
    /// template.
    pub fn deform(&self, beta: &ShapeParams) -> TriMesh {
        let b = beta.as_slice();
        self.template.map_vertices_indexed(|i, v| {
            let base = i * 3 * NUM_BETAS;
            let mut out = [v.x, v.y, v.z];
            for (axis, o) in out.iter_mut().enumerate() {
                let row = &self.shape_dirs[base + axis * NUM_BETAS..base + (axis + 1) * NUM_BETAS];
                *o += row.iter().zip(b).map(|(d, c)| d * c).sum::<f64>();
            }
            Point3::new(out[0], out[1], out[2])
        })
    }

    /// Like [`deform`](Self::deform) but accepts an unchecked coefficient slice.
    pub fn deform_slice(&self, beta: &[f64]) -> Result<TriMesh> {
        Ok(self.deform(&ShapeParams::new(beta)?))
    }
}

/// I.i.d. zero-mean Gaussian shape coefficients, reproducible for a seed.
pub fn sample_shapes(count: usize, stddev: f64, seed: u64) -> Result<Vec<ShapeParams>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if !(stddev > 0.0 && stddev.is_finite()) {
        return Err(Error::InvalidArgument(format!("stddev must be positive, got {stddev}")));
    }
    let normal = Normal::new(0.0, stddev).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let mut beta = [0.0; NUM_BETAS];
            for b in beta.iter_mut() {
                *b = normal.sample(&mut rng);
            }
            ShapeParams { beta }
        })
        .collect())
}
