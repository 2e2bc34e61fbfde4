use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

pub type Face = [usize; 3];

/// Triangle mesh in meters. Faces wind counter-clockwise when viewed from
/// outside, so normals point outward.
///
/// Connectivity is shared behind an `Arc` so that meshes derived from the
/// same template (e.g. by shape deformation) share one face list.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    faces: Arc<Vec<Face>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<Face>) -> Result<Self> {
        Self::with_shared_faces(vertices, Arc::new(faces))
    }

    pub fn with_shared_faces(vertices: Vec<Point3<f64>>, faces: Arc<Vec<Face>>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidArgument(format!(
                    "face {fi} references vertex {bad} but mesh has {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Degenerate(format!("face {fi} repeats a vertex: {f:?}")));
            }
        }
        if vertices.iter().any(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("mesh vertices"));
        }
        Ok(Self { vertices, faces })
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn shared_faces(&self) -> &Arc<Vec<Face>> {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() || self.faces.is_empty()
    }

    /// Checks that every directed edge appears exactly once and its reverse
    /// exactly once: closed 2-manifold with consistent winding.
    pub fn check_watertight(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let mut directed: HashMap<(usize, usize), u32> = HashMap::with_capacity(self.faces.len() * 3);
        for f in self.faces.iter() {
            for k in 0..3 {
                let e = (f[k], f[(k + 1) % 3]);
                let c = directed.entry(e).or_insert(0);
                *c += 1;
                if *c > 1 {
                    return Err(Error::Orientation(e.0, e.1));
                }
            }
        }
        for f in self.faces.iter() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if !directed.contains_key(&(b, a)) {
                    return Err(Error::NotWatertight(a, b));
                }
            }
        }
        Ok(())
    }

    pub fn is_watertight(&self) -> bool {
        self.check_watertight().is_ok()
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.vertices.is_empty() {
            return None;
        }
        let sum = self
            .vertices
            .iter()
            .fold(Vector3::zeros(), |acc, v| acc + v.coords);
        Some(Point3::from(sum / self.vertices.len() as f64))
    }

    pub fn translated(&self, t: Vector3<f64>) -> Self {
        self.map_vertices(|v| v + t)
    }

    /// Uniform scale about `center`.
    pub fn scaled_about(&self, s: f64, center: Point3<f64>) -> Self {
        self.map_vertices(|v| center + (v - center) * s)
    }

    pub fn map_vertices(&self, f: impl Fn(Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            faces: Arc::clone(&self.faces),
        }
    }

    /// Signed enclosed volume (m³) from the divergence theorem: sum of the
    /// signed tetrahedra spanned by the origin and each face.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let (a, b, c) = (
                    self.vertices[f[0]].coords,
                    self.vertices[f[1]].coords,
                    self.vertices[f[2]].coords,
                );
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Reverses the winding of every face.
    pub fn flipped(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            faces: Arc::new(self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect()),
        }
    }

    pub fn map_vertices_indexed(&self, f: impl Fn(usize, Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().enumerate().map(|(i, &v)| f(i, v)).collect(),
            faces: Arc::clone(&self.faces),
        }
    }

    /// Disjoint union; vertex indices of `other` are offset.
    pub fn merged(&self, other: &TriMesh) -> Self {
        let off = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces: Vec<Face> = self.faces.to_vec();
        faces.extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        Self {
            vertices,
            faces: Arc::new(faces),
        }
    }
}
