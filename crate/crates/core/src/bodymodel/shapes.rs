//! Closed reference solids: cube, icosphere, and capped tubes. All returned
//! meshes are watertight with outward winding.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::mesh::{Face, TriMesh};
use crate::error::{Error, Result};

/// Axis-aligned box spanning `min..max`.
pub fn cuboid(min: Point3<f64>, max: Point3<f64>) -> TriMesh {
    let corner = |i: usize| {
        Point3::new(
            if i & 1 == 0 { min.x } else { max.x },
            if i & 2 == 0 { min.y } else { max.y },
            if i & 4 == 0 { min.z } else { max.z },
        )
    };
    let vertices = (0..8).map(corner).collect();
    // Quads listed counter-clockwise seen from outside.
    let quads = [
        [0, 4, 6, 2],
        [1, 3, 7, 5],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 2, 3, 1],
        [4, 5, 7, 6],
    ];
    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    TriMesh::new(vertices, faces).expect("cuboid topology is valid")
}

pub fn unit_cube() -> TriMesh {
    cuboid(Point3::origin(), Point3::new(1.0, 1.0, 1.0))
}

/// Regular tetrahedron-ish solid with outward faces.
pub fn tetrahedron() -> TriMesh {
    let vertices = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
    ];
    let faces = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
    TriMesh::new(vertices, faces).expect("tetrahedron topology is valid")
}

/// Icosahedron subdivided `subdivisions` times and projected onto the sphere.
pub fn icosphere(center: Point3<f64>, radius: f64, subdivisions: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut dirs: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<Face> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, dirs: &mut Vec<Vector3<f64>>| {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                dirs.push(((dirs[a] + dirs[b]) * 0.5).normalize());
                dirs.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut dirs);
            let bc = mid(b, c, &mut dirs);
            let ca = mid(c, a, &mut dirs);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    // Orient every face away from the center.
    for f in faces.iter_mut() {
        let n = (dirs[f[1]] - dirs[f[0]]).cross(&(dirs[f[2]] - dirs[f[0]]));
        if n.dot(&(dirs[f[0]] + dirs[f[1]] + dirs[f[2]])) < 0.0 {
            f.swap(1, 2);
        }
    }
    let vertices = dirs.iter().map(|d| center + d * radius).collect();
    TriMesh::new(vertices, faces).expect("icosphere topology is valid")
}

/// Closed tube through a stack of rings (bottom to top), capped with a pole
/// vertex at each end. Every ring must have the same number of points (≥ 3).
/// Winding is fixed up afterwards so the enclosed volume is positive.
pub fn capped_tube(rings: &[Vec<Point3<f64>>], bottom: Point3<f64>, top: Point3<f64>) -> Result<TriMesh> {
    let segments = rings.first().map_or(0, Vec::len);
    if rings.is_empty() || segments < 3 {
        return Err(Error::Construction(format!(
            "tube needs at least one ring of 3+ points (got {} rings of {segments})",
            rings.len()
        )));
    }
    if rings.iter().any(|r| r.len() != segments) {
        return Err(Error::Construction("tube rings differ in length".into()));
    }
    let mut vertices = Vec::with_capacity(rings.len() * segments + 2);
    vertices.push(bottom);
    for r in rings {
        vertices.extend_from_slice(r);
    }
    let top_idx = vertices.len();
    vertices.push(top);

    let idx = |ring: usize, j: usize| 1 + ring * segments + j % segments;
    let mut faces = Vec::with_capacity(2 * segments * rings.len());
    for j in 0..segments {
        faces.push([0, idx(0, j + 1), idx(0, j)]);
    }
    for r in 0..rings.len() - 1 {
        for j in 0..segments {
            faces.push([idx(r, j), idx(r, j + 1), idx(r + 1, j + 1)]);
            faces.push([idx(r, j), idx(r + 1, j + 1), idx(r + 1, j)]);
        }
    }
    let last = rings.len() - 1;
    for j in 0..segments {
        faces.push([top_idx, idx(last, j), idx(last, j + 1)]);
    }
    let mesh = TriMesh::new(vertices, faces)?;
    Ok(if mesh.signed_volume() < 0.0 { mesh.flipped() } else { mesh })
}

/// Points on a horizontal ellipse at height `y`, counter-clockwise seen from +Y.
pub fn ellipse_ring(center_x: f64, center_z: f64, y: f64, half_x: f64, half_z: f64, segments: usize) -> Vec<Point3<f64>> {
    (0..segments)
        .map(|j| {
            let phi = std::f64::consts::TAU * j as f64 / segments as f64;
            Point3::new(center_x + half_x * phi.cos(), y, center_z - half_z * phi.sin())
        })
        .collect()
}

/// Vertical capped cylinder with its axis at `(center_x, center_z)`.
pub fn cylinder(center_x: f64, center_z: f64, radius: f64, y0: f64, y1: f64, segments: usize, stacks: usize) -> TriMesh {
    let stacks = stacks.max(1);
    let rings: Vec<_> = (0..=stacks)
        .map(|k| {
            let y = y0 + (y1 - y0) * k as f64 / stacks as f64;
            ellipse_ring(center_x, center_z, y, radius, radius, segments)
        })
        .collect();
    capped_tube(
        &rings,
        Point3::new(center_x, y0, center_z),
        Point3::new(center_x, y1, center_z),
    )
    .expect("cylinder parameters produce a valid tube")
}
