//! Anthropometry on closed meshes: stature from evenly spaced cuts, weight
//! from enclosed volume, and tape-style girths from horizontal slices.
//! Also the per-vertex distance between two meshes used for evaluation.

use std::collections::HashMap;
use std::fmt;

use crate::bodymodel::TriMesh;
use crate::error::{Error, Result};

/// Average human body density in kg/L.
pub const DEFAULT_DENSITY: f64 = 0.985;
/// Upper sanity bound on any girth, in mm.
pub const MAX_GIRTH_MM: f64 = 3000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The two coordinates spanning planes perpendicular to this axis.
    fn plane(self) -> (usize, usize) {
        match self {
            Axis::X => (1, 2),
            Axis::Y => (0, 2),
            Axis::Z => (0, 1),
        }
    }
}

/// Where and how finely to cut the body.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    pub axis: Axis,
    /// Spacing between parallel cuts, meters.
    pub cut_spacing: f64,
    /// Bust, waist, hip heights as fractions of body height.
    pub bust_fraction: f64,
    pub waist_fraction: f64,
    pub hip_fraction: f64,
    /// Half-width of the waist search window, as a fraction of body height.
    pub waist_window: f64,
}

impl Default for SliceSpec {
    fn default() -> Self {
        Self {
            axis: Axis::Y,
            cut_spacing: 0.005,
            bust_fraction: 0.72,
            waist_fraction: 0.62,
            hip_fraction: 0.52,
            waist_window: 0.05,
        }
    }
}

impl SliceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cut_spacing > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cut spacing must be positive, got {}",
                self.cut_spacing
            )));
        }
        let inside = |f: f64| f > 0.0 && f < 1.0;
        if !(inside(self.hip_fraction) && inside(self.waist_fraction) && inside(self.bust_fraction)) {
            return Err(Error::InvalidArgument("landmark fractions must lie in (0, 1)".into()));
        }
        if !(self.hip_fraction < self.waist_fraction && self.waist_fraction < self.bust_fraction) {
            return Err(Error::InvalidArgument(
                "landmark fractions must be ordered hip < waist < bust".into(),
            ));
        }
        Ok(())
    }
}

/// Body measurements: lengths in mm, weight in kg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    pub height: f64,
    pub weight: f64,
    pub bust: f64,
    pub waist: f64,
    pub hip: f64,
}

pub const MEASUREMENT_CSV_HEADER: &str = "id,height_mm,weight_kg,bust_mm,waist_mm,hip_mm";

impl Measurements {
    pub fn new(height: f64, weight: f64, bust: f64, waist: f64, hip: f64) -> Result<Self> {
        let m = Self {
            height,
            weight,
            bust,
            waist,
            hip,
        };
        for (name, v) in m.named() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("bust", bust), ("waist", waist), ("hip", hip)] {
            if v >= MAX_GIRTH_MM {
                return Err(Error::InvalidArgument(format!("{name} {v} mm exceeds {MAX_GIRTH_MM} mm")));
            }
        }
        Ok(m)
    }

    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("height_mm", self.height),
            ("weight_kg", self.weight),
            ("bust_mm", self.bust),
            ("waist_mm", self.waist),
            ("hip_mm", self.hip),
        ]
    }

    /// Bust, waist, hip.
    pub fn girths(&self) -> [f64; 3] {
        [self.bust, self.waist, self.hip]
    }

    pub fn csv_row(&self, id: &str) -> String {
        format!(
            "{id},{},{},{},{},{}",
            self.height, self.weight, self.bust, self.waist, self.hip
        )
    }

    /// Flat `key=value` lines.
    pub fn to_record(&self) -> String {
        self.named()
            .iter()
            .map(|(k, v)| format!("{k}={v:.3}\n"))
            .collect()
    }
}

impl fmt::Display for Measurements {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "height {:.1} mm, weight {:.2} kg, bust {:.1} mm, waist {:.1} mm, hip {:.1} mm",
            self.height, self.weight, self.bust, self.waist, self.hip
        )
    }
}

fn extent(mesh: &TriMesh, axis: Axis) -> Result<(f64, f64)> {
    if mesh.vertices.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let a = axis.index();
    Ok(mesh
        .vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[a]), hi.max(v[a]))))
}

/// Number of evenly spaced cuts between the lowest and highest point times
/// the spacing, in mm.
pub fn height(mesh: &TriMesh, spec: &SliceSpec) -> Result<f64> {
    spec.validate()?;
    let (lo, hi) = extent(mesh, spec.axis)?;
    // Guard against a cut landing a rounding error short of the top.
    let cuts = ((hi - lo) / spec.cut_spacing + 1e-9).floor();
    Ok(cuts * spec.cut_spacing * 1000.0)
}

/// Enclosed volume in m³. Requires a watertight, outward-wound mesh.
pub fn volume(mesh: &TriMesh) -> Result<f64> {
    mesh.check_watertight()?;
    let v = mesh.signed_volume();
    if v <= 0.0 {
        return Err(Error::Degenerate(format!(
            "non-positive enclosed volume {v} (inward winding?)"
        )));
    }
    Ok(v)
}

/// Weight in kg for a density in kg/L.
pub fn weight(mesh: &TriMesh, density: f64) -> Result<f64> {
    Ok(volume(mesh)? * density * 1000.0)
}

/// One closed cross-section polygon in plane coordinates.
#[derive(Debug, Clone)]
pub struct SectionLoop {
    pub points: Vec<[f64; 2]>,
}

impl SectionLoop {
    pub fn perimeter(&self) -> f64 {
        polygon_perimeter(&self.points)
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        [sx / n, sy / n]
    }

    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        self.points.iter().fold(
            ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
            |(lo, hi), p| ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])]),
        )
    }
}

fn polygon_perimeter(points: &[[f64; 2]]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    (0..points.len())
        .map(|i| {
            let (a, b) = (points[i], points[(i + 1) % points.len()]);
            (a[0] - b[0]).hypot(a[1] - b[1])
        })
        .sum()
}

/// Convex hull (Andrew's monotone chain), counter-clockwise, no collinear points.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Intersects the mesh with the plane `coordinate[axis] == level` and chains
/// the segments into closed loops. Vertices exactly on the plane count as
/// above it, so every crossed edge is shared by exactly two crossing faces on
/// a closed mesh.
pub fn slice_loops(mesh: &TriMesh, axis: Axis, level: f64) -> Result<Vec<SectionLoop>> {
    let a = axis.index();
    let (u, v) = axis.plane();
    let mut key_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut links: Vec<Vec<usize>> = Vec::new();

    let mut crossing = |i: usize, j: usize, points: &mut Vec<[f64; 2]>, links: &mut Vec<Vec<usize>>| {
        let key = (i.min(j), i.max(j));
        *key_index.entry(key).or_insert_with(|| {
            let (p, q) = (&mesh.vertices[key.0], &mesh.vertices[key.1]);
            let t = (level - p[a]) / (q[a] - p[a]);
            points.push([p[u] + t * (q[u] - p[u]), p[v] + t * (q[v] - p[v])]);
            links.push(Vec::with_capacity(2));
            points.len() - 1
        })
    };

    for f in mesh.faces() {
        let above = f.map(|i| mesh.vertices[i][a] >= level);
        if above[0] == above[1] && above[1] == above[2] {
            continue;
        }
        let mut ends = Vec::with_capacity(2);
        for k in 0..3 {
            let (i, j) = (f[k], f[(k + 1) % 3]);
            if above[k] != above[(k + 1) % 3] {
                ends.push(crossing(i, j, &mut points, &mut links));
            }
        }
        links[ends[0]].push(ends[1]);
        links[ends[1]].push(ends[0]);
    }
    if points.is_empty() {
        return Err(Error::EmptySection(level));
    }
    if links.iter().any(|l| l.len() != 2) {
        return Err(Error::OpenLoop(level));
    }

    let mut visited = vec![false; points.len()];
    let mut loops = Vec::new();
    for start in 0..points.len() {
        if visited[start] {
            continue;
        }
        let mut ring = Vec::new();
        let (mut prev, mut cur) = (usize::MAX, start);
        loop {
            visited[cur] = true;
            ring.push(points[cur]);
            let next = if links[cur][0] != prev { links[cur][0] } else { links[cur][1] };
            prev = cur;
            cur = next;
            if cur == start || visited[cur] {
                break;
            }
        }
        loops.push(SectionLoop { points: ring });
    }
    Ok(loops)
}

/// Tape-measure girth of a cross-section: the convex hull of the largest
/// loop together with any loop whose centroid lies inside the largest loop's
/// bounding box. Returns meters.
pub fn section_girth(loops: &[SectionLoop]) -> f64 {
    let Some(main) = loops
        .iter()
        .max_by(|a, b| a.perimeter().total_cmp(&b.perimeter()))
    else {
        return 0.0;
    };
    let (lo, hi) = main.bounds();
    let mut pts: Vec<[f64; 2]> = Vec::new();
    for l in loops {
        let c = l.centroid();
        if std::ptr::eq(l, main) || (c[0] >= lo[0] && c[0] <= hi[0] && c[1] >= lo[1] && c[1] <= hi[1]) {
            pts.extend_from_slice(&l.points);
        }
    }
    polygon_perimeter(&convex_hull(&pts))
}

/// Girth in mm at `height_fraction` of the body's vertical extent.
pub fn circumference(mesh: &TriMesh, height_fraction: f64, spec: &SliceSpec) -> Result<f64> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&height_fraction) {
        return Err(Error::InvalidArgument(format!(
            "height fraction {height_fraction} outside [0, 1]"
        )));
    }
    let (lo, hi) = extent(mesh, spec.axis)?;
    let level = lo + height_fraction * (hi - lo);
    let loops = slice_loops(mesh, spec.axis, level)?;
    Ok(section_girth(&loops) * 1000.0)
}

/// Height, weight, and the three girths. The waist is the smallest girth
/// within `waist_window` of the configured waist fraction.
pub fn measure_all(mesh: &TriMesh, spec: &SliceSpec, density: f64) -> Result<Measurements> {
    spec.validate()?;
    let h = height(mesh, spec)?;
    let w = weight(mesh, density)?;
    let bust = circumference(mesh, spec.bust_fraction, spec)?;
    let hip = circumference(mesh, spec.hip_fraction, spec)?;

    let (lo, hi) = extent(mesh, spec.axis)?;
    let step = spec.cut_spacing / (hi - lo);
    let steps = (spec.waist_window / step).floor() as i64;
    let mut waist = f64::INFINITY;
    for k in -steps..=steps {
        let f = spec.waist_fraction + k as f64 * step;
        waist = waist.min(circumference(mesh, f, spec)?);
    }
    Measurements::new(h, w, bust, waist, hip)
}

/// Distances between a predicted and a reference mesh.
#[derive(Debug, Clone)]
pub struct VertexError {
    /// Mean distance, mm.
    pub mean_mm: f64,
    /// Distance for each vertex of the predicted mesh, mm.
    pub per_vertex_mm: Vec<f64>,
}

/// Mean per-vertex distance in mm. Meshes with equal vertex counts are
/// compared vertex-to-vertex; otherwise each vertex is matched to its nearest
/// vertex in the other mesh and the two directed means are averaged.
pub fn per_vertex_error(pred: &TriMesh, truth: &TriMesh) -> Result<VertexError> {
    if pred.vertices.is_empty() || truth.vertices.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if pred.num_vertices() == truth.num_vertices() {
        let d: Vec<f64> = pred
            .vertices
            .iter()
            .zip(&truth.vertices)
            .map(|(p, q)| (p - q).norm() * 1000.0)
            .collect();
        let mean_mm = d.iter().sum::<f64>() / d.len() as f64;
        return Ok(VertexError {
            mean_mm,
            per_vertex_mm: d,
        });
    }
    let nearest = |from: &TriMesh, to: &TriMesh| -> Vec<f64> {
        from.vertices
            .iter()
            .map(|p| {
                to.vertices
                    .iter()
                    .map(|q| (p - q).norm_squared())
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
                    * 1000.0
            })
            .collect()
    };
    let forward = nearest(pred, truth);
    let backward = nearest(truth, pred);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(VertexError {
        mean_mm: 0.5 * (mean(&forward) + mean(&backward)),
        per_vertex_mm: forward,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodymodel::shapes::{cuboid, cylinder, icosphere, unit_cube};
    use crate::bodymodel::{make_procedural_model, ProceduralBodyConfig, ShapeParams};
    use nalgebra::{Point3, Vector3};

    fn spec(spacing: f64) -> SliceSpec {
        SliceSpec {
            cut_spacing: spacing,
            ..Default::default()
        }
    }

    #[test]
    fn cube_height() {
        let h = height(&unit_cube(), &spec(0.01)).unwrap();
        assert!((h - 1000.0).abs() <= 10.0);
        let moved = unit_cube().translated(Vector3::new(0.0, 2.0, 0.0));
        assert_eq!(height(&moved, &spec(0.01)).unwrap(), h);
    }

    #[test]
    fn scaled_height() {
        let c = unit_cube().scaled_about(1.1, Point3::origin());
        let h = height(&c, &spec(0.01)).unwrap();
        assert!((h - 1100.0).abs() <= 10.0, "{h}");
    }

    #[test]
    fn empty_mesh_height_fails() {
        let empty = TriMesh::new(vec![], vec![]).unwrap();
        assert!(matches!(height(&empty, &SliceSpec::default()), Err(Error::EmptyMesh)));
    }

    #[test]
    fn cube_volume_and_weight() {
        assert_eq!(volume(&unit_cube()).unwrap(), 1.0);
        assert_eq!(weight(&unit_cube(), 0.985).unwrap(), 985.0);
        assert_eq!(weight(&unit_cube(), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn sphere_volume_converges_from_below() {
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.125;
        let mut last = 0.0;
        for sub in [2, 3, 4] {
            let v = volume(&icosphere(Point3::origin(), 0.5, sub)).unwrap();
            assert!(v < exact && v > last);
            last = v;
        }
        assert!((last - exact).abs() / exact < 0.01, "{last} vs {exact}");
    }

    #[test]
    fn sphere_weight() {
        let w = weight(&icosphere(Point3::origin(), 0.31, 5), 0.985).unwrap();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.31f64.powi(3) * 985.0;
        assert!((w - exact).abs() / exact < 0.01);
        assert!((w - 122.9).abs() / 122.9 < 0.01);
    }

    #[test]
    fn flipped_face_is_rejected() {
        let c = unit_cube();
        let mut faces = c.faces().to_vec();
        faces[3].swap(1, 2);
        let bad = TriMesh::new(c.vertices.clone(), faces).unwrap();
        assert!(matches!(volume(&bad), Err(Error::Orientation(..))));
    }

    #[test]
    fn missing_face_names_boundary_edge() {
        let c = unit_cube();
        let mut faces = c.faces().to_vec();
        let removed = faces.pop().unwrap();
        let bad = TriMesh::new(c.vertices.clone(), faces).unwrap();
        match volume(&bad) {
            Err(Error::NotWatertight(a, b)) => {
                assert!(removed.contains(&a) && removed.contains(&b));
            }
            other => panic!("expected boundary edge error, got {other:?}"),
        }
    }

    #[test]
    fn inside_out_mesh_rejected() {
        assert!(volume(&unit_cube().flipped()).is_err());
    }

    #[test]
    fn cylinder_girth() {
        let cyl = cylinder(0.0, 0.0, 0.15, 0.0, 1.0, 128, 4);
        for f in [0.2, 0.5, 0.83] {
            let c = circumference(&cyl, f, &SliceSpec::default()).unwrap();
            assert!((c - 942.48).abs() / 942.48 < 0.01, "{c}");
        }
        let wide = cyl.map_vertices(|p| Point3::new(2.0 * p.x, p.y, 2.0 * p.z));
        let c1 = circumference(&cyl, 0.5, &SliceSpec::default()).unwrap();
        let c2 = circumference(&wide, 0.5, &SliceSpec::default()).unwrap();
        assert!((c2 / c1 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn side_by_side_cylinders_use_larger_loop() {
        let torso = cylinder(0.0, 0.0, 0.15, 0.0, 1.0, 64, 2);
        let arm = cylinder(0.25, 0.0, 0.05, 0.0, 1.0, 64, 2);
        let single = circumference(&torso, 0.5, &SliceSpec::default()).unwrap();
        let both = circumference(&torso.merged(&arm), 0.5, &SliceSpec::default()).unwrap();
        assert!((both - single).abs() < 1e-9, "{both} vs {single}");
    }

    #[test]
    fn loops_inside_torso_box_are_hulled_together() {
        // Two leg-like cylinders under one bounding box of a larger loop.
        let big = cylinder(0.0, 0.0, 0.15, 0.0, 1.0, 64, 2);
        let inner = cylinder(0.1, 0.0, 0.03, 0.0, 1.0, 64, 2);
        let loops = slice_loops(&big.merged(&inner), Axis::Y, 0.5).unwrap();
        assert_eq!(loops.len(), 2);
        let g = section_girth(&loops);
        assert!((g - big_girth(&big)).abs() < 1e-9);
    }

    fn big_girth(m: &TriMesh) -> f64 {
        section_girth(&slice_loops(m, Axis::Y, 0.5).unwrap())
    }

    #[test]
    fn empty_section_is_an_error() {
        let c = unit_cube();
        assert!(matches!(slice_loops(&c, Axis::Y, 3.0), Err(Error::EmptySection(_))));
    }

    #[test]
    fn open_mesh_section_is_an_error() {
        let c = cylinder(0.0, 0.0, 0.1, 0.0, 1.0, 16, 2);
        let faces: Vec<_> = c.faces().iter().copied().skip(20).collect();
        let open = TriMesh::new(c.vertices.clone(), faces).unwrap();
        assert!(matches!(slice_loops(&open, Axis::Y, 0.25), Err(Error::OpenLoop(_))));
    }

    #[test]
    fn hull_of_concave_polygon_bridges_the_notch() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [1.0, 0.5], [0.0, 2.0]];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!((polygon_perimeter(&hull) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn template_measurements_are_plausible() {
        let m = make_procedural_model(&ProceduralBodyConfig::default()).unwrap();
        let meas = measure_all(m.template(), &SliceSpec::default(), DEFAULT_DENSITY).unwrap();
        assert!((1400.0..=2000.0).contains(&meas.height), "{meas}");
        assert!(meas.weight > 40.0 && meas.weight < 120.0, "{meas}");
        assert!(meas.waist < meas.hip && meas.waist < meas.bust, "{meas}");
    }

    #[test]
    fn waist_coefficient_increases_waist() {
        let m = make_procedural_model(&ProceduralBodyConfig::default()).unwrap();
        let mut last = 0.0;
        for s in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let mut b = [0.0; 10];
            b[3] = s;
            let meas = measure_all(&m.deform(&ShapeParams::new(&b).unwrap()), &SliceSpec::default(), DEFAULT_DENSITY).unwrap();
            assert!(meas.waist > last, "waist {} at beta3 = {s}", meas.waist);
            last = meas.waist;
        }
    }

    #[test]
    fn translation_leaves_measurements_unchanged() {
        let m = make_procedural_model(&ProceduralBodyConfig::default()).unwrap();
        let a = measure_all(m.template(), &SliceSpec::default(), DEFAULT_DENSITY).unwrap();
        let moved = m.template().translated(Vector3::new(0.3, 2.0, -1.0));
        let b = measure_all(&moved, &SliceSpec::default(), DEFAULT_DENSITY).unwrap();
        for ((_, x), (_, y)) in a.named().iter().zip(b.named().iter()) {
            assert!((x - y).abs() <= 1e-6 * x.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn per_vertex_identity_and_offset() {
        let c = unit_cube();
        assert_eq!(per_vertex_error(&c, &c).unwrap().mean_mm, 0.0);
        let moved = c.translated(Vector3::new(0.001, 0.0, 0.0));
        let e = per_vertex_error(&c, &moved).unwrap();
        assert!((e.mean_mm - 1.0).abs() < 1e-9);
        assert_eq!(e.per_vertex_mm.len(), 8);
    }

    #[test]
    fn scaled_cube_error_matches_brute_force() {
        let c = unit_cube();
        let center = c.centroid().unwrap();
        let s = c.scaled_about(1.01, center);
        let e = per_vertex_error(&s, &c).unwrap();
        let expected = 0.01
            * c.vertices.iter().map(|v| (v - center).norm()).sum::<f64>()
            / 8.0
            * 1000.0;
        assert!((e.mean_mm - expected).abs() < 1e-9);
    }

    #[test]
    fn mismatched_counts_use_nearest_vertices() {
        let a = cuboid(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        let b = icosphere(Point3::new(0.5, 0.5, 0.5), 0.5, 1);
        let ab = per_vertex_error(&a, &b).unwrap();
        let ba = per_vertex_error(&b, &a).unwrap();
        assert!((ab.mean_mm - ba.mean_mm).abs() < 1e-9);
        assert_eq!(ab.per_vertex_mm.len(), 8);
    }

    #[test]
    fn measurement_validation() {
        assert!(Measurements::new(1700.0, 70.0, 900.0, 800.0, 1000.0).is_ok());
        assert!(Measurements::new(1700.0, 70.0, 3100.0, 800.0, 1000.0).is_err());
        assert!(Measurements::new(1700.0, 0.0, 900.0, 800.0, 1000.0).is_err());
        let bad = SliceSpec {
            waist_fraction: 0.8,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn measurement_serialization() {
        let m = Measurements::new(1700.0, 70.5, 900.0, 800.0, 1000.25).unwrap();
        assert_eq!(m.csv_row("s1"), "s1,1700,70.5,900,800,1000.25");
        assert!(m.to_record().contains("weight_kg=70.500\n"));
        assert_eq!(MEASUREMENT_CSV_HEADER.split(',').count(), 6);
    }
}
