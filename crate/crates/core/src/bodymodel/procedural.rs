//! Procedural stand-in for a learned body model: a torso/neck/head tube,
//! two legs and two hanging arms, each a capped stack of elliptical rings.
//!
//! Shape basis columns are the derivatives of the generator with respect to
//! ten semantic knobs, so each column moves the mesh the way its name says.

use nalgebra::Point3;

use super::mesh::TriMesh;
use super::shapes::{capped_tube, ellipse_ring};
use super::{BodyModel, NUM_BETAS};
use crate::error::{Error, Result};

/// Names of the shape axes, in coefficient order.
pub const SHAPE_AXES: [&str; NUM_BETAS] = [
    "height",
    "girth",
    "bust",
    "waist",
    "hip",
    "shoulder_width",
    "limb_thickness",
    "limb_length",
    "torso_length",
    "head_size",
];

/// Relative change of each knob's target quantity per unit coefficient.
const KNOB_GAIN: [f64; NUM_BETAS] = [0.04, 0.06, 0.06, 0.08, 0.06, 0.06, 0.08, 0.015, 0.015, 0.025];

#[derive(Debug, Clone, PartialEq)]
pub struct ProceduralBodyConfig {
    /// Template stature in meters.
    pub stature: f64,
    /// Multiplier on every horizontal radius of the template.
    pub girth_scale: f64,
    /// Points per ring.
    pub segments: usize,
    /// Sub-intervals inserted between consecutive control rings.
    pub ring_subdivisions: usize,
}

impl Default for ProceduralBodyConfig {
    fn default() -> Self {
        Self {
            stature: 1.75,
            girth_scale: 1.0,
            segments: 32,
            ring_subdivisions: 2,
        }
    }
}

/// Control ring of the torso: position along the torso (0 = crotch,
/// 1 = shoulder line), half-width (x), half-depth (z) in meters at 1.75 m
/// stature, and region weights (bust, waist, hip, shoulder).
struct TorsoRing {
    t: f64,
    half_x: f64,
    half_z: f64,
    weights: [f64; 4],
}

const TORSO: [TorsoRing; 9] = [
    TorsoRing { t: 0.00, half_x: 0.165, half_z: 0.105, weights: [0.0, 0.0, 0.6, 0.0] },
    TorsoRing { t: 0.08, half_x: 0.178, half_z: 0.115, weights: [0.0, 0.0, 0.9, 0.0] },
    TorsoRing { t: 0.172, half_x: 0.185, half_z: 0.122, weights: [0.0, 0.1, 1.0, 0.0] },
    TorsoRing { t: 0.30, half_x: 0.165, half_z: 0.110, weights: [0.0, 0.6, 0.5, 0.0] },
    TorsoRing { t: 0.445, half_x: 0.138, half_z: 0.098, weights: [0.1, 1.0, 0.1, 0.0] },
    TorsoRing { t: 0.58, half_x: 0.150, half_z: 0.108, weights: [0.5, 0.6, 0.0, 0.0] },
    TorsoRing { t: 0.718, half_x: 0.165, half_z: 0.120, weights: [1.0, 0.1, 0.0, 0.0] },
    TorsoRing { t: 0.86, half_x: 0.172, half_z: 0.110, weights: [0.5, 0.0, 0.0, 0.5] },
    TorsoRing { t: 1.00, half_x: 0.175, half_z: 0.090, weights: [0.0, 0.0, 0.0, 1.0] },
];

/// Limb profile rings: (fraction along the limb from its free end, half_x, half_z).
const LEG: [(f64, f64, f64); 7] = [
    (0.0, 0.045, 0.060),
    (0.03, 0.042, 0.055),
    (0.12, 0.035, 0.040),
    (0.35, 0.052, 0.055),
    (0.52, 0.048, 0.050),
    (0.75, 0.070, 0.072),
    (1.0, 0.082, 0.086),
];

const ARM: [(f64, f64, f64); 6] = [
    (0.0, 0.030, 0.020),
    (0.10, 0.042, 0.022),
    (0.22, 0.030, 0.025),
    (0.50, 0.038, 0.038),
    (0.80, 0.045, 0.045),
    (1.0, 0.048, 0.050),
];

// Vertical layout in meters at 1.75 m stature.
const LEG_LENGTH: f64 = 0.80;
const TORSO_LENGTH: f64 = 0.64;
const ARM_LENGTH: f64 = 0.75;
const ARM_GAP: f64 = 0.02;
const HEAD_HEIGHT: f64 = 0.23;
const HEAD_HALF_X: f64 = 0.078;
const HEAD_HALF_Z: f64 = 0.095;
/// Head rings start at this latitude fraction, where the ellipsoid meets the neck.
const HEAD_START: f64 = 0.22;
const HEAD_RINGS: usize = 6;
const REFERENCE_STATURE: f64 = 1.75;

type Part = (Vec<Vec<Point3<f64>>>, Point3<f64>, Point3<f64>);

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Generates every part's rings for a knob setting. The vertex layout depends
/// only on the config, never on the knobs.
fn body_parts(knobs: &[f64; NUM_BETAS], cfg: &ProceduralBodyConfig) -> Vec<Part> {
    let gain = |k: usize| 1.0 + KNOB_GAIN[k] * knobs[k];
    let (s_height, s_girth) = (gain(0), gain(1) * cfg.girth_scale);
    let (s_limb_thick, s_limb_len, s_torso_len, s_head) = (gain(6), gain(7), gain(8), gain(9));
    let region = [gain(2), gain(3), gain(4), gain(5)];
    let segs = cfg.segments;
    let subdiv = cfg.ring_subdivisions;

    // Unnormalized heights; everything is rescaled to the configured stature.
    let crotch = LEG_LENGTH * s_limb_len;
    let shoulder = crotch + TORSO_LENGTH * s_torso_len;
    let shoulder_top = shoulder + 0.025;
    let neck_top = shoulder_top + 0.04;
    let head_h = HEAD_HEIGHT * s_head;
    let top = head_bottom(neck_top, head_h) + head_h;
    // Proportion knobs redistribute length; only the height knob changes stature.
    let y_scale = cfg.stature / top * s_height;
    let r_scale = cfg.stature / REFERENCE_STATURE * s_girth;
    let y = |v: f64| v * y_scale;

    let torso_radii = |ring: &TorsoRing| {
        let mut f = 1.0;
        for (w, s) in ring.weights.iter().zip(region.iter()) {
            f *= 1.0 + w * (s - 1.0);
        }
        let shoulder_f = 1.0 + ring.weights[3] * (region[3] - 1.0);
        // Shoulder width widens x only.
        (ring.half_x * f * r_scale, ring.half_z * f / shoulder_f * r_scale)
    };

    let mut torso_rings = Vec::new();
    for (i, pair) in TORSO.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let (ax, az) = torso_radii(a);
        let (bx, bz) = torso_radii(b);
        let start = if i == 0 { 0 } else { 1 };
        for s in start..=subdiv {
            let u = s as f64 / subdiv as f64;
            let t = lerp(a.t, b.t, u);
            torso_rings.push(ellipse_ring(
                0.0,
                0.0,
                y(crotch + t * TORSO_LENGTH * s_torso_len),
                lerp(ax, bx, u),
                lerp(az, bz, u),
                segs,
            ));
        }
    }
    let torso_widest = TORSO
        .iter()
        .map(|r| torso_radii(r).0)
        .fold(f64::MIN, f64::max);

    // Shoulder slope and neck.
    let neck = (0.055 * r_scale, 0.058 * r_scale);
    for (yy, (hx, hz)) in [
        (shoulder_top, (0.11 * region[3] * r_scale, 0.075 * r_scale)),
        (shoulder + 0.045, neck),
        (neck_top, neck),
    ] {
        torso_rings.push(ellipse_ring(0.0, 0.0, y(yy), hx, hz, segs));
    }
    // Head ellipsoid latitudes from where it meets the neck up to (not
    // including) the top pole.
    let head_center = top - head_h * 0.5;
    let head_rings = HEAD_RINGS * subdiv;
    let head_r = cfg.stature / REFERENCE_STATURE * s_head;
    for k in 0..head_rings {
        let lat = lerp(HEAD_START, 1.0, k as f64 / head_rings as f64);
        let ang = std::f64::consts::PI * lat;
        torso_rings.push(ellipse_ring(
            0.0,
            0.0,
            y(head_center - 0.5 * head_h * ang.cos()),
            HEAD_HALF_X * head_r * ang.sin(),
            HEAD_HALF_Z * head_r * ang.sin(),
            segs,
        ));
    }
    let torso_part = (
        torso_rings,
        Point3::new(0.0, y(crotch), 0.0),
        Point3::new(0.0, y(top), 0.0),
    );

    let limb = |profile: &[(f64, f64, f64)], cx: f64, y_free: f64, y_root: f64| -> Part {
        let mut rings = Vec::new();
        for (i, pair) in profile.windows(2).enumerate() {
            let start = if i == 0 { 0 } else { 1 };
            for s in start..=subdiv {
                let u = s as f64 / subdiv as f64;
                let f = lerp(pair[0].0, pair[1].0, u);
                let hx = lerp(pair[0].1, pair[1].1, u) * r_scale * s_limb_thick;
                let hz = lerp(pair[0].2, pair[1].2, u) * r_scale * s_limb_thick;
                rings.push(ellipse_ring(cx, 0.0, y(lerp(y_free, y_root, f)), hx, hz, segs));
            }
        }
        // Ring order must run bottom to top.
        let (bottom, top) = if y_free < y_root {
            (Point3::new(cx, y(y_free), 0.0), Point3::new(cx, y(y_root), 0.0))
        } else {
            rings.reverse();
            (Point3::new(cx, y(y_root), 0.0), Point3::new(cx, y(y_free), 0.0))
        };
        (rings, bottom, top)
    };

    let leg_offset = 0.56 * torso_radii(&TORSO[0]).0;
    let arm_root_r = ARM[ARM.len() - 1].1 * r_scale * s_limb_thick;
    let arm_offset = torso_widest + ARM_GAP * r_scale + arm_root_r;
    let arm_top = shoulder - 0.01;
    let arm_end = arm_top - ARM_LENGTH * s_limb_len;

    vec![
        torso_part,
        limb(&LEG, -leg_offset, 0.0, crotch),
        limb(&LEG, leg_offset, 0.0, crotch),
        limb(&ARM, -arm_offset, arm_end, arm_top),
        limb(&ARM, arm_offset, arm_end, arm_top),
    ]
}

/// Chin height such that the first head ring sits just above the neck.
fn head_bottom(neck_top: f64, head_h: f64) -> f64 {
    neck_top + 0.005 - 0.5 * head_h * (1.0 - (std::f64::consts::PI * HEAD_START).cos())
}

fn assemble(parts: &[Part]) -> Result<TriMesh> {
    let mut mesh: Option<TriMesh> = None;
    for (rings, bottom, top) in parts {
        let tube = capped_tube(rings, *bottom, *top)?;
        mesh = Some(match mesh {
            None => tube,
            Some(m) => m.merged(&tube),
        });
    }
    mesh.ok_or_else(|| Error::Construction("no body parts".into()))
}

/// Builds the template at zero knobs and a basis from central differences of
/// the generator around it.
pub fn make_procedural_model(cfg: &ProceduralBodyConfig) -> Result<BodyModel> {
    if cfg.segments < 8 || cfg.ring_subdivisions < 1 {
        return Err(Error::Construction(format!(
            "tessellation too coarse: {} segments, {} ring subdivisions (need >= 8 and >= 1)",
            cfg.segments, cfg.ring_subdivisions
        )));
    }
    if !(1.0..=2.5).contains(&cfg.stature) || !(cfg.girth_scale > 0.0) {
        return Err(Error::Construction(format!(
            "implausible proportions: stature {} m, girth scale {}",
            cfg.stature, cfg.girth_scale
        )));
    }
    let template = assemble(&body_parts(&[0.0; NUM_BETAS], cfg))?;
    template
        .check_watertight()
        .map_err(|e| Error::Construction(format!("template not watertight: {e}")))?;

    const STEP: f64 = 1e-3;
    let n = template.num_vertices();
    let mut shape_dirs = vec![0.0; n * 3 * NUM_BETAS];
    for k in 0..NUM_BETAS {
        let mut plus = [0.0; NUM_BETAS];
        let mut minus = [0.0; NUM_BETAS];
        plus[k] = STEP;
        minus[k] = -STEP;
        let vp = vertices_only(&body_parts(&plus, cfg));
        let vm = vertices_only(&body_parts(&minus, cfg));
        debug_assert_eq!(vp.len(), n);
        for v in 0..n {
            let d = (vp[v] - vm[v]) / (2.0 * STEP);
            for axis in 0..3 {
                shape_dirs[(v * 3 + axis) * NUM_BETAS + k] = d[axis];
            }
        }
    }
    BodyModel::new(template, shape_dirs)
}

/// Vertex positions in the same order `capped_tube` + `merged` produce.
fn vertices_only(parts: &[Part]) -> Vec<Point3<f64>> {
    let mut out = Vec::new();
    for (rings, bottom, top) in parts {
        out.push(*bottom);
        for r in rings {
            out.extend_from_slice(r);
        }
        out.push(*top);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_is_watertight_and_upright() {
        let m = make_procedural_model(&ProceduralBodyConfig::default()).unwrap();
        let t = m.template();
        t.check_watertight().unwrap();
        let (lo, hi) = t.bounds().unwrap();
        assert!(lo.y.abs() < 1e-12, "feet at y = 0, got {}", lo.y);
        assert!((hi.y - 1.75).abs() < 1e-9, "stature {}", hi.y);
        assert_eq!(vertices_only(&body_parts(&[0.0; NUM_BETAS], &ProceduralBodyConfig::default())), t.vertices);
    }

    #[test]
    fn template_volume_is_plausible() {
        let m = make_procedural_model(&ProceduralBodyConfig::default()).unwrap();
        let v = m.template().signed_volume();
        assert!((0.04..=0.12).contains(&v), "volume {v} m^3");
    }

    #[test]
    fn density_doubling_keeps_volume() {
        let coarse = make_procedural_model(&ProceduralBodyConfig::default()).unwrap();
        let fine = make_procedural_model(&ProceduralBodyConfig {
            segments: 64,
            ring_subdivisions: 4,
            ..Default::default()
        })
        .unwrap();
        fine.template().check_watertight().unwrap();
        let (vc, vf) = (coarse.template().signed_volume(), fine.template().signed_volume());
        assert!(((vf - vc) / vf).abs() < 0.02, "coarse {vc} fine {vf}");
    }

    #[test]
    fn too_coarse_rejected() {
        let cfg = ProceduralBodyConfig {
            segments: 2,
            ..Default::default()
        };
        assert!(matches!(make_procedural_model(&cfg), Err(Error::Construction(_))));
    }

    #[test]
    fn basis_columns_are_distinct() {
        let m = make_procedural_model(&ProceduralBodyConfig::default()).unwrap();
        let cols: Vec<Vec<f64>> = (0..NUM_BETAS)
            .map(|k| m.basis_column(k).iter().flat_map(|d| [d.x, d.y, d.z]).collect())
            .collect();
        for i in 0..NUM_BETAS {
            let ni = cols[i].iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(ni > 1e-3, "column {i} is (near) zero");
            for j in i + 1..NUM_BETAS {
                let nj = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
                let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                let cos = dot / (ni * nj);
                assert!(cos.abs() < 0.99, "columns {i} and {j}: cosine {cos}");
            }
        }
    }

    #[test]
    fn extreme_shapes_stay_closed() {
        let m = make_procedural_model(&ProceduralBodyConfig::default()).unwrap();
        for k in 0..NUM_BETAS {
            for s in [-3.0, 3.0] {
                let mut b = [0.0; NUM_BETAS];
                b[k] = s;
                let mesh = m.deform_slice(&b).unwrap();
                assert!(mesh.signed_volume() > 0.03, "knob {k} at {s}");
            }
        }
    }
}
