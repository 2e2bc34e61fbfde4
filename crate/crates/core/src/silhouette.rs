//! Turning meshes into binary silhouettes: rotation about the vertical body
//! axis, orthographic auto-framed projection, and a top-left-rule triangle
//! filler. Silhouettes are stored as binary PGM images.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Point3;

use crate::bodymodel::TriMesh;
use crate::error::{Error, IoContext, Result};

/// Binary image, row-major, 1 = body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Silhouette {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Silhouette {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Sizing {
                what: "silhouette pixels",
                expected: width * height,
                got: pixels.len(),
            });
        }
        if pixels.iter().any(|&p| p > 1) {
            return Err(Error::InvalidArgument("silhouette pixels must be 0 or 1".into()));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    /// Thresholds probabilities at 0.5.
    pub fn from_probabilities<T: Into<f64> + Copy>(width: usize, height: usize, probs: &[T]) -> Result<Self> {
        let pixels = probs.iter().map(|&p| u8::from(p.into() >= 0.5)).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn foreground(&self) -> usize {
        self.pixels.iter().map(|&p| p as usize).sum()
    }

    /// No foreground pixel at all.
    pub fn is_empty(&self) -> bool {
        self.foreground() == 0
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| 1 - p).collect(),
        }
    }
}

/// Front and side silhouettes of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SilhouettePair {
    pub front: Silhouette,
    pub side: Silhouette,
    pub subject_id: String,
}

impl SilhouettePair {
    pub fn new(front: Silhouette, side: Silhouette, subject_id: impl Into<String>) -> Result<Self> {
        if front.dims() != side.dims() {
            return Err(Error::Resolution {
                expected: front.dims(),
                got: side.dims(),
            });
        }
        Ok(Self {
            front,
            side,
            subject_id: subject_id.into(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.front.dims()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewSpec {
    /// Rotation about the vertical axis in degrees; 0 = front, 90 = side.
    pub rotation_deg: f64,
    /// Empty border around the body as a fraction of the image height.
    pub margin_fraction: f64,
}

impl ViewSpec {
    pub const DEFAULT_MARGIN: f64 = 0.05;

    pub fn front() -> Self {
        Self {
            rotation_deg: 0.0,
            margin_fraction: Self::DEFAULT_MARGIN,
        }
    }

    pub fn side() -> Self {
        Self {
            rotation_deg: 90.0,
            margin_fraction: Self::DEFAULT_MARGIN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..360.0).contains(&self.rotation_deg) {
            return Err(Error::InvalidArgument(format!(
                "view rotation {} outside [0, 360)",
                self.rotation_deg
            )));
        }
        if !(0.0..0.5).contains(&self.margin_fraction) {
            return Err(Error::InvalidArgument(format!(
                "margin fraction {} outside [0, 0.5)",
                self.margin_fraction
            )));
        }
        Ok(())
    }
}

/// (sin, cos) with exact values at multiples of 90°.
fn sin_cos_deg(theta_deg: f64) -> (f64, f64) {
    let t = theta_deg.rem_euclid(360.0);
    if t % 90.0 == 0.0 {
        match (t / 90.0) as u32 {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        t.to_radians().sin_cos()
    }
}

/// Rotates about the vertical (Y) line through the vertex centroid,
/// right-handed: +X turns toward −Z at +90°.
pub fn rotate_view(vertices: &[Point3<f64>], theta_deg: f64) -> Vec<Point3<f64>> {
    let (s, c) = sin_cos_deg(theta_deg);
    if s == 0.0 && c == 1.0 {
        return vertices.to_vec();
    }
    let n = vertices.len().max(1) as f64;
    let (cx, cz) = vertices
        .iter()
        .fold((0.0, 0.0), |(x, z), v| (x + v.x, z + v.z));
    let (cx, cz) = (cx / n, cz / n);
    vertices
        .iter()
        .map(|v| {
            let (dx, dz) = (v.x - cx, v.z - cz);
            Point3::new(cx + c * dx + s * dz, v.y, cz - s * dx + c * dz)
        })
        .collect()
}

pub fn rotate_mesh(mesh: &TriMesh, theta_deg: f64) -> TriMesh {
    let rotated = rotate_view(&mesh.vertices, theta_deg);
    mesh.map_vertices_indexed(|i, _| rotated[i])
}

pub const MIN_RESOLUTION: usize = 16;

/// Orthographic silhouette seen along −Z after rotating the mesh by the view
/// angle. The body is centered and scaled so its vertical extent spans
/// `1 − 2·margin` of the image height (or less, if it would overflow
/// horizontally).
pub fn rasterize(mesh: &TriMesh, view: &ViewSpec, width: usize, height: usize) -> Result<Silhouette> {
    view.validate()?;
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if width < MIN_RESOLUTION || height < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "resolution {width}x{height} below {MIN_RESOLUTION}x{MIN_RESOLUTION}"
        )));
    }
    let verts = rotate_view(&mesh.vertices, view.rotation_deg);
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for v in &verts {
        lo_x = lo_x.min(v.x);
        hi_x = hi_x.max(v.x);
        lo_y = lo_y.min(v.y);
        hi_y = hi_y.max(v.y);
    }
    let (ext_x, ext_y) = (hi_x - lo_x, hi_y - lo_y);
    if !(ext_x > 0.0 && ext_y > 0.0) {
        return Err(Error::Degenerate(format!(
            "projected extent {ext_x} x {ext_y} m is empty"
        )));
    }
    let usable = 1.0 - 2.0 * view.margin_fraction;
    let scale = (usable * height as f64 / ext_y).min(usable * width as f64 / ext_x);
    let (mid_x, mid_y) = (0.5 * (lo_x + hi_x), 0.5 * (lo_y + hi_y));
    let to_px = |p: &Point3<f64>| {
        [
            0.5 * width as f64 + (p.x - mid_x) * scale,
            0.5 * height as f64 - (p.y - mid_y) * scale,
        ]
    };
    let projected: Vec<[f64; 2]> = verts.iter().map(to_px).collect();

    let mut pixels = vec![0u8; width * height];
    for f in mesh.faces() {
        fill_triangle(&mut pixels, width, height, [projected[f[0]], projected[f[1]], projected[f[2]]]);
    }
    Silhouette::new(width, height, pixels)
}

fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// With y pointing down and positive orientation, top edges run left to
/// right along a row and left edges run upward.
fn is_top_left(a: [f64; 2], b: [f64; 2]) -> bool {
    (a[1] == b[1] && b[0] > a[0]) || b[1] < a[1]
}

/// Sets every pixel whose center is covered, using the top-left fill rule for
/// centers exactly on an edge.
fn fill_triangle(pixels: &mut [u8], width: usize, height: usize, mut tri: [[f64; 2]; 3]) {
    let area = edge(tri[0], tri[1], tri[2]);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    if area < 0.0 {
        tri.swap(1, 2);
    }
    let min_x = tri.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let max_x = tri.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let min_y = tri.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let max_y = tri.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let x0 = (min_x - 0.5).ceil().max(0.0) as usize;
    let y0 = (min_y - 0.5).ceil().max(0.0) as usize;
    let x1 = (max_x - 0.5).floor().min(width as f64 - 1.0);
    let y1 = (max_y - 0.5).floor().min(height as f64 - 1.0);
    if x1 < 0.0 || y1 < 0.0 {
        return;
    }
    let (x1, y1) = (x1 as usize, y1 as usize);
    let edges = [(tri[1], tri[2]), (tri[2], tri[0]), (tri[0], tri[1])];
    let top_left = edges.map(|(a, b)| is_top_left(a, b));
    for py in y0..=y1 {
        for px in x0..=x1 {
            let p = [px as f64 + 0.5, py as f64 + 0.5];
            let inside = edges.iter().zip(&top_left).all(|(&(a, b), &tl)| {
                let e = edge(a, b, p);
                e > 0.0 || (e == 0.0 && tl)
            });
            if inside {
                pixels[py * width + px] = 1;
            }
        }
    }
}

/// Fraction of equal pixels.
pub fn pixel_accuracy(a: &Silhouette, b: &Silhouette) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::Resolution {
            expected: a.dims(),
            got: b.dims(),
        });
    }
    let same = a.pixels.iter().zip(&b.pixels).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.pixels.len() as f64)
}

/// Accuracy of a real-valued reconstruction, binarized at 0.5.
pub fn reconstruction_accuracy<T: Into<f64> + Copy>(pred: &[T], target: &Silhouette) -> Result<f64> {
    let p = Silhouette::from_probabilities(target.width, target.height, pred)?;
    pixel_accuracy(&p, target)
}

pub fn front_path(dir: &Path, subject_id: &str) -> PathBuf {
    dir.join(format!("{subject_id}_front.pgm"))
}

pub fn side_path(dir: &Path, subject_id: &str) -> PathBuf {
    dir.join(format!("{subject_id}_side.pgm"))
}

/// Writes a binary `P5` graymap: 0 background, 255 body.
pub fn save_silhouette(s: &Silhouette, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = format!("P5\n{} {}\n255\n", s.width, s.height).into_bytes();
    bytes.extend(s.pixels.iter().map(|&p| p * 255));
    fs::write(path, bytes).at(path)
}

/// Reads `P5` or `P2` graymaps, binarizing at half intensity.
pub fn load_silhouette(path: impl AsRef<Path>) -> Result<Silhouette> {
    let path = path.as_ref();
    let bytes = fs::read(path).at(path)?;
    let err = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg,
    };

    // Header: magic, width, height, maxval, with '#' comments.
    let mut pos = 0;
    let mut fields: Vec<String> = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(err("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let magic = fields[0].as_str();
    if magic != "P5" && magic != "P2" {
        return Err(err(format!("unsupported magic {magic:?}; expected P5 or P2")));
    }
    let num = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>().map_err(|_| err(format!("bad {what} {s:?}")))
    };
    let (w, h, maxval) = (num(&fields[1], "width")?, num(&fields[2], "height")?, num(&fields[3], "maxval")?);
    if w == 0 || h == 0 || maxval == 0 || maxval > 255 {
        return Err(err(format!("unsupported dimensions {w}x{h} / maxval {maxval}")));
    }
    let values: Vec<usize> = if magic == "P5" {
        let data = &bytes[(pos + 1).min(bytes.len())..];
        if data.len() != w * h {
            return Err(err(format!(
                "header declares {w}x{h} = {} pixels but data holds {}",
                w * h,
                data.len()
            )));
        }
        data.iter().map(|&b| b as usize).collect()
    } else {
        let text = String::from_utf8_lossy(&bytes[pos..]);
        let vals: Vec<usize> = text
            .split_whitespace()
            .map(|t| num(t, "pixel value"))
            .collect::<Result<_>>()?;
        if vals.len() != w * h {
            return Err(err(format!("header declares {} pixels but data holds {}", w * h, vals.len())));
        }
        vals
    };
    let pixels = values
        .iter()
        .map(|&v| u8::from(v * 255 >= 128 * maxval))
        .collect();
    Silhouette::new(w, h, pixels)
}
