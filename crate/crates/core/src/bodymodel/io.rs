use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use super::mesh::TriMesh;
use super::{BodyModel, NUM_BETAS};
use crate::error::{Error, IoContext, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"S2SBASIS";
const TEMPLATE_FILE: &str = "template.obj";
const SHAPE_DIRS_FILE: &str = "shape_dirs.bin";

/// Reads a triangle mesh from `v x y z` / `f i j k` text (1-based indices).
/// Texture/normal references (`f 1/1/1 ...`) are accepted and ignored;
/// other record types are skipped.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).at(path)?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut vertices = Vec::new();
    let mut raw_faces: Vec<(usize, [i64; 3])> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(lineno, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(parse_err(lineno, "vertex needs 3 coordinates".into()));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<i64> = tokens
                    .map(|t| t.split('/').next().unwrap_or("").parse::<i64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(lineno, format!("bad face index: {e}")))?;
                match idx.len() {
                    3 => raw_faces.push((lineno, [idx[0], idx[1], idx[2]])),
                    n if n > 3 => {
                        return Err(Error::Unsupported(format!(
                            "{}:{lineno}: {n}-sided face; only triangles are supported",
                            path.display()
                        )))
                    }
                    n => return Err(parse_err(lineno, format!("face has {n} indices"))),
                }
            }
            _ => {}
        }
    }

    let n = vertices.len() as i64;
    let mut faces = Vec::with_capacity(raw_faces.len());
    for (lineno, f) in raw_faces {
        let mut out = [0usize; 3];
        for (o, &i) in out.iter_mut().zip(&f) {
            if i < 1 || i > n {
                return Err(parse_err(lineno, format!("face index {i} out of range 1..={n}")));
            }
            *o = (i - 1) as usize;
        }
        faces.push(out);
    }
    TriMesh::new(vertices, faces)
}

pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).at(path)?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        for v in &mesh.vertices {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for f in mesh.faces() {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        w.flush()
    })()
    .at(path)
}

/// Writes `template.obj` and `shape_dirs.bin` into `dir`.
pub fn save_model(model: &BodyModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).at(dir)?;
    save_mesh(model.template(), dir.join(TEMPLATE_FILE))?;
    let mut buf = Vec::with_capacity(20 + model.shape_dirs().len() * 4);
    buf.extend_from_slice(MODEL_MAGIC);
    for d in [model.num_vertices() as u32, 3, NUM_BETAS as u32] {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for &x in model.shape_dirs() {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
    let p = dir.join(SHAPE_DIRS_FILE);
    fs::write(&p, buf).at(p)
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<BodyModel> {
    let dir = dir.as_ref();
    let template = load_mesh(dir.join(TEMPLATE_FILE))?;
    let p = dir.join(SHAPE_DIRS_FILE);
    let bytes = fs::read(&p).at(&p)?;
    let header_err = |msg: &str| Error::Parse {
        path: p.clone(),
        line: 0,
        msg: msg.to_string(),
    };
    if bytes.len() < 20 || &bytes[..8] != MODEL_MAGIC {
        return Err(header_err("missing S2SBASIS header"));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
    let (v, three, k) = (dim(0), dim(1), dim(2));
    if three != 3 || k != NUM_BETAS {
        return Err(header_err(&format!("unexpected basis dims ({v}, {three}, {k})")));
    }
    if v != template.num_vertices() {
        return Err(Error::Sizing {
            what: "shape_dirs vertex count",
            expected: template.num_vertices(),
            got: v,
        });
    }
    let payload = &bytes[20..];
    if payload.len() != v * 3 * k * 4 {
        return Err(header_err("truncated basis payload"));
    }
    let dirs = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    BodyModel::new(template, dirs)
}
