//! Synthetic subjects on disk: shape coefficients, ground-truth
//! measurements, and front/side silhouettes, indexed by a CSV manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::PipelineConfig;
use crate::bodymodel::{load_model, sample_shapes, save_model, BodyModel, ShapeParams, NUM_BETAS};
use crate::error::{Error, IoContext, Result};
use crate::meshmetrics::{measure_all, Measurements};
use crate::silhouette::{front_path, load_silhouette, rasterize, save_silhouette, side_path, SilhouettePair, ViewSpec};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const MANIFEST_HEADER: &str = "id,beta_path,front_path,side_path,height_mm,weight_kg,bust_mm,waist_mm,hip_mm,split";
/// Split fractions and seed used to build the manifest.
pub const SPLIT_FILE: &str = "splits.cfg";
pub const BODY_MODEL_DIR: &str = "body_model";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidArgument(format!("unknown split {s:?} (expected train, val or test)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        Self {
            train_fraction: cfg.train_fraction,
            val_fraction: cfg.val_fraction,
            seed: cfg.split_seed,
        }
    }

    /// Assigns each of `count` subjects to a split: a seeded shuffle, then
    /// the first `round(train·count)` go to train, the next
    /// `round(val·count)` to val, the rest to test.
    pub fn assign(&self, count: usize) -> Vec<Split> {
        let mut order: Vec<usize> = (0..count).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let n_train = ((self.train_fraction * count as f64).round() as usize).min(count);
        let n_val = ((self.val_fraction * count as f64).round() as usize).min(count - n_train);
        let mut out = vec![Split::Test; count];
        for (rank, &i) in order.iter().enumerate() {
            if rank < n_train {
                out[i] = Split::Train;
            } else if rank < n_train + n_val {
                out[i] = Split::Val;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    /// Paths relative to the manifest root.
    pub beta_path: PathBuf,
    pub front_path: PathBuf,
    pub side_path: PathBuf,
    pub measurements: Measurements,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub records: Vec<SubjectRecord>,
    pub splits: SplitSpec,
}

impl DatasetManifest {
    pub fn subjects(&self, split: Split) -> Vec<&SubjectRecord> {
        self.records.iter().filter(|r| r.split == split).collect()
    }

    pub fn path(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    pub fn load_beta(&self, rec: &SubjectRecord) -> Result<ShapeParams> {
        read_beta(self.path(&rec.beta_path))
    }

    pub fn load_pair(&self, rec: &SubjectRecord) -> Result<SilhouettePair> {
        let front = load_silhouette(self.path(&rec.front_path))?;
        let side = load_silhouette(self.path(&rec.side_path))?;
        SilhouettePair::new(front, side, rec.id.clone())
    }

    pub fn load_body_model(&self) -> Result<BodyModel> {
        load_model(self.root.join(BODY_MODEL_DIR))
    }

    /// Checks that ids are unique and every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<&str> = self.records.iter().map(|r| r.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Dataset(format!("duplicate subject id {}", w[0])));
        }
        for rec in &self.records {
            for p in [&rec.beta_path, &rec.front_path, &rec.side_path] {
                if !self.path(p).is_file() {
                    return Err(Error::Dataset(format!("subject {}: missing file {}", rec.id, p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{MANIFEST_HEADER}\n");
        for r in &self.records {
            let m = &r.measurements;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.id,
                r.beta_path.display(),
                r.front_path.display(),
                r.side_path.display(),
                m.height,
                m.weight,
                m.bust,
                m.waist,
                m.hip,
                r.split.as_str()
            )
            .unwrap();
        }
        out
    }

    /// Writes the split description, then the manifest itself.
    pub fn save(&self) -> Result<()> {
        let split_path = self.root.join(SPLIT_FILE);
        let s = &self.splits;
        let text = format!(
            "train_fraction = {}\nval_fraction = {}\nsplit_seed = {}\n",
            s.train_fraction, s.val_fraction, s.seed
        );
        fs::write(&split_path, text).at(&split_path)?;
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, self.to_csv()).at(&path)
    }

    /// Reads `manifest.csv` (and the split description, if present) from a
    /// dataset directory.
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).at(&path)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == MANIFEST_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    path,
                    line: 1,
                    msg: format!("expected header {MANIFEST_HEADER}"),
                })
            }
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: path.clone(),
                line: i + 1,
                msg,
            };
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 10 {
                return Err(parse_err(format!("expected 10 columns, got {}", cols.len())));
            }
            let num = |k: usize| -> Result<f64> { cols[k].parse().map_err(|_| parse_err(format!("bad number {:?}", cols[k]))) };
            let measurements = Measurements::new(num(4)?, num(5)?, num(6)?, num(7)?, num(8)?).map_err(|e| parse_err(e.to_string()))?;
            records.push(SubjectRecord {
                id: cols[0].to_string(),
                beta_path: cols[1].into(),
                front_path: cols[2].into(),
                side_path: cols[3].into(),
                measurements,
                split: cols[9].parse().map_err(|e: Error| parse_err(e.to_string()))?,
            });
        }
        let mut split_cfg = PipelineConfig::default();
        let split_path = root.join(SPLIT_FILE);
        if split_path.is_file() {
            split_cfg.apply_file(&split_path)?;
        }
        Ok(Self {
            root,
            records,
            splits: SplitSpec::from_config(&split_cfg),
        })
    }
}

pub fn write_beta(beta: &ShapeParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text: String = beta.as_slice().iter().map(|b| format!("{b}\n")).collect();
    fs::write(path, text).at(path)
}

/// Reads ten coefficients, one per line.
pub fn read_beta(path: impl AsRef<Path>) -> Result<ShapeParams> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).at(path)?;
    let mut vals = Vec::with_capacity(NUM_BETAS);
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        vals.push(line.trim().parse::<f64>().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("bad coefficient {line:?}"),
        })?);
    }
    ShapeParams::new(&vals)
}

fn subject_id(i: usize) -> String {
    format!("s{i:05}")
}

/// Samples `cfg.count` shapes, measures and renders each, and writes the
/// dataset under `out_dir`. The manifest is written last, so its presence
/// marks a complete dataset.
pub fn synthesize_dataset(model: &BodyModel, cfg: &PipelineConfig, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    cfg.validate()?;
    let root = out_dir.as_ref().to_path_buf();
    for sub in ["betas", "silhouettes"] {
        let d = root.join(sub);
        fs::create_dir_all(&d).at(&d)?;
    }
    save_model(model, root.join(BODY_MODEL_DIR))?;

    let spec = cfg.slice_spec();
    let splits = SplitSpec::from_config(cfg);
    let assignment = splits.assign(cfg.count);
    let shapes = sample_shapes(cfg.count, cfg.shape_stddev, cfg.seed)?;
    let res = cfg.resolution;
    let mut records = Vec::with_capacity(cfg.count);
    for (i, (beta, split)) in shapes.iter().zip(assignment).enumerate() {
        let id = subject_id(i);
        let fail = |e: Error| Error::Dataset(format!("subject {id}: {e}"));
        let mesh = model.deform(beta);
        let measurements = measure_all(&mesh, &spec, cfg.density).map_err(fail)?;
        let front = rasterize(&mesh, &ViewSpec::front(), res, res).map_err(fail)?;
        let side = rasterize(&mesh, &ViewSpec::side(), res, res).map_err(fail)?;

        let beta_rel = PathBuf::from("betas").join(format!("{id}.txt"));
        let front_rel = front_path(Path::new("silhouettes"), &id);
        let side_rel = side_path(Path::new("silhouettes"), &id);
        write_beta(beta, root.join(&beta_rel))?;
        save_silhouette(&front, root.join(&front_rel))?;
        save_silhouette(&side, root.join(&side_rel))?;
        records.push(SubjectRecord {
            id,
            beta_path: beta_rel,
            front_path: front_rel,
            side_path: side_rel,
            measurements,
            split,
        });
    }
    let manifest = DatasetManifest { root, records, splits };
    manifest.save()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_assignment_is_disjoint_and_complete() {
        let spec = SplitSpec {
            train_fraction: 0.8,
            val_fraction: 0.1,
            seed: 3,
        };
        let a = spec.assign(300);
        assert_eq!(a.iter().filter(|&&s| s == Split::Train).count(), 240);
        assert_eq!(a.iter().filter(|&&s| s == Split::Val).count(), 30);
        assert_eq!(a.iter().filter(|&&s| s == Split::Test).count(), 30);
        assert_eq!(a, spec.assign(300));
        let b = SplitSpec { seed: 4, ..spec }.assign(300);
        assert_ne!(a, b);
        assert_eq!(spec.assign(1), vec![Split::Train]);
    }

    #[test]
    fn beta_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.txt");
        let beta = ShapeParams::new(&[0.1, -2.5, 3.0, 0.0, 1e-9, 7.25, -0.3, 0.4, 0.5, -1.0]).unwrap();
        write_beta(&beta, &p).unwrap();
        assert_eq!(read_beta(&p).unwrap(), beta);
        fs::write(&p, "1\n2\n").unwrap();
        assert!(read_beta(&p).is_err());
    }

    #[test]
    fn split_names() {
        for s in [Split::Train, Split::Val, Split::Test] {
            assert_eq!(s.as_str().parse::<Split>().unwrap(), s);
        }
        assert!("holdout".parse::<Split>().is_err());
    }
}
