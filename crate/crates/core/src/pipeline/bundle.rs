//! Trained artifacts (autoencoder, PCA baseline, regression heads, body
//! model) and the end-to-end prediction path.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::PipelineConfig;
use super::dataset::{DatasetManifest, Split, SubjectRecord};
use crate::bodymodel::{load_model, save_model, BodyModel, ShapeParams, TriMesh};
use crate::embedding::train::train_autoencoder_with;
use crate::embedding::{pca_encode, pca_fit, write_loss_history, Autoencoder, EmbeddingVector, PcaModel, LATENT_DIM};
use crate::error::{Error, IoContext, Result};
use crate::regress::{build_features, FeatureVector, KrrModel, TargetKind};
use crate::silhouette::{Silhouette, SilhouettePair};

pub const AUTOENCODER_FILE: &str = "autoencoder.bin";
pub const LOSS_FILE: &str = "loss_history.csv";
pub const PCA_FILE: &str = "pca.bin";
pub const SHAPE_HEAD_FILE: &str = "shape_head.krr";
pub const MEASURE_HEAD_FILE: &str = "measure_head.krr";
pub const PCA_SHAPE_HEAD_FILE: &str = "pca_shape_head.krr";
pub const PCA_MEASURE_HEAD_FILE: &str = "pca_measure_head.krr";
pub const METADATA_FILE: &str = "metadata.cfg";
pub const BUNDLE_BODY_DIR: &str = "body_model";

/// Which silhouette embedding feeds the regressors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Embedder {
    Autoencoder,
    Pca,
}

#[derive(Debug, Clone)]
pub struct RegressionHeads {
    pub shape: KrrModel,
    pub measurements: KrrModel,
}

#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub config: PipelineConfig,
    pub autoencoder: Autoencoder<f32>,
    pub pca: PcaModel,
    pub ae_heads: RegressionHeads,
    pub pca_heads: RegressionHeads,
    pub body: BodyModel,
}

/// Outcome of one prediction: shape, girths (bust, waist, hip in mm), mesh.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub beta: ShapeParams,
    pub girths: [f64; 3],
    pub mesh: TriMesh,
}

/// Validation-split errors recorded at the end of training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub train_subjects: usize,
    pub loss_history: Vec<f64>,
    /// Bust, waist, hip MAE (mm) on the validation split, when it is non-empty.
    pub val_mae_ae: Option<[f64; 3]>,
    pub val_mae_pca: Option<[f64; 3]>,
}

impl ModelBundle {
    pub fn heads(&self, which: Embedder) -> &RegressionHeads {
        match which {
            Embedder::Autoencoder => &self.ae_heads,
            Embedder::Pca => &self.pca_heads,
        }
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.config.resolution, self.config.resolution)
    }

    pub fn embed(&self, which: Embedder, image: &Silhouette) -> Result<EmbeddingVector> {
        match which {
            Embedder::Autoencoder => self.autoencoder.encode(image),
            Embedder::Pca => pca_encode(&self.pca, image),
        }
    }

    pub fn features(&self, which: Embedder, front: &Silhouette, side: &Silhouette, height_mm: f64, weight_kg: f64) -> Result<FeatureVector> {
        for (view, img) in [("front", front), ("side", side)] {
            if img.dims() != self.resolution() {
                return Err(Error::Resolution {
                    expected: self.resolution(),
                    got: img.dims(),
                });
            }
            if img.is_empty() {
                return Err(Error::EmptySilhouette(format!("{view} view has no foreground")));
            }
        }
        build_features(&self.embed(which, front)?, &self.embed(which, side)?, height_mm, weight_kg)
    }

    /// Silhouettes plus measured height/weight → shape, girths and mesh.
    pub fn predict(&self, which: Embedder, front: &Silhouette, side: &Silhouette, height_mm: f64, weight_kg: f64) -> Result<Prediction> {
        let f = self.features(which, front, side, height_mm, weight_kg)?;
        let heads = self.heads(which);
        let beta = ShapeParams::new(&heads.shape.predict(f.values())?)?;
        let g = heads.measurements.predict(f.values())?;
        Ok(Prediction {
            beta,
            girths: [g[0], g[1], g[2]],
            mesh: self.body.deform(&beta),
        })
    }

    pub fn save(&mut self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).at(dir)?;
        self.autoencoder.save(dir.join(AUTOENCODER_FILE))?;
        self.pca.save(dir.join(PCA_FILE))?;
        self.ae_heads.shape.save(dir.join(SHAPE_HEAD_FILE))?;
        self.ae_heads.measurements.save(dir.join(MEASURE_HEAD_FILE))?;
        self.pca_heads.shape.save(dir.join(PCA_SHAPE_HEAD_FILE))?;
        self.pca_heads.measurements.save(dir.join(PCA_MEASURE_HEAD_FILE))?;
        save_model(&self.body, dir.join(BUNDLE_BODY_DIR))?;
        self.config.save(dir.join(METADATA_FILE))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let config = PipelineConfig::load(dir.join(METADATA_FILE))?;
        let autoencoder = Autoencoder::<f32>::load(dir.join(AUTOENCODER_FILE))?;
        if (autoencoder.config().width, autoencoder.config().height) != (config.resolution, config.resolution) {
            return Err(Error::Resolution {
                expected: (config.resolution, config.resolution),
                got: (autoencoder.config().width, autoencoder.config().height),
            });
        }
        let heads = |shape: &str, meas: &str| -> Result<RegressionHeads> {
            Ok(RegressionHeads {
                shape: KrrModel::load(dir.join(shape))?,
                measurements: KrrModel::load(dir.join(meas))?,
            })
        };
        Ok(Self {
            autoencoder,
            pca: PcaModel::load(dir.join(PCA_FILE))?,
            ae_heads: heads(SHAPE_HEAD_FILE, MEASURE_HEAD_FILE)?,
            pca_heads: heads(PCA_SHAPE_HEAD_FILE, PCA_MEASURE_HEAD_FILE)?,
            body: load_model(dir.join(BUNDLE_BODY_DIR))?,
            config,
        })
    }
}

fn load_split(manifest: &DatasetManifest, split: Split, resolution: usize) -> Result<Vec<(&SubjectRecord, SilhouettePair)>> {
    manifest
        .subjects(split)
        .into_iter()
        .map(|rec| {
            let pair = manifest.load_pair(rec)?;
            if pair.dims() != (resolution, resolution) {
                return Err(Error::Resolution {
                    expected: (resolution, resolution),
                    got: pair.dims(),
                });
            }
            Ok((rec, pair))
        })
        .collect()
}

fn fit_heads(features: &[FeatureVector], betas: &[Vec<f64>], girths: &[Vec<f64>], cfg: &PipelineConfig) -> Result<RegressionHeads> {
    Ok(RegressionHeads {
        shape: KrrModel::fit(features, betas, cfg.kernel(), cfg.krr_lambda, TargetKind::ShapeParams)?,
        measurements: KrrModel::fit(features, girths, cfg.kernel(), cfg.krr_lambda, TargetKind::Measurements)?,
    })
}

fn split_features(
    which: Embedder,
    ae: &Autoencoder<f32>,
    pca: &PcaModel,
    data: &[(&SubjectRecord, SilhouettePair)],
) -> Result<Vec<FeatureVector>> {
    data.iter()
        .map(|(rec, pair)| {
            let (zf, zs) = match which {
                Embedder::Autoencoder => (ae.encode(&pair.front)?, ae.encode(&pair.side)?),
                Embedder::Pca => (pca_encode(pca, &pair.front)?, pca_encode(pca, &pair.side)?),
            };
            build_features(&zf, &zs, rec.measurements.height, rec.measurements.weight)
        })
        .collect()
}

/// Mean absolute error per column.
pub fn mean_absolute_error(pred: &[[f64; 3]], truth: &[[f64; 3]]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (p, t) in pred.iter().zip(truth) {
        for k in 0..3 {
            out[k] += (p[k] - t[k]).abs();
        }
    }
    out.map(|s| s / pred.len().max(1) as f64)
}

/// Trains every component on the train split and writes the bundle to
/// `out_dir`. `progress` receives one line per training milestone.
pub fn train_all(manifest: &DatasetManifest, cfg: &PipelineConfig, out_dir: impl AsRef<Path>, mut progress: impl FnMut(&str)) -> Result<(ModelBundle, TrainSummary)> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).at(out_dir)?;
    let train = load_split(manifest, Split::Train, cfg.resolution)?;
    if train.is_empty() {
        return Err(Error::Dataset("train split is empty".into()));
    }
    let pairs: Vec<SilhouettePair> = train.iter().map(|(_, p)| p.clone()).collect();

    progress(&format!("training autoencoder on {} subjects", pairs.len()));
    let outcome = train_autoencoder_with::<f32>(&pairs, cfg.ae_config(), &cfg.train_config(), |epoch, loss| {
        progress(&format!("epoch {epoch}/{}: mean loss {loss:.5}", cfg.epochs))
    })?;
    let autoencoder = outcome.model;
    write_loss_history(&outcome.loss_history, out_dir.join(LOSS_FILE))?;

    progress("fitting PCA baseline");
    let mut images: Vec<&Silhouette> = pairs.iter().map(|p| &p.front).collect();
    images.extend(pairs.iter().map(|p| &p.side));
    let pca = pca_fit(&images, LATENT_DIM)?;

    progress("fitting regression heads");
    let betas: Vec<Vec<f64>> = train.iter().map(|(r, _)| manifest.load_beta(r).map(|b| b.as_slice().to_vec())).collect::<Result<_>>()?;
    let girths: Vec<Vec<f64>> = train.iter().map(|(r, _)| r.measurements.girths().to_vec()).collect();
    let ae_heads = fit_heads(&split_features(Embedder::Autoencoder, &autoencoder, &pca, &train)?, &betas, &girths, cfg)?;
    let pca_heads = fit_heads(&split_features(Embedder::Pca, &autoencoder, &pca, &train)?, &betas, &girths, cfg)?;

    let mut bundle = ModelBundle {
        config: cfg.clone(),
        autoencoder,
        pca,
        ae_heads,
        pca_heads,
        body: manifest.load_body_model()?,
    };
    bundle.save(out_dir)?;

    let val = load_split(manifest, Split::Val, cfg.resolution)?;
    let val_mae = |which: Embedder| -> Result<Option<[f64; 3]>> {
        if val.is_empty() {
            return Ok(None);
        }
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for (rec, pair) in &val {
            let m = &rec.measurements;
            pred.push(bundle.predict(which, &pair.front, &pair.side, m.height, m.weight)?.girths);
            truth.push(m.girths());
        }
        Ok(Some(mean_absolute_error(&pred, &truth)))
    };
    let summary = TrainSummary {
        train_subjects: pairs.len(),
        loss_history: outcome.loss_history,
        val_mae_ae: val_mae(Embedder::Autoencoder)?,
        val_mae_pca: val_mae(Embedder::Pca)?,
    };
    let mut text = String::new();
    writeln!(text, "train_subjects = {}", summary.train_subjects).unwrap();
    for (name, mae) in [("ae", summary.val_mae_ae), ("pca", summary.val_mae_pca)] {
        if let Some([b, w, h]) = mae {
            writeln!(text, "val_mae_{name}_mm = bust {b:.3}, waist {w:.3}, hip {h:.3}").unwrap();
        }
    }
    let p = out_dir.join("train_summary.txt");
    fs::write(&p, text).at(&p)?;
    Ok((bundle, summary))
}
