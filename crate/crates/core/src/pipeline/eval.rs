//! Held-out evaluation: girth MAE, per-vertex mesh error, reconstruction
//! accuracy of both embeddings, and the predict-the-training-mean baseline.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::bundle::{mean_absolute_error, Embedder, ModelBundle};
use super::dataset::{DatasetManifest, Split, SubjectRecord};
use crate::bodymodel::{save_mesh, ShapeParams, NUM_BETAS};
use crate::embedding::{pca_decode, pca_encode};
use crate::error::{Error, IoContext, Result};
use crate::meshmetrics::per_vertex_error;
use crate::silhouette::{reconstruction_accuracy, SilhouettePair};

/// Per-subject outcome of one predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectScore {
    pub id: String,
    pub truth: [f64; 3],
    pub predicted: [f64; 3],
    pub per_vertex_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub split: Split,
    pub samples: usize,
    /// Bust, waist, hip MAE in mm with autoencoder features.
    pub mae_mm: [f64; 3],
    pub pca_mae_mm: [f64; 3],
    /// Predicting the training-split mean girths.
    pub baseline_mae_mm: [f64; 3],
    pub per_vertex_mm: f64,
    pub pca_per_vertex_mm: f64,
    /// Deforming with the training-split mean β.
    pub baseline_per_vertex_mm: f64,
    /// Front, side.
    pub ae_pixel_accuracy: [f64; 2],
    pub pca_pixel_accuracy: [f64; 2],
    pub subjects: Vec<SubjectScore>,
}

const GIRTHS: [&str; 3] = ["bust", "waist", "hip"];

impl EvalReport {
    /// `metric,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let mut row = |k: String, v: f64| writeln!(out, "{k},{v}").unwrap();
        row("samples".into(), self.samples as f64);
        for (prefix, vals) in [("mae", self.mae_mm), ("pca_mae", self.pca_mae_mm), ("baseline_mae", self.baseline_mae_mm)] {
            for (name, v) in GIRTHS.iter().zip(vals) {
                row(format!("{prefix}_{name}_mm"), v);
            }
        }
        row("per_vertex_mm".into(), self.per_vertex_mm);
        row("pca_per_vertex_mm".into(), self.pca_per_vertex_mm);
        row("baseline_per_vertex_mm".into(), self.baseline_per_vertex_mm);
        row("ae_pixel_accuracy_front".into(), self.ae_pixel_accuracy[0]);
        row("ae_pixel_accuracy_side".into(), self.ae_pixel_accuracy[1]);
        row("pca_pixel_accuracy_front".into(), self.pca_pixel_accuracy[0]);
        row("pca_pixel_accuracy_side".into(), self.pca_pixel_accuracy[1]);
        out
    }

    pub fn subjects_csv(&self) -> String {
        let mut out = String::from("id,bust_true_mm,waist_true_mm,hip_true_mm,bust_pred_mm,waist_pred_mm,hip_pred_mm,per_vertex_mm\n");
        for s in &self.subjects {
            let [a, b, c] = s.truth;
            let [d, e, f] = s.predicted;
            writeln!(out, "{},{a},{b},{c},{d},{e},{f},{}", s.id, s.per_vertex_mm).unwrap();
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let fmt3 = |v: [f64; 3]| format!("bust {:8.2}  waist {:8.2}  hip {:8.2}", v[0], v[1], v[2]);
        writeln!(out, "split {} ({} subjects)", self.split.as_str(), self.samples).unwrap();
        writeln!(out, "girth MAE, mm").unwrap();
        writeln!(out, "  autoencoder  {}", fmt3(self.mae_mm)).unwrap();
        writeln!(out, "  PCA          {}", fmt3(self.pca_mae_mm)).unwrap();
        writeln!(out, "  mean         {}", fmt3(self.baseline_mae_mm)).unwrap();
        writeln!(out, "per-vertex mean error, mm").unwrap();
        writeln!(
            out,
            "  autoencoder {:.3}  PCA {:.3}  mean shape {:.3}",
            self.per_vertex_mm, self.pca_per_vertex_mm, self.baseline_per_vertex_mm
        )
        .unwrap();
        writeln!(out, "reconstruction pixel accuracy (front / side)").unwrap();
        writeln!(out, "  autoencoder {:.4} / {:.4}", self.ae_pixel_accuracy[0], self.ae_pixel_accuracy[1]).unwrap();
        writeln!(out, "  PCA         {:.4} / {:.4}", self.pca_pixel_accuracy[0], self.pca_pixel_accuracy[1]).unwrap();
        out
    }
}

/// Scores `predict(record, pair) -> (β̂, girths)` on a split. The predictor
/// is a parameter so that known answers can be injected.
pub fn score_predictor(
    bundle: &ModelBundle,
    manifest: &DatasetManifest,
    split: Split,
    mut predict: impl FnMut(&SubjectRecord, &SilhouettePair) -> Result<(ShapeParams, [f64; 3])>,
) -> Result<Vec<(SubjectScore, Vec<f64>)>> {
    let subjects = manifest.subjects(split);
    if subjects.is_empty() {
        return Err(Error::Dataset(format!("split {} is empty", split.as_str())));
    }
    subjects
        .into_iter()
        .map(|rec| {
            let pair = manifest.load_pair(rec)?;
            let (beta, girths) = predict(rec, &pair)?;
            let truth_mesh = bundle.body.deform(&manifest.load_beta(rec)?);
            let err = per_vertex_error(&bundle.body.deform(&beta), &truth_mesh)?;
            Ok((
                SubjectScore {
                    id: rec.id.clone(),
                    truth: rec.measurements.girths(),
                    predicted: girths,
                    per_vertex_mm: err.mean_mm,
                },
                err.per_vertex_mm,
            ))
        })
        .collect()
}

fn summarize(scores: &[SubjectScore]) -> ([f64; 3], f64) {
    let pred: Vec<[f64; 3]> = scores.iter().map(|s| s.predicted).collect();
    let truth: Vec<[f64; 3]> = scores.iter().map(|s| s.truth).collect();
    let pv = scores.iter().map(|s| s.per_vertex_mm).sum::<f64>() / scores.len() as f64;
    (mean_absolute_error(&pred, &truth), pv)
}

/// Full evaluation of a bundle on one split. When `out_dir` is given, writes
/// `eval_<split>.csv`, a per-subject CSV, a text summary, and for every
/// subject the predicted mesh with a per-vertex error file `<id>_heat.txt`.
pub fn evaluate(bundle: &ModelBundle, manifest: &DatasetManifest, split: Split, out_dir: Option<&Path>) -> Result<EvalReport> {
    let model_pred = |which: Embedder| {
        move |rec: &SubjectRecord, pair: &SilhouettePair| -> Result<(ShapeParams, [f64; 3])> {
            let m = &rec.measurements;
            let p = bundle.predict(which, &pair.front, &pair.side, m.height, m.weight)?;
            Ok((p.beta, p.girths))
        }
    };
    let ae = score_predictor(bundle, manifest, split, model_pred(Embedder::Autoencoder))?;
    let pca = score_predictor(bundle, manifest, split, model_pred(Embedder::Pca))?;

    let train = manifest.subjects(Split::Train);
    if train.is_empty() {
        return Err(Error::Dataset("train split is empty; no baseline available".into()));
    }
    let mut mean_beta = [0.0; NUM_BETAS];
    let mut mean_girths = [0.0; 3];
    for rec in &train {
        for (m, b) in mean_beta.iter_mut().zip(manifest.load_beta(rec)?.as_slice()) {
            *m += b / train.len() as f64;
        }
        for (m, g) in mean_girths.iter_mut().zip(rec.measurements.girths()) {
            *m += g / train.len() as f64;
        }
    }
    let mean_beta = ShapeParams::new(&mean_beta)?;
    let baseline = score_predictor(bundle, manifest, split, |_, _| Ok((mean_beta, mean_girths)))?;

    let mut acc = [[0.0; 2]; 2];
    for rec in manifest.subjects(split) {
        let pair = manifest.load_pair(rec)?;
        for (v, img) in [&pair.front, &pair.side].into_iter().enumerate() {
            acc[0][v] += reconstruction_accuracy(&bundle.autoencoder.reconstruct(img)?, img)?;
            acc[1][v] += reconstruction_accuracy(&pca_decode(&bundle.pca, &pca_encode(&bundle.pca, img)?)?, img)?;
        }
    }
    let n = ae.len();
    let acc = acc.map(|a| a.map(|s| s / n as f64));

    let ae_scores: Vec<SubjectScore> = ae.iter().map(|(s, _)| s.clone()).collect();
    let pca_scores: Vec<SubjectScore> = pca.into_iter().map(|(s, _)| s).collect();
    let base_scores: Vec<SubjectScore> = baseline.into_iter().map(|(s, _)| s).collect();
    let (mae_mm, per_vertex_mm) = summarize(&ae_scores);
    let (pca_mae_mm, pca_per_vertex_mm) = summarize(&pca_scores);
    let (baseline_mae_mm, baseline_per_vertex_mm) = summarize(&base_scores);
    let report = EvalReport {
        split,
        samples: n,
        mae_mm,
        pca_mae_mm,
        baseline_mae_mm,
        per_vertex_mm,
        pca_per_vertex_mm,
        baseline_per_vertex_mm,
        ae_pixel_accuracy: acc[0],
        pca_pixel_accuracy: acc[1],
        subjects: ae_scores,
    };

    if let Some(dir) = out_dir {
        let name = split.as_str();
        let heat_dir = dir.join(format!("heatmaps_{name}"));
        fs::create_dir_all(&heat_dir).at(&heat_dir)?;
        let write = |file: String, text: String| {
            let p = dir.join(file);
            fs::write(&p, text).at(&p)
        };
        write(format!("eval_{name}.csv"), report.to_csv())?;
        write(format!("eval_{name}_subjects.csv"), report.subjects_csv())?;
        write(format!("eval_{name}.txt"), report.summary())?;
        for (score, per_vertex) in &ae {
            let rec = manifest.records.iter().find(|r| r.id == score.id).expect("scored subject is in the manifest");
            let pair = manifest.load_pair(rec)?;
            let m = &rec.measurements;
            let p = bundle.predict(Embedder::Autoencoder, &pair.front, &pair.side, m.height, m.weight)?;
            save_mesh(&p.mesh, heat_dir.join(format!("{}_pred.obj", score.id)))?;
            let text: String = per_vertex.iter().map(|d| format!("{d}\n")).collect();
            let hp = heat_dir.join(format!("{}_heat.txt", score.id));
            fs::write(&hp, text).at(&hp)?;
        }
    }
    Ok(report)
}
