//! Dataset synthesis, training, prediction and evaluation on toy-sized runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use sil2shape::bodymodel::{load_mesh, make_procedural_model, ProceduralBodyConfig};
use sil2shape::embedding::Autoencoder;
use sil2shape::error::Error;
use sil2shape::meshmetrics::measure_all;
use sil2shape::pipeline::bundle::{AUTOENCODER_FILE, LOSS_FILE, MEASURE_HEAD_FILE, PCA_FILE, SHAPE_HEAD_FILE};
use sil2shape::pipeline::dataset::read_beta;
use sil2shape::pipeline::{
    evaluate, mean_absolute_error, score_predictor, synthesize_dataset, train_all, DatasetManifest, Embedder, ModelBundle, PipelineConfig,
    Split, TrainSummary,
};
use sil2shape::regress::KrrModel;
use sil2shape::silhouette::{load_silhouette, Silhouette};

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn toy_config(count: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.count = count;
    cfg.seed = 7;
    cfg.epochs = 5;
    cfg.learning_rate = 1e-2;
    cfg
}

fn gen(dir: &Path, cfg: &PipelineConfig) -> DatasetManifest {
    let model = make_procedural_model(&ProceduralBodyConfig::default()).unwrap();
    synthesize_dataset(&model, cfg, dir).unwrap()
}

struct Toy {
    data: PathBuf,
    model: PathBuf,
    manifest: DatasetManifest,
    bundle: ModelBundle,
    summary: TrainSummary,
}

/// One 20-subject run shared by the tests below.
fn toy() -> &'static Toy {
    static TOY: OnceLock<Toy> = OnceLock::new();
    TOY.get_or_init(|| {
        let root = scratch("toy_run");
        let data = root.join("data");
        let model = root.join("model");
        let cfg = toy_config(20);
        let manifest = gen(&data, &cfg);
        let (bundle, summary) = train_all(&manifest, &cfg, &model, |_| {}).unwrap();
        Toy { data, model, manifest, bundle, summary }
    })
}

fn all_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synthesis_is_byte_identical_across_runs() {
    let cfg = toy_config(10);
    let (a, b) = (scratch("det_a"), scratch("det_b"));
    gen(&a, &cfg);
    gen(&b, &cfg);
    let (fa, fb) = (all_files(&a), all_files(&b));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
}

#[test]
fn manifest_bookkeeping_and_label_sanity() {
    let dir = scratch("bookkeeping");
    let m = gen(&dir, &toy_config(10));
    assert_eq!(m.records.len(), 10);
    let mut images: Vec<&Path> = m.records.iter().flat_map(|r| [r.front_path.as_path(), r.side_path.as_path()]).collect();
    images.sort();
    images.dedup();
    assert_eq!(images.len(), 20);
    for img in images {
        assert!(m.path(img).is_file(), "{} missing", img.display());
    }
    for r in &m.records {
        let g = &r.measurements;
        assert!(g.height > 0.0 && g.weight > 0.0 && g.bust > 0.0 && g.waist > 0.0 && g.hip > 0.0, "{}", r.id);
        assert!(g.waist <= g.hip + 400.0, "{}: waist {} hip {}", r.id, g.waist, g.hip);
    }
    m.validate().unwrap();
}

#[test]
fn labels_match_remeasured_meshes() {
    let dir = scratch("labels");
    let cfg = toy_config(4);
    let m = gen(&dir, &cfg);
    let body = m.load_body_model().unwrap();
    for r in &m.records {
        let mesh = body.deform(&m.load_beta(r).unwrap());
        let again = measure_all(&mesh, &cfg.slice_spec(), cfg.density).unwrap();
        assert!((again.height - r.measurements.height).abs() < 1e-6);
        assert!((again.hip - r.measurements.hip).abs() < 1e-6);
    }
}

#[test]
fn toy_run_writes_every_artifact() {
    let toy = toy();
    for f in [AUTOENCODER_FILE, PCA_FILE, SHAPE_HEAD_FILE, MEASURE_HEAD_FILE, LOSS_FILE] {
        assert!(toy.model.join(f).is_file(), "{f} missing");
    }
    assert_eq!(toy.summary.loss_history.len(), 5);
    // Both feature kinds are scored on the validation split.
    assert!(toy.summary.val_mae_ae.is_some());
    assert!(toy.summary.val_mae_pca.is_some());
}

#[test]
fn retraining_with_same_seeds_reproduces_heads() {
    let toy = toy();
    let cfg = toy_config(20);
    let (again, _) = train_all(&toy.manifest, &cfg, scratch("toy_rerun"), |_| {}).unwrap();
    for which in [Embedder::Autoencoder, Embedder::Pca] {
        assert_eq!(
            toy.bundle.heads(which).shape.dual_coefficients(),
            again.heads(which).shape.dual_coefficients()
        );
        assert_eq!(
            toy.bundle.heads(which).measurements.dual_coefficients(),
            again.heads(which).measurements.dual_coefficients()
        );
    }
}

#[test]
fn training_subjects_fit_better_than_the_mean() {
    // With a ridge term the heads do not interpolate, but on their own training
    // subjects they must beat the constant mean predictor by a wide margin.
    let toy = toy();
    let train = toy.manifest.subjects(Split::Train);
    let labels: Vec<[f64; 3]> = train.iter().map(|r| r.measurements.girths()).collect();
    let mean: Vec<f64> = (0..3).map(|k| labels.iter().map(|g| g[k]).sum::<f64>() / labels.len() as f64).collect();
    let (mut fit, mut base) = (0.0, 0.0);
    for (rec, want) in train.iter().zip(&labels) {
        let pair = toy.manifest.load_pair(rec).unwrap();
        let m = &rec.measurements;
        let p = toy.bundle.predict(Embedder::Autoencoder, &pair.front, &pair.side, m.height, m.weight).unwrap();
        for k in 0..3 {
            fit += (p.girths[k] - want[k]).abs();
            base += (mean[k] - want[k]).abs();
        }
    }
    assert!(fit < 0.5 * base, "training MAE sum {fit:.1} vs mean predictor {base:.1}");
}

#[test]
fn prediction_rejects_bad_inputs_and_keeps_topology() {
    let toy = toy();
    let rec = toy.manifest.subjects(Split::Train)[0];
    let pair = toy.manifest.load_pair(rec).unwrap();
    let (w, h) = pair.dims();
    let blank = Silhouette::blank(w, h);
    let err = toy.bundle.predict(Embedder::Autoencoder, &blank, &pair.side, 1700.0, 70.0).unwrap_err();
    assert!(matches!(err, Error::EmptySilhouette(_)), "{err:?}");

    let small = Silhouette::blank(32, 32);
    let err = toy.bundle.predict(Embedder::Autoencoder, &small, &small, 1700.0, 70.0).unwrap_err();
    assert!(matches!(err, Error::Resolution { .. }), "{err:?}");

    let p = toy.bundle.predict(Embedder::Pca, &pair.front, &pair.side, 1700.0, 70.0).unwrap();
    let template = toy.bundle.body.template();
    assert_eq!(p.mesh.faces(), template.faces());
    assert_eq!(p.mesh.vertices.len(), template.vertices.len());
}

#[test]
fn overfit_train_split_has_small_vertex_error() {
    let toy = toy();
    let report = evaluate(&toy.bundle, &toy.manifest, Split::Train, None).unwrap();
    assert_eq!(report.samples, toy.manifest.subjects(Split::Train).len());
    assert!(report.per_vertex_mm < 5.0, "{}", report.per_vertex_mm);
}

#[test]
fn injected_ground_truth_scores_zero() {
    let toy = toy();
    let scores = score_predictor(&toy.bundle, &toy.manifest, Split::Test, |rec, _| {
        Ok((toy.manifest.load_beta(rec)?, rec.measurements.girths()))
    })
    .unwrap();
    let pred: Vec<[f64; 3]> = scores.iter().map(|(s, _)| s.predicted).collect();
    let truth: Vec<[f64; 3]> = scores.iter().map(|(s, _)| s.truth).collect();
    assert_eq!(mean_absolute_error(&pred, &truth), [0.0; 3]);
    for (s, per_vertex) in &scores {
        assert_eq!(s.per_vertex_mm, 0.0);
        assert!(per_vertex.iter().all(|&d| d == 0.0));
    }
}

#[test]
fn mae_matches_hand_computation_on_three_subjects() {
    let toy = toy();
    let subjects = toy.manifest.subjects(Split::Train);
    let picked: Vec<String> = subjects.iter().take(3).map(|r| r.id.clone()).collect();
    // Known residuals per picked subject; everyone else predicted exactly.
    let offsets = [[10.0, -4.0, 0.0], [-2.0, 6.0, 3.0], [0.0, -8.0, -9.0]];
    let scores = score_predictor(&toy.bundle, &toy.manifest, Split::Train, |rec, _| {
        let mut g = rec.measurements.girths();
        if let Some(i) = picked.iter().position(|id| *id == rec.id) {
            for k in 0..3 {
                g[k] += offsets[i][k];
            }
        }
        Ok((toy.manifest.load_beta(rec)?, g))
    })
    .unwrap();
    let three: Vec<_> = scores.iter().filter(|(s, _)| picked.contains(&s.id)).map(|(s, _)| s.clone()).collect();
    assert_eq!(three.len(), 3);
    let pred: Vec<[f64; 3]> = three.iter().map(|s| s.predicted).collect();
    let truth: Vec<[f64; 3]> = three.iter().map(|s| s.truth).collect();
    let mae = mean_absolute_error(&pred, &truth);
    let want = [12.0 / 3.0, 18.0 / 3.0, 12.0 / 3.0];
    for k in 0..3 {
        assert!((mae[k] - want[k]).abs() < 1e-9, "{mae:?}");
    }
}

#[test]
fn everything_written_reloads() {
    let toy = toy();
    let report = evaluate(&toy.bundle, &toy.manifest, Split::Test, Some(&toy.model)).unwrap();

    // Dataset side.
    let manifest = DatasetManifest::load(&toy.data).unwrap();
    assert_eq!(manifest.records, toy.manifest.records);
    let rec = &manifest.records[0];
    assert_eq!(read_beta(manifest.path(&rec.beta_path)).unwrap(), manifest.load_beta(rec).unwrap());
    let front = load_silhouette(manifest.path(&rec.front_path)).unwrap();
    assert_eq!(front, manifest.load_pair(rec).unwrap().front);

    // Bundle side: reloaded components behave identically.
    let bundle = ModelBundle::load(&toy.model).unwrap();
    let pair = manifest.load_pair(rec).unwrap();
    let m = &rec.measurements;
    for which in [Embedder::Autoencoder, Embedder::Pca] {
        let a = toy.bundle.predict(which, &pair.front, &pair.side, m.height, m.weight).unwrap();
        let b = bundle.predict(which, &pair.front, &pair.side, m.height, m.weight).unwrap();
        assert_eq!(a.beta, b.beta);
        assert_eq!(a.girths, b.girths);
    }
    let ae = Autoencoder::<f32>::load(toy.model.join(AUTOENCODER_FILE)).unwrap();
    assert_eq!(ae.encode(&front).unwrap().values(), toy.bundle.autoencoder.encode(&front).unwrap().values());
    let head = KrrModel::load(toy.model.join(SHAPE_HEAD_FILE)).unwrap();
    assert_eq!(head.dual_coefficients(), toy.bundle.ae_heads.shape.dual_coefficients());
    assert_eq!(PipelineConfig::load(toy.model.join("metadata.cfg")).unwrap(), toy.bundle.config);

    let losses = fs::read_to_string(toy.model.join(LOSS_FILE)).unwrap();
    let rows: Vec<f64> = losses.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(rows.len(), toy.summary.loss_history.len());

    // Evaluation outputs.
    let csv = fs::read_to_string(toy.model.join("eval_test.csv")).unwrap();
    let samples: f64 = csv.lines().find(|l| l.starts_with("samples,")).unwrap()[8..].parse().unwrap();
    assert_eq!(samples as usize, report.samples);
    let subjects_csv = fs::read_to_string(toy.model.join("eval_test_subjects.csv")).unwrap();
    assert_eq!(subjects_csv.lines().count(), report.samples + 1);
    for s in &report.subjects {
        let heat = fs::read_to_string(toy.model.join("heatmaps_test").join(format!("{}_heat.txt", s.id))).unwrap();
        let values: Vec<f64> = heat.lines().map(|l| l.parse().unwrap()).collect();
        let mesh = load_mesh(toy.model.join("heatmaps_test").join(format!("{}_pred.obj", s.id))).unwrap();
        assert_eq!(values.len(), mesh.vertices.len());
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((mean - s.per_vertex_mm).abs() < 1e-9);
    }
}
