use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sil2shape::bodymodel::{load_mesh, load_model, make_procedural_model, save_mesh, BodyModel, ProceduralBodyConfig};
use sil2shape::meshmetrics::measure_all;
use sil2shape::pipeline::{evaluate, synthesize_dataset, train_all, DatasetManifest, Embedder, ModelBundle, PipelineConfig, Split};
use sil2shape::silhouette::{load_silhouette, rasterize, save_silhouette, ViewSpec};

/// File written next to every run's outputs with the configuration actually used.
const SNAPSHOT_FILE: &str = "effective_config.cfg";

#[derive(Parser, Debug)]
#[command(name = "sil2shape", version, about = "Body shape and clothing measurements from two binary silhouettes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key=value configuration file; later flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a labelled dataset of bodies and their front/side silhouettes.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of subjects.
        #[arg(long)]
        count: Option<usize>,
        /// Shape sampling seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Square image size in pixels (multiple of 32).
        #[arg(long)]
        resolution: Option<usize>,
        /// Body model directory; the built-in procedural body when omitted.
        #[arg(long, value_name = "DIR")]
        body_model: Option<PathBuf>,
    },
    /// Print height, weight and bust/waist/hip circumferences of a mesh.
    Measure {
        #[command(flatten)]
        common: Common,
        /// Closed triangle mesh (OBJ), meters, y up.
        #[arg(long)]
        mesh: PathBuf,
    },
    /// Render the front and side silhouettes of a mesh as PGM images.
    Render {
        #[command(flatten)]
        common: Common,
        /// Closed triangle mesh (OBJ).
        #[arg(long)]
        mesh: PathBuf,
        /// Output directory; writes `<name>_front.pgm` and `<name>_side.pgm`.
        #[arg(long)]
        out: PathBuf,
        /// Square image size in pixels.
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Train the autoencoder, PCA baseline and regression heads on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory produced by gen-data.
        #[arg(long)]
        data: PathBuf,
        /// Bundle output directory [default: <data>/model].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Autoencoder epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Adam learning rate.
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Predict shape parameters, measurements and a mesh from two silhouettes.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Trained bundle directory.
        #[arg(long)]
        model: PathBuf,
        /// Front-view silhouette (PGM).
        #[arg(long)]
        front: PathBuf,
        /// Side-view silhouette (PGM).
        #[arg(long)]
        side: PathBuf,
        /// Subject height in millimeters.
        #[arg(long)]
        height_mm: f64,
        /// Subject weight in kilograms.
        #[arg(long)]
        weight_kg: f64,
        /// Use the PCA baseline features instead of the autoencoder.
        #[arg(long)]
        pca: bool,
        /// Directory for the predicted mesh and the run record.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a trained bundle on one split of a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Dataset directory produced by gen-data.
        #[arg(long)]
        data: PathBuf,
        /// Trained bundle directory [default: <data>/model].
        #[arg(long)]
        model: Option<PathBuf>,
        /// Split to evaluate: train, val or test.
        #[arg(long, default_value = "test")]
        split: Split,
        /// Report directory [default: the bundle directory].
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failures split by exit code: bad invocation vs. bad data or model.
enum Failure {
    Usage(String),
    Data(sil2shape::error::Error),
}

impl From<sil2shape::error::Error> for Failure {
    fn from(e: sil2shape::error::Error) -> Self {
        Failure::Data(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Config file, then `--set` overrides, then dedicated flags.
fn build_config(common: &Common, flags: &[(&str, Option<String>)]) -> Result<PipelineConfig, Failure> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    for item in &common.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
        cfg.set(key.trim(), value.trim()).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v).map_err(|e| Failure::Usage(e.to_string()))?;
        }
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn snapshot(cfg: &PipelineConfig, dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|source| sil2shape::error::Error::Io { path: dir.to_path_buf(), source })?;
    cfg.save(dir.join(SNAPSHOT_FILE))?;
    Ok(())
}

fn show<T: ToString>(v: Option<T>) -> Option<String> {
    v.map(|v| v.to_string())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenData { common, out, count, seed, resolution, body_model } => {
            let cfg = build_config(&common, &[("count", show(count)), ("seed", show(seed)), ("resolution", show(resolution))])?;
            let model: BodyModel = match body_model {
                Some(dir) => load_model(dir)?,
                None => make_procedural_model(&ProceduralBodyConfig::default())?,
            };
            snapshot(&cfg, &out)?;
            let manifest = synthesize_dataset(&model, &cfg, &out)?;
            println!("wrote {} subjects to {}", manifest.records.len(), out.display());
        }
        Command::Measure { common, mesh } => {
            let cfg = build_config(&common, &[])?;
            let m = measure_all(&load_mesh(&mesh)?, &cfg.slice_spec(), cfg.density)?;
            print!("{}", m.to_record());
        }
        Command::Render { common, mesh, out, resolution } => {
            let cfg = build_config(&common, &[("resolution", show(resolution))])?;
            let body = load_mesh(&mesh)?;
            snapshot(&cfg, &out)?;
            let stem = mesh.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh");
            for (view, suffix) in [(ViewSpec::front(), "front"), (ViewSpec::side(), "side")] {
                let sil = rasterize(&body, &view, cfg.resolution, cfg.resolution)?;
                let path = out.join(format!("{stem}_{suffix}.pgm"));
                save_silhouette(&sil, &path)?;
                println!("{}", path.display());
            }
        }
        Command::Train { common, data, out, epochs, learning_rate } => {
            let cfg = build_config(&common, &[("epochs", show(epochs)), ("learning_rate", show(learning_rate))])?;
            let out = out.unwrap_or_else(|| data.join("model"));
            let manifest = DatasetManifest::load(&data)?;
            snapshot(&cfg, &out)?;
            let (_, summary) = train_all(&manifest, &cfg, &out, |line| eprintln!("{line}"))?;
            for (name, mae) in [("autoencoder", summary.val_mae_ae), ("pca", summary.val_mae_pca)] {
                if let Some([b, w, h]) = mae {
                    println!("val MAE ({name}): bust {b:.2} mm, waist {w:.2} mm, hip {h:.2} mm");
                }
            }
            println!("bundle written to {}", out.display());
        }
        Command::Predict { common, model, front, side, height_mm, weight_kg, pca, out } => {
            if !(height_mm > 0.0 && weight_kg > 0.0) {
                return Err(Failure::Usage("--height-mm and --weight-kg must be positive".into()));
            }
            let bundle = ModelBundle::load(&model)?;
            // The bundle's own settings are authoritative; the file/overrides only add to the record.
            let cfg = build_config(&common, &[])?;
            let which = if pca { Embedder::Pca } else { Embedder::Autoencoder };
            let pred = bundle.predict(which, &load_silhouette(&front)?, &load_silhouette(&side)?, height_mm, weight_kg)?;
            let betas: Vec<String> = pred.beta.as_slice().iter().map(|b| format!("{b:.6}")).collect();
            println!("beta={}", betas.join(","));
            let [b, w, h] = pred.girths;
            println!("bust_mm={b:.3}\nwaist_mm={w:.3}\nhip_mm={h:.3}");
            if let Some(dir) = out {
                snapshot(&cfg, &dir)?;
                let path = dir.join("predicted.obj");
                save_mesh(&pred.mesh, &path)?;
                println!("mesh={}", path.display());
            }
        }
        Command::Eval { common, data, model, split, out } => {
            let model = model.unwrap_or_else(|| data.join("model"));
            let cfg = build_config(&common, &[])?;
            let bundle = ModelBundle::load(&model)?;
            let manifest = DatasetManifest::load(&data)?;
            let out = out.unwrap_or_else(|| model.clone());
            snapshot(&cfg, &out)?;
            let report = evaluate(&bundle, &manifest, split, Some(&out))?;
            print!("{}", report.summary());
        }
    }
    Ok(())
}
