use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sil2shape::bodymodel::save_mesh;
use sil2shape::bodymodel::shapes::{cuboid, unit_cube};
use nalgebra::Point3;
use sil2shape::meshmetrics::SliceSpec;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sil2shape"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn record_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {text}"))
        .parse()
        .unwrap()
}

#[test]
fn gen_train_eval_end_to_end() {
    let root = scratch("cli_e2e");
    let data = root.join("d");
    let d = data.to_str().unwrap();
    ok(&["gen-data", "--count", "10", "--seed", "7", "--out", d]);
    assert!(data.join("manifest.csv").is_file());
    assert!(data.join("effective_config.cfg").is_file());

    ok(&["train", "--data", d, "--set", "epochs=2", "--set", "learning_rate=0.01"]);
    let model = data.join("model");
    assert!(model.join("autoencoder.bin").is_file());
    let snapshot = fs::read_to_string(model.join("effective_config.cfg")).unwrap();
    assert!(snapshot.lines().any(|l| l.replace(' ', "") == "epochs=2"), "{snapshot}");

    let summary = ok(&["eval", "--data", d, "--split", "val"]);
    assert!(summary.contains("split val"), "{summary}");
    assert!(model.join("eval_val.csv").is_file());

    // Predict from one of the dataset's own image pairs.
    let front = data.join("silhouettes").join("s00000_front.pgm");
    let side = data.join("silhouettes").join("s00000_side.pgm");
    let out_dir = root.join("pred");
    let text = ok(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--front",
        front.to_str().unwrap(),
        "--side",
        side.to_str().unwrap(),
        "--height-mm",
        "1750",
        "--weight-kg",
        "70",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(record_value(&text, "hip_mm") > 0.0);
    assert!(out_dir.join("predicted.obj").is_file());
}

#[test]
fn measure_prints_box_record() {
    // A body-sized box: every horizontal section is a 0.3 m x 0.2 m rectangle.
    let root = scratch("cli_measure");
    let body = root.join("box.obj");
    save_mesh(&cuboid(Point3::new(0.0, 0.0, 0.0), Point3::new(0.3, 1.7, 0.2)), &body).unwrap();
    let text = ok(&["measure", "--mesh", body.to_str().unwrap()]);
    let spacing_mm = SliceSpec::default().cut_spacing * 1000.0;
    assert!((record_value(&text, "height_mm") - 1700.0).abs() <= spacing_mm, "{text}");
    assert!((record_value(&text, "weight_kg") - 0.102 * 985.0).abs() < 1e-3, "{text}");
    for k in ["bust_mm", "waist_mm", "hip_mm"] {
        assert!((record_value(&text, k) - 1000.0).abs() < 1e-3, "{text}");
    }
}

#[test]
fn render_writes_both_views() {
    let root = scratch("cli_render");
    let cube = root.join("box.obj");
    save_mesh(&unit_cube(), &cube).unwrap();
    ok(&["render", "--mesh", cube.to_str().unwrap(), "--out", root.to_str().unwrap(), "--resolution", "32"]);
    for view in ["front", "side"] {
        let img = sil2shape::silhouette::load_silhouette(root.join(format!("box_{view}.pgm"))).unwrap();
        assert_eq!(img.dims(), (32, 32));
        assert!(!img.is_empty());
    }
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let out = run(&["train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--data"));
}

#[test]
fn unknown_subcommand_and_bad_override_are_usage_errors() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let out = run(&["measure", "--mesh", "x.obj", "--set", "no_such_key=1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_succeeds_and_lists_flags() {
    let out = run(&["predict", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--model", "--front", "--side", "--height-mm", "--weight-kg", "--config", "--set"] {
        assert!(text.contains(flag), "{flag} not documented");
    }
}

#[test]
fn unreadable_inputs_are_data_errors() {
    let root = scratch("cli_bad_data");
    let missing = root.join("nothing.obj");
    assert_eq!(run(&["measure", "--mesh", missing.to_str().unwrap()]).status.code(), Some(2));
    let out = run(&["eval", "--data", root.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
