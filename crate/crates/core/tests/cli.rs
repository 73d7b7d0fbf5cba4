use std::path::{Path, PathBuf};
use std::process::Command;

use gauss_cann::cli::{run, DATA_DIR_ENV, DEFAULT_DATA_FILE};
use gauss_cann::data::{load_csv, Experiment};
use gauss_cann::document::{published_correlated_model, ModelDocument, Provenance};
use gauss_cann::energy::N_TERMS;
use gauss_cann::kinematics::{DeformationState, Orientation};
use gauss_cann::stress::{predict, CovarianceParam, GaussianModel};
use tempfile::TempDir;

fn gcann(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("gcann").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn published_doc(dir: &Path) -> PathBuf {
    let path = dir.join("published.json");
    ModelDocument::from_model(&published_correlated_model().unwrap(), Provenance::default())
        .save(&path)
        .unwrap();
    path
}

fn synth(dir: &Path, model: &Path, samples: &str, seed: &str) -> PathBuf {
    let path = dir.join(format!("synth-{samples}-{seed}.csv"));
    let (code, _, err) = gcann(&[
        "synth", "--model", p(model), "--samples", samples, "--points", "12", "--seed", seed,
        "--out", p(&path),
    ]);
    assert_eq!(code, 0, "{err}");
    path
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .parse()
        .unwrap()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(gcann(&["--help"]).0, 0);
    assert_eq!(gcann(&["--version"]).0, 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(gcann(&[]).0, 1);
    assert_eq!(gcann(&["frobnicate"]).0, 1);
    assert_eq!(gcann(&["predict", "--lambda1", "1.1"]).0, 1);
}

#[test]
fn missing_data_file_exits_one() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let (code, _, err) = gcann(&["fit", "--data", p(&missing), "--epochs", "1,1"]);
    assert_eq!(code, 1);
    assert!(err.contains("nope.csv"), "{err}");
}

#[test]
fn overflow_exits_two() {
    let dir = TempDir::new().unwrap();
    let mut m = GaussianModel {
        w_mu: [0.0; N_TERMS],
        w_star: [1.0; N_TERMS],
        covariance: CovarianceParam::deterministic(),
    };
    m.w_mu[10] = 1.0;
    m.w_star[10] = 1e4;
    let path = dir.path().join("stiff.json");
    ModelDocument::from_model(&m, Provenance::default()).save(&path).unwrap();
    let (code, _, err) = gcann(&["predict", "--model", p(&path), "--lambda1", "1.5", "--lambda2", "1.0"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn predict_at_identity_is_stress_free() {
    let dir = TempDir::new().unwrap();
    let model = published_doc(dir.path());
    let (code, out, _) = gcann(&["predict", "--model", p(&model), "--lambda1", "1", "--lambda2", "1"]);
    assert_eq!(code, 0);
    for key in ["mu11", "mu22", "std11", "std22"] {
        assert_eq!(field(&out, key), 0.0, "{key}");
    }
}

#[test]
fn predict_offset_equibiaxial_is_symmetric() {
    let dir = TempDir::new().unwrap();
    let model = published_doc(dir.path());
    let (code, out, _) = gcann(&[
        "predict", "--model", p(&model), "--lambda1", "1.12", "--lambda2", "1.12", "--orientation",
        "pm45",
    ]);
    assert_eq!(code, 0);
    let (a, b) = (field(&out, "mu11"), field(&out, "mu22"));
    assert!((a - b).abs() <= 1e-12 * a.abs());
    assert!(a > 0.0);
}

#[test]
fn predict_matches_library() {
    let dir = TempDir::new().unwrap();
    let model = published_doc(dir.path());
    let (_, out, _) = gcann(&["predict", "--model", p(&model), "--lambda1", "1.15", "--lambda2", "1.05"]);
    let state = DeformationState::new(1.15, 1.05, Orientation::Aligned0_90).unwrap();
    let direct = predict(&published_correlated_model().unwrap(), &state).unwrap();
    assert_eq!(field(&out, "mu11"), direct.mu11);
    assert_eq!(field(&out, "mu22"), direct.mu22);
    assert_eq!(field(&out, "std11"), direct.std11());
    assert_eq!(field(&out, "std22"), direct.std22());
}

#[test]
fn synth_is_reproducible_and_rejects_zero_samples() {
    let dir = TempDir::new().unwrap();
    let model = published_doc(dir.path());
    let a = std::fs::read(synth(dir.path(), &model, "3", "11")).unwrap();
    let again = dir.path().join("again");
    std::fs::create_dir(&again).unwrap();
    let b = std::fs::read(synth(&again, &model, "3", "11")).unwrap();
    assert_eq!(a, b);
    let c = std::fs::read(synth(dir.path(), &model, "3", "12")).unwrap();
    assert_ne!(a, c);

    let out = dir.path().join("zero.csv");
    let (code, _, _) = gcann(&["synth", "--model", p(&model), "--samples", "0", "--out", p(&out)]);
    assert_eq!(code, 1);
}

#[test]
fn fit_and_sweep_write_tables_and_models() {
    let dir = TempDir::new().unwrap();
    let model = published_doc(dir.path());
    let data = synth(dir.path(), &model, "3", "1");
    let fitted = dir.path().join("fit.json");
    let (code, out, err) = gcann(&[
        "fit", "--data", p(&data), "--mode", "indep", "--epochs", "20,20", "--lr", "0.01",
        "--alpha", "0.01", "--out", p(&fitted), "--progress-every", "10",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("mode,alpha,terms,train_nll,dev_nll,floor_fraction"));
    assert!(out.lines().any(|l| l.starts_with("epoch=10 phase=pretrain")));
    let doc = ModelDocument::load(&fitted).unwrap();
    assert_eq!(doc.provenance.alpha, Some(0.01));
    assert!(doc.provenance.data_hash.is_some());

    let (code, out, _) = gcann(&["evaluate", "--model", p(&fitted), "--data", p(&data), "--split", "all"]);
    assert_eq!(code, 0);
    assert!(out.contains("nll="));

    let models = dir.path().join("models");
    let table = dir.path().join("sweep.csv");
    let (code, out, err) = gcann(&[
        "sweep", "--data", p(&data), "--epochs", "20,20", "--lr", "0.01", "--alphas", "0,0.1",
        "--out", p(&table), "--models-dir", p(&models),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(std::fs::read_to_string(&table).unwrap(), out);
    assert_eq!(out.lines().filter(|l| l.ends_with(",*")).count(), 1);
    assert_eq!(std::fs::read_dir(&models).unwrap().count(), 2);
}

#[test]
fn report_panels_agree_with_predict() {
    let dir = TempDir::new().unwrap();
    let model = published_doc(dir.path());
    let data = synth(dir.path(), &model, "2", "5");
    let out_dir = dir.path().join("report");
    let (code, _, err) = gcann(&["report", "--model", p(&model), "--data", p(&data), "--out-dir", p(&out_dir)]);
    assert_eq!(code, 0, "{err}");
    let csvs = std::fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, Experiment::ALL.len());
    assert!(out_dir.join("panels.json").exists());

    let published = published_correlated_model().unwrap();
    for experiment in [Experiment::OffS, Experiment::StripY] {
        let mut rdr = csv::Reader::from_path(out_dir.join(format!("{}.csv", experiment.tag()))).unwrap();
        let header = rdr.headers().unwrap().clone();
        let col = |name: &str| header.iter().position(|h| h == name).unwrap();
        for rec in rdr.records().take(5) {
            let rec = rec.unwrap();
            let num = |name: &str| rec[col(name)].parse::<f64>().unwrap();
            let state = DeformationState::new(num("lambda1"), num("lambda2"), experiment.orientation()).unwrap();
            let pred = predict(&published, &state).unwrap();
            let (mean, std) = if &rec[col("direction")] == "1" {
                (pred.mu11, pred.std11())
            } else {
                (pred.mu22, pred.std22())
            };
            assert!((num("model_mean") - mean).abs() <= 1e-12 * mean.abs().max(1.0));
            assert!((num("model_std") - std).abs() <= 1e-12 * std.abs().max(1.0));
        }
    }
    assert!(load_csv(&data).is_ok());
}

#[test]
fn binary_resolves_data_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    let model = published_doc(dir.path());
    synth(dir.path(), &model, "2", "3");
    std::fs::rename(dir.path().join("synth-2-3.csv"), dir.path().join(DEFAULT_DATA_FILE)).unwrap();
    let bin = env!("CARGO_BIN_EXE_gcann");

    let status = Command::new(bin)
        .args(["evaluate", "--model", p(&model)])
        .env(DATA_DIR_ENV, dir.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));

    let status = Command::new(bin)
        .args(["evaluate", "--model", p(&model)])
        .env_remove(DATA_DIR_ENV)
        .current_dir(dir.path().join(".."))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));

    let status = Command::new(bin).arg("--bogus").output().unwrap();
    assert_eq!(status.status.code(), Some(1));
}
