use std::path::Path;
use std::process::{Command, Output};

use ordinal_outcome::synthetic::CohortSpec;

fn ordinal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ordinal")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, n: usize, seed: u64) {
    let o = ordinal(&["synth", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", s(dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_writes_identical_files_for_identical_flags() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path(), 200, 7);
    synth(b.path(), 200, 7);
    for f in ["cohort.csv", "schema.json", "truth.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.path().join("cohort.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
}

#[test]
fn synth_into_missing_directory_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = ordinal(&["synth", "--n", "10", "--out", s(&d.path().join("nope"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn report_reproduces_conditional_chain() {
    let o = ordinal(&[
        "report",
        "--profile",
        "0.1273615,0.1228617,0.0661974,0.0261596,0.0216245,0.0038411",
        "--chain",
        ">1,>3,>4",
    ]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("Pr(GOSE >3 | GOSE >1) = 96.5%"), "{out}");
    assert!(out.contains("Pr(GOSE >4 | GOSE >1) = 52.0%"), "{out}");
}

#[test]
fn report_single_threshold_is_unconditional() {
    let o = ordinal(&["report", "--profile", "0.9,0.8,0.5,0.4,0.2,0.1", "--chain", ">4", "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["unconditional"]["probability"], 0.5);
    assert!(v["conditional"].as_array().unwrap().is_empty());
}

#[test]
fn report_zero_denominator_is_flagged_not_fatal() {
    let o = ordinal(&["report", "--profile", "0,0,0,0,0,0", "--chain", ">1,>3"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("undefined"));
}

#[test]
fn report_rejects_unordered_chain() {
    let o = ordinal(&["report", "--profile", "0.9,0.8,0.5,0.4,0.2,0.1", "--chain", ">4,>1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn run_linear_models_is_deterministic_and_emits_curves() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), 400, 3);
    let cohort = d.path().join("cohort.csv");
    let schema = d.path().join("schema.json");
    let start = std::time::Instant::now();
    let mut metrics = Vec::new();
    for out in ["a", "b"] {
        let o = ordinal(&[
            "run", "--cohort", s(&cohort), "--schema", s(&schema), "--out", s(&d.path().join(out)), "--seed", "4",
            "--repeats", "2", "--folds", "5", "--boot", "200", "--models", "mnlr,polr",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        metrics.push(std::fs::read(d.path().join(out).join("CPM_POLR/metrics.json")).unwrap());
    }
    assert!(start.elapsed().as_secs() < 300);
    assert_eq!(metrics[0], metrics[1]);
    for fam in ["CPM_MNLR", "CPM_POLR"] {
        let dir = d.path().join("a").join(fam);
        for t in ["gt1", "gt3", "gt4", "gt5", "gt6", "gt7"] {
            assert!(dir.join(format!("calibration_{t}.csv")).exists(), "{fam} {t}");
        }
        let pooled = std::fs::read_to_string(dir.join("pooled_predictions.csv")).unwrap();
        assert_eq!(pooled.lines().count(), 1 + 2 * 400);
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_partitions"], 10);
    assert!(manifest["failures"].as_array().unwrap().is_empty());

    // the saved model scores a cohort row
    let o = ordinal(&[
        "report", "--model", s(&d.path().join("a/CPM_POLR/model.json")), "--cohort", s(&cohort), "--patient", "P001",
        "--chain", ">1,>4",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8(o.stdout).unwrap().contains("Pr(GOSE >4 | GOSE >1)"));
}

#[test]
fn run_tuned_model_logs_dropout_rounds() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), 200, 5);
    let o = ordinal(&[
        "run", "--cohort", s(&d.path().join("cohort.csv")), "--schema", s(&d.path().join("schema.json")), "--out",
        s(&d.path().join("r")), "--repeats", "2", "--boot", "50", "--models", "deep_or", "--grid", "desk", "--epochs", "3",
        "--jobs", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("dropout after repeat 1: 78 ->"), "{err}");
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.path().join("r/CPM_DeepOR/metrics.json")).unwrap()).unwrap();
    assert_eq!(m["dropout_rounds"].as_array().unwrap().len(), 1);
    assert!(d.path().join("r/CPM_DeepOR/validation_predictions.csv").exists());
}

#[test]
fn run_rejects_bad_configuration() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), 50, 1);
    let base = |extra: &[&str]| {
        let mut a = vec![
            "run", "--cohort", s(&d.path().join("cohort.csv")).to_string().leak(), "--schema",
            s(&d.path().join("schema.json")).to_string().leak(), "--out", s(&d.path().join("r")).to_string().leak(),
        ];
        a.extend_from_slice(extra);
        code(&ordinal(&a))
    };
    assert_eq!(base(&["--models", "gbm"]), 2);
    assert_eq!(base(&["--val-frac", "1.5"]), 2);
    assert_eq!(base(&["--grid", "huge"]), 2);
}

/// A token model small enough that every patient has at most 12 tokens.
fn tiny_token_model(dir: &Path) -> std::path::PathBuf {
    let mut spec = CohortSpec::desk(300, 9);
    let keep = ["Age", "GCSm", "Pupils", "Hypoxia", "Marshall", "Sig1", "Sig2", "Noise1"];
    spec.predictors.retain(|p| keep.contains(&p.spec.name.as_str()));
    spec.missing.retain(|m| keep.contains(&m.column.as_str()));
    spec.save(&dir.join("spec.json")).unwrap();
    let o = ordinal(&["synth", "--spec", s(&dir.join("spec.json")), "--out", s(dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = ordinal(&[
        "run", "--cohort", s(&dir.join("cohort.csv")), "--schema", s(&dir.join("schema.json")), "--out",
        s(&dir.join("r")), "--repeats", "1", "--boot", "50", "--models", "apm_or,polr", "--grid", "desk", "--epochs",
        "5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("r/APM_OR/model.json")
}

#[test]
fn importance_exact_mode_satisfies_efficiency_and_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let model = tiny_token_model(d.path());
    let cohort = d.path().join("cohort.csv");
    let mut rankings = Vec::new();
    for out in ["i1", "i2"] {
        let od = d.path().join(out);
        std::fs::create_dir(&od).unwrap();
        let o = ordinal(&["importance", "--model", s(&model), "--cohort", s(&cohort), "--samples", "0", "--out", s(&od)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        rankings.push(std::fs::read(od.join("ranking.json")).unwrap());
        assert!(od.join("importance.csv").exists());
    }
    assert_eq!(rankings[0], rankings[1]);

    let attrs: Vec<serde_json::Value> =
        serde_json::from_slice(&std::fs::read(d.path().join("i1/attributions.json")).unwrap()).unwrap();
    assert_eq!(attrs.len(), 300);
    for a in &attrs {
        let phi = a["phi"].as_array().unwrap();
        assert!(phi.len() <= 12);
        for node in 0..6 {
            let sum: f64 = phi.iter().map(|row| row[node].as_f64().unwrap()).sum();
            let gap = a["full"][node].as_f64().unwrap() - a["empty"][node].as_f64().unwrap();
            assert!((sum - gap).abs() < 1e-9, "{sum} vs {gap}");
        }
    }
}

#[test]
fn importance_rejects_non_token_models_and_zero_samples() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), 150, 2);
    let cohort = d.path().join("cohort.csv");
    let o = ordinal(&[
        "run", "--cohort", s(&cohort), "--schema", s(&d.path().join("schema.json")), "--out", s(&d.path().join("r")),
        "--repeats", "1", "--boot", "20", "--models", "polr,apm_mn", "--epochs", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.path().join("imp");
    std::fs::create_dir(&out).unwrap();
    let polr = d.path().join("r/CPM_POLR/model.json");
    assert_eq!(code(&ordinal(&["importance", "--model", s(&polr), "--cohort", s(&cohort), "--out", s(&out)])), 2);
    // every desk patient has 25 tokens
    let apm = d.path().join("r/APM_MN/model.json");
    let o = ordinal(&["importance", "--model", s(&apm), "--cohort", s(&cohort), "--samples", "0", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
}
