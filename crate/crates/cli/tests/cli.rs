use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hpnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpnn"))
        .current_dir(dir)
        .env_remove("HPNN_OUT")
        .args(args)
        .output()
        .expect("spawn hpnn")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hpnn(dir, args);
    assert!(
        out.status.success(),
        "hpnn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const QUICK: &str = r#"
[network]
kind = "hybrid"
modes = 2
layers = 1
cutoff = 4

[train]
epochs = 2

[noise]
realizations = 3
grid = [1.0, 4.0, 8.0]
"#;

fn without_wall_time(mut record: Value) -> Value {
    record.as_object_mut().unwrap().remove("wall_time_s");
    record
}

#[test]
fn gen_data_is_byte_identical_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["--out", "a", "gen-data"]);
    ok(tmp.path(), &["--out", "b", "gen-data"]);
    let a = std::fs::read(tmp.path().join("a/data/dataset.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/data/dataset.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# hpnn dataset v1\nf0,f1,f2,f3,f4,f5,f6,f7,label\n"));
    assert_eq!(text.lines().count(), 1002);
    let spec: Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("a/data/dataset.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(spec["samples"], 1000);
}

#[test]
fn invalid_field_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.toml", "[data]\nflip_fraction = 1.5\n");
    let out = hpnn(tmp.path(), &["--config", "bad.toml", "gen-data"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("flip_fraction"));

    write(tmp.path(), "typo.toml", "[train]\nlearning_rat = 0.1\n");
    let out = hpnn(tmp.path(), &["--config", "typo.toml", "train"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));
}

#[test]
fn train_is_reproducible_and_counts_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", QUICK);
    let first: Value = serde_json::from_str(&ok(
        tmp.path(),
        &["--config", "c.toml", "--out", "o1", "train"],
    ))
    .unwrap();
    let second: Value = serde_json::from_str(&ok(
        tmp.path(),
        &["--config", "c.toml", "--out", "o2", "train"],
    ))
    .unwrap();
    assert_eq!(first["param_count"], 118);
    assert_eq!(without_wall_time(first.clone()), without_wall_time(second));
    let id = first["run_id"].as_str().unwrap();
    assert!(id.starts_with("hybrid-") && id.ends_with("-s0"));
    let run = tmp.path().join("o1/runs").join(id);
    for f in [
        "record.json",
        "config.toml",
        "history.csv",
        "checkpoint.json",
        "best.json",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }
    for f in ["history.csv", "checkpoint.json", "best.json", "config.toml"] {
        let a = std::fs::read(run.join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("o2/runs").join(id).join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let history = std::fs::read_to_string(run.join("history.csv")).unwrap();
    assert!(history.starts_with("# hpnn history v1\n"));
    assert!(history.lines().nth(2).unwrap().ends_with(",22"));

    let reseeded: Value = serde_json::from_str(&ok(
        tmp.path(),
        &["--config", "c.toml", "--out", "o1", "--seed", "3", "train"],
    ))
    .unwrap();
    assert_eq!(reseeded["seed"], 3);
    assert_eq!(reseeded["config_hash"], first["config_hash"]);
    write(
        tmp.path(),
        "k.toml",
        &QUICK.replace("\"hybrid\"", "\"classical\""),
    );
    let twin: Value = serde_json::from_str(&ok(
        tmp.path(),
        &["--config", "k.toml", "--out", "o1", "train"],
    ))
    .unwrap();
    assert_eq!(twin["param_count"], 124);
    assert_eq!(twin["widths"], serde_json::json!([8, 10, 2, 4]));
}

#[test]
fn noise_outputs_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", QUICK);
    let record: Value = serde_json::from_str(&ok(
        tmp.path(),
        &["--config", "c.toml", "--out", "o", "train"],
    ))
    .unwrap();
    let id = record["run_id"].as_str().unwrap();
    let summary: Value = serde_json::from_str(&ok(
        tmp.path(),
        &["--config", "c.toml", "--out", "o", "noise", id],
    ))
    .unwrap();
    let curves: Vec<&str> = summary
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["curve"].as_str().unwrap())
        .collect();
    assert_eq!(
        curves,
        [
            "all",
            "classical",
            "displacement",
            "squeezing",
            "kerr",
            "interferometer"
        ]
    );
    let dir = tmp.path().join("o/runs").join(id).join("noise");
    let raw = std::fs::read_to_string(dir.join("noise_raw.csv")).unwrap();
    assert!(raw.starts_with("# hpnn noise-raw v1\ncurve,enob,realization,accuracy\n"));
    let all_rows: Vec<&str> = raw.lines().filter(|l| l.starts_with("all,")).collect();
    // One noiseless row plus realizations x grid.
    assert_eq!(all_rows.len(), 1 + 3 * 3);
    let noiseless: f64 = all_rows[0].rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(noiseless, record["best_val_accuracy"].as_f64().unwrap());
    assert!(dir.join("noise.svg").exists());

    write(
        tmp.path(),
        "k.toml",
        &QUICK.replace("\"hybrid\"", "\"classical\""),
    );
    let twin: Value = serde_json::from_str(&ok(
        tmp.path(),
        &["--config", "k.toml", "--out", "o", "train"],
    ))
    .unwrap();
    write(
        tmp.path(),
        "q.toml",
        "[noise]\ncurves = [\"squeezing\"]\nrealizations = 1\n",
    );
    let out = hpnn(
        tmp.path(),
        &[
            "--config",
            "q.toml",
            "--out",
            "o",
            "noise",
            twin["run_id"].as_str().unwrap(),
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("squeezing"));

    let out = hpnn(
        tmp.path(),
        &["--out", "o", "noise", "hybrid-000000000000-s0"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
}

#[test]
fn sweep_resumes_and_report_is_pure() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = format!(
        "{QUICK}\n[grid]\nmodes = [2]\nlayers = [1]\ncutoffs = [4]\nhybrid_seeds = 2\nclassical_seeds = 2\n"
    );
    write(tmp.path(), "g.toml", &grid);
    let first: Value = serde_json::from_str(&ok(
        tmp.path(),
        &["--config", "g.toml", "--out", "o", "--jobs", "2", "sweep"],
    ))
    .unwrap();
    assert_eq!(first["total_runs"], 4);
    let threshold = first["threshold"].as_f64().unwrap();
    assert!((0.65..=0.80).contains(&threshold));
    let summary_bytes = std::fs::read(tmp.path().join("o/sweep/summary.json")).unwrap();
    let runs_bytes = std::fs::read(tmp.path().join("o/sweep/runs.csv")).unwrap();

    let out = hpnn(
        tmp.path(),
        &["--config", "g.toml", "--out", "o", "--jobs", "1", "sweep"],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("4 runs reused"));
    assert_eq!(
        std::fs::read(tmp.path().join("o/sweep/summary.json")).unwrap(),
        summary_bytes
    );
    assert_eq!(
        std::fs::read(tmp.path().join("o/sweep/runs.csv")).unwrap(),
        runs_bytes
    );

    let report: Value = serde_json::from_str(&ok(tmp.path(), &["--out", "o", "report"])).unwrap();
    assert_eq!(report["checksum"], first["checksum"]);
    let files = [
        "accuracies.csv",
        "distributions.csv",
        "summary.csv",
        "summary.json",
        "violins.svg",
    ];
    let before: Vec<Vec<u8>> = files
        .iter()
        .map(|f| std::fs::read(tmp.path().join("o/report").join(f)).unwrap())
        .collect();
    ok(tmp.path(), &["report", "o"]);
    for (f, b) in files.iter().zip(&before) {
        assert_eq!(
            &std::fs::read(tmp.path().join("o/report").join(f)).unwrap(),
            b,
            "{f}"
        );
    }
}

#[test]
fn empty_grid_and_single_run_report() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "e.toml", "[grid]\nkinds = []\n");
    let summary: Value = serde_json::from_str(&ok(
        tmp.path(),
        &["--config", "e.toml", "--out", "o", "sweep"],
    ))
    .unwrap();
    assert_eq!(summary["total_runs"], 0);
    assert_eq!(summary["sizes"], serde_json::json!([]));

    write(tmp.path(), "c.toml", QUICK);
    ok(tmp.path(), &["--config", "c.toml", "--out", "o", "train"]);
    ok(tmp.path(), &["--out", "o", "report"]);
    let dist = std::fs::read_to_string(tmp.path().join("o/report/distributions.csv")).unwrap();
    let rows: Vec<&str> = dist.lines().skip(2).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("hybrid,118,point,"));
}

#[test]
fn calibrate_amax_matches_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let text = ok(tmp.path(), &["--out", "o", "calibrate-amax"]);
    let fixture = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/amax.txt"),
    )
    .unwrap();
    assert_eq!(text, fixture);
    let single = ok(
        tmp.path(),
        &["--out", "o", "--cutoff", "7", "calibrate-amax"],
    );
    assert!(single.ends_with("7 0.55 0.991290\n"));
}

#[test]
fn baseline_and_gradcheck() {
    let tmp = tempfile::tempdir().unwrap();
    let baseline: Value =
        serde_json::from_str(&ok(tmp.path(), &["--out", "o", "baseline"])).unwrap();
    let acc = baseline["val_accuracy"].as_f64().unwrap();
    assert!((0.65..=0.80).contains(&acc), "{acc}");
    let text = ok(tmp.path(), &["--out", "o", "gradcheck"]);
    assert!(text.contains("118 parameters, 100.00% within"), "{text}");
    assert!(tmp.path().join("o/gradcheck.csv").exists());
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hpnn"))
        .current_dir(tmp.path())
        .env("HPNN_OUT", "from-env")
        .args(["--cutoff", "5", "calibrate-amax"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("from-env/amax.txt").exists());
}
