use std::path::{Path, PathBuf};
use std::process::Command;

use fuelmix::cli::RunManifest;

const TINY: &str = r#"{
  "k": 5,
  "mcmc": {"chains": 2, "iterations": 240, "burn_in": 80, "thin": 2, "seed": 5},
  "replicate_draws": 60,
  "corpus": {"countries": 3, "regions": 2, "min_surveys": 4, "max_surveys": 6},
  "sample_size": {
    "panel": {"countries": 3, "sample_sizes": 8},
    "n_grid": [10, 1000], "quantile_n": 1000,
    "mcmc": {"chains": 2, "iterations": 300, "burn_in": 100, "thin": 2}
  }
}"#;

const TWO_FUELS: &str = r#"{
  "k": 4,
  "hierarchy": [{"name": "top", "parent": null, "children": ["gas", "others"]}],
  "mcmc": {"chains": 2, "iterations": 200, "burn_in": 60, "thin": 2, "seed": 9},
  "replicate_draws": 40,
  "corpus": {"countries": 3, "regions": 2, "min_surveys": 3, "max_surveys": 5}
}"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("config.json"), config).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> std::process::Output {
        Command::new(env!("CARGO_BIN_EXE_fuelmix"))
            .args(args)
            .current_dir(self.dir.path())
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }

    fn data_args(&self) -> Vec<&'static str> {
        vec![
            "--surveys",
            "synth/surveys.csv",
            "--urban",
            "synth/urban.csv",
            "--regions",
            "synth/regions.csv",
            "--config",
            "config.json",
        ]
    }

    fn synth_and_fit(&self, out: &str) {
        self.ok(&["synth", "--config", "config.json", "--out", "synth"]);
        let mut args = vec!["fit"];
        args.extend(self.data_args());
        args.extend(["--out", out]);
        self.ok(&args);
    }
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn assert_outputs(dir: &Path, expected: &[&str]) {
    let m = manifest(dir);
    let listed: Vec<&str> = m.outputs.iter().map(|o| o.path.as_str()).collect();
    for name in expected {
        assert!(
            listed.contains(name),
            "{name} missing from manifest in {}",
            dir.display()
        );
        assert!(
            dir.join(name).is_file(),
            "{name} missing in {}",
            dir.display()
        );
    }
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn every_verb_writes_its_declared_outputs() {
    let ws = Workspace::new(TINY);
    ws.synth_and_fit("fit");
    assert_outputs(
        &ws.path("synth"),
        &["surveys.csv", "regions.csv", "urban.csv", "truth.json"],
    );
    assert_outputs(
        &ws.path("fit"),
        &[
            "config.json",
            "surveys.csv",
            "regions.csv",
            "urban.csv",
            "exclusions.csv",
            "draws.csv",
            "acceptance.csv",
            "rho.csv",
            "fit_summary.json",
        ],
    );

    ws.ok(&[
        "predict",
        "--draws-dir",
        "fit",
        "--years",
        "2010:2020",
        "--with-survey-variability",
        "--out",
        "pred",
    ]);
    assert_outputs(&ws.path("pred"), &["trend.csv", "replicates.csv"]);
    ws.ok(&["check", "--draws-dir", "fit", "--out", "check"]);
    assert_outputs(
        &ws.path("check"),
        &["replicates.csv", "coverage.csv", "check.json"],
    );
    ws.ok(&["diagnostics", "--draws-dir", "fit", "--out", "diag"]);
    assert_outputs(
        &ws.path("diag"),
        &[
            "psrf.csv",
            "psrf_worst.csv",
            "psrf_histogram.csv",
            "diagnostics.json",
        ],
    );
    let (_, worst) = read_csv(&ws.path("diag/psrf_worst.csv"));
    assert_eq!(worst.len(), 20);

    let mut args = vec!["forecast-experiment"];
    args.extend(ws.data_args());
    args.extend(["--cutoff-year", "2012", "--horizon", "5", "--out", "fc"]);
    ws.ok(&args);
    assert_outputs(
        &ws.path("fc"),
        &["heldout.csv", "coverage.csv", "widths.csv", "forecast.json"],
    );
    assert_outputs(&ws.path("fc/fit"), &["draws.csv", "rho.csv"]);
    let (_, widths) = read_csv(&ws.path("fc/widths.csv"));
    assert_eq!(widths.len(), 5);

    ws.ok(&[
        "simulate-appendix-a",
        "--config",
        "config.json",
        "--n-grid",
        "10,1000",
        "--out",
        "ss",
    ]);
    assert_outputs(
        &ws.path("ss"),
        &[
            "sd_distribution.csv",
            "mse_distribution.csv",
            "quantiles.csv",
            "summary.csv",
            "panel.json",
        ],
    );
    let (_, summary) = read_csv(&ws.path("ss/summary.csv"));
    assert_eq!(summary.len(), 2);
}

#[test]
fn predicted_quantiles_are_ordered_and_lie_in_the_unit_interval() {
    let ws = Workspace::new(TINY);
    ws.synth_and_fit("fit");
    ws.ok(&[
        "predict",
        "--draws-dir",
        "fit",
        "--with-survey-variability",
        "--out",
        "pred",
    ]);
    for table in ["pred/trend.csv", "pred/replicates.csv"] {
        let (h, rows) = read_csv(&ws.path(table));
        let (lo, me, hi) = (col(&h, "lower"), col(&h, "median"), col(&h, "upper"));
        assert!(!rows.is_empty());
        for r in &rows {
            let q: Vec<f64> = [lo, me, hi]
                .iter()
                .map(|&i| r[i].parse().unwrap())
                .collect();
            assert!(q.iter().all(|x| x.is_finite()), "{r:?}");
            assert!(q[0] <= q[1] && q[1] <= q[2], "{r:?}");
            assert!(q[0] >= 0.0 && q[2] <= 1.0, "{r:?}");
        }
    }
}

#[test]
fn reruns_are_byte_identical_in_either_execution_mode() {
    let ws = Workspace::new(TINY);
    ws.synth_and_fit("a");
    let mut args = vec!["--sequential", "fit"];
    args.extend(ws.data_args());
    args.extend(["--out", "b"]);
    ws.ok(&args);
    for f in ["draws.csv", "rho.csv", "acceptance.csv", "manifest.json"] {
        let a = std::fs::read(ws.path("a").join(f)).unwrap();
        let b = std::fs::read(ws.path("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
    ws.ok(&["check", "--draws-dir", "a", "--out", "ca"]);
    ws.ok(&["--sequential", "check", "--draws-dir", "a", "--out", "cb"]);
    assert_eq!(
        std::fs::read(ws.path("ca/replicates.csv")).unwrap(),
        std::fs::read(ws.path("cb/replicates.csv")).unwrap()
    );
}

#[test]
fn two_fuel_corpus_fits_end_to_end() {
    let ws = Workspace::new(TWO_FUELS);
    ws.synth_and_fit("fit");
    ws.ok(&["predict", "--draws-dir", "fit", "--out", "pred"]);
    let (h, rows) = read_csv(&ws.path("pred/trend.csv"));
    assert!(rows
        .iter()
        .all(|r| ["gas", "others"].contains(&r[col(&h, "fuel")].as_str())));
}

#[test]
fn failures_exit_nonzero() {
    let ws = Workspace::new(TINY);
    ws.synth_and_fit("fit");
    let out = ws.run(&[
        "predict",
        "--draws-dir",
        "fit",
        "--countries",
        "ZZZ",
        "--out",
        "p",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ZZZ"));

    let one_chain = TINY.replace(
        "\"chains\": 2, \"iterations\": 240",
        "\"chains\": 1, \"iterations\": 240",
    );
    std::fs::write(ws.path("one.json"), one_chain).unwrap();
    let out = ws.run(&[
        "fit",
        "--surveys",
        "synth/surveys.csv",
        "--urban",
        "synth/urban.csv",
        "--regions",
        "synth/regions.csv",
        "--config",
        "one.json",
        "--out",
        "fit1",
    ]);
    assert!(out.status.success());
    let out = ws.run(&["diagnostics", "--draws-dir", "fit1", "--out", "d"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("2 chains"));

    let out = ws.run(&[
        "fit",
        "--surveys",
        "missing.csv",
        "--urban",
        "synth/urban.csv",
        "--out",
        "x",
    ]);
    assert!(!out.status.success());
}

#[test]
fn forecast_without_held_out_surveys_reports_empty() {
    let ws = Workspace::new(TINY);
    ws.ok(&["synth", "--config", "config.json", "--out", "synth"]);
    let mut args = vec!["forecast-experiment"];
    args.extend(ws.data_args());
    args.extend(["--cutoff-year", "2017", "--out", "fc"]);
    ws.ok(&args);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("fc/forecast.json")).unwrap())
            .unwrap();
    assert_eq!(summary["status"], "empty");
    assert!(summary["coverage"].is_null());
    let (h, rows) = read_csv(&ws.path("fc/heldout.csv"));
    assert!(rows.is_empty());
    assert_eq!(h[0], "survey_id");
}
