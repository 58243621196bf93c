//! End-to-end runs of the msdspan binary: exit codes, report files, and
//! cross-thread determinism.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use msdspan::PortfolioSet;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_msdspan")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("MSDSPAN_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

/// Deterministic bounded return panel; asset `j` follows its own wiggle.
fn wave(t: usize, j: usize) -> f64 {
    let a = ((t * 7 + j * 3) % 11) as f64;
    let b = ((t * 5 + j) % 7) as f64;
    0.004 * (a - 5.0) + 0.002 * (b - 3.0)
}

fn write_panel(path: &Path, periods: usize, assets: usize, dated: bool, dominant_last: bool) {
    let mut f = std::fs::File::create(path).unwrap();
    let mut header = if dated {
        vec!["date".to_string()]
    } else {
        Vec::new()
    };
    for j in 0..assets {
        header.push(format!("a{}", j + 1));
    }
    writeln!(f, "{}", header.join(",")).unwrap();
    for t in 0..periods {
        let mut row = if dated {
            vec![format!("2{:03}-01", t)]
        } else {
            Vec::new()
        };
        for j in 0..assets {
            let r = if dominant_last && j == assets - 1 {
                wave(t, 0) + 0.05
            } else {
                wave(t, j)
            };
            row.push(format!("{r}"));
        }
        writeln!(f, "{}", row.join(",")).unwrap();
    }
}

fn simplex_json(dir: &Path, assets: usize) -> PathBuf {
    let path = dir.join(format!("simplex{assets}.json"));
    PortfolioSet::standard_simplex(assets).save(&path).unwrap();
    path
}

fn report_json(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn span_accepts_itself_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    write_panel(&panel, 36, 3, false, false);
    let k = simplex_json(dir.path(), 3);
    let out = dir.path().join("out");
    let output = run(&[
        "span",
        "--panel",
        panel.to_str().unwrap(),
        "--k-set",
        k.to_str().unwrap(),
        "--l-set",
        "simplex",
        "--subsample-sizes",
        "12,18",
        "--threads",
        "1",
        "--format",
        "csv",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let report = report_json(&out);
    assert_eq!(report["result"]["decision"], "accept");
    assert_eq!(report["result"]["statistic"]["xi"], 0.0);
    assert_eq!(report["command"], "span");
    assert_eq!(report["config_sha256"].as_str().unwrap().len(), 64);
    for file in ["grid.csv", "subsamples.csv", "timings.json"] {
        assert!(out.join(file).exists(), "{file} missing");
    }
}

#[test]
fn span_rejects_a_dominated_candidate_with_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    write_panel(&panel, 40, 3, false, true);
    let k = dir.path().join("k.json");
    PortfolioSet::coordinate_simplex(3, &[0, 1])
        .unwrap()
        .save(&k)
        .unwrap();
    let out = dir.path().join("out");
    let output = run(&[
        "span",
        "--panel",
        panel.to_str().unwrap(),
        "--k-set",
        k.to_str().unwrap(),
        "--l-set",
        "simplex",
        "--subsample-sizes",
        "10,20",
        "--no-bias-correction",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 3, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let report = report_json(&out);
    assert_eq!(report["result"]["decision"], "reject");
    assert!(report["result"]["bias"].is_null());
}

#[test]
fn reports_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    write_panel(&panel, 30, 3, false, true);
    let k = dir.path().join("k.json");
    PortfolioSet::coordinate_simplex(3, &[0, 1])
        .unwrap()
        .save(&k)
        .unwrap();
    let mut reports = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.path().join(format!("out{threads}"));
        let output = run(&[
            "span",
            "--panel",
            panel.to_str().unwrap(),
            "--k-set",
            k.to_str().unwrap(),
            "--l-set",
            "simplex",
            "--subsample-sizes",
            "10,15",
            "--threads",
            threads,
            "--output-dir",
            out.to_str().unwrap(),
        ]);
        assert!(
            [0, 3].contains(&code(&output)),
            "stderr: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn character_reports_the_exact_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let k = dir.path().join("k.json");
    PortfolioSet::singleton(vec![1.0, 0.0]).unwrap().save(&k).unwrap();
    let out = dir.path().join("out");
    let output = run(&[
        "character",
        "--k-set",
        k.to_str().unwrap(),
        "--l-set",
        "simplex",
        "--format",
        "csv",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("character 1/2"), "stdout: {stdout}");
    let report = report_json(&out);
    assert_eq!(report["result"]["character"], 0.5);
    assert_eq!(report["result"]["character_numer"], "1");
    assert_eq!(report["result"]["character_denom"], "2");
    assert!(out.join("effective.csv").exists());
}

#[test]
fn config_errors_exit_two_and_io_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    write_panel(&panel, 24, 2, false, false);
    let k = simplex_json(dir.path(), 2);
    let out = dir.path().join("out");

    let bad_alpha = run(&[
        "span",
        "--panel",
        panel.to_str().unwrap(),
        "--k-set",
        k.to_str().unwrap(),
        "--l-set",
        "simplex",
        "--alpha",
        "1.5",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&bad_alpha), 2);

    let missing = run(&[
        "span",
        "--panel",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--k-set",
        k.to_str().unwrap(),
        "--l-set",
        "simplex",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&missing), 1);
}

#[test]
fn containment_violations_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    write_panel(&panel, 24, 2, false, false);
    let k = dir.path().join("k.json");
    PortfolioSet::singleton(vec![0.5, 0.5]).unwrap().save(&k).unwrap();
    // Outer holds only the two corner points, so the midpoint is outside.
    let l = dir.path().join("l.json");
    PortfolioSet::new(
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![0], vec![1]],
    )
    .unwrap()
    .save(&l)
    .unwrap();
    let out = dir.path().join("out");
    let output = run(&[
        "span",
        "--panel",
        panel.to_str().unwrap(),
        "--k-set",
        k.to_str().unwrap(),
        "--l-set",
        l.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 2, "stderr: {}", String::from_utf8_lossy(&output.stderr));
}

#[test]
fn mc_smoke_writes_four_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = run(&[
        "mc",
        "--design",
        "a",
        "--periods",
        "60",
        "--replications",
        "2",
        "--subsample-sizes",
        "20,30",
        "--threads",
        "2",
        "--format",
        "csv",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let report = report_json(&out);
    assert_eq!(report["result"]["cells"].as_array().unwrap().len(), 4);
    let table = std::fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn backtest_smoke_with_benchmark_and_factors() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    write_panel(&panel, 30, 2, true, false);
    let k = dir.path().join("k.json");
    PortfolioSet::singleton(vec![0.5, 0.5]).unwrap().save(&k).unwrap();
    let bench = dir.path().join("bench.json");
    std::fs::write(&bench, "[0.5, 0.5]").unwrap();
    let factors = dir.path().join("factors.csv");
    {
        let mut f = std::fs::File::create(&factors).unwrap();
        writeln!(f, "date,mkt,rf").unwrap();
        for t in 0..30 {
            writeln!(f, "2{:03}-01,{},0.0002", t, wave(t, 5)).unwrap();
        }
    }
    let out = dir.path().join("out");
    let output = run(&[
        "backtest",
        "--panel",
        panel.to_str().unwrap(),
        "--k-set",
        k.to_str().unwrap(),
        "--l-set",
        "simplex",
        "--window",
        "10",
        "--benchmark-weights",
        bench.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
        "--format",
        "csv",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let report = report_json(&out);
    assert_eq!(report["result"]["records"].as_array().unwrap().len(), 20);
    assert_eq!(
        report["regression"]["names"],
        serde_json::json!(["const", "mkt"])
    );
    let oc = report["benchmark"]["opportunity_costs"].as_array().unwrap();
    assert_eq!(oc.len(), 3);
    let records = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 21);
    assert!(records.lines().next().unwrap().starts_with("date,xi,"));
}
