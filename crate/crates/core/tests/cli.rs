//! The command-line tool end to end: exit codes, artifacts and manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gbm_coupling::cli::output::sha256_hex;
use gbm_coupling::cli::runfile::RunFile;
use gbm_coupling::cli::sweep::SweepFile;
use gbm_coupling::cli::{exit_code, EXIT_CONSISTENCY, EXIT_INPUT};
use gbm_coupling::Error;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_gbm-coupling");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Every file below `root`, relative, with its digest.
fn tree(root: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, sha256_hex(&fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

const SPEC: &str = r#""spec": {"x": 2.0, "y": 1.0, "a1": 0.0, "a2": 0.5, "sigma1": 0.6, "sigma2": 1.0}"#;

#[test]
fn derive_run_writes_manifest_with_digests() {
    let dir = tempfile::tempdir().unwrap();
    let rf = write(dir.path(), "r.json", &format!(r#"{{{SPEC}, "experiment": "derive"}}"#));
    let out = dir.path().join("out");
    let o = run(&["analytic", "--run", rf.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["experiment"], "derive");
    assert_eq!(m["status"]["exit_code"], 0);
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    for a in m["artifacts"].as_array().unwrap() {
        let bytes = fs::read(out.join(a["path"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"], sha256_hex(&bytes));
        assert_eq!(a["bytes"], bytes.len() as u64);
    }
    let derived: Value = serde_json::from_slice(&fs::read(out.join("derived.json")).unwrap()).unwrap();
    assert!((derived["derived"]["mu"].as_f64().unwrap() - 0.18).abs() < 1e-12, "{derived}");
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let cases = [
        (r#"{"spec": {"x": -1, "y": 1, "a1": 0, "a2": 0, "sigma1": 1, "sigma2": 1}, "experiment": "derive"}"#, "invalid_spec"),
        (&*format!(r#"{{{SPEC}, "experiment": "derive", "bogus": 1}}"#), "invalid_run_file"),
        (&*format!(r#"{{{SPEC}, "experiment": "nonsense"}}"#), "invalid_run_file"),
        ("{ not json", "invalid_run_file"),
    ];
    for (i, (text, reason)) in cases.iter().enumerate() {
        let rf = write(dir.path(), &format!("bad{i}.json"), text);
        let o = run(&["run", "--run", rf.to_str().unwrap(), "--out", out]);
        assert_eq!(code(&o), 1, "case {i}");
        let err: Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
        assert_eq!(err["error"], *reason, "case {i}: {err}");
    }
    let o = run(&["run", "--run", dir.path().join("missing.json").to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 1);
    // An experiment the subcommand does not cover.
    let rf = write(dir.path(), "d.json", &format!(r#"{{{SPEC}, "experiment": "derive"}}"#));
    assert_eq!(code(&run(&["hjb", "--run", rf.to_str().unwrap(), "--out", out])), 1);
    // Unknown flags.
    assert_eq!(code(&run(&["run", "--bogus"])), 1);
    // No output directory anywhere.
    assert_eq!(code(&run(&["run", "--run", rf.to_str().unwrap()])), 1);
}

#[test]
fn failed_checks_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let rf = write(
        dir.path(),
        "e.json",
        r#"{"spec": {"x": 2.0, "y": 1.0, "a1": 0.0, "a2": 1.0, "sigma1": 1.0, "sigma2": 1.0},
            "experiment": "reproduce-efficiency", "mc": {"n_paths": 100, "dt": 0.01, "seed": 5},
            "t_max": 20, "rel_tol": 0.0}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["run", "--run", rf.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("FAIL mirror_rate_within_tolerance"), "{stdout}");
    let m: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"]["exit_code"], 2);
    // A grid too coarse to resolve a gap the classifier predicts.
    let rf = write(
        dir.path(),
        "h.json",
        &format!(r#"{{{SPEC}, "experiment": "hjb", "sign": "plus", "horizon": 0.5, "grid": {{"n_z": 32}}}}"#),
    );
    let o = run(&["hjb", "--run", rf.to_str().unwrap(), "--out", dir.path().join("h").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL gap_verdict_consistent"));
    assert_eq!(exit_code(&Error::VerdictMismatch("x".into())), EXIT_CONSISTENCY);
    assert_eq!(exit_code(&Error::NeverCouples), EXIT_INPUT);
}

#[test]
fn reruns_are_bit_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let rf = write(
        dir.path(),
        "s.json",
        &format!(
            r#"{{{SPEC}, "experiment": "simulate",
                "policy": {{"kind": "switching", "sign": "plus", "center": [0.4, 0.2], "half_widths": [0.2, 0.1]}},
                "cfg": {{"n_paths": 3000, "dt": 0.005, "horizon": 2.0, "master_seed": 12}},
                "outputs": {{"survival_times": [0.5, 2.0], "laplace_q": [1.0], "hit_times": true}}}}"#
        ),
    );
    let mut trees = Vec::new();
    for threads in ["1", "3", "16"] {
        let out = dir.path().join(format!("out{threads}"));
        let o = run(&["--threads", threads, "simulate", "--run", rf.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let mut t = tree(&out);
        assert!(t.remove("manifest.json").is_some());
        trees.push(t);
    }
    assert!(trees[0].contains_key("hit_times.bin"));
    assert_eq!(fs::metadata(dir.path().join("out1/hit_times.bin")).unwrap().len(), 8 * 3000);
    assert_eq!(trees[0], trees[1]);
    assert_eq!(trees[0], trees[2]);
    let header = fs::read_to_string(dir.path().join("out1/survival.csv")).unwrap();
    assert!(header.starts_with("t,survival,std_error,n_paths,phi_mirror,phi_synchronous\n"), "{header}");
}

#[test]
fn nothing_is_written_outside_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let rf = write(
        dir.path(),
        "h.json",
        r#"{"spec": {"x": 2.0, "y": 1.0, "a1": 0.0, "a2": 0.0, "sigma1": 0.6, "sigma2": 1.0},
            "experiment": "hjb", "sign": "plus", "horizon": 0.5, "grid": {"n_z": 32}, "stride": 2}"#,
    );
    let out = dir.path().join("nested/out");
    let o = run(&["hjb", "--run", rf.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<String> = tree(dir.path()).into_keys().collect();
    assert!(files.iter().all(|f| f == "h.json" || f.starts_with("nested/out/")), "{files:?}");
    let names: Vec<&str> = files.iter().filter_map(|f| f.strip_prefix("nested/out/")).collect();
    assert_eq!(names, ["gap_report.json", "manifest.json", "surface.csv"]);
    let surface = fs::read_to_string(out.join("surface.csv")).unwrap();
    assert!(surface.starts_with("z,t,F,c\n"));
}

#[test]
fn output_dir_from_the_run_file_is_relative_to_the_working_directory() {
    let dir = tempfile::tempdir().unwrap();
    let rf = write(dir.path(), "d.json", &format!(r#"{{{SPEC}, "experiment": "derive", "output_dir": "results/d"}}"#));
    let o = Command::new(BIN).current_dir(dir.path()).args(["run", "--run", rf.to_str().unwrap()]).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("results/d/derived.json").exists());
}

#[test]
fn sweep_writes_one_row_per_spec() {
    let dir = tempfile::tempdir().unwrap();
    let rf = write(
        dir.path(),
        "sw.json",
        r#"{"spec": {"x": 2.0, "y": 1.0, "a1": 0.0, "a2": 0.0, "sigma1": 0.5, "sigma2": 1.0},
            "experiment": "derive",
            "sweep": {"vary": {"a2": [-0.5, 0.375, 1.0], "y": [1.0, 3.0]}, "swap_check": true, "q": [0.5, 2.0]}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["sweep", "--run", rf.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for r in &rows {
        assert_eq!(r.len(), header.len());
        assert_eq!(r[col("status")], "ok");
        assert_eq!(r[col("swap_invariant")], "true");
        assert_eq!(r[col("psi_monotone")], "true");
    }
    for i in 0..6 {
        assert!(out.join(format!("row_{i:04}/manifest.json")).exists() || out.join(format!("row_{i:04}")).is_dir());
    }
    let m: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"]["rows"], 6);
}

#[test]
fn sweep_marks_invalid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let rf = write(
        dir.path(),
        "sw.json",
        r#"{"spec": {"x": 2.0, "y": 1.0, "a1": 0.0, "a2": 0.0, "sigma1": 0.5, "sigma2": 1.0},
            "experiment": "derive", "sweep": {"vary": {"sigma1": [0.5, -1.0]}}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["sweep", "--run", rf.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.lines().nth(2).unwrap().contains(",error,"), "{csv}");
}

#[test]
fn shipped_run_files_parse() {
    let runs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../runs");
    let mut seen = 0;
    for e in fs::read_dir(&runs).unwrap() {
        let p = e.unwrap().path();
        if p.extension().and_then(|s| s.to_str()) != Some("json") {
            continue;
        }
        let text = fs::read_to_string(&p).unwrap();
        if text.contains("\"sweep\"") {
            SweepFile::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        } else {
            let r = RunFile::from_str(&text, None).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            // The canonical form parses back to the same run.
            let again = RunFile::from_value(r.to_value().unwrap(), None).unwrap();
            assert_eq!(again.to_value().unwrap(), r.to_value().unwrap());
        }
        seen += 1;
    }
    assert!(seen >= 9, "{seen}");
}
