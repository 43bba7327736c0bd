//! Driving experiments from run files in code: a single run and a sweep,
//! written to a temporary directory with their manifests.
//!
//! ```text
//! cargo run --release --example run_file
//! ```

use gbm_coupling::cli::runfile::RunFile;
use gbm_coupling::cli::sweep::SweepFile;
use gbm_coupling::cli::{execute, execute_sweep};

fn main() -> gbm_coupling::Result<()> {
    let root = std::env::temp_dir().join(format!("gbm-coupling-example-{}", std::process::id()));

    let run = RunFile::from_str(
        r#"{
            "spec": {"x": 2.0, "y": 1.0, "a1": 0.0, "a2": 1.0, "sigma1": 1.0, "sigma2": 1.0},
            "experiment": "reproduce-theorem-finite",
            "horizon": 1.0,
            "mc": {"n_paths": 20000, "dt": 0.001, "seed": 7},
            "grid": {"n_z": 64}
        }"#,
        None,
    )?;
    let report = execute(&run, &root.join("finite"))?;
    for c in &report.outcome.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }

    let sweep = SweepFile::from_str(
        r#"{
            "spec": {"x": 2.0, "y": 1.0, "a1": 0.0, "a2": 0.0, "sigma1": 0.5, "sigma2": 1.0},
            "experiment": "derive",
            "sweep": {"vary": {"a2": [-0.5, 0.0, 0.5, 1.0]}, "swap_check": true}
        }"#,
    )?;
    let (result, code) = execute_sweep(&sweep, &root.join("sweep"))?;
    println!("sweep: {} rows, exit status {code}", result.rows.len());
    print!("{}", std::fs::read_to_string(root.join("sweep/sweep.csv"))?);
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
