//! Running one experiment over many problem specifications.
//!
//! A sweep file is a run file (its `spec` is the base specification) with an
//! extra `sweep` block naming the grid:
//!
//! ```json
//! "sweep": {"vary": {"a2": [0.0, 0.5, 1.0]}, "specs": [], "swap_check": true,
//!           "q": [0.5, 1.0, 2.0], "horizon": 1.0}
//! ```
//!
//! `vary` takes the cartesian product over the listed fields; `specs` adds
//! explicit specifications. Each row runs the experiment in its own
//! subdirectory and contributes one line to `sweep.csv`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::experiments::run_experiment;
use super::output::{Artifact, ArtifactSink, Cell, Table};
use super::runfile::{ExperimentKind, RunFile};
use crate::analytic;
use crate::error::{Error, Result};
use crate::params::{classify_finite_horizon, derive, DerivedConstants, ProblemSpec, Sign};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    /// Field name to values; fields are `x, y, a1, a2, sigma1, sigma2`.
    #[serde(default)]
    pub vary: std::collections::BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub specs: Vec<ProblemSpec>,
    /// Also evaluate every spec with X and Y exchanged and require identical
    /// reduced results.
    #[serde(default)]
    pub swap_check: bool,
    /// Discount rates for the `psi` columns.
    #[serde(default = "default_q")]
    pub q: Vec<f64>,
    /// Horizon of the finite-horizon columns.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

fn default_q() -> Vec<f64> {
    vec![0.5, 2.0]
}

fn default_horizon() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFile {
    pub base: RunFile,
    pub grid: SweepGrid,
}

impl SweepFile {
    pub fn from_str(text: &str) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| Error::RunFile(e.to_string()))?;
        let grid = match value.as_object_mut().and_then(|m| m.remove("sweep")) {
            Some(v) => serde_json::from_value(v).map_err(|e| Error::RunFile(format!("sweep: {e}")))?,
            None => SweepGrid::default(),
        };
        let base = RunFile::from_value(value, Some(ExperimentKind::Derive))?;
        Ok(SweepFile { base, grid })
    }

    pub fn load(path: &Path) -> Result<Self> {
        SweepFile::from_str(&std::fs::read_to_string(path)?)
    }

    /// Every specification of the sweep, in a fixed order.
    pub fn specs(&self) -> Result<Vec<ProblemSpec>> {
        let mut out = vec![self.base.spec];
        for (field, values) in &self.grid.vary {
            if values.is_empty() {
                return Err(Error::RunFile(format!("sweep field {field} has no values")));
            }
            let mut next = Vec::with_capacity(out.len() * values.len());
            for s in &out {
                for &v in values {
                    let mut t = *s;
                    let slot = match field.as_str() {
                        "x" => &mut t.x,
                        "y" => &mut t.y,
                        "a1" => &mut t.a1,
                        "a2" => &mut t.a2,
                        "sigma1" => &mut t.sigma1,
                        "sigma2" => &mut t.sigma2,
                        other => return Err(Error::RunFile(format!("unknown sweep field {other:?}"))),
                    };
                    *slot = v;
                    next.push(t);
                }
            }
            out = next;
        }
        if self.grid.vary.is_empty() && !self.grid.specs.is_empty() {
            out.clear();
        }
        out.extend(self.grid.specs.iter().copied());
        if out.is_empty() {
            return Err(Error::RunFile("sweep has no specifications".into()));
        }
        Ok(out)
    }
}

/// Reduced quantities compared by the swap check and reported per row.
#[derive(Debug, Clone, PartialEq)]
struct Core {
    d: DerivedConstants,
    verdict_plus: String,
    verdict_minus: String,
    phi_plus: f64,
    phi_minus: f64,
    psi_plus: Vec<f64>,
    psi_minus: Vec<f64>,
}

impl Core {
    fn compute(spec: &ProblemSpec, grid: &SweepGrid) -> Result<Self> {
        let d = derive(spec)?;
        let verdict = |sign| -> String {
            classify_finite_horizon(&d, sign, grid.horizon)
                .ok()
                .and_then(|v| serde_json::to_value(v.verdict).ok())
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_else(|| "n/a".into())
        };
        let phi = |sign| analytic::phi(&d, grid.horizon, sign).unwrap_or(f64::NAN);
        let psi = |sign| -> Result<Vec<f64>> {
            grid.q.iter().map(|&q| analytic::psi(&d, q, sign).map(|v| v.value)).collect()
        };
        Ok(Core {
            d,
            verdict_plus: verdict(Sign::Plus),
            verdict_minus: verdict(Sign::Minus),
            phi_plus: phi(Sign::Plus),
            phi_minus: phi(Sign::Minus),
            psi_plus: psi(Sign::Plus)?,
            psi_minus: psi(Sign::Minus)?,
        })
    }

    /// Equality of everything but the swap flag and the raw spec. NaN
    /// compares equal to NaN.
    fn same_reduced(&self, other: &Core) -> bool {
        let eq = |a: f64, b: f64| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan());
        let vec_eq = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| eq(*x, *y));
        eq(self.d.mu, other.d.mu)
            && eq(self.d.sigma_plus, other.d.sigma_plus)
            && eq(self.d.sigma_minus, other.d.sigma_minus)
            && eq(self.d.z0, other.d.z0)
            && self.verdict_plus == other.verdict_plus
            && self.verdict_minus == other.verdict_minus
            && eq(self.phi_plus, other.phi_plus)
            && eq(self.phi_minus, other.phi_minus)
            && vec_eq(&self.psi_plus, &other.psi_plus)
            && vec_eq(&self.psi_minus, &other.psi_minus)
    }
}

/// Whether `psi` is non-increasing as a function of `q`.
fn decreasing_in(q: &[f64], psi: &[f64]) -> bool {
    let mut pairs: Vec<(f64, f64)> = q.iter().copied().zip(psi.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.windows(2).all(|w| w[1].1 <= w[0].1)
}

/// One aggregated line.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub index: usize,
    pub spec: ProblemSpec,
    pub cells: Vec<Cell>,
    pub status: RowStatus,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    ConsistencyFailure,
    Error,
}

impl RowStatus {
    fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::ConsistencyFailure => "consistency-failure",
            RowStatus::Error => "error",
        }
    }
}

pub fn header(grid: &SweepGrid) -> Vec<String> {
    let mut h: Vec<String> = [
        "row", "x", "y", "a1", "a2", "sigma1", "sigma2", "swapped", "mu", "sigma_plus", "sigma_minus", "z0",
        "verdict_plus", "verdict_minus", "phi_plus", "phi_minus",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for q in &grid.q {
        h.push(format!("psi_plus_q{q}"));
    }
    for q in &grid.q {
        h.push(format!("psi_minus_q{q}"));
    }
    for s in [
        "psi_monotone", "swap_invariant", "gap", "gap_error", "gap_significant", "checks_passed",
        "checks_total", "status", "reason",
    ] {
        h.push(s.into());
    }
    h
}

fn run_row(index: usize, spec: &ProblemSpec, file: &SweepFile, root: &Path) -> SweepRow {
    let grid = &file.grid;
    let name = format!("row_{index:04}");
    let mut cells: Vec<Cell> = vec![
        index.into(),
        spec.x.into(),
        spec.y.into(),
        spec.a1.into(),
        spec.a2.into(),
        spec.sigma1.into(),
        spec.sigma2.into(),
    ];
    let width = header(grid).len();
    let fail = |mut cells: Vec<Cell>, reason: String| {
        while cells.len() < width - 2 {
            cells.push(Cell::S(String::new()));
        }
        cells.push(RowStatus::Error.as_str().into());
        cells.push(reason.into());
        SweepRow { index, spec: *spec, cells, status: RowStatus::Error, artifacts: Vec::new() }
    };
    let core = match Core::compute(spec, grid) {
        Ok(c) => c,
        Err(e) => return fail(cells, e.reason().into()),
    };
    let d = &core.d;
    cells.extend([
        d.swapped.into(),
        d.mu.into(),
        d.sigma_plus.into(),
        d.sigma_minus.into(),
        d.z0.into(),
        core.verdict_plus.clone().into(),
        core.verdict_minus.clone().into(),
        core.phi_plus.into(),
        core.phi_minus.into(),
    ]);
    cells.extend(core.psi_plus.iter().map(|&v| Cell::from(v)));
    cells.extend(core.psi_minus.iter().map(|&v| Cell::from(v)));
    let monotone = decreasing_in(&grid.q, &core.psi_plus) && decreasing_in(&grid.q, &core.psi_minus);
    let swap_ok = if grid.swap_check {
        match Core::compute(&spec.swapped(), grid) {
            Ok(other) => Some(core.same_reduced(&other)),
            Err(_) => Some(false),
        }
    } else {
        None
    };
    cells.push(monotone.into());
    cells.push(swap_ok.map(Cell::from).unwrap_or_else(|| Cell::S(String::new())));

    let mut failures: Vec<String> = Vec::new();
    if !monotone {
        failures.push("psi_not_monotone".into());
    }
    if swap_ok == Some(false) {
        failures.push("swap_variant".into());
    }

    let sink = ArtifactSink::new(&root.join(&name));
    let result = sink.and_then(|mut sink| {
        run_experiment(spec, &file.base.params, &mut sink).map(|o| (o, sink.artifacts().to_vec()))
    });
    let (outcome, artifacts) = match result {
        Ok(x) => x,
        Err(e) => {
            let status = if matches!(e, Error::VerdictMismatch(_)) {
                RowStatus::ConsistencyFailure
            } else {
                RowStatus::Error
            };
            let mut row = fail(cells, e.reason().into());
            row.status = status;
            let n = row.cells.len();
            row.cells[n - 2] = status.as_str().into();
            return row;
        }
    };
    let gap = &outcome.summary["gap_report"];
    let num = |v: &Value| v.as_f64().map(Cell::from).unwrap_or_else(|| Cell::S(String::new()));
    cells.push(num(&gap["gap"]));
    cells.push(num(&gap["error"]));
    cells.push(gap["significant"].as_bool().map(Cell::from).unwrap_or_else(|| Cell::S(String::new())));
    let passed = outcome.checks.iter().filter(|c| c.passed).count();
    cells.push(passed.into());
    cells.push(outcome.checks.len().into());
    failures.extend(outcome.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()));
    let status = if failures.is_empty() { RowStatus::Ok } else { RowStatus::ConsistencyFailure };
    cells.push(status.as_str().into());
    cells.push(failures.join(";").into());
    SweepRow { index, spec: *spec, cells, status, artifacts }
}

#[derive(Debug)]
pub struct SweepResult {
    pub table: Table,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn any(&self, status: RowStatus) -> bool {
        self.rows.iter().any(|r| r.status == status)
    }
}

/// Runs every row (in parallel) and writes `sweep.csv` plus the per-row
/// artifacts into `sink`.
pub fn run_sweep(file: &SweepFile, sink: &mut ArtifactSink) -> Result<SweepResult> {
    let specs = file.specs()?;
    let root = sink.root().to_path_buf();
    let rows: Vec<SweepRow> = specs
        .par_iter()
        .enumerate()
        .map(|(i, s)| run_row(i, s, file, &root))
        .collect();
    let mut table = Table::new(&header(&file.grid));
    for r in &rows {
        table.push(r.cells.clone());
        sink.adopt(&format!("row_{:04}", r.index), &r.artifacts);
    }
    sink.csv("sweep.csv", &table)?;
    Ok(SweepResult { table, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"spec": {"x": 2, "y": 1, "a1": 0, "a2": 0, "sigma1": 1, "sigma2": 1}, "experiment": "derive"}"#;

    #[test]
    fn cartesian_product_order() {
        let mut f = SweepFile::from_str(BASE).unwrap();
        f.grid.vary.insert("a2".into(), vec![0.0, 1.0]);
        f.grid.vary.insert("x".into(), vec![2.0, 3.0, 4.0]);
        let s = f.specs().unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!((s[0].a2, s[0].x), (0.0, 2.0));
        assert_eq!((s[1].a2, s[1].x), (0.0, 3.0));
        assert_eq!((s[3].a2, s[3].x), (1.0, 2.0));
        f.grid.vary.insert("colour".into(), vec![1.0]);
        assert!(f.specs().is_err());
    }

    #[test]
    fn rejects_unknown_sweep_keys() {
        let text = BASE.replace("}\n", "").trim_end_matches('}').to_string() + r#", "sweep": {"varry": {}}}"#;
        assert!(SweepFile::from_str(&text).is_err());
    }

    #[test]
    fn explicit_specs_replace_base() {
        let mut f = SweepFile::from_str(BASE).unwrap();
        f.grid.specs.push(ProblemSpec::new(3.0, 1.0, 0.0, 0.0, 1.0, 1.0).unwrap());
        assert_eq!(f.specs().unwrap().len(), 1);
    }
}
