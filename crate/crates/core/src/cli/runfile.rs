//! JSON run files.
//!
//! A run file is one object. Three keys are shared by every experiment:
//! `spec`, `experiment` and the optional `output_dir`. All other keys belong
//! to the experiment's parameter block and are checked against it, so a
//! misspelled key is an error rather than a silently ignored setting.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::hjb::{self, BoundaryMode, GridSpec};
use crate::params::{DerivedConstants, ProblemSpec, Sign};
use crate::simulate::{switching_policy, ControlBox, CouplingPolicy, SimConfig, SwitchingPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Derive,
    AnalyticTable,
    Simulate,
    Hjb,
    ReproduceTheoremFinite,
    ReproduceTheoremDiscounted,
    ReproduceEfficiency,
    ReproduceStationary,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Derive,
        ExperimentKind::AnalyticTable,
        ExperimentKind::Simulate,
        ExperimentKind::Hjb,
        ExperimentKind::ReproduceTheoremFinite,
        ExperimentKind::ReproduceTheoremDiscounted,
        ExperimentKind::ReproduceEfficiency,
        ExperimentKind::ReproduceStationary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Derive => "derive",
            ExperimentKind::AnalyticTable => "analytic-table",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Hjb => "hjb",
            ExperimentKind::ReproduceTheoremFinite => "reproduce-theorem-finite",
            ExperimentKind::ReproduceTheoremDiscounted => "reproduce-theorem-discounted",
            ExperimentKind::ReproduceEfficiency => "reproduce-efficiency",
            ExperimentKind::ReproduceStationary => "reproduce-stationary",
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == tag)
            .ok_or_else(|| Error::RunFile(format!("unknown experiment {tag:?}")))
    }
}

/// Coupling policy as written in a run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    Mirror,
    Synchronous,
    Constant {
        c: f64,
    },
    /// Candidate control of `sign` outside a box around `center` (z, elapsed
    /// time), the opposite control inside.
    Switching {
        sign: Sign,
        center: (f64, f64),
        half_widths: (f64, f64),
    },
    /// Fully explicit switching boxes.
    SwitchingBoxes {
        entry: ControlBox,
        exit: ControlBox,
        inside: f64,
        outside: f64,
    },
    /// Feedback extracted from the grid solution of the problem of `sign`.
    HjbFeedback {
        sign: Sign,
        #[serde(default)]
        grid: GridParams,
    },
}

impl PolicySpec {
    /// Builds the policy; `horizon` is the simulation horizon, used by the
    /// grid feedback.
    pub fn build(&self, d: &DerivedConstants, horizon: f64) -> Result<CouplingPolicy> {
        let policy = match self {
            PolicySpec::Mirror => CouplingPolicy::Mirror,
            PolicySpec::Synchronous => CouplingPolicy::Synchronous,
            PolicySpec::Constant { c } => CouplingPolicy::Constant(*c),
            PolicySpec::Switching { sign, center, half_widths } => {
                switching_policy(*sign, *center, *half_widths)?
            }
            PolicySpec::SwitchingBoxes { entry, exit, inside, outside } => {
                CouplingPolicy::Switching(SwitchingPolicy {
                    entry: *entry,
                    exit: *exit,
                    inside: *inside,
                    outside: *outside,
                })
            }
            PolicySpec::HjbFeedback { sign, grid } => {
                let g = grid.resolve(d, horizon)?;
                hjb::extract_policy(&hjb::solve(d, *sign, horizon, &g)?)
            }
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn label(&self) -> String {
        match self {
            PolicySpec::Mirror => "mirror".into(),
            PolicySpec::Synchronous => "synchronous".into(),
            PolicySpec::Constant { c } => format!("constant({c})"),
            PolicySpec::Switching { sign, center, half_widths } => format!(
                "switching-{sign}(z={},t={},rz={},rt={})",
                center.0, center.1, half_widths.0, half_widths.1
            ),
            PolicySpec::SwitchingBoxes { .. } => "switching-boxes".into(),
            PolicySpec::HjbFeedback { sign, .. } => format!("hjb-feedback-{sign}"),
        }
    }
}

/// Grid settings with defaults: `z_max` from the standard truncation and
/// `n_t` the smallest stable count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    #[serde(default = "default_n_z")]
    pub n_z: usize,
    #[serde(default)]
    pub n_t: Option<usize>,
    #[serde(default)]
    pub z_max: Option<f64>,
    #[serde(default)]
    pub boundary_mode: BoundaryMode,
}

fn default_n_z() -> usize {
    128
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams { n_z: default_n_z(), n_t: None, z_max: None, boundary_mode: BoundaryMode::default() }
    }
}

impl GridParams {
    pub fn resolve(&self, d: &DerivedConstants, horizon: f64) -> Result<GridSpec> {
        let mut g = GridSpec::standard(d, horizon, self.n_z, 1, self.boundary_mode);
        if let Some(z_max) = self.z_max {
            g.z_max = z_max;
        }
        if self.n_z < hjb::MIN_NZ {
            return Err(Error::Precondition(format!(
                "n_z must be at least {}, got {}",
                hjb::MIN_NZ,
                self.n_z
            )));
        }
        g.n_t = match self.n_t {
            Some(n) => n,
            None => g.stable_n_t(d, horizon),
        };
        g.validate(d, horizon)?;
        Ok(g)
    }
}

/// Monte Carlo settings shared by the reproduction experiments; the horizon
/// is chosen by the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McParams {
    pub n_paths: u64,
    pub dt: f64,
    pub seed: u64,
    #[serde(default = "yes")]
    pub bridge_correction: bool,
}

fn yes() -> bool {
    true
}

impl McParams {
    pub fn config(&self, horizon: f64) -> SimConfig {
        SimConfig {
            n_paths: self.n_paths,
            dt: self.dt,
            horizon,
            master_seed: self.seed,
            bridge_correction: self.bridge_correction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeriveParams {
    /// Horizons at which the finite-horizon verdicts are reported.
    #[serde(default = "default_horizons")]
    pub horizons: Vec<f64>,
    /// Discount rates at which the discounted values are reported.
    #[serde(default = "default_rates")]
    pub q: Vec<f64>,
}

fn default_horizons() -> Vec<f64> {
    vec![1.0]
}

fn default_rates() -> Vec<f64> {
    vec![0.5, 2.0]
}

impl Default for DeriveParams {
    fn default() -> Self {
        DeriveParams { horizons: default_horizons(), q: default_rates() }
    }
}

/// Evaluation points: the explicit `points` plus the product `z x t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticTableParams {
    #[serde(default)]
    pub points: Vec<(f64, f64)>,
    #[serde(default)]
    pub z: Vec<f64>,
    #[serde(default)]
    pub t: Vec<f64>,
    #[serde(default = "default_rates")]
    pub q: Vec<f64>,
}

impl AnalyticTableParams {
    pub fn all_points(&self) -> Vec<(f64, f64)> {
        let mut out = self.points.clone();
        for &z in &self.z {
            for &t in &self.t {
                out.push((z, t));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailParams {
    /// Last regression time; points are geometric on `[t_max / 4, t_max]`.
    pub t_max: f64,
    #[serde(default = "default_tail_points")]
    pub n_points: usize,
    pub stage_width: f64,
}

fn default_tail_points() -> usize {
    8
}

/// What the `simulate` experiment reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SimOutputs {
    /// Times at which `P(tau > t)` is estimated; defaults to the horizon.
    #[serde(default)]
    pub survival_times: Vec<f64>,
    #[serde(default)]
    pub laplace_q: Vec<f64>,
    /// Largest acceptable Laplace bracket width.
    #[serde(default)]
    pub laplace_tolerance: Option<f64>,
    /// Time grid of the ergodic time average; empty disables it.
    #[serde(default)]
    pub ergodic_grid: Vec<f64>,
    /// Tail regression by splitting, with its own horizon `t_max`.
    #[serde(default)]
    pub tail: Option<TailParams>,
    /// Write the raw per-path hit times.
    #[serde(default)]
    pub hit_times: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub policy: PolicySpec,
    pub cfg: SimConfig,
    #[serde(default)]
    pub outputs: SimOutputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HjbParams {
    pub sign: Sign,
    pub horizon: f64,
    #[serde(default)]
    pub grid: GridParams,
    /// Write the full `(z, t, F, c)` surface.
    #[serde(default = "yes")]
    pub surface: bool,
    /// Keep every `stride`-th row and column of the surface CSV.
    #[serde(default = "one")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteParams {
    #[serde(default = "unit")]
    pub horizon: f64,
    #[serde(default = "plus")]
    pub sign: Sign,
    pub mc: McParams,
    #[serde(default)]
    pub grid: GridParams,
    /// Half widths `(z, t)` of the first switching box tried; shrunk until
    /// the box lies where `phi_xy < 0`.
    #[serde(default)]
    pub half_widths: Option<(f64, f64)>,
    /// Simulate the grid feedback policy and compare with the grid value.
    #[serde(default = "yes")]
    pub feedback_check: bool,
}

fn unit() -> f64 {
    1.0
}

fn plus() -> Sign {
    Sign::Plus
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscountedParams {
    #[serde(default = "default_rates")]
    pub q: Vec<f64>,
    pub mc: McParams,
    /// Censoring horizon; should make `exp(-q horizon)` negligible.
    pub horizon: f64,
    #[serde(default = "default_constants")]
    pub constants: Vec<f64>,
    /// Number of randomly placed switching policies.
    #[serde(default = "three")]
    pub random_switching: usize,
}

fn default_constants() -> Vec<f64> {
    vec![-0.5, 0.0, 0.5]
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyParams {
    pub mc: McParams,
    /// Last regression time; defaults to a horizon where the `t^(-3/2)`
    /// prefactor biases the slope by about 3%.
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_tail_points")]
    pub n_points: usize,
    #[serde(default)]
    pub stage_width: Option<f64>,
    /// Relative tolerance on the fitted rates.
    #[serde(default = "ten_percent")]
    pub rel_tol: f64,
}

fn ten_percent() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryParams {
    pub mc: McParams,
    /// Censoring horizon; defaults to `50 / |mu|` (stretched for `mu < 0`).
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Policies checked besides mirror and synchronous.
    #[serde(default = "default_extra_policies")]
    pub policies: Vec<PolicySpec>,
    /// Threshold for "tends to zero" when `mu > 0`.
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
}

fn default_extra_policies() -> Vec<PolicySpec> {
    vec![
        PolicySpec::Constant { c: 0.0 },
        PolicySpec::Constant { c: 0.5 },
        PolicySpec::Switching { sign: Sign::Plus, center: (0.5, 1.0), half_widths: (0.25, 0.5) },
    ]
}

fn default_zero_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentParams {
    Derive(DeriveParams),
    AnalyticTable(AnalyticTableParams),
    Simulate(SimulateParams),
    Hjb(HjbParams),
    ReproduceTheoremFinite(FiniteParams),
    ReproduceTheoremDiscounted(DiscountedParams),
    ReproduceEfficiency(EfficiencyParams),
    ReproduceStationary(StationaryParams),
}

impl ExperimentParams {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            ExperimentParams::Derive(_) => ExperimentKind::Derive,
            ExperimentParams::AnalyticTable(_) => ExperimentKind::AnalyticTable,
            ExperimentParams::Simulate(_) => ExperimentKind::Simulate,
            ExperimentParams::Hjb(_) => ExperimentKind::Hjb,
            ExperimentParams::ReproduceTheoremFinite(_) => ExperimentKind::ReproduceTheoremFinite,
            ExperimentParams::ReproduceTheoremDiscounted(_) => {
                ExperimentKind::ReproduceTheoremDiscounted
            }
            ExperimentParams::ReproduceEfficiency(_) => ExperimentKind::ReproduceEfficiency,
            ExperimentParams::ReproduceStationary(_) => ExperimentKind::ReproduceStationary,
        }
    }

    /// Parses the parameter block of `kind` from the remaining keys.
    pub fn from_block(kind: ExperimentKind, block: Map<String, Value>) -> Result<Self> {
        fn typed<T: DeserializeOwned>(block: Map<String, Value>) -> Result<T> {
            serde_json::from_value(Value::Object(block))
                .map_err(|e| Error::RunFile(e.to_string()))
        }
        Ok(match kind {
            ExperimentKind::Derive => ExperimentParams::Derive(typed(block)?),
            ExperimentKind::AnalyticTable => ExperimentParams::AnalyticTable(typed(block)?),
            ExperimentKind::Simulate => ExperimentParams::Simulate(typed(block)?),
            ExperimentKind::Hjb => ExperimentParams::Hjb(typed(block)?),
            ExperimentKind::ReproduceTheoremFinite => {
                ExperimentParams::ReproduceTheoremFinite(typed(block)?)
            }
            ExperimentKind::ReproduceTheoremDiscounted => {
                ExperimentParams::ReproduceTheoremDiscounted(typed(block)?)
            }
            ExperimentKind::ReproduceEfficiency => ExperimentParams::ReproduceEfficiency(typed(block)?),
            ExperimentKind::ReproduceStationary => ExperimentParams::ReproduceStationary(typed(block)?),
        })
    }

    /// The parameter block as a JSON object, without the experiment tag.
    pub fn to_block(&self) -> Result<Map<String, Value>> {
        match serde_json::to_value(self)? {
            Value::Object(mut m) => {
                m.remove("experiment");
                Ok(m)
            }
            _ => unreachable!("experiment parameters serialize to objects"),
        }
    }
}

/// A parsed and validated run file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub spec: ProblemSpec,
    pub params: ExperimentParams,
    pub output_dir: Option<PathBuf>,
}

impl RunFile {
    pub fn kind(&self) -> ExperimentKind {
        self.params.kind()
    }

    /// Parses a run file. `default_kind` applies when the file has no
    /// `experiment` key.
    pub fn from_value(value: Value, default_kind: Option<ExperimentKind>) -> Result<Self> {
        let Value::Object(mut map) = value else {
            return Err(Error::RunFile("run file must be a JSON object".into()));
        };
        let spec = map
            .remove("spec")
            .ok_or_else(|| Error::RunFile("missing key \"spec\"".into()))?;
        let spec: ProblemSpec =
            serde_json::from_value(spec).map_err(|e| Error::RunFile(format!("spec: {e}")))?;
        spec.validate()?;
        let kind = match map.remove("experiment") {
            Some(Value::String(tag)) => ExperimentKind::parse(&tag)?,
            Some(other) => return Err(Error::RunFile(format!("experiment must be a string, got {other}"))),
            None => default_kind.ok_or_else(|| Error::RunFile("missing key \"experiment\"".into()))?,
        };
        let output_dir = match map.remove("output_dir") {
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(Value::Null) | None => None,
            Some(other) => return Err(Error::RunFile(format!("output_dir must be a string, got {other}"))),
        };
        let params = ExperimentParams::from_block(kind, map)?;
        Ok(RunFile { spec, params, output_dir })
    }

    pub fn from_str(text: &str, default_kind: Option<ExperimentKind>) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::RunFile(e.to_string()))?;
        RunFile::from_value(value, default_kind)
    }

    pub fn load(path: &Path, default_kind: Option<ExperimentKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        RunFile::from_str(&text, default_kind)
    }

    /// The canonical JSON form, with every default filled in.
    pub fn to_value(&self) -> Result<Value> {
        let mut map = self.params.to_block()?;
        map.insert("spec".into(), serde_json::to_value(self.spec)?);
        map.insert("experiment".into(), Value::String(self.kind().as_str().into()));
        if let Some(dir) = &self.output_dir {
            map.insert("output_dir".into(), Value::String(dir.display().to_string()));
        }
        Ok(Value::Object(map))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn spec() -> Value {
        json!({"x": 2.0, "y": 1.0, "a1": 0.0, "a2": 0.0, "sigma1": 1.0, "sigma2": 1.0})
    }

    #[test]
    fn parses_simulate_block() {
        let v = json!({
            "spec": spec(),
            "experiment": "simulate",
            "policy": {"kind": "constant", "c": 0.5},
            "cfg": {"n_paths": 10, "dt": 0.01, "horizon": 1.0, "master_seed": 3},
            "outputs": {"survival_times": [0.5, 1.0]}
        });
        let r = RunFile::from_value(v, None).unwrap();
        assert_eq!(r.kind(), ExperimentKind::Simulate);
        let ExperimentParams::Simulate(p) = &r.params else { panic!() };
        assert!(p.cfg.bridge_correction);
        assert_eq!(p.policy, PolicySpec::Constant { c: 0.5 });
        let again = RunFile::from_value(r.to_value().unwrap(), None).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn rejects_unknown_keys_everywhere() {
        let top = json!({"spec": spec(), "experiment": "derive", "colour": 1});
        assert!(matches!(RunFile::from_value(top, None), Err(Error::RunFile(_))));
        let mut s = spec();
        s["z"] = json!(1.0);
        assert!(RunFile::from_value(json!({"spec": s, "experiment": "derive"}), None).is_err());
        let nested = json!({
            "spec": spec(), "experiment": "hjb", "sign": "plus", "horizon": 1.0,
            "grid": {"n_z": 64, "nz": 3}
        });
        assert!(RunFile::from_value(nested, None).is_err());
    }

    #[test]
    fn experiment_tag_rules() {
        assert!(RunFile::from_value(json!({"spec": spec()}), None).is_err());
        let r = RunFile::from_value(json!({"spec": spec()}), Some(ExperimentKind::Derive)).unwrap();
        assert_eq!(r.params, ExperimentParams::Derive(DeriveParams::default()));
        assert!(RunFile::from_value(json!({"spec": spec(), "experiment": "nope"}), None).is_err());
        for k in ExperimentKind::ALL {
            assert_eq!(ExperimentKind::parse(k.as_str()).unwrap(), k);
        }
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let mut s = spec();
        s["sigma1"] = json!(0.0);
        let err = RunFile::from_value(json!({"spec": s, "experiment": "derive"}), None).unwrap_err();
        assert_eq!(err.reason(), "invalid_spec");
    }
}
