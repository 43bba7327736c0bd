//! Finite-horizon value function on a grid.
//!
//! In the reduced coordinate the value `F(z, t)` of the best (`Plus`: lowest,
//! `Minus`: highest) survival probability `P(tau > t)` solves
//!
//! ```text
//! F_t = opt_{c in {-1, +1}} [ s(c)/2 F_zz - mu F_z ],   s(c) = sigma1^2 + sigma2^2 - 2 sigma1 sigma2 c
//! F(0, t) = 0,   F(z, 0) = 1 for z > 0,
//! ```
//!
//! with `opt = min` for `Plus` and `max` for `Minus`; `t` is the remaining
//! time. The Hamiltonian is affine in `c`, so only the two extreme controls
//! need comparing at each node.
//!
//! The scheme is explicit in time. Diffusion uses the centered second
//! difference. The drift term is centered when the cell Peclet number of the
//! control is at most one (the scheme is still monotone there) and upwind
//! otherwise, so a monotone scheme is kept for every control while smooth
//! solutions converge at second order in space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::{Error, Result};
use crate::params::{classify_finite_horizon, DerivedConstants, OptimalityVerdict, Sign, Verdict};
use crate::simulate::{CouplingPolicy, FeedbackPolicy};

/// Values at the truncation boundary `z = z_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// The closed-form survival of the candidate coupling of the problem's sign.
    #[default]
    AnalyticMirror,
    /// Survival fixed at one.
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub z_max: f64,
    pub n_z: usize,
    pub n_t: usize,
    #[serde(default)]
    pub boundary_mode: BoundaryMode,
}

/// Smallest number of spatial points a grid may have.
pub const MIN_NZ: usize = 16;

/// Default truncation `z0 + 6 |sigma_plus| sqrt(T) + |mu| T`.
pub fn default_z_max(d: &DerivedConstants, horizon: f64) -> f64 {
    d.z0 + 6.0 * d.sigma_plus.abs() * horizon.sqrt() + d.mu.abs() * horizon
}

/// Per-control coefficients of the explicit update.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    /// Weight of `v[i-1]`, `v[i]`, `v[i+1]` in `dt * H_c(v)`, divided by `dt`.
    lo: f64,
    mid: f64,
    hi: f64,
}

impl Stencil {
    fn new(s: f64, mu: f64, dz: f64) -> Self {
        let diff = 0.5 * s / (dz * dz);
        if s >= mu.abs() * dz {
            let adv = 0.5 * mu / dz;
            Stencil { lo: diff + adv, mid: -2.0 * diff, hi: diff - adv }
        } else if mu >= 0.0 {
            let adv = mu / dz;
            Stencil { lo: diff + adv, mid: -2.0 * diff - adv, hi: diff }
        } else {
            let adv = -mu / dz;
            Stencil { lo: diff, mid: -2.0 * diff - adv, hi: diff + adv }
        }
    }

    /// Rate of decay of the diagonal; the step is monotone iff `dt * rate <= 1`.
    fn rate(&self) -> f64 {
        -self.mid
    }

    #[inline]
    fn apply(&self, a: f64, b: f64, c: f64) -> f64 {
        self.lo * a + self.mid * b + self.hi * c
    }
}

impl GridSpec {
    /// Grid with the default truncation for `d` and `horizon`.
    pub fn standard(
        d: &DerivedConstants,
        horizon: f64,
        n_z: usize,
        n_t: usize,
        boundary_mode: BoundaryMode,
    ) -> Self {
        GridSpec { z_max: default_z_max(d, horizon), n_z, n_t, boundary_mode }
    }

    pub fn dz(&self) -> f64 {
        self.z_max / (self.n_z - 1) as f64
    }

    /// Next level of the refinement ladder: the spatial step halves and the
    /// time step quarters, keeping every old node.
    pub fn refined(&self) -> Self {
        GridSpec { n_z: 2 * (self.n_z - 1) + 1, n_t: 4 * self.n_t, ..*self }
    }

    /// Widens `z_max` slightly so that `z0` falls on a node. Coarsening the
    /// step never breaks stability.
    pub fn aligned(&self, z0: f64) -> Self {
        let dz = self.dz();
        let k = (z0 / dz).floor().max(1.0);
        let dz = z0 / k;
        GridSpec { z_max: dz * (self.n_z - 1) as f64, ..*self }
    }

    fn stencils(&self, d: &DerivedConstants) -> [Stencil; 2] {
        let dz = self.dz();
        [
            Stencil::new(d.variance_rate(-1.0), d.mu, dz),
            Stencil::new(d.variance_rate(1.0), d.mu, dz),
        ]
    }

    fn max_rate(&self, d: &DerivedConstants) -> f64 {
        let [m, s] = self.stencils(d);
        m.rate().max(s.rate())
    }

    /// Fewest time steps that keep the explicit scheme monotone over `horizon`.
    pub fn stable_n_t(&self, d: &DerivedConstants, horizon: f64) -> usize {
        ((horizon * self.max_rate(d)) * (1.0 + 1e-12)).ceil().max(1.0) as usize
    }

    pub fn validate(&self, d: &DerivedConstants, horizon: f64) -> Result<()> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
        }
        if self.n_z < MIN_NZ {
            return Err(Error::Precondition(format!(
                "n_z must be at least {MIN_NZ}, got {}",
                self.n_z
            )));
        }
        if self.n_t == 0 {
            return Err(Error::Precondition("n_t must be positive".into()));
        }
        if !(self.z_max > d.z0 && self.z_max.is_finite()) {
            return Err(Error::Precondition(format!(
                "z_max = {} must exceed z0 = {}",
                self.z_max, d.z0
            )));
        }
        let dt = horizon / self.n_t as f64;
        let limit = 1.0 / self.max_rate(d);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Unstable { dt, limit });
        }
        Ok(())
    }
}

/// The computed value function and the control field that attains it.
///
/// Row `j` holds remaining time `t_j = j dt`; column `i` holds `z_i = i dz`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    pub sign: Sign,
    pub horizon: f64,
    pub grid: GridSpec,
    /// Row-major `(n_t + 1) x n_z`.
    pub values: Vec<f64>,
    /// Row-major `(n_t + 1) x n_z`, entries in `{-1, +1}`. Row `j` is the
    /// control chosen from layer `j`, i.e. the one applied while the
    /// remaining time runs from `t_{j+1}` to `t_j`.
    pub controls: Vec<i8>,
}

impl ValueSurface {
    pub fn dz(&self) -> f64 {
        self.grid.dz()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.grid.n_t as f64
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.grid.n_z;
        &self.values[j * n..(j + 1) * n]
    }

    pub fn control_row(&self, j: usize) -> &[i8] {
        let n = self.grid.n_z;
        &self.controls[j * n..(j + 1) * n]
    }

    pub fn z(&self, i: usize) -> f64 {
        i as f64 * self.dz()
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    /// `F(z, T)` by linear interpolation in `z`.
    pub fn value_at(&self, z: f64) -> f64 {
        interpolate(self.row(self.grid.n_t), self.dz(), z)
    }

    /// Largest `|F - candidate survival|` over the rows with `t >= t_from`,
    /// excluding the truncation boundary.
    pub fn max_deviation(&self, d: &DerivedConstants, t_from: f64) -> Result<f64> {
        let mut worst = 0.0f64;
        for j in 0..=self.grid.n_t {
            let t = self.t(j);
            if t < t_from || t == 0.0 {
                continue;
            }
            worst = worst.max(layer_deviation(d, self.sign, self.row(j), self.dz(), t)?);
        }
        Ok(worst)
    }
}

fn interpolate(row: &[f64], dz: f64, z: f64) -> f64 {
    let x = (z / dz).clamp(0.0, (row.len() - 1) as f64);
    let i = (x.floor() as usize).min(row.len() - 2);
    let w = x - i as f64;
    if w == 0.0 {
        row[i]
    } else {
        (1.0 - w) * row[i] + w * row[i + 1]
    }
}

fn layer_deviation(d: &DerivedConstants, sign: Sign, row: &[f64], dz: f64, t: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, v) in row.iter().enumerate().take(row.len() - 1).skip(1) {
        let exact = analytic::survival(d, sign, i as f64 * dz, t)?;
        worst = worst.max((v - exact).abs());
    }
    Ok(worst)
}

fn control_index(c: i8) -> usize {
    if c < 0 {
        0
    } else {
        1
    }
}

/// Explicit march. Calls `layer(j, values, controls)` for every row, where
/// `controls` is the row chosen from `values`.
fn march<F>(d: &DerivedConstants, sign: Sign, horizon: f64, grid: &GridSpec, mut layer: F) -> Result<()>
where
    F: FnMut(usize, &[f64], &[i8]) -> Result<()>,
{
    grid.validate(d, horizon)?;
    let n = grid.n_z;
    let dt = horizon / grid.n_t as f64;
    let stencils = grid.stencils(d);
    let candidate: i8 = if sign == Sign::Plus { -1 } else { 1 };
    let other = -candidate;
    let (sc, so) = (stencils[control_index(candidate)], stencils[control_index(other)]);
    // Switching away from the candidate needs an improvement beyond the
    // rounding noise of the discrete Hamiltonian, so flat regions keep it.
    let tol = 64.0 * f64::EPSILON * grid.max_rate(d);

    let mut v = vec![1.0; n];
    v[0] = 0.0;
    let mut next = vec![0.0; n];
    let mut ctrl = vec![candidate; n];

    for j in 0..=grid.n_t {
        // Controls from the current layer.
        let mut rates = vec![0.0; n];
        for i in 1..n - 1 {
            let hc = sc.apply(v[i - 1], v[i], v[i + 1]);
            let ho = so.apply(v[i - 1], v[i], v[i + 1]);
            let better = match sign {
                Sign::Plus => ho < hc - tol,
                Sign::Minus => ho > hc + tol,
            };
            if better {
                ctrl[i] = other;
                rates[i] = ho;
            } else {
                ctrl[i] = candidate;
                rates[i] = hc;
            }
        }
        layer(j, &v, &ctrl)?;
        if j == grid.n_t {
            break;
        }
        next[0] = 0.0;
        for i in 1..n - 1 {
            next[i] = (v[i] + dt * rates[i]).clamp(0.0, 1.0);
        }
        let t_next = (j + 1) as f64 * dt;
        next[n - 1] = match grid.boundary_mode {
            BoundaryMode::AnalyticMirror => analytic::survival(d, sign, grid.z_max, t_next)?,
            BoundaryMode::One => 1.0,
        };
        std::mem::swap(&mut v, &mut next);
    }
    Ok(())
}

/// Solves the control problem of `sign` up to remaining time `horizon`,
/// keeping every layer.
pub fn solve(d: &DerivedConstants, sign: Sign, horizon: f64, grid: &GridSpec) -> Result<ValueSurface> {
    let rows = grid.n_t + 1;
    let mut values = Vec::with_capacity(rows * grid.n_z);
    let mut controls = Vec::with_capacity(rows * grid.n_z);
    march(d, sign, horizon, grid, |_, v, c| {
        values.extend_from_slice(v);
        controls.extend_from_slice(c);
        Ok(())
    })?;
    Ok(ValueSurface { sign, horizon, grid: *grid, values, controls })
}

/// Only the final layer `F(., horizon)`.
pub fn solve_final(d: &DerivedConstants, sign: Sign, horizon: f64, grid: &GridSpec) -> Result<Vec<f64>> {
    let mut last = Vec::new();
    march(d, sign, horizon, grid, |j, v, _| {
        if j == grid.n_t {
            last = v.to_vec();
        }
        Ok(())
    })?;
    Ok(last)
}

/// Largest deviation from the candidate's closed-form survival over the
/// layers with remaining time at least `t_from`, computed without storing
/// the surface.
pub fn max_deviation(
    d: &DerivedConstants,
    sign: Sign,
    horizon: f64,
    grid: &GridSpec,
    t_from: f64,
) -> Result<f64> {
    let dt = horizon / grid.n_t as f64;
    let dz = grid.dz();
    let mut worst = 0.0f64;
    march(d, sign, horizon, grid, |j, v, _| {
        let t = j as f64 * dt;
        if j > 0 && t >= t_from {
            worst = worst.max(layer_deviation(d, sign, v, dz, t)?);
        }
        Ok(())
    })?;
    Ok(worst)
}

/// Bang-bang feedback realizing the surface, for simulation.
pub fn extract_policy(surface: &ValueSurface) -> CouplingPolicy {
    CouplingPolicy::GridFeedback(FeedbackPolicy {
        dz: surface.dz(),
        n_z: surface.grid.n_z,
        dt: surface.dt(),
        n_t: surface.grid.n_t,
        horizon: surface.horizon,
        controls: std::sync::Arc::new(surface.controls.clone()),
    })
}

/// Smallest error estimate reported, the level of rounding in the march.
pub const ERROR_FLOOR: f64 = 1e-9;

/// Comparison of the grid value with the candidate coupling's closed form at
/// the problem's starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub sign: Sign,
    pub horizon: f64,
    pub z0: f64,
    /// Grids of the three refinement levels, coarsest first.
    pub grids: Vec<GridSpec>,
    /// `F(z0, T)` on each level.
    pub levels: Vec<f64>,
    /// Ratio of successive level differences (4 in the asymptotic regime).
    pub ratio: f64,
    pub asymptotic: bool,
    /// Richardson-extrapolated `F(z0, T)`, or the finest level outside the
    /// asymptotic regime.
    pub value: f64,
    pub phi: f64,
    /// `phi - F` for `Plus`, `F - phi` for `Minus`: positive when the
    /// candidate coupling is beaten.
    pub gap: f64,
    pub error: f64,
    pub significant: bool,
    pub verdict: OptimalityVerdict,
}

impl GapReport {
    /// Whether the numerical verdict agrees with the classifier.
    pub fn consistent(&self) -> bool {
        self.significant == (self.verdict.verdict == Verdict::Suboptimal)
    }
}

/// Solves on `grid` and two refinements, extrapolates `F(z0, T)` and compares
/// it with the closed form. A verdict that disagrees with
/// [`classify_finite_horizon`] is an error.
pub fn gap_report(d: &DerivedConstants, sign: Sign, horizon: f64, grid: &GridSpec) -> Result<GapReport> {
    let report = gap_report_unchecked(d, sign, horizon, grid)?;
    if !report.consistent() {
        return Err(Error::VerdictMismatch(format!(
            "grid gap {:.3e} (error {:.3e}) against classifier verdict {:?} for sign {sign}, T = {horizon}",
            report.gap, report.error, report.verdict.verdict
        )));
    }
    Ok(report)
}

/// [`gap_report`] without the consistency check.
pub fn gap_report_unchecked(
    d: &DerivedConstants,
    sign: Sign,
    horizon: f64,
    grid: &GridSpec,
) -> Result<GapReport> {
    if d.z0 == 0.0 {
        return Err(Error::Precondition("gap report needs distinct starting points".into()));
    }
    let verdict = classify_finite_horizon(d, sign, horizon)?;
    let base = grid.aligned(d.z0);
    let grids = vec![base, base.refined(), base.refined().refined()];
    for g in &grids {
        g.validate(d, horizon)?;
    }
    let levels = grids
        .par_iter()
        .map(|g| solve_final(d, sign, horizon, g).map(|row| interpolate(&row, g.dz(), d.z0)))
        .collect::<Result<Vec<f64>>>()?;
    let (d1, d2) = (levels[1] - levels[0], levels[2] - levels[1]);
    let ratio = d1 / d2;
    let asymptotic = ratio.is_finite() && (2.0..=8.0).contains(&ratio);
    let (value, raw_error) = if asymptotic {
        (levels[2] + d2 / (ratio - 1.0), d2.abs() / (ratio - 1.0))
    } else {
        (levels[2], d1.abs() + d2.abs())
    };
    let error = raw_error.max(ERROR_FLOOR);
    let phi = analytic::phi(d, horizon, sign)?;
    let gap = match sign {
        Sign::Plus => phi - value,
        Sign::Minus => value - phi,
    };
    Ok(GapReport {
        sign,
        horizon,
        z0: d.z0,
        grids,
        levels,
        ratio,
        asymptotic,
        value,
        phi,
        gap,
        error,
        significant: gap > error,
        verdict,
    })
}
