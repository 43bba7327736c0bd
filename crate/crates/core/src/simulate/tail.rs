//! Exponential tail rates of the coupling time.
//!
//! `P(tau > t)` is estimated far into the tail by fixed-effort splitting:
//! the time axis is cut into stages, surviving particles at the end of each
//! stage are resampled back to the full population, and the survival
//! probability is the product of the per-stage survival fractions times the
//! mean likelihood weight of the survivors. When the drift pushes towards
//! zero, paths are simulated without it and reweighted, which keeps the
//! per-stage survival fractions away from zero. The rate is the weighted
//! least-squares slope of `ln P(tau > t)` against `t`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{derive_key, stream};
use super::{CouplingPolicy, Particle, PolicyState, SimConfig, Stepper};
use crate::error::{Error, Result};
use crate::params::DerivedConstants;

/// Times at which the survival probability is regressed, and the length of
/// the splitting stages between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailGrid {
    pub times: Vec<f64>,
    pub stage_width: f64,
}

impl TailGrid {
    /// Geometrically spaced points on `[t_max / 4, t_max]`, at least six.
    pub fn geometric(t_max: f64, n_points: usize, stage_width: f64) -> Self {
        let n = n_points.max(6);
        let lo = 0.25 * t_max;
        let times = (0..n)
            .map(|k| lo * 4f64.powf(k as f64 / (n - 1) as f64))
            .collect();
        TailGrid { times, stage_width }
    }

    fn validate(&self) -> Result<()> {
        if self.times.len() < 3 {
            return Err(Error::Precondition("tail grid needs at least 3 times".into()));
        }
        if !(self.stage_width > 0.0) {
            return Err(Error::Precondition("stage width must be positive".into()));
        }
        let ordered = self.times.windows(2).all(|w| w[0] < w[1]);
        if !ordered || !(self.times[0] > 0.0) || !self.times.iter().all(|t| t.is_finite()) {
            return Err(Error::Precondition("tail grid times must be positive and increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    /// `ln P(tau > t)`; `-inf` once no particle survives.
    pub ln_survival: f64,
    /// Delta-method variance of `ln_survival`.
    pub ln_variance: f64,
    /// Particles alive at `t` before resampling.
    pub survivors: u64,
}

impl TailPoint {
    pub fn survival(&self) -> f64 {
        self.ln_survival.exp()
    }

    pub fn std_error(&self) -> f64 {
        self.survival() * self.ln_variance.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailStatus {
    Fitted,
    /// Fewer than three grid points with survivors; the rate is `-inf`.
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub rate: f64,
    pub std_error: f64,
    /// `rate +- 1.96 std_error`.
    pub band: (f64, f64),
    pub status: TailStatus,
    pub points: Vec<TailPoint>,
}

/// Stage boundaries: multiples of the stage width merged with the grid
/// times. The flag marks grid times.
fn boundaries(grid: &TailGrid) -> Vec<(f64, bool)> {
    let end = *grid.times.last().expect("validated");
    let mut out: Vec<(f64, bool)> = grid.times.iter().map(|&t| (t, true)).collect();
    let mut k = 1u64;
    loop {
        let t = k as f64 * grid.stage_width;
        if t >= end {
            break;
        }
        if grid.times.iter().all(|&g| (g - t).abs() > 1e-9 * end) {
            out.push((t, false));
        }
        k += 1;
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Estimates `lim (1/t) ln P(tau > t)` under `policy` from survival on the
/// grid. `cfg.n_paths` is the particle population per stage; `cfg.horizon`
/// must cover the last grid time.
pub fn tail_rate_regression(
    d: &DerivedConstants,
    policy: &CouplingPolicy,
    grid: &TailGrid,
    cfg: &SimConfig,
) -> Result<TailFit> {
    cfg.validate()?;
    policy.validate()?;
    grid.validate()?;
    let end = *grid.times.last().expect("validated");
    if end > cfg.horizon * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "tail grid reaches {end} beyond the horizon {}",
            cfg.horizon
        )));
    }
    let n = cfg.n_paths as usize;
    let stepper = Stepper::new(d, policy, cfg.bridge_correction);
    // With a drift towards zero, nearly every particle dies in each stage and
    // repeated resampling collapses the population onto a few ancestors,
    // which biases `ln P` downwards at long times. Removing the drift keeps
    // the per-stage survival high; the likelihood ratio restores the law.
    let tilt = d.mu > 0.0;
    let start = Particle { z: d.z0, state: PolicyState::default() };
    let mut particles = vec![(start, 0.0f64); n];
    let (mut ln_s, mut ln_var) = (0.0f64, 0.0f64);
    let mut points = Vec::with_capacity(grid.times.len());
    let mut prev = 0.0;

    for (k, (b, is_grid)) in boundaries(grid).into_iter().enumerate() {
        if ln_s == f64::NEG_INFINITY {
            if is_grid {
                points.push(TailPoint { t: b, ln_survival: ln_s, ln_variance: f64::INFINITY, survivors: 0 });
            }
            continue;
        }
        let key = derive_key(cfg.master_seed, k as u64);
        let steps = cfg.steps_for(b - prev);
        let survivors: Vec<(Particle, f64)> = if d.z0 == 0.0 {
            Vec::new()
        } else {
            particles
                .par_iter()
                .enumerate()
                .with_min_len(256)
                .map(|(i, &(p, w))| {
                    let mut rng = stream(key, i as u64);
                    let (mut q, mut w) = (p, w);
                    let absorbed = if tilt {
                        stepper.run_tilted(&mut q, &mut w, prev, b, steps, &mut rng)
                    } else {
                        stepper.run(&mut q, prev, b, steps, &mut rng).is_some()
                    };
                    (!absorbed).then_some((q, w))
                })
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect()
        };
        let m = survivors.len();
        if m == 0 {
            ln_s = f64::NEG_INFINITY;
        } else {
            let p = m as f64 / n as f64;
            ln_s += p.ln();
            ln_var += (1.0 - p) / (n as f64 * p);
        }
        if is_grid {
            let point = if m == 0 {
                TailPoint { t: b, ln_survival: f64::NEG_INFINITY, ln_variance: f64::INFINITY, survivors: 0 }
            } else {
                let (ln_mean, rel_var) = weight_moments(survivors.iter().map(|s| s.1));
                TailPoint {
                    t: b,
                    ln_survival: ln_s + ln_mean,
                    ln_variance: ln_var + rel_var / m as f64,
                    survivors: m as u64,
                }
            };
            points.push(point);
        }
        if m > 0 {
            // Systematic resampling back to n particles; weights travel along.
            let u: f64 = stream(key, u64::MAX).random();
            particles = (0..n)
                .map(|j| survivors[((u + j as f64) * m as f64 / n as f64) as usize])
                .collect();
        }
        prev = b;
    }

    let usable: Vec<&TailPoint> = points.iter().filter(|p| p.ln_survival.is_finite()).collect();
    if usable.len() < 3 {
        return Ok(TailFit {
            rate: f64::NEG_INFINITY,
            std_error: f64::NAN,
            band: (f64::NEG_INFINITY, f64::NEG_INFINITY),
            status: TailStatus::InsufficientData,
            points,
        });
    }
    let floor = 1.0 / (n as f64 * n as f64);
    let w: Vec<f64> = usable.iter().map(|p| 1.0 / p.ln_variance.max(floor)).collect();
    let sw: f64 = w.iter().sum();
    let t_bar = usable.iter().zip(&w).map(|(p, w)| w * p.t).sum::<f64>() / sw;
    let y_bar = usable.iter().zip(&w).map(|(p, w)| w * p.ln_survival).sum::<f64>() / sw;
    let sxx: f64 = usable.iter().zip(&w).map(|(p, w)| w * (p.t - t_bar).powi(2)).sum();
    let sxy: f64 = usable
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.t - t_bar) * (p.ln_survival - y_bar))
        .sum();
    let rate = sxy / sxx;
    let std_error = (1.0 / sxx).sqrt();
    Ok(TailFit {
        rate,
        std_error,
        band: (rate - 1.96 * std_error, rate + 1.96 * std_error),
        status: TailStatus::Fitted,
        points,
    })
}

/// Log of the mean and the relative variance of `exp(log_w)` over a sample.
fn weight_moments<I: Iterator<Item = f64> + Clone>(log_w: I) -> (f64, f64) {
    let top = log_w.clone().fold(f64::NEG_INFINITY, f64::max);
    let (mut n, mut s1, mut s2) = (0.0f64, 0.0f64, 0.0f64);
    for lw in log_w {
        let w = (lw - top).exp();
        n += 1.0;
        s1 += w;
        s2 += w * w;
    }
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    (top + mean.ln(), var / (mean * mean))
}
