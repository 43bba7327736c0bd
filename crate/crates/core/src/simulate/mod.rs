//! Monte Carlo coupling times under arbitrary correlation controls.
//!
//! The reduced state `Z = log(X/Y)` solves
//!
//! ```text
//! dZ = -mu dt + sqrt(sigma1^2 + sigma2^2 - 2 sigma1 sigma2 c) dW,   Z_0 = z0,
//! ```
//!
//! and the coupling time is its first hitting time of zero. With the control
//! frozen over a step the increment is Gaussian with known mean and variance,
//! so each step is sampled exactly. Optionally, a crossing of zero strictly
//! inside a step is detected with the Brownian-bridge probability
//! `exp(-2 z_a z_b / (s dt))`, which makes constant controls exact in law.

pub mod estimate;
pub mod policy;
pub mod rng;
pub mod tail;

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::DerivedConstants;

pub use estimate::{
    estimate_ergodic, estimate_laplace, estimate_survival, paired_laplace_difference,
    paired_survival_difference, ErgodicEstimate, Estimate, EstimateKind, LaplaceBracket,
};
pub use policy::{
    switching_policy, ControlBox, CouplingPolicy, FeedbackPolicy, PolicyState, SwitchingPolicy,
};
pub use tail::{tail_rate_regression, TailFit, TailGrid, TailPoint, TailStatus};

fn default_bridge() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: u64,
    /// Largest step size; the horizon is split into equal steps no longer than this.
    pub dt: f64,
    pub horizon: f64,
    pub master_seed: u64,
    #[serde(default = "default_bridge")]
    pub bridge_correction: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Precondition("n_paths must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Precondition(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Precondition(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Number of equal steps covering `[0, span]`.
    pub(crate) fn steps_for(&self, span: f64) -> usize {
        ((span / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }
}

/// Per-path coupling times; censored paths are `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcomes {
    pub times: Vec<f64>,
    pub horizon: f64,
}

impl Outcomes {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn censored(&self) -> usize {
        self.times.iter().filter(|t| t.is_infinite()).count()
    }

    /// Fraction of paths with `tau > t` at each of `ts`.
    pub fn survival_curve(&self, ts: &[f64]) -> Vec<f64> {
        let mut sorted = self.times.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        ts.iter()
            .map(|&t| {
                let at_or_below = sorted.partition_point(|&x| x <= t);
                (sorted.len() - at_or_below) as f64 / n
            })
            .collect()
    }

    /// Raw dump: one little-endian `f64` per path, censored as `+inf`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.times {
            w.write_all(&t.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, horizon: f64) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Precondition("hit-time dump length is not a multiple of 8".into()));
        }
        let times = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Outcomes { times, horizon })
    }
}

/// A path in flight.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Particle {
    pub z: f64,
    pub state: PolicyState,
}

/// Exact-in-law stepping of the reduced state.
pub(crate) struct Stepper<'a> {
    mu: f64,
    s_mid: f64,
    s_half: f64,
    bridge: bool,
    policy: &'a CouplingPolicy,
}

impl<'a> Stepper<'a> {
    pub fn new(d: &DerivedConstants, policy: &'a CouplingPolicy, bridge: bool) -> Self {
        let s_minus = d.variance_rate(1.0);
        let s_plus = d.variance_rate(-1.0);
        Stepper {
            mu: d.mu,
            s_mid: 0.5 * (s_plus + s_minus),
            s_half: 0.5 * (s_plus - s_minus),
            bridge,
            policy,
        }
    }

    #[inline]
    fn variance(&self, c: f64) -> f64 {
        (self.s_mid - c * self.s_half).max(0.0)
    }

    /// Advances `p` over `[t_start, t_end]` in `n` equal steps. Returns the
    /// hitting time if zero is reached.
    pub fn run<R: Rng>(
        &self,
        p: &mut Particle,
        t_start: f64,
        t_end: f64,
        n: usize,
        rng: &mut R,
    ) -> Option<f64> {
        let h = (t_end - t_start) / n as f64;
        if let Some(c) = self.policy.constant_control() {
            let s = self.variance(c);
            if s > 0.0 {
                return self.run_constant(p, t_start, h, n, s, rng);
            }
        }
        for k in 0..n {
            let t = t_start + k as f64 * h;
            let c = self.policy.control(p.z, t, &mut p.state);
            let s = self.variance(c);
            if s == 0.0 {
                let next = p.z - self.mu * h;
                if next <= 0.0 {
                    return Some(t + p.z / self.mu);
                }
                p.z = next;
                continue;
            }
            let xi: f64 = rng.sample(StandardNormal);
            let next = p.z - self.mu * h + (s * h).sqrt() * xi;
            if next <= 0.0 {
                return Some(t + 0.5 * h);
            }
            if self.bridge {
                let arg = 2.0 * p.z * next / (s * h);
                if arg < 60.0 {
                    let u: f64 = rng.random();
                    if u < (-arg).exp() {
                        return Some(t + 0.5 * h);
                    }
                }
            }
            p.z = next;
        }
        None
    }

    /// Same recursion as `run` for a fixed positive variance rate, with the
    /// per-step constants hoisted. Draws the same random numbers in the same
    /// order, so both paths give identical results.
    fn run_constant<R: Rng>(
        &self,
        p: &mut Particle,
        t_start: f64,
        h: f64,
        n: usize,
        s: f64,
        rng: &mut R,
    ) -> Option<f64> {
        let drift = self.mu * h;
        let sh = s * h;
        let sd = sh.sqrt();
        let mut z = p.z;
        for k in 0..n {
            let xi: f64 = rng.sample(StandardNormal);
            let next = z - drift + sd * xi;
            if next <= 0.0 {
                p.z = z;
                return Some(t_start + k as f64 * h + 0.5 * h);
            }
            if self.bridge {
                let arg = 2.0 * z * next / sh;
                if arg < 60.0 {
                    let u: f64 = rng.random();
                    if u < (-arg).exp() {
                        p.z = z;
                        return Some(t_start + k as f64 * h + 0.5 * h);
                    }
                }
            }
            z = next;
        }
        p.z = z;
        None
    }

    /// Like `run`, but steps under the law with the drift removed and
    /// accumulates the likelihood ratio back to the true law in `log_w`.
    /// Steps with zero variance keep the true dynamics. The bridge crossing
    /// probability does not depend on the drift, so the correction is exact
    /// under both laws. Returns whether the path was absorbed.
    pub fn run_tilted<R: Rng>(
        &self,
        p: &mut Particle,
        log_w: &mut f64,
        t_start: f64,
        t_end: f64,
        n: usize,
        rng: &mut R,
    ) -> bool {
        let h = (t_end - t_start) / n as f64;
        for k in 0..n {
            let t = t_start + k as f64 * h;
            let c = self.policy.control(p.z, t, &mut p.state);
            let s = self.variance(c);
            if s == 0.0 {
                let next = p.z - self.mu * h;
                if next <= 0.0 {
                    return true;
                }
                p.z = next;
                continue;
            }
            let xi: f64 = rng.sample(StandardNormal);
            let step = (s * h).sqrt() * xi;
            let next = p.z + step;
            if next <= 0.0 {
                return true;
            }
            if self.bridge {
                let arg = 2.0 * p.z * next / (s * h);
                if arg < 60.0 {
                    let u: f64 = rng.random();
                    if u < (-arg).exp() {
                        return true;
                    }
                }
            }
            *log_w -= self.mu * step / s + 0.5 * self.mu * self.mu * h / s;
            p.z = next;
        }
        false
    }

    /// Whether the state can never decrease: zero variance under a fixed
    /// control and no drift towards the boundary.
    fn frozen(&self) -> bool {
        match self.policy.constant_control() {
            Some(c) => self.variance(c) == 0.0 && self.mu <= 0.0,
            None => false,
        }
    }
}

/// Simulates `cfg.n_paths` coupling times under `policy`, censored at
/// `cfg.horizon`. Path `i` draws only from generator stream `i` of
/// `cfg.master_seed`, so results do not depend on the thread count.
pub fn simulate_tau(
    d: &DerivedConstants,
    policy: &CouplingPolicy,
    cfg: &SimConfig,
) -> Result<Outcomes> {
    cfg.validate()?;
    policy.validate()?;
    let n = cfg.n_paths as usize;
    if d.z0 == 0.0 {
        return Ok(Outcomes { times: vec![0.0; n], horizon: cfg.horizon });
    }
    let stepper = Stepper::new(d, policy, cfg.bridge_correction);
    if stepper.frozen() {
        return Ok(Outcomes { times: vec![f64::INFINITY; n], horizon: cfg.horizon });
    }
    let steps = cfg.steps_for(cfg.horizon);
    let times = (0..n)
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            let mut rng = rng::stream(cfg.master_seed, i as u64);
            let mut p = Particle { z: d.z0, state: PolicyState::default() };
            stepper
                .run(&mut p, 0.0, cfg.horizon, steps, &mut rng)
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    Ok(Outcomes { times, horizon: cfg.horizon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive, ProblemSpec};

    fn d(x: f64, a1: f64, a2: f64, s1: f64, s2: f64) -> DerivedConstants {
        derive(&ProblemSpec::new(x, 1.0, a1, a2, s1, s2).unwrap()).unwrap()
    }

    fn cfg(n: u64, dt: f64, horizon: f64) -> SimConfig {
        SimConfig { n_paths: n, dt, horizon, master_seed: 11, bridge_correction: true }
    }

    #[test]
    fn coincident_start_hits_immediately() {
        let out = simulate_tau(&d(1.0, 0.0, 0.0, 1.0, 1.0), &CouplingPolicy::Mirror, &cfg(50, 0.01, 1.0))
            .unwrap();
        assert!(out.times.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn synchronous_deterministic_meeting() {
        let dc = d(2.0, 0.0, 1.0, 1.0, 1.0);
        let out = simulate_tau(&dc, &CouplingPolicy::Synchronous, &cfg(20, 0.01, 2.0)).unwrap();
        let want = 2f64.ln();
        for t in out.times {
            assert!((t - want).abs() < 1e-12, "{t}");
        }
    }

    #[test]
    fn bad_case_is_censored_without_stepping() {
        let dc = d(2.0, 0.5, 0.0, 1.0, 1.0);
        let out = simulate_tau(&dc, &CouplingPolicy::Synchronous, &cfg(10, 1e-9, 1e9)).unwrap();
        assert_eq!(out.censored(), 10);
    }

    #[test]
    fn rejects_bad_config() {
        let dc = d(2.0, 0.0, 0.0, 1.0, 1.0);
        assert!(simulate_tau(&dc, &CouplingPolicy::Mirror, &cfg(0, 0.1, 1.0)).is_err());
        assert!(simulate_tau(&dc, &CouplingPolicy::Mirror, &cfg(1, 0.0, 1.0)).is_err());
        assert!(simulate_tau(&dc, &CouplingPolicy::Constant(2.0), &cfg(1, 0.1, 1.0)).is_err());
    }

    #[test]
    fn binary_dump_round_trip() {
        let out = Outcomes { times: vec![0.5, f64::INFINITY, 1e-3], horizon: 2.0 };
        let mut buf = Vec::new();
        out.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24);
        assert_eq!(&buf[8..16], &f64::INFINITY.to_le_bytes());
        assert_eq!(Outcomes::read_binary(&buf[..], 2.0).unwrap(), out);
        assert!(Outcomes::read_binary(&buf[..5], 2.0).is_err());
    }

    #[test]
    fn survival_curve_counts_strictly_greater() {
        let out = Outcomes { times: vec![0.5, 1.0, f64::INFINITY, 2.0], horizon: 3.0 };
        assert_eq!(out.survival_curve(&[0.0, 1.0, 2.5]), vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn steps_cover_horizon() {
        let c = cfg(1, 0.1, 1.0);
        assert_eq!(c.steps_for(1.0), 10);
        assert_eq!(c.steps_for(1.05), 11);
        assert_eq!(c.steps_for(0.01), 1);
    }
}
