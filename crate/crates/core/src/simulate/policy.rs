//! Correlation controls.
//!
//! A coupling of the two driving Brownian motions is represented by its
//! instantaneous correlation `c in [-1, 1]`. Policies see the reduced state
//! `z = log(X/Y)` and the elapsed time `t` of the path, plus a small per-path
//! state for the switching construction.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Sign;

/// Axis-aligned box in `(z, elapsed time)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBox {
    pub z_lo: f64,
    pub z_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl ControlBox {
    pub fn contains(&self, z: f64, t: f64) -> bool {
        z >= self.z_lo && z <= self.z_hi && t >= self.t_lo && t <= self.t_hi
    }

    /// Zero width in either direction.
    pub fn is_degenerate(&self) -> bool {
        self.z_hi <= self.z_lo || self.t_hi <= self.t_lo
    }

    fn encloses(&self, other: &ControlBox) -> bool {
        self.z_lo <= other.z_lo
            && self.z_hi >= other.z_hi
            && self.t_lo <= other.t_lo
            && self.t_hi >= other.t_hi
    }

    fn validate(&self) -> Result<()> {
        let v = [self.z_lo, self.z_hi, self.t_lo, self.t_hi];
        if v.iter().any(|x| !x.is_finite()) || self.z_lo > self.z_hi || self.t_lo > self.t_hi {
            return Err(Error::Precondition(format!("malformed box {self:?}")));
        }
        Ok(())
    }
}

/// Control `outside` until the path first enters `entry`, then `inside` until
/// it first leaves `exit`, then `outside` for good.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingPolicy {
    pub entry: ControlBox,
    pub exit: ControlBox,
    pub inside: f64,
    pub outside: f64,
}

/// Bang-bang feedback `c(z, remaining time)` on a uniform grid, looked up at
/// the nearest node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackPolicy {
    pub dz: f64,
    pub n_z: usize,
    pub dt: f64,
    pub n_t: usize,
    /// Horizon the remaining time is measured against.
    pub horizon: f64,
    /// Row-major `(n_t + 1) x n_z`, entries in `{-1, +1}`.
    pub controls: Arc<Vec<i8>>,
}

impl FeedbackPolicy {
    pub fn lookup(&self, z: f64, t: f64) -> f64 {
        let remaining = (self.horizon - t).max(0.0);
        let j = ((remaining / self.dt).round() as usize).min(self.n_t);
        let i = ((z / self.dz).round().max(0.0) as usize).min(self.n_z - 1);
        f64::from(self.controls[j * self.n_z + i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingPolicy {
    Mirror,
    Synchronous,
    Constant(f64),
    Switching(SwitchingPolicy),
    GridFeedback(FeedbackPolicy),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SwitchPhase {
    #[default]
    Waiting,
    Active,
    Done,
}

/// Per-path policy memory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PolicyState {
    pub phase: SwitchPhase,
}

impl CouplingPolicy {
    pub fn validate(&self) -> Result<()> {
        let in_range = |c: f64| (-1.0..=1.0).contains(&c);
        match self {
            CouplingPolicy::Mirror | CouplingPolicy::Synchronous => Ok(()),
            CouplingPolicy::Constant(c) if in_range(*c) => Ok(()),
            CouplingPolicy::Constant(c) => {
                Err(Error::Precondition(format!("correlation {c} outside [-1, 1]")))
            }
            CouplingPolicy::Switching(s) => {
                s.entry.validate()?;
                s.exit.validate()?;
                if !s.entry.is_degenerate() && !s.exit.encloses(&s.entry) {
                    return Err(Error::Precondition("exit box must enclose the entry box".into()));
                }
                if !in_range(s.inside) || !in_range(s.outside) {
                    return Err(Error::Precondition("switching controls outside [-1, 1]".into()));
                }
                Ok(())
            }
            CouplingPolicy::GridFeedback(f) => {
                let ok = f.n_z >= 1
                    && f.dz > 0.0
                    && f.dt > 0.0
                    && f.controls.len() == (f.n_t + 1) * f.n_z
                    && f.controls.iter().all(|&c| c == -1 || c == 1);
                if ok {
                    Ok(())
                } else {
                    Err(Error::Precondition("malformed feedback grid".into()))
                }
            }
        }
    }

    /// The control when it does not depend on the path.
    pub fn constant_control(&self) -> Option<f64> {
        match self {
            CouplingPolicy::Mirror => Some(-1.0),
            CouplingPolicy::Synchronous => Some(1.0),
            CouplingPolicy::Constant(c) => Some(*c),
            CouplingPolicy::Switching(s) if s.entry.is_degenerate() => Some(s.outside),
            _ => None,
        }
    }

    /// Correlation in force at `(z, t)`; updates the path's switching phase.
    #[inline]
    pub fn control(&self, z: f64, t: f64, state: &mut PolicyState) -> f64 {
        match self {
            CouplingPolicy::Mirror => -1.0,
            CouplingPolicy::Synchronous => 1.0,
            CouplingPolicy::Constant(c) => *c,
            CouplingPolicy::Switching(s) => {
                if state.phase == SwitchPhase::Waiting
                    && !s.entry.is_degenerate()
                    && s.entry.contains(z, t)
                {
                    state.phase = SwitchPhase::Active;
                }
                if state.phase == SwitchPhase::Active && !s.exit.contains(z, t) {
                    state.phase = SwitchPhase::Done;
                }
                if state.phase == SwitchPhase::Active {
                    s.inside
                } else {
                    s.outside
                }
            }
            CouplingPolicy::GridFeedback(f) => f.lookup(z, t),
        }
    }

    pub fn label(&self) -> String {
        match self {
            CouplingPolicy::Mirror => "mirror".into(),
            CouplingPolicy::Synchronous => "synchronous".into(),
            CouplingPolicy::Constant(c) => format!("constant({c})"),
            CouplingPolicy::Switching(_) => "switching".into(),
            CouplingPolicy::GridFeedback(_) => "grid-feedback".into(),
        }
    }
}

/// Switching policy around `center = (z*, t*)` (elapsed time): the candidate
/// control of `sign` everywhere except between entry into the box
/// `center +- half_widths` and exit from the box `center +- 2 half_widths`,
/// where the opposite extreme control is used.
pub fn switching_policy(
    sign: Sign,
    center: (f64, f64),
    half_widths: (f64, f64),
) -> Result<CouplingPolicy> {
    let (zc, tc) = center;
    let (rz, rt) = half_widths;
    if !(zc >= 0.0 && tc >= 0.0 && zc.is_finite() && tc.is_finite()) {
        return Err(Error::Precondition(format!("box center must be finite and >= 0, got {center:?}")));
    }
    if !(rz >= 0.0 && rt >= 0.0 && rz.is_finite() && rt.is_finite()) {
        return Err(Error::Precondition(format!("half widths must be finite and >= 0, got {half_widths:?}")));
    }
    let around = |k: f64| ControlBox {
        z_lo: (zc - k * rz).max(0.0),
        z_hi: zc + k * rz,
        t_lo: (tc - k * rt).max(0.0),
        t_hi: tc + k * rt,
    };
    let outside = sign.candidate_control();
    let policy = CouplingPolicy::Switching(SwitchingPolicy {
        entry: around(1.0),
        exit: around(2.0),
        inside: -outside,
        outside,
    });
    policy.validate()?;
    Ok(policy)
}
