//! Point estimates with standard errors.

use serde::{Deserialize, Serialize};

use super::Outcomes;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    Survival,
    Laplace,
    Ergodic,
    TailRate,
    /// Paired difference of two estimates computed on matched seeds.
    Difference,
}

/// Sample mean with its standard error `sqrt(var / n)`, where `var` is the
/// population variance of the samples (the binomial error for indicators).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
    pub kind: EstimateKind,
}

impl Estimate {
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I, kind: EstimateKind) -> Result<Self> {
        // Welford.
        let (mut n, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
        for x in samples {
            n += 1;
            let delta = x - mean;
            mean += delta / n as f64;
            m2 += delta * (x - mean);
        }
        if n == 0 {
            return Err(Error::Precondition("no samples".into()));
        }
        Ok(Estimate { mean, std_error: m2.max(0.0).sqrt() / n as f64, n, kind })
    }

    /// Sum of squared deviations recovered from the standard error.
    fn m2(&self) -> f64 {
        let n = self.n as f64;
        self.std_error * self.std_error * n * n
    }

    /// Pools two estimates of the same kind as if their samples had been
    /// combined.
    pub fn merge(&self, other: &Estimate) -> Result<Estimate> {
        if self.kind != other.kind {
            return Err(Error::Precondition(format!(
                "cannot merge {:?} with {:?}",
                self.kind, other.kind
            )));
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let mean = (na * self.mean + nb * other.mean) / n;
        let m2 = self.m2() + other.m2() + delta * delta * na * nb / n;
        Ok(Estimate { mean, std_error: m2.sqrt() / n, n: self.n + other.n, kind: self.kind })
    }

    /// `|mean - value| <= k * std_error`.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}

fn nonempty(outcomes: &Outcomes) -> Result<()> {
    if outcomes.is_empty() {
        Err(Error::Precondition("empty outcome set".into()))
    } else {
        Ok(())
    }
}

/// Fraction of paths with `tau > t`.
pub fn estimate_survival(outcomes: &Outcomes, t: f64) -> Result<Estimate> {
    nonempty(outcomes)?;
    if !(t >= 0.0) || t > outcomes.horizon {
        return Err(Error::Precondition(format!(
            "survival time {t} outside [0, horizon = {}]",
            outcomes.horizon
        )));
    }
    Estimate::from_samples(
        outcomes.times.iter().map(|&tau| if tau > t { 1.0 } else { 0.0 }),
        EstimateKind::Survival,
    )
}

/// Bracket for `E[exp(-q tau)]`: censored paths contribute `0` to the lower
/// and `exp(-q horizon)` to the upper estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceBracket {
    pub q: f64,
    pub lower: Estimate,
    pub upper: Estimate,
}

impl LaplaceBracket {
    pub fn width(&self) -> f64 {
        self.upper.mean - self.lower.mean
    }

    /// Whether `value` lies within `[lower - k se, upper + k se]`.
    pub fn contains(&self, value: f64, k: f64) -> bool {
        value >= self.lower.mean - k * self.lower.std_error
            && value <= self.upper.mean + k * self.upper.std_error
    }
}

fn discounted(tau: f64, q: f64, censored: f64) -> f64 {
    if tau.is_finite() {
        (-q * tau).exp()
    } else {
        censored
    }
}

/// Laplace transform bracket. With `tolerance`, a bracket wider than it
/// means the horizon is too short and is reported as an error.
pub fn estimate_laplace(outcomes: &Outcomes, q: f64, tolerance: Option<f64>) -> Result<LaplaceBracket> {
    nonempty(outcomes)?;
    if !(q > 0.0) {
        return Err(Error::Precondition(format!("discount rate must be positive, got {q}")));
    }
    let cap = (-q * outcomes.horizon).exp();
    let lower = Estimate::from_samples(
        outcomes.times.iter().map(|&t| discounted(t, q, 0.0)),
        EstimateKind::Laplace,
    )?;
    let upper = Estimate::from_samples(
        outcomes.times.iter().map(|&t| discounted(t, q, cap)),
        EstimateKind::Laplace,
    )?;
    let bracket = LaplaceBracket { q, lower, upper };
    if let Some(tol) = tolerance {
        if bracket.width() > tol {
            return Err(Error::InsufficientData(format!(
                "horizon {} too short: Laplace bracket width {:e} exceeds {:e}",
                outcomes.horizon,
                bracket.width(),
                tol
            )));
        }
    }
    Ok(bracket)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicEstimate {
    /// Fraction of paths still uncoupled at the horizon, estimating `P(tau = inf)`.
    pub estimate: Estimate,
    /// `(1/T) int_0^T P(tau > t) dt` by the trapezoid rule over the grid.
    pub time_average: f64,
}

pub fn estimate_ergodic(outcomes: &Outcomes, grid: &[f64]) -> Result<ErgodicEstimate> {
    nonempty(outcomes)?;
    let at_horizon = estimate_survival(outcomes, outcomes.horizon)?;
    let estimate = Estimate { kind: EstimateKind::Ergodic, ..at_horizon };
    let mut grid: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|t| (0.0..=outcomes.horizon).contains(t))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let time_average = if grid.len() < 2 {
        estimate.mean
    } else {
        let s = outcomes.survival_curve(&grid);
        let area: f64 = grid
            .windows(2)
            .zip(s.windows(2))
            .map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]))
            .sum();
        area / (grid[grid.len() - 1] - grid[0])
    };
    Ok(ErgodicEstimate { estimate, time_average })
}

fn paired(a: &Outcomes, b: &Outcomes) -> Result<()> {
    nonempty(a)?;
    if a.len() != b.len() {
        return Err(Error::Precondition(format!(
            "paired estimate needs equal path counts, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `P_a(tau > t) - P_b(tau > t)` from matched paths; its standard error is the
/// joint error of the comparison.
pub fn paired_survival_difference(a: &Outcomes, b: &Outcomes, t: f64) -> Result<Estimate> {
    paired(a, b)?;
    if t > a.horizon.min(b.horizon) {
        return Err(Error::Precondition("time beyond a horizon".into()));
    }
    let ind = |tau: f64| if tau > t { 1.0 } else { 0.0 };
    Estimate::from_samples(
        a.times.iter().zip(&b.times).map(|(&x, &y)| ind(x) - ind(y)),
        EstimateKind::Difference,
    )
}

/// Upper Laplace estimate of `a` minus lower Laplace estimate of `b` over
/// matched paths. A mean above `-k std_error` is consistent with `a`
/// dominating `b`.
pub fn paired_laplace_difference(a: &Outcomes, b: &Outcomes, q: f64) -> Result<Estimate> {
    paired(a, b)?;
    if !(q > 0.0) {
        return Err(Error::Precondition(format!("discount rate must be positive, got {q}")));
    }
    let cap = (-q * a.horizon).exp();
    Estimate::from_samples(
        a.times
            .iter()
            .zip(&b.times)
            .map(|(&x, &y)| discounted(x, q, cap) - discounted(y, q, 0.0)),
        EstimateKind::Difference,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcomes(times: &[f64], horizon: f64) -> Outcomes {
        Outcomes { times: times.to_vec(), horizon }
    }

    #[test]
    fn all_hit_before_t() {
        let e = estimate_survival(&outcomes(&[0.1, 0.2, 0.3], 1.0), 0.5).unwrap();
        assert_eq!(e.mean, 0.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.n, 3);
    }

    #[test]
    fn binomial_error() {
        let e = estimate_survival(&outcomes(&[0.1, f64::INFINITY, 0.7, 2.0], 3.0), 0.5).unwrap();
        assert_eq!(e.mean, 0.75);
        assert!((e.std_error - (0.75f64 * 0.25 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn survival_rejects() {
        assert!(estimate_survival(&outcomes(&[], 1.0), 0.5).is_err());
        assert!(estimate_survival(&outcomes(&[0.1], 1.0), 1.5).is_err());
    }

    #[test]
    fn laplace_coincident_is_one() {
        let b = estimate_laplace(&outcomes(&[0.0; 5], 1.0), 2.0, Some(1e-9)).unwrap();
        assert_eq!(b.lower.mean, 1.0);
        assert_eq!(b.upper.mean, 1.0);
    }

    #[test]
    fn laplace_bracket_and_tolerance() {
        let o = outcomes(&[1.0, f64::INFINITY], 2.0);
        let b = estimate_laplace(&o, 1.0, None).unwrap();
        assert!((b.lower.mean - 0.5 * (-1f64).exp()).abs() < 1e-15);
        assert!((b.width() - 0.5 * (-2f64).exp()).abs() < 1e-15);
        assert!(matches!(estimate_laplace(&o, 1.0, Some(1e-3)), Err(Error::InsufficientData(_))));
        assert!(estimate_laplace(&o, 0.0, None).is_err());
    }

    #[test]
    fn ergodic_trapezoid() {
        // Survival 1 on [0, 1), 0.5 on [1, 2]; the trapezoid smooths the step at 1.
        let o = outcomes(&[1.0, f64::INFINITY], 2.0);
        let e = estimate_ergodic(&o, &[0.0, 0.5, 1.0, 1.5, 2.0]).unwrap();
        assert_eq!(e.estimate.mean, 0.5);
        assert_eq!(e.estimate.kind, EstimateKind::Ergodic);
        assert!((e.time_average - 0.6875).abs() < 1e-15);
        let z = estimate_ergodic(&outcomes(&[0.0; 4], 2.0), &[0.0, 2.0]).unwrap();
        assert_eq!(z.estimate.mean, 0.0);
    }

    #[test]
    fn merge_matches_pooled() {
        let xs = [0.3, 1.2, -0.4, 2.2, 0.0, 0.9, 1.7];
        let all = Estimate::from_samples(xs, EstimateKind::Laplace).unwrap();
        let a = Estimate::from_samples(xs[..3].iter().copied(), EstimateKind::Laplace).unwrap();
        let b = Estimate::from_samples(xs[3..].iter().copied(), EstimateKind::Laplace).unwrap();
        let m = a.merge(&b).unwrap();
        assert_eq!(m.n, all.n);
        assert!((m.mean - all.mean).abs() < 1e-15);
        assert!((m.std_error - all.std_error).abs() < 1e-15);
        let s = Estimate { kind: EstimateKind::Survival, ..a };
        assert!(a.merge(&s).is_err());
    }

    #[test]
    fn paired_differences() {
        let a = outcomes(&[0.5, f64::INFINITY, 0.2], 1.0);
        let b = outcomes(&[0.1, 0.3, 0.9], 1.0);
        let d = paired_survival_difference(&a, &b, 0.4).unwrap();
        assert!((d.mean - (2.0 / 3.0 - 1.0 / 3.0)).abs() < 1e-15);
        assert!(paired_survival_difference(&a, &outcomes(&[0.1], 1.0), 0.4).is_err());
        let l = paired_laplace_difference(&b, &b, 1.0).unwrap();
        assert_eq!(l.mean, 0.0);
    }
}
