//! Problem definition, derived constants and the optimality classifiers.
//!
//! Two geometric Brownian motions
//!
//! ```text
//! dX = a1 X dt + sigma1 X dB,    X_0 = x
//! dY = a2 Y dt + sigma2 Y dV,    Y_0 = y
//! ```
//!
//! meet exactly when `Z = log(X / Y)` hits zero. Everything downstream works
//! with the reduced state `Z` started at `z0 = log(x / y) >= 0`, obtained by
//! exchanging the two processes when `x < y`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::{Error, Result};

/// Starting points closer than this (in log distance) are treated as equal.
pub const Z0_EPS: f64 = 1e-12;

/// `sigma_minus` is treated as zero when `|sigma_minus| <= SIGMA_EPS * |sigma_plus|`.
pub const SIGMA_EPS: f64 = 1e-12;

/// The six parameters of the two geometric Brownian motions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub x: f64,
    pub y: f64,
    pub a1: f64,
    pub a2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl ProblemSpec {
    pub fn new(x: f64, y: f64, a1: f64, a2: f64, sigma1: f64, sigma2: f64) -> Result<Self> {
        let spec = ProblemSpec { x, y, a1, a2, sigma1, sigma2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.x, self.y, self.a1, self.a2, self.sigma1, self.sigma2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("all parameters must be finite".into()));
        }
        if self.x <= 0.0 || self.y <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "starting points must be positive, got x = {}, y = {}",
                self.x, self.y
            )));
        }
        if self.sigma1 * self.sigma2 <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "sigma1 * sigma2 must be positive, got {} * {}",
                self.sigma1, self.sigma2
            )));
        }
        Ok(())
    }

    /// Exchanges the roles of X and Y.
    pub fn swapped(&self) -> Self {
        ProblemSpec {
            x: self.y,
            y: self.x,
            a1: self.a2,
            a2: self.a1,
            sigma1: self.sigma2,
            sigma2: self.sigma1,
        }
    }

    /// Whether the reduction to `x >= y` exchanges the processes. Ties on the
    /// starting point are broken on `(a, sigma)` so that the reduction is
    /// symmetric under [`ProblemSpec::swapped`].
    fn needs_swap(&self) -> bool {
        match self.x.total_cmp(&self.y) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => {
                let lhs = (self.a1, self.sigma1);
                let rhs = (self.a2, self.sigma2);
                lhs.0.total_cmp(&rhs.0).then(lhs.1.total_cmp(&rhs.1)) == Ordering::Less
            }
        }
    }
}

/// Which of the two optimization directions.
///
/// `Plus` minimizes the coupling time (candidate: mirror coupling, correlation
/// -1); `Minus` maximizes it (candidate: synchronous coupling, correlation +1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn candidate(self) -> Candidate {
        match self {
            Sign::Plus => Candidate::Mirror,
            Sign::Minus => Candidate::Synchronous,
        }
    }

    /// Correlation of the candidate coupling.
    pub fn candidate_control(self) -> f64 {
        self.candidate().control()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Candidate {
    Mirror,
    Synchronous,
}

impl Candidate {
    pub fn control(self) -> f64 {
        match self {
            Candidate::Mirror => -1.0,
            Candidate::Synchronous => 1.0,
        }
    }
}

/// Constants derived from a [`ProblemSpec`] after reducing to `x >= y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Drift gap `a2 - a1 + sigma1^2/2 - sigma2^2/2`.
    pub mu: f64,
    /// `sigma2 + sigma1`.
    pub sigma_plus: f64,
    /// `sigma2 - sigma1`.
    pub sigma_minus: f64,
    /// `log(x / y)` of the reduced problem; exactly zero below [`Z0_EPS`].
    pub z0: f64,
    /// Whether X and Y were exchanged.
    pub swapped: bool,
    /// The problem after the exchange, i.e. with `x >= y`.
    pub reduced: ProblemSpec,
}

/// Derives the constants of `spec`, exchanging X and Y if needed so that
/// `z0 = log(x / y) >= 0`.
pub fn derive(spec: &ProblemSpec) -> Result<DerivedConstants> {
    spec.validate()?;
    let swapped = spec.needs_swap();
    let r = if swapped { spec.swapped() } else { *spec };
    let mu = r.a2 - r.a1 + 0.5 * r.sigma1 * r.sigma1 - 0.5 * r.sigma2 * r.sigma2;
    let mut z0 = (r.x / r.y).ln();
    if z0 < Z0_EPS {
        z0 = 0.0;
    }
    Ok(DerivedConstants {
        mu,
        sigma_plus: r.sigma2 + r.sigma1,
        sigma_minus: r.sigma2 - r.sigma1,
        z0,
        swapped,
        reduced: r,
    })
}

impl DerivedConstants {
    /// `sigma_plus` or `sigma_minus`.
    pub fn sigma(&self, sign: Sign) -> f64 {
        match sign {
            Sign::Plus => self.sigma_plus,
            Sign::Minus => self.sigma_minus,
        }
    }

    pub fn sigma_is_zero(&self, sign: Sign) -> bool {
        self.sigma(sign).abs() <= SIGMA_EPS * self.sigma_plus.abs()
    }

    /// Variance rate of `Z` under instantaneous correlation `c`:
    /// `sigma1^2 + sigma2^2 - 2 sigma1 sigma2 c`.
    pub fn variance_rate(&self, c: f64) -> f64 {
        let sp2 = self.sigma_plus * self.sigma_plus;
        let sm2 = if self.sigma_is_zero(Sign::Minus) {
            0.0
        } else {
            self.sigma_minus * self.sigma_minus
        };
        let s = 0.5 * (sp2 + sm2) - 0.5 * c * (sp2 - sm2);
        s.max(0.0)
    }

    /// The degenerate regime where the candidate coupling of `sign` never
    /// couples from distinct points.
    pub fn never_couples(&self, sign: Sign) -> bool {
        sign == Sign::Minus && self.sigma_is_zero(Sign::Minus) && self.mu <= 0.0
    }

    /// Time at which the synchronous coupling meets when `sigma_minus = 0`
    /// and `mu > 0`.
    pub fn deterministic_meeting_time(&self) -> Option<f64> {
        (self.sigma_is_zero(Sign::Minus) && self.mu > 0.0).then(|| self.z0 / self.mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Problem {
    #[serde(rename = "T+")]
    FiniteHorizonPlus,
    #[serde(rename = "T-")]
    FiniteHorizonMinus,
    #[serde(rename = "q+")]
    DiscountedPlus,
    #[serde(rename = "q-")]
    DiscountedMinus,
    #[serde(rename = "S inf")]
    StationaryInf,
    #[serde(rename = "S sup")]
    StationarySup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Optimal,
    Suboptimal,
    DegenerateDeterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    MuLeZero,
    MuPosSigmaNonzero,
    SigmaPmZeroThreshold,
    SigmaPmZeroBelowThreshold,
    BadCaseNeverCouples,
    DiscountedAlwaysOptimal,
    StationaryAlwaysOptimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimalityVerdict {
    pub problem: Problem,
    pub candidate: Candidate,
    pub verdict: Verdict,
    pub reason: Reason,
}

impl OptimalityVerdict {
    pub fn is_suboptimal(&self) -> bool {
        self.verdict == Verdict::Suboptimal
    }
}

/// Whether the candidate coupling of `sign` is optimal for the finite
/// horizon problem of minimizing (`Plus`) or maximizing (`Minus`) the
/// probability `P(tau > horizon)`.
pub fn classify_finite_horizon(
    d: &DerivedConstants,
    sign: Sign,
    horizon: f64,
) -> Result<OptimalityVerdict> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
    }
    if d.z0 == 0.0 {
        return Err(Error::Precondition(
            "starting points coincide; the coupling time is zero".into(),
        ));
    }
    let problem = match sign {
        Sign::Plus => Problem::FiniteHorizonPlus,
        Sign::Minus => Problem::FiniteHorizonMinus,
    };
    let (verdict, reason) = if !d.sigma_is_zero(sign) {
        if d.mu <= 0.0 {
            (Verdict::Optimal, Reason::MuLeZero)
        } else {
            (Verdict::Suboptimal, Reason::MuPosSigmaNonzero)
        }
    } else if d.mu <= 0.0 {
        (Verdict::DegenerateDeterministic, Reason::BadCaseNeverCouples)
    } else if horizon >= d.z0 / d.mu {
        (Verdict::Suboptimal, Reason::SigmaPmZeroThreshold)
    } else {
        (Verdict::Optimal, Reason::SigmaPmZeroBelowThreshold)
    };
    Ok(OptimalityVerdict { problem, candidate: sign.candidate(), verdict, reason })
}

/// The discounted problems are always solved by the candidate couplings.
pub fn classify_discounted(d: &DerivedConstants, sign: Sign) -> OptimalityVerdict {
    let problem = match sign {
        Sign::Plus => Problem::DiscountedPlus,
        Sign::Minus => Problem::DiscountedMinus,
    };
    let (verdict, reason) = if d.never_couples(sign) && d.z0 > 0.0 {
        (Verdict::DegenerateDeterministic, Reason::BadCaseNeverCouples)
    } else {
        (Verdict::Optimal, Reason::DiscountedAlwaysOptimal)
    };
    OptimalityVerdict { problem, candidate: sign.candidate(), verdict, reason }
}

/// Verdicts for the stationary criterion together with `P(tau = inf)` of both
/// candidate couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub inf: OptimalityVerdict,
    pub sup: OptimalityVerdict,
    pub mirror_never_couples: f64,
    pub synchronous_never_couples: f64,
}

pub fn classify_stationary(d: &DerivedConstants) -> StationaryReport {
    let verdict = |problem, candidate| OptimalityVerdict {
        problem,
        candidate,
        verdict: Verdict::Optimal,
        reason: Reason::StationaryAlwaysOptimal,
    };
    StationaryReport {
        inf: verdict(Problem::StationaryInf, Candidate::Mirror),
        sup: verdict(Problem::StationarySup, Candidate::Synchronous),
        mirror_never_couples: analytic::never_couples_probability(d, Sign::Plus),
        synchronous_never_couples: analytic::never_couples_probability(d, Sign::Minus),
    }
}
