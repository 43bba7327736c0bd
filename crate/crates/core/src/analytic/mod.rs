//! Closed-form values of the mirror and synchronous couplings.
//!
//! Under the candidate coupling of a [`Sign`] the reduced state is a Brownian
//! motion with drift `-mu` and volatility `|sigma_pm|`, so the coupling time is
//! a first-passage time whose Laplace transform and survival function are
//! explicit:
//!
//! ```text
//! E[exp(-q tau)]  = exp(-k z0),   k = -mu/s^2 + sqrt((mu/s^2)^2 + 2q/s^2)
//! P(tau > t)      = h(z0, t)
//! h(z, t)         = N((z - mu t)/(s sqrt t)) - exp(2 mu z/s^2) N((-z - mu t)/(s sqrt t))
//! ```
//!
//! with `s = sigma_pm`.

pub mod normal;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Candidate, DerivedConstants, Sign};

use normal::{cdf, ln_cdf, pdf};

/// First-passage survival function `h(z, s)` of a Brownian motion started at
/// `z > 0` with drift `-mu` and volatility `sigma`, absorbed at zero, together
/// with its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFunction {
    pub sign: Sign,
    pub mu: f64,
    /// `|sigma_pm|`, strictly positive.
    pub sigma: f64,
}

/// Shared pieces of `h` and its derivatives at one point.
struct Terms {
    /// `(z - mu s) / (sigma sqrt s)`
    a: f64,
    /// `(-z - mu s) / (sigma sqrt s)`
    b: f64,
    /// `2 mu z / sigma^2`
    e: f64,
    /// `exp(e) N(b)`, evaluated in log space.
    reflected: f64,
    root_s: f64,
}

impl TailFunction {
    pub fn new(d: &DerivedConstants, sign: Sign) -> Result<Self> {
        if d.sigma_is_zero(sign) {
            return Err(Error::Precondition(format!("sigma_{sign} is zero")));
        }
        Ok(TailFunction { sign, mu: d.mu, sigma: d.sigma(sign).abs() })
    }

    fn terms(&self, z: f64, s: f64) -> Terms {
        let root_s = s.sqrt();
        let scale = self.sigma * root_s;
        let a = (z - self.mu * s) / scale;
        let b = (-z - self.mu * s) / scale;
        let e = 2.0 * self.mu * z / (self.sigma * self.sigma);
        Terms { a, b, e, reflected: (e + ln_cdf(b)).exp(), root_s }
    }

    /// `h(z, s)`, clamped to `[0, 1]`.
    pub fn value(&self, z: f64, s: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let t = self.terms(z, s);
        let v = if t.a < 0.0 {
            // N(a) [1 - exp(e) N(b) / N(a)] keeps relative precision deep in the tail.
            let ln_na = ln_cdf(t.a);
            let r = t.e + ln_cdf(t.b) - ln_na;
            ln_na.exp() * -r.exp_m1()
        } else {
            cdf(t.a) - t.reflected
        };
        v.clamp(0.0, 1.0)
    }

    /// `ln h(z, s)`; finite wherever `h > 0` even if `h` underflows.
    pub fn ln_value(&self, z: f64, s: f64) -> f64 {
        if z <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let t = self.terms(z, s);
        if t.a < 0.0 {
            let ln_na = ln_cdf(t.a);
            let r = t.e + ln_cdf(t.b) - ln_na;
            ln_na + (-r.exp_m1()).ln()
        } else {
            (cdf(t.a) - t.reflected).ln()
        }
    }

    pub fn h_z(&self, z: f64, s: f64) -> f64 {
        let t = self.terms(z, s);
        2.0 / (self.sigma * t.root_s) * pdf(t.a)
            - 2.0 * self.mu / (self.sigma * self.sigma) * t.reflected
    }

    pub fn h_zz(&self, z: f64, s: f64) -> f64 {
        let t = self.terms(z, s);
        let sig2 = self.sigma * self.sigma;
        (4.0 * s * self.mu - 2.0 * z) / (self.sigma * t.root_s).powi(3) * pdf(t.a)
            - 4.0 * self.mu * self.mu / (sig2 * sig2) * t.reflected
    }

    pub fn h_s(&self, z: f64, s: f64) -> f64 {
        let t = self.terms(z, s);
        -z / (self.sigma * s * t.root_s) * pdf(t.a)
    }
}

/// Survival probability `P(tau > t)` of the candidate coupling of `sign`
/// started from log distance `z`.
///
/// Defined for `z >= 0`, `t >= 0` except at `(0, 0)`, where the boundary and
/// initial conditions disagree.
pub fn survival(d: &DerivedConstants, sign: Sign, z: f64, t: f64) -> Result<f64> {
    if !(z >= 0.0) || !(t >= 0.0) {
        return Err(Error::Precondition(format!("need z >= 0 and t >= 0, got ({z}, {t})")));
    }
    if z == 0.0 && t == 0.0 {
        return Err(Error::Precondition("survival is undefined at (z, t) = (0, 0)".into()));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    if d.sigma_is_zero(sign) {
        // Deterministic motion at speed mu towards zero.
        return Ok(if d.mu <= 0.0 || t * d.mu < z { 1.0 } else { 0.0 });
    }
    Ok(TailFunction::new(d, sign)?.value(z, t))
}

/// `P(tau > t)` for the candidate coupling of `sign` from the problem's own
/// starting point.
pub fn phi(d: &DerivedConstants, t: f64, sign: Sign) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("t must be positive, got {t}")));
    }
    survival(d, sign, d.z0, t)
}

/// `x y Phi_xy` at log distance `z` and remaining time `t`, i.e. `-h_zz(z, t)`.
/// Its sign is the sign of `Phi_xy`.
pub fn phi_xy(d: &DerivedConstants, t: f64, sign: Sign, z: f64) -> Result<f64> {
    let tail = TailFunction::new(d, sign)?;
    if !(t > 0.0) || !(z > 0.0) {
        return Err(Error::Precondition(format!("need z > 0 and t > 0, got ({z}, {t})")));
    }
    Ok(-tail.h_zz(z, t))
}

/// `P(tau = inf)` under the candidate coupling of `sign`, the `t -> inf`
/// limit of `h(z0, t)`.
pub fn never_couples_probability(d: &DerivedConstants, sign: Sign) -> f64 {
    if d.z0 == 0.0 {
        return 0.0;
    }
    if d.sigma_is_zero(sign) {
        return if d.mu > 0.0 { 0.0 } else { 1.0 };
    }
    if d.mu >= 0.0 {
        0.0
    } else {
        let s = d.sigma(sign);
        -(2.0 * d.mu * d.z0 / (s * s)).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Closed form `exp(-k z0)`.
    Formula,
    /// `z0 = 0`: the processes start together.
    Coincident,
    /// The candidate coupling never meets from distinct points.
    NeverCouples,
}

/// Laplace transform `E[exp(-q tau)]` of the candidate coupling time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountedValue {
    pub sign: Sign,
    pub q: f64,
    pub k_plus: Option<f64>,
    pub k_minus: Option<f64>,
    pub value: f64,
    pub regime: Regime,
}

/// Exponent `k` such that `E[exp(-q tau)] = exp(-k z)`; `None` in the regime
/// where the candidate never couples.
pub fn laplace_exponent(d: &DerivedConstants, q: f64, sign: Sign) -> Option<f64> {
    if d.sigma_is_zero(sign) {
        return (d.mu > 0.0).then(|| q / d.mu);
    }
    let s2 = d.sigma(sign).powi(2);
    let disc = (d.mu * d.mu + 2.0 * q * s2).sqrt();
    Some(if d.mu >= 0.0 {
        2.0 * q / (d.mu + disc)
    } else {
        (disc - d.mu) / s2
    })
}

pub fn psi(d: &DerivedConstants, q: f64, sign: Sign) -> Result<DiscountedValue> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Precondition(format!("discount rate must be positive, got {q}")));
    }
    let k_plus = laplace_exponent(d, q, Sign::Plus);
    let k_minus = laplace_exponent(d, q, Sign::Minus);
    let k = match sign {
        Sign::Plus => k_plus,
        Sign::Minus => k_minus,
    };
    let (value, regime) = if d.z0 == 0.0 {
        (1.0, Regime::Coincident)
    } else {
        match k {
            Some(k) => ((-k * d.z0).exp(), Regime::Formula),
            None => (0.0, Regime::NeverCouples),
        }
    };
    Ok(DiscountedValue { sign, q, k_plus, k_minus, value, regime })
}

/// `(L Psi)(x, y)` for the discounted generator of `sign`, using the
/// closed-form derivatives of `Psi = (y/x)^k`. Requires `x > y > 0`.
pub fn pde_residual_l(d: &DerivedConstants, q: f64, sign: Sign, x: f64, y: f64) -> Result<f64> {
    if !(x > y && y > 0.0) {
        return Err(Error::Precondition(format!("need x > y > 0, got ({x}, {y})")));
    }
    if !(q > 0.0) {
        return Err(Error::Precondition(format!("discount rate must be positive, got {q}")));
    }
    let k = laplace_exponent(d, q, sign).ok_or(Error::NeverCouples)?;
    let p = &d.reduced;
    let psi = (y / x).powf(k);
    let psi_x = -k / x * psi;
    let psi_y = k / y * psi;
    let psi_xx = k * (k + 1.0) / (x * x) * psi;
    let psi_yy = k * (k - 1.0) / (y * y) * psi;
    let psi_xy = -k * k / (x * y) * psi;
    let cross = cross_sign(sign) * p.sigma1 * p.sigma2 * x * y * psi_xy;
    Ok(p.a1 * x * psi_x
        + p.a2 * y * psi_y
        + 0.5 * p.sigma1 * p.sigma1 * x * x * psi_xx
        + 0.5 * p.sigma2 * p.sigma2 * y * y * psi_yy
        + cross
        - q * psi)
}

/// `(A Phi)` for the finite-horizon generator of `sign` at log distance
/// `z > 0` and remaining time `t > 0`. The two-dimensional operator is
/// evaluated with `Phi(x, y, t) = h(log(x/y), t)` through the chain rule, so
/// only `h_z`, `h_zz` and `h_s` enter.
pub fn pde_residual_a(d: &DerivedConstants, sign: Sign, z: f64, t: f64) -> Result<f64> {
    let tail = TailFunction::new(d, sign)?;
    if !(z > 0.0) || !(t > 0.0) {
        return Err(Error::Precondition(format!("need z > 0 and t > 0, got ({z}, {t})")));
    }
    let p = &d.reduced;
    let hz = tail.h_z(z, t);
    let hzz = tail.h_zz(z, t);
    let hs = tail.h_s(z, t);
    // x f_x, y f_y, x^2 f_xx, y^2 f_yy and x y f_xy in terms of h.
    let x_fx = hz;
    let y_fy = -hz;
    let xx_fxx = hzz - hz;
    let yy_fyy = hzz + hz;
    let xy_fxy = -hzz;
    Ok(p.a1 * x_fx + p.a2 * y_fy
        + 0.5 * p.sigma1 * p.sigma1 * xx_fxx
        + 0.5 * p.sigma2 * p.sigma2 * yy_fyy
        + cross_sign(sign) * p.sigma1 * p.sigma2 * xy_fxy
        - hs)
}

fn cross_sign(sign: Sign) -> f64 {
    match sign {
        Sign::Plus => -1.0,
        Sign::Minus => 1.0,
    }
}

/// Exponential decay rates of the survival tails of both candidate couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRate {
    /// `lim (1/t) log P(tau(mirror) > t)`.
    pub rate_mirror: f64,
    /// Same for the synchronous coupling; `-inf` when its coupling time is
    /// deterministic.
    pub rate_sync: f64,
    pub mirror_efficient_plus: bool,
    pub sync_efficient_minus: bool,
    /// Coupling whose tail rate is conjectured to match the value function of
    /// the minimization problem.
    pub conjectured_efficient_plus: Candidate,
    /// Same for the maximization problem.
    pub conjectured_efficient_minus: Candidate,
}

pub fn tail_rate(d: &DerivedConstants, sign: Sign) -> f64 {
    if d.mu <= 0.0 {
        // Either subexponential decay (mu = 0) or P(tau = inf) > 0.
        return 0.0;
    }
    if d.sigma_is_zero(sign) {
        return f64::NEG_INFINITY;
    }
    -d.mu * d.mu / (2.0 * d.sigma(sign).powi(2))
}

pub fn tail_rates(d: &DerivedConstants) -> Result<TailRate> {
    if d.z0 == 0.0 {
        return Err(Error::Precondition("starting points coincide".into()));
    }
    let efficient = d.mu <= 0.0;
    let (plus, minus) = if efficient {
        (Candidate::Mirror, Candidate::Synchronous)
    } else {
        (Candidate::Synchronous, Candidate::Mirror)
    };
    Ok(TailRate {
        rate_mirror: tail_rate(d, Sign::Plus),
        rate_sync: tail_rate(d, Sign::Minus),
        mirror_efficient_plus: efficient,
        sync_efficient_minus: efficient,
        conjectured_efficient_plus: plus,
        conjectured_efficient_minus: minus,
    })
}

/// The bracket `alpha/(1+alpha^2) n(alpha) < N(-alpha) < n(alpha)/alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalBounds {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

impl NormalBounds {
    pub fn strictly_ordered(&self) -> bool {
        self.lower < self.value && self.value < self.upper
    }
}

pub fn normal_bounds_check(alpha: f64) -> Result<NormalBounds> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Precondition(format!("alpha must be positive, got {alpha}")));
    }
    let density = pdf(alpha);
    Ok(NormalBounds {
        lower: alpha / (1.0 + alpha * alpha) * density,
        value: cdf(-alpha),
        upper: density / alpha,
    })
}

/// One row of a batch evaluation; `NaN` marks quantities undefined at the
/// point (e.g. `Phi_xy` when `sigma_pm = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub z: f64,
    pub t: f64,
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub phi_xy_plus: f64,
    pub phi_xy_minus: f64,
    pub residual_a_plus: f64,
    pub residual_a_minus: f64,
}

impl TableRow {
    pub const COLUMNS: [&'static str; 8] = [
        "z",
        "t",
        "phi_plus",
        "phi_minus",
        "phi_xy_plus",
        "phi_xy_minus",
        "residual_a_plus",
        "residual_a_minus",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.z,
            self.t,
            self.phi_plus,
            self.phi_minus,
            self.phi_xy_plus,
            self.phi_xy_minus,
            self.residual_a_plus,
            self.residual_a_minus,
        ]
    }
}

/// Evaluates the closed forms at every `(z, t)` point, aligned with the input.
pub fn table(d: &DerivedConstants, points: &[(f64, f64)]) -> Vec<TableRow> {
    points
        .iter()
        .map(|&(z, t)| TableRow {
            z,
            t,
            phi_plus: survival(d, Sign::Plus, z, t).unwrap_or(f64::NAN),
            phi_minus: survival(d, Sign::Minus, z, t).unwrap_or(f64::NAN),
            phi_xy_plus: phi_xy(d, t, Sign::Plus, z).unwrap_or(f64::NAN),
            phi_xy_minus: phi_xy(d, t, Sign::Minus, z).unwrap_or(f64::NAN),
            residual_a_plus: pde_residual_a(d, Sign::Plus, z, t).unwrap_or(f64::NAN),
            residual_a_minus: pde_residual_a(d, Sign::Minus, z, t).unwrap_or(f64::NAN),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive, ProblemSpec};

    fn constants(x: f64, y: f64, a1: f64, a2: f64, s1: f64, s2: f64) -> DerivedConstants {
        derive(&ProblemSpec::new(x, y, a1, a2, s1, s2).unwrap()).unwrap()
    }

    #[test]
    fn psi_hand_evaluated() {
        let d = constants(2.0, 1.0, 0.0, 0.0, 1.0, 1.0);
        let v = psi(&d, 2.0, Sign::Plus).unwrap();
        assert!((v.k_plus.unwrap() - 1.0).abs() < 1e-15);
        assert!((v.value - 0.5).abs() < 1e-15);
        assert_eq!(v.regime, Regime::Formula);
    }

    #[test]
    fn psi_coincident_and_deterministic() {
        let d = constants(1.0, 1.0, 0.0, 0.3, 1.0, 0.5);
        assert_eq!(psi(&d, 1.0, Sign::Plus).unwrap().value, 1.0);
        assert_eq!(psi(&d, 1.0, Sign::Minus).unwrap().regime, Regime::Coincident);

        // sigma_minus = 0, mu = 1, z0 = log 2: k = q/mu = 1.
        let d = constants(2.0, 1.0, 0.0, 1.0, 1.0, 1.0);
        let v = psi(&d, 1.0, Sign::Minus).unwrap();
        assert_eq!(v.k_minus, Some(1.0));
        assert!((v.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn psi_bad_case_is_flagged() {
        let d = constants(2.0, 1.0, 0.5, 0.0, 1.0, 1.0);
        let v = psi(&d, 1.0, Sign::Minus).unwrap();
        assert_eq!(v.regime, Regime::NeverCouples);
        assert_eq!(v.value, 0.0);
        assert_eq!(v.k_minus, None);
        assert!(matches!(pde_residual_l(&d, 1.0, Sign::Minus, 2.0, 1.0), Err(Error::NeverCouples)));
        assert!(psi(&d, 0.0, Sign::Plus).is_err());
    }

    #[test]
    fn phi_mu_zero_hand_value() {
        // 2 N(log 2 / 2) - 1
        let d = constants(2.0, 1.0, 0.0, 0.0, 1.0, 1.0);
        let want = 2.0 * cdf(2f64.ln() / 2.0) - 1.0;
        let got = phi(&d, 1.0, Sign::Plus).unwrap();
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.2711).abs() < 1e-4);
    }

    #[test]
    fn phi_boundaries() {
        let d = constants(1.0, 1.0, 0.0, 0.0, 1.0, 1.0);
        assert_eq!(phi(&d, 0.5, Sign::Plus).unwrap(), 0.0);
        assert!(phi(&d, 0.0, Sign::Plus).is_err());
        assert!(survival(&d, Sign::Plus, 0.0, 0.0).is_err());
        assert_eq!(survival(&d, Sign::Plus, 0.3, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn phi_indicator_branch() {
        let d = constants(2.0, 1.0, 0.0, 1.0, 1.0, 1.0);
        assert_eq!(phi(&d, 0.5, Sign::Minus).unwrap(), 1.0);
        assert_eq!(phi(&d, 1.0, Sign::Minus).unwrap(), 0.0);
        let d = constants(2.0, 1.0, 1.0, 0.0, 1.0, 1.0);
        assert_eq!(phi(&d, 100.0, Sign::Minus).unwrap(), 1.0);
    }

    #[test]
    fn tail_value_log_space_consistent() {
        let d = constants(2.0, 1.0, 0.0, 1.0, 1.0, 1.0);
        let tail = TailFunction::new(&d, Sign::Plus).unwrap();
        for s in [0.5, 2.0, 10.0, 50.0] {
            let v = tail.value(d.z0, s);
            assert!((v.ln() - tail.ln_value(d.z0, s)).abs() < 1e-10);
        }
        // Far tail underflows in linear space only.
        let ln = tail.ln_value(d.z0, 20_000.0);
        assert!(ln.is_finite() && ln < -2000.0);
        // Huge 2 mu z / sigma^2 without overflow.
        assert!((tail.value(1500.0, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_xy_signs() {
        let d = constants(2.0, 1.0, 1.0, 0.0, 1.0, 1.0);
        for z in [0.01, 0.3, 1.0, 3.0] {
            for t in [0.01, 0.5, 2.0, 20.0] {
                assert!(phi_xy(&d, t, Sign::Plus, z).unwrap() >= 0.0);
            }
        }
        let d = constants(2.0, 1.0, 0.0, 1.0, 1.0, 1.0);
        assert!(phi_xy(&d, 1.0, Sign::Plus, 1e-3).unwrap() < 0.0);
        assert!(phi_xy(&d, 1.0, Sign::Minus, 0.5).is_err());
    }

    #[test]
    fn phi_xy_mu_zero_closed_form() {
        let d = constants(2.0, 1.0, 0.0, 0.0, 1.0, 1.0);
        let s = 2.0;
        for z in [0.1, 0.7, 2.0] {
            for t in [0.3, 1.0, 4.0] {
                let w = s * f64::sqrt(t);
                let want = 2.0 * z / w.powi(3) * pdf(z / w);
                let got = phi_xy(&d, t, Sign::Plus, z).unwrap();
                assert!((got - want).abs() < 1e-14 * want.max(1.0), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn residual_l_vanishes() {
        let d = constants(3.0, 1.0, 0.2, -0.4, 0.7, 1.3);
        for sign in Sign::BOTH {
            for q in [0.1, 1.0, 5.0] {
                let r = pde_residual_l(&d, q, sign, 3.0, 1.0).unwrap();
                let v = psi(&d, q, sign).unwrap().value;
                assert!(r.abs() <= 1e-10 * v, "{sign} q={q}: {r}");
            }
        }
        assert!(pde_residual_l(&d, 1.0, Sign::Plus, 1.0, 1.0).is_err());
    }

    #[test]
    fn residual_a_vanishes() {
        let d = constants(3.0, 1.0, 0.2, -0.4, 0.7, 1.3);
        for sign in Sign::BOTH {
            for (z, t) in [(0.2, 0.5), (1.0, 1.0), (2.5, 3.0)] {
                let r = pde_residual_a(&d, sign, z, t).unwrap();
                assert!(r.abs() <= 1e-12, "{sign} ({z},{t}): {r}");
            }
        }
    }

    #[test]
    fn tail_rates_examples() {
        let d = constants(2.0, 1.0, 0.0, 1.0, 1.0, 1.0);
        let r = tail_rates(&d).unwrap();
        assert_eq!(r.rate_mirror, -0.125);
        assert_eq!(r.rate_sync, f64::NEG_INFINITY);
        assert!(!r.mirror_efficient_plus);
        assert_eq!(r.conjectured_efficient_plus, Candidate::Synchronous);
        assert_eq!(r.conjectured_efficient_minus, Candidate::Mirror);

        let d = constants(2.0, 1.0, 0.0, 0.0, 1.0, 1.0);
        let r = tail_rates(&d).unwrap();
        assert_eq!(r.rate_mirror, 0.0);
        assert_eq!(r.rate_sync, 0.0);
        assert!(r.mirror_efficient_plus && r.sync_efficient_minus);

        let d = constants(1.0, 1.0, 0.0, 0.0, 1.0, 1.0);
        assert!(tail_rates(&d).is_err());
    }

    #[test]
    fn normal_bounds_examples() {
        let b = normal_bounds_check(1.0).unwrap();
        assert!((b.value - 0.1587).abs() < 1e-4);
        assert!((b.lower - 0.1210).abs() < 1e-4);
        assert!((b.upper - 0.2420).abs() < 1e-4);
        assert!(b.strictly_ordered());
        assert!(normal_bounds_check(3.0).unwrap().strictly_ordered());
        let b = normal_bounds_check(1e-12).unwrap();
        assert!(b.lower.is_finite() && (b.value - 0.5).abs() < 1e-11 && b.upper > 1e10);
        assert!(normal_bounds_check(0.0).is_err());
    }

    #[test]
    fn table_marks_undefined() {
        let d = constants(2.0, 1.0, 0.0, 1.0, 1.0, 1.0);
        let rows = table(&d, &[(0.5, 1.0), (0.0, 0.0)]);
        assert_eq!(rows.len(), 2);
        assert!(rows[0].phi_xy_minus.is_nan());
        assert!(rows[0].phi_plus.is_finite());
        assert!(rows[1].phi_plus.is_nan());
    }
}
