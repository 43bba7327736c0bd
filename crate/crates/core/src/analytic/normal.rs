//! Standard normal density and distribution function.
//!
//! `N` uses W. J. Cody's rational Chebyshev approximations to the
//! complementary error function, written directly in the normal scale. The
//! Gaussian factor `exp(-x^2/2)` is split into an exactly representable part
//! and a small correction, so the lower tail keeps full relative precision;
//! in the far tail the same factorization gives `ln N` without underflow.

use std::f64::consts::PI;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Boundary of the central approximation (upper quartile of N).
const CENTRAL: f64 = 0.674_489_75;
/// `sqrt(32)`, boundary of the intermediate approximation.
const INTERMEDIATE: f64 = 5.656_854_249_492_381;

const A: [f64; 5] = [
    2.235_252_035_460_683_9,
    161.028_231_068_555_88,
    1_067.689_485_460_371,
    18_154.981_253_343_56,
    0.065_682_337_918_207_45,
];
const B: [f64; 4] = [
    47.202_581_904_688_24,
    976.098_551_737_776_7,
    10_260.932_208_618_978,
    45_507.789_335_026_73,
];
const C: [f64; 9] = [
    0.398_941_512_088_134_66,
    8.883_149_794_388_376,
    93.506_656_132_177_86,
    597.270_276_394_800_3,
    2_494.537_585_290_372_7,
    6_848.190_450_536_283,
    11_602.651_437_647_35,
    9_842.714_838_383_978,
    1.076_557_677_372_019_2e-8,
];
const D: [f64; 8] = [
    22.266_688_044_328_117,
    235.387_901_782_625,
    1_519.377_599_407_554_8,
    6_485.558_298_266_761,
    18_615.571_640_885_1,
    34_900.952_721_145_98,
    38_912.003_286_093_27,
    19_685.429_676_859_99,
];
const P: [f64; 6] = [
    0.215_898_534_057_957,
    0.127_401_161_160_247_36,
    0.022_235_277_870_649_807,
    0.001_421_619_193_227_893_5,
    2.911_287_495_116_879e-5,
    0.023_073_441_764_940_173,
];
const Q: [f64; 5] = [
    1.284_260_096_144_911_2,
    0.468_238_212_480_865_1,
    0.065_988_137_868_928_55,
    0.003_782_396_332_027_582_4,
    7.297_515_550_839_662e-5,
];

/// Standard normal density `n(x)`.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `ln exp(-y^2/2)` with `y^2` split as `hi^2 + (y - hi)(y + hi)`, `hi = y`
/// truncated to a multiple of 1/16 so that `hi^2` is exact.
fn gaussian_exponent(y: f64) -> (f64, f64) {
    let hi = (y * 16.0).trunc() / 16.0;
    (-0.5 * hi * hi, -0.5 * (y - hi) * (y + hi))
}

/// `N(-y) = prefactor(y) * exp(-y^2/2)` for `y > CENTRAL`; returns the
/// prefactor.
fn tail_prefactor(y: f64) -> f64 {
    if y <= INTERMEDIATE {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        (num + C[7]) / (den + D[7])
    } else {
        let r = 1.0 / (y * y);
        let mut num = P[5] * r;
        let mut den = r;
        for i in 0..4 {
            num = (num + P[i]) * r;
            den = (den + Q[i]) * r;
        }
        let t = r * (num + P[4]) / (den + Q[4]);
        (FRAC_1_SQRT_2PI - t) / y
    }
}

/// Returns `(N(x), N(-x))`.
fn both_tails(x: f64) -> (f64, f64) {
    let y = x.abs();
    if y <= CENTRAL {
        let sq = if y > f64::EPSILON * 0.5 { x * x } else { 0.0 };
        let mut num = A[4] * sq;
        let mut den = sq;
        for i in 0..3 {
            num = (num + A[i]) * sq;
            den = (den + B[i]) * sq;
        }
        let t = x * (num + A[3]) / (den + B[3]);
        return (0.5 + t, 0.5 - t);
    }
    let (e_hi, e_lo) = gaussian_exponent(y);
    let lower = e_hi.exp() * e_lo.exp() * tail_prefactor(y);
    let upper = 0.5 - lower + 0.5;
    if x > 0.0 {
        (upper, lower)
    } else {
        (lower, upper)
    }
}

/// Standard normal distribution function `N(x)`.
pub fn cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    both_tails(x).0
}

/// `ln N(x)`, finite for every finite `x`.
pub fn ln_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < -CENTRAL {
        let y = -x;
        let (e_hi, e_lo) = gaussian_exponent(y);
        tail_prefactor(y).ln() + e_hi + e_lo
    } else if x > CENTRAL {
        (-both_tails(x).1).ln_1p()
    } else {
        both_tails(x).0.ln()
    }
}
