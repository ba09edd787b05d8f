//! Log-domain quantities, the `ℓ_q` exponent, and exact integrals over `B_q^n`.

mod gamma;

pub use gamma::{log_factorial, log_gamma};
pub(crate) use gamma::log_gamma_unchecked;

use std::fmt;
use std::ops::{Div, Mul};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exponent `q ∈ [1, ∞]` of an `ℓ_q` ball. Infinity is its own variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QIndex {
    Finite(f64),
    Infinite,
}

impl QIndex {
    pub fn finite(q: f64) -> Result<Self> {
        if q.is_finite() && q >= 1.0 {
            Ok(QIndex::Finite(q))
        } else if q == f64::INFINITY {
            Ok(QIndex::Infinite)
        } else {
            Err(Error::InvalidQ(q))
        }
    }

    pub const ONE: QIndex = QIndex::Finite(1.0);
    pub const TWO: QIndex = QIndex::Finite(2.0);

    /// `1/q`, with `1/∞ = 0`.
    pub fn recip(self) -> f64 {
        match self {
            QIndex::Finite(q) => 1.0 / q,
            QIndex::Infinite => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, QIndex::Infinite)
    }

    /// Numeric value, `f64::INFINITY` for the cube.
    pub fn as_f64(self) -> f64 {
        match self {
            QIndex::Finite(q) => q,
            QIndex::Infinite => f64::INFINITY,
        }
    }

    /// `ln Γ(1 + x/q)`; identically zero at `q = ∞`.
    pub fn log_gamma_one_plus_over(self, x: f64) -> f64 {
        match self {
            QIndex::Finite(q) => log_gamma_unchecked(1.0 + x / q),
            QIndex::Infinite => 0.0,
        }
    }
}

impl fmt::Display for QIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QIndex::Finite(q) => write!(f, "{q}"),
            QIndex::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for QIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "Inf" | "infinity" | "∞" => Ok(QIndex::Infinite),
            other => {
                let q: f64 = other.parse().map_err(|_| Error::InvalidQ(f64::NAN))?;
                QIndex::finite(q)
            }
        }
    }
}

impl Serialize for QIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            QIndex::Finite(q) => serializer.serialize_f64(*q),
            QIndex::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for QIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        let parsed = match Repr::deserialize(deserializer)? {
            Repr::Num(q) => QIndex::finite(q),
            Repr::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// A strictly positive quantity carried as its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogPositive(f64);

impl LogPositive {
    pub const ONE: LogPositive = LogPositive(0.0);

    pub fn from_ln(ln: f64) -> Self {
        LogPositive(ln)
    }

    /// `None` unless `value > 0`.
    pub fn from_value(value: f64) -> Option<Self> {
        (value > 0.0).then(|| LogPositive(value.ln()))
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    /// Linear value; saturates to `0` or `inf` outside double range.
    pub fn value(self) -> f64 {
        self.0.exp()
    }

    /// Linear value when it is a normal, finite double.
    pub fn checked_value(self) -> Option<f64> {
        let v = self.0.exp();
        (v.is_normal()).then_some(v)
    }

    pub fn powf(self, p: f64) -> Self {
        LogPositive(self.0 * p)
    }

    /// Sum of two positive quantities.
    pub fn plus(self, other: Self) -> Self {
        let (hi, lo) = if self.0 >= other.0 {
            (self.0, other.0)
        } else {
            (other.0, self.0)
        };
        LogPositive(hi + (lo - hi).exp().ln_1p())
    }

    /// Relative discrepancy `|a - b| / max(|a|, |b|, 1)` of the logarithms.
    pub fn log_rel_diff(self, other: Self) -> f64 {
        (self.0 - other.0).abs() / self.0.abs().max(other.0.abs()).max(1.0)
    }
}

impl Mul for LogPositive {
    type Output = LogPositive;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Self) -> Self {
        LogPositive(self.0 + rhs.0)
    }
}

impl Div for LogPositive {
    type Output = LogPositive;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        LogPositive(self.0 - rhs.0)
    }
}

impl fmt::Display for LogPositive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exp({})", self.0)
    }
}

/// Monomial exponents `a_1..a_n` of `∏ |x_i|^{a_i}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentVector(Vec<u32>);

impl ExponentVector {
    pub fn new(a: Vec<u32>) -> Self {
        ExponentVector(a)
    }

    pub fn zeros(n: usize) -> Self {
        ExponentVector(vec![0; n])
    }

    /// Dimension `n` with the given leading exponents and zeros after them.
    pub fn leading(n: usize, head: &[u32]) -> Self {
        let mut a = vec![0; n];
        a[..head.len()].copy_from_slice(head);
        ExponentVector(a)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::Dimension { n, min: 1 })
    } else {
        Ok(())
    }
}

/// `ln |B_q^n| = n ln 2 + n ln Γ(1+1/q) − ln Γ(1+n/q)`.
pub fn log_ball_volume(n: usize, q: QIndex) -> Result<LogPositive> {
    check_dimension(n)?;
    let n_f = n as f64;
    Ok(LogPositive(
        n_f * std::f64::consts::LN_2 + n_f * q.log_gamma_one_plus_over(1.0)
            - q.log_gamma_one_plus_over(n_f),
    ))
}

/// `ln ∫_{B_q^n} ∏ |x_i|^{a_i} dx` for even exponents; `n = a.len()`.
pub fn log_monomial_moment(q: QIndex, a: &ExponentVector) -> Result<LogPositive> {
    let n = a.len();
    check_dimension(n)?;
    if let Some((index, &value)) = a.0.iter().enumerate().find(|(_, &v)| v % 2 == 1) {
        return Err(Error::OddExponent { index, value });
    }
    let n_f = n as f64;
    let ln = match q {
        QIndex::Finite(qv) => {
            let mut total = 0.0;
            let mut acc = n_f * (2.0 / qv).ln();
            for &ai in &a.0 {
                let shape = (ai as f64 + 1.0) / qv;
                acc += log_gamma_unchecked(shape);
                total += shape;
            }
            acc - log_gamma_unchecked(1.0 + total)
        }
        QIndex::Infinite => {
            n_f * std::f64::consts::LN_2 - a.0.iter().map(|&ai| (ai as f64 + 1.0).ln()).sum::<f64>()
        }
    };
    Ok(LogPositive(ln))
}

/// The three integrals `∫ x_1^2`, `∫ x_1^4`, `∫ x_1^2 x_2^2` over `B_q^n` (`n ≥ 2`).
pub(crate) fn ball_moment_triple(
    n: usize,
    q: QIndex,
) -> Result<(LogPositive, LogPositive, LogPositive)> {
    let m2 = log_monomial_moment(q, &ExponentVector::leading(n, &[2]))?;
    let m4 = log_monomial_moment(q, &ExponentVector::leading(n, &[4]))?;
    let m22 = log_monomial_moment(q, &ExponentVector::leading(n, &[2, 2]))?;
    Ok((m2, m4, m22))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    const QS: [QIndex; 5] = [
        QIndex::Finite(1.0),
        QIndex::Finite(1.5),
        QIndex::Finite(2.0),
        QIndex::Finite(4.0),
        QIndex::Infinite,
    ];

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn q_index_parsing_and_display() {
        assert_eq!("inf".parse::<QIndex>().unwrap(), QIndex::Infinite);
        assert_eq!("1.5".parse::<QIndex>().unwrap(), QIndex::Finite(1.5));
        assert!("0.5".parse::<QIndex>().is_err());
        assert!("abc".parse::<QIndex>().is_err());
        assert_eq!(QIndex::finite(f64::INFINITY).unwrap(), QIndex::Infinite);
        assert_ne!(QIndex::Infinite, QIndex::Finite(1e300));
        assert_eq!(QIndex::Infinite.to_string(), "inf");
        let json = serde_json::to_string(&[QIndex::Finite(2.0), QIndex::Infinite]).unwrap();
        assert_eq!(json, r#"[2.0,"inf"]"#);
        let back: Vec<QIndex> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![QIndex::Finite(2.0), QIndex::Infinite]);
    }

    #[test]
    fn ball_volume_examples() {
        let disk = log_ball_volume(2, QIndex::TWO).unwrap();
        assert!(close(disk.ln(), PI.ln(), 1e-14));
        for n in [1, 5, 40] {
            let cube = log_ball_volume(n, QIndex::Infinite).unwrap();
            assert!(close(cube.ln(), n as f64 * LN_2, 1e-15));
        }
        // 2^3/3! for the octahedron.
        let octa = log_ball_volume(3, QIndex::ONE).unwrap();
        assert!(close(octa.value(), 4.0 / 3.0, 1e-14));
        // Direct simplex oracle: 2^n orthants, each a corner simplex of volume 1/n!.
        let direct = 8.0 * (1.0 / 6.0);
        assert!(close(octa.value(), direct, 1e-14));
        assert!(log_ball_volume(0, QIndex::TWO).is_err());
    }

    #[test]
    fn monomial_examples() {
        for n in [1usize, 3, 9] {
            let m = log_monomial_moment(QIndex::Infinite, &ExponentVector::leading(n, &[2])).unwrap();
            assert!(close(m.value(), 2f64.powi(n as i32) / 3.0, 1e-14));
            let vol = log_monomial_moment(QIndex::ONE, &ExponentVector::zeros(n)).unwrap();
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            assert!(close(vol.value(), 2f64.powi(n as i32) / fact, 1e-13));
        }
        let disk = log_monomial_moment(QIndex::TWO, &ExponentVector::new(vec![2, 0])).unwrap();
        assert!(close(disk.value(), PI / 4.0, 1e-14));
    }

    #[test]
    fn odd_and_mismatched_exponents_rejected() {
        let err = log_monomial_moment(QIndex::TWO, &ExponentVector::new(vec![2, 3])).unwrap_err();
        assert_eq!(err, Error::OddExponent { index: 1, value: 3 });
        assert!(log_monomial_moment(QIndex::TWO, &ExponentVector::new(vec![])).is_err());
    }

    #[test]
    fn zero_exponent_moment_is_volume() {
        for n in 1..=100 {
            for q in QS {
                let a = log_monomial_moment(q, &ExponentVector::zeros(n)).unwrap();
                let b = log_ball_volume(n, q).unwrap();
                // relative 1e-12 on the linear scale is absolute 1e-12 on the log scale
                assert!((a.ln() - b.ln()).abs() <= 1e-12 * b.ln().abs().max(1.0), "n={n} q={q}");
            }
        }
    }

    #[test]
    fn ball_volume_increases_in_q() {
        for n in 1..=60 {
            let vols: Vec<f64> = QS.iter().map(|&q| log_ball_volume(n, q).unwrap().ln()).collect();
            for w in vols.windows(2) {
                if n == 1 {
                    assert!((w[0] - w[1]).abs() < 1e-14);
                } else {
                    assert!(w[0] < w[1], "n={n}: {vols:?}");
                }
            }
        }
    }

    #[test]
    fn large_q_approaches_cube() {
        let big = QIndex::Finite(1e6);
        for n in [2usize, 7, 30] {
            let a = ExponentVector::leading(n, &[2, 4]);
            let finite = log_monomial_moment(big, &a).unwrap().value();
            let cube = log_monomial_moment(QIndex::Infinite, &a).unwrap().value();
            assert!(close(finite, cube, 1e-4), "n={n}");
            let fv = log_ball_volume(n, big).unwrap().value();
            let cv = log_ball_volume(n, QIndex::Infinite).unwrap().value();
            assert!(close(fv, cv, 1e-4));
        }
    }

    #[test]
    fn log_positive_arithmetic() {
        let a = LogPositive::from_value(3.0).unwrap();
        let b = LogPositive::from_value(5.0).unwrap();
        assert!(close((a * b).value(), 15.0, 1e-15));
        assert!(close((b / a).value(), 5.0 / 3.0, 1e-15));
        assert!(close(a.plus(b).value(), 8.0, 1e-15));
        assert!(close(a.powf(2.0).value(), 9.0, 1e-15));
        assert!(LogPositive::from_value(0.0).is_none());
        assert_eq!(LogPositive::from_ln(-1e4).checked_value(), None);
        // far below double range but still exact in log form
        let tiny = LogPositive::from_ln(-5000.0) * LogPositive::from_ln(4000.0);
        assert!(close(tiny.ln(), -1000.0, 1e-15));
    }
}
