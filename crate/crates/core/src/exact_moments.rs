//! Closed-form moments of random simplex and crosspolytope volumes.
//!
//! Every quantity is composed from `ln Γ` and returned as a [`LogPositive`],
//! so dimensions in the hundreds are handled without overflow.

use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Error, Result};
use crate::special_math::{
    ball_moment_triple, log_ball_volume, log_factorial, log_gamma_unchecked, log_monomial_moment,
    ExponentVector, LogPositive, QIndex,
};

use std::f64::consts::{LN_2, PI};

/// The body `B_q^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub n: usize,
    pub q: QIndex,
}

impl BodySpec {
    pub fn new(n: usize, q: QIndex) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension { n, min: 1 });
        }
        Ok(BodySpec { n, q })
    }

    pub fn log_volume(&self) -> LogPositive {
        log_ball_volume(self.n, self.q).expect("n >= 1 by construction")
    }
}

/// Volume and low-order moment integrals of a 1-symmetric body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneSymmetricMoments {
    pub n: usize,
    /// `|K|`
    pub log_vol: LogPositive,
    /// `∫_K x_1^4 dx`
    pub log_m4: LogPositive,
    /// `∫_K x_1^2 x_2^2 dx`
    pub log_m22: LogPositive,
    /// `∫_K x_1^2 dx`
    pub log_m2: LogPositive,
}

impl OneSymmetricMoments {
    /// Integrals of `B_q^n`, `n ≥ 2`.
    pub fn of_ball(body: BodySpec) -> Result<Self> {
        if body.n < 2 {
            return Err(Error::Dimension { n: body.n, min: 2 });
        }
        let (log_m2, log_m4, log_m22) = ball_moment_triple(body.n, body.q)?;
        Ok(OneSymmetricMoments {
            n: body.n,
            log_vol: body.log_volume(),
            log_m4,
            log_m22,
            log_m2,
        })
    }

    /// `A_K = ∫ x_1^4 / ∫ x_1^2 x_2^2`.
    pub fn a_ratio(&self) -> f64 {
        (self.log_m4 / self.log_m22).value()
    }

    /// Moments of `λK`: volume scales by `λ^n`, a degree-`d` integral by `λ^{n+d}`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let ln_l = lambda.ln();
        let n = self.n as f64;
        let shift = |m: LogPositive, d: f64| LogPositive::from_ln(m.ln() + (n + d) * ln_l);
        OneSymmetricMoments {
            n: self.n,
            log_vol: shift(self.log_vol, 0.0),
            log_m4: shift(self.log_m4, 4.0),
            log_m22: shift(self.log_m22, 4.0),
            log_m2: shift(self.log_m2, 2.0),
        }
    }
}

/// Two-sided bound `lower ≤ E|X| ≤ upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationBracket {
    pub lower: LogPositive,
    pub upper: LogPositive,
}

impl ExpectationBracket {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower.value() && x <= self.upper.value()
    }
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
    abs: f64,
}

impl CompensatedSum {
    fn push(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs += x.abs();
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `φ(t, n)` in its degree-`(n+2)` form; also returns the absolute-term
/// scale that bounds the rounding error.
pub fn phi_expanded(t: f64, n: usize) -> (f64, f64) {
    let n_f = n as f64;
    let mut exp_part = CompensatedSum::default();
    let mut term = 1.0;
    exp_part.push(term);
    for k in 1..=n {
        term *= t / k as f64;
        exp_part.push(term);
    }
    let term_n1 = term * t / (n_f + 1.0);
    let term_n2 = term_n1 * t / (n_f + 2.0);
    let prefactor = 1.0 - 2.0 * t / (n_f + 2.0) + t * t / ((n_f + 1.0) * (n_f + 2.0));

    let mut out = CompensatedSum::default();
    out.push(exp_part.sum * prefactor);
    out.push(exp_part.comp * prefactor);
    out.push(term_n1);
    out.push(-term_n2);
    let prefactor_abs =
        1.0 + 2.0 * t.abs() / (n_f + 2.0) + t * t / ((n_f + 1.0) * (n_f + 2.0));
    let scale = prefactor_abs * exp_part.abs + term_n1.abs() + term_n2.abs();
    (out.total(), scale)
}

/// `φ(t, n)` as the truncated sum `Σ_{k≤n} (n+1−k)(n+2−k) t^k / (k! (n+1)(n+2))`.
pub fn phi_truncated(t: f64, n: usize) -> (f64, f64) {
    let n1 = n as f64 + 1.0;
    let n2 = n as f64 + 2.0;
    let mut acc = CompensatedSum::default();
    let mut power = 1.0;
    for k in 0..=n {
        if k > 0 {
            power *= t / k as f64;
        }
        let kf = k as f64;
        acc.push((n1 - kf) * (n2 - kf) / (n1 * n2) * power);
    }
    (acc.total(), acc.abs)
}

/// `φ(t, n)`; both printed forms are evaluated and must agree.
///
/// The agreement tolerance is `1e-9` relative plus a rounding allowance of
/// `1e-13` times the absolute-term scale, which only matters for large
/// negative `t` where both sums cancel heavily.
pub fn phi(t: f64, n: usize) -> f64 {
    let (expanded, scale_e) = phi_expanded(t, n);
    let (truncated, scale_t) = phi_truncated(t, n);
    let tol = 1e-9 * expanded.abs().max(truncated.abs()) + 1e-13 * scale_e.max(scale_t);
    assert!(
        (expanded - truncated).abs() <= tol,
        "phi({t}, {n}) forms disagree: {expanded:e} vs {truncated:e}"
    );
    expanded
}

/// `A_q = 9 Γ(1+1/q) Γ(1+5/q) / (5 Γ(1+3/q)^2)`.
pub fn a_constant(q: QIndex) -> f64 {
    let ln = (9.0f64 / 5.0).ln() + q.log_gamma_one_plus_over(1.0) + q.log_gamma_one_plus_over(5.0)
        - 2.0 * q.log_gamma_one_plus_over(3.0);
    ln.exp()
}

/// `A_q` through `Γ(1/q) Γ(5/q) / Γ(3/q)^2`; `None` at `q = ∞`.
pub fn a_constant_unshifted(q: QIndex) -> Option<f64> {
    match q {
        QIndex::Finite(qv) => {
            let ln = log_gamma_unchecked(1.0 / qv) + log_gamma_unchecked(5.0 / qv)
                - 2.0 * log_gamma_unchecked(3.0 / qv);
            Some(ln.exp())
        }
        QIndex::Infinite => None,
    }
}

/// `E V²` for `K = B_q^n`.
#[allow(non_snake_case)]
pub fn second_moment_V(body: BodySpec) -> LogPositive {
    let n = body.n as f64;
    let q = body.q;
    let g_n = q.log_gamma_one_plus_over(n);
    let inner = q.log_gamma_one_plus_over(3.0) + g_n
        - 3f64.ln()
        - 3.0 * q.log_gamma_one_plus_over(1.0)
        - q.log_gamma_one_plus_over(n + 2.0);
    LogPositive::from_ln(-log_factorial(body.n) + n * inner + 2.0 * g_n)
}

/// `E V⁴` for `K = B_q^n`.
///
/// The closed form is derived for `n ≥ 2`; at `n = 1` it still gives the
/// exact value `E x⁴` (see [`fourth_moment_is_extension`]).
#[allow(non_snake_case)]
pub fn fourth_moment_V(body: BodySpec) -> LogPositive {
    let n_u = body.n;
    let n = n_u as f64;
    let q = body.q;
    let g_n = q.log_gamma_one_plus_over(n);
    let inner = 2.0 * q.log_gamma_one_plus_over(3.0) + g_n
        - 9f64.ln()
        - 6.0 * q.log_gamma_one_plus_over(1.0)
        - q.log_gamma_one_plus_over(n + 4.0);
    let phi_val = phi(a_constant(q) - 3.0, n_u);
    LogPositive::from_ln(
        ((n + 1.0) * (n + 2.0) / 2.0).ln() - 2.0 * log_factorial(n_u)
            + n * inner
            + 4.0 * g_n
            + phi_val.ln(),
    )
}

/// Whether `fourth_moment_V` is being used outside `n ≥ 2`.
pub fn fourth_moment_is_extension(body: BodySpec) -> bool {
    body.n < 2
}

/// `E V_K⁴` for a 1-symmetric body given by its moment integrals.
pub fn fourth_moment_one_symmetric(m: &OneSymmetricMoments) -> Result<LogPositive> {
    if m.n < 2 {
        return Err(Error::Dimension { n: m.n, min: 2 });
    }
    let n = m.n as f64;
    let a = m.a_ratio();
    if !(a.is_finite() && a > 0.0) {
        return Err(out_of_range("A_K", a, "(0, inf)"));
    }
    let phi_val = phi(a - 3.0, m.n);
    Ok(LogPositive::from_ln(
        n * 16f64.ln() + ((n + 1.0) * (n + 2.0) / 2.0).ln() - 2.0 * log_factorial(m.n)
            - (n + 4.0) * m.log_vol.ln()
            + n * m.log_m22.ln()
            + phi_val.ln(),
    ))
}

/// `E V_K² = 4^n / n! · (∫x_1²)^n / |K|^{n+2}` for 1-symmetric `K`.
#[allow(non_snake_case)]
pub fn second_moment_V_from_isotropic(
    n: usize,
    log_vol: LogPositive,
    log_m2: LogPositive,
) -> LogPositive {
    let nf = n as f64;
    LogPositive::from_ln(
        nf * 4f64.ln() - log_factorial(n) + nf * log_m2.ln() - (nf + 2.0) * log_vol.ln(),
    )
}

/// `E U_K² = (n+1) / n! · (∫x_1²)^n / |K|^{n+2}` for 1-symmetric `K`.
#[allow(non_snake_case)]
pub fn second_moment_U_from_isotropic(
    n: usize,
    log_vol: LogPositive,
    log_m2: LogPositive,
) -> LogPositive {
    let nf = n as f64;
    LogPositive::from_ln(
        (nf + 1.0).ln() - log_factorial(n) + nf * log_m2.ln() - (nf + 2.0) * log_vol.ln(),
    )
}

/// Isotropic-route `E V²` and `E U²` for `B_q^n`.
#[allow(non_snake_case)]
pub fn isotropic_second_moments(body: BodySpec) -> (LogPositive, LogPositive) {
    let m2 = log_monomial_moment(body.q, &ExponentVector::leading(body.n, &[2]))
        .expect("even exponents");
    let vol = body.log_volume();
    (
        second_moment_V_from_isotropic(body.n, vol, m2),
        second_moment_U_from_isotropic(body.n, vol, m2),
    )
}

/// `E U_Δ²` for the simplex: `n! / ((n+1)(n+2))^n`.
pub fn simplex_second_moment(n: usize) -> Result<LogPositive> {
    if n == 0 {
        return Err(Error::Dimension { n, min: 1 });
    }
    let nf = n as f64;
    Ok(LogPositive::from_ln(
        log_factorial(n) - nf * ((nf + 1.0) * (nf + 2.0)).ln(),
    ))
}

fn check_miles(n: usize, k: usize, s: usize, p: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Dimension { n, min: 1 });
    }
    if k == 0 || k > n {
        return Err(out_of_range("k", k, "1 <= k <= n"));
    }
    if s > k {
        return Err(out_of_range("s", s, "0 <= s <= k"));
    }
    if !p.is_finite() || p < 0.0 {
        return Err(out_of_range("p", p, "[0, inf)"));
    }
    Ok(())
}

/// `ln E V^p` for the `k`-volume of the symmetric hull of `k` points in
/// `ℝ^n`, `s` uniform on the sphere and `k − s` uniform in the ball.
pub fn miles_moment(n: usize, k: usize, s: usize, p: f64) -> Result<LogPositive> {
    check_miles(n, k, s, p)?;
    let (nf, kf, sf) = (n as f64, k as f64, s as f64);
    let mut ln = p * (kf * LN_2 - log_factorial(k)) + sf * (p / nf).ln_1p()
        + kf * (log_gamma_unchecked(1.0 + nf / 2.0) - log_gamma_unchecked(1.0 + (nf + p) / 2.0));
    for i in 1..=k {
        let base = (n - k + i) as f64;
        ln += log_gamma_unchecked((base + p) / 2.0) - log_gamma_unchecked(base / 2.0);
    }
    Ok(LogPositive::from_ln(ln))
}

/// `ln E V_{B_2^n}^p`, the normalized crosspolytope moment in the Euclidean ball.
pub fn euclid_moment(n: usize, p: f64) -> Result<LogPositive> {
    if n == 0 {
        return Err(Error::Dimension { n, min: 1 });
    }
    if !p.is_finite() || p < 0.0 {
        return Err(out_of_range("p", p, "[0, inf)"));
    }
    let nf = n as f64;
    let g_half = log_gamma_unchecked(1.0 + nf / 2.0);
    let lead = nf * LN_2 + g_half - log_factorial(n) - nf / 2.0 * PI.ln();
    let mut ln = p * lead + nf * (g_half - log_gamma_unchecked(1.0 + (nf + p) / 2.0));
    for i in 1..=n {
        let i = i as f64;
        ln += log_gamma_unchecked((i + p) / 2.0) - log_gamma_unchecked(i / 2.0);
    }
    Ok(LogPositive::from_ln(ln))
}

/// `ln E|det GᵗG|^p` for an `n × k` standard Gaussian matrix `G`.
pub fn gaussian_gram_log_moment(n: usize, k: usize, p: f64) -> Result<LogPositive> {
    check_miles(n, k, 0, p)?;
    let kf = k as f64;
    let mut ln = kf * p * LN_2;
    for i in 1..=k {
        let base = (n - k + i) as f64 / 2.0;
        ln += log_gamma_unchecked(p + base) - log_gamma_unchecked(base);
    }
    Ok(LogPositive::from_ln(ln))
}

/// `α(t) = e^{1−2t} Γ(1+3t) / (3 Γ(1+t)³)` on `[0, 1]`.
pub fn alpha(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(out_of_range("t", t, "[0, 1]"));
    }
    let ln = 1.0 - 2.0 * t + log_gamma_unchecked(1.0 + 3.0 * t)
        - 3f64.ln()
        - 3.0 * log_gamma_unchecked(1.0 + t);
    Ok(ln.exp())
}

/// `ln ‖V_{B_q^n}‖_∞ = ln(|B_1^n| / |B_q^n|)`, stated for `1 ≤ q ≤ 2`.
#[allow(non_snake_case)]
pub fn sup_norm_V(n: usize, q: QIndex) -> Result<LogPositive> {
    match q {
        QIndex::Finite(qv) if qv <= 2.0 => {}
        _ => return Err(out_of_range("q", q, "[1, 2]")),
    }
    Ok(log_ball_volume(n, QIndex::ONE)? / log_ball_volume(n, q)?)
}

/// `(1 + p/n)^{−n/p}`, the factor bounding `‖V_K‖_p / ‖V_K‖_∞`.
pub fn pnorm_upper_bound(n: usize, p: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Dimension { n, min: 1 });
    }
    if !p.is_finite() || p <= 0.0 {
        return Err(out_of_range("p", p, "(0, inf)"));
    }
    let nf = n as f64;
    Ok((-(nf / p) * (p / nf).ln_1p()).exp())
}

/// `[(‖X‖₂/‖X‖₄)² ‖X‖₂, ‖X‖₂]`, which contains `‖X‖₁`.
///
/// Inputs that violate `‖X‖₂ ≤ ‖X‖₄` by more than rounding are rejected.
pub fn khintchine_bracket(norm2: LogPositive, norm4: LogPositive) -> Result<ExpectationBracket> {
    let excess = norm2.ln() - norm4.ln();
    if excess > 1e-12 * norm2.ln().abs().max(1.0) {
        return Err(Error::NormOrdering {
            norm2: norm2.value(),
            norm4: norm4.value(),
        });
    }
    let ratio = if excess > 0.0 { LogPositive::ONE } else { norm2 / norm4 };
    Ok(ExpectationBracket {
        lower: ratio.powf(2.0) * norm2,
        upper: norm2,
    })
}

/// Ratio of a moment to its leading asymptotic:
/// `n^{m/2} (E V^m)^{1/n} / α(1/q)^{m/2}` for `m ∈ {2, 4}`.
pub fn asymptotic_ratio(n: usize, q: QIndex, order: u32) -> Result<f64> {
    let body = BodySpec::new(n, q)?;
    let (moment, half) = match order {
        2 => (second_moment_V(body), 1.0),
        4 => (fourth_moment_V(body), 2.0),
        other => return Err(out_of_range("moment order", other, "{2, 4}")),
    };
    let a = alpha(q.recip())?;
    let nf = n as f64;
    Ok((half * nf.ln() + moment.ln() / nf - half * a.ln()).exp())
}
