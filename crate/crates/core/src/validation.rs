//! Declarative validation cases and suites.
//!
//! A [`ValidationCase`] pairs an identifier with a [`Check`]. [`run_suite`]
//! evaluates a list of cases into a [`ValidationReport`]. Monte Carlo passes
//! are shared: cases whose sample configurations differ only in the power
//! are served by a single pass over the samples.

use std::collections::BTreeMap;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_moments::{
    a_constant, a_constant_unshifted, alpha, asymptotic_ratio, euclid_moment,
    fourth_moment_V, fourth_moment_one_symmetric, gaussian_gram_log_moment,
    isotropic_second_moments, khintchine_bracket, miles_moment, phi, phi_expanded,
    phi_truncated, pnorm_upper_bound, second_moment_V, simplex_second_moment, sup_norm_V,
    BodySpec, OneSymmetricMoments,
};
use crate::mc_engine::{estimate_moments, MomentEstimate, SampleConfig, Statistic, DEFAULT_SAMPLES};
use crate::perm_combinatorics::{
    claim_identity_holds, d_table, enumerate_t, enumerate_t_naive, fixed_count_histogram,
    fourth_moment_via_triples, generating_series_check, is_member_t, log_d_sequence, verify_sign,
};
use crate::special_math::{log_gamma, LogPositive, QIndex};

/// Two-sided z gate for Monte Carlo comparisons.
pub const DEFAULT_Z: f64 = 4.0;
/// Relative log-domain tolerance for exact comparisons.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    ExactVsExact,
    ExactVsEnum,
    ExactVsMc,
    Inequality,
    AsymptoticTrend,
}

/// A positive closed-form quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Quantity {
    SecondMomentV { n: usize, q: QIndex },
    FourthMomentV { n: usize, q: QIndex },
    FourthMomentOneSymmetric { n: usize, q: QIndex },
    FourthMomentViaTriples { n: usize, q: QIndex },
    IsotropicSecondMomentV { n: usize, q: QIndex },
    IsotropicSecondMomentU { n: usize, q: QIndex },
    SimplexSecondMoment { n: usize },
    EuclidMoment { n: usize, p: f64 },
    MilesMoment { n: usize, k: usize, s: usize, p: f64 },
    /// `E V_{n,k,k}^p` rebuilt from Gaussian Gram moments and chi moments.
    MilesFromGaussianGram { n: usize, k: usize, p: f64 },
    AConstant { q: QIndex },
    AConstantUnshifted { q: QIndex },
    Rational { num: i64, den: i64 },
    Shifted { base: Box<Quantity>, log_shift: f64 },
}

impl Quantity {
    pub fn evaluate(&self) -> Result<LogPositive> {
        use Quantity::*;
        let body = |n: usize, q: QIndex| BodySpec::new(n, q);
        let positive = |name: &str, v: f64| {
            LogPositive::from_value(v).ok_or_else(|| Error::Config(format!("{name} is not positive: {v}")))
        };
        match self {
            SecondMomentV { n, q } => Ok(second_moment_V(body(*n, *q)?)),
            FourthMomentV { n, q } => Ok(fourth_moment_V(body(*n, *q)?)),
            FourthMomentOneSymmetric { n, q } => {
                fourth_moment_one_symmetric(&OneSymmetricMoments::of_ball(body(*n, *q)?)?)
            }
            FourthMomentViaTriples { n, q } => fourth_moment_via_triples(body(*n, *q)?),
            IsotropicSecondMomentV { n, q } => Ok(isotropic_second_moments(body(*n, *q)?).0),
            IsotropicSecondMomentU { n, q } => Ok(isotropic_second_moments(body(*n, *q)?).1),
            SimplexSecondMoment { n } => simplex_second_moment(*n),
            EuclidMoment { n, p } => euclid_moment(*n, *p),
            MilesMoment { n, k, s, p } => miles_moment(*n, *k, *s, *p),
            MilesFromGaussianGram { n, k, p } => {
                let gram = gaussian_gram_log_moment(*n, *k, p / 2.0)?;
                let (nf, kf) = (*n as f64, *k as f64);
                let chi = p / 2.0 * std::f64::consts::LN_2 + log_gamma((nf + p) / 2.0)?
                    - log_gamma(nf / 2.0)?;
                let hull = p * (kf * std::f64::consts::LN_2 - crate::special_math::log_factorial(*k));
                Ok(LogPositive::from_ln(hull + gram.ln() - kf * chi))
            }
            AConstant { q } => positive("A_q", a_constant(*q)),
            AConstantUnshifted { q } => a_constant_unshifted(*q)
                .ok_or_else(|| Error::Config(format!("unshifted form needs finite q, got {q}")))
                .and_then(|v| positive("A_q", v)),
            Rational { num, den } => positive("rational", *num as f64 / *den as f64),
            Shifted { base, log_shift } => Ok(LogPositive::from_ln(base.evaluate()?.ln() + log_shift)),
        }
    }
}

/// Monte Carlo side of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSource {
    pub samples: u64,
    pub seed: u64,
}

/// Independent sources for the crosspolytope and simplex statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedSource {
    pub v: McSource,
    pub u: McSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Check {
    /// Two closed forms agree to a relative log-domain tolerance.
    ExactPair { lhs: Quantity, rhs: Quantity, rel_tol: f64 },
    /// `φ` in its two printed forms agrees.
    PhiForms { t: f64, n: usize, rel_tol: f64 },
    /// The float `ln d_m` track matches the exact integers.
    LogDTrack { n: usize, rel_tol: f64 },
    /// `d_0..` from the recurrence equals the listed values.
    DSequence { expected: Vec<u64> },
    /// The fixed-count histogram of `T_n` equals row `n` of the d-table.
    HistogramMatchesTable { n: usize },
    EnumerationCount { n: usize, expected: u64 },
    /// Fast and naive enumerations of `T_n` agree and every member passes the membership test.
    NaiveAgreement { n: usize },
    SignClaim { n: usize },
    GeneratingSeries { order: usize },
    /// `poly_sum(n, t) = ((n+2)!/2) φ(t−3, n)` for all `n ≤ n_max` and each `t = num/den`.
    ClaimIdentity { n_max: usize, t: Vec<[i64; 2]> },
    /// `|ln estimate − ln exact| ≤ z_max · stderr`.
    MonteCarlo { config: SampleConfig, exact: Quantity, z_max: f64 },
    /// A deterministic statistic: zero standard error and the exact value.
    ZeroVariance { config: SampleConfig, exact: Quantity, rel_tol: f64 },
    /// `(2/(n+1)^{1/n}) ‖U‖_p^{1/n} ≤ ‖V‖_p^{1/n} ≤ 2 ‖U‖_p^{1/n}`, exact at `p = 2` or estimated.
    Sandwich { n: usize, q: QIndex, p: f64, mc: Option<PairedSource>, z_max: f64 },
    /// `E V²(B_q^n) ≥ E V²(B_2^n)`, strict for `n ≥ 2`.
    Minimizer { n: usize, q: QIndex },
    /// `‖V‖_p ≤ (1 + p/n)^{−n/p} ‖V‖_∞` for `p ∈ {2, 4}`.
    SupNormChain { n: usize, q: QIndex, p: u32 },
    /// The estimated `E V` lies in the bracket built from exact `‖V‖₂`, `‖V‖₄`.
    Khintchine { n: usize, q: QIndex, mc: McSource, z_max: f64 },
    /// `|r_large − 1| < tol` and `|r_large − 1| < |r_small − 1|` for the normalized moment ratio.
    AsymptoticTrend { q: QIndex, order: u32, n_small: usize, n_large: usize, tol: f64 },
}

impl Check {
    pub fn kind(&self) -> CaseKind {
        use Check::*;
        match self {
            ExactPair { lhs, rhs, .. } => {
                let enumerated = |q: &Quantity| matches!(q, Quantity::FourthMomentViaTriples { .. });
                if enumerated(lhs) || enumerated(rhs) {
                    CaseKind::ExactVsEnum
                } else {
                    CaseKind::ExactVsExact
                }
            }
            PhiForms { .. } | LogDTrack { .. } | ClaimIdentity { .. } | GeneratingSeries { .. } => {
                CaseKind::ExactVsExact
            }
            DSequence { .. }
            | HistogramMatchesTable { .. }
            | EnumerationCount { .. }
            | NaiveAgreement { .. }
            | SignClaim { .. } => CaseKind::ExactVsEnum,
            MonteCarlo { .. } | ZeroVariance { .. } => CaseKind::ExactVsMc,
            Sandwich { .. } | Minimizer { .. } | SupNormChain { .. } | Khintchine { .. } => {
                CaseKind::Inequality
            }
            AsymptoticTrend { .. } => CaseKind::AsymptoticTrend,
        }
    }

    /// Rejects non-positive tolerances and invalid sample configurations.
    pub fn validate(&self) -> Result<()> {
        use Check::*;
        let tol = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            ExactPair { rel_tol, .. } | PhiForms { rel_tol, .. } | LogDTrack { rel_tol, .. } => {
                tol("rel_tol", *rel_tol)
            }
            ZeroVariance { config, rel_tol, .. } => {
                tol("rel_tol", *rel_tol)?;
                config.validate()
            }
            MonteCarlo { config, z_max, .. } => {
                tol("z_max", *z_max)?;
                config.validate()
            }
            Sandwich { z_max, .. } | Khintchine { z_max, .. } => tol("z_max", *z_max),
            AsymptoticTrend { tol: t, .. } => tol("tol", *t),
            ClaimIdentity { t, .. } => match t.iter().find(|r| r[1] == 0) {
                Some(_) => Err(Error::Config("rational with zero denominator".into())),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Every Monte Carlo estimate the check consumes.
    fn mc_requests(&self) -> Vec<SampleConfig> {
        use Check::*;
        match self {
            MonteCarlo { config, .. } | ZeroVariance { config, .. } => vec![*config],
            Sandwich { n, q, p, mc: Some(mc), .. } => match BodySpec::new(*n, *q) {
                Ok(body) => vec![
                    grid_config(body, Statistic::VCrosspolytope, *p, mc.v),
                    grid_config(body, Statistic::USimplex, *p, mc.u),
                ],
                Err(_) => Vec::new(),
            },
            Khintchine { n, q, mc, .. } => match BodySpec::new(*n, *q) {
                Ok(body) => vec![grid_config(body, Statistic::VCrosspolytope, 1.0, *mc)],
                Err(_) => Vec::new(),
            },
            _ => Vec::new(),
        }
    }
}

fn grid_config(body: BodySpec, statistic: Statistic, p: f64, mc: McSource) -> SampleConfig {
    SampleConfig::new(body, statistic, p, mc.samples, mc.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCase {
    pub id: String,
    /// Acceptance criterion the case belongs to, if any.
    pub criterion: Option<u8>,
    pub kind: CaseKind,
    pub check: Check,
}

impl ValidationCase {
    pub fn new(id: impl Into<String>, criterion: Option<u8>, check: Check) -> Self {
        ValidationCase {
            id: id.into(),
            criterion,
            kind: check.kind(),
            check,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub id: String,
    pub criterion: Option<u8>,
    pub kind: CaseKind,
    pub passed: bool,
    /// Log of the reference value, where one exists.
    pub exact_log: Option<f64>,
    pub estimate_log: Option<f64>,
    pub stderr_log: Option<f64>,
    pub z_score: Option<f64>,
    pub rel_error: Option<f64>,
    /// Signed slack of an inequality; negative means violated.
    pub margin: Option<f64>,
    pub detail: String,
    pub error: Option<String>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    /// Failed because the case could not be evaluated.
    pub errored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub cases: Vec<CaseResult>,
    pub summary: Summary,
    pub wall_seconds: f64,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    /// Results for one criterion.
    pub fn criterion(&self, c: u8) -> impl Iterator<Item = &CaseResult> {
        self.cases.iter().filter(move |r| r.criterion == Some(c))
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Default)]
struct Outcome {
    passed: bool,
    exact_log: Option<f64>,
    estimate_log: Option<f64>,
    stderr_log: Option<f64>,
    z_score: Option<f64>,
    rel_error: Option<f64>,
    margin: Option<f64>,
    detail: String,
}

impl Outcome {
    fn flag(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
            ..Default::default()
        }
    }

    /// An inequality `lhs ≤ rhs` in logs, with `slack` added to the right side.
    fn le(lhs: f64, rhs: f64, slack: f64, detail: impl Into<String>) -> Self {
        let margin = rhs + slack - lhs;
        Outcome {
            passed: margin >= 0.0,
            margin: finite(margin),
            detail: detail.into(),
            ..Default::default()
        }
    }
}

/// Estimates shared across cases, keyed by everything but the power.
struct McCache {
    passes: BTreeMap<String, std::result::Result<Vec<MomentEstimate>, String>>,
    seconds: BTreeMap<String, f64>,
}

fn pass_key(config: &SampleConfig) -> String {
    let base = SampleConfig { power: 0.0, ..*config };
    serde_json::to_string(&base).expect("config serializes")
}

impl McCache {
    fn build(cases: &[ValidationCase]) -> Self {
        let mut groups: BTreeMap<String, (SampleConfig, Vec<f64>)> = BTreeMap::new();
        for case in cases {
            if case.check.validate().is_err() {
                continue;
            }
            for config in case.check.mc_requests() {
                let entry = groups.entry(pass_key(&config)).or_insert((config, Vec::new()));
                if !entry.1.iter().any(|p| p.to_bits() == config.power.to_bits()) {
                    entry.1.push(config.power);
                }
            }
        }
        let mut passes = BTreeMap::new();
        let mut seconds = BTreeMap::new();
        for (key, (config, mut powers)) in groups {
            powers.sort_by(f64::total_cmp);
            let start = Instant::now();
            let result = estimate_moments(&config, &powers, None).map_err(|e| e.to_string());
            seconds.insert(key.clone(), start.elapsed().as_secs_f64());
            passes.insert(key, result);
        }
        McCache { passes, seconds }
    }

    fn get(&self, config: &SampleConfig) -> Result<&MomentEstimate> {
        let key = pass_key(config);
        let pass = self
            .passes
            .get(&key)
            .ok_or_else(|| Error::Config("missing Monte Carlo pass".into()))?
            .as_ref()
            .map_err(|e| Error::Config(e.clone()))?;
        pass.iter()
            .find(|e| e.config.power.to_bits() == config.power.to_bits())
            .ok_or_else(|| Error::Config("missing Monte Carlo power".into()))
    }

    fn seconds(&self, config: &SampleConfig) -> f64 {
        self.seconds.get(&pass_key(config)).copied().unwrap_or(0.0)
    }
}

fn rational(r: [i64; 2]) -> BigRational {
    BigRational::new(BigInt::from(r[0]), BigInt::from(r[1]))
}

fn ln_bigint(x: &BigInt) -> f64 {
    let shift = x.bits().saturating_sub(64);
    (x >> shift).to_f64().unwrap_or(f64::NAN).ln() + shift as f64 * std::f64::consts::LN_2
}

fn norm_log(estimate: &MomentEstimate, p: f64, n: usize) -> (f64, f64) {
    let scale = p * n as f64;
    (estimate.log_mean / scale, estimate.log_stderr / scale)
}

fn evaluate(check: &Check, cache: &McCache) -> Result<Outcome> {
    use Check::*;
    match check {
        ExactPair { lhs, rhs, rel_tol } => {
            let (a, b) = (lhs.evaluate()?, rhs.evaluate()?);
            let rel = a.log_rel_diff(b);
            Ok(Outcome {
                passed: rel <= *rel_tol,
                exact_log: Some(b.ln()),
                estimate_log: Some(a.ln()),
                rel_error: finite(rel),
                detail: format!("ln lhs = {:.15e}, ln rhs = {:.15e}", a.ln(), b.ln()),
                ..Default::default()
            })
        }
        PhiForms { t, n, rel_tol } => {
            let (e, se) = phi_expanded(*t, *n);
            let (u, su) = phi_truncated(*t, *n);
            let scale = se.max(su).max(e.abs()).max(u.abs());
            let rel = (e - u).abs() / scale;
            let combined = phi(*t, *n);
            Ok(Outcome {
                passed: rel <= *rel_tol && combined.is_finite(),
                rel_error: finite(rel),
                detail: format!("expanded {e:.15e}, truncated {u:.15e}"),
                ..Default::default()
            })
        }
        LogDTrack { n, rel_tol } => {
            let table = d_table(*n);
            let logs = log_d_sequence(*n);
            let mut worst = 0.0f64;
            for (m, (exact, approx)) in table.d.iter().zip(&logs).enumerate() {
                if m == 1 {
                    if *approx != f64::NEG_INFINITY {
                        return Ok(Outcome::flag(false, "ln d_1 should be -inf"));
                    }
                    continue;
                }
                let ln_exact = ln_bigint(exact);
                worst = worst.max((approx - ln_exact).abs() / ln_exact.abs().max(1.0));
            }
            Ok(Outcome {
                passed: worst <= *rel_tol,
                rel_error: Some(worst),
                detail: format!("worst relative error over m <= {n}: {worst:e}"),
                ..Default::default()
            })
        }
        DSequence { expected } => {
            let table = d_table(expected.len().saturating_sub(1));
            let got: Vec<String> = table.d.iter().map(|x| x.to_string()).collect();
            let want: Vec<String> = expected.iter().map(|x| x.to_string()).collect();
            Ok(Outcome::flag(got == want, format!("d = [{}]", got.join(", "))))
        }
        HistogramMatchesTable { n } => {
            let hist = fixed_count_histogram(*n)?;
            let table = d_table(*n);
            let row: Vec<String> = table.row(*n).iter().map(|x| x.to_string()).collect();
            let got: Vec<String> = hist.iter().map(|x| x.to_string()).collect();
            Ok(Outcome::flag(
                got == row,
                format!("histogram [{}], table row [{}]", got.join(", "), row.join(", ")),
            ))
        }
        EnumerationCount { n, expected } => {
            let count = fixed_count_histogram(*n)?.iter().sum::<u64>();
            Ok(Outcome::flag(count == *expected, format!("|T_{n}| = {count}")))
        }
        NaiveAgreement { n } => {
            let mut fast: Vec<_> = enumerate_t(*n)?.into_iter().map(|m| (m.triple.clone(), m.fixed)).collect();
            let mut naive: Vec<_> =
                enumerate_t_naive(*n)?.into_iter().map(|m| (m.triple.clone(), m.fixed)).collect();
            let members = fast.iter().all(|(t, _)| is_member_t(t));
            let key = |x: &(crate::perm_combinatorics::PermTriple, usize)| {
                (x.0.t1.images().to_vec(), x.0.t2.images().to_vec(), x.0.t3.images().to_vec())
            };
            fast.sort_by_key(key);
            naive.sort_by_key(key);
            Ok(Outcome::flag(
                members && fast == naive,
                format!("{} members by both enumerations", fast.len()),
            ))
        }
        SignClaim { n } => Ok(Outcome::flag(verify_sign(*n)?, format!("sign over T_{n}"))),
        GeneratingSeries { order } => Ok(Outcome::flag(
            generating_series_check(*order),
            format!("first {order} coefficients"),
        )),
        ClaimIdentity { n_max, t } => {
            let failures: Vec<String> = t
                .iter()
                .flat_map(|&r| (0..=*n_max).map(move |n| (n, r)))
                .filter(|&(n, r)| !claim_identity_holds(n, &rational(r)))
                .map(|(n, r)| format!("n={n}, t={}/{}", r[0], r[1]))
                .collect();
            Ok(Outcome::flag(
                failures.is_empty(),
                if failures.is_empty() {
                    format!("{} (n, t) pairs", (n_max + 1) * t.len())
                } else {
                    format!("fails at {}", failures.join("; "))
                },
            ))
        }
        MonteCarlo { config, exact, z_max } => {
            let exact = exact.evaluate()?.ln();
            let est = cache.get(config)?;
            let z = est.z_score(exact);
            Ok(Outcome {
                passed: z.abs() <= *z_max,
                exact_log: Some(exact),
                estimate_log: finite(est.log_mean),
                stderr_log: finite(est.log_stderr),
                z_score: finite(z),
                detail: format!("{} zero-volume samples", est.zero_volume_samples),
                ..Default::default()
            })
        }
        ZeroVariance { config, exact, rel_tol } => {
            let exact = exact.evaluate()?;
            let est = cache.get(config)?;
            let rel = LogPositive::from_ln(est.log_mean).log_rel_diff(exact);
            Ok(Outcome {
                passed: est.log_stderr == 0.0 && rel <= *rel_tol,
                exact_log: Some(exact.ln()),
                estimate_log: finite(est.log_mean),
                stderr_log: finite(est.log_stderr),
                rel_error: finite(rel),
                ..Default::default()
            })
        }
        Sandwich { n, q, p, mc, z_max } => {
            let body = BodySpec::new(*n, *q)?;
            let nf = *n as f64;
            let low_shift = std::f64::consts::LN_2 - (nf + 1.0).ln() / nf;
            let high_shift = std::f64::consts::LN_2;
            let (v, u, slack) = match mc {
                None => {
                    if *p != 2.0 {
                        return Err(Error::Config("the exact sandwich is available at p = 2 only".into()));
                    }
                    let (_, u2) = isotropic_second_moments(body);
                    let scale = 2.0 * nf;
                    let v = second_moment_V(body).ln() / scale;
                    let u = u2.ln() / scale;
                    (v, u, 1e-12 * v.abs().max(1.0))
                }
                Some(mc) => {
                    let ve = cache.get(&grid_config(body, Statistic::VCrosspolytope, *p, mc.v))?;
                    let ue = cache.get(&grid_config(body, Statistic::USimplex, *p, mc.u))?;
                    let (v, sv) = norm_log(ve, *p, *n);
                    let (u, su) = norm_log(ue, *p, *n);
                    (v, u, z_max * sv.hypot(su))
                }
            };
            let lower = Outcome::le(u + low_shift, v, slack, "");
            let upper = Outcome::le(v, u + high_shift, slack, "");
            let margin = lower.margin.unwrap_or(f64::NEG_INFINITY).min(upper.margin.unwrap_or(f64::NEG_INFINITY));
            Ok(Outcome {
                passed: lower.passed && upper.passed,
                margin: finite(margin),
                detail: format!(
                    "ln‖U‖^(1/n) = {u:.6}, ln‖V‖^(1/n) = {v:.6}, bounds [{:.6}, {:.6}]",
                    u + low_shift,
                    u + high_shift
                ),
                ..Default::default()
            })
        }
        Minimizer { n, q } => {
            let m = second_moment_V(BodySpec::new(*n, *q)?).ln();
            let e = second_moment_V(BodySpec::new(*n, QIndex::TWO)?).ln();
            let mut out = if *n >= 2 {
                Outcome {
                    passed: m > e,
                    margin: Some(m - e),
                    ..Default::default()
                }
            } else {
                Outcome::le(e, m, 1e-12, "")
            };
            out.detail = format!("ln E V² = {m:.12}, at q = 2: {e:.12}");
            Ok(out)
        }
        SupNormChain { n, q, p } => {
            let body = BodySpec::new(*n, *q)?;
            let pf = f64::from(*p);
            let moment = match p {
                2 => second_moment_V(body),
                4 => fourth_moment_V(body),
                other => return Err(Error::Config(format!("chain is checked for p in {{2, 4}}, got {other}"))),
            };
            let lhs = moment.ln() / pf;
            let rhs = pnorm_upper_bound(*n, pf)?.ln() + sup_norm_V(*n, *q)?.ln();
            Ok(Outcome::le(lhs, rhs, 1e-12 * rhs.abs().max(1.0), format!("ln‖V‖_{p} = {lhs:.12}, bound {rhs:.12}")))
        }
        Khintchine { n, q, mc, z_max } => {
            let body = BodySpec::new(*n, *q)?;
            let norm2 = second_moment_V(body).powf(0.5);
            let norm4 = fourth_moment_V(body).powf(0.25);
            let bracket = khintchine_bracket(norm2, norm4)?;
            let est = cache.get(&grid_config(body, Statistic::VCrosspolytope, 1.0, *mc))?;
            let slack = z_max * est.log_stderr;
            let lower = Outcome::le(bracket.lower.ln(), est.log_mean, slack, "");
            let upper = Outcome::le(est.log_mean, bracket.upper.ln(), slack, "");
            let margin = lower.margin.unwrap_or(f64::NEG_INFINITY).min(upper.margin.unwrap_or(f64::NEG_INFINITY));
            Ok(Outcome {
                passed: lower.passed && upper.passed,
                estimate_log: finite(est.log_mean),
                stderr_log: finite(est.log_stderr),
                margin: finite(margin),
                detail: format!(
                    "ln E V = {:.6}, bracket [{:.6}, {:.6}]",
                    est.log_mean,
                    bracket.lower.ln(),
                    bracket.upper.ln()
                ),
                ..Default::default()
            })
        }
        AsymptoticTrend { q, order, n_small, n_large, tol } => {
            alpha(q.recip())?;
            let small = asymptotic_ratio(*n_small, *q, *order)?;
            let large = asymptotic_ratio(*n_large, *q, *order)?;
            let (ds, dl) = ((small - 1.0).abs(), (large - 1.0).abs());
            Ok(Outcome {
                passed: dl < *tol && dl < ds,
                margin: finite((tol - dl).min(ds - dl)),
                detail: format!("r_{n_small} = {small:.9}, r_{n_large} = {large:.9}"),
                ..Default::default()
            })
        }
    }
}

fn run_case(case: &ValidationCase, cache: &McCache) -> CaseResult {
    let start = Instant::now();
    let result = case.check.validate().and_then(|_| evaluate(&case.check, cache));
    let shared: f64 = case.check.mc_requests().iter().map(|c| cache.seconds(c)).sum();
    let wall_seconds = start.elapsed().as_secs_f64() + shared;
    let base = CaseResult {
        id: case.id.clone(),
        criterion: case.criterion,
        kind: case.kind,
        passed: false,
        exact_log: None,
        estimate_log: None,
        stderr_log: None,
        z_score: None,
        rel_error: None,
        margin: None,
        detail: String::new(),
        error: None,
        wall_seconds,
    };
    match result {
        Ok(o) => CaseResult {
            passed: o.passed,
            exact_log: o.exact_log,
            estimate_log: o.estimate_log,
            stderr_log: o.stderr_log,
            z_score: o.z_score,
            rel_error: o.rel_error,
            margin: o.margin,
            detail: o.detail,
            ..base
        },
        Err(e) => CaseResult {
            error: Some(e.to_string()),
            ..base
        },
    }
}

fn run_all(cases: &[ValidationCase]) -> Vec<CaseResult> {
    let cache = McCache::build(cases);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        cases.par_iter().map(|c| run_case(c, &cache)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        cases.iter().map(|c| run_case(c, &cache)).collect()
    }
}

/// Runs every case; errors become failed entries. Results are ordered by id.
/// `threads` is a parallelism hint and does not affect any reported value.
pub fn run_suite(cases: &[ValidationCase], threads: Option<usize>) -> ValidationReport {
    let start = Instant::now();
    #[cfg(feature = "parallel")]
    let mut results = match threads.and_then(|t| rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build().ok()) {
        Some(pool) => pool.install(|| run_all(cases)),
        None => run_all(cases),
    };
    #[cfg(not(feature = "parallel"))]
    let mut results = {
        let _ = threads;
        run_all(cases)
    };
    results.sort_by(|a, b| a.id.cmp(&b.id));
    let passed = results.iter().filter(|r| r.passed).count();
    let errored = results.iter().filter(|r| r.error.is_some()).count();
    ValidationReport {
        summary: Summary {
            total: results.len(),
            passed,
            failed: results.len() - passed,
            errored,
        },
        cases: results,
        wall_seconds: start.elapsed().as_secs_f64(),
    }
}

fn q_label(q: QIndex) -> String {
    q.to_string().replace('.', "_")
}

const GRID_N: [usize; 4] = [2, 3, 5, 8];
const SMALL_N: [usize; 3] = [2, 3, 5];

fn grid_q() -> [QIndex; 4] {
    [QIndex::ONE, QIndex::TWO, QIndex::Finite(4.0), QIndex::Infinite]
}

fn small_q() -> [QIndex; 3] {
    [QIndex::ONE, QIndex::TWO, QIndex::Infinite]
}

fn wide_q() -> [QIndex; 5] {
    [QIndex::ONE, QIndex::Finite(1.5), QIndex::TWO, QIndex::Finite(4.0), QIndex::Infinite]
}

/// Seed of the Monte Carlo cell `(statistic, n, q)`; shared by every case reading that cell.
fn cell_seed(stat: u64, n: usize, q: QIndex) -> u64 {
    let qcode = match q {
        QIndex::Finite(v) => (v * 100.0).round() as u64,
        QIndex::Infinite => 9999,
    };
    0x5EED_0000 + stat * 1_000_000 + n as u64 * 10_000 + qcode
}

/// The closed-form and combinatorial cases of the default suite.
pub fn exact_suite() -> Vec<ValidationCase> {
    let mut cases = Vec::new();
    let mut push = |id: String, c: Option<u8>, check: Check| cases.push(ValidationCase::new(id, c, check));
    let pair = |lhs, rhs| Check::ExactPair { lhs, rhs, rel_tol: DEFAULT_REL_TOL };

    push("c1-d-sequence".into(), Some(1), Check::DSequence { expected: vec![1, 0, 3, 6, 45, 252] });
    for n in 1..=5 {
        push(format!("c1-histogram-n{n}"), Some(1), Check::HistogramMatchesTable { n });
        push(format!("c1-sign-n{n}"), Some(1), Check::SignClaim { n });
    }
    push("c1-count-n4".into(), Some(1), Check::EnumerationCount { n: 4, expected: 88 });
    for n in 1..=4 {
        push(format!("c1-naive-n{n}"), Some(1), Check::NaiveAgreement { n });
    }

    push("c2-generating-series".into(), Some(2), Check::GeneratingSeries { order: 30 });
    push(
        "c2-claim-identity".into(),
        Some(2),
        Check::ClaimIdentity { n_max: 40, t: vec![[0, 1], [1, 1], [3, 1], [-1, 1], [7, 2]] },
    );

    for n in 1..=5 {
        for q in small_q() {
            push(
                format!("c3-bridge-n{n}-q{}", q_label(q)),
                Some(3),
                pair(Quantity::FourthMomentViaTriples { n, q }, Quantity::FourthMomentV { n, q }),
            );
        }
    }

    for n in 1..=50 {
        push(
            format!("c4-euclid-p2-n{n:02}"),
            Some(4),
            pair(Quantity::EuclidMoment { n, p: 2.0 }, Quantity::SecondMomentV { n, q: QIndex::TWO }),
        );
        push(
            format!("c4-euclid-p4-n{n:02}"),
            Some(4),
            pair(Quantity::EuclidMoment { n, p: 4.0 }, Quantity::FourthMomentV { n, q: QIndex::TWO }),
        );
        for q in wide_q() {
            push(
                format!("c4-isotropic-n{n:02}-q{}", q_label(q)),
                Some(4),
                pair(Quantity::SecondMomentV { n, q }, Quantity::IsotropicSecondMomentV { n, q }),
            );
        }
    }

    push(
        "c5-anchor-v2-cube2".into(),
        Some(5),
        pair(Quantity::SecondMomentV { n: 2, q: QIndex::Infinite }, Quantity::Rational { num: 1, den: 18 }),
    );
    push(
        "c5-anchor-v4-cube2".into(),
        Some(5),
        pair(Quantity::FourthMomentV { n: 2, q: QIndex::Infinite }, Quantity::Rational { num: 13, den: 1350 }),
    );
    push(
        "c5-anchor-u2-segment".into(),
        Some(5),
        pair(Quantity::IsotropicSecondMomentU { n: 1, q: QIndex::TWO }, Quantity::Rational { num: 1, den: 6 }),
    );

    for n in GRID_N {
        for q in grid_q() {
            push(
                format!("c7-sandwich-exact-n{n}-q{}", q_label(q)),
                Some(7),
                Check::Sandwich { n, q, p: 2.0, mc: None, z_max: DEFAULT_Z },
            );
        }
    }
    for n in 1..=50 {
        for q in [QIndex::ONE, QIndex::Finite(1.5), QIndex::Finite(4.0), QIndex::Infinite] {
            push(format!("c7-minimizer-n{n:02}-q{}", q_label(q)), Some(7), Check::Minimizer { n, q });
        }
        for q in [QIndex::ONE, QIndex::Finite(1.5), QIndex::TWO] {
            for p in [2, 4] {
                push(
                    format!("c7-supnorm-p{p}-n{n:02}-q{}", q_label(q)),
                    Some(7),
                    Check::SupNormChain { n, q, p },
                );
            }
        }
    }

    for q in small_q() {
        for order in [2, 4] {
            push(
                format!("c8-trend-m{order}-q{}", q_label(q)),
                Some(8),
                Check::AsymptoticTrend { q, order, n_small: 50, n_large: 400, tol: 0.05 },
            );
        }
    }

    for (t, n) in [(0.0, 1), (-2.0, 1), (-1.2, 1), (-1.2, 7), (3.0, 12), (-2.0, 60), (1.0, 60), (-10.0, 200), (10.0, 200)] {
        push(
            format!("x-phi-forms-t{t}-n{n}"),
            None,
            Check::PhiForms { t, n, rel_tol: 1e-9 },
        );
    }
    push("x-log-d-track".into(), None, Check::LogDTrack { n: 300, rel_tol: 1e-12 });
    for q in wide_q() {
        if !q.is_infinite() {
            push(
                format!("x-a-constant-forms-q{}", q_label(q)),
                None,
                pair(Quantity::AConstant { q }, Quantity::AConstantUnshifted { q }),
            );
        }
    }
    for (q, num, den) in [(QIndex::ONE, 6, 1), (QIndex::TWO, 3, 1), (QIndex::Infinite, 9, 5)] {
        push(
            format!("x-a-constant-q{}", q_label(q)),
            None,
            pair(Quantity::AConstant { q }, Quantity::Rational { num, den }),
        );
    }
    for n in [2usize, 3, 10, 50] {
        for q in wide_q() {
            push(
                format!("x-one-symmetric-n{n:02}-q{}", q_label(q)),
                None,
                pair(Quantity::FourthMomentOneSymmetric { n, q }, Quantity::FourthMomentV { n, q }),
            );
        }
    }
    for q in wide_q() {
        push(
            format!("x-simplex-segment-q{}", q_label(q)),
            None,
            pair(Quantity::SimplexSecondMoment { n: 1 }, Quantity::IsotropicSecondMomentU { n: 1, q }),
        );
    }
    for (n, k, p) in [(3usize, 1usize, 2.0), (4, 2, 1.5), (6, 6, 3.0), (20, 7, 4.0)] {
        push(
            format!("x-miles-gram-n{n}-k{k}"),
            None,
            pair(Quantity::MilesFromGaussianGram { n, k, p }, Quantity::MilesMoment { n, k, s: k, p }),
        );
    }
    for n in [1usize, 4, 12] {
        push(
            format!("x-miles-euclid-n{n:02}"),
            None,
            pair(
                Quantity::Shifted {
                    base: Box::new(Quantity::MilesMoment { n, k: n, s: 0, p: 3.0 }),
                    log_shift: -3.0 * BodySpec::new(n, QIndex::TWO).expect("n >= 1").log_volume().ln(),
                },
                Quantity::EuclidMoment { n, p: 3.0 },
            ),
        );
    }
    cases
}

/// The Monte Carlo cases of the default suite with `samples` per cell.
pub fn monte_carlo_suite(samples: u64) -> Vec<ValidationCase> {
    let mut cases = Vec::new();
    let mut push = |id: String, c: Option<u8>, check: Check| cases.push(ValidationCase::new(id, c, check));
    let v_mc = |n, q| McSource { samples, seed: cell_seed(1, n, q) };
    let u_mc = |n, q| McSource { samples, seed: cell_seed(2, n, q) };
    let mc_case = |body: BodySpec, statistic, p, src: McSource, exact| Check::MonteCarlo {
        config: SampleConfig::new(body, statistic, p, src.samples, src.seed),
        exact,
        z_max: DEFAULT_Z,
    };

    for n in GRID_N {
        for q in grid_q() {
            let body = BodySpec::new(n, q).expect("n >= 1");
            let tag = format!("n{n}-q{}", q_label(q));
            push(
                format!("c5-mc-v-p2-{tag}"),
                Some(5),
                mc_case(body, Statistic::VCrosspolytope, 2.0, v_mc(n, q), Quantity::SecondMomentV { n, q }),
            );
            push(
                format!("c5-mc-v-p4-{tag}"),
                Some(5),
                mc_case(body, Statistic::VCrosspolytope, 4.0, v_mc(n, q), Quantity::FourthMomentV { n, q }),
            );
            push(
                format!("c5-mc-u-p2-{tag}"),
                Some(5),
                mc_case(body, Statistic::USimplex, 2.0, u_mc(n, q), Quantity::IsotropicSecondMomentU { n, q }),
            );
        }
    }
    let segment = BodySpec::new(1, QIndex::TWO).expect("n >= 1");
    push(
        "c5-mc-anchor-u2-segment".into(),
        Some(5),
        mc_case(segment, Statistic::USimplex, 2.0, u_mc(1, QIndex::TWO), Quantity::Rational { num: 1, den: 6 }),
    );

    for (n, k, s, p) in [(3usize, 2usize, 1usize, 2.0), (4, 4, 0, 2.0), (5, 3, 3, 1.0)] {
        let body = BodySpec::new(n, QIndex::TWO).expect("n >= 1");
        push(
            format!("c6-miles-n{n}-k{k}-s{s}"),
            Some(6),
            mc_case(
                body,
                Statistic::VMiles { k, s },
                p,
                McSource { samples, seed: cell_seed(3, n, QIndex::Finite(k as f64)) },
                Quantity::MilesMoment { n, k, s, p },
            ),
        );
    }
    for p in [1.0, 3.0] {
        push(
            format!("c6-miles-deterministic-p{p}"),
            Some(6),
            Check::ZeroVariance {
                config: SampleConfig::new(segment, Statistic::VMiles { k: 1, s: 1 }, p, 10_000, 6),
                exact: Quantity::MilesMoment { n: 1, k: 1, s: 1, p },
                rel_tol: 1e-12,
            },
        );
    }

    for n in SMALL_N {
        for q in small_q() {
            let tag = format!("n{n}-q{}", q_label(q));
            for p in [1.0, 2.0] {
                let src = PairedSource { v: v_mc(n, q), u: u_mc(n, q) };
                push(
                    format!("c7-sandwich-mc-p{p}-{tag}"),
                    Some(7),
                    Check::Sandwich { n, q, p, mc: Some(src), z_max: DEFAULT_Z },
                );
            }
            push(
                format!("c7-khintchine-{tag}"),
                Some(7),
                Check::Khintchine { n, q, mc: v_mc(n, q), z_max: DEFAULT_Z },
            );
        }
    }
    cases
}

/// Every case of the acceptance grid with `samples` Monte Carlo draws per cell.
pub fn default_suite_with_samples(samples: u64) -> Vec<ValidationCase> {
    let mut cases = exact_suite();
    cases.extend(monte_carlo_suite(samples));
    cases
}

/// The canonical suite: all closed-form, enumeration, Monte Carlo, inequality
/// and trend cases.
pub fn default_suite() -> Vec<ValidationCase> {
    default_suite_with_samples(DEFAULT_SAMPLES)
}
