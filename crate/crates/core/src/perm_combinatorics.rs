//! Permutation triples `T_n`, their counts `d_n` and `d_{n,k}`, and the
//! exact identities connecting them to `φ`.
//!
//! A triple `(τ₁, τ₂, τ₃)` belongs to `T_n` when, at every index `j`, one of
//! `τ₁(j), τ₂(j), τ₃(j)` equals `j` and the other two coincide. These are
//! exactly the index patterns that survive when the fourth power of a
//! determinant is integrated over a body symmetric in every coordinate.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exact_moments::BodySpec;
use crate::special_math::{log_factorial, log_monomial_moment, ExponentVector, LogPositive};

/// Largest `n` accepted by [`enumerate_t`].
pub const MAX_ENUMERATION_N: usize = 6;
/// Largest `n` accepted by the blind `(n!)³` scan.
pub const MAX_NAIVE_N: usize = 4;

/// A bijection of `{0, .., n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// From 0-based images; `None` unless they form a bijection.
    pub fn from_images(images: Vec<usize>) -> Option<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &v in &images {
            if v >= n || seen[v] {
                return None;
            }
            seen[v] = true;
        }
        Some(Permutation(images))
    }

    /// From 1-based images, the usual notation for `τ ∈ S_n`.
    pub fn from_one_based(images: &[usize]) -> Option<Self> {
        if images.contains(&0) {
            return None;
        }
        Self::from_images(images.iter().map(|&v| v - 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|&v| v + 1).collect()
    }

    pub fn apply(&self, j: usize) -> usize {
        self.0[j]
    }

    /// `(self ∘ other)(j) = self(other(j))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation(other.0.iter().map(|&j| self.0[j]).collect())
    }

    /// `+1` or `-1` from the cycle decomposition.
    pub fn sign(&self) -> i8 {
        let n = self.0.len();
        let mut seen = vec![false; n];
        let mut transpositions = 0usize;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut j = start;
            while !seen[j] {
                seen[j] = true;
                j = self.0[j];
                len += 1;
            }
            transpositions += len - 1;
        }
        if transpositions.is_multiple_of(2) {
            1
        } else {
            -1
        }
    }
}

/// All of `S_n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Permutation> {
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![Permutation(current.clone())];
    loop {
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let pivot = i - 1;
        let swap = (pivot + 1..n).rev().find(|&k| current[k] > current[pivot]).unwrap();
        current.swap(pivot, swap);
        current[i..].reverse();
        out.push(Permutation(current.clone()));
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermTriple {
    pub t1: Permutation,
    pub t2: Permutation,
    pub t3: Permutation,
}

impl PermTriple {
    pub fn new(t1: Permutation, t2: Permutation, t3: Permutation) -> Result<Self> {
        if t1.len() != t2.len() || t1.len() != t3.len() {
            return Err(Error::Config(format!(
                "triple lengths differ: {}, {}, {}",
                t1.len(),
                t2.len(),
                t3.len()
            )));
        }
        Ok(PermTriple { t1, t2, t3 })
    }

    pub fn n(&self) -> usize {
        self.t1.len()
    }

    /// Number of `j` with `τ₁(j) = τ₂(j) = τ₃(j) = j`.
    pub fn fixed_count(&self) -> usize {
        (0..self.n())
            .filter(|&j| self.t1.apply(j) == j && self.t2.apply(j) == j && self.t3.apply(j) == j)
            .count()
    }

    /// `sgn(τ₁ τ₂ τ₃)` computed from the composed permutation.
    pub fn product_sign(&self) -> i8 {
        self.t1.compose(&self.t2).compose(&self.t3).sign()
    }
}

/// Membership in `T_n`.
pub fn is_member_t(t: &PermTriple) -> bool {
    (0..t.n()).all(|j| {
        let (a, b, c) = (t.t1.apply(j), t.t2.apply(j), t.t3.apply(j));
        (a == j && b == c) || (b == j && a == c) || (c == j && a == b)
    })
}

/// A member of `T_n` with its count of fully fixed coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleMember {
    pub triple: PermTriple,
    pub fixed: usize,
}

fn check_enumeration_size(n: usize, max: usize) -> Result<()> {
    if n > max {
        let fact: u128 = (1..=n as u128).product();
        return Err(Error::EnumerationTooLarge {
            n,
            cost: fact.saturating_pow(3),
            max,
        });
    }
    Ok(())
}

/// Calls `visit` once for every member of `T_n`.
///
/// For each `τ₁`, the admissible `(τ₂(j), τ₃(j))` at an index `j` are
/// `(j, τ₁(j))` or `(τ₁(j), j)` when `τ₁(j) ≠ j`, and `(w, w)` otherwise;
/// a backtracking search keeps `τ₂` and `τ₃` injective.
pub fn visit_t<F: FnMut(&PermTriple, usize)>(n: usize, mut visit: F) -> Result<()> {
    check_enumeration_size(n, MAX_ENUMERATION_N)?;
    for t1 in all_permutations(n) {
        let mut t2 = vec![0; n];
        let mut t3 = vec![0; n];
        let mut used2 = vec![false; n];
        let mut used3 = vec![false; n];
        complete(&t1, 0, &mut t2, &mut t3, &mut used2, &mut used3, &mut visit);
    }
    Ok(())
}

fn complete<F: FnMut(&PermTriple, usize)>(
    t1: &Permutation,
    j: usize,
    t2: &mut Vec<usize>,
    t3: &mut Vec<usize>,
    used2: &mut Vec<bool>,
    used3: &mut Vec<bool>,
    visit: &mut F,
) {
    let n = t1.len();
    if j == n {
        let triple = PermTriple {
            t1: t1.clone(),
            t2: Permutation(t2.clone()),
            t3: Permutation(t3.clone()),
        };
        let fixed = triple.fixed_count();
        visit(&triple, fixed);
        return;
    }
    let a = t1.apply(j);
    let mut try_pair = |b: usize, c: usize, t2: &mut Vec<usize>, t3: &mut Vec<usize>, used2: &mut Vec<bool>, used3: &mut Vec<bool>| {
        if used2[b] || used3[c] {
            return;
        }
        used2[b] = true;
        used3[c] = true;
        t2[j] = b;
        t3[j] = c;
        complete(t1, j + 1, t2, t3, used2, used3, visit);
        used2[b] = false;
        used3[c] = false;
    };
    if a == j {
        for w in 0..n {
            try_pair(w, w, t2, t3, used2, used3);
        }
    } else {
        let (lo, hi) = if j < a { (j, a) } else { (a, j) };
        try_pair(lo, if lo == j { a } else { j }, t2, t3, used2, used3);
        try_pair(hi, if hi == j { a } else { j }, t2, t3, used2, used3);
    }
}

/// Every member of `T_n` (`n ≤ 6`) with its fixed count.
pub fn enumerate_t(n: usize) -> Result<Vec<TripleMember>> {
    let mut out = Vec::new();
    visit_t(n, |triple, fixed| {
        out.push(TripleMember {
            triple: triple.clone(),
            fixed,
        })
    })?;
    Ok(out)
}

/// Blind scan of `S_n³` with [`is_member_t`]; an independent slow oracle.
pub fn enumerate_t_naive(n: usize) -> Result<Vec<TripleMember>> {
    check_enumeration_size(n, MAX_NAIVE_N)?;
    let perms = all_permutations(n);
    let mut out = Vec::new();
    for t1 in &perms {
        for t2 in &perms {
            for t3 in &perms {
                let triple = PermTriple {
                    t1: t1.clone(),
                    t2: t2.clone(),
                    t3: t3.clone(),
                };
                if is_member_t(&triple) {
                    let fixed = triple.fixed_count();
                    out.push(TripleMember { triple, fixed });
                }
            }
        }
    }
    Ok(out)
}

/// Counts of `T_n` members by fixed count `k = 0..=n`.
pub fn fixed_count_histogram(n: usize) -> Result<Vec<u64>> {
    let mut hist = vec![0u64; n + 1];
    visit_t(n, |_, k| hist[k] += 1)?;
    Ok(hist)
}

/// Whether every member of `T_n` has `sgn(τ₁τ₂τ₃) = +1`.
pub fn verify_sign(n: usize) -> Result<bool> {
    let mut ok = true;
    visit_t(n, |triple, _| ok &= triple.product_sign() == 1)?;
    Ok(ok)
}

/// Exact counts `d_0..d_n` and the triangle `d_{m,k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DTable {
    pub n: usize,
    #[serde(serialize_with = "ser_ints", deserialize_with = "de_ints")]
    pub d: Vec<BigInt>,
    #[serde(serialize_with = "ser_rows", deserialize_with = "de_rows")]
    pub dnk: Vec<Vec<BigInt>>,
}

impl DTable {
    pub fn row(&self, m: usize) -> &[BigInt] {
        &self.dnk[m]
    }
}

fn ser_ints<S: Serializer>(v: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

fn ser_rows<S: Serializer>(v: &[Vec<BigInt>], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|row| row.iter().map(|x| x.to_string()).collect::<Vec<_>>()))
}

fn parse_ints<E: serde::de::Error>(v: Vec<String>) -> std::result::Result<Vec<BigInt>, E> {
    v.iter().map(|x| x.parse::<BigInt>().map_err(E::custom)).collect()
}

fn de_ints<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<BigInt>, D::Error> {
    parse_ints(Vec::<String>::deserialize(d)?)
}

fn de_rows<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<BigInt>>, D::Error> {
    Vec::<Vec<String>>::deserialize(d)?.into_iter().map(parse_ints).collect()
}

fn binomial_row(m: usize) -> Vec<BigInt> {
    let mut row = vec![BigInt::one()];
    for k in 1..=m {
        let next = &row[k - 1] * BigInt::from(m - k + 1) / BigInt::from(k);
        row.push(next);
    }
    row
}

/// `d_{m+1} = m (d_m + 3 d_{m−1})`, `d_0 = 1`, `d_1 = 0`, and `d_{m,k} = C(m,k) d_{m−k}`.
pub fn d_table(n: usize) -> DTable {
    let mut d = vec![BigInt::one()];
    if n >= 1 {
        d.push(BigInt::zero());
    }
    for m in 1..n {
        let next = BigInt::from(m) * (&d[m] + BigInt::from(3) * &d[m - 1]);
        d.push(next);
    }
    let dnk = (0..=n)
        .map(|m| {
            binomial_row(m)
                .into_iter()
                .enumerate()
                .map(|(k, c)| c * &d[m - k])
                .collect()
        })
        .collect();
    DTable { n, d, dnk }
}

/// `ln d_m` for `m = 0..=n` by the same recurrence in log space
/// (`d_1 = 0` is `-inf`).
pub fn log_d_sequence(n: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    if n >= 1 {
        out.push(f64::NEG_INFINITY);
    }
    for m in 1..n {
        let a = out[m];
        let b = 3f64.ln() + out[m - 1];
        let hi = a.max(b);
        let sum = if hi == f64::NEG_INFINITY {
            hi
        } else {
            hi + ((a - hi).exp() + (b - hi).exp()).ln()
        };
        out.push((m as f64).ln() + sum);
    }
    out
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `Σ_k d_{n,k} t^k` exactly.
pub fn poly_sum(n: usize, t: &BigRational) -> BigRational {
    let table = d_table(n);
    let mut acc = BigRational::zero();
    let mut power = BigRational::one();
    for coeff in table.row(n) {
        acc += &power * BigRational::from_integer(coeff.clone());
        power *= t;
    }
    acc
}

/// `φ(s, n) = Σ_{k≤n} (n+1−k)(n+2−k) s^k / (k! (n+1)(n+2))` exactly.
pub fn phi_exact(s: &BigRational, n: usize) -> BigRational {
    let mut acc = BigRational::zero();
    let mut term = BigRational::one(); // s^k / k!
    for k in 0..=n {
        if k > 0 {
            term = term * s / BigRational::from_integer(BigInt::from(k));
        }
        let weight = BigInt::from((n + 1 - k) * (n + 2 - k));
        acc += &term * BigRational::from_integer(weight);
    }
    acc / BigRational::from_integer(BigInt::from((n + 1) * (n + 2)))
}

/// `Σ_k d_{n,k} t^k = ((n+2)!/2) φ(t − 3, n)` in exact arithmetic.
pub fn claim_identity_holds(n: usize, t: &BigRational) -> bool {
    let three = BigRational::from_integer(BigInt::from(3));
    let rhs = BigRational::new(factorial(n + 2), BigInt::from(2)) * phi_exact(&(t - three), n);
    poly_sum(n, t) == rhs
}

/// Whether the first `order` Taylor coefficients of `e^{−3u}/(1−u)³` equal `d_k/k!`.
pub fn generating_series_check(order: usize) -> bool {
    if order == 0 {
        return true;
    }
    let table = d_table(order - 1);
    // e^{-3u} coefficients (-3)^i / i!
    let mut exp_coeffs = Vec::with_capacity(order);
    let mut c = BigRational::one();
    for i in 0..order {
        if i > 0 {
            c = c * BigRational::from_integer(BigInt::from(-3)) / BigRational::from_integer(BigInt::from(i));
        }
        exp_coeffs.push(c.clone());
    }
    (0..order).all(|k| {
        let series: BigRational = (0..=k)
            .map(|i| {
                let m = k - i;
                let pole = BigRational::new(BigInt::from((m + 1) * (m + 2)), BigInt::from(2));
                &exp_coeffs[i] * pole
            })
            .fold(BigRational::zero(), |a, b| a + b);
        series == BigRational::new(table.d[k].clone(), factorial(k))
    })
}

/// `ln E V⁴` for `B_q^n` from the sum over `T_n` of `∏_j ∫ x_j x_{τ₁(j)} x_{τ₂(j)} x_{τ₃(j)}`,
/// each factor a monomial integral over the body (`n ≤ 6`).
pub fn fourth_moment_via_triples(body: BodySpec) -> Result<LogPositive> {
    let n = body.n;
    let mut terms: Vec<f64> = Vec::new();
    let mut failure = None;
    visit_t(n, |triple, _| {
        let mut ln = 0.0;
        for j in 0..n {
            let mut a = vec![0u32; n];
            for idx in [j, triple.t1.apply(j), triple.t2.apply(j), triple.t3.apply(j)] {
                a[idx] += 1;
            }
            match log_monomial_moment(body.q, &ExponentVector::new(a)) {
                Ok(m) => ln += m.ln(),
                Err(e) => failure = Some(e),
            }
        }
        terms.push(ln);
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let log_sum = log_sum_exp(&terms);
    let nf = n as f64;
    Ok(LogPositive::from_ln(
        nf * 16f64.ln() - 3.0 * log_factorial(n) - (nf + 4.0) * body.log_volume().ln() + log_sum,
    ))
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + values.iter().map(|v| (v - hi).exp()).sum::<f64>().ln()
}

/// Decimal rendering of a rational for reports.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    let num = r.numer().to_f64().unwrap_or(f64::NAN);
    let den = r.denom().to_f64().unwrap_or(f64::NAN);
    if num.is_finite() && den.is_finite() {
        num / den
    } else {
        // scale down both parts for very large values
        let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
        let n = (r.numer().abs() >> shift).to_f64().unwrap_or(f64::INFINITY);
        let d = (r.denom() >> shift).to_f64().unwrap_or(f64::INFINITY);
        let v = n / d;
        if r.is_negative() {
            -v
        } else {
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_moments::{fourth_moment_V, phi};
    use crate::special_math::QIndex;

    fn int(v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }

    fn perm(images: &[usize]) -> Permutation {
        Permutation::from_one_based(images).unwrap()
    }

    #[test]
    fn permutation_basics() {
        assert_eq!(all_permutations(0).len(), 1);
        assert_eq!(all_permutations(4).len(), 24);
        assert_eq!(perm(&[2, 1]).sign(), -1);
        assert_eq!(perm(&[2, 3, 1]).sign(), 1);
        assert!(Permutation::from_one_based(&[1, 1]).is_none());
        assert!(Permutation::from_one_based(&[0, 1]).is_none());
        let p = perm(&[2, 3, 1]);
        assert_eq!(p.compose(&p).compose(&p), Permutation::identity(3));
        let signs: i32 = all_permutations(5).iter().map(|p| p.sign() as i32).sum();
        assert_eq!(signs, 0);
    }

    #[test]
    fn membership_examples() {
        let id = Permutation::identity(2);
        let swap = perm(&[2, 1]);
        let t = |a: &Permutation, b: &Permutation, c: &Permutation| {
            PermTriple::new(a.clone(), b.clone(), c.clone()).unwrap()
        };
        assert!(is_member_t(&t(&id, &id, &id)));
        assert!(is_member_t(&t(&id, &swap, &swap)));
        assert!(!is_member_t(&t(&swap, &id, &id)));
        assert!(PermTriple::new(id.clone(), id.clone(), Permutation::identity(3)).is_err());
    }

    #[test]
    fn enumeration_small_cases() {
        let one = enumerate_t(1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].fixed, 1);
        assert_eq!(fixed_count_histogram(2).unwrap(), vec![3, 0, 1]);
        assert_eq!(enumerate_t(4).unwrap().len(), 88);
        // (6!/2) φ(−2, 4) = 360 · 11/45
        assert!((360.0 * phi(-2.0, 4) - 88.0).abs() < 1e-10);
    }

    #[test]
    fn enumeration_matches_naive_scan() {
        for n in 0..=MAX_NAIVE_N {
            let mut fast: Vec<_> = enumerate_t(n).unwrap().into_iter().map(|m| (m.triple.t1, m.triple.t2, m.triple.t3, m.fixed)).collect();
            let mut slow: Vec<_> = enumerate_t_naive(n).unwrap().into_iter().map(|m| (m.triple.t1, m.triple.t2, m.triple.t3, m.fixed)).collect();
            fast.sort();
            slow.sort();
            assert_eq!(fast, slow, "n = {n}");
            let mut dedup = fast.clone();
            dedup.dedup();
            assert_eq!(dedup.len(), fast.len());
        }
    }

    #[test]
    fn enumeration_size_limits() {
        assert!(matches!(enumerate_t(7), Err(Error::EnumerationTooLarge { n: 7, .. })));
        assert!(enumerate_t_naive(5).is_err());
    }

    #[test]
    fn histogram_matches_table_rows() {
        let table = d_table(5);
        for n in 0..=5 {
            let hist = fixed_count_histogram(n).unwrap();
            let row: Vec<u64> = table.row(n).iter().map(|x| x.to_u64().unwrap()).collect();
            assert_eq!(hist, row, "n = {n}");
        }
    }

    #[test]
    fn sign_claim() {
        for n in 1..=5 {
            assert!(verify_sign(n).unwrap(), "n = {n}");
        }
    }

    #[test]
    #[ignore = "long-running: ~2.5e5 triples"]
    fn sign_claim_n6() {
        assert!(verify_sign(6).unwrap());
    }

    #[test]
    fn d_table_values() {
        let t = d_table(5);
        let d: Vec<i64> = t.d.iter().map(|x| x.to_i64().unwrap()).collect();
        assert_eq!(d, vec![1, 0, 3, 6, 45, 252]);
        let row4: Vec<i64> = t.row(4).iter().map(|x| x.to_i64().unwrap()).collect();
        assert_eq!(row4, vec![45, 24, 18, 0, 1]);
        let big = d_table(40);
        for m in 1..=40 {
            assert!(big.dnk[m][m].is_one());
            assert!(big.dnk[m][m - 1].is_zero());
        }
        for m in 1..40 {
            assert_eq!(big.d[m + 1], BigInt::from(m) * (&big.d[m] + BigInt::from(3) * &big.d[m - 1]));
        }
    }

    #[test]
    fn weighted_row_sum_at_three() {
        for n in 1..=20 {
            assert_eq!(poly_sum(n, &int(3)), BigRational::new(factorial(n + 2), BigInt::from(2)));
        }
    }

    #[test]
    fn log_track_matches_exact() {
        let exact = d_table(150);
        let logs = log_d_sequence(150);
        assert_eq!(logs[1], f64::NEG_INFINITY);
        for m in [0usize, 2, 3, 10, 60, 150] {
            let want = rational_to_f64(&BigRational::from_integer(exact.d[m].clone()));
            let got = logs[m];
            if want.is_finite() {
                assert!((got - want.ln()).abs() < 1e-12 * want.ln().abs().max(1.0), "m={m}");
            }
        }
        let long = log_d_sequence(2000);
        assert!(long[2000].is_finite());
    }

    #[test]
    fn poly_sum_examples() {
        for t in [int(0), int(2), BigRational::new(BigInt::from(7), BigInt::from(2))] {
            assert_eq!(poly_sum(1, &t), t);
        }
        assert_eq!(poly_sum(4, &int(1)), int(88));
    }

    #[test]
    fn claim_identity() {
        let ts = [int(0), int(1), int(3), int(-1), BigRational::new(BigInt::from(7), BigInt::from(2))];
        for n in 0..=40 {
            for t in &ts {
                assert!(claim_identity_holds(n, t), "n={n} t={t}");
            }
        }
    }

    #[test]
    fn phi_float_matches_exact() {
        for n in [1usize, 2, 5, 17] {
            for (num, den) in [(-6i64, 5i64), (-2, 1), (3, 1), (1, 3)] {
                let exact = rational_to_f64(&phi_exact(&BigRational::new(num.into(), den.into()), n));
                let float = phi(num as f64 / den as f64, n);
                assert!((exact - float).abs() <= 1e-14 * exact.abs(), "n={n} t={num}/{den}");
            }
        }
    }

    #[test]
    fn generating_series() {
        assert!(generating_series_check(3));
        assert!(generating_series_check(6));
        assert!(generating_series_check(30));
    }

    #[test]
    fn bridge_matches_closed_form() {
        for q in [QIndex::ONE, QIndex::TWO, QIndex::Infinite] {
            for n in 1..=5 {
                let body = BodySpec::new(n, q).unwrap();
                let via = fourth_moment_via_triples(body).unwrap();
                let closed = fourth_moment_V(body);
                assert!(via.log_rel_diff(closed) <= 1e-10, "n={n} q={q}: {via} vs {closed}");
            }
        }
    }

    /// The signed sum over all of `S_n³` before any symmetry reduction.
    #[test]
    fn signed_full_sum_matches_closed_form() {
        for q in [QIndex::ONE, QIndex::Finite(3.0), QIndex::Infinite] {
            for n in 1..=3usize {
                let perms = all_permutations(n);
                let mut total = 0.0;
                for t1 in &perms {
                    for t2 in &perms {
                        for t3 in &perms {
                            let mut prod = 1.0;
                            for j in 0..n {
                                let mut a = vec![0u32; n];
                                for idx in [j, t1.apply(j), t2.apply(j), t3.apply(j)] {
                                    a[idx] += 1;
                                }
                                if a.iter().any(|e| e % 2 == 1) {
                                    prod = 0.0;
                                    break;
                                }
                                prod *= log_monomial_moment(q, &ExponentVector::new(a)).unwrap().value();
                            }
                            let sign = t1.compose(t2).compose(t3).sign() as f64;
                            total += sign * prod;
                        }
                    }
                }
                let body = BodySpec::new(n, q).unwrap();
                let nf = n as f64;
                let ln = nf * 16f64.ln() - 3.0 * log_factorial(n) - (nf + 4.0) * body.log_volume().ln() + total.ln();
                let closed = fourth_moment_V(body).ln();
                assert!((ln - closed).abs() < 1e-12, "n={n} q={q}");
            }
        }
    }

    #[test]
    fn dtable_json_round_trip() {
        let t = d_table(12);
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"252\""));
        let back: DTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
