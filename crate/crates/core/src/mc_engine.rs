//! Reproducible Monte Carlo estimation of volume moments.
//!
//! Sample `i` draws all of its randomness from a ChaCha8 stream keyed by
//! `(master_seed, i)`, so an estimate is a pure fold over sample indices.
//! Batches are contiguous index ranges reduced in batch order, which makes
//! results bit-identical for any number of worker threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_moments::BodySpec;
use crate::special_math::{log_factorial, QIndex};

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

/// Default number of samples per estimate.
pub const DEFAULT_SAMPLES: u64 = 1_000_000;
/// Default number of batches for the batch-means standard error.
pub const DEFAULT_BATCHES: u32 = 100;

/// Counter-based source of per-sample random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        RngStream { master_seed }
    }

    /// The generator for sample `index`; a pure function of `(master_seed, index)`.
    pub fn substream(&self, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(b"polymom\0");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }
}

/// Draws points uniformly from `B_q^n`.
///
/// Finite `q`: coordinates `±W_i^{1/q}` with `W_i ~ Gamma(1/q)` have density
/// `∝ exp(−|t|^q)`; dividing by `(Σ W_i + E)^{1/q}` with `E ~ Exp(1)` gives
/// a uniform point of the ball. `q = ∞` uses independent uniforms.
#[derive(Debug, Clone)]
pub struct LqBallSampler {
    n: usize,
    q: QIndex,
    gamma: Option<Gamma<f64>>,
}

impl LqBallSampler {
    pub fn new(n: usize, q: QIndex) -> Self {
        let gamma = match q {
            QIndex::Finite(qv) => Some(Gamma::new(1.0 / qv, 1.0).expect("shape 1/q is positive")),
            QIndex::Infinite => None,
        };
        LqBallSampler { n, q, gamma }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        match (self.q, &self.gamma) {
            (QIndex::Finite(qv), Some(gamma)) => {
                let inv_q = 1.0 / qv;
                let mut total = 0.0;
                if qv == 2.0 {
                    // |g| = W^{1/2} with W ~ Gamma(1/2) is |N(0, 1/2)|
                    for x in out.iter_mut() {
                        let z: f64 = StandardNormal.sample(rng);
                        *x = z * FRAC_1_SQRT_2;
                        total += *x * *x;
                    }
                } else if qv == 1.0 {
                    for x in out.iter_mut() {
                        let w: f64 = Exp1.sample(rng);
                        total += w;
                        *x = if rng.random::<bool>() { w } else { -w };
                    }
                } else {
                    for x in out.iter_mut() {
                        let w: f64 = gamma.sample(rng);
                        total += w;
                        let mag = w.powf(inv_q);
                        *x = if rng.random::<bool>() { mag } else { -mag };
                    }
                }
                let e: f64 = Exp1.sample(rng);
                let scale = if qv == 2.0 {
                    1.0 / (total + e).sqrt()
                } else {
                    (total + e).powf(-inv_q)
                };
                for x in out.iter_mut() {
                    *x *= scale;
                }
            }
            _ => {
                for x in out.iter_mut() {
                    *x = 2.0 * rng.random::<f64>() - 1.0;
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.fill(rng, &mut out);
        out
    }
}

/// A uniform point of `B_q^n` drawn from the substream of `index`.
pub fn sample_lq_ball(n: usize, q: QIndex, stream: &RngStream, index: u64) -> Vec<f64> {
    LqBallSampler::new(n, q).sample(&mut stream.substream(index))
}

/// Fills `out` with a uniform point of the unit sphere `S^{n−1}`.
pub fn fill_sphere<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for x in out.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *x = g;
            norm2 += g * g;
        }
        if norm2 > 0.0 {
            let norm = norm2.sqrt();
            for x in out.iter_mut() {
                *x /= norm;
            }
            return;
        }
    }
}

/// A uniform point of `S^{n−1}` drawn from the substream of `index`.
pub fn sample_sphere(n: usize, stream: &RngStream, index: u64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    fill_sphere(&mut stream.substream(index), &mut out);
    out
}

/// `ln|det|` of a row-major `n × n` matrix by LU with partial pivoting.
/// `None` when an exactly zero pivot appears. The matrix is overwritten.
fn log_abs_det_in_place(a: &mut [f64], n: usize) -> Option<f64> {
    let mut acc = 0.0;
    for col in 0..n {
        let mut pivot_row = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                pivot_row = row;
            }
        }
        if best == 0.0 {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
        }
        let pivot = a[col * n + col];
        acc += pivot.abs().ln();
        for row in col + 1..n {
            let factor = a[row * n + col] / pivot;
            if factor != 0.0 {
                for k in col + 1..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
            }
        }
    }
    Some(acc)
}

/// `½ ln det(AᵗA)` for a column-major `n × k` matrix by Householder QR.
/// `None` when a column is numerically dependent on the previous ones.
fn half_log_gram_in_place(a: &mut [f64], n: usize, k: usize) -> Option<f64> {
    let col_norms: Vec<f64> = (0..k)
        .map(|c| a[c * n..(c + 1) * n].iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut acc = 0.0;
    for c in 0..k {
        let col = &a[c * n..(c + 1) * n];
        let sigma: f64 = col[c..].iter().map(|x| x * x).sum::<f64>().sqrt();
        let r = if col[c] > 0.0 { -sigma } else { sigma };
        if sigma <= 8.0 * f64::EPSILON * col_norms[c] * (n as f64) || sigma == 0.0 {
            return None;
        }
        acc += sigma.ln();
        // v = x − r e_c, reflect the remaining columns
        let mut v: Vec<f64> = col[c..].to_vec();
        v[0] -= r;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for later in c + 1..k {
            let other = &mut a[later * n + c..(later + 1) * n];
            let dot: f64 = other.iter().zip(&v).map(|(x, y)| x * y).sum();
            let f = 2.0 * dot / vnorm2;
            for (x, y) in other.iter_mut().zip(&v) {
                *x -= f * y;
            }
        }
    }
    Some(acc)
}

fn check_points(points: &[Vec<f64>], count: usize, dim: usize) -> Result<()> {
    if points.len() != count || points.iter().any(|p| p.len() != dim) {
        return Err(Error::Config(format!(
            "expected {count} points in R^{dim}, got {} points",
            points.len()
        )));
    }
    Ok(())
}

/// `ln |conv{±x_1..±x_n}| = n ln 2 − ln n! + ln|det|`; `None` for zero volume.
pub fn log_volume_crosspolytope(points: &[Vec<f64>]) -> Result<Option<f64>> {
    let n = points.len();
    check_points(points, n, n)?;
    if n == 0 {
        return Err(Error::Dimension { n, min: 1 });
    }
    let mut m: Vec<f64> = points.iter().flatten().copied().collect();
    Ok(log_abs_det_in_place(&mut m, n).map(|ld| n as f64 * LN_2 - log_factorial(n) + ld))
}

/// `ln vol_k(conv{±x_1..±x_k}) = k ln 2 − ln k! + ½ ln det(AᵗA)`; `None` for zero volume.
pub fn log_volume_symhull_k(points: &[Vec<f64>]) -> Result<Option<f64>> {
    let k = points.len();
    let n = points.first().map_or(0, Vec::len);
    check_points(points, k, n)?;
    if k == 0 || k > n {
        return Err(Error::Config(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let mut m: Vec<f64> = points.iter().flatten().copied().collect();
    Ok(half_log_gram_in_place(&mut m, n, k).map(|lg| k as f64 * LN_2 - log_factorial(k) + lg))
}

/// `ln |conv{x_0..x_n}| = −ln n! + ln|det(x_1 − x_0, .., x_n − x_0)|`; `None` for zero volume.
pub fn log_volume_simplex(points: &[Vec<f64>]) -> Result<Option<f64>> {
    let n = points.len().saturating_sub(1);
    check_points(points, n + 1, n)?;
    if n == 0 {
        return Err(Error::Dimension { n, min: 1 });
    }
    let origin = &points[0];
    let mut m: Vec<f64> = points[1..]
        .iter()
        .flat_map(|p| p.iter().zip(origin).map(|(a, b)| a - b))
        .collect();
    Ok(log_abs_det_in_place(&mut m, n).map(|ld| ld - log_factorial(n)))
}

/// Which random volume is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    /// `U_K`: normalized volume of the simplex on `n+1` uniform points.
    USimplex,
    /// `V_K`: normalized volume of the crosspolytope on `n` uniform points.
    VCrosspolytope,
    /// Raw `k`-volume of the symmetric hull of `s` sphere points and `k − s` ball points.
    VMiles { k: usize, s: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub body: BodySpec,
    pub statistic: Statistic,
    pub power: f64,
    pub samples: u64,
    pub master_seed: u64,
    pub batch_count: u32,
}

impl SampleConfig {
    pub fn new(body: BodySpec, statistic: Statistic, power: f64, samples: u64, master_seed: u64) -> Self {
        SampleConfig {
            body,
            statistic,
            power,
            samples,
            master_seed,
            batch_count: DEFAULT_BATCHES,
        }
    }

    pub fn with_batches(mut self, batch_count: u32) -> Self {
        self.batch_count = batch_count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.body.n;
        if n == 0 {
            return Err(Error::Dimension { n, min: 1 });
        }
        if !self.power.is_finite() || self.power < 0.0 {
            return Err(Error::Config(format!("power must be a finite p >= 0, got {}", self.power)));
        }
        if self.batch_count < 2 {
            return Err(Error::Config("batch_count must be at least 2".into()));
        }
        if self.samples < u64::from(self.batch_count) {
            return Err(Error::Config(format!(
                "samples ({}) must be at least batch_count ({})",
                self.samples, self.batch_count
            )));
        }
        if let Statistic::VMiles { k, s } = self.statistic {
            if k == 0 || k > n || s > k {
                return Err(Error::Config(format!(
                    "miles configuration needs 1 <= k <= n and 0 <= s <= k, got n = {n}, k = {k}, s = {s}"
                )));
            }
            if self.body.q != QIndex::TWO {
                return Err(Error::Config(format!(
                    "miles configuration samples the Euclidean ball; q must be 2, got {}",
                    self.body.q
                )));
            }
        }
        Ok(())
    }
}

/// Estimate of `ln E[stat^p]` with its batch-means standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub log_mean: f64,
    pub log_stderr: f64,
    pub samples: u64,
    /// Samples whose volume came out exactly degenerate; they contribute zero.
    pub zero_volume_samples: u64,
    pub config: SampleConfig,
}

impl MomentEstimate {
    /// `(log_mean − exact) / log_stderr`.
    pub fn z_score(&self, exact_log: f64) -> f64 {
        let diff = self.log_mean - exact_log;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.log_stderr
        }
    }
}

/// Scratch space and per-sample evaluation of `ln stat`.
struct Evaluator {
    statistic: Statistic,
    n: usize,
    ball: LqBallSampler,
    log_body: f64,
    stream: RngStream,
    points: Vec<f64>,
    matrix: Vec<f64>,
}

impl Evaluator {
    fn new(config: &SampleConfig) -> Self {
        let n = config.body.n;
        Evaluator {
            statistic: config.statistic,
            n,
            ball: LqBallSampler::new(n, config.body.q),
            log_body: config.body.log_volume().ln(),
            stream: RngStream::new(config.master_seed),
            points: vec![0.0; (n + 1) * n],
            matrix: vec![0.0; (n + 1) * n],
        }
    }

    /// `ln stat` for sample `index`, `None` for a degenerate volume.
    fn log_stat(&mut self, index: u64) -> Option<f64> {
        let n = self.n;
        let mut rng = self.stream.substream(index);
        match self.statistic {
            Statistic::VCrosspolytope => {
                for row in self.matrix[..n * n].chunks_exact_mut(n) {
                    self.ball.fill(&mut rng, row);
                }
                let ld = log_abs_det_in_place(&mut self.matrix[..n * n], n)?;
                Some(n as f64 * LN_2 - log_factorial(n) + ld - self.log_body)
            }
            Statistic::USimplex => {
                for row in self.points[..(n + 1) * n].chunks_exact_mut(n) {
                    self.ball.fill(&mut rng, row);
                }
                let (origin, rest) = self.points.split_at(n);
                for (dst, src) in self.matrix[..n * n].iter_mut().zip(rest) {
                    *dst = *src;
                }
                for row in self.matrix[..n * n].chunks_exact_mut(n) {
                    for (x, o) in row.iter_mut().zip(origin) {
                        *x -= o;
                    }
                }
                let ld = log_abs_det_in_place(&mut self.matrix[..n * n], n)?;
                Some(ld - log_factorial(n) - self.log_body)
            }
            Statistic::VMiles { k, s } => {
                for (c, col) in self.matrix[..k * n].chunks_exact_mut(n).enumerate() {
                    if c < s {
                        fill_sphere(&mut rng, col);
                    } else {
                        self.ball.fill(&mut rng, col);
                    }
                }
                let lg = half_log_gram_in_place(&mut self.matrix[..k * n], n, k)?;
                Some(k as f64 * LN_2 - log_factorial(k) + lg)
            }
        }
    }
}

/// Streaming `ln Σ exp(x_i)` with a running maximum.
#[derive(Debug, Clone, Copy)]
struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl LogSumExp {
    const EMPTY: LogSumExp = LogSumExp {
        max: f64::NEG_INFINITY,
        scaled: 0.0,
    };

    fn push(&mut self, x: f64) {
        if x <= self.max {
            self.scaled += (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    fn merge(&mut self, other: LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max <= self.max {
            self.scaled += other.scaled * (other.max - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        }
    }

    /// `ln(Σ / count)`.
    fn log_mean(&self, count: u64) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + (self.scaled / count as f64).ln()
        }
    }
}

#[derive(Debug, Clone)]
struct BatchResult {
    count: u64,
    zeros: u64,
    sums: Vec<LogSumExp>,
}

fn run_batch(config: &SampleConfig, powers: &[f64], start: u64, end: u64) -> BatchResult {
    let mut eval = Evaluator::new(config);
    let mut sums = vec![LogSumExp::EMPTY; powers.len()];
    let mut zeros = 0;
    for index in start..end {
        match eval.log_stat(index) {
            Some(s) => {
                for (acc, &p) in sums.iter_mut().zip(powers) {
                    acc.push(p * s);
                }
            }
            None => {
                zeros += 1;
                for (acc, &p) in sums.iter_mut().zip(powers) {
                    if p == 0.0 {
                        acc.push(0.0);
                    }
                }
            }
        }
    }
    BatchResult {
        count: end - start,
        zeros,
        sums,
    }
}

fn batch_bounds(samples: u64, batches: u32) -> Vec<(u64, u64)> {
    let b = u128::from(batches);
    let n = u128::from(samples);
    (0..b)
        .map(|i| ((i * n / b) as u64, ((i + 1) * n / b) as u64))
        .collect()
}

#[cfg(feature = "parallel")]
fn run_batches(
    config: &SampleConfig,
    powers: &[f64],
    bounds: &[(u64, u64)],
    threads: Option<usize>,
) -> Vec<BatchResult> {
    use rayon::prelude::*;
    let work = || {
        bounds
            .par_iter()
            .map(|&(s, e)| run_batch(config, powers, s, e))
            .collect::<Vec<_>>()
    };
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_batches(
    config: &SampleConfig,
    powers: &[f64],
    bounds: &[(u64, u64)],
    _threads: Option<usize>,
) -> Vec<BatchResult> {
    bounds.iter().map(|&(s, e)| run_batch(config, powers, s, e)).collect()
}

/// One pass over the samples of `config`, estimating `E[stat^p]` for every
/// `p` in `powers` (the config's own `power` is ignored). `threads` is a
/// parallelism hint and never changes the result.
pub fn estimate_moments(
    config: &SampleConfig,
    powers: &[f64],
    threads: Option<usize>,
) -> Result<Vec<MomentEstimate>> {
    config.validate()?;
    for &p in powers {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::Config(format!("power must be a finite p >= 0, got {p}")));
        }
    }
    let bounds = batch_bounds(config.samples, config.batch_count);
    let batches = run_batches(config, powers, &bounds, threads);
    let zeros: u64 = batches.iter().map(|b| b.zeros).sum();
    let b = batches.len() as f64;

    Ok(powers
        .iter()
        .enumerate()
        .map(|(pi, &power)| {
            let mut total = LogSumExp::EMPTY;
            for batch in &batches {
                total.merge(batch.sums[pi]);
            }
            let log_mean = total.log_mean(config.samples);
            let log_stderr = if log_mean == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                let ratios: Vec<f64> = batches
                    .iter()
                    .map(|batch| (batch.sums[pi].log_mean(batch.count) - log_mean).exp())
                    .collect();
                let mean = ratios.iter().sum::<f64>() / b;
                let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (b - 1.0);
                (var / b).sqrt()
            };
            MomentEstimate {
                log_mean,
                log_stderr,
                samples: config.samples,
                zero_volume_samples: zeros,
                config: SampleConfig { power, ..*config },
            }
        })
        .collect())
}

/// Estimate `ln E[stat^p]` for `config`.
pub fn estimate_moment(config: &SampleConfig) -> Result<MomentEstimate> {
    estimate_moment_with_threads(config, None)
}

pub fn estimate_moment_with_threads(
    config: &SampleConfig,
    threads: Option<usize>,
) -> Result<MomentEstimate> {
    Ok(estimate_moments(config, &[config.power], threads)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};

    fn basis(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    fn body(n: usize, q: QIndex) -> BodySpec {
        BodySpec::new(n, q).unwrap()
    }

    #[test]
    fn substreams_are_deterministic_and_distinct() {
        let s = RngStream::new(42);
        let a: u64 = s.substream(7).random();
        let b: u64 = s.substream(7).random();
        let c: u64 = s.substream(8).random();
        let d: u64 = RngStream::new(43).substream(7).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_eq!(sample_lq_ball(5, QIndex::Finite(1.5), &s, 3), sample_lq_ball(5, QIndex::Finite(1.5), &s, 3));
        assert_eq!(sample_sphere(4, &s, 3), sample_sphere(4, &s, 3));
    }

    #[test]
    fn ball_points_inside() {
        let s = RngStream::new(1);
        for q in [QIndex::ONE, QIndex::Finite(1.5), QIndex::TWO, QIndex::Finite(7.0), QIndex::Infinite] {
            for i in 0..2000 {
                let x = sample_lq_ball(6, q, &s, i);
                let inside = match q {
                    QIndex::Finite(qv) => x.iter().map(|v| v.abs().powf(qv)).sum::<f64>() <= 1.0 + 1e-12,
                    QIndex::Infinite => x.iter().all(|v| v.abs() <= 1.0),
                };
                assert!(inside, "q={q} {x:?}");
            }
        }
    }

    fn mean_and_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
        let v: Vec<f64> = values.collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn uniform_segment_second_moment() {
        let s = RngStream::new(11);
        let sampler = LqBallSampler::new(1, QIndex::Infinite);
        let (m, se) = mean_and_se((0..1_000_000).map(|i| sampler.sample(&mut s.substream(i))[0].powi(2)));
        assert!((m - 1.0 / 3.0).abs() < 4.0 * se, "{m} ± {se}");
    }

    #[test]
    fn lq_ball_coordinate_second_moment() {
        // E x_1² = ∫x_1² / |B_q^n|
        use crate::special_math::{log_ball_volume, log_monomial_moment, ExponentVector};
        let s = RngStream::new(12);
        for q in [QIndex::ONE, QIndex::Finite(1.5), QIndex::Finite(4.0)] {
            let n = 3;
            let sampler = LqBallSampler::new(n, q);
            let (m, se) = mean_and_se((0..200_000).map(|i| sampler.sample(&mut s.substream(i))[0].powi(2)));
            let exact = (log_monomial_moment(q, &ExponentVector::leading(n, &[2])).unwrap()
                / log_ball_volume(n, q).unwrap())
            .value();
            assert!((m - exact).abs() < 4.0 * se, "q={q}: {m} vs {exact} ± {se}");
        }
    }

    #[test]
    fn sphere_properties() {
        let s = RngStream::new(5);
        let (m, se) = mean_and_se((0..100_000).map(|i| if sample_sphere(1, &s, i)[0] > 0.0 { 1.0 } else { 0.0 }));
        assert!((m - 0.5).abs() < 4.0 * se);
        for i in 0..1000 {
            let x = sample_sphere(1, &s, i);
            assert!(x[0] == 1.0 || x[0] == -1.0);
        }
        let (m, se) = mean_and_se((0..1_000_000).map(|i| {
            let x = sample_sphere(3, &s, i);
            let norm: f64 = x.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            x[0] * x[0]
        }));
        assert!((m - 1.0 / 3.0).abs() < 4.0 * se, "{m} ± {se}");
    }

    #[test]
    fn standard_simplex_second_moment() {
        use crate::exact_moments::simplex_second_moment;
        let s = RngStream::new(21);
        for n in [2usize, 3] {
            let (m, se) = mean_and_se((0..300_000).map(|i| {
                let mut rng = s.substream(i);
                let pts: Vec<Vec<f64>> = (0..=n)
                    .map(|_| {
                        let e: Vec<f64> = (0..=n).map(|_| Exp1.sample(&mut rng)).collect();
                        let total: f64 = e.iter().sum();
                        e[..n].iter().map(|x| x / total).collect()
                    })
                    .collect();
                let ln_u = log_volume_simplex(&pts).unwrap().unwrap() + log_factorial(n);
                (2.0 * ln_u).exp()
            }));
            let exact = simplex_second_moment(n).unwrap().value();
            assert!((m - exact).abs() < 4.0 * se, "n={n}: {m} vs {exact} ± {se}");
        }
    }

    #[test]
    fn crosspolytope_volume_examples() {
        for n in 1..=6 {
            let v = log_volume_crosspolytope(&basis(n)).unwrap().unwrap();
            assert!((v - (n as f64 * LN_2 - log_factorial(n))).abs() < 1e-14);
        }
        assert_eq!(log_volume_crosspolytope(&[vec![0.5]]).unwrap(), Some(0.0));
        let dup = vec![vec![0.3, 0.7], vec![0.3, 0.7]];
        assert_eq!(log_volume_crosspolytope(&dup).unwrap(), None);
        assert!(log_volume_crosspolytope(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn symhull_volume_examples() {
        let v = log_volume_symhull_k(&[vec![3.0, 4.0]]).unwrap().unwrap();
        assert!((v - 10f64.ln()).abs() < 1e-14);
        for n in 1..=6 {
            let a = log_volume_symhull_k(&basis(n)).unwrap().unwrap();
            let b = log_volume_crosspolytope(&basis(n)).unwrap().unwrap();
            assert!((a - b).abs() < 1e-13);
        }
        let collinear = vec![vec![1.0, 2.0, 0.5], vec![2.0, 4.0, 1.0]];
        assert_eq!(log_volume_symhull_k(&collinear).unwrap(), None);
        assert!(log_volume_symhull_k(&[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn simplex_volume_examples() {
        for n in 1..=6 {
            let mut pts = vec![vec![0.0; n]];
            pts.extend(basis(n));
            let v = log_volume_simplex(&pts).unwrap().unwrap();
            assert!((v + log_factorial(n)).abs() < 1e-14);
            let shifted: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| x + 3.25).collect()).collect();
            let w = log_volume_simplex(&shifted).unwrap().unwrap();
            assert!((v - w).abs() < 1e-13);
        }
        let rep = vec![vec![0.1, 0.2], vec![0.5, 0.9], vec![0.1, 0.2]];
        assert_eq!(log_volume_simplex(&rep).unwrap(), None);
    }

    proptest! {
        #[test]
        fn volumes_scale_homogeneously(
            seed in any::<u64>(),
            n in 1usize..6,
            k_off in 0usize..5,
            lambda in 0.05f64..20.0,
        ) {
            let s = RngStream::new(seed);
            let ball = LqBallSampler::new(n, QIndex::Finite(1.7));
            let mut rng = s.substream(0);
            let pts: Vec<Vec<f64>> = (0..=n).map(|_| ball.sample(&mut rng)).collect();
            let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| x * lambda).collect()).collect();
            let ln_l = lambda.ln();

            let a = log_volume_simplex(&pts).unwrap().unwrap();
            let b = log_volume_simplex(&scaled).unwrap().unwrap();
            prop_assert!((b - a - n as f64 * ln_l).abs() < 1e-9);

            let a = log_volume_crosspolytope(&pts[..n]).unwrap().unwrap();
            let b = log_volume_crosspolytope(&scaled[..n]).unwrap().unwrap();
            prop_assert!((b - a - n as f64 * ln_l).abs() < 1e-9);

            let k = 1 + k_off % n;
            let a = log_volume_symhull_k(&pts[..k]).unwrap().unwrap();
            let b = log_volume_symhull_k(&scaled[..k]).unwrap().unwrap();
            prop_assert!((b - a - k as f64 * ln_l).abs() < 1e-9);
        }

        #[test]
        fn gram_and_lu_agree_for_square(seed in any::<u64>(), n in 1usize..7) {
            let s = RngStream::new(seed);
            let ball = LqBallSampler::new(n, QIndex::Infinite);
            let mut rng = s.substream(1);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| ball.sample(&mut rng)).collect();
            let a = log_volume_crosspolytope(&pts).unwrap().unwrap();
            let b = log_volume_symhull_k(&pts).unwrap().unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn config_validation() {
        let b = body(3, QIndex::TWO);
        let ok = SampleConfig::new(b, Statistic::VCrosspolytope, 2.0, 1000, 1);
        assert!(ok.validate().is_ok());
        assert!(SampleConfig { samples: 10, ..ok }.validate().is_err());
        assert!(SampleConfig { power: -1.0, ..ok }.validate().is_err());
        assert!(SampleConfig { statistic: Statistic::VMiles { k: 4, s: 0 }, ..ok }.validate().is_err());
        assert!(SampleConfig { statistic: Statistic::VMiles { k: 2, s: 3 }, ..ok }.validate().is_err());
        let cube = body(3, QIndex::Infinite);
        assert!(SampleConfig { body: cube, statistic: Statistic::VMiles { k: 2, s: 1 }, ..ok }.validate().is_err());
    }

    #[test]
    fn deterministic_miles_has_zero_error() {
        let config = SampleConfig::new(body(1, QIndex::TWO), Statistic::VMiles { k: 1, s: 1 }, 3.0, 10_000, 9);
        let est = estimate_moment(&config).unwrap();
        assert_eq!(est.log_mean, 3.0 * LN_2);
        assert_eq!(est.log_stderr, 0.0);
        assert_eq!(est.zero_volume_samples, 0);
    }

    #[test]
    fn cube_square_second_moment() {
        let config = SampleConfig::new(body(2, QIndex::Infinite), Statistic::VCrosspolytope, 2.0, 400_000, 3);
        let est = estimate_moment(&config).unwrap();
        let z = est.z_score((1.0f64 / 18.0).ln());
        assert!(z.abs() < 4.0, "z = {z}, {est:?}");
    }

    #[test]
    fn multi_power_pass_matches_single() {
        let config = SampleConfig::new(body(3, QIndex::ONE), Statistic::USimplex, 1.0, 20_000, 77);
        let both = estimate_moments(&config, &[1.0, 2.0], None).unwrap();
        let single = estimate_moment(&SampleConfig { power: 2.0, ..config }).unwrap();
        assert_eq!(both[1], single);
        assert_eq!(both[0].config.power, 1.0);
    }

    #[test]
    fn uneven_batches_cover_all_samples() {
        let bounds = batch_bounds(1003, 10);
        assert_eq!(bounds[0].0, 0);
        assert_eq!(bounds[9].1, 1003);
        for w in bounds.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
    }

    #[test]
    fn zero_power_is_exactly_one() {
        let config = SampleConfig::new(body(4, QIndex::Finite(3.0)), Statistic::VCrosspolytope, 0.0, 5_000, 2);
        let est = estimate_moment(&config).unwrap();
        assert_eq!(est.log_mean, 0.0);
        assert_eq!(est.log_stderr, 0.0);
    }

    #[test]
    fn log_sum_exp_merge_is_consistent() {
        let xs = [-3.0, 10.0, 2.0, -700.0, 9.5];
        let mut whole = LogSumExp::EMPTY;
        xs.iter().for_each(|&x| whole.push(x));
        let mut left = LogSumExp::EMPTY;
        let mut right = LogSumExp::EMPTY;
        xs[..2].iter().for_each(|&x| left.push(x));
        xs[2..].iter().for_each(|&x| right.push(x));
        left.merge(right);
        assert!((whole.log_mean(5) - left.log_mean(5)).abs() < 1e-14);
        let direct = (xs.iter().map(|x| x.exp()).sum::<f64>() / 5.0).ln();
        assert!((whole.log_mean(5) - direct).abs() < 1e-14);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn thread_count_does_not_change_results() {
        let config = SampleConfig::new(body(3, QIndex::Finite(1.5)), Statistic::USimplex, 2.0, 30_000, 5);
        let one = estimate_moment_with_threads(&config, Some(1)).unwrap();
        let four = estimate_moment_with_threads(&config, Some(4)).unwrap();
        let default = estimate_moment(&config).unwrap();
        assert_eq!(one, four);
        assert_eq!(one, default);
        assert_eq!(one.log_mean.to_bits(), four.log_mean.to_bits());
    }
}
