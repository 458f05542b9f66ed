//! Expectile loss, the empirical expectile solver and the risk metrics that
//! are computed from realized reward or loss streams.
//!
//! Everything here uses the loss orientation of the learner: with
//! `q < 1/2` overprediction is cheap, so the fitted expectile sits above the
//! mean and a large value means "risky". Streams of rewards (larger is
//! better) go through [`Orientation::Reward`], which evaluates the same
//! risk measure on the negated stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("expectile level q must lie in (0,1), got {0}")]
    InvalidLevel(f64),
    #[error("no data: sample is empty")]
    Empty,
    #[error("weights length {weights} does not match values length {values}")]
    WeightLength { values: usize, weights: usize },
    #[error("weights must be nonnegative, finite and have a positive total")]
    InvalidWeights,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("coverage must lie in (0,1), got {0}")]
    InvalidCoverage(f64),
    #[error("resample count must be positive")]
    NoResamples,
}

/// Expectile level `q` together with its strong-convexity constant
/// `theta = min(q, 1-q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ExpectileConfig {
    q: f64,
    theta: f64,
}

impl ExpectileConfig {
    pub fn new(q: f64) -> Result<Self, RiskError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(RiskError::InvalidLevel(q));
        }
        Ok(Self {
            q,
            theta: q.min(1.0 - q),
        })
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    #[inline]
    pub fn theta(&self) -> f64 {
        self.theta
    }
}

impl TryFrom<f64> for ExpectileConfig {
    type Error = RiskError;
    fn try_from(q: f64) -> Result<Self, Self::Error> {
        Self::new(q)
    }
}

impl From<ExpectileConfig> for f64 {
    fn from(c: ExpectileConfig) -> f64 {
        c.q
    }
}

/// Whether larger values of a stream are worse (losses) or better (rewards).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Loss,
    Reward,
}

/// A nonempty collection of realized values with optional weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<'a> {
    values: &'a [f64],
    weights: Option<&'a [f64]>,
    total_weight: f64,
}

impl<'a> Sample<'a> {
    pub fn new(values: &'a [f64]) -> Result<Self, RiskError> {
        Self::build(values, None)
    }

    pub fn weighted(values: &'a [f64], weights: &'a [f64]) -> Result<Self, RiskError> {
        Self::build(values, Some(weights))
    }

    fn build(values: &'a [f64], weights: Option<&'a [f64]>) -> Result<Self, RiskError> {
        if values.is_empty() {
            return Err(RiskError::Empty);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(RiskError::NonFinite(i));
        }
        let total_weight = match weights {
            None => values.len() as f64,
            Some(w) => {
                if w.len() != values.len() {
                    return Err(RiskError::WeightLength {
                        values: values.len(),
                        weights: w.len(),
                    });
                }
                if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(RiskError::InvalidWeights);
                }
                let total: f64 = w.iter().sum();
                if !(total > 0.0) {
                    return Err(RiskError::InvalidWeights);
                }
                total
            }
        };
        Ok(Self {
            values,
            weights,
            total_weight,
        })
    }

    pub fn values(&self) -> &[f64] {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }

    pub fn mean(&self) -> f64 {
        let s: f64 = (0..self.len()).map(|i| self.weight(i) * self.values[i]).sum();
        s / self.total_weight
    }

    /// Weighted mean of `expectile_loss(v, vhat)` over the sample.
    pub fn mean_loss(&self, vhat: f64, cfg: ExpectileConfig) -> f64 {
        let s: f64 = (0..self.len())
            .map(|i| self.weight(i) * expectile_loss(self.values[i], vhat, cfg))
            .sum();
        s / self.total_weight
    }

    /// `(1-q) E[(v - vhat)+] - q E[(vhat - v)+]`; strictly decreasing in vhat.
    fn first_order(&self, vhat: f64, cfg: ExpectileConfig) -> f64 {
        let (mut above, mut below) = (0.0, 0.0);
        for (i, &v) in self.values.iter().enumerate() {
            let w = self.weight(i);
            if v > vhat {
                above += w * (v - vhat);
            } else {
                below += w * (vhat - v);
            }
        }
        ((1.0 - cfg.q) * above - cfg.q * below) / self.total_weight
    }
}

/// `(1-q) ((v - vhat)+)^2 + q ((vhat - v)+)^2`.
#[inline]
pub fn expectile_loss(v: f64, vhat: f64, cfg: ExpectileConfig) -> f64 {
    let r = v - vhat;
    if r > 0.0 {
        (1.0 - cfg.q) * r * r
    } else {
        cfg.q * r * r
    }
}

/// Derivative of [`expectile_loss`] with respect to `vhat`.
#[inline]
pub fn expectile_loss_grad(v: f64, vhat: f64, cfg: ExpectileConfig) -> f64 {
    let r = v - vhat;
    if r > 0.0 {
        -2.0 * (1.0 - cfg.q) * r
    } else {
        -2.0 * cfg.q * r
    }
}

const SOLVER_TOL: f64 = 1e-10;

/// Minimizer of the (weighted) empirical expectile loss.
///
/// Bisection on the first-order condition over `[min, max]` of the sample.
/// The condition is piecewise linear between data points, so once the
/// bracket holds no data point a single secant step lands on the root.
pub fn expectile_of_sample(s: &Sample<'_>, cfg: ExpectileConfig) -> f64 {
    let (mut lo, mut hi) = s
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi {
        return lo;
    }
    let (mut g_lo, mut g_hi) = (s.first_order(lo, cfg), s.first_order(hi, cfg));
    if g_lo <= 0.0 {
        return lo;
    }
    if g_hi >= 0.0 {
        return hi;
    }
    for _ in 0..200 {
        if hi - lo <= SOLVER_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = s.first_order(mid, cfg);
        if g > 0.0 {
            lo = mid;
            g_lo = g;
        } else if g < 0.0 {
            hi = mid;
            g_hi = g;
        } else {
            return mid;
        }
    }
    let root = lo + g_lo * (hi - lo) / (g_lo - g_hi);
    root.clamp(lo, hi)
}

/// Convenience wrapper for an unweighted slice.
pub fn expectile(values: &[f64], cfg: ExpectileConfig) -> Result<f64, RiskError> {
    Ok(expectile_of_sample(&Sample::new(values)?, cfg))
}

/// Risk measure in the stream's own units.
///
/// For losses this is the plain expectile; for rewards it is
/// `-expectile(-stream)`, i.e. the lower-tail expectile of the rewards, so
/// that `q_eval < 1/2` is always the pessimistic side.
pub fn oriented_expectile(values: &[f64], q_eval: f64, orientation: Orientation) -> Result<f64, RiskError> {
    let cfg = ExpectileConfig::new(q_eval)?;
    match orientation {
        Orientation::Loss => expectile(values, cfg),
        Orientation::Reward => {
            let neg: Vec<f64> = values.iter().map(|v| -v).collect();
            Ok(-expectile(&neg, cfg)?)
        }
    }
}

/// Expectile of the realized online stream at an evaluation level that may
/// differ from the learning level.
pub fn realized_marginal_expectile(stream: &[f64], q_eval: f64, orientation: Orientation) -> Result<f64, RiskError> {
    oriented_expectile(stream, q_eval, orientation)
}

/// Statistics the bootstrap knows how to resample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "q")]
pub enum Statistic {
    Mean,
    Expectile(f64),
    /// Expectile of a reward stream (lower tail for `q < 1/2`).
    RewardExpectile(f64),
}

impl Statistic {
    pub fn evaluate(&self, values: &[f64]) -> Result<f64, RiskError> {
        if values.is_empty() {
            return Err(RiskError::Empty);
        }
        match *self {
            Statistic::Mean => Ok(values.iter().sum::<f64>() / values.len() as f64),
            Statistic::Expectile(q) => oriented_expectile(values, q, Orientation::Loss),
            Statistic::RewardExpectile(q) => oriented_expectile(values, q, Orientation::Reward),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

pub const DEFAULT_RESAMPLES: usize = 1000;

/// Evaluation levels reported for realized reward streams.
pub const DEFAULT_Q_EVAL: [f64; 6] = [0.01, 0.05, 0.1, 0.2, 0.3, 0.5];

/// Percentile bootstrap interval of `statistic`.
///
/// Resample `r` draws from its own ChaCha stream, so the result does not
/// depend on thread scheduling.
pub fn bootstrap_ci(
    stream: &[f64],
    statistic: Statistic,
    coverage: f64,
    resamples: usize,
    seed: u64,
) -> Result<Interval, RiskError> {
    bootstrap_ci_with(stream, coverage, resamples, seed, |s| statistic.evaluate(s))
}

pub fn bootstrap_ci_with<F>(
    stream: &[f64],
    coverage: f64,
    resamples: usize,
    seed: u64,
    statistic: F,
) -> Result<Interval, RiskError>
where
    F: Fn(&[f64]) -> Result<f64, RiskError> + Sync,
{
    if stream.is_empty() {
        return Err(RiskError::Empty);
    }
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(RiskError::InvalidCoverage(coverage));
    }
    if resamples == 0 {
        return Err(RiskError::NoResamples);
    }
    let n = stream.len();
    let mut stats = (0..resamples)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                for slot in buf.iter_mut() {
                    *slot = stream[rng.random_range(0..n)];
                }
                statistic(buf)
            },
        )
        .collect::<Result<Vec<f64>, RiskError>>()?;
    stats.sort_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - coverage);
    Ok(Interval {
        lo: percentile(&stats, alpha),
        hi: percentile(&stats, 1.0 - alpha),
    })
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    let frac = pos - i as f64;
    sorted[i] + frac * (sorted[j] - sorted[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(q: f64) -> ExpectileConfig {
        ExpectileConfig::new(q).unwrap()
    }

    /// Dense grid minimization of the empirical objective, independent of
    /// the bisection path.
    fn grid_expectile(values: &[f64], q: f64, step: f64) -> f64 {
        let c = cfg(q);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let n = ((hi - lo) / step).ceil() as usize;
        let mut best = (f64::INFINITY, lo);
        for k in 0..=n {
            let v = (lo + k as f64 * step).min(hi);
            let obj: f64 = values.iter().map(|&x| expectile_loss(x, v, c)).sum();
            if obj < best.0 {
                best = (obj, v);
            }
        }
        best.1
    }

    #[test]
    fn config_rejects_out_of_range() {
        for q in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(ExpectileConfig::new(q).is_err());
        }
        let c = cfg(0.2);
        assert_eq!(c.theta(), 0.2);
        assert_eq!(cfg(0.7).theta(), 1.0 - 0.7);
    }

    #[test]
    fn loss_examples() {
        assert_eq!(expectile_loss(1.0, 1.0, cfg(0.3)), 0.0);
        assert!((expectile_loss(1.0, 0.0, cfg(0.2)) - 0.8).abs() < 1e-15);
        assert!((expectile_loss(0.0, 1.0, cfg(0.2)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn grad_examples() {
        assert_eq!(expectile_loss_grad(0.4, 0.4, cfg(0.2)), 0.0);
        assert!((expectile_loss_grad(1.0, 0.0, cfg(0.2)) + 1.6).abs() < 1e-15);
    }

    #[test]
    fn grad_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..1000 {
            let v: f64 = rng.random();
            let vhat: f64 = rng.random();
            let q = rng.random_range(0.01..0.99);
            if (v - vhat).abs() < 2.0 * h {
                continue;
            }
            let c = cfg(q);
            let fd = (expectile_loss(v, vhat + h, c) - expectile_loss(v, vhat - h, c)) / (2.0 * h);
            let g = expectile_loss_grad(v, vhat, c);
            assert!((fd - g).abs() < 1e-6, "v={v} vhat={vhat} q={q}: {fd} vs {g}");
            assert!(g.abs() <= 2.0 * q.max(1.0 - q) * (v - vhat).abs() + 1e-15);
        }
    }

    #[test]
    fn bernoulli_half_expectile_is_one_minus_q() {
        let s = [0.0, 1.0];
        assert!((expectile(&s, cfg(0.5)).unwrap() - 0.5).abs() < 1e-9);
        assert!((expectile(&s, cfg(0.2)).unwrap() - 0.8).abs() < 1e-9);
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert_eq!(Sample::new(&[]).unwrap_err(), RiskError::Empty);
        assert!(realized_marginal_expectile(&[], 0.2, Orientation::Loss).is_err());
        assert!(bootstrap_ci(&[], Statistic::Mean, 0.95, 10, 0).is_err());
    }

    #[test]
    fn weighted_sample_validation() {
        let v = [0.0, 1.0];
        assert!(Sample::weighted(&v, &[1.0]).is_err());
        assert!(Sample::weighted(&v, &[-1.0, 2.0]).is_err());
        assert!(Sample::weighted(&v, &[0.0, 0.0]).is_err());
        // weight 3:1 toward 0 at q = 0.5 gives the weighted mean 0.25
        let s = Sample::weighted(&v, &[3.0, 1.0]).unwrap();
        assert!((expectile_of_sample(&s, cfg(0.5)) - 0.25).abs() < 1e-10);
    }

    #[test]
    fn constant_stream_expectile() {
        let s = vec![0.37; 50];
        for q in [0.05, 0.5, 0.9] {
            assert_eq!(realized_marginal_expectile(&s, q, Orientation::Loss).unwrap(), 0.37);
        }
    }

    #[test]
    fn alternating_stream_expectile() {
        let s: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let e = realized_marginal_expectile(&s, 0.2, Orientation::Loss).unwrap();
        assert!((e - 0.8).abs() < 1e-9);
        // rewards: lower-tail expectile
        let r = realized_marginal_expectile(&s, 0.2, Orientation::Reward).unwrap();
        assert!((r - 0.2).abs() < 1e-9);
    }

    #[test]
    fn reward_expectile_nondecreasing_in_q_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s: Vec<f64> = (0..500).map(|_| rng.random::<f64>().powi(3)).collect();
        let mut prev = f64::NEG_INFINITY;
        let mut q = 0.01;
        while q < 1.0 {
            let e = realized_marginal_expectile(&s, q, Orientation::Reward).unwrap();
            let g = grid_expectile(&s.iter().map(|v| -v).collect::<Vec<_>>(), q, 1e-4);
            assert!((e + g).abs() < 2e-4);
            assert!(e >= prev - 1e-12);
            prev = e;
            q += 0.049;
        }
    }

    #[test]
    fn bisection_agrees_with_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.random_range(3..60);
            let s: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let q = rng.random_range(0.05..0.95);
            let e = expectile(&s, cfg(q)).unwrap();
            let g = grid_expectile(&s, q, 1e-5);
            assert!((e - g).abs() < 2e-5, "{e} vs {g}");
        }
    }

    #[test]
    fn bootstrap_constant_stream_zero_width() {
        let s = vec![0.25; 200];
        let ci = bootstrap_ci(&s, Statistic::Mean, 0.95, 200, 1).unwrap();
        assert_eq!(ci, Interval { lo: 0.25, hi: 0.25 });
        let ci = bootstrap_ci(&s, Statistic::Expectile(0.2), 0.95, 50, 1).unwrap();
        assert_eq!(ci.width(), 0.0);
    }

    #[test]
    fn bootstrap_brackets_mean_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let s: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let a = bootstrap_ci(&s, Statistic::Mean, 0.95, 1000, 7).unwrap();
        let b = bootstrap_ci(&s, Statistic::Mean, 0.95, 1000, 7).unwrap();
        assert!(a.contains(mean));
        assert_eq!(a.lo.to_bits(), b.lo.to_bits());
        assert_eq!(a.hi.to_bits(), b.hi.to_bits());
        assert!(bootstrap_ci(&s, Statistic::Mean, 1.0, 10, 7).is_err());
    }

    fn sample_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, 1..80)
    }

    proptest! {
        #[test]
        fn translation_equivariance(s in sample_strategy(), c in -10.0f64..10.0, q in 0.02f64..0.98) {
            let e = expectile(&s, cfg(q)).unwrap();
            let shifted: Vec<f64> = s.iter().map(|v| v + c).collect();
            let es = expectile(&shifted, cfg(q)).unwrap();
            prop_assert!((es - (e + c)).abs() < 1e-8);
        }

        #[test]
        fn positive_homogeneity(s in sample_strategy(), c in 0.01f64..20.0, q in 0.02f64..0.98) {
            let e = expectile(&s, cfg(q)).unwrap();
            let scaled: Vec<f64> = s.iter().map(|v| v * c).collect();
            let es = expectile(&scaled, cfg(q)).unwrap();
            prop_assert!((es - c * e).abs() < 1e-8);
        }

        #[test]
        fn within_sample_range(s in sample_strategy(), q in 0.01f64..0.99) {
            let e = expectile(&s, cfg(q)).unwrap();
            let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= e && e <= hi);
        }

        #[test]
        fn q_half_is_mean(s in sample_strategy()) {
            let e = expectile(&s, cfg(0.5)).unwrap();
            let m = s.iter().sum::<f64>() / s.len() as f64;
            prop_assert!((e - m).abs() < 1e-9);
        }

        #[test]
        fn strong_convexity_lower_bound(s in sample_strategy(), q in 0.02f64..0.98, vhat in -6.0f64..6.0) {
            let c = cfg(q);
            let sample = Sample::new(&s).unwrap();
            let star = expectile_of_sample(&sample, c);
            let gap = sample.mean_loss(vhat, c) - sample.mean_loss(star, c);
            prop_assert!(gap >= c.theta() * (vhat - star).powi(2) - 1e-9);
        }
    }

    #[test]
    fn loss_orientation_expectile_nonincreasing_in_q() {
        // Under this loss, raising q penalizes overprediction more, so the
        // fitted value moves down.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.random_range(2..50);
            let s: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let mut prev = f64::INFINITY;
            for k in 1..=9 {
                let e = expectile(&s, cfg(k as f64 / 10.0)).unwrap();
                assert!(e <= prev + 1e-12);
                prev = e;
            }
        }
    }
}
