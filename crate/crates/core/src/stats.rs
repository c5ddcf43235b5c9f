//! Sample statistics used by the Monte-Carlo estimators.

use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mean, unbiased variance and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary { count: 0, mean: f64::NAN, variance: f64::NAN, se: f64::NAN };
    }
    let mean = neumaier_sum(values.iter().copied()) / n as f64;
    let variance = if n > 1 {
        neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64
    } else {
        0.0
    };
    Summary { count: n, mean, variance, se: sqrt(variance / n as f64) }
}

pub fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + log(neumaier_sum(logs.iter().map(|l| exp(l - max))))
}

/// Mean of `e^{l_j}` with its standard error, as `(log mean, mean, se)`;
/// `mean` and `se` overflow to infinity only when the result itself does.
pub fn exp_mean(logs: &[f64]) -> (f64, f64, f64) {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| exp(l - max)).collect();
    let s = summarize(&scaled);
    let log_mean = max + log(s.mean);
    (log_mean, exp(log_mean), s.se * exp(max))
}

/// Share of the total of `e^{l_j}` carried by the largest `fraction` of samples.
pub fn top_share(logs: &[f64], fraction: f64) -> f64 {
    if logs.is_empty() {
        return 0.0;
    }
    let mut sorted = logs.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let k = (libm::ceil(logs.len() as f64 * fraction) as usize).clamp(1, logs.len());
    let total = log_sum_exp(&sorted);
    exp(log_sum_exp(&sorted[..k]) - total)
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_mean_ci(values: &[f64], resamples: usize, seed: u64, level: f64) -> (f64, f64) {
    let n = values.len();
    if n == 0 || resamples == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += values[uniform_index(&mut rng, n)];
        }
        means.push(sum / n as f64);
    }
    means.sort_unstable_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let at = |q: f64| means[(libm::round(q * (resamples - 1) as f64) as usize).min(resamples - 1)];
    (at(alpha), at(1.0 - alpha))
}

/// Uniform integer in `0..n` by multiply-shift.
pub fn uniform_index(rng: &mut impl RngCore, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

/// Uniform float in `[0, 1)` with 53 random bits.
pub fn uniform_unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
