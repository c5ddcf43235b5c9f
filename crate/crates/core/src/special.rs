//! Gamma, Mittag-Leffler, the Beta-chain simplex identity and the spectral
//! constants of the gasket.

use alloc::vec::Vec;

use libm::{cosh, exp, fabs, log, pow, sin, sinh};

use crate::error::{Error, Result};
use crate::stats::neumaier_sum;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln |Γ(x)|`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx).
        return log(core::f64::consts::PI / fabs(sin(core::f64::consts::PI * x))) - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (x + 0.5) * log(t) - t + log(a)
}

pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        return core::f64::consts::PI / (sin(core::f64::consts::PI * x) * gamma(1.0 - x));
    }
    exp(ln_gamma(x))
}

/// `E_{a,b}(z) = Σ_p z^p / Γ(ap + b)`.
///
/// Terms are summed with compensation until they fall below `1e-17` of the
/// larger of the running sum and the largest term. Arguments whose result
/// would overflow, or whose alternating series loses more than six digits to
/// cancellation, are rejected.
pub fn mittag_leffler(a: f64, b: f64, z: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && z.is_finite()) {
        return Err(Error::Domain(alloc::format!("E_{{a,b}}(z) needs a, b > 0 and finite z (a={a}, b={b}, z={z})")));
    }
    if z == 0.0 {
        return Ok(1.0 / gamma(b));
    }
    if z > 0.0 && log(z) / a > log(700.0) {
        return Err(Error::Domain(alloc::format!("E_{{{a},{b}}}({z}) overflows")));
    }
    let lz = log(fabs(z));
    let neg = z < 0.0;
    let mut terms = Vec::new();
    let mut max_term = 0.0f64;
    let mut prev = f64::INFINITY;
    let mut sum = 0.0;
    for p in 0..100_000u32 {
        let lt = p as f64 * lz - ln_gamma(a * p as f64 + b);
        let mag = exp(lt);
        let term = if neg && p % 2 == 1 { -mag } else { mag };
        terms.push(term);
        sum += term;
        max_term = max_term.max(mag);
        let decreasing = mag < prev;
        prev = mag;
        if decreasing && p > 2 && mag <= 1e-17 * fabs(sum).max(max_term) {
            let total = neumaier_sum(terms.iter().copied());
            if max_term * 1e-16 > 1e-6 * fabs(total) {
                return Err(Error::Domain(alloc::format!(
                    "E_{{{a},{b}}}({z}): cancellation (largest term {max_term:e}, sum {total:e})"
                )));
            }
            return Ok(total);
        }
    }
    Err(Error::Domain(alloc::format!("E_{{{a},{b}}}({z}): series did not settle")))
}

/// `ln E_{a,b}(z)` for `z ≥ 0`, summed in the log domain so that
/// arguments far beyond the overflow range of [`mittag_leffler`] are usable.
pub fn ln_mittag_leffler(a: f64, b: f64, z: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && z >= 0.0 && z.is_finite()) {
        return Err(Error::Domain(alloc::format!("ln E_{{a,b}}(z) needs a, b > 0 and finite z ≥ 0 (a={a}, b={b}, z={z})")));
    }
    if z == 0.0 {
        return Ok(-ln_gamma(b));
    }
    let lz = log(z);
    let mut logs = Vec::new();
    let mut peak = f64::NEG_INFINITY;
    for p in 0..10_000_000u64 {
        let lt = p as f64 * lz - ln_gamma(a * p as f64 + b);
        let past_peak = lt < *logs.last().unwrap_or(&f64::INFINITY);
        logs.push(lt);
        peak = peak.max(lt);
        if past_peak && p > 2 && lt < peak - 40.0 {
            return Ok(crate::stats::log_sum_exp(&logs));
        }
    }
    Err(Error::Domain(alloc::format!("ln E_{{{a},{b}}}({z}): series did not settle")))
}

/// Outcome of the simplex identity
/// `∫_{0<θ_1<…<θ_p<1} Π (θ_i − θ_{i−1})^{γ−1} dθ = Γ(γ)^p / Γ(pγ + 1)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BetaChain {
    pub p: u32,
    pub gamma: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / rhs`.
    pub gap: f64,
    /// `(step, lhs)` per refinement level.
    pub history: Vec<(f64, f64)>,
}

/// Tanh-sinh rule on `[0, s]`. The integrand receives the distances to both
/// endpoints, so singular factors at either end are evaluated without
/// cancellation.
fn tanh_sinh(s: f64, h: f64, tmax: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
    let n = (tmax / h) as i64;
    let half_pi = core::f64::consts::FRAC_PI_2;
    let mut acc = Vec::with_capacity(2 * n as usize + 1);
    for k in -n..=n {
        let t = k as f64 * h;
        let q = half_pi * sinh(t);
        let e = exp(2.0 * q);
        let left = s / (1.0 + e);
        let right = s / (1.0 + 1.0 / e);
        let c = cosh(q);
        let w = 0.5 * s * half_pi * cosh(t) / (c * c);
        if left > 0.0 && right > 0.0 && w > 0.0 {
            acc.push(w * f(left, right));
        }
    }
    h * neumaier_sum(acc)
}

fn chain(k: u32, s: f64, gamma: f64, h: f64, tmax: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    tanh_sinh(s, h, tmax, &|u, rest| pow(u, gamma - 1.0) * chain(k - 1, rest, gamma, h, tmax))
}

/// Evaluates the simplex integral by nested one-dimensional tanh-sinh
/// quadrature, halving the step until two levels agree to `1e-11`.
pub fn beta_chain_identity(p: u32, gamma: f64) -> Result<BetaChain> {
    if !(1..=4).contains(&p) || !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(alloc::format!("beta chain needs 1 ≤ p ≤ 4 and 0 < γ < 1 (p={p}, γ={gamma})")));
    }
    // Truncate where the neglected end mass d^γ/γ is below 1e-15.
    let ln_d = log(1e-15 * gamma) / gamma;
    let q = -ln_d / core::f64::consts::PI;
    if q > 220.0 {
        return Err(Error::Integration {
            message: alloc::format!("γ = {gamma} is too close to 0 for double-precision end truncation"),
            hint: "use γ ≥ 0.1".into(),
        });
    }
    let tmax = libm::asinh(q);
    let rhs = exp(p as f64 * ln_gamma(gamma) - ln_gamma(p as f64 * gamma + 1.0));
    let mut history = Vec::new();
    let mut h = 1.0;
    loop {
        let nodes = 2.0 * tmax / h + 1.0;
        if pow(nodes, p as f64) > 6e7 {
            let last = history.last().map(|&(_, v)| v).unwrap_or(f64::NAN);
            return Err(Error::Integration {
                message: alloc::format!("nested quadrature for p = {p}, γ = {gamma} unresolved at step {}", 2.0 * h),
                hint: alloc::format!("last estimate {last}; lower p or raise the node budget"),
            });
        }
        let lhs = chain(p, 1.0, gamma, h, tmax);
        let done = history.last().is_some_and(|&(_, prev): &(f64, f64)| fabs(lhs - prev) <= 1e-11 * fabs(lhs));
        history.push((h, lhs));
        if done {
            return Ok(BetaChain { p, gamma, lhs, rhs, gap: fabs(lhs - rhs) / rhs, history });
        }
        h *= 0.5;
    }
}

/// `d_s = 2 log 3 / log 5` and `γ_s = 1 − d_s/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SpectralConstants {
    pub d_s: f64,
    pub gamma_s: f64,
}

impl SpectralConstants {
    pub fn new() -> Self {
        let d_s = 2.0 * log(3.0) / log(5.0);
        SpectralConstants { d_s, gamma_s: 1.0 - 0.5 * d_s }
    }
}

impl Default for SpectralConstants {
    fn default() -> Self {
        Self::new()
    }
}
