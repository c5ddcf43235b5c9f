//! Monte-Carlo checks of the moment and exponential-integrability bounds for
//! `⟨W⟩`, with the universal constant fitted rather than assumed.

use alloc::vec::Vec;

use libm::{log, pow};

use crate::ensemble::PathRunner;
use crate::error::{usage, Result};
use crate::graph::LevelGraph;
use crate::kernel::StepKernel;
use crate::special::{gamma, ln_mittag_leffler, SpectralConstants};
use crate::stats::{self, exp_mean, summarize};
use crate::walk::{expint_from_samples, quadratic_variation_at, ExpIntEstimate, Start, WalkConfig};

/// Samples of `⟨W⟩_t` for several fixed starting vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct QvEnsemble {
    pub level: u8,
    pub times: Vec<f64>,
    pub starts: Vec<usize>,
    /// `samples[s][path][t]`.
    pub samples: Vec<Vec<Vec<f64>>>,
}

/// Runs `paths` reflected walks from each start; start `s` uses the seed
/// `seed + s`.
pub fn qv_ensemble(
    kernel: &StepKernel,
    starts: &[usize],
    times: &[f64],
    paths: u64,
    seed: u64,
    runner: &impl PathRunner,
) -> Result<QvEnsemble> {
    if starts.is_empty() || times.is_empty() {
        return Err(usage!("need at least one start and one time"));
    }
    if times.iter().any(|t| !(*t > 0.0)) {
        return Err(usage!("probe times must be positive"));
    }
    let mut samples = Vec::with_capacity(starts.len());
    for (s, &x) in starts.iter().enumerate() {
        let cfg = WalkConfig {
            level: kernel.level(),
            horizon: times.iter().copied().fold(0.0, f64::max),
            seed: seed.wrapping_add(s as u64),
            paths,
            killed: false,
            start: Start::Vertex(x),
        };
        samples.push(quadratic_variation_at(&cfg, kernel, None, runner, times)?);
    }
    Ok(QvEnsemble { level: kernel.level(), times: times.to_vec(), starts: starts.to_vec(), samples })
}

/// The vertices of `V_1` embedded in `V_m`, a default set of starts.
pub fn coarse_starts(g: &LevelGraph) -> Result<Vec<usize>> {
    let coarse = LevelGraph::build(1.min(g.level()))?;
    g.embed(&coarse)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MomentRow {
    pub p: u32,
    pub t: f64,
    pub start: usize,
    /// `E_x[⟨W⟩_t^p] / p!`.
    pub moment: f64,
    pub se: f64,
    /// Smallest `C` for which this row alone holds.
    pub c_needed: f64,
    /// `(C t^γ)^p / Γ(pγ + 1)` with the fitted `C`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MomentReport {
    pub gamma_s: f64,
    /// `C` fitted on the first moments alone.
    pub c_fit: f64,
    /// Smallest single `C` covering every row's point estimate.
    pub c_all: f64,
    pub rows: Vec<MomentRow>,
    /// Every row satisfies `moment − k·se ≤ bound(c_fit)`.
    pub all_hold: bool,
    /// Regression slope of `log E[⟨W⟩_t]` (start-averaged) on `log t`.
    pub small_time_slope: f64,
}

fn factorial(p: u32) -> f64 {
    (1..=p).map(|i| i as f64).product()
}

/// Checks `E_x[⟨W⟩_t^p]/p! ≤ (C t^{γ_s})^p / Γ(pγ_s + 1)` for `p = 1..=p_max`
/// with one `C`, fitted from `p = 1`; rows may exceed the bound by at most
/// `k_se` standard errors.
pub fn moment_bound_check(ens: &QvEnsemble, p_max: u32, k_se: f64) -> Result<MomentReport> {
    if p_max == 0 {
        return Err(usage!("p_max must be at least 1"));
    }
    let gs = SpectralConstants::new().gamma_s;
    let mut rows = Vec::new();
    for p in 1..=p_max {
        let norm = factorial(p);
        for (ti, &t) in ens.times.iter().enumerate() {
            for (si, &x) in ens.starts.iter().enumerate() {
                let vals: Vec<f64> = ens.samples[si].iter().map(|r| pow(r[ti], p as f64) / norm).collect();
                let s = summarize(&vals);
                let c_needed = pow(gamma(p as f64 * gs + 1.0) * s.mean.max(0.0), 1.0 / p as f64) / pow(t, gs);
                rows.push(MomentRow { p, t, start: x, moment: s.mean, se: s.se, c_needed, bound: 0.0, holds: false });
            }
        }
    }
    let c_fit = rows.iter().filter(|r| r.p == 1).map(|r| r.c_needed).fold(0.0, f64::max);
    let c_all = rows.iter().map(|r| r.c_needed).fold(0.0, f64::max);
    for r in &mut rows {
        r.bound = pow(c_fit * pow(r.t, gs), r.p as f64) / gamma(r.p as f64 * gs + 1.0);
        r.holds = r.moment - k_se * r.se <= r.bound;
    }
    let (lt, lm): (Vec<f64>, Vec<f64>) = ens
        .times
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let mean = rows.iter().filter(|r| r.p == 1 && r.t == t).map(|r| r.moment).sum::<f64>() / ens.starts.len() as f64;
            let _ = ti;
            (log(t), log(mean))
        })
        .unzip();
    let small_time_slope = if lt.len() >= 2 { stats::ols_slope(&lt, &lm) } else { f64::NAN };
    Ok(MomentReport { gamma_s: gs, c_fit, c_all, all_hold: rows.iter().all(|r| r.holds), rows, small_time_slope })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MlRow {
    pub beta: f64,
    pub t: f64,
    /// `max_x E_x[e^{β⟨W⟩_t}]` over the sampled starts.
    pub lhs: f64,
    pub se: f64,
    pub argmax_start: usize,
    /// `E_{γ_s,1}(C β max(t, t^{γ_s}))`; infinite when beyond `f64`.
    pub rhs: f64,
    pub ln_rhs: f64,
    /// `ln rhs − ln lhs`.
    pub log_margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MlReport {
    pub c: f64,
    pub rows: Vec<MlRow>,
    pub all_hold: bool,
}

/// Checks `sup_x E_x[e^{β⟨W⟩_t}] ≤ E_{γ_s,1}(C β max{t, t^{γ_s}})` at every
/// `β` and ensemble time, allowing `k_se` standard errors.
pub fn mittag_leffler_bound_check(ens: &QvEnsemble, betas: &[f64], c: f64, k_se: f64) -> Result<MlReport> {
    let gs = SpectralConstants::new().gamma_s;
    let mut rows = Vec::new();
    for &beta in betas {
        if !(beta >= 0.0) {
            return Err(usage!("β must be nonnegative"));
        }
        for (ti, &t) in ens.times.iter().enumerate() {
            let mut best = (f64::NEG_INFINITY, 0.0, 0usize);
            for (si, &x) in ens.starts.iter().enumerate() {
                let logs: Vec<f64> = ens.samples[si].iter().map(|r| beta * r[ti]).collect();
                let (_, mean, se) = exp_mean(&logs);
                if mean > best.0 {
                    best = (mean, se, x);
                }
            }
            let ln_rhs = ln_mittag_leffler(gs, 1.0, c * beta * t.max(pow(t, gs)))?;
            let (lhs, se, argmax_start) = best;
            let low = lhs - k_se * se;
            rows.push(MlRow {
                beta,
                t,
                lhs,
                se,
                argmax_start,
                rhs: libm::exp(ln_rhs),
                ln_rhs,
                log_margin: ln_rhs - log(lhs),
                holds: low <= 0.0 || log(low) <= ln_rhs,
            });
        }
    }
    Ok(MlReport { c, all_hold: rows.iter().all(|r| r.holds), rows })
}

/// `E[e^{β⟨W⟩_{T∧σ_V0}}]` at `T` and `2T` on common paths.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ExpIntStability {
    pub short: ExpIntEstimate,
    pub long: ExpIntEstimate,
    /// Fraction of paths not yet absorbed at `T`.
    pub alive_at_short: f64,
    /// Mean and standard error of the pathwise difference.
    pub difference: f64,
    pub difference_se: f64,
    pub relative_change: f64,
    /// The relative change is at most `rel_tol`.
    pub stable: bool,
}

pub fn expint_stability(
    kernel: &StepKernel,
    graph: Option<&LevelGraph>,
    start: Start,
    beta: f64,
    horizon: f64,
    paths: u64,
    seed: u64,
    runner: &impl PathRunner,
    rel_tol: f64,
) -> Result<ExpIntStability> {
    let cfg = WalkConfig { level: kernel.level(), horizon: 2.0 * horizon, seed, paths, killed: true, start };
    let dt = kernel.time_step();
    // Detect survival through one extra step past T.
    let rows = quadratic_variation_at(&cfg, kernel, graph, runner, &[horizon, horizon + dt, 2.0 * horizon])?;
    let a: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let b: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let alive = rows.iter().filter(|r| r[1] > r[0]).count() as f64 / rows.len().max(1) as f64;
    let short = expint_from_samples(&a, beta, horizon, 200, seed ^ 0x5151);
    let long = expint_from_samples(&b, beta, 2.0 * horizon, 200, seed ^ 0x5152);
    let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| libm::exp(beta * y) - libm::exp(beta * x)).collect();
    let d = summarize(&diffs);
    let relative_change = d.mean / short.mean;
    Ok(ExpIntStability {
        stable: relative_change.abs() <= rel_tol && !short.unstable && !long.unstable,
        short,
        long,
        alive_at_short: alive,
        difference: d.mean,
        difference_se: d.se,
        relative_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::SequentialRunner;

    fn setup(m: u8) -> (LevelGraph, StepKernel) {
        let g = LevelGraph::build(m).unwrap();
        let k = StepKernel::build(&g);
        (g, k)
    }

    #[test]
    fn first_moment_and_fit() {
        let (g, k) = setup(3);
        let starts = coarse_starts(&g).unwrap();
        assert_eq!(starts.len(), 6);
        let ens = qv_ensemble(&k, &starts, &[0.25, 0.5, 1.0], 4000, 7, &SequentialRunner).unwrap();
        let r = moment_bound_check(&ens, 3, 3.0).unwrap();
        assert!(r.all_hold, "{r:?}");
        assert!(r.c_all >= r.c_fit);
        // E[⟨W⟩_t] ≈ t, so C ≈ Γ(1+γ) at t = 1.
        let g1 = gamma(1.0 + r.gamma_s);
        assert!(r.c_fit > 0.8 * g1 && r.c_fit < 1.3 * g1, "{} vs {g1}", r.c_fit);
        assert!((r.small_time_slope - 1.0).abs() < 0.1);
    }

    #[test]
    fn ml_bound_trivial_at_zero() {
        let (g, k) = setup(2);
        let ens = qv_ensemble(&k, &coarse_starts(&g).unwrap(), &[0.25, 1.0, 4.0], 2000, 1, &SequentialRunner).unwrap();
        let c = moment_bound_check(&ens, 1, 3.0).unwrap().c_fit;
        let r = mittag_leffler_bound_check(&ens, &[0.0, 0.5, 1.0], c, 3.0).unwrap();
        for row in r.rows.iter().filter(|r| r.beta == 0.0) {
            assert!((row.lhs - 1.0).abs() < 1e-15 && (row.rhs - 1.0).abs() < 1e-15);
        }
        assert!(r.all_hold, "{r:?}");
    }

    #[test]
    fn killed_expint_settles() {
        let (g, k) = setup(3);
        let s = expint_stability(&k, Some(&g), Start::Stationary, 0.25, 2.0, 4000, 3, &SequentialRunner, 0.01).unwrap();
        assert!(s.difference >= 0.0 && s.alive_at_short < 0.01);
        assert!(s.stable, "{s:?}");
    }
}
