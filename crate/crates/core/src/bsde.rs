//! Backward SDEs on the level-`m` chain.
//!
//! `dY = −g(Y) dt − f(Y, Z) d⟨W⟩ + Z dW`, with terminal data `Ψ` built from a
//! boundary function `φ(t, ·)` on `V_0` and a terminal table `ψ` on `V_m`.
//! Conditional expectations are exact sums over the (at most four)
//! neighbours, so the only approximation left is the time grid.

use alloc::string::String;
use alloc::vec::Vec;

use libm::{exp, fabs, log, sqrt};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::driver::Driver;
use crate::ensemble::PathRunner;
use crate::error::{usage, Error, Result};
use crate::kernel::StepKernel;
use crate::stats::{self, uniform_unit};
use crate::walk::{steps_for, walk_path, PathSample, StartLaw};

/// Boundary data `φ(t, p_i)`, affine in time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Boundary {
    pub value: [f64; 3],
    #[cfg_attr(feature = "serde", serde(default))]
    pub rate: [f64; 3],
}

impl Boundary {
    pub fn constant(value: [f64; 3]) -> Self {
        Boundary { value, rate: [0.0; 3] }
    }

    pub fn zero() -> Self {
        Self::constant([0.0; 3])
    }

    pub fn eval(&self, t: f64, corner: usize) -> f64 {
        self.value[corner] + self.rate[corner] * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Duration {
    /// Deterministic horizon `T` on the reflected walk.
    Fixed,
    /// `τ = T ∧ σ_V0`; `Y` equals `φ` on `V_0`.
    Killed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Scheme {
    /// Driver evaluated at `E[Y_{k+1} | x]`.
    Explicit,
    /// Driver evaluated at the implicit `Y_k`, solved by inner fixed point.
    PicardInStep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BetaWeights {
    pub beta0: f64,
    pub beta1: f64,
}

impl BetaWeights {
    pub fn new(beta0: f64, beta1: f64) -> Result<Self> {
        if !(beta0 >= 1.0 && beta1 >= 1.0) {
            return Err(usage!("β = ({beta0}, {beta1}) must satisfy β0, β1 ≥ 1"));
        }
        Ok(BetaWeights { beta0, beta1 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsdeProblem {
    pub driver: Driver,
    /// `ψ` on every vertex of `V_m`.
    pub terminal: Vec<f64>,
    pub boundary: Boundary,
    pub horizon: f64,
    pub duration: Duration,
    /// Declared `(K0, K1)`; defaults to the constants of the driver laws.
    pub declared: Option<(f64, f64)>,
    /// Monotonicity constants `(κ0, κ1)`.
    pub kappa: Option<(f64, f64)>,
    /// Overrides the walk's `Δt` per step.
    pub time_step: Option<f64>,
}

impl BsdeProblem {
    pub fn new(driver: Driver, terminal: Vec<f64>, horizon: f64, duration: Duration) -> Self {
        BsdeProblem {
            driver,
            terminal,
            boundary: Boundary::zero(),
            horizon,
            duration,
            declared: None,
            kappa: None,
            time_step: None,
        }
    }

    pub fn constants(&self) -> (f64, f64) {
        self.declared.unwrap_or((self.driver.k0(), self.driver.k1()))
    }

    pub fn grid(&self, kernel: &StepKernel) -> TimeGrid {
        TimeGrid::new(self.horizon, self.time_step.unwrap_or(kernel.time_step()))
    }

    /// `Ψ` on the terminal layer: `ψ` off `V_0`, `φ(T, ·)` on it when killed.
    pub fn terminal_layer(&self) -> Vec<f64> {
        let mut y = self.terminal.clone();
        if self.duration == Duration::Killed {
            for b in 0..3.min(y.len()) {
                y[b] = self.boundary.eval(self.horizon, b);
            }
        }
        y
    }

    fn validate(&self, kernel: &StepKernel) -> Result<TimeGrid> {
        if self.terminal.len() != kernel.vertex_count() {
            return Err(usage!("terminal table has {} values for {} vertices", self.terminal.len(), kernel.vertex_count()));
        }
        if !(self.horizon > 0.0) {
            return Err(usage!("horizon must be positive"));
        }
        self.driver.validate()?;
        let grid = self.grid(kernel);
        if !(grid.dt > 0.0) {
            return Err(usage!("time step must be positive"));
        }
        let (k0, _) = self.constants();
        if grid.dt * k0 >= 1.0 {
            return Err(usage!("Δt·K0 = {} violates the stability guard Δt·K0 < 1", grid.dt * k0));
        }
        if let Some((k0, k1)) = self.declared {
            if k0 < 0.0 || k1 < 0.0 {
                return Err(usage!("declared Lipschitz constants must be nonnegative"));
            }
        }
        Ok(grid)
    }
}

/// Layers `t_k = T − (K − k)Δt`, `k = 0..=K`, with `K = ⌈T/Δt⌉`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TimeGrid {
    pub horizon: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, dt: f64) -> Self {
        TimeGrid { horizon, dt, steps: steps_for(horizon, dt) }
    }

    pub fn time(&self, k: usize) -> f64 {
        self.horizon - (self.steps - k) as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Layer whose time is closest to `t`.
    pub fn layer_near(&self, t: f64) -> usize {
        let k = libm::round((t - self.time(0)) / self.dt);
        (k.max(0.0) as usize).min(self.steps)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BsdeSolution {
    pub level: u8,
    pub grid: TimeGrid,
    pub scheme: Scheme,
    /// `Y[k][x]` for `k = 0..=K`.
    pub y: Vec<Vec<f64>>,
    /// `Z[k][x]` for `k = 0..K`; the terminal layer is zero.
    pub z: Vec<Vec<f64>>,
    /// Largest inner iteration count (picard-in-step) or outer count (Picard).
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// `(E[Y_{k+1} | x], E[Y_{k+1} ΔW | x] / Δ⟨W⟩(x))`.
#[inline]
fn conditional(kernel: &StepKernel, next: &[f64], x: usize) -> (f64, f64) {
    let p = kernel.probability(x);
    let (mut ey, mut ez) = (0.0, 0.0);
    for (&y, &dw) in kernel.neighbors(x).iter().zip(kernel.increments(x)) {
        let v = next[y as usize];
        ey += v;
        ez += v * dw;
    }
    let qv = kernel.qv(x);
    (p * ey, if qv > 0.0 { p * ez / qv } else { 0.0 })
}

const INNER_MAX: usize = 50;
const INNER_TOL: f64 = 1e-12;

/// Exact dynamic programming over the time-vertex grid.
pub fn solve_dp(p: &BsdeProblem, kernel: &StepKernel, scheme: Scheme) -> Result<BsdeSolution> {
    let grid = p.validate(kernel)?;
    let n = kernel.vertex_count();
    let mut warnings = Vec::new();
    if let Some((k0, k1)) = p.declared {
        warnings.extend(p.driver.lipschitz_spot_check(k0, k1, 256, 0x5eed));
    }
    let killed = p.duration == Duration::Killed;
    let d = &p.driver;
    let mut y = alloc::vec![Vec::new(); grid.steps + 1];
    let mut z = alloc::vec![alloc::vec![0.0; n]; grid.steps + 1];
    y[grid.steps] = p.terminal_layer();
    let mut max_inner = 0;
    for k in (0..grid.steps).rev() {
        let t = grid.time(k);
        let mut layer = alloc::vec![0.0; n];
        for x in 0..n {
            if killed && kernel.is_boundary(x) {
                layer[x] = p.boundary.eval(t, x);
                continue;
            }
            let (ey, zk) = conditional(kernel, &y[k + 1], x);
            let qv = kernel.qv(x);
            let fz = d.f_z.eval(zk);
            let step = |yv: f64| ey + d.g(yv) * grid.dt + (d.f_y.eval(yv) + fz) * qv;
            layer[x] = match scheme {
                Scheme::Explicit => step(ey),
                Scheme::PicardInStep => {
                    let mut cur = step(ey);
                    let mut it = 1;
                    loop {
                        let next = step(cur);
                        let diff = fabs(next - cur);
                        cur = next;
                        it += 1;
                        if diff <= INNER_TOL * (1.0 + fabs(cur)) {
                            break;
                        }
                        if it >= INNER_MAX {
                            return Err(Error::Scheme(alloc::format!(
                                "inner fixed point at layer {k}, vertex {x} did not converge in {INNER_MAX} iterations (last change {diff:e})"
                            )));
                        }
                    }
                    max_inner = max_inner.max(it);
                    cur
                }
            };
            z[k][x] = zk;
        }
        y[k] = layer;
    }
    Ok(BsdeSolution { level: kernel.level(), grid, scheme, y, z, iterations: max_inner, warnings })
}

/// `(y, z)` read along a recorded path: `y_j = Y[j][X_j]`, `z_j = Z[j][X_j]`.
pub fn along_path(y: &[Vec<f64>], z: &[Vec<f64>], path: &PathSample) -> (Vec<f64>, Vec<f64>) {
    let len = path.vertices.len().min(y.len());
    let ys = (0..len).map(|j| y[j][path.vertices[j] as usize]).collect();
    let zs = (0..len).map(|j| z[j][path.vertices[j] as usize]).collect();
    (ys, zs)
}

/// Empirical `V^β` norm and its logarithm (the squared norm may overflow).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct VbetaNorm {
    pub log_squared: f64,
    pub norm: f64,
}

/// `E[sup_k (y_k² w_k + Σ_{j≥k} y_j² w_j Δt + Σ_{j≥k} (y_j² + z_j²) w_j Δ⟨W⟩_j)]`
/// with `w_j = e^{2β0 t_j + 2β1 ⟨W⟩_j}`, accumulated in the log domain.
///
/// `values[i]` holds `(y, z)` along `paths[i]`; both start at step 0.
pub fn vbeta_norm(paths: &[PathSample], values: &[(Vec<f64>, Vec<f64>)], dt: f64, beta: BetaWeights) -> Result<VbetaNorm> {
    if paths.len() != values.len() || paths.is_empty() {
        return Err(usage!("need one (y, z) pair per path"));
    }
    let logadd = |a: f64, b: f64| -> f64 {
        if a == f64::NEG_INFINITY {
            return b;
        }
        if b == f64::NEG_INFINITY {
            return a;
        }
        let m = a.max(b);
        m + log(exp(a - m) + exp(b - m))
    };
    let mut per_path = Vec::with_capacity(paths.len());
    for (path, (ys, zs)) in paths.iter().zip(values) {
        let len = ys.len().min(path.cum_qv.len());
        let lw = |j: usize| 2.0 * beta.beta0 * j as f64 * dt + 2.0 * beta.beta1 * path.cum_qv[j];
        let ln = |v: f64| if v > 0.0 { log(v) } else { f64::NEG_INFINITY };
        let mut tail = f64::NEG_INFINITY;
        let mut best = f64::NEG_INFINITY;
        for j in (0..len).rev() {
            if j + 1 < len {
                let dq = path.dqv[j];
                let integrand = ys[j] * ys[j] * dt + (ys[j] * ys[j] + zs[j] * zs[j]) * dq;
                tail = logadd(tail, ln(integrand) + lw(j));
            }
            best = best.max(logadd(ln(ys[j] * ys[j]) + lw(j), tail));
        }
        per_path.push(best);
    }
    let log_squared = if per_path.iter().all(|v| *v == f64::NEG_INFINITY) {
        f64::NEG_INFINITY
    } else {
        stats::log_sum_exp(&per_path) - log(paths.len() as f64)
    };
    Ok(VbetaNorm { log_squared, norm: exp(0.5 * log_squared) })
}

/// `K_β = √(K0²/β0 + K1²/β1)`.
pub fn contraction_constant(k0: f64, k1: f64, beta: BetaWeights) -> f64 {
    sqrt(k0 * k0 / beta.beta0 + k1 * k1 / beta.beta1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicardInit {
    Zero,
    /// `Y⁰` = the driverless solution (Ψ propagated by conditional expectation).
    Propagated,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PicardRun {
    pub last: BsdeSolution,
    /// Kept only when requested.
    pub iterates: Vec<BsdeSolution>,
    /// `‖(Y^{n+1} − Yⁿ, Z^{n+1} − Zⁿ)‖_{V^β}` for `n = 0, 1, …`.
    pub distances: Vec<f64>,
    /// Successive distance ratios.
    pub ratios: Vec<f64>,
    pub k_beta: f64,
}

/// Frozen-driver linear solve: one Picard step from `(yn, zn)`.
fn picard_step(p: &BsdeProblem, kernel: &StepKernel, grid: &TimeGrid, yn: &[Vec<f64>], zn: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = kernel.vertex_count();
    let killed = p.duration == Duration::Killed;
    let mut y = alloc::vec![Vec::new(); grid.steps + 1];
    let mut z = alloc::vec![alloc::vec![0.0; n]; grid.steps + 1];
    y[grid.steps] = p.terminal_layer();
    for k in (0..grid.steps).rev() {
        let t = grid.time(k);
        let mut layer = alloc::vec![0.0; n];
        for x in 0..n {
            if killed && kernel.is_boundary(x) {
                layer[x] = p.boundary.eval(t, x);
                continue;
            }
            let (ey, zk) = conditional(kernel, &y[k + 1], x);
            let (yo, zo) = (yn[k][x], zn[k][x]);
            layer[x] = ey + p.driver.g(yo) * grid.dt + p.driver.f(yo, zo) * kernel.qv(x);
            z[k][x] = zk;
        }
        y[k] = layer;
    }
    (y, z)
}

/// Picard iteration of the existence proof, distances measured along `paths`.
///
/// Paths must be recorded on the same kernel and start at `t_0`.
pub fn picard_iterate(
    p: &BsdeProblem,
    kernel: &StepKernel,
    n_iters: usize,
    init: PicardInit,
    paths: &[PathSample],
    beta: BetaWeights,
    keep_iterates: bool,
) -> Result<PicardRun> {
    let grid = p.validate(kernel)?;
    let n = kernel.vertex_count();
    let zero = || alloc::vec![alloc::vec![0.0; n]; grid.steps + 1];
    let (mut y, mut z) = match init {
        PicardInit::Zero => (zero(), zero()),
        PicardInit::Propagated => {
            let mut q = p.clone();
            q.driver = Driver::zero();
            q.declared = None;
            let s = solve_dp(&q, kernel, Scheme::Explicit)?;
            (s.y, zero())
        }
    };
    let (k0, k1) = p.constants();
    let mut distances = Vec::with_capacity(n_iters);
    let mut iterates = Vec::new();
    for _ in 0..n_iters {
        let (yn, zn) = picard_step(p, kernel, &grid, &y, &z);
        let dy: Vec<Vec<f64>> = yn.iter().zip(&y).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u - v).collect()).collect();
        let dz: Vec<Vec<f64>> = zn.iter().zip(&z).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u - v).collect()).collect();
        let along: Vec<_> = paths.iter().map(|path| along_path(&dy, &dz, path)).collect();
        distances.push(vbeta_norm(paths, &along, grid.dt, beta)?.norm);
        y = yn;
        z = zn;
        if keep_iterates {
            iterates.push(BsdeSolution {
                level: kernel.level(),
                grid,
                scheme: Scheme::PicardInStep,
                y: y.clone(),
                z: z.clone(),
                iterations: iterates.len() + 1,
                warnings: Vec::new(),
            });
        }
    }
    let ratios = distances
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    let last = BsdeSolution { level: kernel.level(), grid, scheme: Scheme::PicardInStep, y, z, iterations: n_iters, warnings: Vec::new() };
    Ok(PicardRun { last, iterates, distances, ratios, k_beta: contraction_constant(k0, k1, beta) })
}

/// Exact chain solution of the linear BSDE `g = a·y`, `f = b·y + c·z`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LinearExact {
    pub grid: TimeGrid,
    /// `Y₀(x) = E_x[Φ_τ Ψ(τ, X_τ)]` with `Φ = Π(1 + aΔt + bΔ⟨W⟩ + cΔW)`.
    pub y0: Vec<f64>,
    /// `Z₀ = ζ − c·Y₀` where `ζ` represents the martingale `E[Φ_τ Ψ | F_t]`.
    pub z0: Vec<f64>,
}

fn linear_coefficients(p: &BsdeProblem) -> Result<(f64, f64, f64)> {
    p.driver.as_linear().ok_or_else(|| usage!("the closed form needs g = a·y and f = b·y + c·z"))
}

/// Propagates point masses forward from every start, independently of the
/// backward recursion, and reads off `E_x[Φ_τ Ψ(τ, X_τ)]`.
pub fn linear_exact(p: &BsdeProblem, kernel: &StepKernel) -> Result<LinearExact> {
    let grid = p.validate(kernel)?;
    let (a, b, c) = linear_coefficients(p)?;
    let n = kernel.vertex_count();
    let killed = p.duration == Duration::Killed;
    let terminal = p.terminal_layer();
    // Value of Φ-weighted data for a walk started at `x` at layer `from`.
    let value = |x: usize, from: usize| -> f64 {
        if killed && kernel.is_boundary(x) {
            return p.boundary.eval(grid.time(from), x);
        }
        let mut w = alloc::vec![0.0; n];
        let mut next = alloc::vec![0.0; n];
        w[x] = 1.0;
        let mut absorbed = 0.0;
        for k in from..grid.steps {
            next.iter_mut().for_each(|v| *v = 0.0);
            for v in 0..n {
                if w[v] == 0.0 {
                    continue;
                }
                let pr = kernel.probability(v);
                let base = 1.0 + a * grid.dt + b * kernel.qv(v);
                for (&y, &dw) in kernel.neighbors(v).iter().zip(kernel.increments(v)) {
                    next[y as usize] += w[v] * pr * (base + c * dw);
                }
            }
            if killed {
                for bdy in 0..3 {
                    absorbed += next[bdy] * p.boundary.eval(grid.time(k + 1), bdy);
                    next[bdy] = 0.0;
                }
            }
            core::mem::swap(&mut w, &mut next);
        }
        absorbed + w.iter().zip(&terminal).map(|(m, t)| m * t).sum::<f64>()
    };
    let y0: Vec<f64> = (0..n).map(|x| value(x, 0)).collect();
    let y1: Vec<f64> = if grid.steps > 0 { (0..n).map(|x| value(x, 1)).collect() } else { y0.clone() };
    let z0 = (0..n)
        .map(|x| {
            if (killed && kernel.is_boundary(x)) || grid.steps == 0 {
                return 0.0;
            }
            let pr = kernel.probability(x);
            let base = 1.0 + a * grid.dt + b * kernel.qv(x);
            let cov: f64 = kernel
                .neighbors(x)
                .iter()
                .zip(kernel.increments(x))
                .map(|(&y, &dw)| pr * (base + c * dw) * y1[y as usize] * dw)
                .sum();
            cov / kernel.qv(x) - c * y0[x]
        })
        .collect();
    Ok(LinearExact { grid, y0, z0 })
}

/// Monte-Carlo estimate of `Y₀` for the linear BSDE.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LinearMonteCarlo {
    pub mean: f64,
    pub se: f64,
    /// Same expectation with the continuous-time exponential
    /// `exp[at + (b − c²/2)⟨W⟩ + cW]`, reported as a diagnostic.
    pub exp_form_mean: f64,
    pub exp_form_se: f64,
    pub unstable: bool,
}

pub fn linear_monte_carlo(
    p: &BsdeProblem,
    kernel: &StepKernel,
    law: &StartLaw,
    paths: u64,
    seed: u64,
    runner: &impl PathRunner,
) -> Result<LinearMonteCarlo> {
    let grid = p.validate(kernel)?;
    let (a, b, c) = linear_coefficients(p)?;
    let killed = p.duration == Duration::Killed;
    let terminal = p.terminal_layer();
    if let StartLaw::Point(x) = law {
        if killed && kernel.is_boundary(*x) {
            let v = p.boundary.eval(grid.time(0), *x);
            return Ok(LinearMonteCarlo { mean: v, se: 0.0, exp_form_mean: v, exp_form_se: 0.0, unstable: false });
        }
    }
    let samples = runner.map(paths, |i| {
        let mut phi = 1.0;
        let end = walk_path(kernel, law, killed, grid.steps, seed, i, |st| {
            phi *= 1.0 + a * grid.dt + b * st.dqv + c * st.dw;
        });
        let (t, data) = match end.hit_step {
            Some(k) => (k, p.boundary.eval(grid.time(k), end.end)),
            None => (end.steps, terminal[end.end]),
        };
        let expo = exp(a * t as f64 * grid.dt + (b - 0.5 * c * c) * end.qv + c * end.w);
        (phi * data, expo * data, log(fabs(phi * data).max(f64::MIN_POSITIVE)))
    });
    let disc: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let cont: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let logs: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let s1 = stats::summarize(&disc);
    let s2 = stats::summarize(&cont);
    Ok(LinearMonteCarlo {
        mean: s1.mean,
        se: s1.se,
        exp_form_mean: s2.mean,
        exp_form_se: s2.se,
        unstable: stats::top_share(&logs, 0.01) > 0.5,
    })
}

/// Worst margins of the one-sided conditions (A'.4)–(A'.5), normalised by
/// `|y − ȳ|²`, and of (A'.7) when `β` is given. Nonnegative means satisfied.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MonotonicityReport {
    pub g_margin: f64,
    pub f_margin: f64,
    pub beta_margins: Option<(f64, f64)>,
}

pub fn monotonicity_check(p: &BsdeProblem, beta: Option<BetaWeights>, samples: usize, seed: u64) -> Result<MonotonicityReport> {
    let (kappa0, kappa1) = p.kappa.ok_or_else(|| usage!("monotonicity check needs declared κ0, κ1"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || (2.0 * uniform_unit(&mut rng) - 1.0) * 10.0;
    let d = &p.driver;
    let (mut g_margin, mut f_margin) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..samples {
        let (y, yb, z) = (draw(), draw(), draw());
        let dy = y - yb;
        if dy == 0.0 {
            continue;
        }
        let sq = dy * dy;
        g_margin = g_margin.min((-kappa0 * sq - dy * (d.g(y) - d.g(yb))) / sq);
        f_margin = f_margin.min((-kappa1 * sq - dy * (d.f(y, z) - d.f(yb, z))) / sq);
    }
    let k1 = p.constants().1;
    let beta_margins = beta.map(|b| (b.beta0 - kappa0, b.beta1 - kappa1 + 0.5 * k1 * k1));
    let tol = -1e-12;
    if g_margin < tol || f_margin < tol || beta_margins.is_some_and(|(m0, m1)| m0 <= 0.0 || m1 <= 0.0) {
        return Err(Error::DeclaredConstant(alloc::format!(
            "monotonicity violated: g margin {g_margin:e}, f margin {f_margin:e}, β margins {beta_margins:?}"
        )));
    }
    Ok(MonotonicityReport { g_margin, f_margin, beta_margins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::Law;
    use crate::ensemble::SequentialRunner;
    use crate::graph::LevelGraph;
    use crate::walk::{simulate_paths, Start, WalkConfig};

    fn setup(m: u8) -> (LevelGraph, StepKernel) {
        let g = LevelGraph::build(m).unwrap();
        let k = StepKernel::build(&g);
        (g, k)
    }

    fn bump(g: &LevelGraph) -> Vec<f64> {
        g.vertices()
            .iter()
            .map(|v| {
                let (x, y) = v.coord.to_f64();
                let r2 = (x - 0.5).powi(2) + (y - 3f64.sqrt() / 4.0).powi(2);
                libm::exp(-r2 / 0.08)
            })
            .collect()
    }

    #[test]
    fn constant_terminal_is_preserved() {
        let (g, k) = setup(3);
        let p = BsdeProblem::new(Driver::zero(), alloc::vec![2.5; g.vertex_count()], 0.3, Duration::Fixed);
        let s = solve_dp(&p, &k, Scheme::Explicit).unwrap();
        for (yl, zl) in s.y.iter().zip(&s.z) {
            assert!(yl.iter().all(|v| (v - 2.5).abs() < 1e-13));
            assert!(zl.iter().all(|v| v.abs() < 1e-11));
        }
    }

    #[test]
    fn driverless_is_conditional_expectation() {
        let (g, k) = setup(2);
        let psi = bump(&g);
        let p = BsdeProblem::new(Driver::zero(), psi.clone(), 0.1, Duration::Fixed);
        let s = solve_dp(&p, &k, Scheme::Explicit).unwrap();
        // Oracle: the transition matrix applied K times.
        let mut v = psi;
        for _ in 0..s.grid.steps {
            v = (0..k.vertex_count())
                .map(|x| k.neighbors(x).iter().map(|&y| v[y as usize]).sum::<f64>() * k.probability(x))
                .collect();
        }
        for x in 0..k.vertex_count() {
            assert!((s.y[0][x] - v[x]).abs() < 1e-14);
            assert!(s.y[0][x] >= 0.0);
        }
    }

    #[test]
    fn terminal_and_boundary_rows() {
        let (g, k) = setup(3);
        let mut p = BsdeProblem::new(Driver::linear(0.2, 0.1, 0.3), bump(&g), 0.5, Duration::Killed);
        p.boundary = Boundary { value: [0.1, 0.2, 0.3], rate: [1.0, 0.0, -1.0] };
        let s = solve_dp(&p, &k, Scheme::PicardInStep).unwrap();
        assert_eq!(s.y[s.grid.steps][5], p.terminal[5]);
        for kk in 0..=s.grid.steps {
            for b in 0..3 {
                assert_eq!(s.y[kk][b], p.boundary.eval(s.grid.time(kk), b));
            }
        }
    }

    #[test]
    fn explicit_matches_closed_form_exactly() {
        for duration in [Duration::Fixed, Duration::Killed] {
            let (g, k) = setup(3);
            let mut p = BsdeProblem::new(Driver::linear(0.5, 0.3, 0.4), bump(&g), 1.0, duration);
            p.boundary = Boundary::constant([0.0, 0.1, 0.2]);
            let s = solve_dp(&p, &k, Scheme::Explicit).unwrap();
            let e = linear_exact(&p, &k).unwrap();
            for x in 0..k.vertex_count() {
                assert!((s.y[0][x] - e.y0[x]).abs() < 1e-10, "{duration:?} x={x}");
            }
            // Z₀ from the representation formula stays close to the DP covariation.
            for x in 3..k.vertex_count() {
                assert!((s.z[0][x] - e.z0[x]).abs() < 0.05 * (1.0 + s.z[0][x].abs()), "x={x}: {} {}", s.z[0][x], e.z0[x]);
            }
        }
    }

    #[test]
    fn deterministic_exponential() {
        let (g, k) = setup(2);
        let p = BsdeProblem::new(Driver::linear(1.0, 0.0, 0.0), alloc::vec![1.0; g.vertex_count()], 1.0, Duration::Fixed);
        let e = linear_exact(&p, &k).unwrap();
        let grid = p.grid(&k);
        let discrete = (1.0 + grid.dt).powi(grid.steps as i32);
        assert!((e.y0[7] - discrete).abs() < 1e-12);
        let t = grid.steps as f64 * grid.dt;
        let rel = (t.exp() - e.y0[7]) / t.exp();
        assert!(rel > 0.0 && rel < 0.5 * t * grid.dt + 1e-12, "{rel}");
    }

    #[test]
    fn homogeneity() {
        let (g, k) = setup(3);
        let p = BsdeProblem::new(Driver::linear(0.5, -0.3, 0.4), bump(&g), 0.5, Duration::Killed);
        let mut p2 = p.clone();
        p2.terminal.iter_mut().for_each(|v| *v *= 2.0);
        let s = solve_dp(&p, &k, Scheme::Explicit).unwrap();
        let s2 = solve_dp(&p2, &k, Scheme::Explicit).unwrap();
        for kk in [0, s.grid.steps / 2] {
            for x in 0..k.vertex_count() {
                assert!((s2.y[kk][x] - 2.0 * s.y[kk][x]).abs() < 1e-12);
                assert!((s2.z[kk][x] - 2.0 * s.z[kk][x]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stability_guard() {
        let (g, k) = setup(0);
        let p = BsdeProblem::new(Driver::linear(2.0, 0.0, 0.0), alloc::vec![0.0; g.vertex_count()], 1.0, Duration::Fixed);
        assert!(matches!(solve_dp(&p, &k, Scheme::Explicit), Err(Error::Usage(_))));
    }

    fn paths(k: &StepKernel, g: &LevelGraph, horizon: f64, n: u64) -> Vec<PathSample> {
        let mut cfg = WalkConfig::new(k.level(), Start::Stationary);
        cfg.paths = n;
        cfg.horizon = horizon;
        cfg.seed = 11;
        simulate_paths(&cfg, k, Some(g), &SequentialRunner).unwrap()
    }

    #[test]
    fn picard_converges_to_implicit_scheme() {
        let (g, k) = setup(3);
        let d = Driver { g: Law::linear(-0.5), f_y: Law::Sin { amp: 0.5 }, f_z: Law::Sin { amp: 1.0 } };
        let p = BsdeProblem::new(d, bump(&g), 1.0, Duration::Fixed);
        let ps = paths(&k, &g, 1.0, 50);
        let beta = BetaWeights::new(36.0, 36.0).unwrap();
        let a = picard_iterate(&p, &k, 40, PicardInit::Zero, &ps, beta, false).unwrap();
        let b = picard_iterate(&p, &k, 40, PicardInit::Propagated, &ps, beta, false).unwrap();
        let dp = solve_dp(&p, &k, Scheme::PicardInStep).unwrap();
        for x in 0..k.vertex_count() {
            assert!((a.last.y[0][x] - b.last.y[0][x]).abs() < 1e-9);
            assert!((a.last.y[0][x] - dp.y[0][x]).abs() < 1e-10);
        }
        assert!((a.k_beta * 3.0 * 2f64.sqrt() - 1.0).abs() < 1e-12);
        assert!(a.ratios.iter().all(|r| *r <= 1.0), "{:?}", a.ratios);
    }

    #[test]
    fn zero_problem_has_zero_iterates() {
        let (g, k) = setup(2);
        let p = BsdeProblem::new(Driver::zero(), alloc::vec![0.0; g.vertex_count()], 0.2, Duration::Fixed);
        let ps = paths(&k, &g, 0.2, 5);
        let r = picard_iterate(&p, &k, 3, PicardInit::Zero, &ps, BetaWeights::new(1.0, 1.0).unwrap(), true).unwrap();
        assert_eq!(r.iterates.len(), 3);
        assert!(r.iterates.iter().all(|s| s.y.iter().flatten().all(|v| *v == 0.0)));
        assert!(r.distances.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn vbeta_examples() {
        let (g, k) = setup(1);
        let ps = paths(&k, &g, 1.0, 1);
        let beta = BetaWeights::new(1.0, 1.0).unwrap();
        let len = ps[0].vertices.len();
        let zero = alloc::vec![(alloc::vec![0.0; len], alloc::vec![0.0; len])];
        assert_eq!(vbeta_norm(&ps, &zero, k.time_step(), beta).unwrap().norm, 0.0);

        // y ≡ 1, z ≡ 0: hand Riemann sum along the single path.
        let ones = alloc::vec![(alloc::vec![1.0; len], alloc::vec![0.0; len])];
        let dt = k.time_step();
        let path = &ps[0];
        let w = |j: usize| (2.0 * j as f64 * dt + 2.0 * path.cum_qv[j]).exp();
        let mut best: f64 = 0.0;
        for kk in 0..len {
            let tail: f64 = (kk..len - 1).map(|j| w(j) * (dt + path.dqv[j])).sum();
            best = best.max(w(kk) + tail);
        }
        let got = vbeta_norm(&ps, &ones, dt, beta).unwrap().norm;
        assert!((got * got / best - 1.0).abs() < 1e-10);
        // Continuous-time value with ⟨W⟩ ≈ t: e⁴ + 2∫e^{4r}dr = e⁴ + (e⁴ − 1)/2.
        let cont = 4f64.exp() + (4f64.exp() - 1.0) / 2.0;
        assert!(got * got > 0.2 * cont && got * got < 5.0 * cont);

        let big = BetaWeights::new(2.0, 3.0).unwrap();
        assert!(vbeta_norm(&ps, &ones, dt, big).unwrap().norm > got);
    }

    #[test]
    fn contraction_constant_examples() {
        let b = BetaWeights::new(36.0, 36.0).unwrap();
        let kb = contraction_constant(1.0, 1.0, b);
        assert!((kb - 1.0 / 18f64.sqrt()).abs() < 1e-15);
        assert!((3.0 * 2f64.sqrt() * kb - 1.0).abs() < 1e-15);
        let b = BetaWeights::new(4.0, 9.0).unwrap();
        assert!((contraction_constant(0.0, 2.0, b) - 2.0 / 3.0).abs() < 1e-15);
        assert!(contraction_constant(1.0, 1.0, BetaWeights::new(1e12, 1e12).unwrap()) < 1e-5);
        assert!(BetaWeights::new(0.5, 2.0).is_err());
    }

    #[test]
    fn monotonicity_examples() {
        let mk = |g: Law, k0: f64| {
            let mut p = BsdeProblem::new(Driver { g, f_y: Law::ZERO, f_z: Law::ZERO }, Vec::new(), 1.0, Duration::Fixed);
            p.kappa = Some((k0, 0.0));
            p
        };
        let r = monotonicity_check(&mk(Law::linear(-1.0), 1.0), None, 500, 1).unwrap();
        assert!(r.g_margin.abs() < 1e-12);
        assert!(monotonicity_check(&mk(Law::Sin { amp: 1.0 }, -1.0), None, 500, 1).is_ok());
        assert!(matches!(monotonicity_check(&mk(Law::linear(2.0), 1.0), None, 500, 1), Err(Error::DeclaredConstant(_))));
        let b = BetaWeights::new(1.0, 1.0).unwrap();
        assert!(monotonicity_check(&mk(Law::linear(-2.0), 1.0), Some(b), 500, 1).is_err());
    }

    #[test]
    fn killed_dp_matches_monte_carlo() {
        let (g, k) = setup(3);
        let mut p = BsdeProblem::new(Driver::linear(0.5, 0.3, 0.4), bump(&g), 1.0, Duration::Killed);
        p.boundary = Boundary::constant([0.2, 0.0, 0.1]);
        let s = solve_dp(&p, &k, Scheme::Explicit).unwrap();
        let x = 10;
        let mc = linear_monte_carlo(&p, &k, &StartLaw::Point(x), 20_000, 3, &SequentialRunner).unwrap();
        assert!((mc.mean - s.y[0][x]).abs() < 3.0 * mc.se + 1e-12, "{} vs {} ± {}", mc.mean, s.y[0][x], mc.se);
    }
}
