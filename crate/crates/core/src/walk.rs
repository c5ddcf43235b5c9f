//! Random-walk approximation of Brownian motion on `V_m`, with the
//! increments of `W` and `⟨W⟩` accumulated along each path.
//!
//! Path `i` draws from its own ChaCha8 stream `(seed, i)`, so any subset of
//! paths can be regenerated independently and in any order.

use alloc::vec::Vec;

use libm::{ceil, exp, round};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cell::CellWord;
use crate::ensemble::PathRunner;
use crate::error::{usage, Error, Result};
use crate::graph::LevelGraph;
use crate::kernel::StepKernel;
use crate::stats::{self, Summary};

/// Initial law `λ` of the walk.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Vertex(usize),
    /// Uniform over the three corners of a cell.
    Cell(CellWord),
    /// Arbitrary weights over `V_m`.
    Weights(Vec<f64>),
    /// The stationary law of the reflected walk, i.e. the lumped `μ`.
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    pub level: u8,
    pub horizon: f64,
    pub seed: u64,
    pub paths: u64,
    /// Absorb at `V_0` (the process `X⁰` killed at `σ_V0`).
    pub killed: bool,
    pub start: Start,
}

impl WalkConfig {
    pub fn new(level: u8, start: Start) -> Self {
        WalkConfig { level, horizon: 1.0, seed: 0, paths: 1, killed: false, start }
    }

    /// `⌈T / Δt⌉`.
    pub fn steps(&self, kernel: &StepKernel) -> usize {
        steps_for(self.horizon, kernel.time_step())
    }
}

pub(crate) fn steps_for(horizon: f64, dt: f64) -> usize {
    ceil(horizon / dt - 1e-9).max(0.0) as usize
}

/// Sampler for the initial vertex.
#[derive(Debug, Clone)]
pub enum StartLaw {
    Point(usize),
    Table { cumulative: Vec<f64>, ids: Vec<usize> },
}

impl StartLaw {
    pub fn resolve(start: &Start, kernel: &StepKernel, graph: Option<&LevelGraph>) -> Result<Self> {
        let n = kernel.vertex_count();
        let table = |weights: Vec<(usize, f64)>| -> Result<StartLaw> {
            let total: f64 = weights.iter().map(|w| w.1).sum();
            if weights.iter().any(|w| !(w.1 >= 0.0)) || !(total > 0.0) {
                return Err(usage!("initial weights must be nonnegative with a positive sum"));
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(usage!("initial weights sum to {total}, expected 1"));
            }
            let mut acc = 0.0;
            let mut cumulative = Vec::with_capacity(weights.len());
            let mut ids = Vec::with_capacity(weights.len());
            for (id, w) in weights.into_iter().filter(|w| w.1 > 0.0) {
                acc += w;
                cumulative.push(acc);
                ids.push(id);
            }
            Ok(StartLaw::Table { cumulative, ids })
        };
        match start {
            Start::Vertex(v) if *v < n => Ok(StartLaw::Point(*v)),
            Start::Vertex(v) => Err(usage!("start vertex {v} not in V_{}", kernel.level())),
            Start::Cell(w) => {
                let g = graph.ok_or_else(|| usage!("a cell start needs the level graph"))?;
                let c = g.cell_corners(w)?;
                table(c.iter().map(|&v| (v, 1.0 / 3.0)).collect())
            }
            Start::Weights(w) if w.len() == n => table(w.iter().copied().enumerate().collect()),
            Start::Weights(w) => Err(usage!("{} initial weights for {n} vertices", w.len())),
            Start::Stationary => table(kernel.stationary().into_iter().enumerate().collect()),
        }
    }

    fn sample(&self, rng: &mut PathRng) -> usize {
        match self {
            StartLaw::Point(v) => *v,
            StartLaw::Table { cumulative, ids } => {
                let u = stats::uniform_unit(&mut rng.rng) * cumulative[cumulative.len() - 1];
                let i = cumulative.partition_point(|&c| c <= u);
                ids[i.min(ids.len() - 1)]
            }
        }
    }
}

/// Per-path random source handing out neighbour choices from buffered bits.
pub struct PathRng {
    rng: ChaCha8Rng,
    buf: u64,
    left: u32,
}

impl PathRng {
    pub fn new(seed: u64, path: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        PathRng { rng, buf: 0, left: 0 }
    }

    fn bits(&mut self, n: u32) -> usize {
        if self.left < n {
            self.buf = self.rng.next_u64();
            self.left = 64;
        }
        let out = (self.buf & ((1 << n) - 1)) as usize;
        self.buf >>= n;
        self.left -= n;
        out
    }

    /// Uniform index in `0..degree`.
    pub fn choose(&mut self, degree: usize) -> usize {
        match degree {
            1 => 0,
            2 => self.bits(1),
            4 => self.bits(2),
            d => stats::uniform_index(&mut self.rng, d),
        }
    }
}

/// One transition of a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    /// 1-based step number.
    pub index: usize,
    pub from: usize,
    pub to: usize,
    pub dw: f64,
    pub dqv: f64,
}

/// Summary of a finished path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEnd {
    pub start: usize,
    pub end: usize,
    pub steps: usize,
    /// Step at which `V_0` was reached (killed mode only).
    pub hit_step: Option<usize>,
    pub qv: f64,
    pub w: f64,
}

/// Runs path `index` for at most `max_steps` steps, calling `visit` after
/// every transition. In killed mode the path stops on arrival at `V_0`;
/// a path started on `V_0` first leaves it (σ is an infimum over `t > 0`).
pub fn walk_path(
    kernel: &StepKernel,
    law: &StartLaw,
    killed: bool,
    max_steps: usize,
    seed: u64,
    index: u64,
    mut visit: impl FnMut(&Step),
) -> PathEnd {
    let mut rng = PathRng::new(seed, index);
    let start = law.sample(&mut rng);
    let mut x = start;
    let (mut qv, mut w) = (0.0, 0.0);
    let mut hit_step = None;
    let mut steps = 0;
    for k in 1..=max_steps {
        let nb = kernel.neighbors(x);
        let j = rng.choose(nb.len());
        let to = nb[j] as usize;
        let step = Step { index: k, from: x, to, dw: kernel.increments(x)[j], dqv: kernel.qv(x) };
        qv += step.dqv;
        w += step.dw;
        visit(&step);
        x = to;
        steps = k;
        if killed && kernel.is_boundary(to) {
            hit_step = Some(k);
            break;
        }
    }
    PathEnd { start, end: x, steps, hit_step, qv, w }
}

/// A fully recorded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    /// `X_0, X_1, …`; one entry longer than the increment vectors.
    pub vertices: Vec<u32>,
    pub dw: Vec<f64>,
    pub dqv: Vec<f64>,
    /// `⟨W⟩` after each step, starting from 0.
    pub cum_qv: Vec<f64>,
    pub hit_step: Option<usize>,
}

impl PathSample {
    pub fn steps(&self) -> usize {
        self.dw.len()
    }
}

/// Upper bound on recorded steps across an ensemble (about 1.5 GB).
pub const MAX_RECORDED_STEPS: u64 = 75_000_000;

pub fn simulate_path(cfg: &WalkConfig, kernel: &StepKernel, law: &StartLaw, index: u64) -> PathSample {
    let max = cfg.steps(kernel);
    let mut s = PathSample {
        vertices: Vec::with_capacity(max + 1),
        dw: Vec::with_capacity(max),
        dqv: Vec::with_capacity(max),
        cum_qv: Vec::with_capacity(max + 1),
        hit_step: None,
    };
    s.cum_qv.push(0.0);
    let mut acc = 0.0;
    let end = walk_path(kernel, law, cfg.killed, max, cfg.seed, index, |st| {
        if s.vertices.is_empty() {
            s.vertices.push(st.from as u32);
        }
        s.vertices.push(st.to as u32);
        s.dw.push(st.dw);
        s.dqv.push(st.dqv);
        acc += st.dqv;
        s.cum_qv.push(acc);
    });
    if s.vertices.is_empty() {
        s.vertices.push(end.start as u32);
    }
    s.hit_step = end.hit_step;
    s
}

fn check_level(cfg: &WalkConfig, kernel: &StepKernel) -> Result<()> {
    if cfg.level != kernel.level() {
        return Err(usage!("walk level {} does not match kernel level {}", cfg.level, kernel.level()));
    }
    if !(cfg.horizon >= 0.0) {
        return Err(usage!("horizon must be nonnegative"));
    }
    Ok(())
}

/// Simulates and records `cfg.paths` trajectories.
pub fn simulate_paths(
    cfg: &WalkConfig,
    kernel: &StepKernel,
    graph: Option<&LevelGraph>,
    runner: &impl PathRunner,
) -> Result<Vec<PathSample>> {
    check_level(cfg, kernel)?;
    let total = cfg.paths.saturating_mul(cfg.steps(kernel) as u64);
    if total > MAX_RECORDED_STEPS {
        return Err(Error::Capacity(alloc::format!(
            "{total} recorded steps exceed the limit {MAX_RECORDED_STEPS}; use a streaming statistic"
        )));
    }
    let law = StartLaw::resolve(&cfg.start, kernel, graph)?;
    Ok(runner.map(cfg.paths, |i| simulate_path(cfg, kernel, &law, i)))
}

/// `⟨W⟩` at each requested time (frozen after `σ_V0` in killed mode), one
/// row per path. Times are rounded to the nearest step.
pub fn quadratic_variation_at(
    cfg: &WalkConfig,
    kernel: &StepKernel,
    graph: Option<&LevelGraph>,
    runner: &impl PathRunner,
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    check_level(cfg, kernel)?;
    let law = StartLaw::resolve(&cfg.start, kernel, graph)?;
    let dt = kernel.time_step();
    let marks: Vec<usize> = times.iter().map(|t| round(t / dt).max(0.0) as usize).collect();
    let max = marks.iter().copied().max().unwrap_or(0);
    Ok(runner.map(cfg.paths, |i| {
        let mut out = alloc::vec![0.0; marks.len()];
        let mut acc = 0.0;
        walk_path(kernel, &law, cfg.killed, max, cfg.seed, i, |st| {
            acc += st.dqv;
            for (o, &m) in out.iter_mut().zip(&marks) {
                if st.index <= m {
                    *o = acc;
                }
            }
        });
        out
    }))
}

/// Statistics of `σ_V0` in diffusion time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ExitTimeStats {
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    /// Normal-approximation 95% interval.
    pub ci: (f64, f64),
    pub mean_steps: f64,
    pub hit_fraction: f64,
    /// Fewer than 99% of the paths reached `V_0` before the horizon.
    pub insufficient_hits: bool,
}

/// Mean and variance of `σ_V0` over paths that hit before the horizon.
pub fn exit_time_stats(
    cfg: &WalkConfig,
    kernel: &StepKernel,
    graph: Option<&LevelGraph>,
    runner: &impl PathRunner,
) -> Result<ExitTimeStats> {
    check_level(cfg, kernel)?;
    if !cfg.killed {
        return Err(usage!("exit times need the killed walk"));
    }
    let law = StartLaw::resolve(&cfg.start, kernel, graph)?;
    let max = cfg.steps(kernel);
    let hits = runner.map(cfg.paths, |i| walk_path(kernel, &law, true, max, cfg.seed, i, |_| {}).hit_step);
    let steps: Vec<f64> = hits.iter().flatten().map(|&k| k as f64).collect();
    let hit_fraction = steps.len() as f64 / cfg.paths.max(1) as f64;
    let dt = kernel.time_step();
    let s = stats::summarize(&steps);
    let (mean, se) = (s.mean * dt, s.se * dt);
    Ok(ExitTimeStats {
        mean,
        variance: s.variance * dt * dt,
        se,
        ci: (mean - 1.96 * se, mean + 1.96 * se),
        mean_steps: s.mean,
        hit_fraction,
        insufficient_hits: hit_fraction < 0.99,
    })
}

/// Expected number of steps to reach `V_0` from every vertex, by solving
/// the first-step equations (vertices of `V_0` use the first return).
pub fn expected_exit_steps(graph: &LevelGraph) -> Result<Vec<f64>> {
    let n = graph.vertex_count();
    let mut tau = alloc::vec![0.0; n];
    if n > 3 {
        // Interior equations 4τ_x − Σ_{y∉V_0} τ_y = 4 (all interior degrees are 4).
        let m = n - 3;
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..m {
                let x = i + 3;
                let nb = graph.neighbors(x).expect("vertex in range");
                let mut s = nb.len() as f64 * v[i];
                for &y in nb.iter().filter(|&&y| y >= 3) {
                    s -= v[y as usize - 3];
                }
                out[i] = s;
            }
        };
        let rhs: Vec<f64> = (3..n).map(|x| graph.neighbors(x).map(|nb| nb.len() as f64).unwrap_or(4.0)).collect();
        let diag = alloc::vec![4.0; m];
        let sol = crate::pde::conjugate_gradient(apply, &rhs, &diag, 1e-14, 10 * m + 100)?;
        tau[3..].copy_from_slice(&sol);
    }
    for b in 0..3.min(n) {
        let nb = graph.neighbors(b)?;
        tau[b] = 1.0 + nb.iter().map(|&y| tau[y as usize]).sum::<f64>() / nb.len() as f64;
    }
    Ok(tau)
}

/// Empirical law of `X_t` over level-`k` cells.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OccupationHistogram {
    pub cell_level: u8,
    pub step: usize,
    pub masses: Vec<f64>,
    /// Total-variation distance to `μ` at the same cell level.
    pub tv_to_hausdorff: f64,
}

/// Positions at the step nearest `t`. A vertex shared by two level-`m`
/// cells splits its weight between them; killed paths contribute their
/// absorption vertex.
pub fn occupation_histogram(
    cfg: &WalkConfig,
    kernel: &StepKernel,
    graph: &LevelGraph,
    runner: &impl PathRunner,
    t: f64,
    cell_level: u8,
) -> Result<OccupationHistogram> {
    check_level(cfg, kernel)?;
    if cell_level > graph.level() {
        return Err(usage!("histogram level {cell_level} exceeds walk level {}", graph.level()));
    }
    if !(t >= kernel.time_step()) {
        return Err(usage!("histogram time must be at least one step"));
    }
    let law = StartLaw::resolve(&cfg.start, kernel, Some(graph))?;
    let step = round(t / kernel.time_step()) as usize;
    let ends = runner.map(cfg.paths, |i| walk_path(kernel, &law, cfg.killed, step, cfg.seed, i, |_| {}).end);
    let cells = 3usize.pow(cell_level as u32);
    let shrink = 3usize.pow((graph.level() - cell_level) as u32);
    let mut masses = alloc::vec![0.0; cells];
    let unit = 1.0 / cfg.paths.max(1) as f64;
    for &v in &ends {
        let owners: Vec<usize> = graph.cells_of_vertex(v).collect();
        let share = unit / owners.len() as f64;
        for c in owners {
            masses[c / shrink] += share;
        }
    }
    let mu = 1.0 / cells as f64;
    let tv = 0.5 * masses.iter().map(|m| (m - mu).abs()).sum::<f64>();
    Ok(OccupationHistogram { cell_level, step, masses, tv_to_hausdorff: tv })
}

/// Monte-Carlo estimate of `E[e^{β⟨W⟩_t}]` (with `t ∧ σ_V0` in killed mode).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ExpIntEstimate {
    pub beta: f64,
    pub horizon: f64,
    pub mean: f64,
    pub log_mean: f64,
    pub se: f64,
    /// Percentile bootstrap 95% interval.
    pub ci: (f64, f64),
    pub top_share: f64,
    /// The top 1% of samples carries more than half of the mass.
    pub unstable: bool,
}

pub fn expint_from_samples(qv: &[f64], beta: f64, horizon: f64, resamples: usize, seed: u64) -> ExpIntEstimate {
    let logs: Vec<f64> = qv.iter().map(|a| beta * a).collect();
    let (log_mean, mean, se) = stats::exp_mean(&logs);
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| exp(l - max)).collect();
    let (lo, hi) = stats::bootstrap_mean_ci(&scaled, resamples, seed, 0.95);
    let top = stats::top_share(&logs, 0.01);
    ExpIntEstimate {
        beta,
        horizon,
        mean,
        log_mean,
        se,
        ci: (lo * exp(max), hi * exp(max)),
        top_share: top,
        unstable: top > 0.5,
    }
}

pub fn expint_estimate(
    cfg: &WalkConfig,
    kernel: &StepKernel,
    graph: Option<&LevelGraph>,
    runner: &impl PathRunner,
    beta: f64,
    resamples: usize,
) -> Result<ExpIntEstimate> {
    if !(beta >= 0.0) {
        return Err(usage!("β must be nonnegative"));
    }
    let qv: Vec<f64> = quadratic_variation_at(cfg, kernel, graph, runner, &[cfg.horizon])?
        .into_iter()
        .map(|r| r[0])
        .collect();
    Ok(expint_from_samples(&qv, beta, cfg.horizon, resamples, cfg.seed ^ 0x9e37_79b9_7f4a_7c15))
}

/// Per-step `ΔW` over all steps of the ensemble.
pub fn increment_summary(
    cfg: &WalkConfig,
    kernel: &StepKernel,
    graph: Option<&LevelGraph>,
    runner: &impl PathRunner,
) -> Result<Summary> {
    check_level(cfg, kernel)?;
    let law = StartLaw::resolve(&cfg.start, kernel, graph)?;
    let max = cfg.steps(kernel);
    let per_path = runner.map(cfg.paths, |i| {
        let mut v = Vec::with_capacity(max);
        walk_path(kernel, &law, cfg.killed, max, cfg.seed, i, |st| v.push(st.dw));
        v
    });
    let all: Vec<f64> = per_path.into_iter().flatten().collect();
    Ok(stats::summarize(&all))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::SequentialRunner;
    use crate::graph::Coord;

    fn setup(m: u8) -> (LevelGraph, StepKernel) {
        let g = LevelGraph::build(m).unwrap();
        let k = StepKernel::build(&g);
        (g, k)
    }

    #[test]
    fn determinism_and_length() {
        let (g, k) = setup(2);
        let mut cfg = WalkConfig::new(2, Start::Vertex(5));
        cfg.seed = 42;
        cfg.horizon = 25.0 * k.time_step();
        assert_eq!(cfg.steps(&k), 25);
        let a = simulate_paths(&cfg, &k, Some(&g), &SequentialRunner).unwrap();
        let b = simulate_paths(&cfg, &k, Some(&g), &SequentialRunner).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].vertices.len(), 26);
        assert!(a[0].cum_qv.windows(2).all(|w| w[1] >= w[0]));
        for (i, v) in a[0].vertices.windows(2).enumerate() {
            let nb = g.neighbors(v[0] as usize).unwrap();
            assert!(nb.contains(&v[1]), "step {i}");
        }
    }

    #[test]
    fn killed_paths_stop_at_boundary() {
        let (g, k) = setup(3);
        let mut cfg = WalkConfig::new(3, Start::Vertex(10));
        cfg.killed = true;
        cfg.paths = 200;
        cfg.horizon = 2.0;
        for p in simulate_paths(&cfg, &k, Some(&g), &SequentialRunner).unwrap() {
            let hit = p.hit_step.expect("hit before T = 2");
            assert_eq!(p.steps(), hit);
            assert!(*p.vertices.last().unwrap() < 3);
            assert!(p.vertices[..hit].iter().all(|&v| v >= 3));
        }
    }

    #[test]
    fn hitting_fraction_grows_with_horizon() {
        let (g, k) = setup(3);
        let mut prev = 0.0;
        for t in [0.05, 0.2, 0.8] {
            let mut cfg = WalkConfig::new(3, Start::Vertex(20));
            cfg.killed = true;
            cfg.paths = 2000;
            cfg.horizon = t;
            let s = exit_time_stats(&cfg, &k, Some(&g), &SequentialRunner).unwrap();
            assert!(s.hit_fraction >= prev);
            prev = s.hit_fraction;
        }
        assert!(prev > 0.9);
    }

    #[test]
    fn increments_are_centred() {
        let (g, k) = setup(3);
        let mut cfg = WalkConfig::new(3, Start::Stationary);
        cfg.paths = 400;
        cfg.horizon = 250.0 * k.time_step();
        let s = increment_summary(&cfg, &k, Some(&g), &SequentialRunner).unwrap();
        assert_eq!(s.count, 100_000);
        assert!(s.mean.abs() < 3.0 * s.se, "{s:?}");
    }

    #[test]
    fn harmonic_functions_are_martingales() {
        let (g, k) = setup(3);
        let h = crate::kernel::harmonic_basis_tables(&g);
        let law = StartLaw::Point(g.vertex_at(&Coord::corner(2).midpoint(&Coord::corner(3))).unwrap());
        let runner = SequentialRunner;
        let ends = runner.map(4000, |i| walk_path(&k, &law, true, 300, 9, i, |_| {}));
        for i in 0..3 {
            let d: Vec<f64> = ends.iter().map(|e| h[e.end][i] - h[e.start][i]).collect();
            let s = stats::summarize(&d);
            assert!(s.mean.abs() < 3.0 * s.se + 1e-15, "h{}: {s:?}", i + 1);
        }
    }

    #[test]
    fn exact_exit_steps_from_opposite_midpoint() {
        // From the level-1 midpoint opposite p1 the mean exit takes 2·5^{m−1} steps.
        for m in 1..=5u8 {
            let g = LevelGraph::build(m).unwrap();
            let tau = expected_exit_steps(&g).unwrap();
            let x = g.vertex_at(&Coord::corner(2).midpoint(&Coord::corner(3))).unwrap();
            let want = 2.0 * 5f64.powi(m as i32 - 1);
            assert!((tau[x] - want).abs() < 1e-8 * want, "m={m}: {}", tau[x]);
        }
    }

    #[test]
    fn mc_exit_time_matches_linear_system() {
        let (g, k) = setup(3);
        let x = g.vertex_at(&Coord::corner(2).midpoint(&Coord::corner(3))).unwrap();
        let mut cfg = WalkConfig::new(3, Start::Vertex(x));
        cfg.killed = true;
        cfg.paths = 20_000;
        cfg.horizon = 6.0;
        let s = exit_time_stats(&cfg, &k, Some(&g), &SequentialRunner).unwrap();
        assert!(!s.insufficient_hits);
        assert!((s.mean_steps - 50.0).abs() < 4.0 * s.se / k.time_step(), "{s:?}");
        assert!((s.mean - 4.0 / 15.0).abs() < 4.0 * s.se);
    }

    #[test]
    fn histogram_limits() {
        let (g, k) = setup(3);
        let mut cfg = WalkConfig::new(3, Start::Vertex(0));
        cfg.paths = 500;
        let h = occupation_histogram(&cfg, &k, &g, &SequentialRunner, k.time_step(), 1).unwrap();
        // After one step from p1 the walk is still inside cell 1.
        assert!((h.masses[0] - 1.0).abs() < 1e-12);
        assert!(occupation_histogram(&cfg, &k, &g, &SequentialRunner, 0.0, 1).is_err());
    }

    #[test]
    fn expint_at_zero_beta_is_one() {
        let (g, k) = setup(2);
        let mut cfg = WalkConfig::new(2, Start::Vertex(4));
        cfg.paths = 100;
        let e = expint_estimate(&cfg, &k, Some(&g), &SequentialRunner, 0.0, 50).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.se, 0.0);
    }

    #[test]
    fn start_laws() {
        let (g, k) = setup(2);
        assert!(StartLaw::resolve(&Start::Vertex(99), &k, None).is_err());
        assert!(StartLaw::resolve(&Start::Weights(alloc::vec![0.5; 15]), &k, None).is_err());
        let law = StartLaw::resolve(&Start::Cell(CellWord::parse("12").unwrap()), &k, Some(&g)).unwrap();
        let corners = g.cell_corners(&CellWord::parse("12").unwrap()).unwrap();
        for i in 0..50 {
            let mut rng = PathRng::new(1, i);
            assert!(corners.contains(&law.sample(&mut rng)));
        }
    }
}
