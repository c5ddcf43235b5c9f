//! One function per subcommand, each turning a [`RunConfig`] into tables.

use std::f64::consts::SQRT_2;

use gasket_core::bounds::{self, coarse_starts, expint_stability, qv_ensemble};
use gasket_core::bsde::{self, BetaWeights, PicardInit, Scheme};
use gasket_core::harmonic::{extend, graph_energy, harmonic_energy, GradientFrame};
use gasket_core::measure::{
    energy_measure_table, hausdorff_table, kusuoka_identity_check, kusuoka_table, ones_ratio_closed_form,
    singularity_diagnostic, CellMeasure,
};
use gasket_core::pde::{feynman_kac_check, solve_weak_pde, FkSpec};
use gasket_core::special::{beta_chain_identity, SpectralConstants};
use gasket_core::walk::{simulate_paths, walk_path, Start, StartLaw, WalkConfig};
use gasket_core::{CellWord, Error, LevelGraph, Rational, Scalar, StepKernel, MAX_EXACT_LEVEL};
use num_traits::{One, Signed, Zero};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Arithmetic, BoundsWhich, MeasureKindArg, RunConfig, SchemeArg, Subcommand};
use crate::error::{LabError, LabResult};
use crate::problem::ProblemFile;
use crate::runner::RayonRunner;
use crate::table::{num, Table};

/// Everything a run produces apart from the metadata sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub primary: Table,
    /// Secondary tables, written next to the primary file as `<stem>.<name>.csv`.
    pub extras: Vec<(&'static str, Table)>,
    /// Deterministic headline numbers; part of JSON output and the sidecar.
    pub summary: Value,
}

pub fn run(cfg: &RunConfig) -> LabResult<Output> {
    cfg.validate()?;
    let runner = RayonRunner::new(cfg.workers);
    match cfg.subcommand {
        Subcommand::Graph => graph(cfg),
        Subcommand::Harmonic => harmonic(cfg),
        Subcommand::Measure => measure(cfg),
        Subcommand::Walk => walk(cfg, &runner),
        Subcommand::Bsde => bsde_cmd(cfg),
        Subcommand::Pde => pde_cmd(cfg),
        Subcommand::CheckFk => check_fk(cfg),
        Subcommand::CheckBounds => check_bounds(cfg, &runner),
        Subcommand::CheckContraction => check_contraction(cfg, &runner),
        Subcommand::CheckIdentity => check_identity(cfg),
    }
}

fn level(cfg: &RunConfig) -> u8 {
    cfg.level.expect("validated")
}

fn exact_level(level: u8) -> LabResult<()> {
    if level > MAX_EXACT_LEVEL {
        return Err(Error::Capacity(format!(
            "exact tables stop at level {MAX_EXACT_LEVEL}; rerun with --arithmetic float"
        ))
        .into());
    }
    Ok(())
}

fn rational_cells(q: &Rational) -> [String; 3] {
    [q.numer().to_string(), q.denom().to_string(), num(q.to_f64())]
}

fn parse_boundary(cfg: &RunConfig) -> LabResult<[Rational; 3]> {
    let b = cfg.boundary.as_ref().expect("validated");
    let mut out: [Rational; 3] = Default::default();
    for (i, s) in b.iter().enumerate() {
        out[i] = s.trim().parse::<Rational>().map_err(|e| LabError::Config {
            path: format!("boundary[{i}]"),
            message: format!("`{s}` is not a rational number ({e})"),
        })?;
    }
    Ok(out)
}

fn parse_start(cfg: &RunConfig, g: &LevelGraph) -> LabResult<Start> {
    let s = cfg.start.as_deref().unwrap_or("stationary");
    let bad = |m: String| LabError::Config { path: "start".into(), message: m };
    if s == "stationary" {
        return Ok(Start::Stationary);
    }
    if let Some(v) = s.strip_prefix("vertex:") {
        let id: usize = v.parse().map_err(|_| bad(format!("bad vertex id `{v}`")))?;
        if id >= g.vertex_count() {
            return Err(bad(format!("vertex {id} not in V_{}", g.level())));
        }
        return Ok(Start::Vertex(id));
    }
    if let Some(w) = s.strip_prefix("cell:") {
        let word = CellWord::parse(w)?;
        if word.len() != g.level() as usize {
            return Err(bad(format!("cell word `{w}` must have length {}", g.level())));
        }
        return Ok(Start::Cell(word));
    }
    Err(bad(format!("`{s}` is not `stationary`, `vertex:<id>` or `cell:<word>`")))
}

fn load_problem(cfg: &RunConfig) -> LabResult<ProblemFile> {
    let mut p = ProblemFile::load(cfg.problem.as_deref().expect("validated"))?;
    if let Some(h) = cfg.horizon {
        p.horizon = h;
    }
    Ok(p)
}

fn graph(cfg: &RunConfig) -> LabResult<Output> {
    let g = LevelGraph::build(level(cfg))?;
    let mut t = Table::new(&["id", "x_num", "x_den", "y_sqrt3_num", "y_sqrt3_den", "x", "y", "boundary", "degree"]);
    for v in g.vertices() {
        let (x, y) = v.coord.to_f64();
        t.push(vec![
            v.id.to_string(),
            v.coord.x.numer().to_string(),
            v.coord.x.denom().to_string(),
            v.coord.y_sqrt3.numer().to_string(),
            v.coord.y_sqrt3.denom().to_string(),
            num(x),
            num(y),
            v.boundary.to_string(),
            g.neighbors(v.id)?.len().to_string(),
        ]);
    }
    let mut edges = Table::new(&["a", "b"]);
    for &(a, b) in g.edges() {
        edges.push(vec![a.to_string(), b.to_string()]);
    }
    let summary = json!({
        "level": g.level(),
        "vertex_count": g.vertex_count(),
        "edge_count": g.edges().len(),
        "cell_count": g.cell_count(),
    });
    Ok(Output { primary: t, extras: vec![("edges", edges)], summary })
}

fn harmonic(cfg: &RunConfig) -> LabResult<Output> {
    let m = level(cfg);
    let g = LevelGraph::build(m)?;
    let u = parse_boundary(cfg)?;
    let mut t = Table::new(&["id", "value_num", "value_den", "value"]);
    let energy = harmonic_energy(&u);
    let floats: Vec<f64>;
    let graph_e: String;
    match cfg.arithmetic {
        Arithmetic::Exact => {
            exact_level(m)?;
            let h = extend(&u, &g)?;
            for (id, v) in h.iter().enumerate() {
                let [n, d, f] = rational_cells(v);
                t.push(vec![id.to_string(), n, d, f]);
            }
            graph_e = graph_energy(&g, &h, &h)?.to_string();
            floats = h.iter().map(|v| v.to_f64()).collect();
        }
        Arithmetic::Float => {
            let uf = u.clone().map(|v| v.to_f64());
            let h = extend(&uf, &g)?;
            for (id, v) in h.iter().enumerate() {
                t.push(vec![id.to_string(), String::new(), String::new(), num(*v)]);
            }
            graph_e = num(graph_energy(&g, &h, &h)?);
            floats = h;
        }
    }
    let frame = GradientFrame::new(m);
    let mut grad = Table::new(&["cell", "word", "nu", "gradient"]);
    for (i, d) in frame.gradients(&g, &floats).iter().enumerate() {
        grad.push(vec![i.to_string(), CellWord::from_index(i, m as usize).to_string(), num(frame.nu()[i]), num(*d)]);
    }
    let summary = json!({
        "level": m,
        "energy_boundary_form": energy.to_string(),
        "energy_graph": graph_e,
        "energy": energy.to_f64(),
    });
    Ok(Output { primary: t, extras: vec![("grad", grad)], summary })
}

fn measure(cfg: &RunConfig) -> LabResult<Output> {
    let m = level(cfg);
    if m > gasket_core::MAX_LEVEL {
        return Err(Error::Capacity(format!("level {m} exceeds {}", gasket_core::MAX_LEVEL)).into());
    }
    let kind = cfg.kind.expect("validated");
    let mut t = Table::new(&["word", "mass_num", "mass_den", "mass"]);
    let total: String;
    match cfg.arithmetic {
        Arithmetic::Exact => {
            exact_level(m)?;
            let table: CellMeasure<Rational> = match kind {
                MeasureKindArg::Mu => hausdorff_table(m),
                MeasureKindArg::Nu => kusuoka_table(m),
                MeasureKindArg::Energy => energy_measure_table(&parse_boundary(cfg)?, m),
            };
            for (i, q) in table.masses.iter().enumerate() {
                let [n, d, f] = rational_cells(q);
                t.push(vec![CellWord::from_index(i, m as usize).to_string(), n, d, f]);
            }
            total = table.total().to_string();
        }
        Arithmetic::Float => {
            let table: CellMeasure<f64> = match kind {
                MeasureKindArg::Mu => hausdorff_table(m),
                MeasureKindArg::Nu => kusuoka_table(m),
                MeasureKindArg::Energy => energy_measure_table(&parse_boundary(cfg)?.map(|v| v.to_f64()), m),
            };
            for (i, q) in table.masses.iter().enumerate() {
                t.push(vec![CellWord::from_index(i, m as usize).to_string(), String::new(), String::new(), num(*q)]);
            }
            total = num(table.total());
        }
    }
    Ok(Output { primary: t, extras: vec![], summary: json!({ "level": m, "cells": 3usize.pow(m as u32), "total": total }) })
}

fn walk(cfg: &RunConfig, runner: &RayonRunner) -> LabResult<Output> {
    let m = level(cfg);
    let g = LevelGraph::build(m)?;
    let k = StepKernel::build(&g);
    let start = parse_start(cfg, &g)?;
    let horizon = cfg.horizon.expect("validated");
    let killed = cfg.killed.unwrap_or(false);
    let wc = WalkConfig { level: m, horizon, seed: cfg.seed, paths: cfg.paths.expect("validated"), killed, start };
    if !(horizon >= 0.0) {
        return Err(Error::Usage("horizon must be nonnegative".into()).into());
    }
    let law = StartLaw::resolve(&wc.start, &k, Some(&g))?;
    let max = wc.steps(&k);
    let ends = gasket_core::ensemble::PathRunner::map(runner, wc.paths, |i| walk_path(&k, &law, killed, max, wc.seed, i, |_| {}));
    let dt = k.time_step();
    let mut t = Table::new(&["path", "start", "end", "steps", "qv", "w", "hit_step", "exit_time"]);
    for (i, e) in ends.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            e.start.to_string(),
            e.end.to_string(),
            e.steps.to_string(),
            num(e.qv),
            num(e.w),
            e.hit_step.map(|h| h.to_string()).unwrap_or_default(),
            e.hit_step.map(|h| num(h as f64 * dt)).unwrap_or_default(),
        ]);
    }
    let qv: Vec<f64> = ends.iter().map(|e| e.qv).collect();
    let s = gasket_core::stats::summarize(&qv);
    let hits: Vec<f64> = ends.iter().filter_map(|e| e.hit_step).map(|h| h as f64 * dt).collect();
    let exit = gasket_core::stats::summarize(&hits);
    let summary = json!({
        "level": m,
        "dt": dt,
        "steps": max,
        "mean_qv": s.mean,
        "mean_qv_se": s.se,
        "mean_qv_over_t": if horizon > 0.0 { s.mean / horizon } else { f64::NAN },
        "hit_fraction": hits.len() as f64 / ends.len().max(1) as f64,
        "mean_exit_time": exit.mean,
        "mean_exit_time_se": exit.se,
    });
    Ok(Output { primary: t, extras: vec![], summary })
}

fn bsde_cmd(cfg: &RunConfig) -> LabResult<Output> {
    let g = LevelGraph::build(level(cfg))?;
    let k = StepKernel::build(&g);
    let pf = load_problem(cfg)?;
    let mut p = pf.bsde(&g)?;
    p.time_step = cfg.dt;
    let scheme = match cfg.scheme.unwrap_or(SchemeArg::Explicit) {
        SchemeArg::Explicit => Scheme::Explicit,
        SchemeArg::PicardInStep => Scheme::PicardInStep,
    };
    let s = bsde::solve_dp(&p, &k, scheme)?;
    let mut t = Table::new(&["step", "time", "vertex_id", "Y", "Z"]);
    for (step, (y, z)) in s.y.iter().zip(&s.z).enumerate() {
        let time = num(s.grid.time(step));
        for x in 0..y.len() {
            t.push(vec![step.to_string(), time.clone(), x.to_string(), num(y[x]), num(z[x])]);
        }
    }
    let summary = json!({
        "level": s.level,
        "dt": s.grid.dt,
        "steps": s.grid.steps,
        "scheme": s.scheme,
        "iterations": s.iterations,
        "warnings": s.warnings,
    });
    Ok(Output { primary: t, extras: vec![], summary })
}

fn pde_cmd(cfg: &RunConfig) -> LabResult<Output> {
    let m = level(cfg);
    let g = LevelGraph::build(m)?;
    let pf = load_problem(cfg)?;
    let mut p = pf.pde(&g)?;
    p.step = cfg.dt;
    let s = solve_weak_pde(&p, &g)?;
    let mut t = Table::new(&["layer", "time", "vertex_id", "u"]);
    let mut grad = Table::new(&["layer", "cell", "gradient"]);
    for (k, layer) in s.u.iter().enumerate() {
        let time = num(s.grid.time(k));
        for (x, v) in layer.iter().enumerate() {
            t.push(vec![k.to_string(), time.clone(), x.to_string(), num(*v)]);
        }
        for (c, d) in s.gradients[k].iter().enumerate() {
            grad.push(vec![k.to_string(), c.to_string(), num(*d)]);
        }
    }
    let summary = json!({
        "level": m,
        "dt": s.grid.dt,
        "steps": s.grid.steps,
        "max_residual": s.residuals.iter().copied().fold(0.0, f64::max),
        "compatibility_gap": s.compatibility_gap,
    });
    Ok(Output { primary: t, extras: vec![("grad", grad)], summary })
}

fn check_fk(cfg: &RunConfig) -> LabResult<Output> {
    let pf = load_problem(cfg)?;
    if !pf.terminal.is_pointwise() {
        return Err(LabError::Config {
            path: "problem.terminal".into(),
            message: "a level ladder needs a pointwise terminal (bump or constant)".into(),
        });
    }
    let levels = cfg.levels.clone().expect("validated");
    let probe = levels.iter().copied().min().unwrap_or(0).min(2);
    let times = cfg.times.clone().unwrap_or_else(|| [0.0, 0.25, 0.5, 0.75].iter().map(|f| f * pf.horizon).collect());
    let terminal = |z: &gasket_core::Coord| pf.terminal.eval(z);
    let spec = FkSpec { driver: pf.driver.to_driver(), boundary: pf.boundary(), horizon: pf.horizon, terminal: &terminal };
    let r = feynman_kac_check(&spec, &levels, &times, probe)?;
    let mut t = Table::new(&["level", "time", "vertex", "x", "y", "pde", "bsde", "error"]);
    for l in &r.levels {
        for row in &l.rows {
            t.push(vec![
                row.level.to_string(),
                num(row.time),
                row.vertex.to_string(),
                num(row.x),
                num(row.y),
                num(row.pde),
                num(row.bsde),
                num(row.error),
            ]);
        }
    }
    let sup: Vec<Value> = r.levels.iter().map(|l| json!({ "level": l.level, "sup_error": l.sup_error })).collect();
    Ok(Output { primary: t, extras: vec![], summary: json!({ "probe_level": probe, "sup_errors": sup, "decreasing": r.decreasing }) })
}

fn check_bounds(cfg: &RunConfig, runner: &RayonRunner) -> LabResult<Output> {
    let which = cfg.which.expect("validated");
    let gs = SpectralConstants::new().gamma_s;
    if which == BoundsWhich::BetaChain {
        let mut t = Table::new(&["p", "gamma", "lhs", "rhs", "gap"]);
        let mut worst: f64 = 0.0;
        for p in 1..=3 {
            for gamma in [gs, 0.5] {
                let r = beta_chain_identity(p, gamma)?;
                worst = worst.max(r.gap);
                t.push(vec![p.to_string(), num(gamma), num(r.lhs), num(r.rhs), num(r.gap)]);
            }
        }
        return Ok(Output { primary: t, extras: vec![], summary: json!({ "max_gap": worst }) });
    }
    let m = level(cfg);
    let g = LevelGraph::build(m)?;
    let k = StepKernel::build(&g);
    let paths = cfg.paths.expect("validated");
    if which == BoundsWhich::Expint {
        let start = parse_start(cfg, &g)?;
        let beta = cfg.betas.as_ref().and_then(|b| b.first().copied()).unwrap_or(0.25);
        let horizon = cfg.horizon.unwrap_or(2.0);
        let s = expint_stability(&k, Some(&g), start, beta, horizon, paths, cfg.seed, runner, 0.01)?;
        let mut t = Table::new(&["horizon", "mean", "se", "log_mean", "top_share"]);
        for e in [&s.short, &s.long] {
            t.push(vec![num(e.horizon), num(e.mean), num(e.se), num(e.log_mean), num(e.top_share)]);
        }
        let summary = json!({
            "beta": beta,
            "difference": s.difference,
            "difference_se": s.difference_se,
            "relative_change": s.relative_change,
            "alive_at_short": s.alive_at_short,
            "stable": s.stable,
        });
        return Ok(Output { primary: t, extras: vec![], summary });
    }
    let times = cfg.times.clone().unwrap_or_else(|| vec![0.25, 0.5, 1.0]);
    let ens = qv_ensemble(&k, &coarse_starts(&g)?, &times, paths, cfg.seed, runner)?;
    let moments = bounds::moment_bound_check(&ens, 4, 3.0)?;
    if which == BoundsWhich::Moments {
        let mut t = Table::new(&["p", "t", "start", "moment", "se", "c_needed", "bound", "holds"]);
        for r in &moments.rows {
            t.push(vec![
                r.p.to_string(),
                num(r.t),
                r.start.to_string(),
                num(r.moment),
                num(r.se),
                num(r.c_needed),
                num(r.bound),
                r.holds.to_string(),
            ]);
        }
        let summary = json!({
            "gamma_s": moments.gamma_s,
            "c_fit": moments.c_fit,
            "c_all": moments.c_all,
            "all_hold": moments.all_hold,
            "small_time_slope": moments.small_time_slope,
        });
        return Ok(Output { primary: t, extras: vec![], summary });
    }
    let betas = cfg.betas.clone().unwrap_or_else(|| vec![0.25, 0.5, 1.0]);
    let ml = bounds::mittag_leffler_bound_check(&ens, &betas, moments.c_fit, 3.0)?;
    let mut t = Table::new(&["beta", "t", "lhs", "se", "argmax_start", "ln_rhs", "log_margin", "holds"]);
    for r in &ml.rows {
        t.push(vec![
            num(r.beta),
            num(r.t),
            num(r.lhs),
            num(r.se),
            r.argmax_start.to_string(),
            num(r.ln_rhs),
            num(r.log_margin),
            r.holds.to_string(),
        ]);
    }
    Ok(Output { primary: t, extras: vec![], summary: json!({ "c": ml.c, "all_hold": ml.all_hold }) })
}

fn check_contraction(cfg: &RunConfig, runner: &RayonRunner) -> LabResult<Output> {
    let m = level(cfg);
    let g = LevelGraph::build(m)?;
    let k = StepKernel::build(&g);
    let pf = load_problem(cfg)?;
    let p = pf.bsde(&g)?;
    let (k0, k1) = p.constants();
    let [b0, b1] = pf.beta.unwrap_or([(36.0 * k0 * k0).max(1.0), (36.0 * k1 * k1).max(1.0)]);
    let beta = BetaWeights::new(b0, b1)?;
    let wc = WalkConfig {
        level: m,
        horizon: p.horizon,
        seed: cfg.seed,
        paths: cfg.paths.expect("validated"),
        killed: p.duration == bsde::Duration::Killed,
        start: parse_start(cfg, &g)?,
    };
    let paths = simulate_paths(&wc, &k, Some(&g), runner)?;
    let iters = cfg.iters.unwrap_or(12);
    let a = bsde::picard_iterate(&p, &k, iters, PicardInit::Zero, &paths, beta, false)?;
    let b = bsde::picard_iterate(&p, &k, iters, PicardInit::Propagated, &paths, beta, false)?;
    let bound = 3.0 * SQRT_2 * a.k_beta;
    let mut t = Table::new(&["iteration", "distance", "ratio", "bound"]);
    for (i, d) in a.distances.iter().enumerate() {
        let ratio = if i > 0 && a.distances[i - 1] > 0.0 { num(d / a.distances[i - 1]) } else { String::new() };
        t.push(vec![(i + 1).to_string(), num(*d), ratio, num(bound)]);
    }
    let gap = a.last.y.iter().flatten().zip(b.last.y.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let max_ratio = a.ratios.iter().copied().fold(0.0, f64::max);
    let summary = json!({
        "beta": [b0, b1],
        "k_beta": a.k_beta,
        "bound": bound,
        "max_ratio": max_ratio,
        "initialisation_gap": gap,
    });
    Ok(Output { primary: t, extras: vec![], summary })
}

fn random_rational(rng: &mut ChaCha8Rng) -> Rational {
    let n = (rng.next_u64() % 41) as i64 - 20;
    let d = (rng.next_u64() % 9) as i64 + 1;
    Rational::from_ratio(n, d)
}

fn check_identity(cfg: &RunConfig) -> LabResult<Output> {
    let top = level(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t = Table::new(&["check", "level", "cases", "defect", "ok"]);
    let push = |t: &mut Table, check: &str, m: u8, cases: usize, defect: Rational| {
        let ok = defect.is_zero();
        t.push(vec![check.into(), m.to_string(), cases.to_string(), defect.to_string(), ok.to_string()]);
        ok
    };
    let mut all = true;
    for m in 0..=top.min(6) {
        let g = LevelGraph::build(m)?;
        let mut worst = Rational::zero();
        for _ in 0..100 {
            let u = [random_rational(&mut rng), random_rational(&mut rng), random_rational(&mut rng)];
            let h = extend(&u, &g)?;
            let d = (graph_energy(&g, &h, &h)? - harmonic_energy(&u)).abs();
            worst = worst.max(d);
        }
        all &= push(&mut t, "energy", m, 100, worst);
    }
    for m in 0..top.min(5) {
        let (coarse, fine) = (LevelGraph::build(m)?, LevelGraph::build(m + 1)?);
        let maps: Vec<Vec<usize>> = (1..=3).map(|i| fine.pullback(&coarse, i)).collect::<Result<_, _>>()?;
        let mut worst = Rational::zero();
        for _ in 0..10 {
            let u: Vec<Rational> = (0..fine.vertex_count()).map(|_| random_rational(&mut rng)).collect();
            let v: Vec<Rational> = (0..fine.vertex_count()).map(|_| random_rational(&mut rng)).collect();
            let mut sum = Rational::zero();
            for map in &maps {
                let ui: Vec<Rational> = map.iter().map(|&j| u[j].clone()).collect();
                let vi: Vec<Rational> = map.iter().map(|&j| v[j].clone()).collect();
                sum += graph_energy(&coarse, &ui, &vi)?;
            }
            let d = (graph_energy(&fine, &u, &v)? - Rational::from_ratio(5, 3) * sum).abs();
            worst = worst.max(d);
        }
        all &= push(&mut t, "self-similarity", m + 1, 10, worst);
    }
    for m in 0..=top.min(8) {
        all &= push(&mut t, "kusuoka-identity", m, 3usize.pow(m as u32), kusuoka_identity_check(m)?);
        let total = kusuoka_table::<Rational>(m).total();
        all &= push(&mut t, "nu-total", m, 1, (total - Rational::one()).abs());
    }
    if top >= 2 {
        let nu = kusuoka_table::<Rational>(2);
        let d11 = (nu.masses[0].clone() - Rational::from_ratio(41, 225)).abs();
        let d12 = (nu.masses[1].clone() - Rational::from_ratio(17, 225)).abs();
        all &= push(&mut t, "nu-11-12", 2, 2, d11.max(d12));
    }
    for m in 0..=top.min(MAX_EXACT_LEVEL) {
        let d = singularity_diagnostic(m)?;
        all &= push(&mut t, "ones-ratio", m, 1, (d.ratio_at_ones - ones_ratio_closed_form(m)).abs());
    }
    Ok(Output { primary: t, extras: vec![], summary: json!({ "level": top, "all_zero": all }) })
}
