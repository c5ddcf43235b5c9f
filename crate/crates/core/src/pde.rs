//! Weak-form semi-linear parabolic solver on `V_m` and its Feynman–Kac
//! comparison with the BSDE solver.
//!
//! The problem is posed backward from `T`:
//!
//! `d/dt ⟨u, v⟩_μ − ½ E(u, v) = −⟨g(u), v⟩_μ − ⟨f(u, ∇u), v⟩_ν`
//!
//! for `v` vanishing on `V_0`, with `u = φ` on `V_0` and `u(T) = ψ`. The `½`
//! matches the generator of the walk, whose clock makes `⟨W⟩` have Revuz
//! measure `ν`. Masses are lumped: each cell gives a third of its `μ`- and
//! `ν`-mass to each corner. The energy is implicit, the reactions explicit.

use alloc::vec::Vec;

use libm::{exp, fabs, sqrt};

use crate::bsde::{self, Boundary, BsdeProblem, Duration, Scheme, TimeGrid};
use crate::driver::Driver;
use crate::error::{usage, Error, Result};
use crate::graph::{Coord, LevelGraph};
use crate::harmonic::GradientFrame;
use crate::kernel::{time_step, StepKernel};
use crate::measure::kusuoka_table;
use crate::scalar::{energy_scale, Rational, Scalar};

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite operator given as `apply(v, out)`.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    rhs: &[f64],
    diag: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    conjugate_gradient_from(apply, rhs, diag, alloc::vec![0.0; rhs.len()], tol, max_iter).map(|(x, _)| x)
}

/// As [`conjugate_gradient`] from an initial guess; also returns the final
/// relative residual.
pub fn conjugate_gradient_from(
    apply: impl Fn(&[f64], &mut [f64]),
    rhs: &[f64],
    diag: &[f64],
    mut x: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64)> {
    let n = rhs.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let bnorm = sqrt(dot(rhs, rhs));
    if bnorm == 0.0 {
        return Ok((alloc::vec![0.0; n], 0.0));
    }
    let mut ax = alloc::vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut zv: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = zv.clone();
    let mut rz = dot(&r, &zv);
    let mut ap = alloc::vec![0.0; n];
    for _ in 0..max_iter {
        let rel = sqrt(dot(&r, &r)) / bnorm;
        if rel <= tol {
            return Ok((x, rel));
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Assembly(alloc::format!("operator is not positive definite (pᵗAp = {pap:e})")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            zv[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &zv);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = zv[i] + beta * p[i];
        }
    }
    let rel = sqrt(dot(&r, &r)) / bnorm;
    if rel <= tol {
        Ok((x, rel))
    } else {
        Err(Error::Assembly(alloc::format!("conjugate gradients stalled at relative residual {rel:e}")))
    }
}

/// Corner-lumped masses of `μ` and `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct LumpedMasses<T> {
    pub mu: Vec<T>,
    pub nu: Vec<T>,
}

pub fn assemble_masses<T: Scalar>(g: &LevelGraph) -> LumpedMasses<T> {
    let nu_cells = kusuoka_table::<T>(g.level());
    let third = T::from_ratio(1, 3);
    let mu_cell = T::one() / T::from_int(3).powi(g.level() as u32) * third.clone();
    let mut mu = alloc::vec![T::zero(); g.vertex_count()];
    let mut nu = alloc::vec![T::zero(); g.vertex_count()];
    for (cell, m) in g.cells().iter().zip(&nu_cells.masses) {
        let share = m.clone() * third.clone();
        for &v in cell {
            mu[v as usize] = mu[v as usize].clone() + mu_cell.clone();
            nu[v as usize] = nu[v as usize].clone() + share.clone();
        }
    }
    LumpedMasses { mu, nu }
}

/// Exact masses, for checks.
pub fn assemble_masses_exact(g: &LevelGraph) -> LumpedMasses<Rational> {
    assemble_masses(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakPdeProblem {
    pub level: u8,
    /// `g(u)` loaded on `μ`, `f(u, ∇u)` loaded on `ν`.
    pub driver: Driver,
    pub boundary: Boundary,
    /// `ψ` on every vertex of `V_m`.
    pub terminal: Vec<f64>,
    pub horizon: f64,
    /// Time step `h`; defaults to the walk step of the level.
    pub step: Option<f64>,
    pub store_gradients: bool,
}

impl WeakPdeProblem {
    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.horizon, self.step.unwrap_or(time_step(self.level)))
    }

    /// `φ(T, ·)` on `V_0` versus `ψ` there; recorded, not enforced.
    pub fn compatibility_gap(&self) -> f64 {
        (0..3).map(|b| fabs(self.boundary.eval(self.horizon, b) - self.terminal[b])).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakPdeSolution {
    pub level: u8,
    pub grid: TimeGrid,
    /// `u[k][x]` at `t_k`.
    pub u: Vec<Vec<f64>>,
    /// Per-cell gradients `∇u[k][cell]`, if requested.
    pub gradients: Vec<Vec<f64>>,
    /// Relative residual of the linear solve at each layer `k < K`.
    pub residuals: Vec<f64>,
    pub compatibility_gap: f64,
}

/// Backward IMEX stepping from `ψ`:
///
/// `μ_x u^k_x + h·½E(u^k, 1_x) = μ_x u^{k+1}_x + h μ_x g(u^{k+1}_x)
///   + h Σ_{cells c ∋ x} f(u^{k+1}_x, ∇_c u^{k+1}) ν(c)/3`
///
/// for interior `x`, with `u^k = φ(t_k)` on `V_0`.
pub fn solve_weak_pde(p: &WeakPdeProblem, g: &LevelGraph) -> Result<WeakPdeSolution> {
    if g.level() != p.level {
        return Err(usage!("graph level {} does not match problem level {}", g.level(), p.level));
    }
    let n = g.vertex_count();
    if p.terminal.len() != n {
        return Err(usage!("terminal table has {} values for {n} vertices", p.terminal.len()));
    }
    p.driver.validate()?;
    let grid = p.grid();
    let h = grid.dt;
    let lip_g = p.driver.g.lipschitz();
    let lip_f = p.driver.f_y.lipschitz().max(p.driver.f_z.lipschitz());
    if !(h > 0.0) || h * lip_g >= 1.0 || h * lip_f >= 1.0 {
        return Err(usage!("step h = {h} violates h·Lip(g) < 1, h·Lip(f) < 1"));
    }

    let masses = assemble_masses::<f64>(g);
    let frame = GradientFrame::new(g.level());
    let c = 0.25 * energy_scale::<f64>(g.level() as u32) * h;
    let m = n.saturating_sub(3);
    let diag: Vec<f64> = (3..n).map(|x| masses.mu[x] + c * g.neighbors(x).map(|nb| nb.len()).unwrap_or(0) as f64).collect();
    let apply = |v: &[f64], out: &mut [f64]| {
        for i in 0..m {
            let x = i + 3;
            let mut s = diag[i] * v[i];
            for &y in g.neighbors(x).expect("vertex in range") {
                if y >= 3 {
                    s -= c * v[y as usize - 3];
                }
            }
            out[i] = s;
        }
    };

    let mut u = alloc::vec![Vec::new(); grid.steps + 1];
    let mut gradients = Vec::new();
    let mut residuals = alloc::vec![0.0; grid.steps];
    let mut last = p.terminal.clone();
    for b in 0..3.min(n) {
        last[b] = p.boundary.eval(grid.horizon, b);
    }
    u[grid.steps] = last;
    let mut grads_next = frame.gradients(g, &u[grid.steps]);
    if p.store_gradients {
        gradients = alloc::vec![Vec::new(); grid.steps + 1];
        gradients[grid.steps] = grads_next.clone();
    }
    for k in (0..grid.steps).rev() {
        let t = grid.time(k);
        let next = &u[k + 1];
        let mut rhs: Vec<f64> = (3..n).map(|x| masses.mu[x] * (next[x] + h * p.driver.g(next[x]))).collect();
        for (ci, cell) in g.cells().iter().enumerate() {
            let share = h * frame.nu()[ci] / 3.0;
            let fz = grads_next[ci];
            for &v in cell {
                let v = v as usize;
                if v >= 3 {
                    rhs[v - 3] += share * p.driver.f(next[v], fz);
                }
            }
        }
        let phi: [f64; 3] = core::array::from_fn(|b| p.boundary.eval(t, b));
        for b in 0..3.min(n) {
            for &y in g.neighbors(b)? {
                if y >= 3 {
                    rhs[y as usize - 3] += c * phi[b];
                }
            }
        }
        let guess = next[3.min(n)..].to_vec();
        let (sol, res) = conjugate_gradient_from(&apply, &rhs, &diag, guess, 1e-13, 20 * m + 200)?;
        let mut layer = alloc::vec![0.0; n];
        layer[..3.min(n)].copy_from_slice(&phi[..3.min(n)]);
        layer[3.min(n)..].copy_from_slice(&sol);
        residuals[k] = res;
        grads_next = frame.gradients(g, &layer);
        if p.store_gradients {
            gradients[k] = grads_next.clone();
        }
        u[k] = layer;
    }
    Ok(WeakPdeSolution { level: p.level, grid, u, gradients, residuals, compatibility_gap: p.compatibility_gap() })
}

/// `exp(−|z − c|² / (2w²))` with `c = (1/2, √3/4)`.
pub fn gaussian_bump(z: &Coord, width: f64) -> f64 {
    let (x, y) = z.to_f64();
    let r2 = (x - 0.5) * (x - 0.5) + (y - 0.433_012_701_892_219_3) * (y - 0.433_012_701_892_219_3);
    exp(-r2 / (2.0 * width * width))
}

/// Level-independent description of a Feynman–Kac test problem.
pub struct FkSpec<'a> {
    pub driver: Driver,
    pub boundary: Boundary,
    pub horizon: f64,
    pub terminal: &'a dyn Fn(&Coord) -> f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FkRow {
    pub level: u8,
    pub time: f64,
    pub vertex: usize,
    pub x: f64,
    pub y: f64,
    pub pde: f64,
    pub bsde: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FkLevel {
    pub level: u8,
    pub rows: Vec<FkRow>,
    pub sup_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FkReport {
    pub levels: Vec<FkLevel>,
    /// Sup error strictly decreases along the ladder.
    pub decreasing: bool,
}

/// Solves the weak PDE and the killed BSDE with `σ^{(t)} = (T − t) ∧ σ_V0`
/// on the same time grid, and compares `u(t, x)` with `Y^{(t)}_0(x)` at the
/// probe points (vertices of `V_probe_level`) and probe times.
pub fn feynman_kac_check(spec: &FkSpec<'_>, levels: &[u8], probe_times: &[f64], probe_level: u8) -> Result<FkReport> {
    let mut out = Vec::with_capacity(levels.len());
    let coarse = LevelGraph::build(probe_level)?;
    for &m in levels {
        if m < probe_level {
            return Err(usage!("level {m} is coarser than the probe level {probe_level}"));
        }
        let g = LevelGraph::build(m)?;
        let kernel = StepKernel::build(&g);
        let terminal: Vec<f64> = g.vertices().iter().map(|v| (spec.terminal)(&v.coord)).collect();
        let pde = WeakPdeProblem {
            level: m,
            driver: spec.driver.clone(),
            boundary: spec.boundary.clone(),
            terminal: terminal.clone(),
            horizon: spec.horizon,
            step: None,
            store_gradients: false,
        };
        let u = solve_weak_pde(&pde, &g)?;
        let mut bp = BsdeProblem::new(spec.driver.clone(), terminal, spec.horizon, Duration::Killed);
        bp.boundary = spec.boundary.clone();
        let y = bsde::solve_dp(&bp, &kernel, Scheme::Explicit)?;
        let ids = g.embed(&coarse)?;
        let mut rows = Vec::new();
        for &t in probe_times {
            let k = u.grid.layer_near(t);
            for &v in &ids {
                let (x, yy) = g.vertices()[v].coord.to_f64();
                let (a, b) = (u.u[k][v], y.y[k][v]);
                rows.push(FkRow { level: m, time: u.grid.time(k), vertex: v, x, y: yy, pde: a, bsde: b, error: fabs(a - b) });
            }
        }
        let sup_error = rows.iter().map(|r| r.error).fold(0.0, f64::max);
        out.push(FkLevel { level: m, rows, sup_error });
    }
    let decreasing = out.windows(2).all(|w| w[1].sup_error < w[0].sup_error);
    Ok(FkReport { levels: out, decreasing })
}
