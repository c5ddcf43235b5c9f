//! Per-vertex transition data of the random walk on `V_m`.
//!
//! From `x` the walk moves to a uniformly chosen neighbour `y`. The
//! increment of the Brownian martingale is the projection of the harmonic
//! increment `d = (Δh₁, Δh₂, Δh₃)` on the principal direction `e(x)` of its
//! conditional covariance, scaled so that
//! `E[ΔW² | x] = Δ⟨W⟩(x) = (1/3) Σ_i E[(Δh_i)² | x]`.

use alloc::vec::Vec;

use libm::{pow, sqrt};

use crate::frame;
use crate::graph::LevelGraph;
use crate::harmonic::cell_values;
use crate::matrix::{Mat3, Vec3};
use crate::scalar::{Rational, Scalar};

/// Levels up to which harmonic tables are computed exactly before rounding.
const EXACT_TABLE_LEVEL: u8 = 8;

/// Diffusion time of one walk step, `(2/3)·5^{-m}`.
///
/// With this clock `E_μ⟨W⟩_t = t`, i.e. the Revuz measure of `⟨W⟩` is the
/// probability measure `ν`.
pub fn time_step(level: u8) -> f64 {
    2.0 / 3.0 * pow(5.0, -(level as f64))
}

#[derive(Debug, Clone)]
pub struct StepKernel {
    level: u8,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    dw: Vec<f64>,
    qv: Vec<f64>,
    direction: Vec<[f64; 3]>,
    residual: Vec<f64>,
    drift: Vec<[f64; 3]>,
}

/// Values of `h₁, h₂, h₃` at every vertex.
pub fn harmonic_basis_tables(g: &LevelGraph) -> Vec<[f64; 3]> {
    let mut out = alloc::vec![[0.0; 3]; g.vertex_count()];
    for i in 0..3 {
        let values: Vec<f64> = if g.level() <= EXACT_TABLE_LEVEL {
            let e: Vec3<Rational> =
                core::array::from_fn(|j| Rational::from_int((i == j) as i64));
            cell_values(&e, g.level()).iter().flat_map(|c| c.iter().map(|v| v.to_f64())).collect()
        } else {
            let e: Vec3<f64> = core::array::from_fn(|j| (i == j) as i64 as f64);
            cell_values(&e, g.level()).iter().flat_map(|c| c.iter().copied()).collect()
        };
        for (cell, vals) in g.cells().iter().zip(values.chunks(3)) {
            for (&v, &val) in cell.iter().zip(vals) {
                out[v as usize][i] = val;
            }
        }
    }
    out
}

impl StepKernel {
    pub fn build(g: &LevelGraph) -> Self {
        let h = harmonic_basis_tables(g);
        let n = g.vertex_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(2 * g.edges().len());
        let mut dw = Vec::with_capacity(2 * g.edges().len());
        let mut qv = Vec::with_capacity(n);
        let mut direction = Vec::with_capacity(n);
        let mut residual = Vec::with_capacity(n);
        let mut drift = Vec::with_capacity(n);
        offsets.push(0);

        for x in 0..n {
            let nb = g.neighbors(x).expect("vertex id in range");
            let p = 1.0 / nb.len() as f64;
            let incs: Vec<[f64; 3]> = nb
                .iter()
                .map(|&y| core::array::from_fn(|i| h[y as usize][i] - h[x][i]))
                .collect();
            let mean: [f64; 3] = core::array::from_fn(|i| p * incs.iter().map(|d| d[i]).sum::<f64>());
            let mut cov = [[0.0; 3]; 3];
            let mut second = 0.0;
            for d in &incs {
                let c: [f64; 3] = core::array::from_fn(|i| d[i] - mean[i]);
                for i in 0..3 {
                    second += p * d[i] * d[i];
                    for j in 0..3 {
                        cov[i][j] += p * c[i] * c[j];
                    }
                }
            }
            let rate = second / 3.0;
            let pr = frame::principal(&Mat3(cov));
            let e = pr.direction;
            // Projections of the centred increments have mean zero and
            // variance lambda_max; rescale to the required second moment.
            let scale = if pr.lambda_max > 0.0 { sqrt(rate / pr.lambda_max) } else { 0.0 };
            for (d, &y) in incs.iter().zip(nb) {
                let proj: f64 = (0..3).map(|i| (d[i] - mean[i]) * e[i]).sum();
                targets.push(y);
                dw.push(scale * proj);
            }
            offsets.push(targets.len());
            qv.push(rate);
            direction.push(e);
            residual.push(pr.residual_fraction());
            drift.push(mean);
        }
        StepKernel { level: g.level(), offsets, targets, dw, qv, direction, residual, drift }
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn vertex_count(&self) -> usize {
        self.qv.len()
    }

    pub fn time_step(&self) -> f64 {
        time_step(self.level)
    }

    pub fn is_boundary(&self, x: usize) -> bool {
        x < 3
    }

    pub fn neighbors(&self, x: usize) -> &[u32] {
        &self.targets[self.offsets[x]..self.offsets[x + 1]]
    }

    /// `ΔW(x → y)` for each neighbour `y`, aligned with [`Self::neighbors`].
    pub fn increments(&self, x: usize) -> &[f64] {
        &self.dw[self.offsets[x]..self.offsets[x + 1]]
    }

    /// Uniform transition probability out of `x`.
    pub fn probability(&self, x: usize) -> f64 {
        1.0 / (self.offsets[x + 1] - self.offsets[x]) as f64
    }

    /// `Δ⟨W⟩(x)`, the conditional second moment of `ΔW` at `x`.
    pub fn qv(&self, x: usize) -> f64 {
        self.qv[x]
    }

    pub fn qv_table(&self) -> &[f64] {
        &self.qv
    }

    /// Principal direction `e(x)` of the harmonic increments.
    pub fn direction(&self, x: usize) -> [f64; 3] {
        self.direction[x]
    }

    /// Fraction of the increment variance orthogonal to `e(x)`.
    pub fn residual_fraction(&self, x: usize) -> f64 {
        self.residual[x]
    }

    /// Mean harmonic increment at `x`; zero except at reflecting `V_0` vertices.
    pub fn drift(&self, x: usize) -> [f64; 3] {
        self.drift[x]
    }

    /// Degree-weighted stationary law of the reflected walk (equal to the
    /// lumped Hausdorff measure).
    pub fn stationary(&self) -> Vec<f64> {
        let total = self.targets.len() as f64;
        (0..self.vertex_count()).map(|x| (self.offsets[x + 1] - self.offsets[x]) as f64 / total).collect()
    }

    /// Largest conditional-moment defect over all vertices:
    /// `max(|E[ΔW|x]|, |E[ΔW²|x] − Δ⟨W⟩(x)|)`.
    pub fn moment_defect(&self) -> f64 {
        (0..self.vertex_count())
            .map(|x| {
                let p = self.probability(x);
                let inc = self.increments(x);
                let m1: f64 = inc.iter().map(|d| p * d).sum();
                let m2: f64 = inc.iter().map(|d| p * d * d).sum();
                m1.abs().max((m2 - self.qv(x)).abs())
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::CellWord;
    use crate::graph::Coord;
    use crate::harmonic::restrict;

    #[test]
    fn level_zero_corner() {
        let g = LevelGraph::build(0).unwrap();
        let k = StepKernel::build(&g);
        assert_eq!(k.neighbors(0), &[1, 2]);
        // E[Δh1²] = 1, E[Δh2²] = E[Δh3²] = 1/2.
        assert!((k.qv(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!(k.moment_defect() < 1e-15);
    }

    #[test]
    fn moments_hold_at_every_vertex() {
        for m in 0..=6u8 {
            let g = LevelGraph::build(m).unwrap();
            let k = StepKernel::build(&g);
            assert!(k.moment_defect() < 1e-12, "m={m}");
            for x in 0..k.vertex_count() {
                let total: f64 = k.neighbors(x).iter().map(|_| k.probability(x)).sum();
                assert!((total - 1.0).abs() < 1e-15);
                let e = k.direction(x);
                assert!(e[0] < 0.0 || (e[0] == 0.0 && e[1] > 0.0));
                if x >= 3 {
                    assert!(k.drift(x).iter().all(|d| d.abs() < 1e-14), "harmonic at interior {x}");
                }
            }
        }
    }

    #[test]
    fn midpoint_example() {
        // Between p1 and p2 at m = 1 the centred covariance has eigenvalues
        // 0.26 and 0.06 with principal direction (−1, 1, 0)/√2.
        let g = LevelGraph::build(1).unwrap();
        let k = StepKernel::build(&g);
        let x = g.vertex_at(&Coord::corner(1).midpoint(&Coord::corner(2))).unwrap();
        let e = k.direction(x);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert!((e[0] + s).abs() < 1e-14 && (e[1] - s).abs() < 1e-14 && e[2].abs() < 1e-14);
        assert!((k.residual_fraction(x) - 0.06 / 0.32).abs() < 1e-13);
        assert!((k.qv(x) - 0.32 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn rate_from_cell_matrices() {
        // Second route: increments along the edges of the cells containing x,
        // from the corner values A_w e_i of each cell.
        let g = LevelGraph::build(1).unwrap();
        let k = StepKernel::build(&g);
        for x in 3..g.vertex_count() {
            let mut sum = 0.0;
            let mut edges = 0;
            for w in CellWord::all(1) {
                let corners = g.cell_corners(&w).unwrap();
                let Some(pos) = corners.iter().position(|&c| c == x) else { continue };
                for i in 0..3 {
                    let e: Vec3<Rational> = core::array::from_fn(|j| Rational::from_int((i == j) as i64));
                    let vals = restrict(&e, &w);
                    for j in (0..3).filter(|&j| j != pos) {
                        let d = (vals[j].clone() - vals[pos].clone()).to_f64();
                        sum += d * d;
                    }
                }
                edges += 2;
            }
            let rate = sum / edges as f64 / 3.0;
            assert!((rate - k.qv(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_law_is_lumped_hausdorff() {
        let g = LevelGraph::build(1).unwrap();
        let k = StepKernel::build(&g);
        let pi = k.stationary();
        for x in 0..6 {
            let want = if x < 3 { 1.0 / 9.0 } else { 2.0 / 9.0 };
            assert!((pi[x] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn revuz_mean_rate_is_one_time_unit() {
        for m in 1..=6u8 {
            let g = LevelGraph::build(m).unwrap();
            let k = StepKernel::build(&g);
            let mean: f64 = k.stationary().iter().zip(k.qv_table()).map(|(p, q)| p * q).sum();
            assert!((mean / k.time_step() - 1.0).abs() < 1e-12, "m={m}");
        }
    }
}
