//! Harmonic extension, graph energies `E^(m)` and cell energy measures.
//!
//! `E^(m)(u, v) = ½ (5/3)^m Σ (u(x) − u(y))(v(x) − v(y))` over unordered
//! edges; with this normalisation `E^(0)(u, u) = (3/2) uᵗ P u`.

use alloc::vec::Vec;

use libm::sqrt;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cell::CellWord;
use crate::error::{usage, Result};
use crate::frame;
use crate::graph::LevelGraph;
use crate::matrix::{harmonic_matrix, p_form, projection, word_matrix, Mat3, Vec3};
use crate::scalar::{energy_scale, Scalar};

/// `(Hu) ∘ F_[w]` on `V_0`, i.e. `A_[w] u`.
pub fn restrict<T: Scalar>(u: &Vec3<T>, word: &CellWord) -> Vec3<T> {
    word.symbols().iter().fold(u.clone(), |acc, &s| harmonic_matrix::<T>(s).apply(&acc))
}

/// Corner values `A_[w] u` of every level-`m` cell, in lexicographic order.
pub fn cell_values<T: Scalar>(u: &Vec3<T>, level: u8) -> Vec<Vec3<T>> {
    let a: [Mat3<T>; 3] = [harmonic_matrix(1), harmonic_matrix(2), harmonic_matrix(3)];
    let mut layer = alloc::vec![u.clone()];
    for _ in 0..level {
        layer = layer.iter().flat_map(|c| a.iter().map(move |ai| ai.apply(c))).collect();
    }
    layer
}

/// Values of the harmonic extension `Hu` on every vertex of `g`.
///
/// Returns a usage error if two cells disagree on a shared vertex, which
/// cannot happen for the harmonic matrices but is checked regardless.
pub fn extend<T: Scalar>(u: &Vec3<T>, g: &LevelGraph) -> Result<Vec<T>> {
    let values = cell_values(u, g.level());
    let mut table: Vec<Option<T>> = alloc::vec![None; g.vertex_count()];
    for (corners, vals) in g.cells().iter().zip(values) {
        for (&id, v) in corners.iter().zip(vals) {
            match &table[id as usize] {
                None => table[id as usize] = Some(v),
                Some(existing) if *existing == v => {}
                Some(_) => return Err(usage!("harmonic extension is inconsistent at vertex {id}")),
            }
        }
    }
    Ok(table.into_iter().map(|v| v.unwrap_or_else(T::zero)).collect())
}

/// `E^(m)(u, v)` on the graph `g`.
pub fn graph_energy<T: Scalar>(g: &LevelGraph, u: &[T], v: &[T]) -> Result<T> {
    let n = g.vertex_count();
    if u.len() != n || v.len() != n {
        return Err(usage!("tables have {} and {} values but V_{} has {n} vertices", u.len(), v.len(), g.level()));
    }
    let mut sum = T::zero();
    for &(a, b) in g.edges() {
        let (a, b) = (a as usize, b as usize);
        sum = sum + (u[a].clone() - u[b].clone()) * (v[a].clone() - v[b].clone());
    }
    Ok(sum * energy_scale::<T>(g.level() as u32) / T::from_int(2))
}

/// `E(Hu, Hu) = (3/2) uᵗ P u`.
pub fn harmonic_energy<T: Scalar>(u: &Vec3<T>) -> T {
    T::from_ratio(3, 2) * p_form(u)
}

/// `ν_⟨Hu⟩(F_[w] S) = (3/2)(5/3)^m (A_[w] u)ᵗ P (A_[w] u)`.
pub fn cell_energy_measure<T: Scalar>(u: &Vec3<T>, word: &CellWord) -> T {
    let c = restrict(u, word);
    energy_scale::<T>(word.len() as u32) * harmonic_energy(&c)
}

/// Per-cell data for the discrete gradient at one level.
#[derive(Debug, Clone)]
pub struct GradientFrame {
    level: u8,
    /// Unit vector `v_w = P A_w e_w / |…|` orienting each cell.
    orientation: Vec<[f64; 3]>,
    /// Kusuoka cell masses `ν(w)`.
    nu: Vec<f64>,
}

impl GradientFrame {
    /// Builds the frame from the harmonic matrices of all cells of `level`.
    pub fn new(level: u8) -> Self {
        let a: [Mat3<f64>; 3] = [harmonic_matrix(1), harmonic_matrix(2), harmonic_matrix(3)];
        let p = projection::<f64>();
        let mut layer = alloc::vec![Mat3::<f64>::identity()];
        for _ in 0..level {
            layer = layer.iter().flat_map(|m| a.iter().map(move |ai| ai * m)).collect();
        }
        let scale = energy_scale::<f64>(level as u32);
        let mut orientation = Vec::with_capacity(layer.len());
        let mut nu = Vec::with_capacity(layer.len());
        for aw in &layer {
            let pa = &p * aw;
            let form = &pa.transpose() * &pa;
            let e = frame::principal(&form).direction;
            let v = pa.apply(&e);
            let n = sqrt(v.iter().map(|x| x * x).sum::<f64>());
            orientation.push(v.map(|x| x / n));
            nu.push(0.5 * scale * form.trace());
        }
        GradientFrame { level, orientation, nu }
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// Gradient on cell `index` of the harmonic interpolant of `corners`:
    /// `sign · √(ν_⟨u⟩(cell) / ν(cell))`.
    pub fn gradient(&self, index: usize, corners: &[f64; 3]) -> f64 {
        let energy = energy_scale::<f64>(self.level as u32) * harmonic_energy(corners);
        let nu = self.nu[index];
        if !(nu > 0.0) || energy <= 0.0 {
            return 0.0;
        }
        let v = &self.orientation[index];
        let s = corners[0] * v[0] + corners[1] * v[1] + corners[2] * v[2];
        let mag = sqrt(energy / nu);
        if s < 0.0 {
            -mag
        } else {
            mag
        }
    }

    /// Gradients of a vertex table on every cell of `g`.
    pub fn gradients(&self, g: &LevelGraph, table: &[f64]) -> Vec<f64> {
        g.cells()
            .iter()
            .enumerate()
            .map(|(i, c)| self.gradient(i, &c.map(|v| table[v as usize])))
            .collect()
    }
}

/// Discrete gradient of a vertex table on one cell.
pub fn discrete_gradient(table: &[f64], word: &CellWord, g: &LevelGraph) -> Result<f64> {
    if table.len() != g.vertex_count() {
        return Err(usage!("table has {} values, expected {}", table.len(), g.vertex_count()));
    }
    let corners = g.cell_corners(word)?.map(|v| table[v]);
    let aw = word_matrix::<f64>(word.symbols());
    let pa = &projection::<f64>() * &aw;
    let form = &pa.transpose() * &pa;
    let nu = 0.5 * energy_scale::<f64>(word.len() as u32) * form.trace();
    if !(nu > 0.0) {
        return Err(usage!("cell {word} has zero Kusuoka mass"));
    }
    let energy = energy_scale::<f64>(word.len() as u32) * harmonic_energy(&corners);
    if energy <= 0.0 {
        return Ok(0.0);
    }
    let v = pa.apply(&frame::principal(&form).direction);
    let s = corners[0] * v[0] + corners[1] * v[1] + corners[2] * v[2];
    let mag = sqrt(energy / nu);
    Ok(if s < 0.0 { -mag } else { mag })
}

/// One row of the oscillation probe.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OscillationSample {
    pub boundary: [f64; 3],
    pub oscillation: f64,
    pub energy: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OscillationProbe {
    pub level: u8,
    pub samples: Vec<OscillationSample>,
    /// Largest observed `osc / √E`; a lower bound for the constant `C_*`.
    pub lower_bound: f64,
}

fn oscillation_sample(g: &LevelGraph, u: [i64; 3]) -> Result<Option<OscillationSample>> {
    let uq = u.map(|v| crate::scalar::Rational::from_int(v));
    let energy = harmonic_energy(&uq).to_f64();
    if energy == 0.0 {
        return Ok(None);
    }
    let table = extend(&uq, g)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in &table {
        let x = v.to_f64();
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let oscillation = hi - lo;
    Ok(Some(OscillationSample {
        boundary: u.map(|v| v as f64),
        oscillation,
        energy,
        ratio: oscillation / sqrt(energy),
    }))
}

/// Samples integer boundary triples, always including `e₁`, and records
/// `osc_{V_m}(Hu) / √E(Hu)`. Constant triples are skipped.
pub fn oscillation_probe(level: u8, sample_count: usize, seed: u64) -> Result<OscillationProbe> {
    let g = LevelGraph::build(level)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(sample_count + 1);
    if let Some(s) = oscillation_sample(&g, [1, 0, 0])? {
        samples.push(s);
    }
    while samples.len() < sample_count + 1 {
        let u = core::array::from_fn(|_| (rng.next_u32() % 201) as i64 - 100);
        if let Some(s) = oscillation_sample(&g, u)? {
            samples.push(s);
        }
    }
    let lower_bound = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(OscillationProbe { level, samples, lower_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use num_traits::{One, Zero};

    type Q = Rational;

    fn q(n: i64, d: i64) -> Q {
        Q::from_ratio(n, d)
    }

    fn e1() -> Vec3<Q> {
        [q(1, 1), q(0, 1), q(0, 1)]
    }

    #[test]
    fn restriction_examples() {
        let w1 = CellWord::parse("1").unwrap();
        assert_eq!(restrict(&e1(), &w1), [q(1, 1), q(2, 5), q(2, 5)]);
        let u = [q(3, 7), q(-1, 2), q(5, 1)];
        assert_eq!(restrict(&u, &CellWord::empty()), u);
    }

    #[test]
    fn level_one_extension() {
        let g = LevelGraph::build(1).unwrap();
        let t = extend(&e1(), &g).unwrap();
        for v in g.vertices() {
            let (c, expected) = (v.coord, &t[v.id]);
            let (x, y) = c.to_f64();
            let want = if v.id == 0 {
                q(1, 1)
            } else if v.boundary {
                q(0, 1)
            } else if (y - 0.0).abs() < 1e-12 || (x - 0.25).abs() < 1e-12 {
                // midpoints on the sides through p1
                q(2, 5)
            } else {
                q(1, 5)
            };
            assert_eq!(*expected, want, "vertex {:?}", (x, y));
        }
    }

    #[test]
    fn constants_extend_to_constants() {
        let g = LevelGraph::build(4).unwrap();
        let c = [q(7, 3), q(7, 3), q(7, 3)];
        assert!(extend(&c, &g).unwrap().iter().all(|v| *v == q(7, 3)));
    }

    /// Dense Gauss–Jordan solve of the graph Dirichlet problem as oracle.
    fn dirichlet_oracle(g: &LevelGraph, u: &Vec3<Q>) -> Vec<Q> {
        let n = g.vertex_count();
        let interior: Vec<usize> = (3..n).collect();
        let k = interior.len();
        let mut a = alloc::vec![alloc::vec![Q::zero(); k + 1]; k];
        for (r, &x) in interior.iter().enumerate() {
            let nb = g.neighbors(x).unwrap();
            a[r][r] = Q::from_int(nb.len() as i64);
            for &y in nb {
                let y = y as usize;
                if y < 3 {
                    a[r][k] = a[r][k].clone() + u[y].clone();
                } else {
                    a[r][y - 3] = a[r][y - 3].clone() - Q::one();
                }
            }
        }
        for col in 0..k {
            let piv = (col..k).find(|&r| !a[r][col].is_zero()).unwrap();
            a.swap(col, piv);
            let inv = Q::one() / a[col][col].clone();
            for j in col..=k {
                a[col][j] = a[col][j].clone() * inv.clone();
            }
            for r in 0..k {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for j in col..=k {
                        a[r][j] = a[r][j].clone() - f.clone() * a[col][j].clone();
                    }
                }
            }
        }
        let mut out = u.to_vec();
        out.extend(a.into_iter().map(|row| row[k].clone()));
        out
    }

    #[test]
    fn extension_solves_dirichlet_problem() {
        let g = LevelGraph::build(3).unwrap();
        for u in [e1(), [q(1, 3), q(-2, 1), q(5, 7)]] {
            assert_eq!(extend(&u, &g).unwrap(), dirichlet_oracle(&g, &u));
        }
    }

    #[test]
    fn energy_examples() {
        let g0 = LevelGraph::build(0).unwrap();
        let t = extend(&e1(), &g0).unwrap();
        assert_eq!(graph_energy(&g0, &t, &t).unwrap(), Q::one());
        assert_eq!(harmonic_energy(&e1()), Q::one());
        let u = [q(1, 1), q(2, 1), q(3, 1)];
        assert_eq!(graph_energy(&g0, &u, &u).unwrap(), harmonic_energy(&u));
        assert_eq!(harmonic_energy(&u), q(3, 1));

        let g5 = LevelGraph::build(5).unwrap();
        let t = extend(&e1(), &g5).unwrap();
        assert_eq!(graph_energy(&g5, &t, &t).unwrap(), Q::one());
        let c = alloc::vec![q(2, 1); g5.vertex_count()];
        assert!(graph_energy(&g5, &c, &c).unwrap().is_zero());
        assert!(graph_energy(&g5, &c[1..], &c).is_err());
    }

    #[test]
    fn cell_energy_additivity() {
        assert_eq!(cell_energy_measure(&e1(), &CellWord::empty()), Q::one());
        let total = (1..=3u8)
            .map(|i| cell_energy_measure(&e1(), &CellWord::empty().child(i)))
            .fold(Q::zero(), |a, b| a + b);
        assert_eq!(total, Q::one());
        let c = [q(4, 1), q(4, 1), q(4, 1)];
        assert!(cell_energy_measure(&c, &CellWord::parse("312").unwrap()).is_zero());
    }

    #[test]
    fn gradient_examples() {
        let g0 = LevelGraph::build(0).unwrap();
        let h1 = [1.0, 0.0, 0.0];
        let d = discrete_gradient(&h1, &CellWord::empty(), &g0).unwrap();
        assert!((d + 1.0).abs() < 1e-14, "{d}");
        let g3 = LevelGraph::build(3).unwrap();
        let ones = alloc::vec![1.0; g3.vertex_count()];
        for w in CellWord::all(3) {
            assert_eq!(discrete_gradient(&ones, &w, &g3).unwrap(), 0.0);
        }
    }

    #[test]
    fn gradient_isometry_and_frame_agreement() {
        for m in 0..=5u8 {
            let g = LevelGraph::build(m).unwrap();
            let frame = GradientFrame::new(m);
            for u in [[1.0, 0.0, 0.0], [0.3, -1.2, 2.0]] {
                let uq = u.map(|x| Q::from_ratio((x * 10.0) as i64, 10));
                let table: Vec<f64> = extend(&uq, &g).unwrap().iter().map(|v| v.to_f64()).collect();
                let grads = frame.gradients(&g, &table);
                let lhs: f64 = grads.iter().zip(frame.nu()).map(|(d, n)| d * d * n).sum();
                let energy = harmonic_energy(&uq).to_f64();
                assert!((lhs - energy).abs() < 1e-12 * energy.max(1.0), "m={m}: {lhs} vs {energy}");
                for (i, w) in CellWord::all(m as usize).enumerate() {
                    let d = discrete_gradient(&table, &w, &g).unwrap();
                    assert!((d - grads[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn h1_gradient_is_negative_where_defined() {
        // ∇h₁ < 0 ν-a.e.; the surrogate has the sign on every cell of level ≤ 5.
        for m in 0..=5u8 {
            let g = LevelGraph::build(m).unwrap();
            let table: Vec<f64> = extend(&e1(), &g).unwrap().iter().map(|v| v.to_f64()).collect();
            let frame = GradientFrame::new(m);
            let neg = frame.gradients(&g, &table).iter().filter(|d| **d < 0.0).count();
            assert_eq!(neg, g.cell_count(), "level {m}");
        }
    }

    #[test]
    fn oscillation_probe_includes_e1() {
        let p = oscillation_probe(3, 20, 7).unwrap();
        assert_eq!(p.samples.len(), 21);
        assert!((p.samples[0].ratio - 1.0).abs() < 1e-15);
        assert!(p.lower_bound >= 1.0);
    }
}
