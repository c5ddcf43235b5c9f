//! Hausdorff, Kusuoka and energy measures of cells.

use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::cell::CellWord;
use crate::error::{usage, Result};
use crate::harmonic::{cell_energy_measure, harmonic_energy};
use crate::matrix::{harmonic_matrix, kusuoka_matrix, projection, Mat3, Vec3};
use crate::scalar::{energy_scale, Rational, Scalar};
use crate::MAX_EXACT_LEVEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    Hausdorff,
    Kusuoka,
    Energy,
}

/// Masses of all level-`m` cells, indexed in lexicographic word order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMeasure<T> {
    pub kind: MeasureKind,
    pub level: u8,
    pub masses: Vec<T>,
}

impl<T: Scalar> CellMeasure<T> {
    pub fn mass(&self, word: &CellWord) -> Result<&T> {
        if word.len() != self.level as usize {
            return Err(usage!("word {word} does not have length {}", self.level));
        }
        Ok(&self.masses[word.index()])
    }

    pub fn total(&self) -> T {
        self.masses.iter().cloned().fold(T::zero(), |a, b| a + b)
    }

    /// Masses of the parent level obtained by summing children.
    pub fn coarsen(&self) -> Option<CellMeasure<T>> {
        if self.level == 0 {
            return None;
        }
        let masses = self
            .masses
            .chunks(3)
            .map(|c| c[0].clone() + c[1].clone() + c[2].clone())
            .collect();
        Some(CellMeasure { kind: self.kind, level: self.level - 1, masses })
    }
}

/// `μ(F_[w] S) = 3^{-|w|}`.
pub fn hausdorff_mass<T: Scalar>(word: &CellWord) -> T {
    T::one() / T::from_int(3).powi(word.len() as u32)
}

/// `Y_[w] = Y_{w_m} ⋯ Y_{w_1}`; the empty product is `P`, the identity on
/// the range of `P` where all the `Y_i` act.
pub fn kusuoka_product<T: Scalar>(symbols: &[u8]) -> Mat3<T> {
    symbols.iter().fold(projection(), |acc, &s| &kusuoka_matrix(s) * &acc)
}

/// `ν(F_[w] S) = ½ (5/3)^m tr(Y_[w]ᵗ Y_[w])`.
pub fn kusuoka_mass<T: Scalar>(word: &CellWord) -> T {
    let y = kusuoka_product::<T>(word.symbols());
    energy_scale::<T>(word.len() as u32) * (&y.transpose() * &y).trace() / T::from_int(2)
}

fn check_exact_level(level: u8) -> Result<()> {
    if level > MAX_EXACT_LEVEL {
        return Err(crate::Error::Capacity(alloc::format!(
            "exact cell tables are limited to level {MAX_EXACT_LEVEL}"
        )));
    }
    Ok(())
}

/// Kusuoka masses of all level-`m` cells via products of `Y_i`.
pub fn kusuoka_table<T: Scalar>(level: u8) -> CellMeasure<T> {
    let y: [Mat3<T>; 3] = [kusuoka_matrix(1), kusuoka_matrix(2), kusuoka_matrix(3)];
    let mut layer = alloc::vec![projection::<T>()];
    for _ in 0..level {
        layer = layer.iter().flat_map(|m| y.iter().map(move |yi| yi * m)).collect();
    }
    let scale = energy_scale::<T>(level as u32) / T::from_int(2);
    let masses = layer.iter().map(|m| scale.clone() * (&m.transpose() * m).trace()).collect();
    CellMeasure { kind: MeasureKind::Kusuoka, level, masses }
}

pub fn hausdorff_table<T: Scalar>(level: u8) -> CellMeasure<T> {
    let mass = T::one() / T::from_int(3).powi(level as u32);
    CellMeasure { kind: MeasureKind::Hausdorff, level, masses: alloc::vec![mass; 3usize.pow(level as u32)] }
}

/// `ν_⟨Hu⟩` on every level-`m` cell.
pub fn energy_measure_table<T: Scalar>(u: &Vec3<T>, level: u8) -> CellMeasure<T> {
    let scale = energy_scale::<T>(level as u32);
    let masses = crate::harmonic::cell_values(u, level)
        .iter()
        .map(|c| scale.clone() * harmonic_energy(c))
        .collect();
    CellMeasure { kind: MeasureKind::Energy, level, masses }
}

/// Largest `|ν(w) − (1/3) Σ_i ν_⟨h_i⟩(w)|` over level-`m` cells, with `ν`
/// from the `Y`-products and the energy measures from the `A`-products.
pub fn kusuoka_identity_check(level: u8) -> Result<Rational> {
    check_exact_level(level)?;
    let nu = kusuoka_table::<Rational>(level);
    let basis: [Vec3<Rational>; 3] = core::array::from_fn(|i| {
        core::array::from_fn(|j| if i == j { Rational::one() } else { Rational::zero() })
    });
    let tables: Vec<_> = basis.iter().map(|h| energy_measure_table(h, level)).collect();
    let third = Rational::from_ratio(1, 3);
    let mut worst = Rational::zero();
    for (i, n) in nu.masses.iter().enumerate() {
        let avg = (tables[0].masses[i].clone() + tables[1].masses[i].clone() + tables[2].masses[i].clone())
            * third.clone();
        let d = (n.clone() - avg).abs();
        if d > worst {
            worst = d;
        }
    }
    Ok(worst)
}

/// Single-cell variant of the identity, used for spot checks.
pub fn kusuoka_identity_defect(word: &CellWord) -> Rational {
    let mut avg = Rational::zero();
    for i in 0..3 {
        let h: Vec3<Rational> = core::array::from_fn(|j| if i == j { Rational::one() } else { Rational::zero() });
        avg = avg + cell_energy_measure(&h, word);
    }
    (kusuoka_mass::<Rational>(word) - avg / Rational::from_int(3)).abs()
}

/// Density ratios `ν(w) / μ(w) = 3^m ν(w)` at level `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularityDiagnostic {
    pub level: u8,
    pub max_ratio: Rational,
    pub min_ratio: Rational,
    pub ratio_at_ones: Rational,
}

pub fn singularity_diagnostic(level: u8) -> Result<SingularityDiagnostic> {
    check_exact_level(level)?;
    let nu = kusuoka_table::<Rational>(level);
    let scale = Rational::from_int(3).powi(level as u32);
    let mut max_ratio = Rational::zero();
    let mut min_ratio: Option<Rational> = None;
    for m in &nu.masses {
        let r = m.clone() * scale.clone();
        if r > max_ratio {
            max_ratio = r.clone();
        }
        if min_ratio.as_ref().is_none_or(|lo| r < *lo) {
            min_ratio = Some(r);
        }
    }
    // The word 1^m is the first cell in lexicographic order.
    let ratio_at_ones = nu.masses[0].clone() * scale;
    Ok(SingularityDiagnostic { level, max_ratio, min_ratio: min_ratio.unwrap_or_default(), ratio_at_ones })
}

/// `½[(9/5)^m + (1/5)^m]`, the closed form of `3^m ν(1^m)` obtained from the
/// eigenvalues `{3/5, 1/5}` of `Y_1` on the range of `P`.
pub fn ones_ratio_closed_form(level: u8) -> Rational {
    let m = level as u32;
    (Rational::from_ratio(9, 5).powi(m) + Rational::from_ratio(1, 5).powi(m)) / Rational::from_int(2)
}

/// `A`-product route to `ν(w)`: `½ (5/3)^m tr(A_[w]ᵗ P A_[w])`.
pub fn kusuoka_mass_via_harmonic<T: Scalar>(word: &CellWord) -> T {
    let a = word
        .symbols()
        .iter()
        .fold(Mat3::<T>::identity(), |acc, &s| &harmonic_matrix::<T>(s) * &acc);
    let form = &(&a.transpose() * &projection()) * &a;
    energy_scale::<T>(word.len() as u32) * form.trace() / T::from_int(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    type Q = Rational;

    fn q(n: i64, d: i64) -> Q {
        Q::from_ratio(n, d)
    }

    fn w(s: &str) -> CellWord {
        CellWord::parse(s).unwrap()
    }

    /// Explicit trace oracle: Y1ᵗY1 expanded by hand-coded loops over the
    /// rational entries (5Y1 has integer entries).
    fn nu_oracle(word: &[u8]) -> Q {
        let y_int = |i: u8| -> [[i64; 3]; 3] {
            // 15·Y_i = 3·(P·5A_i)
            let a = match i {
                1 => [[5, 0, 0], [2, 2, 1], [2, 1, 2]],
                2 => [[2, 2, 1], [0, 5, 0], [1, 2, 2]],
                _ => [[2, 1, 2], [1, 2, 2], [0, 0, 5]],
            };
            let p = [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]];
            let mut out = [[0i64; 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    out[r][c] = (0..3).map(|k| p[r][k] * a[k][c]).sum();
                }
            }
            out
        };
        let mut m = [[2i64, -1, -1], [-1, 2, -1], [-1, -1, 2]];
        let mut den = 3i64;
        for &s in word {
            let y = y_int(s);
            let mut next = [[0i64; 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    next[r][c] = (0..3).map(|k| y[r][k] * m[k][c]).sum();
                }
            }
            m = next;
            den *= 15;
        }
        let tr: i64 = (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).map(|(r, c)| m[r][c] * m[r][c]).sum();
        let scale = Q::from_ratio(5, 3).powi(word.len() as u32) / Q::from_int(2);
        scale * Q::from_ratio(tr, den * den)
    }

    #[test]
    fn kusuoka_examples() {
        assert_eq!(kusuoka_mass::<Q>(&CellWord::empty()), q(1, 1));
        for s in ["1", "2", "3"] {
            assert_eq!(kusuoka_mass::<Q>(&w(s)), q(1, 3));
        }
        assert_eq!(kusuoka_mass::<Q>(&w("11")), q(41, 225));
        assert_eq!(kusuoka_mass::<Q>(&w("12")), q(17, 225));
        assert_eq!(kusuoka_mass::<Q>(&w("11")) + q(2, 1) * kusuoka_mass::<Q>(&w("12")), q(1, 3));
        for word in ["11", "12", "213", "3312"] {
            let word = w(word);
            assert_eq!(kusuoka_mass::<Q>(&word), nu_oracle(word.symbols()));
            assert_eq!(kusuoka_mass::<Q>(&word), kusuoka_mass_via_harmonic::<Q>(&word));
        }
    }

    #[test]
    fn y1_fourth_power_trace() {
        let y = kusuoka_product::<Q>(&[1, 1]);
        assert_eq!((&y.transpose() * &y).trace(), q(82, 625));
    }

    #[test]
    fn hausdorff_examples() {
        assert_eq!(hausdorff_mass::<Q>(&CellWord::empty()), q(1, 1));
        assert_eq!(hausdorff_mass::<Q>(&w("3")), q(1, 3));
        assert_eq!(hausdorff_mass::<Q>(&w("12")), q(1, 9));
    }

    #[test]
    fn additivity_and_totals() {
        let e1 = [q(1, 1), q(0, 1), q(0, 1)];
        for m in 0..=7u8 {
            let nu = kusuoka_table::<Q>(m);
            assert_eq!(nu.total(), q(1, 1));
            let en = energy_measure_table(&e1, m);
            assert_eq!(en.total(), q(1, 1));
            assert_eq!(hausdorff_table::<Q>(m).total(), q(1, 1));
            if m > 0 {
                assert_eq!(nu.coarsen().unwrap(), kusuoka_table::<Q>(m - 1));
                assert_eq!(en.coarsen().unwrap().masses, energy_measure_table(&e1, m - 1).masses);
            }
        }
        let c = [q(2, 1), q(2, 1), q(2, 1)];
        assert!(energy_measure_table(&c, 3).masses.iter().all(Zero::is_zero));
        assert_eq!(energy_measure_table(&e1, 2).masses.len(), 9);
    }

    #[test]
    fn identity_small_levels() {
        for m in 0..=5u8 {
            assert!(kusuoka_identity_check(m).unwrap().is_zero());
        }
        assert!(kusuoka_identity_defect(&w("23131")).is_zero());
    }

    #[test]
    fn singularity_examples() {
        let d1 = singularity_diagnostic(1).unwrap();
        assert_eq!((d1.max_ratio.clone(), d1.min_ratio.clone()), (q(1, 1), q(1, 1)));
        let d2 = singularity_diagnostic(2).unwrap();
        assert_eq!(d2.ratio_at_ones, q(41, 25));
        let d6 = singularity_diagnostic(6).unwrap();
        assert_eq!(d6.ratio_at_ones, ones_ratio_closed_form(6));
        assert!((d6.ratio_at_ones.to_f64() - 17.0).abs() < 0.01);
        let mut prev = q(0, 1);
        for m in 1..=7 {
            let d = singularity_diagnostic(m).unwrap();
            assert!(d.max_ratio > prev);
            prev = d.max_ratio;
        }
    }
}
