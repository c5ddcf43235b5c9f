//! Principal directions of symmetric forms on the range of `P`.
//!
//! Both the step kernel (covariance of harmonic increments at a vertex) and
//! the per-cell gradient (the form `A_wᵗ P A_w`) need a unit vector in
//! `{v : v₁+v₂+v₃ = 0}` with a fixed sign. The sign convention makes the
//! first component non-positive so that `h₁` has a negative gradient.

use libm::sqrt;

use crate::matrix::Mat3;

const INV_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_6: f64 = 0.408_248_290_463_863_f64;

/// Orthonormal basis of the range of `P`.
const B1: [f64; 3] = [INV_SQRT_2, -INV_SQRT_2, 0.0];
const B2: [f64; 3] = [INV_SQRT_6, INV_SQRT_6, -2.0 * INV_SQRT_6];

/// Relative eigenvalue gap below which the form counts as isotropic.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Principal {
    pub direction: [f64; 3],
    pub lambda_max: f64,
    pub lambda_min: f64,
}

impl Principal {
    /// Share of the trace not captured by `direction`.
    pub fn residual_fraction(&self) -> f64 {
        let tr = self.lambda_max + self.lambda_min;
        if tr > 0.0 {
            self.lambda_min / tr
        } else {
            0.0
        }
    }
}

/// Largest eigenpair of a symmetric form restricted to the range of `P`.
///
/// When the two eigenvalues coincide every direction is principal and the
/// direction of `−P e₁` is returned.
pub fn principal(c: &Mat3<f64>) -> Principal {
    let form = |a: &[f64; 3], b: &[f64; 3]| -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += a[i] * c.0[i][j] * b[j];
            }
        }
        s
    };
    let (p, r, q) = (form(&B1, &B1), form(&B1, &B2), form(&B2, &B2));
    let mean = 0.5 * (p + q);
    let half_gap = sqrt(0.25 * (p - q) * (p - q) + r * r);
    let lambda_max = mean + half_gap;
    let lambda_min = mean - half_gap;

    let scale = lambda_max.abs().max(f64::MIN_POSITIVE);
    let direction = if half_gap <= DEGENERACY_TOL * scale {
        [-2.0 * INV_SQRT_6, INV_SQRT_6, INV_SQRT_6]
    } else {
        // Eigenvector of [[p, r], [r, q]] for lambda_max, taking the better
        // conditioned of the two equivalent expressions.
        let (s, t) = if p >= q { (lambda_max - q, r) } else { (r, lambda_max - p) };
        let n = sqrt(s * s + t * t);
        let (s, t) = (s / n, t / n);
        orient(core::array::from_fn(|i| s * B1[i] + t * B2[i]))
    };
    Principal { direction, lambda_max, lambda_min }
}

/// Applies the sign convention `e₁ ≤ 0`, and `e₂ > 0` when `e₁ = 0`.
pub fn orient(v: [f64; 3]) -> [f64; 3] {
    let flip = if v[0] != 0.0 { v[0] > 0.0 } else { v[1] < 0.0 };
    if flip {
        v.map(|x| -x)
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::projection;

    fn outer_sum(vs: &[[f64; 3]]) -> Mat3<f64> {
        let mut m = [[0.0; 3]; 3];
        for v in vs {
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += v[i] * v[j];
                }
            }
        }
        Mat3(m)
    }

    #[test]
    fn isotropic_form_uses_default() {
        let p = principal(&projection::<f64>());
        assert!((p.lambda_max - 1.0).abs() < 1e-15 && (p.lambda_min - 1.0).abs() < 1e-15);
        assert_eq!(p.direction, [-2.0 * INV_SQRT_6, INV_SQRT_6, INV_SQRT_6]);
    }

    #[test]
    fn rank_one() {
        let v = [1.0, -1.0, 0.0];
        let p = principal(&outer_sum(&[v]));
        assert!((p.lambda_max - 2.0).abs() < 1e-14);
        assert!(p.lambda_min.abs() < 1e-14);
        assert!((p.direction[0] + INV_SQRT_2).abs() < 1e-14);
        assert!((p.direction[1] - INV_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn tie_break_on_zero_first_component() {
        let p = principal(&outer_sum(&[[0.0, 1.0, -1.0]]));
        assert!(p.direction[0].abs() < 1e-15);
        assert!(p.direction[1] > 0.0);
    }

    #[test]
    fn eigen_equation_holds() {
        let c = outer_sum(&[[0.3, -0.1, -0.2], [0.05, 0.2, -0.25], [-0.4, 0.3, 0.1]]);
        let p = principal(&c);
        let cv = c.apply(&p.direction);
        for i in 0..3 {
            assert!((cv[i] - p.lambda_max * p.direction[i]).abs() < 1e-14);
        }
        assert!(p.direction[0] <= 0.0);
        assert!((p.direction.iter().sum::<f64>()).abs() < 1e-15);
    }
}
