//! 3×3 matrices over a [`Scalar`] and the gasket's harmonic matrices.

use core::ops::{Index, Mul};

use crate::scalar::Scalar;

pub type Vec3<T> = [T; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Scalar> Mat3<T> {
    pub fn from_ints(den: i64, rows: [[i64; 3]; 3]) -> Self {
        Mat3(rows.map(|r| r.map(|v| T::from_ratio(v, den))))
    }

    pub fn identity() -> Self {
        Self::from_ints(1, [[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    }

    pub fn zero() -> Self {
        Self::from_ints(1, [[0; 3]; 3])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat3(core::array::from_fn(|i| core::array::from_fn(|j| m[j][i].clone())))
    }

    pub fn trace(&self) -> T {
        self.0[0][0].clone() + self.0[1][1].clone() + self.0[2][2].clone()
    }

    pub fn apply(&self, v: &Vec3<T>) -> Vec3<T> {
        core::array::from_fn(|i| dot(&self.0[i], v))
    }

    pub fn to_f64(&self) -> Mat3<f64> {
        Mat3(self.0.clone().map(|r| r.map(|v| v.to_f64())))
    }
}

impl<T: Scalar> Mul for &Mat3<T> {
    type Output = Mat3<T>;

    fn mul(self, rhs: &Mat3<T>) -> Mat3<T> {
        let (a, b) = (&self.0, &rhs.0);
        Mat3(core::array::from_fn(|i| {
            core::array::from_fn(|j| {
                a[i][0].clone() * b[0][j].clone()
                    + a[i][1].clone() * b[1][j].clone()
                    + a[i][2].clone() * b[2][j].clone()
            })
        }))
    }
}

impl<T> Index<(usize, usize)> for Mat3<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.0[i][j]
    }
}

pub fn dot<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0].clone() * b[0].clone() + a[1].clone() * b[1].clone() + a[2].clone() * b[2].clone()
}

/// `vᵗ P v` without forming `P`: `(1/3) Σ_{i<j} (v_i − v_j)²`.
pub fn p_form<T: Scalar>(v: &Vec3<T>) -> T {
    let d01 = v[0].clone() - v[1].clone();
    let d02 = v[0].clone() - v[2].clone();
    let d12 = v[1].clone() - v[2].clone();
    (d01.clone() * d01 + d02.clone() * d02 + d12.clone() * d12) / T::from_int(3)
}

/// The projection `P` onto functions with zero mean over `V_0`.
pub fn projection<T: Scalar>() -> Mat3<T> {
    Mat3::from_ints(3, [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]])
}

/// `A_i`: boundary values on `V_0` ↦ values of the harmonic extension at
/// the corners of the cell `F_i(S)`.
pub fn harmonic_matrix<T: Scalar>(i: u8) -> Mat3<T> {
    match i {
        1 => Mat3::from_ints(5, [[5, 0, 0], [2, 2, 1], [2, 1, 2]]),
        2 => Mat3::from_ints(5, [[2, 2, 1], [0, 5, 0], [1, 2, 2]]),
        3 => Mat3::from_ints(5, [[2, 1, 2], [1, 2, 2], [0, 0, 5]]),
        _ => panic!("harmonic matrix index {i} outside 1..=3"),
    }
}

/// `Y_i = P A_i P`.
pub fn kusuoka_matrix<T: Scalar>(i: u8) -> Mat3<T> {
    let p = projection::<T>();
    &(&p * &harmonic_matrix(i)) * &p
}

/// `A_[w] = A_{w_m} ⋯ A_{w_1}`.
pub fn word_matrix<T: Scalar>(symbols: &[u8]) -> Mat3<T> {
    symbols.iter().fold(Mat3::identity(), |acc, &s| &harmonic_matrix(s) * &acc)
}
