//! Numeric scalars shared by the exact and approximate code paths.

use core::fmt::Debug;
use core::ops::Neg;

use num_bigint::BigInt;
use num_traits::{Num, ToPrimitive, Zero};

/// Exact rational arithmetic.
pub type Rational = num_rational::BigRational;

/// A field element usable by the harmonic and measure calculus.
///
/// Implemented for [`Rational`] (exact mode) and `f64` (approximate mode).
pub trait Scalar: Clone + Debug + PartialEq + PartialOrd + Num + Neg<Output = Self> {
    fn from_ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;

    fn from_int(n: i64) -> Self {
        Self::from_ratio(n, 1)
    }

    fn powi(&self, exp: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..exp {
            out = out * self.clone();
        }
        out
    }
}

impl Scalar for f64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn powi(&self, exp: u32) -> Self {
        let mut out = 1.0;
        for _ in 0..exp {
            out *= *self;
        }
        out
    }
}

impl Scalar for Rational {
    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        // Scale large operands down first so that the quotient stays finite.
        let n = self.numer();
        let d = self.denom();
        if n.is_zero() {
            return 0.0;
        }
        let bits = n.bits().max(d.bits());
        if bits < 1000 {
            n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
        } else {
            let shift = bits - 900;
            let ns: BigInt = n >> shift;
            let ds: BigInt = d >> shift;
            ns.to_f64().unwrap_or(f64::NAN) / ds.to_f64().unwrap_or(f64::NAN)
        }
    }
}

/// `(5/3)^m`, the energy renormalisation factor of level `m`.
pub fn energy_scale<T: Scalar>(level: u32) -> T {
    T::from_ratio(5, 3).powi(level)
}
