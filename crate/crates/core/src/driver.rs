//! Markovian BSDE drivers `g(y)` and `f(y, z) = f_y(y) + f_z(z)`.

use alloc::string::String;
use alloc::vec::Vec;

use libm::{exp, fabs, log, sin};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{usage, Result};
use crate::stats::uniform_unit;

/// A scalar Lipschitz function of one variable.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum Law {
    Affine {
        slope: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        offset: f64,
    },
    /// `amp · sin(x)`.
    Sin { amp: f64 },
    /// `amp · min(eˣ, cap)`.
    SatExp { amp: f64, cap: f64 },
    /// Piecewise-linear interpolation, constant outside the knots.
    Table { knots: Vec<f64>, values: Vec<f64> },
}

impl Law {
    pub const ZERO: Law = Law::Affine { slope: 0.0, offset: 0.0 };

    pub fn linear(slope: f64) -> Law {
        Law::Affine { slope, offset: 0.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Law::Affine { slope, offset } => slope * x + offset,
            Law::Sin { amp } => amp * sin(x),
            Law::SatExp { amp, cap } => {
                if x >= log(*cap) {
                    amp * cap
                } else {
                    amp * exp(x)
                }
            }
            Law::Table { knots, values } => {
                let n = knots.len();
                if x <= knots[0] {
                    return values[0];
                }
                if x >= knots[n - 1] {
                    return values[n - 1];
                }
                let i = knots.partition_point(|&k| k <= x) - 1;
                let s = (x - knots[i]) / (knots[i + 1] - knots[i]);
                values[i] + s * (values[i + 1] - values[i])
            }
        }
    }

    /// Global Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Law::Affine { slope, .. } => fabs(*slope),
            Law::Sin { amp } => fabs(*amp),
            Law::SatExp { amp, cap } => fabs(amp * cap),
            Law::Table { knots, values } => knots
                .windows(2)
                .zip(values.windows(2))
                .map(|(k, v)| fabs((v[1] - v[0]) / (k[1] - k[0])))
                .fold(0.0, f64::max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Law::Affine { slope, offset } if finite(&[*slope, *offset]) => Ok(()),
            Law::Sin { amp } if amp.is_finite() => Ok(()),
            Law::SatExp { amp, cap } if amp.is_finite() && cap.is_finite() && *cap > 0.0 => Ok(()),
            Law::Table { knots, values } => {
                if knots.len() < 2 || knots.len() != values.len() {
                    return Err(usage!("a table law needs at least two knots and one value per knot"));
                }
                if !finite(knots) || !finite(values) || knots.windows(2).any(|k| k[1] <= k[0]) {
                    return Err(usage!("table knots must be finite and strictly increasing"));
                }
                Ok(())
            }
            other => Err(usage!("invalid law parameters: {other:?}")),
        }
    }

    fn as_linear(&self) -> Option<f64> {
        match self {
            Law::Affine { slope, offset } if *offset == 0.0 => Some(*slope),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Driver {
    /// `dt`-loaded term.
    pub g: Law,
    /// `y`-part of the `d⟨W⟩`-loaded term.
    pub f_y: Law,
    /// `z`-part of the `d⟨W⟩`-loaded term.
    pub f_z: Law,
}

impl Driver {
    pub fn zero() -> Self {
        Driver { g: Law::ZERO, f_y: Law::ZERO, f_z: Law::ZERO }
    }

    /// `g = a·y`, `f = b·y + c·z`.
    pub fn linear(a: f64, b: f64, c: f64) -> Self {
        Driver { g: Law::linear(a), f_y: Law::linear(b), f_z: Law::linear(c) }
    }

    pub fn g(&self, y: f64) -> f64 {
        self.g.eval(y)
    }

    pub fn f(&self, y: f64, z: f64) -> f64 {
        self.f_y.eval(y) + self.f_z.eval(z)
    }

    /// `K0` with `|g(y)−g(ȳ)| ≤ K0/2·|y−ȳ|` and the same for the `y`-part of `f`.
    pub fn k0(&self) -> f64 {
        2.0 * self.g.lipschitz().max(self.f_y.lipschitz())
    }

    /// `K1`, the `z`-Lipschitz constant of `f`.
    pub fn k1(&self) -> f64 {
        self.f_z.lipschitz()
    }

    /// `(a, b, c)` if the driver is exactly `g = a·y`, `f = b·y + c·z`.
    pub fn as_linear(&self) -> Option<(f64, f64, f64)> {
        Some((self.g.as_linear()?, self.f_y.as_linear()?, self.f_z.as_linear()?))
    }

    pub fn validate(&self) -> Result<()> {
        self.g.validate()?;
        self.f_y.validate()?;
        self.f_z.validate()
    }

    /// Samples pairs in `[−range, range]` and reports violations of the
    /// declared Lipschitz constants (eq. A.2/A.3 form).
    pub fn lipschitz_spot_check(&self, k0: f64, k1: f64, samples: usize, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let range = 10.0;
        let mut draw = || (2.0 * uniform_unit(&mut rng) - 1.0) * range;
        let mut out = Vec::new();
        for _ in 0..samples {
            let (y, yb, z, zb) = (draw(), draw(), draw(), draw());
            let dg = fabs(self.g(y) - self.g(yb));
            if dg > 0.5 * k0 * fabs(y - yb) * (1.0 + 1e-12) + 1e-12 {
                out.push(alloc::format!("g slope exceeds K0/2 between y = {y} and {yb}"));
            }
            let df = fabs(self.f(y, z) - self.f(yb, zb));
            if df > (0.5 * k0 * fabs(y - yb) + k1 * fabs(z - zb)) * (1.0 + 1e-12) + 1e-12 {
                out.push(alloc::format!("f exceeds K0/2·|Δy| + K1·|Δz| at ({y}, {z}), ({yb}, {zb})"));
            }
            if out.len() >= 5 {
                break;
            }
        }
        out
    }
}
