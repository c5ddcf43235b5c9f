//! Problem files for the BSDE and PDE solvers.

use std::path::Path;

use gasket_core::bsde::{Boundary, BsdeProblem, Duration};
use gasket_core::driver::{Driver, Law};
use gasket_core::kernel::harmonic_basis_tables;
use gasket_core::pde::{gaussian_bump, WeakPdeProblem};
use gasket_core::{Coord, LevelGraph};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawSpec {
    Affine {
        slope: f64,
        #[serde(default)]
        offset: f64,
    },
    Sin {
        amp: f64,
    },
    SatExp {
        amp: f64,
        cap: f64,
    },
    Table {
        knots: Vec<f64>,
        values: Vec<f64>,
    },
}

impl LawSpec {
    pub fn to_law(&self) -> Law {
        match self {
            LawSpec::Affine { slope, offset } => Law::Affine { slope: *slope, offset: *offset },
            LawSpec::Sin { amp } => Law::Sin { amp: *amp },
            LawSpec::SatExp { amp, cap } => Law::SatExp { amp: *amp, cap: *cap },
            LawSpec::Table { knots, values } => Law::Table { knots: knots.clone(), values: values.clone() },
        }
    }
}

fn zero_law() -> LawSpec {
    LawSpec::Affine { slope: 0.0, offset: 0.0 }
}

/// `g(y)` loads `dt`; `f(y, z) = f_y(y) + f_z(z)` loads `d⟨W⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriverSpec {
    /// `g = a·y`, `f = b·y + c·z`.
    Linear { a: f64, b: f64, c: f64 },
    Laws {
        #[serde(default = "zero_law")]
        g: LawSpec,
        #[serde(default = "zero_law")]
        f_y: LawSpec,
        #[serde(default = "zero_law")]
        f_z: LawSpec,
    },
}

impl DriverSpec {
    pub fn to_driver(&self) -> Driver {
        match self {
            DriverSpec::Linear { a, b, c } => Driver::linear(*a, *b, *c),
            DriverSpec::Laws { g, f_y, f_z } => Driver { g: g.to_law(), f_y: f_y.to_law(), f_z: f_z.to_law() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TerminalSpec {
    /// `exp(−|x − c|²/(2w²))` centred at `(1/2, √3/4)`.
    Bump { width: f64 },
    Constant { value: f64 },
    /// `Σ values_i h_i` for the harmonic basis `h_i`.
    Harmonic { values: [f64; 3] },
    /// One value per vertex of `V_m` in id order.
    Table { values: Vec<f64> },
}

impl TerminalSpec {
    pub fn table(&self, g: &LevelGraph) -> LabResult<Vec<f64>> {
        Ok(match self {
            TerminalSpec::Bump { width } => g.vertices().iter().map(|v| gaussian_bump(&v.coord, *width)).collect(),
            TerminalSpec::Constant { value } => vec![*value; g.vertex_count()],
            TerminalSpec::Harmonic { values } => harmonic_basis_tables(g)
                .iter()
                .map(|h| h.iter().zip(values).map(|(a, b)| a * b).sum())
                .collect(),
            TerminalSpec::Table { values } => {
                if values.len() != g.vertex_count() {
                    return Err(LabError::Config {
                        path: "terminal.values".into(),
                        message: format!("{} values for {} vertices", values.len(), g.vertex_count()),
                    });
                }
                values.clone()
            }
        })
    }

    pub fn eval(&self, z: &Coord) -> f64 {
        match self {
            TerminalSpec::Bump { width } => gaussian_bump(z, *width),
            TerminalSpec::Constant { value } => *value,
            _ => f64::NAN,
        }
    }

    /// Whether the terminal can be evaluated at arbitrary points (needed by level ladders).
    pub fn is_pointwise(&self) -> bool {
        matches!(self, TerminalSpec::Bump { .. } | TerminalSpec::Constant { .. })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum DurationSpec {
    Fixed,
    #[default]
    Killed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub value: [f64; 3],
    #[serde(default)]
    pub rate: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub driver: DriverSpec,
    pub terminal: TerminalSpec,
    /// `φ(t, p_i) = value_i + rate_i·t`; zero if omitted.
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
    pub horizon: f64,
    #[serde(default)]
    pub duration: DurationSpec,
    /// Declared `(K0, K1)`.
    #[serde(default)]
    pub declared: Option<[f64; 2]>,
    /// Monotonicity constants `(κ0, κ1)`.
    #[serde(default)]
    pub kappa: Option<[f64; 2]>,
    /// `(β0, β1)` for V^β norms.
    #[serde(default)]
    pub beta: Option<[f64; 2]>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> LabResult<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de)
            .map_err(|e| LabError::Config { path: format!("problem.{}", e.path()), message: e.inner().to_string() })
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary.as_ref().map(|b| Boundary { value: b.value, rate: b.rate }).unwrap_or_else(Boundary::zero)
    }

    pub fn bsde(&self, g: &LevelGraph) -> LabResult<BsdeProblem> {
        let duration = match self.duration {
            DurationSpec::Fixed => Duration::Fixed,
            DurationSpec::Killed => Duration::Killed,
        };
        let mut p = BsdeProblem::new(self.driver.to_driver(), self.terminal.table(g)?, self.horizon, duration);
        p.boundary = self.boundary();
        p.declared = self.declared.map(|[a, b]| (a, b));
        p.kappa = self.kappa.map(|[a, b]| (a, b));
        Ok(p)
    }

    pub fn pde(&self, g: &LevelGraph) -> LabResult<WeakPdeProblem> {
        Ok(WeakPdeProblem {
            level: g.level(),
            driver: self.driver.to_driver(),
            boundary: self.boundary(),
            terminal: self.terminal.table(g)?,
            horizon: self.horizon,
            step: None,
            store_gradients: true,
        })
    }
}

pub fn problem_schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(ProblemFile)).expect("schema serializes")
}
