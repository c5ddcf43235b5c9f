//! The run configuration shared by the command line and `run --config`.

use std::path::PathBuf;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Graph,
    Harmonic,
    Measure,
    Walk,
    Bsde,
    Pde,
    CheckFk,
    CheckBounds,
    CheckContraction,
    CheckIdentity,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Graph => "graph",
            Subcommand::Harmonic => "harmonic",
            Subcommand::Measure => "measure",
            Subcommand::Walk => "walk",
            Subcommand::Bsde => "bsde",
            Subcommand::Pde => "pde",
            Subcommand::CheckFk => "check-fk",
            Subcommand::CheckBounds => "check-bounds",
            Subcommand::CheckContraction => "check-contraction",
            Subcommand::CheckIdentity => "check-identity",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Arithmetic {
    #[default]
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKindArg {
    /// Hausdorff measure `μ`.
    #[serde(alias = "hausdorff")]
    #[value(alias = "hausdorff")]
    Mu,
    /// Kusuoka measure `ν`.
    #[serde(alias = "kusuoka")]
    #[value(alias = "kusuoka")]
    Nu,
    /// Energy measure of the harmonic extension of `boundary`.
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    Explicit,
    PicardInStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BoundsWhich {
    Ml,
    BetaChain,
    Moments,
    Expint,
}

/// Everything that determines a run. Two runs with equal configs (ignoring
/// `workers` and `out`) produce byte-identical primary outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u8>,
    /// Level ladder for `check-fk`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<u8>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Problem file (JSON) for `bsde`, `pde`, `check-fk` and `check-contraction`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub arithmetic: Arithmetic,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<MeasureKindArg>,
    /// Boundary values on `V_0` as rationals, e.g. `["1", "0", "-1/2"]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<[String; 3]>,
    /// `stationary`, `vertex:<id>` or `cell:<word>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub killed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    /// Time-step override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub which: Option<BoundsWhich>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(subcommand: Subcommand) -> Self {
        RunConfig {
            subcommand,
            level: None,
            levels: None,
            seed: 0,
            paths: None,
            horizon: None,
            problem: None,
            out: None,
            workers: None,
            format: Format::Csv,
            arithmetic: Arithmetic::Exact,
            kind: None,
            boundary: None,
            start: None,
            killed: None,
            scheme: None,
            iters: None,
            dt: None,
            which: None,
            betas: None,
            times: None,
        }
    }

    /// Parses and validates a JSON config, reporting the failing field path.
    pub fn from_json(text: &str) -> LabResult<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| LabError::Config { path: ".".into(), message: e.to_string() })?;
        if value.as_object().is_some_and(|o| !o.contains_key("subcommand")) {
            return Err(LabError::Missing { subcommand: "run".into(), fields: "subcommand".into() });
        }
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| LabError::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Lists every required field the subcommand is missing.
    pub fn validate(&self) -> LabResult<()> {
        let mut missing = Vec::new();
        let mut need = |ok: bool, name: &str| {
            if !ok {
                missing.push(name.to_string());
            }
        };
        use Subcommand::*;
        match self.subcommand {
            Graph | CheckIdentity => need(self.level.is_some(), "level"),
            Harmonic => {
                need(self.level.is_some(), "level");
                need(self.boundary.is_some(), "boundary");
            }
            Measure => {
                need(self.level.is_some(), "level");
                need(self.kind.is_some(), "kind");
                if self.kind == Some(MeasureKindArg::Energy) {
                    need(self.boundary.is_some(), "boundary");
                }
            }
            Walk => {
                need(self.level.is_some(), "level");
                need(self.paths.is_some(), "paths");
                need(self.horizon.is_some(), "horizon");
            }
            Bsde | Pde => {
                need(self.level.is_some(), "level");
                need(self.problem.is_some(), "problem");
            }
            CheckFk => {
                need(self.levels.is_some(), "levels");
                need(self.problem.is_some(), "problem");
            }
            CheckContraction => {
                need(self.level.is_some(), "level");
                need(self.problem.is_some(), "problem");
                need(self.paths.is_some(), "paths");
            }
            CheckBounds => {
                need(self.which.is_some(), "which");
                if self.which.is_some_and(|w| w != BoundsWhich::BetaChain) {
                    need(self.level.is_some(), "level");
                    need(self.paths.is_some(), "paths");
                }
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(LabError::Missing { subcommand: self.subcommand.name().into(), fields: missing.join(", ") })
        }
    }

    /// SHA-256 of the canonical JSON form, excluding `workers` and `out`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = None;
        c.out = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn config_schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(RunConfig)).expect("schema serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_lists_required_fields() {
        let e = RunConfig::from_json("{}").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("subcommand"));
        let e = RunConfig::from_json(r#"{"subcommand": "walk"}"#).unwrap_err();
        assert!(e.to_string().contains("level, paths, horizon"), "{e}");
    }

    #[test]
    fn field_path_in_errors() {
        let e = RunConfig::from_json(r#"{"subcommand": "graph", "level": "three"}"#).unwrap_err();
        assert!(e.to_string().contains("`level`"), "{e}");
        let e = RunConfig::from_json(r#"{"subcommand": "graph", "level": 2, "colour": 1}"#).unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
    }

    #[test]
    fn hash_ignores_workers() {
        let mut a = RunConfig::new(Subcommand::Graph);
        a.level = Some(2);
        let mut b = a.clone();
        b.workers = Some(8);
        b.out = Some("x.csv".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn schema_mentions_fields() {
        let s = config_schema().to_string();
        assert!(s.contains("subcommand") && s.contains("check-fk"));
    }
}
