//! Command line, configuration files, CSV/JSON output and the multi-threaded
//! path runner for `gasket-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod problem;
pub mod runner;
pub mod table;

pub use commands::{run, Output};
pub use config::RunConfig;
pub use error::{LabError, LabResult};
pub use runner::RayonRunner;
