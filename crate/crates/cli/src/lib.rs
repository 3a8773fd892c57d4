//! Scenario-driven front end: parse a TOML scenario, run one of the
//! pipelines and write CSV/JSON artifacts with a manifest.

pub mod error;
pub mod pipeline;
pub mod scenario;

pub use error::{CliError, CliResult};
pub use pipeline::Arm;
pub use scenario::{RunKind, Scenario};
