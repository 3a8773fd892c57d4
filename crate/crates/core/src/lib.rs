// Negated float comparisons (`!(x > 0.0)`) are how parameters reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod dynamics;
pub mod em1d;
pub mod error;
pub mod quad;
pub mod spectral;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
