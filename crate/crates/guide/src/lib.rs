//! The chapters of `book/` as modules, so `cargo test` runs their code
//! blocks as doc tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/slab.md")]
pub mod slab {}
#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}
#[doc = include_str!("../../../book/src/correlations.md")]
pub mod correlations {}
#[doc = include_str!("../../../book/src/baths.md")]
pub mod baths {}
#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}
#[doc = include_str!("../../../book/src/accuracy.md")]
pub mod accuracy {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
