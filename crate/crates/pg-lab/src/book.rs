//! The guide's chapters, compiled as doc-tests.
//!
//! mdBook renders `book/` but does not run its code fences; including each
//! chapter as a module's documentation makes `cargo test --doc` compile and
//! execute every `rust` snippet, so the guide cannot drift from the API.
//! One module per chapter keeps test failures attributable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/networks.md")]
pub mod networks {}

#[doc = include_str!("../../../book/src/environments.md")]
pub mod environments {}

#[doc = include_str!("../../../book/src/algorithms.md")]
pub mod algorithms {}

#[doc = include_str!("../../../book/src/critic-search.md")]
pub mod critic_search {}

#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}
