//! The guide's chapters, one module each, so that `cargo test --doc` runs
//! every listing in the book.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/quickstart.md")]
pub mod quickstart {}
#[doc = include_str!("src/eid.md")]
pub mod eid {}
#[doc = include_str!("src/mediator.md")]
pub mod mediator {}
#[doc = include_str!("src/proofs.md")]
pub mod proofs {}
#[doc = include_str!("src/binding.md")]
pub mod binding {}
#[doc = include_str!("src/harness.md")]
pub mod harness {}
#[doc = include_str!("src/services.md")]
pub mod services {}
#[doc = include_str!("../README.md")]
pub mod readme {}
