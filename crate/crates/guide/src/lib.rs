//! The guide in `book/` is plain mdbook, which cannot run snippets that need
//! this workspace's crates. Each chapter is included here as a module doc so
//! `cargo test --doc` compiles and runs every listing.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}
#[doc = include_str!("../../../book/src/canonical.md")]
pub mod canonical {}
#[doc = include_str!("../../../book/src/certificates.md")]
pub mod certificates {}
#[doc = include_str!("../../../book/src/reviews.md")]
pub mod reviews {}
#[doc = include_str!("../../../book/src/rounds.md")]
pub mod rounds {}
#[doc = include_str!("../../../book/src/escrow.md")]
pub mod escrow {}
#[doc = include_str!("../../../book/src/stores.md")]
pub mod stores {}
#[doc = include_str!("../../../book/src/queries.md")]
pub mod queries {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
