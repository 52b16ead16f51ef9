//! Doc-tests for the guide in `book/`.
//!
//! mdBook does not run the Rust snippets in the chapters, so each chapter is
//! included here as a doc comment and `cargo test --doc` keeps the book's
//! examples compiling and passing alongside the crate.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/runtime.md")]
pub mod runtime {}

#[doc = include_str!("../../../book/src/dispatch.md")]
pub mod dispatch {}

#[doc = include_str!("../../../book/src/fundamental-ops.md")]
pub mod fundamental_ops {}

#[doc = include_str!("../../../book/src/images.md")]
pub mod images {}

#[doc = include_str!("../../../book/src/benchmarks.md")]
pub mod benchmarks {}

#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}
