//! The guide's chapters, compiled as rustdoc modules.
//!
//! Each module's documentation is one chapter of the book under `book/`,
//! included verbatim. Running `cargo test -p guide` therefore executes every
//! code block in the book as a doc-test, which keeps the prose and the
//! library from drifting apart. There is no code here to use.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/feature-streams.md")]
pub mod feature_streams {}

#[doc = include_str!("../../../book/src/linear-head.md")]
pub mod linear_head {}

#[doc = include_str!("../../../book/src/strategies.md")]
pub mod strategies {}

#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/command-line.md")]
pub mod command_line {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
