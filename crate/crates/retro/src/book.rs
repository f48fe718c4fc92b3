// The guide's code blocks run as doctests so the book can never drift from
// the crate: each chapter is included as the docs of an empty module and
// `cargo test --doc` executes every snippet.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/planning.md")]
pub mod planning {}

#[doc = include_str!("../../../book/src/beliefs.md")]
pub mod beliefs {}

#[doc = include_str!("../../../book/src/adjustment.md")]
pub mod adjustment {}

#[doc = include_str!("../../../book/src/regret.md")]
pub mod regret_chapter {}

#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness_chapter {}
