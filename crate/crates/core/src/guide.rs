// The guide chapters live in book/src and double as doc-tests: every Rust
// code fence below compiles and runs under `cargo test --doc`, which keeps
// the book in sync with the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/causal-graphs.md")]
pub mod causal_graphs {}

#[doc = include_str!("../../../book/src/distributions.md")]
pub mod distributions {}

#[doc = include_str!("../../../book/src/fairness-metrics.md")]
pub mod fairness_metrics {}

#[doc = include_str!("../../../book/src/impossibility.md")]
pub mod impossibility {}

#[doc = include_str!("../../../book/src/correction.md")]
pub mod correction {}
