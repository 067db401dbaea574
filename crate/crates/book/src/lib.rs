//! Every chapter of the guide in `book/src` is included here so that its
//! code blocks compile and run under `cargo test`.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/laplace.md")]
pub mod laplace {}
#[doc = include_str!("../../../book/src/risk.md")]
pub mod risk {}
#[doc = include_str!("../../../book/src/queries.md")]
pub mod queries {}
#[doc = include_str!("../../../book/src/inference.md")]
pub mod inference {}
#[doc = include_str!("../../../book/src/visualization.md")]
pub mod visualization {}
#[doc = include_str!("../../../book/src/budget.md")]
pub mod budget {}
#[doc = include_str!("../../../book/src/release.md")]
pub mod release {}
#[doc = include_str!("../../../book/src/interfaces.md")]
pub mod interfaces {}
