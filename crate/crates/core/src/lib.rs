//! Numerical experiments for the p-Laplace equation with degenerate
//! matrix-valued weights `M(x)`, where the gradient estimate hinges on
//! `log M` having small BMO seminorm.
//!
//! The guide in `book/` walks through the modules with runnable examples.

pub mod ball;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod harness;
pub mod meyers;
pub mod nfunctions;
pub mod output;
pub mod seminorms;
pub mod weights;

pub use ball::Ball;
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/seminorms.md")]
    mod seminorms {}
    #[doc = include_str!("../../../book/src/nfunctions.md")]
    mod nfunctions {}
    #[doc = include_str!("../../../book/src/examples.md")]
    mod examples {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
