//! Numerical experiments on the uniformity of multiplicative functions in
//! short intervals: sieved tables, Gowers norms, polynomial phases, exact
//! polynomial algebra, pretentious distances and Heisenberg nilsequences.

pub mod arith;
pub mod error;
pub mod nil;
pub mod norms;
pub mod patterns;
pub mod phase;
pub mod poly;
pub mod pretentious;
pub mod sieve;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/sieving.md")]
    mod sieving {}
    #[doc = include_str!("../../../book/src/gowers.md")]
    mod gowers {}
    #[doc = include_str!("../../../book/src/phases.md")]
    mod phases {}
    #[doc = include_str!("../../../book/src/algebra.md")]
    mod algebra {}
    #[doc = include_str!("../../../book/src/pretentious.md")]
    mod pretentious {}
    #[doc = include_str!("../../../book/src/nilsequences.md")]
    mod nilsequences {}
    #[doc = include_str!("../../../book/src/patterns.md")]
    mod patterns {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
