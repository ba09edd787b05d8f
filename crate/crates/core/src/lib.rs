//! Moments of the volume of random simplices and random crosspolytopes in
//! `ℓ_q` balls: closed forms, the permutation-triple combinatorics behind the
//! fourth moment, a reproducible Monte Carlo engine, and validation suites
//! that tie them together.

pub mod error;
pub mod exact_moments;
pub mod mc_engine;
pub mod perm_combinatorics;
pub mod special_math;
pub mod validation;

pub use error::{Error, Result};
pub use exact_moments::BodySpec;
pub use special_math::{LogPositive, QIndex};
