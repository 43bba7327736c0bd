//! Optimal coupling of two geometric Brownian motions.
//!
//! The crate evaluates the closed-form value functions of the mirror and
//! synchronous couplings ([`analytic`]), estimates coupling-time statistics
//! under arbitrary correlation controls by Monte Carlo ([`simulate`]), solves
//! the finite-horizon control problem on a grid ([`hjb`]), and drives all of
//! it from JSON run files ([`cli`]).

pub mod analytic;
pub mod cli;
pub mod error;
pub mod hjb;
pub mod params;
pub mod simulate;

pub use error::{Error, Result};
pub use params::{derive, DerivedConstants, ProblemSpec, Sign};
