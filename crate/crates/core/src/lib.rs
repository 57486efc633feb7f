//! Mixed finite-element solver for the Landau–Lifshitz–Baryakhtar equation
//! and its regularised Landau–Lifshitz–Bloch limit.
//!
//! The magnetisation `u` and the effective field `H` are both approximated
//! in continuous P1 spaces on structured meshes of the unit interval or
//! square. Two fully discrete schemes are provided: a semi-implicit Euler
//! method (with a variant for `μ < 0`) and a Crank–Nicolson method, both of
//! which dissipate the discrete energy for any time step.

pub mod config;
pub mod error;
pub mod expr;
pub mod fem;
pub mod harness;
pub mod mesh;
pub mod model;
pub mod schemes;
pub mod sparse;

pub use error::{ConfigError, Error, Result};
