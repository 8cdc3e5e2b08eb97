//! Lyapunov drift certificates, Poincaré-type constants and convergence rates for
//! diffusions with Gibbs invariant measures `μ ∝ e^{-2F}`.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod expr;
pub mod generators;
pub mod jet;
pub mod lyapunov;
pub mod montecarlo;
pub mod potentials;
pub mod quadrature;
pub mod rates;
pub mod scalar;
pub mod spectral;

pub use error::EvalError;
pub use expr::{Expr, ExprError};
pub use jet::Jet;
pub use potentials::{GibbsMeasure, Potential};
pub use scalar::Real;

pub type Potential64 = Potential<f64>;
pub type GibbsMeasure64 = GibbsMeasure<f64>;
