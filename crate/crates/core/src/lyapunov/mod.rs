//! Lyapunov candidates and grid verification of drift inequalities
//! `LV ≤ −φ(V) + b·1_C`.

mod candidate;
mod drift;
mod kinetic;
mod phi;

pub use candidate::{lambda_infimum, lambda_jet, AuxG, LyapunovCandidate};
pub use drift::{
    fit_drift_params, h_a, integrated_drift, verify_drift, DriftCertificate, DriftSet, FittedDrift, GridSpec,
    IntegratedDrift, PhiFamily, RatioBin,
};
pub use kinetic::{
    admissible_alpha_window, certify_kinetic, entropy_lyapunov, estimate_kinetic_constants, kinetic_param_search, EntropyReport,
    Constraint, KineticChoice, KineticConstants, KineticRegion, DEFAULT_ANNULUS,
};
pub use phi::PhiSpec;

use crate::error::EvalError;

#[derive(Debug, thiserror::Error)]
pub enum LyapunovError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("grid does not contain the set C: {0}")]
    GridMissesSet(String),
    #[error("no drift region inside the grid: {reason}")]
    NoDriftRegion { reason: String, profile: Vec<RatioBin> },
    #[error("feasible region is empty; binding constraint: {binding}")]
    EmptyRegion { binding: String },
    #[error("condition fails: {0}")]
    ConditionFails(String),
    #[error("phi: {0}")]
    Phi(String),
}
