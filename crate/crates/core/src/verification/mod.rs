//! Independent numerical checks of the structural identities, each
//! producing a [`ResidualReport`].
//!
//! Every check is deterministic given its seed and compares both sides of
//! an identity pathwise, on the same noise increments.

mod casimir;
mod chain_rule;
mod duality;
mod kiw;
mod report;
mod variation;

pub use casimir::{casimir_energy_report, CASIMIR_TOL};
pub use chain_rule::{
    check_lie_chain_rule, default_bump, FlowFamily, IdentityFlow, RotationFlow, ScalarFamily,
    ScaledProfile,
};
pub use duality::{check_dualities, finite_duality_residual, grid_duality_residual, FINITE_TOL, GRID_TOL};
pub use kiw::{check_kiw, KiwFlow, KiwOptions, KiwSpec};
pub use report::{fit_order, Criterion, OrderFit, ResidualReport, Status, EXACT_FLOOR, MIN_R_SQUARED};
pub use variation::{check_variation_lemma, dexp_inv, VariationSpec};

use thiserror::Error;

use crate::algebra::AlgebraError;
use crate::dynamics::DynamicsError;
use crate::field::{FieldError, FieldKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerificationError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported tensor kind {0:?}")]
    UnsupportedKind(FieldKind),
    #[error("run has no stored states")]
    MissingStates,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

pub type Result<T> = std::result::Result<T, VerificationError>;
