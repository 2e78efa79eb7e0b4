//! Brownian paths, Stratonovich time stepping and the stochastic evolution
//! equations.
//!
//! Every stepper is an implicit midpoint rule in Stratonovich form, solved
//! by fixed-point iteration. Each stochastic stepper has a deterministic
//! counterpart that performs the same arithmetic, so a run with no noise
//! channels is bit-for-bit identical to the deterministic one.

mod fluid;
mod lagrangian;
mod lie_poisson;
mod noise;
mod particles;
mod stepper;

pub use fluid::{
    advect_step, advect_step_deterministic, boussinesq_step, boussinesq_step_deterministic,
    euler_step, salt_euler_step, BoussinesqState, FluidOptions, StochIncrement,
};
pub use lagrangian::{
    buoyancy_potential, hamiltonian, hamiltonian_gradient, legendre_transform, LagrangianModel,
};
pub use lie_poisson::{
    lie_poisson_step, lie_poisson_step_deterministic, simulate_lie_poisson, LiePoissonRun,
};
pub use noise::{NoiseModel, NoisePath};
pub use particles::{
    particle_step, particle_step_deterministic, reconstruct_particles, GridVelocity,
    VelocitySource,
};
pub use stepper::{implicit_midpoint_step, solve_midpoint, stratonovich_step, SdeSystem, SolverOptions};

use thiserror::Error;

use crate::algebra::AlgebraError;
use crate::field::FieldError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("CFL number {number:.3} exceeds the limit {limit}")]
    Cfl { number: f64, limit: f64 },
    #[error("model is not hyperregular: {0}")]
    SingularModel(String),
    #[error("non-finite value produced")]
    NonFinite,
    #[error("particle position out of numeric range: ({0}, {1})")]
    PointOutOfRange(f64, f64),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;
