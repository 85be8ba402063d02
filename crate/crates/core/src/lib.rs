//! Deterministic particle approximation of opinion densities carried by agents
//! that sit on a network whose nodes move with the opinions.
//!
//! Each agent's opinion density on `[-1, 1]` is represented by ordered
//! particles of equal mass; particles and network nodes evolve by a coupled ODE
//! system. The crate provides the scheme ([`dpa`]), the model interaction
//! functions ([`kernels`]), optimal-transport utilities on reconstructed
//! densities ([`transport`]), experiment readouts ([`metrics`]) and file
//! formats ([`io`]).

pub mod dpa;
pub mod error;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod scenario;
pub mod state;
pub mod transport;

pub use dpa::{simulate, simulate_with, Derivative, Dynamics, IntegratorStats, Trajectory};
pub use error::{Error, Result};
pub use kernels::{Interaction, KernelConstants, ModelKernels};
pub use scenario::{
    validate, AgentInit, AttitudeParams, DensitySpec, IntegratorKind, InteractionRadius, NodeVelocitySign, PhiSpec, RunParams,
    SamplingSpec, Scenario, Violation, ViolationCode,
};
pub use state::ParticleState;
