//! Time evolution: pure-state trajectories, the cascaded master equation, and
//! the first-order noise correction.

mod master;
pub mod ode;
mod trajectory;

pub use master::{
    correction_source_norm, dissipator, evolve_master, evolve_with_correction, lindblad_rhs, noise_hamiltonian,
    JointSolution, MasterSummary, MasterTrajectory, NoiseModel, CORRECTION_NORM_GUARD, TRACE_DRIFT_LIMIT,
};
pub use ode::IntegratorConfig;
pub use trajectory::{integrate_trajectory, photon_norm, zero_jump_residual, Trajectory, NORM_DRIFT_LIMIT};
