//! Time-dependent simulators for the unscaled systems, with conservation
//! ledgers and scaled-variable diagnostics.

mod diagnostics;
mod field;
mod gl;
mod pme;
mod rds;
mod turbulence;

pub use diagnostics::{conserved_quantities, scaled_convergence, scaled_error_at_nodes, Ledger, Scaling};
pub use field::{Boundary, Field1D, Schedule, StepOptions, Trajectory, TrajectoryKind, ZeroTrack};
pub use gl::{
    amplitude_constraint, gl_mixed_field, gl_roll, gl_roll_field, real_part_zeros, run_gl, track_zeros, GL_DEFAULT_DT,
};
pub use pme::run_pme;
pub use rds::{run_rds, RDS_DEFAULT_DT};
pub use turbulence::run_turbulence;
