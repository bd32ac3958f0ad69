//! Self-similar profiles of coupled parabolic systems.
//!
//! Profiles are computed as steady states in parabolic scaling variables
//! `y = x/√(1+t)` and checked against direct simulation of the unscaled
//! equations.

pub mod checks;
pub mod error;
pub mod evolution;
pub mod flux_ness;
pub mod io;
pub mod linalg;
pub mod profile_bvp;
pub mod reaction_network;

pub use error::{Error, Result};
