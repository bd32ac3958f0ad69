//! Similarity profiles: closed forms and Newton solves of
//! `0 = (A(U))″ + (y/2)U′` on a truncated line.

mod closed_form;
mod flux;
mod gl;
mod grid;
mod pme;
mod solver;

pub use closed_form::{
    barenblatt, barenblatt_constant, erf_profile_e, erf_profile_e_prime, erf_profile_e_second,
    linear_flux_profile, turbulence_exact, BarenblattProfile, PmeBranch, PmeParams,
    TurbulenceBarenblatt, TurbulenceExact, TurbulenceParams, TwoSpeciesEqualExponents,
};
pub use flux::{
    eckhaus_phi, eckhaus_phi_prime, EckhausFlux, FluxMap, LinearFlux, PowerFlux, ECKHAUS_CLAMP,
};
pub use gl::{eckhaus_bound, gl_eta_profile, gl_psi_reconstruct, gl_psi_residual, GlParams, PsiReconstruction};
pub use grid::{make_grid, Grid};
pub use pme::{pme_mixing_profile, FrontProfile};
pub use solver::{
    composed_concentration_profile, residual, solve_profile, uniform_estimate_constant, Profile,
    ProfileOrigin, SolveOptions, SolveReport,
};
