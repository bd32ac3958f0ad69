use serde::{Deserialize, Serialize};

use super::flux::{eckhaus_phi, EckhausFlux};
use super::grid::Grid;
use super::solver::{solve_profile, Profile, ProfileOrigin, SolveOptions};
use crate::error::{Error, Result};

/// Eckhaus bound `1/√3` on roll wavenumbers.
pub fn eckhaus_bound() -> f64 {
    1.0 / 3.0_f64.sqrt()
}

/// Limiting rolls `U_{η,φ}(x) = √(1−η²) e^{i(ηx+φ)}` at `x → ∓∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlParams {
    pub eta_minus: f64,
    pub eta_plus: f64,
    #[serde(default)]
    pub phi_minus: f64,
    #[serde(default)]
    pub phi_plus: f64,
}

impl GlParams {
    pub fn new(eta_minus: f64, eta_plus: f64) -> Result<Self> {
        let p = Self {
            eta_minus,
            eta_plus,
            phi_minus: 0.0,
            phi_plus: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bound = eckhaus_bound();
        for (name, eta) in [("eta_minus", self.eta_minus), ("eta_plus", self.eta_plus)] {
            if !(eta.abs() < bound) {
                return Err(Error::Domain(format!(
                    "{name} = {eta} violates the Eckhaus stability bound |η| < 1/√3 ≈ {bound:.6} (Eckhaus instability)"
                )));
            }
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        for (name, phi) in [("phi_minus", self.phi_minus), ("phi_plus", self.phi_plus)] {
            if !(0.0..two_pi).contains(&phi) {
                return Err(Error::validation(name, "phase must lie in [0, 2π)"));
            }
        }
        Ok(())
    }
}

/// Steady wavenumber profile `η̄` of `0 = (Φ(η))″ + (y/2)η′`.
pub fn gl_eta_profile(params: &GlParams, grid: &Grid, opts: &SolveOptions) -> Result<Profile> {
    params.validate()?;
    solve_profile(&EckhausFlux, &[params.eta_minus], &[params.eta_plus], grid, opts)
}

/// `ψ̄` reconstructed from `η̄`, with the left/right formula discrepancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiReconstruction {
    pub psi: Profile,
    pub eta: Vec<f64>,
    /// `max |ψ̄_left − ψ̄_right|` over the nodes.
    pub discrepancy: f64,
}

/// `ψ̄(y) = η₋y + ∫_{−L}^y (η̄ − η₋)`, cross-checked against
/// `η₊y − ∫_y^L (η̄ − η₊)`, by cumulative trapezoid sums.
pub fn gl_psi_reconstruct(eta_profile: &Profile, params: &GlParams) -> Result<PsiReconstruction> {
    if !eta_profile.is_solved() {
        return Err(Error::Precondition(
            "ψ̄ reconstruction needs a solved η̄ profile".into(),
        ));
    }
    if eta_profile.components != 1 {
        return Err(Error::domain("η̄ must be a scalar profile"));
    }
    let grid = eta_profile.grid;
    let n = grid.len();
    let h = grid.spacing();
    let eta = eta_profile.component(0);

    let mut left = vec![0.0; n];
    let mut acc = 0.0;
    left[0] = params.eta_minus * grid.y(0);
    for i in 1..n {
        acc += 0.5 * h * ((eta[i - 1] - params.eta_minus) + (eta[i] - params.eta_minus));
        left[i] = params.eta_minus * grid.y(i) + acc;
    }
    let mut right = vec![0.0; n];
    let mut acc = 0.0;
    right[n - 1] = params.eta_plus * grid.y(n - 1);
    for i in (0..n - 1).rev() {
        acc += 0.5 * h * ((eta[i] - params.eta_plus) + (eta[i + 1] - params.eta_plus));
        right[i] = params.eta_plus * grid.y(i) - acc;
    }
    let discrepancy = left
        .iter()
        .zip(&right)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let mut psi = Profile::from_nodes(grid, 1, left, ProfileOrigin::Derived)?;
    psi.residual_norm = eta_profile.residual_norm;
    Ok(PsiReconstruction {
        psi,
        eta,
        discrepancy,
    })
}

/// Steady phase residual `(Φ(ψ̄_y))_y + (y/2)ψ̄_y − ψ̄/2` at interior nodes
/// (zero at the ends), with `ψ̄_y = η̄`.
pub fn gl_psi_residual(recon: &PsiReconstruction) -> Vec<f64> {
    let grid = recon.psi.grid;
    let n = grid.len();
    let h = grid.spacing();
    let psi = &recon.psi.values;
    let eta = &recon.eta;
    let mut r = vec![0.0; n];
    for i in 1..n - 1 {
        let dphi = (eckhaus_phi(eta[i + 1]) - eckhaus_phi(eta[i - 1])) / (2.0 * h);
        r[i] = dphi + 0.5 * grid.y(i) * eta[i] - 0.5 * psi[i];
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_wavenumber_gives_linear_phase() {
        let grid = Grid::new(10.0, 401).unwrap();
        let params = GlParams::new(0.3, 0.3).unwrap();
        let eta = gl_eta_profile(&params, &grid, &SolveOptions::default()).unwrap();
        assert!(eta.values.iter().all(|&v| v == 0.3));
        let recon = gl_psi_reconstruct(&eta, &params).unwrap();
        for i in 0..grid.len() {
            assert!((recon.psi.value(i, 0) - 0.3 * grid.y(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn eckhaus_violation_is_a_domain_error() {
        let err = GlParams::new(0.6, 0.3).unwrap_err();
        assert!(matches!(err, Error::Domain(ref msg) if msg.contains("Eckhaus")));
        assert!(GlParams::new(0.3, -0.58).is_err());
    }

    #[test]
    fn unsolved_profile_is_rejected() {
        let grid = Grid::new(5.0, 11).unwrap();
        let p = Profile::from_fn(grid, |_| 0.3, ProfileOrigin::Unsolved);
        let params = GlParams::new(0.3, 0.3).unwrap();
        assert!(matches!(gl_psi_reconstruct(&p, &params), Err(Error::Precondition(_))));
    }

    #[test]
    fn mixed_profile_is_decreasing_and_consistent() {
        let grid = Grid::new(10.0, 4001).unwrap();
        let params = GlParams::new(0.45, 0.3).unwrap();
        let eta = gl_eta_profile(&params, &grid, &SolveOptions::default()).unwrap();
        let v = eta.component(0);
        let rise = v.windows(2).map(|w| w[1] - w[0]).fold(f64::MIN, f64::max);
        assert!(rise < 1e-13, "{rise}");
        assert!(v[grid.center() - 100] > v[grid.center() + 100]);
        assert!(eta.report.warnings.iter().all(|w| !w.contains("clamp")));
        let recon = gl_psi_reconstruct(&eta, &params).unwrap();
        assert!(recon.discrepancy < 1e-6, "{}", recon.discrepancy);
        let r = gl_psi_residual(&recon);
        assert!(r.iter().all(|x| x.abs() < 1e-4));
    }
}
