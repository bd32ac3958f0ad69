//! Fluxes that sustain a similarity profile as a non-equilibrium steady state.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile_bvp::{
    erf_profile_e_second, eckhaus_phi, FluxMap, Grid, Profile, PsiReconstruction, TurbulenceExact,
    TurbulenceParams,
};
use crate::reaction_network::{DiffusionMatrix, ReactionNetwork};

/// Centered first derivative; second-order one-sided at the ends.
pub fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        return d;
    }
    for i in 1..n - 1 {
        d[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    d
}

/// Centered second derivative at interior nodes, zero at the ends.
pub fn second_derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    for i in 1..n.saturating_sub(1) {
        d[i] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
    }
    d
}

/// Diffusive fluxes `Q_j(y) = −d_j C_j′(y)` of every component.
pub fn diffusive_fluxes(profile: &Profile, diffusion: &[f64]) -> Result<Vec<Vec<f64>>> {
    if diffusion.len() != profile.components {
        return Err(Error::domain(format!(
            "{} diffusion constants for {} components",
            diffusion.len(),
            profile.components
        )));
    }
    let h = profile.grid.spacing();
    Ok((0..profile.components)
        .map(|k| {
            derivative(&profile.component(k), h)
                .into_iter()
                .map(|v| -diffusion[k] * v)
                .collect()
        })
        .collect())
}

/// Porous-medium flux `Q(y) = −(W^m)′(y)` of a scalar profile.
pub fn pme_flux(profile: &Profile, m: f64) -> Result<Vec<f64>> {
    if profile.components != 1 {
        return Err(Error::domain("PME flux needs a scalar profile"));
    }
    let wm: Vec<f64> = profile.values.iter().map(|w| w.max(0.0).powf(m)).collect();
    Ok(derivative(&wm, profile.grid.spacing()).into_iter().map(|v| -v).collect())
}

/// Multipliers and the raw residual flux of a constrained profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxSet {
    pub grid: Grid,
    /// `diffusive[j][i] = −d_j C_j′(y_i)`.
    pub diffusive: Vec<Vec<f64>>,
    /// `multipliers[r][i] = Λ_r(y_i)`.
    pub multipliers: Vec<Vec<f64>>,
    /// Node-major `λ(y_i) = −(D C″ + (y/2)C′)`.
    pub lambda: Vec<f64>,
    pub species: usize,
    /// `max_i ‖Qλ(y_i)‖∞`.
    pub kernel_residual: f64,
    /// `max_i ‖λ − NΛ‖∞` of the least-squares decomposition.
    pub decomposition_residual: f64,
    /// `max_i ‖R(C(y_i))‖∞`.
    pub constraint_violation: f64,
    pub warnings: Vec<String>,
}

impl FluxSet {
    pub fn lambda_at(&self, i: usize) -> &[f64] {
        &self.lambda[i * self.species..(i + 1) * self.species]
    }

    pub fn max_abs_lambda(&self) -> f64 {
        self.lambda.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// `λ = −(D C″ + (y/2)C′)` decomposed onto the reaction directions by least
/// squares.
pub fn lagrange_multiplier(
    profile: &Profile,
    diffusion: &DiffusionMatrix,
    network: &ReactionNetwork,
) -> Result<FluxSet> {
    let species = network.species_count();
    if profile.components != species || diffusion.len() != species {
        return Err(Error::domain("profile, diffusion and network sizes disagree"));
    }
    let dirs = network.direction_matrix();
    let r = dirs.ncols();
    if r == 0 || dirs.clone().svd(false, false).rank(1e-10) < r {
        return Err(Error::domain("reaction directions are linearly dependent"));
    }
    let grid = profile.grid;
    let n = grid.len();
    let h = grid.spacing();
    let d = diffusion.diagonal();

    let mut lambda = vec![0.0; n * species];
    for k in 0..species {
        let c = profile.component(k);
        let c1 = derivative(&c, h);
        let c2 = second_derivative(&c, h);
        for i in 1..n - 1 {
            lambda[i * species + k] = -(d[k] * c2[i] + 0.5 * grid.y(i) * c1[i]);
        }
    }

    let q = network.stoichiometry().matrix();
    let normal = dirs.transpose() * &dirs;
    let normal_inv = normal
        .try_inverse()
        .ok_or_else(|| Error::domain("reaction directions are linearly dependent"))?;
    let projector = normal_inv * dirs.transpose();

    let mut multipliers = vec![vec![0.0; n]; r];
    let (mut kernel, mut decomposition, mut violation) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..n {
        let li = DVector::from_column_slice(&lambda[i * species..(i + 1) * species]);
        let coeffs = &projector * &li;
        for (rr, m) in multipliers.iter_mut().enumerate() {
            m[i] = coeffs[rr];
        }
        kernel = kernel.max((q * &li).amax());
        decomposition = decomposition.max((&li - &dirs * &coeffs).amax());
        let rate = network.rate_unchecked(profile.node(i));
        violation = violation.max(rate.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }

    let scale = 1.0 + profile.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut warnings = Vec::new();
    if violation > 1e-8 * scale * network.max_rate() {
        warnings.push(format!(
            "profile is off the equilibrium manifold: max ‖R(C)‖ = {violation:.3e}"
        ));
    }
    Ok(FluxSet {
        grid,
        diffusive: diffusive_fluxes(profile, d)?,
        multipliers,
        lambda,
        species,
        kernel_residual: kernel,
        decomposition_residual: decomposition,
        constraint_violation: violation,
        warnings,
    })
}

/// The two componentwise forms of the single multiplier of `γX₁ ⇌ βX₂`:
/// `−(1/γ)(d₁C₁″ + (y/2)C₁′)` and `(1/β)(d₂C₂″ + (y/2)C₂′)`.
pub fn two_species_multiplier_forms(
    profile: &Profile,
    diffusion: &DiffusionMatrix,
    beta: f64,
    gamma: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if profile.components != 2 || diffusion.len() != 2 {
        return Err(Error::domain("two-species forms need two components"));
    }
    let grid = profile.grid;
    let h = grid.spacing();
    let d = diffusion.diagonal();
    let form = |k: usize| -> Vec<f64> {
        let c = profile.component(k);
        let c1 = derivative(&c, h);
        let c2 = second_derivative(&c, h);
        (0..grid.len())
            .map(|i| {
                if i == 0 || i == grid.len() - 1 {
                    0.0
                } else {
                    d[k] * c2[i] + 0.5 * grid.y(i) * c1[i]
                }
            })
            .collect()
    };
    let first = form(0).into_iter().map(|v| -v / gamma).collect();
    let second = form(1).into_iter().map(|v| v / beta).collect();
    Ok((first, second))
}

/// Shape fit of a multiplier curve to `a 𝔼″(y/s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierFit {
    /// Argument scale `s` (the extremum of `𝔼″` sits at `|z| = 1`).
    pub scale: f64,
    pub amplitude: f64,
    /// `max |Λ − a𝔼″(y/s)|`.
    pub misfit: f64,
}

/// Fits `Λ(y) ≈ a 𝔼″(y/s)` from the location and size of the extremum of `|Λ|`
/// on `y > 0`.
pub fn fit_multiplier_scale(grid: &Grid, multiplier: &[f64]) -> Result<MultiplierFit> {
    let c = grid.center();
    let n = grid.len();
    let (mut best, mut idx) = (0.0_f64, c);
    for (i, v) in multiplier.iter().enumerate().take(n - 1).skip(c + 1) {
        if v.abs() > best {
            best = v.abs();
            idx = i;
        }
    }
    if best == 0.0 {
        return Err(Error::domain("multiplier vanishes; no scale to fit"));
    }
    // Parabolic refinement of the extremum.
    let h = grid.spacing();
    let (a, b, cc) = (multiplier[idx - 1].abs(), multiplier[idx].abs(), multiplier[idx + 1].abs());
    let denom = a - 2.0 * b + cc;
    let shift = if denom != 0.0 { 0.5 * (a - cc) / denom } else { 0.0 };
    let scale = grid.y(idx) + shift * h;
    let peak = erf_profile_e_second(1.0);
    let amplitude = multiplier[idx] / peak;
    let misfit = (0..n)
        .map(|i| (multiplier[i] - amplitude * erf_profile_e_second(grid.y(i) / scale)).abs())
        .fold(0.0, f64::max);
    Ok(MultiplierFit {
        scale,
        amplitude,
        misfit,
    })
}

/// Turbulence fluxes `Q^lin.mom = −η k^β V′`, `Q^tur.kin = −κ k^β K′` and
/// source `S^tur.kin = η k^α V′²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceFluxSet {
    pub grid: Grid,
    pub momentum_flux: Vec<f64>,
    pub kinetic_flux: Vec<f64>,
    pub source: Vec<f64>,
}

/// Fluxes from sampled `(V, K)` using centered differences.
pub fn turbulence_fluxes(grid: &Grid, v: &[f64], k: &[f64], params: &TurbulenceParams) -> Result<TurbulenceFluxSet> {
    if v.len() != grid.len() || k.len() != grid.len() {
        return Err(Error::domain("V and K must be sampled on the grid"));
    }
    let h = grid.spacing();
    let dv = derivative(v, h);
    let dk = derivative(k, h);
    Ok(assemble_turbulence(grid, k, &dv, &dk, params))
}

/// Fluxes of the exact piecewise solution from its analytic derivatives.
pub fn turbulence_fluxes_exact(grid: &Grid, exact: &TurbulenceExact) -> TurbulenceFluxSet {
    let y = grid.nodes();
    let k: Vec<f64> = y.iter().map(|&y| exact.k(y)).collect();
    let dv: Vec<f64> = y.iter().map(|&y| exact.dv(y)).collect();
    let dk: Vec<f64> = y.iter().map(|&y| exact.dk(y)).collect();
    assemble_turbulence(grid, &k, &dv, &dk, &TurbulenceParams::default())
}

fn assemble_turbulence(grid: &Grid, k: &[f64], dv: &[f64], dk: &[f64], p: &TurbulenceParams) -> TurbulenceFluxSet {
    let mob = |k: f64, e: f64| k.max(0.0).powf(e);
    TurbulenceFluxSet {
        grid: *grid,
        momentum_flux: k
            .iter()
            .zip(dv)
            .map(|(&k, &dv)| -p.eta_visc * mob(k, p.beta_exp) * dv)
            .collect(),
        kinetic_flux: k
            .iter()
            .zip(dk)
            .map(|(&k, &dk)| -p.kappa_diff * mob(k, p.beta_exp) * dk)
            .collect(),
        source: k
            .iter()
            .zip(dv)
            .map(|(&k, &dv)| p.eta_visc * mob(k, p.alpha_exp) * dv * dv)
            .collect(),
    }
}

/// `Λ = −(ρ̄″ + (y/2)ρ̄′)` with `ρ̄ = √(1−η̄²)`.
pub fn gl_amplitude_multiplier(eta_profile: &Profile) -> Result<Vec<f64>> {
    if eta_profile.components != 1 {
        return Err(Error::domain("η̄ must be a scalar profile"));
    }
    if let Some(i) = eta_profile.values.iter().position(|e| !(e.abs() < 1.0)) {
        return Err(Error::domain(format!(
            "|η̄| ≥ 1 at node {i} (y = {}); amplitude undefined",
            eta_profile.grid.y(i)
        )));
    }
    let grid = eta_profile.grid;
    let h = grid.spacing();
    let rho: Vec<f64> = eta_profile.values.iter().map(|e| (1.0 - e * e).sqrt()).collect();
    let r1 = derivative(&rho, h);
    let r2 = second_derivative(&rho, h);
    Ok((0..grid.len())
        .map(|i| {
            if i == 0 || i == grid.len() - 1 {
                0.0
            } else {
                -(r2[i] + 0.5 * grid.y(i) * r1[i])
            }
        })
        .collect())
}

/// Default `ε_zero` below which `η̄` counts as vanishing.
pub const ZERO_SPEED_EPS: f64 = 1e-8;

/// `V(y) = y/2 − ψ̄(y)/(2ψ̄′(y))` with `ψ̄′ = η̄`.
pub fn zero_speed_profile(recon: &PsiReconstruction, eps: f64) -> Result<Vec<f64>> {
    let grid = recon.psi.grid;
    if let Some(i) = recon.eta.iter().position(|e| e.abs() < eps) {
        return Err(Error::domain(format!(
            "η̄ vanishes at node {i} (y = {}); the zero speed is singular",
            grid.y(i)
        )));
    }
    Ok((0..grid.len())
        .map(|i| 0.5 * grid.y(i) - recon.psi.value(i, 0) / (2.0 * recon.eta[i]))
        .collect())
}

/// `H = ψ̄⁻¹` by monotone piecewise-linear inversion.
pub fn inverse_phase(recon: &PsiReconstruction, phase: f64) -> Result<f64> {
    let psi = &recon.psi.values;
    let grid = recon.psi.grid;
    let increasing = recon.eta.iter().all(|&e| e > 0.0);
    let decreasing = recon.eta.iter().all(|&e| e < 0.0);
    if !(increasing || decreasing) {
        return Err(Error::domain("ψ̄ is not monotone; η̄ changes sign"));
    }
    let n = psi.len();
    let key = |v: f64| if increasing { v } else { -v };
    let target = key(phase);
    if target < key(psi[0]) || target > key(psi[n - 1]) {
        return Err(Error::domain(format!("phase {phase} outside the range of ψ̄")));
    }
    let i = psi.partition_point(|&v| key(v) < target).clamp(1, n - 1);
    let (a, b) = (psi[i - 1], psi[i]);
    let t = if b != a { (phase - a) / (b - a) } else { 0.0 };
    Ok(grid.y(i - 1) + t * grid.spacing())
}

/// Speed of the zero starting at `x₀`, from `x(t) = √(1+t) H(ψ̄(x₀)/√(1+t))`
/// differentiated by a centered difference of step `dt` at `t = 0`.
pub fn zero_speed_from_inverse(recon: &PsiReconstruction, x0: f64, dt: f64) -> Result<f64> {
    let phase = recon.psi.interpolate(0, x0);
    let pos = |t: f64| -> Result<f64> {
        let s = (1.0 + t).sqrt();
        Ok(s * inverse_phase(recon, phase / s)?)
    };
    Ok((pos(dt)? - pos(-dt)?) / (2.0 * dt))
}

/// Infiltration summary: flux through `y = 0` and the mass law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfiltrationReport {
    pub m: f64,
    /// `Q(0) = −(W^m)′(0)`.
    pub q0: f64,
    pub initial_mass: f64,
    /// `∫₀^L W`, which equals `2Q(0)` for an exact profile.
    pub profile_mass: f64,
}

impl InfiltrationReport {
    /// `M≥(t) = M≥(0)(1+t)^{1/2}`.
    pub fn mass_law(&self, t: f64) -> f64 {
        self.initial_mass * (1.0 + t).sqrt()
    }
}

pub fn infiltration_report(profile: &Profile, m: f64, initial_mass: f64) -> Result<InfiltrationReport> {
    if profile.components != 1 {
        return Err(Error::domain("infiltration needs a scalar profile"));
    }
    if profile.right_limit[0] != 0.0 {
        return Err(Error::domain(format!(
            "infiltration needs U₊ = 0, got {}",
            profile.right_limit[0]
        )));
    }
    let flux = pme_flux(profile, m)?;
    let grid = profile.grid;
    let c = grid.center();
    let h = grid.spacing();
    let w = &profile.values;
    let profile_mass: f64 = (c..grid.len() - 1).map(|i| 0.5 * h * (w[i] + w[i + 1])).sum();
    Ok(InfiltrationReport {
        m,
        q0: flux[c],
        initial_mass,
        profile_mass,
    })
}

/// Spread `max − min` of `G(y) = A(U)′ + (y/2)U − ½∫_{−L}^y U`, which is
/// constant for an exact scalar profile.
pub fn flux_duality_defect<F: FluxMap + ?Sized>(profile: &Profile, flux: &F) -> Result<f64> {
    if profile.components != 1 || flux.dim() != 1 {
        return Err(Error::domain("flux duality applies to scalar profiles"));
    }
    let grid = profile.grid;
    let h = grid.spacing();
    let n = grid.len();
    let mut a = vec![0.0; n];
    for i in 0..n {
        let mut out = [0.0];
        flux.value(profile.node(i), &mut out)?;
        a[i] = out[0];
    }
    let da = derivative(&a, h);
    let u = &profile.values;
    let mut integral = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        if i > 0 {
            integral += 0.5 * h * (u[i - 1] + u[i]);
        }
        if i > 0 && i < n - 1 {
            let g = da[i] + 0.5 * grid.y(i) * u[i] - 0.5 * integral;
            lo = lo.min(g);
            hi = hi.max(g);
        }
    }
    Ok(hi - lo)
}

/// Eckhaus phase flux `Φ(η̄)` sampled on the profile (for reports).
pub fn gl_phase_flux(eta_profile: &Profile) -> Vec<f64> {
    eta_profile.values.iter().map(|&e| eckhaus_phi(e)).collect()
}

/// Least-squares coefficients of `λ` in the columns of `dirs` (exposed for
/// cross-checks).
pub fn decompose(dirs: &DMatrix<f64>, lambda: &[f64]) -> Result<Vec<f64>> {
    let v = DVector::from_column_slice(lambda);
    dirs.clone()
        .svd(true, true)
        .solve(&v, 1e-14)
        .map(|x| x.as_slice().to_vec())
        .map_err(|e| Error::domain(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile_bvp::{barenblatt, turbulence_exact, PmeParams, ProfileOrigin};

    #[test]
    fn barenblatt_flux_matches_closed_form() {
        let grid = Grid::new(3.0, 6001).unwrap();
        let w = barenblatt(&PmeParams::barenblatt(2.0, 1.0).unwrap()).unwrap();
        let p = Profile::from_fn(grid, |y| w.value(y), ProfileOrigin::ClosedForm);
        let q = pme_flux(&p, 2.0).unwrap();
        for i in 1..grid.len() - 1 {
            let y = grid.y(i);
            if (y.abs() - w.support_radius()).abs() > 0.01 {
                assert!((q[i] - y * w.value(y) / 3.0).abs() < 1e-6, "y = {y}");
            }
        }
    }

    #[test]
    fn constant_profile_has_no_flux() {
        let grid = Grid::new(5.0, 101).unwrap();
        let p = Profile::from_nodes(grid, 2, vec![0.5; 202], ProfileOrigin::ClosedForm).unwrap();
        let q = diffusive_fluxes(&p, &[1.0, 2.0]).unwrap();
        assert!(q.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_turbulence_fluxes() {
        let grid = Grid::new(3.0, 601).unwrap();
        let s = turbulence_exact(1.0).unwrap();
        let f = turbulence_fluxes_exact(&grid, &s);
        for i in 0..grid.len() {
            let k = s.k(grid.y(i));
            assert!((f.momentum_flux[i] + k / 2f64.sqrt()).abs() < 1e-15);
            assert!((f.source[i] - k / 2.0).abs() < 1e-15);
            assert!(f.source[i] >= 0.0);
        }
        let zeros = vec![0.0; grid.len()];
        let f = turbulence_fluxes(&grid, &zeros, &zeros, &TurbulenceParams::default()).unwrap();
        assert!(f.momentum_flux.iter().chain(&f.kinetic_flux).chain(&f.source).all(|&v| v == 0.0));
    }

    #[test]
    fn constant_wavenumber_has_no_multiplier() {
        let grid = Grid::new(5.0, 101).unwrap();
        let p = Profile::from_fn(grid, |_| 0.3, ProfileOrigin::Solved);
        assert!(gl_amplitude_multiplier(&p).unwrap().iter().all(|&v| v == 0.0));
        let bad = Profile::from_fn(grid, |y| if y > 4.0 { 1.0 } else { 0.3 }, ProfileOrigin::Solved);
        assert!(gl_amplitude_multiplier(&bad).is_err());
    }

    #[test]
    fn infiltration_mass_law() {
        let grid = Grid::new(5.0, 101).unwrap();
        let p = Profile::from_fn(grid, |y| if y < 0.0 { 1.0 } else { 0.0 }, ProfileOrigin::Solved);
        let r = infiltration_report(&p, 2.0, 0.8).unwrap();
        assert_eq!(r.mass_law(0.0), 0.8);
        assert_eq!(r.mass_law(3.0), 1.6);
        let wrong = Profile::from_fn(grid, |_| 1.0, ProfileOrigin::Solved);
        assert!(infiltration_report(&wrong, 2.0, 1.0).is_err());
    }

    #[test]
    fn decomposition_matches_projector() {
        let dirs = DMatrix::from_column_slice(3, 2, &[2.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
        let lambda = [2.0 * 0.3, -0.3 + 0.7, -0.7];
        let c = decompose(&dirs, &lambda).unwrap();
        assert!((c[0] - 0.3).abs() < 1e-14 && (c[1] - 0.7).abs() < 1e-14);
    }
}
