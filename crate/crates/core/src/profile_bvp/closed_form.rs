use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// `𝔼(z) = (1 + erf(z/√2))/2`, the solution of `𝔼″ + z𝔼′ = 0` with limits 0 and 1.
pub fn erf_profile_e(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// `𝔼′(z)`, the standard normal density.
pub fn erf_profile_e_prime(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `𝔼″(z) = −z𝔼′(z)`.
pub fn erf_profile_e_second(z: f64) -> f64 {
    -z * erf_profile_e_prime(z)
}

/// Exact profile for a linear flux `A(u) = D u`: `U₋ + (U₊−U₋)𝔼(y/√(2D))`.
pub fn linear_flux_profile(diffusivity: f64, left: f64, right: f64, y: f64) -> f64 {
    left + (right - left) * erf_profile_e(y / (2.0 * diffusivity).sqrt())
}

/// Closed form for `γX₁ ⇌ γX₂` (β = γ): both concentrations equal
/// `C₋ + (C₊−C₋)𝔼(y/√(d₁+d₂))`, and the multiplier of the direction `(γ,−γ)` is
/// `Λ(y) = −((d₁−d₂)/(2γ(d₁+d₂)))(C₊−C₋)𝔼″(y/√(d₁+d₂))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSpeciesEqualExponents {
    pub gamma: f64,
    pub d1: f64,
    pub d2: f64,
    pub c_minus: f64,
    pub c_plus: f64,
}

impl TwoSpeciesEqualExponents {
    pub fn argument_scale(&self) -> f64 {
        (self.d1 + self.d2).sqrt()
    }

    pub fn concentration(&self, y: f64) -> f64 {
        self.c_minus + (self.c_plus - self.c_minus) * erf_profile_e(y / self.argument_scale())
    }

    /// Conserved quantity `u = γ(c₁ + c₂)`.
    pub fn conserved(&self, y: f64) -> f64 {
        2.0 * self.gamma * self.concentration(y)
    }

    pub fn multiplier(&self, y: f64) -> f64 {
        let s = self.argument_scale();
        -(self.d1 - self.d2) / (2.0 * self.gamma * (self.d1 + self.d2))
            * (self.c_plus - self.c_minus)
            * erf_profile_e_second(y / s)
    }
}

/// Parameters of the scalar porous medium problem `u_t = (u^m)_xx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmeParams {
    pub m: f64,
    pub branch: PmeBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "branch")]
pub enum PmeBranch {
    /// Finite mass: `u = (1+t)^{−α} W(x/(1+t)^β)` with `α = β = 1/(m+1)`.
    Barenblatt { mass_parameter: f64 },
    /// Limits at `±∞`: `α = 0`, `β = ½`.
    Mixing { left: f64, right: f64 },
}

impl PmeParams {
    pub fn barenblatt(m: f64, mass_parameter: f64) -> Result<Self> {
        let p = Self {
            m,
            branch: PmeBranch::Barenblatt { mass_parameter },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn mixing(m: f64, left: f64, right: f64) -> Result<Self> {
        let p = Self {
            m,
            branch: PmeBranch::Mixing { left, right },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m >= 1.0) {
            return Err(Error::domain(format!("PME exponent m must be ≥ 1, got {}", self.m)));
        }
        match self.branch {
            PmeBranch::Barenblatt { mass_parameter } if !(mass_parameter >= 0.0) => {
                Err(Error::validation("N", "mass parameter must be nonnegative"))
            }
            PmeBranch::Mixing { left, right } if !(left >= 0.0 && right >= 0.0) => {
                Err(Error::validation("U", "boundary values must be nonnegative"))
            }
            _ => Ok(()),
        }
    }

    /// `(α, β)` of the scaling `u = (1+t)^{−α}Φ(x/(1+t)^β)`.
    pub fn scaling_exponents(&self) -> (f64, f64) {
        match self.branch {
            PmeBranch::Barenblatt { .. } => {
                let e = 1.0 / (self.m + 1.0);
                (e, e)
            }
            PmeBranch::Mixing { .. } => (0.0, 0.5),
        }
    }
}

/// Barenblatt profile `W(y) = max{0, N − c_m y²}^{1/(m−1)}` (Gaussian
/// `N e^{−y²/4}` for `m = 1`), steady for `((W^m)′ + yW/(m+1))′ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarenblattProfile {
    pub m: f64,
    pub mass_parameter: f64,
    /// `c_m = (m−1)/(2m(m+1))`; for `m = 1` the Gaussian rate `1/4`.
    pub c_m: f64,
    pub mass: f64,
}

/// `c_m = (m−1)/(2m(m+1))`.
pub fn barenblatt_constant(m: f64) -> f64 {
    (m - 1.0) / (2.0 * m * (m + 1.0))
}

/// `∫_{−R}^{R} (N − c y²)^p dy` with `R = √(N/c)`.
fn power_bump_mass(n: f64, c: f64, p: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let r = (n / c).sqrt();
    n.powf(p) * r * std::f64::consts::PI.sqrt() * libm::tgamma(p + 1.0) / libm::tgamma(p + 1.5)
}

/// The closed-form Barenblatt profile for `params` (Barenblatt branch, d = 1).
pub fn barenblatt(params: &PmeParams) -> Result<BarenblattProfile> {
    params.validate()?;
    let n = match params.branch {
        PmeBranch::Barenblatt { mass_parameter } => mass_parameter,
        PmeBranch::Mixing { .. } => {
            return Err(Error::domain("Barenblatt profiles need the finite-mass branch"))
        }
    };
    let m = params.m;
    if m == 1.0 {
        return Ok(BarenblattProfile {
            m,
            mass_parameter: n,
            c_m: 0.25,
            mass: 2.0 * n * std::f64::consts::PI.sqrt(),
        });
    }
    let c = barenblatt_constant(m);
    Ok(BarenblattProfile {
        m,
        mass_parameter: n,
        c_m: c,
        mass: power_bump_mass(n, c, 1.0 / (m - 1.0)),
    })
}

impl BarenblattProfile {
    pub fn is_gaussian(&self) -> bool {
        self.m == 1.0
    }

    /// Edge of the support, `√(N/c_m)` (infinite for `m = 1`).
    pub fn support_radius(&self) -> f64 {
        if self.is_gaussian() {
            f64::INFINITY
        } else {
            (self.mass_parameter / self.c_m).sqrt()
        }
    }

    pub fn value(&self, y: f64) -> f64 {
        if self.is_gaussian() {
            return self.mass_parameter * (-0.25 * y * y).exp();
        }
        let base = self.mass_parameter - self.c_m * y * y;
        if base <= 0.0 {
            0.0
        } else {
            base.powf(1.0 / (self.m - 1.0))
        }
    }

    /// `W′(y)`.
    pub fn derivative(&self, y: f64) -> f64 {
        if self.is_gaussian() {
            return -0.5 * y * self.value(y);
        }
        let base = self.mass_parameter - self.c_m * y * y;
        if base <= 0.0 {
            return 0.0;
        }
        let p = 1.0 / (self.m - 1.0);
        -2.0 * self.c_m * y * p * base.powf(p - 1.0)
    }

    /// `(W^m)′(y) = m W^{m−1} W′`.
    pub fn flux_derivative(&self, y: f64) -> f64 {
        let w = self.value(y);
        if w == 0.0 {
            return 0.0;
        }
        self.m * w.powf(self.m - 1.0) * self.derivative(y)
    }

    /// Diffusive flux `Q(y) = −(W^m)′ = yW/(m+1)`.
    pub fn flux(&self, y: f64) -> f64 {
        y * self.value(y) / (self.m + 1.0)
    }

    /// The steady flux `(W^m)′ + yW/(m+1)` evaluated analytically.
    pub fn steady_flux_residual(&self, y: f64) -> f64 {
        self.flux_derivative(y) + y * self.value(y) / (self.m + 1.0)
    }

    /// Exact self-similar solution `(1+t)^{−α} W(x/(1+t)^α)` with `α = 1/(m+1)`.
    pub fn solution(&self, t: f64, x: f64) -> f64 {
        let a = 1.0 / (self.m + 1.0);
        let s = (1.0 + t).powf(a);
        self.value(x / s) / s
    }
}

/// Parameters of the two-field turbulence model
/// `v_t = (η k^β v_x)_x`, `k_t = (κ k^β k_x)_x + η k^α v_x²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceParams {
    pub eta_visc: f64,
    pub kappa_diff: f64,
    pub alpha_exp: f64,
    pub beta_exp: f64,
    pub dimension: usize,
}

impl Default for TurbulenceParams {
    fn default() -> Self {
        Self {
            eta_visc: 1.0,
            kappa_diff: 1.0,
            alpha_exp: 1.0,
            beta_exp: 1.0,
            dimension: 1,
        }
    }
}

impl TurbulenceParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_visc", self.eta_visc),
            ("kappa_diff", self.kappa_diff),
            ("alpha_exp", self.alpha_exp),
            ("beta_exp", self.beta_exp),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        if self.dimension == 0 {
            return Err(Error::validation("dimension", "must be at least 1"));
        }
        Ok(())
    }

    /// `γ = 1/(2 + βd)`.
    pub fn scaling_exponent(&self) -> f64 {
        1.0 / (2.0 + self.beta_exp * self.dimension as f64)
    }

    pub fn is_exact_branch(&self) -> bool {
        self.alpha_exp == 1.0 && self.beta_exp == 1.0 && self.kappa_diff == 1.0 && self.eta_visc == 1.0
    }
}

/// Barenblatt-type profile `K(y) = max{0, N − c|y|²}^{1/β}` of the scaled
/// `k` equation, with `c = γβ/(2κ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceBarenblatt {
    pub params: TurbulenceParams,
    pub mass_parameter: f64,
    pub c: f64,
}

impl TurbulenceBarenblatt {
    pub fn new(params: TurbulenceParams, mass_parameter: f64) -> Result<Self> {
        params.validate()?;
        if !(mass_parameter >= 0.0) {
            return Err(Error::validation("N", "mass parameter must be nonnegative"));
        }
        let c = params.scaling_exponent() * params.beta_exp / (2.0 * params.kappa_diff);
        Ok(Self {
            params,
            mass_parameter,
            c,
        })
    }

    /// `K` at radius `|y| = r`.
    pub fn value(&self, r: f64) -> f64 {
        let base = self.mass_parameter - self.c * r * r;
        if base <= 0.0 {
            0.0
        } else {
            base.powf(1.0 / self.params.beta_exp)
        }
    }

    /// `dK/dr`.
    pub fn radial_derivative(&self, r: f64) -> f64 {
        let base = self.mass_parameter - self.c * r * r;
        if base <= 0.0 {
            return 0.0;
        }
        let p = 1.0 / self.params.beta_exp;
        -2.0 * self.c * r * p * base.powf(p - 1.0)
    }

    /// Radial steady flux `γ K r + κ K^β K′`, zero on the support.
    pub fn steady_flux_residual(&self, r: f64) -> f64 {
        let k = self.value(r);
        self.params.scaling_exponent() * k * r
            + self.params.kappa_diff * k.powf(self.params.beta_exp) * self.radial_derivative(r)
    }

    /// `∫_{ℝ^d} K`.
    pub fn mass(&self) -> f64 {
        integral_of_bump(
            self.mass_parameter,
            self.c,
            1.0 / self.params.beta_exp,
            self.params.dimension,
        )
    }

    /// Factor `ṽ` in `V = ṽ K^{κ/η}` so that `∫V = momentum`.
    pub fn momentum_prefactor(&self, momentum: f64) -> Result<f64> {
        let q = self.params.kappa_diff / (self.params.eta_visc * self.params.beta_exp);
        let denom = integral_of_bump(self.mass_parameter, self.c, q, self.params.dimension);
        if !(denom > 0.0) {
            return Err(Error::domain("zero K carries no momentum"));
        }
        Ok(momentum / denom)
    }

    /// `V(r) = ṽ K(r)^{κ/η}`.
    pub fn velocity(&self, prefactor: f64, r: f64) -> f64 {
        prefactor * self.value(r).powf(self.params.kappa_diff / self.params.eta_visc)
    }
}

/// `∫_{ℝ^d} max{0, N − c|y|²}^p dy = π^{d/2} R^d N^p Γ(p+1)/Γ(p+1+d/2)`.
fn integral_of_bump(n: f64, c: f64, p: f64, d: usize) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let half_d = 0.5 * d as f64;
    let r = (n / c).sqrt();
    std::f64::consts::PI.powf(half_d) * r.powi(d as i32) * n.powf(p) * libm::tgamma(p + 1.0)
        / libm::tgamma(p + 1.0 + half_d)
}

/// Exact piecewise solution of the turbulence model for `α = β = κ = η = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceExact {
    pub half_width: f64,
}

pub fn turbulence_exact(half_width: f64) -> Result<TurbulenceExact> {
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::domain(format!(
            "turbulence half-width A must be positive, got {half_width}"
        )));
    }
    Ok(TurbulenceExact { half_width })
}

impl TurbulenceExact {
    pub fn v(&self, y: f64) -> f64 {
        y.clamp(-self.half_width, self.half_width) / SQRT_2
    }

    pub fn k(&self, y: f64) -> f64 {
        if y.abs() < self.half_width {
            0.25 * (self.half_width * self.half_width - y * y)
        } else {
            0.0
        }
    }

    pub fn dv(&self, y: f64) -> f64 {
        if y.abs() < self.half_width {
            1.0 / SQRT_2
        } else {
            0.0
        }
    }

    pub fn dk(&self, y: f64) -> f64 {
        if y.abs() < self.half_width {
            -0.5 * y
        } else {
            0.0
        }
    }

    fn ddk(&self, y: f64) -> f64 {
        if y.abs() < self.half_width {
            -0.5
        } else {
            0.0
        }
    }

    /// `e = ½V² + K`.
    pub fn energy_density(&self, y: f64) -> f64 {
        0.5 * self.v(y).powi(2) + self.k(y)
    }

    /// `((KV′)′ + (y/2)V′, (KK′)′ + (y/2)K′ + K V′²)` from the analytic
    /// derivatives (`V″ = 0`); meaningful off `|y| = A`.
    pub fn steady_residuals(&self, y: f64) -> (f64, f64) {
        let (k, dk, ddk, dv) = (self.k(y), self.dk(y), self.ddk(y), self.dv(y));
        let rv = dk * dv + 0.5 * y * dv;
        let rk = dk * dk + k * ddk + 0.5 * y * dk + k * dv * dv;
        (rv, rk)
    }

    /// Unscaled solution `(ṽ, k̃)(t, x) = (V, K)(x/√(1+t))`.
    pub fn solution(&self, t: f64, x: f64) -> (f64, f64) {
        let y = x / (1.0 + t).sqrt();
        (self.v(y), self.k(y))
    }
}
