use crate::error::{Error, Result};
use crate::reaction_network::EffectiveDiffusion;

/// A (monotone) flux map `A: ℝ^m → ℝ^m` with Jacobian, as it appears in
/// `0 = (A(U))″ + (y/2)U′`.
pub trait FluxMap {
    fn dim(&self) -> usize;

    fn value(&self, u: &[f64], out: &mut [f64]) -> Result<()>;

    /// Row-major `m × m` Jacobian.
    fn jacobian(&self, u: &[f64], out: &mut [f64]) -> Result<()>;

    /// Pulls `u` back into the domain of `A`; returns whether it moved.
    fn project(&self, _u: &mut [f64]) -> bool {
        false
    }

    /// Representative diffusivity for the `𝔼`-based initial guess.
    fn typical_diffusivity(&self, left: &[f64], right: &[f64]) -> f64;

    /// Whether `u` sits on the projection boundary (used to flag unreliable
    /// solutions).
    fn at_clamp(&self, _u: &[f64]) -> bool {
        false
    }
}

/// `A(u) = D u` for a scalar `D > 0`.
#[derive(Debug, Clone, Copy)]
pub struct LinearFlux {
    pub diffusivity: f64,
}

impl LinearFlux {
    pub fn new(diffusivity: f64) -> Result<Self> {
        if !(diffusivity.is_finite() && diffusivity > 0.0) {
            return Err(Error::validation("diffusivity", "must be positive"));
        }
        Ok(Self { diffusivity })
    }
}

impl FluxMap for LinearFlux {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = self.diffusivity * u[0];
        Ok(())
    }
    fn jacobian(&self, _u: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = self.diffusivity;
        Ok(())
    }
    fn typical_diffusivity(&self, _: &[f64], _: &[f64]) -> f64 {
        self.diffusivity
    }
}

/// Porous-medium flux `A(u) = u^m` on `u ≥ 0`, with the one-sided derivative
/// at `u = 0`.
#[derive(Debug, Clone, Copy)]
pub struct PowerFlux {
    pub exponent: f64,
}

impl PowerFlux {
    pub fn new(exponent: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent >= 1.0) {
            return Err(Error::domain(format!("PME exponent must be ≥ 1, got {exponent}")));
        }
        Ok(Self { exponent })
    }
}

impl FluxMap for PowerFlux {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = u[0].max(0.0).powf(self.exponent);
        Ok(())
    }
    fn jacobian(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let m = self.exponent;
        out[0] = if m == 1.0 {
            1.0
        } else {
            m * u[0].max(0.0).powf(m - 1.0)
        };
        Ok(())
    }
    fn project(&self, u: &mut [f64]) -> bool {
        if u[0] < 0.0 {
            u[0] = 0.0;
            true
        } else {
            false
        }
    }
    fn typical_diffusivity(&self, left: &[f64], right: &[f64]) -> f64 {
        let top = left[0].max(right[0]).max(0.0);
        (self.exponent * top.powf(self.exponent - 1.0)).max(1e-3)
    }
}

/// Largest wavenumber admitted during iteration, `1/√3 − 1e−6`.
pub const ECKHAUS_CLAMP: f64 = 0.577_349_269_189_625_7;

/// `Φ(η) = 3η − ln((1+η)/(1−η))`, so `Φ′(η) = (1−3η²)/(1−η²)`.
pub fn eckhaus_phi(eta: f64) -> f64 {
    3.0 * eta - 2.0 * eta.atanh()
}

pub fn eckhaus_phi_prime(eta: f64) -> f64 {
    (1.0 - 3.0 * eta * eta) / (1.0 - eta * eta)
}

/// The phase-diffusion flux `Φ` of the wavenumber equation.
#[derive(Debug, Clone, Copy, Default)]
pub struct EckhausFlux;

impl FluxMap for EckhausFlux {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = eckhaus_phi(u[0]);
        Ok(())
    }
    fn jacobian(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = eckhaus_phi_prime(u[0]);
        Ok(())
    }
    fn project(&self, u: &mut [f64]) -> bool {
        let clamped = u[0].clamp(-ECKHAUS_CLAMP, ECKHAUS_CLAMP);
        let moved = clamped != u[0];
        u[0] = clamped;
        moved
    }
    fn typical_diffusivity(&self, left: &[f64], right: &[f64]) -> f64 {
        eckhaus_phi_prime(0.5 * (left[0] + right[0])).max(1e-3)
    }
    fn at_clamp(&self, u: &[f64]) -> bool {
        u[0].abs() >= ECKHAUS_CLAMP
    }
}

impl FluxMap for EffectiveDiffusion {
    fn dim(&self) -> usize {
        self.network().conserved_count()
    }
    fn value(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&EffectiveDiffusion::value(self, u)?);
        Ok(())
    }
    fn jacobian(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let jac = EffectiveDiffusion::jacobian(self, u)?;
        let m = jac.nrows();
        for r in 0..m {
            for c in 0..m {
                out[r * m + c] = jac[(r, c)];
            }
        }
        Ok(())
    }
    fn project(&self, u: &mut [f64]) -> bool {
        let mut moved = false;
        for v in u.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                moved = true;
            }
        }
        moved
    }
    fn typical_diffusivity(&self, _: &[f64], _: &[f64]) -> f64 {
        self.diffusion().mean()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eckhaus_derivative_matches_finite_difference() {
        for &eta in &[-0.5, -0.2, 0.0, 0.3, 0.45, 0.57] {
            let h = 1e-6;
            let fd = (eckhaus_phi(eta + h) - eckhaus_phi(eta - h)) / (2.0 * h);
            assert!((fd - eckhaus_phi_prime(eta)).abs() < 1e-7);
        }
        assert!((ECKHAUS_CLAMP - (1.0 / 3.0_f64.sqrt() - 1e-6)).abs() < 1e-15);
        assert!(eckhaus_phi_prime(ECKHAUS_CLAMP) > 0.0);
    }

    #[test]
    fn power_flux_projects_negative_values() {
        let f = PowerFlux::new(2.0).unwrap();
        let mut u = [-0.1];
        assert!(f.project(&mut u));
        assert_eq!(u[0], 0.0);
        let mut d = [1.0];
        f.jacobian(&u, &mut d).unwrap();
        assert_eq!(d[0], 0.0);
        assert!(PowerFlux::new(0.5).is_err());
    }
}
