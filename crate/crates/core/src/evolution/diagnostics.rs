use serde::{Deserialize, Serialize};

use super::field::{Field1D, Trajectory, TrajectoryKind};
use crate::error::{Error, Result};
use crate::profile_bvp::Profile;

/// Self-similar scaling `u(t, x) = (1+t)^{−α} U(x/(1+t)^β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub alpha: f64,
    pub beta: f64,
}

impl Scaling {
    pub const PARABOLIC: Scaling = Scaling { alpha: 0.0, beta: 0.5 };

    /// Barenblatt scaling `α = β = 1/(m+1)`.
    pub fn barenblatt(m: f64) -> Self {
        Self {
            alpha: 1.0 / (m + 1.0),
            beta: 1.0 / (m + 1.0),
        }
    }
}

/// Max-norm distance to a reference profile per snapshot, `(t, error)`.
///
/// Each snapshot is pulled back by `(1+t)^α u(t, y(1+t)^β)` on the
/// reference grid with linear interpolation; all components are compared.
pub fn scaled_convergence(traj: &Trajectory, reference: &Profile, scaling: Scaling) -> Result<Vec<(f64, f64)>> {
    let grid = reference.grid;
    let mut out = Vec::with_capacity(traj.snapshots.len());
    for (s, &t) in traj.snapshots.iter().zip(&traj.times) {
        if s.components != reference.components {
            return Err(Error::domain(format!(
                "reference has {} components, trajectory {}",
                reference.components, s.components
            )));
        }
        let stretch = (1.0 + t).powf(scaling.beta);
        if grid.half_width() * stretch > s.half_width * (1.0 + 1e-12) {
            let t_max = (s.half_width / grid.half_width()).powf(1.0 / scaling.beta) - 1.0;
            return Err(Error::domain(format!(
                "scaled window exceeds the simulation domain at t = {t}; maximal usable t = {t_max:.6}"
            )));
        }
        let amp = (1.0 + t).powf(scaling.alpha);
        let mut err = 0.0_f64;
        for i in 0..grid.len() {
            let x = (grid.y(i) * stretch).clamp(-s.half_width, s.half_width);
            for k in 0..s.components {
                let u = s.interpolate(k, x).expect("x clamped into the domain");
                err = err.max((amp * u - reference.value(i, k)).abs());
            }
        }
        out.push((t, err));
    }
    Ok(out)
}

/// Like [`scaled_convergence`] but against an analytic reference, evaluated
/// at the simulation nodes (no interpolation error).
pub fn scaled_error_at_nodes(
    traj: &Trajectory,
    component: usize,
    scaling: Scaling,
    reference: impl Fn(f64) -> f64,
) -> Vec<(f64, f64)> {
    traj.snapshots
        .iter()
        .zip(&traj.times)
        .map(|(s, &t)| {
            let stretch = (1.0 + t).powf(scaling.beta);
            let amp = (1.0 + t).powf(scaling.alpha);
            let err = (0..s.nodes).fold(0.0_f64, |e, i| {
                e.max((amp * s.value(i, component) - reference(s.x(i) / stretch)).abs())
            });
            (t, err)
        })
        .collect()
}

/// Named per-snapshot integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub series: Vec<Vec<f64>>,
}

impl Ledger {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|j| self.series[j].as_slice())
    }

    /// `max |q(t) − q(0)| / |q(0)|` for the named series.
    pub fn relative_drift(&self, name: &str) -> Option<f64> {
        let s = self.get(name)?;
        let q0 = *s.first()?;
        let scale = q0.abs().max(f64::MIN_POSITIVE);
        Some(s.iter().fold(0.0_f64, |m, q| m.max((q - q0).abs())) / scale)
    }
}

/// Trapezoidal conserved quantities per snapshot:
/// mass (PME), `∫Qc` (RDS), momentum and energy (turbulence), `∫|A|²` (GL).
pub fn conserved_quantities(traj: &Trajectory) -> Ledger {
    let mut names: Vec<String> = Vec::new();
    let mut series: Vec<Vec<f64>> = Vec::new();
    let mut push = |name: String, f: &dyn Fn(&Field1D) -> f64| {
        names.push(name);
        series.push(traj.snapshots.iter().map(f).collect());
    };
    match &traj.kind {
        TrajectoryKind::Pme { .. } => push("mass".into(), &|s| s.integral(0)),
        TrajectoryKind::Rds { q } => {
            for (j, row) in q.iter().enumerate() {
                push(format!("u{}", j + 1), &|s| {
                    s.integrate(|c| row.iter().zip(c).map(|(a, b)| a * b).sum())
                });
            }
        }
        TrajectoryKind::Turbulence => {
            push("momentum".into(), &|s| s.integral(0));
            push("energy".into(), &|s| s.integrate(|c| 0.5 * c[0] * c[0] + c[1]));
            push("macroscopic_energy".into(), &|s| s.integrate(|c| 0.5 * c[0] * c[0]));
            push("turbulent_energy".into(), &|s| s.integral(1));
        }
        TrajectoryKind::GinzburgLandau => {
            push("norm".into(), &|s| s.integrate(|c| c[0] * c[0] + c[1] * c[1]))
        }
    }
    Ledger {
        times: traj.times.clone(),
        names,
        series,
    }
}
