use super::field::{drive, Field1D, Schedule, StepOptions, Trajectory, TrajectoryKind};
use crate::error::{Error, Result};
use crate::profile_bvp::TurbulenceParams;

/// Explicit conservative scheme for the one-dimensional turbulence model
/// `v_t = (η k^β v_x)_x`, `k_t = (κ k^β k_x)_x + η k^α v_x²` on a field with
/// components `(v, k)`.
///
/// Face mobilities are arithmetic means of `k^β`. The source is assembled
/// from the face dissipation `G_{i+½}(v̄_{i+1} − v̄_i)/h` with `v̄` the
/// average of old and new velocities, split between the adjacent control
/// volumes, so `ℰ = ∫(½v² + k)` is conserved to rounding for `α = β`.
pub fn run_turbulence(
    params: &TurbulenceParams,
    initial: &Field1D,
    schedule: &Schedule,
    opts: &StepOptions,
) -> Result<Trajectory> {
    params.validate()?;
    if params.dimension != 1 {
        return Err(Error::domain("only one-dimensional turbulence runs are supported"));
    }
    if initial.components != 2 {
        return Err(Error::domain("turbulence field needs components (v, k)"));
    }
    if let Some(i) = (0..initial.nodes).find(|&i| !(initial.value(i, 1) >= 0.0)) {
        return Err(Error::domain(format!(
            "initial k negative at x = {}",
            initial.x(i)
        )));
    }
    let mut traj = Trajectory::start(TrajectoryKind::Turbulence, initial);
    let mut field = initial.clone();
    let n = field.nodes;
    let h = field.spacing();
    let dirichlet = field.is_dirichlet();
    let p = *params;
    let mut mob_v = vec![0.0; n - 1];
    let mut mob_alpha = vec![0.0; n - 1];
    let mut gv = vec![0.0; n - 1];
    let mut gk = vec![0.0; n - 1];
    let mut v_old = vec![0.0; n];
    let mut clamped = 0.0;
    let weight = |i: usize| if !dirichlet && (i == 0 || i == n - 1) { 0.5 } else { 1.0 };

    drive(
        &mut field,
        schedule,
        &mut traj,
        |f, remaining| {
            let m = 2;
            let pow = |k: f64, e: f64| if e == 1.0 { k.max(0.0) } else { k.max(0.0).powf(e) };
            let mut mu_max = 0.0_f64;
            for i in 0..n - 1 {
                let (ka, kb) = (f.values[i * m + 1], f.values[(i + 1) * m + 1]);
                mob_v[i] = 0.5 * (pow(ka, p.beta_exp) + pow(kb, p.beta_exp));
                mob_alpha[i] = 0.5 * (pow(ka, p.alpha_exp) + pow(kb, p.alpha_exp));
                mu_max = mu_max.max(mob_v[i]);
            }
            let diff = p.eta_visc.max(p.kappa_diff) * mu_max;
            let mut dt = if diff > 0.0 {
                opts.cfl * h * h / (2.0 * diff)
            } else {
                remaining
            };
            if let Some(cap) = opts.max_dt {
                dt = dt.min(cap);
            }
            if dt < opts.dt_floor && dt < remaining {
                return Err(Error::solver(
                    format!("turbulence step {dt:.3e} below the floor at t = {}", f.time),
                    vec![],
                ));
            }
            let dt = dt.min(remaining);
            for i in 0..n {
                v_old[i] = f.values[i * m];
            }
            for i in 0..n - 1 {
                gv[i] = p.eta_visc * mob_v[i] * (v_old[i + 1] - v_old[i]) / h;
                let (ka, kb) = (f.values[i * m + 1], f.values[(i + 1) * m + 1]);
                gk[i] = p.kappa_diff * mob_v[i] * (kb - ka) / h;
            }
            let (lo, hi) = if dirichlet { (1, n - 1) } else { (0, n) };
            for i in lo..hi {
                let right = if i + 1 < n { gv[i] } else { 0.0 };
                let left = if i > 0 { gv[i - 1] } else { 0.0 };
                f.values[i * m] += dt * (right - left) / (weight(i) * h);
            }
            // Source from the dissipation on each face; with α ≠ β the
            // mobility ratio rescales it.
            let mut source = vec![0.0; n];
            for i in 0..n - 1 {
                let vbar_r = 0.5 * (v_old[i + 1] + f.values[(i + 1) * m]);
                let vbar_l = 0.5 * (v_old[i] + f.values[i * m]);
                let mut s = gv[i] * (vbar_r - vbar_l) / h;
                if p.alpha_exp != p.beta_exp {
                    s = if mob_v[i] > 0.0 { s * mob_alpha[i] / mob_v[i] } else { 0.0 };
                }
                source[i] += 0.5 * s;
                source[i + 1] += 0.5 * s;
            }
            for i in lo..hi {
                let right = if i + 1 < n { gk[i] } else { 0.0 };
                let left = if i > 0 { gk[i - 1] } else { 0.0 };
                f.values[i * m + 1] += dt * ((right - left) / h + source[i]) / weight(i);
            }
            f.apply_dirichlet();
            let removed = f.clamp_nonnegative(1..2);
            if removed > 0.0 {
                clamped += removed;
                let total = f.integral(1).max(f64::MIN_POSITIVE);
                if clamped > opts.clamp_budget * total {
                    return Err(Error::solver(
                        format!("k clamping removed {clamped:.3e}, beyond the budget"),
                        vec![],
                    ));
                }
            }
            Ok(dt)
        },
        |_, _| {},
    )?;
    traj.clamped_mass = clamped;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::conserved_quantities;
    use crate::evolution::field::Boundary;

    #[test]
    fn frozen_without_turbulence() {
        let f = Field1D::from_fn(2.0, 41, 2, |_| vec![0.3, 0.0], Boundary::NeumannZero).unwrap();
        let traj = run_turbulence(
            &TurbulenceParams::default(),
            &f,
            &Schedule::uniform(1.0, 2).unwrap(),
            &StepOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.last().values, f.values);
    }

    #[test]
    fn zero_flux_conserves_momentum_and_energy() {
        let f = Field1D::from_fn(
            6.0,
            241,
            2,
            |x| vec![(-x * x).exp() * x, 0.2 * (-x * x / 2.0).exp()],
            Boundary::NeumannZero,
        )
        .unwrap();
        let traj = run_turbulence(
            &TurbulenceParams::default(),
            &f,
            &Schedule::uniform(1.0, 4).unwrap(),
            &StepOptions::default(),
        )
        .unwrap();
        let ledger = conserved_quantities(&traj);
        assert!(ledger.relative_drift("energy").unwrap() < 1e-12);
        let p = ledger.get("momentum").unwrap();
        assert!(p.iter().all(|q| (q - p[0]).abs() < 1e-14));
        let kin = ledger.get("macroscopic_energy").unwrap();
        assert!(kin.windows(2).all(|w| w[1] < w[0]));
    }
}
