use super::field::{drive, Field1D, Schedule, StepOptions, Trajectory, TrajectoryKind};
use crate::error::{Error, Result};

/// Explicit conservative finite-volume scheme for `u_t = (u^m)_xx`.
///
/// Face fluxes are `F_{i+½} = (u_{i+1}^m − u_i^m)/h`; the step obeys
/// `dt ≤ cfl·h²/(2m·max u^{m−1})`, recomputed every step.
pub fn run_pme(m: f64, initial: &Field1D, schedule: &Schedule, opts: &StepOptions) -> Result<Trajectory> {
    if !(m >= 1.0 && m.is_finite()) {
        return Err(Error::domain(format!("PME exponent must satisfy m ≥ 1, got {m}")));
    }
    if initial.components != 1 {
        return Err(Error::domain("PME field must be scalar"));
    }
    if let Some(i) = initial.values.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::domain(format!(
            "initial PME data negative at x = {}",
            initial.x(i)
        )));
    }
    let mut field = initial.clone();
    let mut traj = Trajectory::start(TrajectoryKind::Pme { m }, initial);
    let n = field.nodes;
    let h = field.spacing();
    let dirichlet = field.is_dirichlet();
    let mut pressure = vec![0.0; n];
    let mut flux = vec![0.0; n - 1];
    let mut clamped = 0.0;
    let integer_exponent = (m.fract() == 0.0 && m <= 16.0).then_some(m as i32);

    drive(
        &mut field,
        schedule,
        &mut traj,
        |f, remaining| {
            let umax = f.values.iter().copied().fold(0.0, f64::max);
            let stiffness = 2.0 * m * umax.powf(m - 1.0);
            let mut dt = if stiffness > 0.0 {
                opts.cfl * h * h / stiffness
            } else {
                remaining
            };
            if let Some(cap) = opts.max_dt {
                dt = dt.min(cap);
            }
            if dt < opts.dt_floor && dt < remaining {
                return Err(Error::solver(
                    format!("PME step {dt:.3e} below the floor {:.3e} at t = {}", opts.dt_floor, f.time),
                    vec![],
                ));
            }
            let dt = dt.min(remaining);
            if let Some(k) = integer_exponent {
                for (p, u) in pressure.iter_mut().zip(&f.values) {
                    *p = u.powi(k);
                }
            } else {
                for (p, u) in pressure.iter_mut().zip(&f.values) {
                    *p = u.powf(m);
                }
            }
            for i in 0..n - 1 {
                flux[i] = pressure[i + 1] - pressure[i];
            }
            let r = dt / (h * h);
            let u = &mut f.values;
            for i in 1..n - 1 {
                u[i] += r * (flux[i] - flux[i - 1]);
            }
            if !dirichlet {
                u[0] += 2.0 * r * flux[0];
                u[n - 1] -= 2.0 * r * flux[n - 2];
            }
            let removed = f.clamp_nonnegative(0..1);
            if removed > 0.0 {
                clamped += removed;
                let total = f.integral(0).abs().max(f64::MIN_POSITIVE);
                if clamped > opts.clamp_budget * total {
                    return Err(Error::solver(
                        format!("PME clamping removed {clamped:.3e}, beyond the budget"),
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
    use crate::evolution::field::Boundary;
    use crate::profile_bvp::{barenblatt, PmeParams};

    #[test]
    fn constant_state_with_matching_reservoirs_is_frozen() {
        let f = Field1D::from_fn(
            3.0,
            61,
            1,
            |_| vec![0.7],
            Boundary::Dirichlet {
                left: vec![0.7],
                right: vec![0.7],
            },
        )
        .unwrap();
        let traj = run_pme(2.0, &f, &Schedule::uniform(1.0, 2).unwrap(), &StepOptions::default()).unwrap();
        assert!(traj.last().values.iter().all(|&v| v == 0.7));
        assert!(traj.steps > 0);
    }

    #[test]
    fn zero_flux_mass_is_conserved() {
        let b = barenblatt(&PmeParams::barenblatt(2.0, 1.0).unwrap()).unwrap();
        let f = Field1D::from_fn(6.0, 301, 1, |x| vec![b.value(x)], Boundary::NeumannZero).unwrap();
        let traj = run_pme(2.0, &f, &Schedule::uniform(1.0, 4).unwrap(), &StepOptions::default()).unwrap();
        let m0 = traj.snapshots[0].integral(0);
        for s in &traj.snapshots {
            assert!((s.integral(0) - m0).abs() < 1e-10 * m0);
            assert!(s.min_value() >= 0.0);
        }
        assert_eq!(traj.clamped_mass, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let f = Field1D::from_fn(1.0, 11, 1, |x| vec![x], Boundary::NeumannZero).unwrap();
        assert!(run_pme(2.0, &f, &Schedule::uniform(1.0, 1).unwrap(), &StepOptions::default()).is_err());
        let g = Field1D::from_fn(1.0, 11, 1, |_| vec![1.0], Boundary::NeumannZero).unwrap();
        assert!(run_pme(0.5, &g, &Schedule::uniform(1.0, 1).unwrap(), &StepOptions::default()).is_err());
        let floor = StepOptions {
            dt_floor: 1.0,
            ..StepOptions::default()
        };
        let err = run_pme(2.0, &g, &Schedule::uniform(1.0, 1).unwrap(), &floor).unwrap_err();
        assert!(err.is_solver_failure());
    }
}
