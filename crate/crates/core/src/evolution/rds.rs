use super::field::{drive, Boundary, Field1D, Schedule, StepOptions, Trajectory, TrajectoryKind};
use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::reaction_network::{DiffusionMatrix, ReactionNetwork};

/// Default step for the implicit diffusion when `max_dt` is unset.
pub const RDS_DEFAULT_DT: f64 = 1e-2;

/// IMEX simulation of `c_t = D c_xx + R(c)`.
///
/// Diffusion is backward Euler (one tridiagonal solve per species); the
/// reaction is forward Euler, sub-stepped so that `dt_sub·ρ ≤ ½` with `ρ` a
/// Gershgorin bound of `DR(c)`. Diagnostics per snapshot: `max_rate`
/// (`max_x ‖R(c)‖∞`), `equilibrium_defect` (`max_x max_r |c^{β_r} − c^{α_r}|`,
/// independent of the rate constants) and `reaction_mass` (`∫‖QR(c)‖∞`).
pub fn run_rds(
    network: &ReactionNetwork,
    diffusion: &DiffusionMatrix,
    initial: &Field1D,
    schedule: &Schedule,
    opts: &StepOptions,
) -> Result<Trajectory> {
    let species = network.species_count();
    if initial.components != species || diffusion.len() != species {
        return Err(Error::domain(format!(
            "network has {species} species, field {} components, D {} entries",
            initial.components,
            diffusion.len()
        )));
    }
    if let Some(i) = initial.values.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::domain(format!(
            "initial concentration negative at x = {}",
            initial.x(i / species)
        )));
    }
    if let Boundary::Dirichlet { left, right } = &initial.boundary {
        for (side, c) in [("left", left), ("right", right)] {
            let r = network.eval_rate(c)?;
            let scale = 1.0 + c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if r.iter().any(|v| v.abs() > 1e-8 * scale * network.max_rate().max(1.0)) {
                return Err(Error::domain(format!(
                    "{side} boundary state {c:?} is not a reaction equilibrium"
                )));
            }
        }
    }
    let q = network.stoichiometry().matrix();
    let q_rows: Vec<Vec<f64>> = (0..q.nrows()).map(|j| q.row(j).iter().copied().collect()).collect();
    let mut traj = Trajectory::start(TrajectoryKind::Rds { q: q_rows.clone() }, initial);
    let mut field = initial.clone();
    let n = field.nodes;
    let h = field.spacing();
    let dirichlet = field.is_dirichlet();
    let dt_max = opts.max_dt.unwrap_or(RDS_DEFAULT_DT);
    let mut clamped = 0.0;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];

    let record = |f: &Field1D, traj: &mut Trajectory| {
        let mut max_rate = 0.0_f64;
        let mut defect = 0.0_f64;
        let mut reaction_mass = 0.0;
        for i in 0..n {
            let c = f.node(i);
            for reaction in network.reactions() {
                defect = defect.max((reaction.flux(c) / reaction.rate).abs());
            }
            let r = network.rate_unchecked(c);
            max_rate = max_rate.max(r.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
            let qr = q_rows
                .iter()
                .map(|row| row.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>().abs())
                .fold(0.0_f64, f64::max);
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            reaction_mass += w * h * qr;
        }
        traj.diagnostics.entry("max_rate".into()).or_default().push(max_rate);
        traj.diagnostics.entry("equilibrium_defect".into()).or_default().push(defect);
        traj.diagnostics.entry("reaction_mass".into()).or_default().push(reaction_mass);
    };

    drive(
        &mut field,
        schedule,
        &mut traj,
        |f, remaining| {
            let dt = dt_max.min(remaining);
            // Reaction substeps.
            for i in 0..n {
                if dirichlet && (i == 0 || i == n - 1) {
                    continue;
                }
                let mut c = f.node(i).to_vec();
                let jac = network.rate_jacobian(&c);
                let rho = (0..species)
                    .map(|a| (0..species).map(|b| jac[(a, b)].abs()).sum::<f64>())
                    .fold(0.0_f64, f64::max);
                let subs = ((dt * rho / 0.5).ceil() as usize).max(1);
                if subs > 1_000_000 {
                    return Err(Error::solver(
                        format!("reaction stiffness {rho:.3e} needs more than 1e6 substeps"),
                        vec![],
                    ));
                }
                let ds = dt / subs as f64;
                for _ in 0..subs {
                    let r = network.rate_unchecked(&c);
                    for (ck, rk) in c.iter_mut().zip(&r) {
                        *ck = (*ck + ds * rk).max(0.0);
                    }
                }
                let m = species;
                f.values[i * m..(i + 1) * m].copy_from_slice(&c);
            }
            // Implicit diffusion per species.
            for (k, &d) in diffusion.diagonal().iter().enumerate() {
                let r = dt * d / (h * h);
                let mut rhs = f.component(k);
                for i in 0..n {
                    lower[i] = -r;
                    upper[i] = -r;
                    diag[i] = 1.0 + 2.0 * r;
                }
                if dirichlet {
                    diag[0] = 1.0;
                    upper[0] = 0.0;
                    diag[n - 1] = 1.0;
                    lower[n - 1] = 0.0;
                } else {
                    upper[0] = -2.0 * r;
                    lower[n - 1] = -2.0 * r;
                }
                lower[0] = 0.0;
                upper[n - 1] = 0.0;
                solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
                f.set_component(k, &rhs);
            }
            f.apply_dirichlet();
            let removed = f.clamp_nonnegative(0..species);
            if removed > 0.0 {
                clamped += removed;
                let total: f64 = (0..species).map(|k| f.integral(k)).sum();
                if clamped > opts.clamp_budget * total.max(f64::MIN_POSITIVE) {
                    return Err(Error::solver(
                        format!("negativity clamping removed {clamped:.3e}, beyond the budget"),
                        vec![],
                    ));
                }
            }
            Ok(dt)
        },
        |f, traj| record(f, traj),
    )?;
    traj.clamped_mass = clamped;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_equilibrium_is_stationary() {
        let net = ReactionNetwork::two_species(1.0, 2.0, 1.0).unwrap();
        let d = DiffusionMatrix::new(vec![1.0, 0.3]).unwrap();
        let c = net.reduce_psi(&[1.0]).unwrap();
        let f = Field1D::from_fn(
            5.0,
            101,
            2,
            |_| c.clone(),
            Boundary::Dirichlet {
                left: c.clone(),
                right: c.clone(),
            },
        )
        .unwrap();
        let traj = run_rds(&net, &d, &f, &Schedule::uniform(1.0, 2).unwrap(), &StepOptions::default()).unwrap();
        for (a, b) in traj.last().values.iter().zip(&f.values) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn non_equilibrium_boundary_is_rejected() {
        let net = ReactionNetwork::two_species(1.0, 2.0, 1.0).unwrap();
        let d = DiffusionMatrix::new(vec![1.0, 1.0]).unwrap();
        let f = Field1D::from_fn(
            5.0,
            11,
            2,
            |_| vec![1.0, 0.0],
            Boundary::Dirichlet {
                left: vec![1.0, 0.0],
                right: vec![1.0, 0.0],
            },
        )
        .unwrap();
        assert!(run_rds(&net, &d, &f, &Schedule::uniform(1.0, 1).unwrap(), &StepOptions::default()).is_err());
    }

    #[test]
    fn zero_flux_conserves_qc() {
        let net = ReactionNetwork::three_species_binary(1.0).unwrap();
        let d = DiffusionMatrix::new(vec![2.0, 2.0, 10.0]).unwrap();
        let f = Field1D::from_fn(
            4.0,
            161,
            3,
            |x| vec![1.0 + (-x * x).exp(), 0.5, 0.2 * (1.0 + x.cos())],
            Boundary::NeumannZero,
        )
        .unwrap();
        let traj = run_rds(&net, &d, &f, &Schedule::uniform(1.0, 4).unwrap(), &StepOptions::default()).unwrap();
        let ledger = crate::evolution::conserved_quantities(&traj);
        for name in ["u1", "u2"] {
            assert!(ledger.relative_drift(name).unwrap() < 1e-12, "{name}");
        }
        assert!(traj.diagnostics["reaction_mass"].iter().all(|&v| v < 1e-12));
    }
}
