use proptest::prelude::*;
use selfsim::evolution::{
    conserved_quantities, run_pme, run_rds, run_turbulence, Boundary, Field1D, Schedule, StepOptions,
};
use selfsim::profile_bvp::TurbulenceParams;
use selfsim::reaction_network::{DiffusionMatrix, ReactionNetwork};

/// Smooth bump built from random Fourier coefficients, shifted to be positive.
fn bump(coeffs: &[f64], half_width: f64, x: f64) -> f64 {
    let s: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(j, a)| a * (std::f64::consts::PI * (j + 1) as f64 * x / half_width).cos())
        .sum();
    let total: f64 = coeffs.iter().map(|a| a.abs()).sum();
    1e-3 + total + s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pme_stays_nonnegative_and_keeps_its_mass(
        m in 1.2..3.0f64,
        coeffs in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        let x = 4.0;
        let init = Field1D::from_fn(x, 161, 1, |s| vec![bump(&coeffs, x, s)], Boundary::NeumannZero).unwrap();
        let traj = run_pme(m, &init, &Schedule::uniform(0.5, 2).unwrap(), &StepOptions::default()).unwrap();
        prop_assert!(traj.snapshots.iter().all(|f| f.min_value() >= 0.0));
        let drift = conserved_quantities(&traj).relative_drift("mass").unwrap();
        prop_assert!(drift < 1e-8, "{drift}");
    }

    #[test]
    fn turbulence_stays_nonnegative_and_keeps_momentum_and_energy(
        vc in prop::collection::vec(-1.0..1.0f64, 3),
        kc in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        let x = 4.0;
        let init = Field1D::from_fn(
            x,
            161,
            2,
            |s| vec![bump(&vc, x, s) - 1.0, bump(&kc, x, s)],
            Boundary::NeumannZero,
        )
        .unwrap();
        let traj = run_turbulence(
            &TurbulenceParams::default(),
            &init,
            &Schedule::uniform(0.2, 2).unwrap(),
            &StepOptions::default(),
        )
        .unwrap();
        prop_assert!(traj.snapshots.iter().all(|f| (0..f.nodes).all(|i| f.value(i, 1) >= 0.0)));
        let ledger = conserved_quantities(&traj);
        let momentum = ledger.get("momentum").unwrap();
        let mscale = 1.0 + momentum[0].abs();
        prop_assert!(momentum.iter().all(|p| (p - momentum[0]).abs() < 1e-8 * mscale));
        let energy = ledger.relative_drift("energy").unwrap();
        prop_assert!(energy < 1e-8, "{energy}");
    }

    #[test]
    fn rds_stays_nonnegative_and_keeps_the_conserved_integrals(
        c1 in prop::collection::vec(-1.0..1.0f64, 3),
        c2 in prop::collection::vec(-1.0..1.0f64, 3),
        kappa in 0.5..5.0f64,
    ) {
        let x = 4.0;
        let net = ReactionNetwork::two_species(1.0, 2.0, kappa).unwrap();
        let d = DiffusionMatrix::new(vec![1.0, 0.5]).unwrap();
        let init = Field1D::from_fn(x, 161, 2, |s| vec![bump(&c1, x, s), bump(&c2, x, s)], Boundary::NeumannZero)
            .unwrap();
        let traj = run_rds(&net, &d, &init, &Schedule::uniform(0.5, 2).unwrap(), &StepOptions::default()).unwrap();
        prop_assert!(traj.snapshots.iter().all(|f| f.min_value() >= 0.0));
        let drift = conserved_quantities(&traj).relative_drift("u1").unwrap();
        prop_assert!(drift < 1e-8, "{drift}");
    }
}

fn defect_at(kappa: f64) -> f64 {
    let x = 4.0;
    let net = ReactionNetwork::two_species(1.0, 1.0, kappa).unwrap();
    let d = DiffusionMatrix::new(vec![1.0, 0.5]).unwrap();
    let init = Field1D::from_fn(
        x,
        401,
        2,
        |s| vec![1.0 + 0.5 * (std::f64::consts::PI * s / x).cos(), 0.0],
        Boundary::NeumannZero,
    )
    .unwrap();
    let traj = run_rds(&net, &d, &init, &Schedule::new(0.5, vec![0.5]).unwrap(), &StepOptions::default()).unwrap();
    *traj.diagnostics["equilibrium_defect"].last().unwrap()
}

#[test]
fn fast_reactions_pull_the_state_onto_the_equilibria() {
    let slow = defect_at(1.0);
    let fast = defect_at(100.0);
    assert!(fast < 0.05 * slow, "κ = 1: {slow:.3e}, κ = 100: {fast:.3e}");
}
