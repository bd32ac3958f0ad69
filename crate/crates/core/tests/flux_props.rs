use proptest::prelude::*;
use selfsim::flux_ness::{
    flux_duality_defect, lagrange_multiplier, turbulence_fluxes, two_species_multiplier_forms, zero_speed_from_inverse,
    zero_speed_profile, ZERO_SPEED_EPS,
};
use selfsim::profile_bvp::{
    composed_concentration_profile, gl_eta_profile, gl_psi_reconstruct, solve_profile, GlParams, Grid, PowerFlux,
    SolveOptions, TurbulenceParams,
};
use selfsim::reaction_network::{DiffusionMatrix, EffectiveDiffusion, ReactionNetwork};

fn interior_gap(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    (1..n - 1).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn multipliers_lie_in_the_reaction_directions(
        beta in 1usize..3,
        gamma in 1usize..3,
        d2 in 0.2..3.0f64,
        left in 0.5..2.0f64,
        right in 3.0..8.0f64,
    ) {
        let (beta, gamma) = (beta as f64, gamma as f64);
        let net = ReactionNetwork::two_species(beta, gamma, 1.0).unwrap();
        let diffusion = DiffusionMatrix::new(vec![1.0, d2]).unwrap();
        let flux = EffectiveDiffusion::new(net.clone(), diffusion.clone()).unwrap();
        let grid = Grid::new(8.0, 801).unwrap();
        let u = solve_profile(&flux, &[left], &[right], &grid, &SolveOptions::default()).unwrap();
        let c = composed_concentration_profile(&u, &net.reduction()).unwrap();
        let set = lagrange_multiplier(&c, &diffusion, &net).unwrap();
        prop_assert!(set.kernel_residual < 1e-6 * (1.0 + set.max_abs_lambda()), "{}", set.kernel_residual);

        let (first, second) = two_species_multiplier_forms(&c, &diffusion, beta, gamma).unwrap();
        let scale = 1.0 + first.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        prop_assert!(interior_gap(&first, &second) < 1e-6 * scale);
    }

    #[test]
    fn pme_profile_has_a_constant_dual_flux(
        m in 1.5..3.0f64,
        left in 0.5..2.0f64,
        right in 0.5..2.0f64,
    ) {
        let grid = Grid::new(8.0, 1601).unwrap();
        let flux = PowerFlux::new(m).unwrap();
        let p = solve_profile(&flux, &[left], &[right], &grid, &SolveOptions::default()).unwrap();
        let defect = flux_duality_defect(&p, &flux).unwrap();
        prop_assert!(defect < 1e-3 * left.max(right).powf(m), "{defect}");
    }

    #[test]
    fn zero_speed_matches_the_inverse_phase(
        eta_minus in 0.1..0.5f64,
        eta_plus in 0.1..0.5f64,
        x0 in -3.0..3.0f64,
    ) {
        let params = GlParams::new(eta_minus, eta_plus).unwrap();
        let grid = Grid::new(10.0, 4001).unwrap();
        let eta = gl_eta_profile(&params, &grid, &SolveOptions::default()).unwrap();
        let recon = gl_psi_reconstruct(&eta, &params).unwrap();
        let v = zero_speed_profile(&recon, ZERO_SPEED_EPS).unwrap();
        let node = grid.nearest(x0);
        let x = grid.y(node);
        let from_inverse = zero_speed_from_inverse(&recon, x, 1e-3).unwrap();
        prop_assert!((from_inverse - v[node]).abs() < 1e-4, "{from_inverse} vs {}", v[node]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn turbulence_source_is_nonnegative(
        v in prop::collection::vec(-5.0..5.0f64, 41),
        k in prop::collection::vec(0.0..5.0f64, 41),
    ) {
        let grid = Grid::new(2.0, 41).unwrap();
        let set = turbulence_fluxes(&grid, &v, &k, &TurbulenceParams::default()).unwrap();
        prop_assert!(set.source.iter().all(|s| *s >= 0.0));
    }
}
