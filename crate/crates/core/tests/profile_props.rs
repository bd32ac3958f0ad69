use proptest::prelude::*;
use selfsim::profile_bvp::{
    linear_flux_profile, solve_profile, turbulence_exact, uniform_estimate_constant, Grid, LinearFlux, PowerFlux,
    SolveOptions,
};
use selfsim::reaction_network::{DiffusionMatrix, EffectiveDiffusion, ReactionNetwork};

fn linear_error(n: usize) -> f64 {
    let (d, left, right) = (0.7, 2.0, 0.5);
    let grid = Grid::new(8.0, n).unwrap();
    let flux = LinearFlux::new(d).unwrap();
    let p = solve_profile(&flux, &[left], &[right], &grid, &SolveOptions::default()).unwrap();
    (0..grid.len())
        .map(|i| (p.value(i, 0) - linear_flux_profile(d, left, right, grid.y(i))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn linear_flux_error_is_second_order() {
    let errors: Vec<f64> = [501, 1001, 2001].into_iter().map(linear_error).collect();
    for pair in errors.windows(2) {
        assert!(pair[0] / pair[1] >= 3.5, "{errors:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn monotone_data_give_monotone_profiles(
        m in 1.2..3.0f64,
        left in 0.1..3.0f64,
        right in 0.1..3.0f64,
    ) {
        let grid = Grid::new(8.0, 801).unwrap();
        let flux = PowerFlux::new(m).unwrap();
        let p = solve_profile(&flux, &[left], &[right], &grid, &SolveOptions::default()).unwrap();
        let u = p.component(0);
        let sign = (right - left).signum();
        let slack = 1e-9 * left.max(right);
        prop_assert!(u.windows(2).all(|w| sign * (w[1] - w[0]) >= -slack));
        let (lo, hi) = (left.min(right), left.max(right));
        prop_assert!(u.iter().all(|v| *v >= lo - slack && *v <= hi + slack));
    }

    #[test]
    fn two_species_profile_reaches_its_limits_inside_the_box(
        half_width in 8.0..12.0f64,
        left in 0.5..3.0f64,
        right in 3.0..8.0f64,
    ) {
        let net = ReactionNetwork::two_species(1.0, 2.0, 1.0).unwrap();
        let flux = EffectiveDiffusion::new(net, DiffusionMatrix::new(vec![1.0, 0.5]).unwrap()).unwrap();
        let grid = Grid::new(half_width, 1601).unwrap();
        let p = solve_profile(&flux, &[left], &[right], &grid, &SolveOptions::default()).unwrap();
        let a = p.interpolate(0, -(half_width - 1.0));
        let b = p.interpolate(0, half_width - 1.0);
        prop_assert!((a - left).abs() < 1e-6, "U(−(L−1)) = {a}, U₋ = {left}");
        prop_assert!((b - right).abs() < 1e-6, "U(L−1) = {b}, U₊ = {right}");
    }

    #[test]
    fn uniform_estimate_constant_is_finite(
        left in 0.5..3.0f64,
        right in 3.0..8.0f64,
    ) {
        let net = ReactionNetwork::two_species(1.0, 1.0, 1.0).unwrap();
        let flux = EffectiveDiffusion::new(net, DiffusionMatrix::new(vec![1.0, 0.5]).unwrap()).unwrap();
        let grid = Grid::new(8.0, 801).unwrap();
        let p = solve_profile(&flux, &[left], &[right], &grid, &SolveOptions::default()).unwrap();
        let mid = 0.5 * (left + right);
        let k = uniform_estimate_constant(&p, |y, _| if y < 0.0 { left } else if y > 0.0 { right } else { mid });
        prop_assert!(k.is_finite() && k <= 1.0 + 1e-12, "{k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn turbulence_exact_profile_is_steady(a in 0.2..5.0f64, s in -0.99..0.99f64) {
        let exact = turbulence_exact(a).unwrap();
        let (rv, rk) = exact.steady_residuals(s * a);
        prop_assert!(rv.abs() < 1e-10 && rk.abs() < 1e-10, "({rv}, {rk})");
    }
}
