//! Bundled invariant suite: quick numerical checks of the library's
//! structural properties, run by `selfsim check`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evolution::{
    conserved_quantities, gl_roll_field, run_gl, run_pme, run_turbulence, Boundary, Field1D, Schedule, StepOptions,
};
use crate::flux_ness::lagrange_multiplier;
use crate::io::{read_csv, write_csv, CurveSet};
use crate::profile_bvp::{
    barenblatt, composed_concentration_profile, eckhaus_bound, gl_eta_profile, gl_psi_reconstruct, solve_profile,
    turbulence_exact, GlParams, Grid, PmeParams, SolveOptions, TurbulenceParams,
};
use crate::reaction_network::{monotonicity_certificate, DiffusionMatrix, EffectiveDiffusion, ReactionNetwork, SampleBox};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type CheckFn = fn() -> Result<(bool, String)>;

/// Names and bodies of every check, in report order.
pub fn catalogue() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("barenblatt_residual", barenblatt_residual as CheckFn),
        ("reduction_exactness", reduction_exactness),
        ("effective_diffusion_bounds", effective_diffusion_bounds),
        ("monotonicity_bracket", monotonicity_bracket),
        ("two_species_derivative_bound", two_species_derivative_bound),
        ("three_species_symmetry", three_species_symmetry),
        ("chain_invariant_region", chain_invariant_region),
        ("turbulence_exact_identities", turbulence_exact_identities),
        ("turbulence_conservation", turbulence_conservation),
        ("pme_mass_conservation", pme_mass_conservation),
        ("gl_profile_and_roll", gl_profile_and_roll),
        ("csv_round_trip", csv_round_trip),
    ]
}

/// Runs every check on its own thread; a check that errors counts as failed.
pub fn run_suite() -> Vec<CheckOutcome> {
    let checks = catalogue();
    std::thread::scope(|scope| {
        let handles: Vec<_> = checks
            .iter()
            .map(|&(name, f)| {
                scope.spawn(move || {
                    let start = Instant::now();
                    let (passed, detail) = match f() {
                        Ok(r) => r,
                        Err(e) => (false, format!("error: {e}")),
                    };
                    CheckOutcome {
                        name: name.to_string(),
                        passed,
                        detail,
                        seconds: start.elapsed().as_secs_f64(),
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .zip(&checks)
            .map(|(h, &(name, _))| {
                h.join().unwrap_or_else(|_| CheckOutcome {
                    name: name.to_string(),
                    passed: false,
                    detail: "panicked".into(),
                    seconds: 0.0,
                })
            })
            .collect()
    })
}

fn sweep(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(move |k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
}

fn barenblatt_residual() -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for m in [1.25, 2.0, 3.0] {
        let b = barenblatt(&PmeParams::barenblatt(m, 1.0)?)?;
        let r = b.support_radius();
        for k in 1..1000 {
            let y = -r + 2.0 * r * k as f64 / 1000.0;
            worst = worst.max(b.steady_flux_residual(y).abs());
        }
    }
    let c2 = barenblatt(&PmeParams::barenblatt(2.0, 1.0)?)?.c_m;
    let ok = worst < 1e-10 && (c2 - 1.0 / 12.0).abs() < 1e-15;
    Ok((ok, format!("max residual {worst:.2e}, c_2 = {c2}")))
}

fn builtin_networks() -> Result<Vec<ReactionNetwork>> {
    Ok(vec![
        ReactionNetwork::two_species(1.0, 2.0, 1.0)?,
        ReactionNetwork::three_species_binary(1.0)?,
        ReactionNetwork::two_reaction_chain(1.0, 1.0)?,
    ])
}

fn reduction_exactness() -> Result<(bool, String)> {
    let net = ReactionNetwork::two_species(1.0, 2.0, 1.0)?;
    let a = net.reduce_psi(&[1.0])?;
    let b = net.reduce_psi(&[6.0])?;
    let printed = [(a[0], 0.5), (a[1], 0.25), (b[0], 1.5), (b[1], 2.25)];
    let printed_err = printed.iter().map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let mut worst_q = 0.0_f64;
    let mut worst_r = 0.0_f64;
    for net in builtin_networks()? {
        let dim = net.conserved_count();
        let samples: Vec<Vec<f64>> = if dim == 1 {
            sweep(1e-3, 1e3, 200).map(|u| vec![u]).collect()
        } else {
            sweep(1e-2, 1e2, 15)
                .flat_map(|u1| sweep(1e-2, 1e2, 15).map(move |u2| vec![u1, u2]))
                .collect()
        };
        for u in samples {
            let c = net.reduce_psi(&u)?;
            let qc = net.stoichiometry().apply(&c);
            let scale = u.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            worst_q = worst_q.max(qc.iter().zip(&u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale);
            let r = net.eval_rate(&c)?;
            let cscale = c.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            worst_r = worst_r.max(r.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / cscale.powi(2));
        }
    }
    let ok = printed_err < 1e-12 && worst_q < 1e-10 && worst_r < 1e-10;
    Ok((
        ok,
        format!("printed values {printed_err:.1e}, |QΨ(u)−u| {worst_q:.1e}, |R(Ψ(u))| {worst_r:.1e}"),
    ))
}

fn effective_diffusion_bounds() -> Result<(bool, String)> {
    let net = ReactionNetwork::two_species(1.0, 2.0, 1.0)?;
    let d = DiffusionMatrix::new(vec![1.0, 0.5])?;
    let flux = EffectiveDiffusion::new(net, d)?;
    let h = 1e-6;
    let mut worst = 0.0_f64;
    for u in sweep(1e-3, 1e3, 200) {
        let q = (flux.value(&[u + h])?[0] - flux.value(&[u])?[0]) / h;
        worst = worst.max(0.5 - q).max(q - 1.0);
    }
    let small = flux.jacobian(&[1e-4])?[(0, 0)];
    let large = flux.jacobian(&[1e4])?[(0, 0)];
    let ok = worst <= 1e-6 && (small - 1.0).abs() < 0.01 && (large - 0.5).abs() < 0.01 * 0.5;
    Ok((ok, format!("bound excess {worst:.1e}, A′(1e-4) = {small:.4}, A′(1e4) = {large:.4}")))
}

fn monotonicity_bracket() -> Result<(bool, String)> {
    let net = ReactionNetwork::three_species_binary(1.0)?;
    let sample = SampleBox {
        lower: vec![0.0, 0.0],
        upper: vec![1000.0, 1000.0],
    };
    let good = monotonicity_certificate(&net, &DiffusionMatrix::new(vec![2.0, 2.0, 10.0])?, &sample, 41)?;
    let bad = monotonicity_certificate(&net, &DiffusionMatrix::new(vec![60.0, 2.0, 10.0])?, &sample, 41)?;
    let ok = good.a_lo > 0.0 && bad.a_lo < 0.0;
    Ok((ok, format!("a_lo(2,2,10) = {:.3e}, a_lo(60,2,10) = {:.3e}", good.a_lo, bad.a_lo)))
}

fn two_species_derivative_bound() -> Result<(bool, String)> {
    let net = ReactionNetwork::two_species(1.0, 2.0, 1.0)?;
    let d = DiffusionMatrix::new(vec![1.0, 0.5])?;
    let (d_lo, d_hi) = (d.min(), d.max());
    let flux = EffectiveDiffusion::new(net, d)?;
    let grid = Grid::new(8.0, 1601)?;
    let (ul, ur) = (1.0, 6.0);
    let p = solve_profile(&flux, &[ul], &[ur], &grid, &SolveOptions::default())?;
    let h = grid.spacing();
    let mut positive = true;
    let mut excess = f64::NEG_INFINITY;
    for i in 1..grid.len() - 1 {
        let du = (p.value(i + 1, 0) - p.value(i - 1, 0)) / (2.0 * h);
        let y = grid.y(i);
        let bound = (-y * y / (4.0 * d_hi)).exp() * (d_hi / (8.0 * d_lo * d_lo)).sqrt() * (ur - ul);
        positive &= du > 0.0;
        excess = excess.max(du - bound);
    }
    Ok((positive && excess <= 0.0, format!("positive: {positive}, max(U′ − bound) = {excess:.3e}")))
}

fn three_species_symmetry() -> Result<(bool, String)> {
    let net = ReactionNetwork::three_species_binary(1.0)?;
    let d = DiffusionMatrix::new(vec![2.0, 2.0, 10.0])?;
    let q = net.stoichiometry();
    let ul = q.apply(&[5.3, 0.3, 1.6]);
    let ur = q.apply(&[0.3, 5.3, 1.6]);
    let grid = Grid::new(10.0, 1001)?;
    let flux = EffectiveDiffusion::new(net.clone(), d.clone())?;
    let p = solve_profile(&flux, &ul, &ur, &grid, &SolveOptions::default())?;
    let c = composed_concentration_profile(&p, &net.reduction())?;
    let n = grid.len();
    let mut swap = 0.0_f64;
    let mut even = 0.0_f64;
    for i in 0..n {
        let j = n - 1 - i;
        swap = swap.max((c.value(i, 0) - c.value(j, 1)).abs());
        even = even.max((c.value(i, 2) - c.value(j, 2)).abs());
    }
    let bump = c.component(2).iter().copied().fold(f64::MIN, f64::max) - c.value(0, 2);
    let ok = swap < 1e-5 && even < 1e-5 && bump > 0.1;
    Ok((ok, format!("swap {swap:.1e}, evenness {even:.1e}, C₃ bump {bump:.3}")))
}

fn chain_invariant_region() -> Result<(bool, String)> {
    let net = ReactionNetwork::two_reaction_chain(1.0, 1.0)?;
    let d = DiffusionMatrix::new(vec![1.0, 2.0, 0.5])?;
    let (bl, br) = (0.5_f64, 1.5_f64);
    let cl = [bl, bl * bl, bl * bl];
    let cr = [br, br * br, br * br];
    let q = net.stoichiometry();
    let grid = Grid::new(10.0, 1001)?;
    let flux = EffectiveDiffusion::new(net.clone(), d.clone())?;
    let p = solve_profile(&flux, &q.apply(&cl), &q.apply(&cr), &grid, &SolveOptions::default())?;
    let c = composed_concentration_profile(&p, &net.reduction())?;
    let mut increasing = true;
    let mut outside = 0.0_f64;
    for k in 0..3 {
        let col = c.component(k);
        increasing &= col.windows(2).all(|w| w[1] > w[0]);
        for v in col {
            outside = outside.max(cl[k] - v).max(v - cr[k]);
        }
    }
    let fs = lagrange_multiplier(&c, &d, &net)?;
    let ok = increasing && outside <= 0.0 && fs.kernel_residual < 1e-6 && fs.decomposition_residual < 1e-8;
    Ok((
        ok,
        format!(
            "increasing: {increasing}, region excess {outside:.1e}, ‖Qλ‖ {:.1e}, decomposition {:.1e}",
            fs.kernel_residual, fs.decomposition_residual
        ),
    ))
}

fn turbulence_exact_identities() -> Result<(bool, String)> {
    let a = 1.5;
    let e = turbulence_exact(a)?;
    let mut worst = 0.0_f64;
    for k in 0..=600 {
        let y = -3.0 + 6.0 * k as f64 / 600.0;
        if (y.abs() - a).abs() < 1e-9 {
            continue;
        }
        let (rv, rk) = e.steady_residuals(y);
        let q = -e.k(y) * e.dv(y);
        let s = e.k(y) * e.dv(y).powi(2);
        worst = worst
            .max(rv.abs())
            .max(rk.abs())
            .max((q + e.k(y) / 2f64.sqrt()).abs())
            .max((s - e.k(y) / 2.0).abs());
        if y.abs() < a {
            worst = worst.max((e.energy_density(y) - a * a / 4.0).abs());
        }
    }
    Ok((worst < 1e-14, format!("max defect {worst:.1e}")))
}

fn turbulence_conservation() -> Result<(bool, String)> {
    let f = Field1D::from_fn(
        8.0,
        321,
        2,
        |x| vec![x.tanh() * (-x * x / 8.0).exp(), 0.1 * (-x * x).exp()],
        Boundary::NeumannZero,
    )?;
    let traj = run_turbulence(
        &TurbulenceParams::default(),
        &f,
        &Schedule::uniform(1.0, 5)?,
        &StepOptions::default(),
    )?;
    let ledger = conserved_quantities(&traj);
    let p = ledger.get("momentum").unwrap_or(&[]);
    let dp = p.iter().fold(0.0_f64, |m, q| m.max((q - p[0]).abs()));
    let de = ledger.relative_drift("energy").unwrap_or(f64::NAN);
    Ok((dp < 1e-12 && de < 1e-10, format!("momentum drift {dp:.1e}, energy drift {de:.1e}")))
}

fn pme_mass_conservation() -> Result<(bool, String)> {
    let b = barenblatt(&PmeParams::barenblatt(2.0, 1.0)?)?;
    let f = Field1D::from_fn(5.0, 401, 1, |x| vec![b.value(x)], Boundary::NeumannZero)?;
    let traj = run_pme(2.0, &f, &Schedule::uniform(1.0, 4)?, &StepOptions::default())?;
    let drift = conserved_quantities(&traj).relative_drift("mass").unwrap_or(f64::NAN);
    let nonneg = traj.snapshots.iter().all(|s| s.min_value() >= 0.0);
    Ok((drift < 1e-12 && nonneg, format!("mass drift {drift:.1e}, nonnegative: {nonneg}")))
}

fn gl_profile_and_roll() -> Result<(bool, String)> {
    let rejected = [0.6, -0.58, eckhaus_bound()]
        .iter()
        .all(|&eta| GlParams::new(eta, 0.3).is_err() && GlParams::new(0.3, eta).is_err());
    let params = GlParams::new(0.45, 0.3)?;
    let grid = Grid::new(10.0, 801)?;
    let eta = gl_eta_profile(&params, &grid, &SolveOptions::default())?;
    let recon = gl_psi_reconstruct(&eta, &params)?;
    let roll = gl_roll_field(0.3, 0.0, 20.0, 2001)?;
    let traj = run_gl(&roll, &Schedule::uniform(2.0, 2)?, &StepOptions::default())?;
    let rho = (1.0f64 - 0.09).sqrt();
    let amp = traj
        .last()
        .values
        .chunks(2)
        .map(|c| (c[0].hypot(c[1]) - rho).abs())
        .fold(0.0, f64::max);
    let ok = rejected && recon.discrepancy < 1e-6 && amp < 1e-6;
    Ok((
        ok,
        format!("Eckhaus rejected: {rejected}, ψ̄ formula gap {:.1e}, roll amplitude drift {amp:.1e}", recon.discrepancy),
    ))
}

fn csv_round_trip() -> Result<(bool, String)> {
    let x: Vec<f64> = (0..50).map(|i| -1.0 + i as f64 / 7.0).collect();
    let y: Vec<f64> = x.iter().map(|v| (v * 3.1).sin() / 3.0).collect();
    let set = CurveSet::from_series("round_trip", "y", x, vec![("W".into(), y)])?;
    let path = std::env::temp_dir().join(format!("selfsim-check-{}.csv", std::process::id()));
    write_csv(&set, &path)?;
    let back = read_csv(&path);
    let _ = std::fs::remove_file(&path);
    let back = back?;
    let ok = back.columns == set.columns && back.data == set.data;
    Ok((ok, format!("{} rows re-read bit-for-bit: {ok}", set.rows())))
}
