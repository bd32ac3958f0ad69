use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{Problem, RunConfig, TurbulenceInitial};
use super::curves::{write_csv, CurveSet};
use super::report::{RunReport, RunStatus};
use super::svg::{write_svg, PlotStyle};
use crate::error::{Error, Result};
use crate::evolution::{
    conserved_quantities, gl_mixed_field, run_gl, run_pme, run_rds, run_turbulence, scaled_convergence,
    scaled_error_at_nodes, Boundary, Field1D, Schedule, Scaling, StepOptions, Trajectory,
};
use crate::flux_ness::{
    fit_multiplier_scale, gl_amplitude_multiplier, infiltration_report, lagrange_multiplier, pme_flux,
    turbulence_fluxes_exact, zero_speed_profile, FluxSet, ZERO_SPEED_EPS,
};
use crate::profile_bvp::{
    barenblatt, composed_concentration_profile, gl_eta_profile, gl_psi_reconstruct, gl_psi_residual,
    pme_mixing_profile, solve_profile, turbulence_exact, Grid, PmeParams, Profile, ProfileOrigin,
    SolveOptions, TurbulenceParams,
};
use crate::reaction_network::{DiffusionMatrix, EffectiveDiffusion, NetworkKind, ReactionNetwork};

/// Which artifacts to write next to `report.json`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    /// Curves embedded in the report only.
    Json,
    Svg,
    All,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "svg" => Ok(Self::Svg),
            "all" => Ok(Self::All),
            other => Err(Error::validation("format", format!("unknown format '{other}' (csv, json, svg, all)"))),
        }
    }
}

/// Report and curves of a successful run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub curves: Vec<CurveSet>,
}

/// Outcome of [`execute`]: the report is always present.
#[derive(Debug)]
pub struct Execution {
    pub report: RunReport,
    pub error: Option<Error>,
}

const DEFAULT_HALF_WIDTH: f64 = 10.0;
const DEFAULT_NODES: usize = 801;
const DEFAULT_SNAPSHOTS: usize = 10;

fn m_tag(m: f64) -> String {
    format!("m={m}")
}

fn profile_grid(config: &RunConfig, default_half_width: f64) -> Result<Grid> {
    Grid::new(
        config.half_width.unwrap_or(default_half_width),
        config.n.unwrap_or(DEFAULT_NODES),
    )
}

fn solve_options(config: &RunConfig) -> SolveOptions {
    let mut opts = SolveOptions::default();
    if let Some(tol) = config.tol {
        opts.tol = tol;
    }
    if let Some(it) = config.max_iter {
        opts.max_iter = it;
    }
    if let Some(c) = config.continuation_steps {
        opts.continuation_steps = c;
    }
    opts
}

fn schedule(config: &RunConfig) -> Result<Schedule> {
    let t = config
        .final_time
        .ok_or_else(|| Error::validation("T", "final time required for a simulation"))?;
    match &config.snapshots {
        Some(times) => Schedule::new(t, times.iter().copied().filter(|&s| s < t).collect()),
        None => Schedule::uniform(t, DEFAULT_SNAPSHOTS),
    }
}

fn step_options(config: &RunConfig) -> StepOptions {
    StepOptions {
        max_dt: config.dt,
        ..StepOptions::default()
    }
}

fn sim_nodes(config: &RunConfig, default: usize) -> usize {
    config.n_x.unwrap_or(default)
}

fn interp(grid: &Grid, values: &[f64], y: f64) -> Option<f64> {
    let l = grid.half_width();
    if !(y.abs() <= l) {
        return None;
    }
    let h = grid.spacing();
    let s = (y + l) / h;
    let i = (s.floor() as usize).min(grid.len() - 2);
    let t = s - i as f64;
    Some((1.0 - t) * values[i] + t * values[i + 1])
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn record_profile(report: &mut RunReport, tag: &str, p: &Profile) {
    report.residual_norms.push(p.residual_norm);
    report.iterations.push(p.newton_iterations);
    for w in &p.report.warnings {
        report.warnings.push(format!("{tag}: {w}"));
    }
}

fn record_trajectory(report: &mut RunReport, tag: &str, traj: &Trajectory) {
    report.metric(format!("steps{tag}"), traj.steps as f64);
    report.metric(format!("clamped_mass{tag}"), traj.clamped_mass);
    for w in &traj.warnings {
        report.warnings.push(w.clone());
    }
}

fn component_series(profile: &Profile, prefix: &str) -> Vec<(String, Vec<f64>)> {
    (0..profile.components)
        .map(|k| (format!("{prefix}{}", k + 1), profile.component(k)))
        .collect()
}

/// Runs the configured problem in memory.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let start = Instant::now();
    let mut report = RunReport::new(config.problem.tag(), &config.label());
    report.config = Some(config.clone());
    let mut curves = Vec::new();
    match config.problem {
        Problem::PmeBarenblatt => pme_barenblatt(config, &mut report, &mut curves)?,
        Problem::PmeMixing => pme_mixing(config, &mut report, &mut curves)?,
        Problem::RdsProfile => {
            rds(config, &mut report, &mut curves)?;
        }
        Problem::RdsSimulate => {
            let (net, d, c_profile) = rds(config, &mut report, &mut curves)?;
            rds_simulate(config, &net, &d, &c_profile, &mut report, &mut curves)?;
        }
        Problem::TurbulenceExact => turbulence_profile(config, &mut report, &mut curves)?,
        Problem::TurbulenceSimulate => turbulence_simulate(config, &mut report, &mut curves)?,
        Problem::GlProfile | Problem::GlSimulate => gl(config, &mut report, &mut curves)?,
    }
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(RunOutput { report, curves })
}

fn pme_barenblatt(config: &RunConfig, report: &mut RunReport, curves: &mut Vec<CurveSet>) -> Result<()> {
    let ms = config.m.clone().expect("validated");
    let mass_parameter = config.mass_parameter.expect("validated");
    let profiles = ms
        .iter()
        .map(|&m| barenblatt(&PmeParams::barenblatt(m, mass_parameter)?))
        .collect::<Result<Vec<_>>>()?;
    let default_l = profiles
        .iter()
        .map(|b| if b.is_gaussian() { 8.0 } else { 1.25 * b.support_radius() })
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let grid = profile_grid(config, default_l)?;
    let y = grid.nodes();
    let mut series = Vec::new();
    let mut flux_series = Vec::new();
    for (b, &m) in profiles.iter().zip(&ms) {
        let tag = m_tag(m);
        let residual = y.iter().map(|&y| b.steady_flux_residual(y).abs()).fold(0.0, f64::max);
        report.residual_norms.push(residual);
        report.iterations.push(0);
        if b.support_radius().is_finite() {
            report.metric(format!("support_radius[{tag}]"), b.support_radius());
        }
        report.metric(format!("mass[{tag}]"), b.mass);
        report.metric(format!("c_m[{tag}]"), b.c_m);
        let flux: Vec<f64> = y.iter().map(|&y| b.flux(y)).collect();
        report.flux_summaries.insert(format!("max_abs_flux[{tag}]"), max_abs(&flux));
        series.push((format!("W[{tag}]"), y.iter().map(|&y| b.value(y)).collect()));
        flux_series.push((format!("Q[{tag}]"), flux));
    }
    curves.push(CurveSet::from_series("profile", "y", y.clone(), series)?);
    curves.push(CurveSet::from_series("fluxes", "y", y, flux_series)?);

    if config.final_time.is_some() {
        let schedule = schedule(config)?;
        let opts = step_options(config);
        let mut errors = Vec::new();
        let mut times = Vec::new();
        for (b, &m) in profiles.iter().zip(&ms) {
            let tag = m_tag(m);
            let spread = (1.0 + schedule.final_time).powf(1.0 / (m + 1.0));
            let x = config.domain_half_width.unwrap_or(1.1 * grid.half_width() * spread);
            let initial = Field1D::from_fn(x, sim_nodes(config, 2001), 1, |x| vec![b.value(x)], Boundary::NeumannZero)?;
            let traj = run_pme(m, &initial, &schedule, &opts)?;
            record_trajectory(report, &format!("[{tag}]"), &traj);
            let ledger = conserved_quantities(&traj);
            report
                .conservation
                .insert(format!("mass[{tag}]"), ledger.relative_drift("mass").unwrap_or(0.0));
            let err = scaled_error_at_nodes(&traj, 0, Scaling::barenblatt(m), |y| b.value(y));
            report.metric(format!("max_scaled_error[{tag}]"), err.iter().map(|e| e.1).fold(0.0, f64::max));
            times = err.iter().map(|e| e.0).collect();
            errors.push((format!("error[{tag}]"), err.iter().map(|e| e.1).collect()));
        }
        curves.push(CurveSet::from_series("barenblatt_convergence", "t", times, errors)?);
    }
    Ok(())
}

fn pme_mixing(config: &RunConfig, report: &mut RunReport, curves: &mut Vec<CurveSet>) -> Result<()> {
    let ms = config.m.clone().expect("validated");
    let left = config.u_minus.as_ref().expect("validated")[0];
    let right = config.u_plus.as_ref().expect("validated")[0];
    let grid = profile_grid(config, DEFAULT_HALF_WIDTH)?;
    let opts = solve_options(config);
    let y = grid.nodes();
    let mut series = Vec::new();
    let mut flux_series = Vec::new();
    let mut mass_curves = Vec::new();
    let mut mass_times = Vec::new();
    for &m in &ms {
        let tag = m_tag(m);
        let p = pme_mixing_profile(&PmeParams::mixing(m, left, right)?, &grid, &opts)?;
        record_profile(report, &tag, &p);
        let flux = pme_flux(&p, m)?;
        report.flux_summaries.insert(format!("max_abs_flux[{tag}]"), max_abs(&flux));
        series.push((format!("W[{tag}]"), p.component(0)));
        flux_series.push((format!("Q[{tag}]"), flux));
        if right != 0.0 {
            continue;
        }
        let info = infiltration_report(&p, m, 0.0)?;
        report.flux_summaries.insert(format!("q0[{tag}]"), info.q0);
        report.metric(format!("profile_mass[{tag}]"), info.profile_mass);
        report.metric(format!("mass_flux_identity[{tag}]"), (info.profile_mass - 2.0 * info.q0).abs());
        if config.final_time.is_none() {
            continue;
        }
        let schedule = schedule(config)?;
        let x = config.domain_half_width.unwrap_or(grid.half_width());
        let l = grid.half_width();
        let initial = Field1D::from_fn(
            x,
            sim_nodes(config, 2001),
            1,
            |x| {
                vec![if x <= -l {
                    left
                } else if x >= l {
                    right
                } else {
                    p.interpolate(0, x).max(0.0)
                }]
            },
            Boundary::Dirichlet {
                left: vec![left],
                right: vec![right],
            },
        )?;
        let traj = run_pme(m, &initial, &schedule, &step_options(config))?;
        record_trajectory(report, &format!("[{tag}]"), &traj);
        let m0 = traj.snapshots[0].integral_from(0, 0.0);
        let simulated: Vec<f64> = traj.snapshots.iter().map(|s| s.integral_from(0, 0.0)).collect();
        let predicted: Vec<f64> = traj.times.iter().map(|t| m0 * (1.0 + t).sqrt()).collect();
        let deviation = simulated
            .iter()
            .zip(&predicted)
            .map(|(s, p)| (s - p).abs() / p.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        report.metric(format!("mass_law_deviation[{tag}]"), deviation);
        mass_times = traj.times.clone();
        mass_curves.push((format!("mass[{tag}]"), simulated));
        mass_curves.push((format!("mass_law[{tag}]"), predicted));
    }
    curves.push(CurveSet::from_series("profile", "y", y.clone(), series)?);
    curves.push(CurveSet::from_series("fluxes", "y", y, flux_series)?);
    if !mass_curves.is_empty() {
        curves.push(CurveSet::from_series("infiltration_mass", "t", mass_times, mass_curves)?);
    }
    Ok(())
}

/// Boundary values in conserved coordinates, from `u±` or `Q c±`.
fn conserved_ends(config: &RunConfig, net: &ReactionNetwork, report: &mut RunReport) -> Result<(Vec<f64>, Vec<f64>)> {
    if let (Some(l), Some(r)) = (&config.u_minus, &config.u_plus) {
        return Ok((l.clone(), r.clone()));
    }
    let q = net.stoichiometry();
    let mut ends = Vec::new();
    for (name, c) in [("c_minus", &config.c_minus), ("c_plus", &config.c_plus)] {
        let c = c.as_ref().expect("validated");
        let u = q.apply(c);
        let back = net.reduce_psi(&u)?;
        let gap = back.iter().zip(c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if gap > 1e-6 * (1.0 + max_abs(c)) {
            report.warnings.push(format!(
                "{name} is not a reaction equilibrium; using Ψ(Qc) = {back:?} (distance {gap:.3e})"
            ));
        }
        ends.push(u);
    }
    let r = ends.pop().expect("two ends");
    let l = ends.pop().expect("two ends");
    Ok((l, r))
}

fn summarize_flux_set(report: &mut RunReport, flux: &FluxSet) {
    let s = &mut report.flux_summaries;
    s.insert("kernel_residual".into(), flux.kernel_residual);
    s.insert("decomposition_residual".into(), flux.decomposition_residual);
    s.insert("constraint_violation".into(), flux.constraint_violation);
    s.insert("max_abs_lambda".into(), flux.max_abs_lambda());
    for (j, q) in flux.diffusive.iter().enumerate() {
        s.insert(format!("max_abs_flux[C{}]", j + 1), max_abs(q));
    }
    for (r, l) in flux.multipliers.iter().enumerate() {
        s.insert(format!("max_abs_multiplier[{}]", r + 1), max_abs(l));
    }
    report.warnings.extend(flux.warnings.iter().cloned());
}

fn rds(
    config: &RunConfig,
    report: &mut RunReport,
    curves: &mut Vec<CurveSet>,
) -> Result<(ReactionNetwork, DiffusionMatrix, Profile)> {
    let net = config.network.as_ref().expect("validated").build()?;
    let d = DiffusionMatrix::new(config.d.clone().expect("validated"))?;
    let (ul, ur) = conserved_ends(config, &net, report)?;
    let grid = profile_grid(config, DEFAULT_HALF_WIDTH)?;
    let flux_map = EffectiveDiffusion::new(net.clone(), d.clone())?;
    let u_profile = solve_profile(&flux_map, &ul, &ur, &grid, &solve_options(config))?;
    record_profile(report, "U", &u_profile);
    let c_profile = composed_concentration_profile(&u_profile, &net.reduction())?;
    let flux = lagrange_multiplier(&c_profile, &d, &net)?;
    summarize_flux_set(report, &flux);
    if matches!(net.kind(), NetworkKind::TwoSpecies { beta, gamma } if beta == gamma) {
        match fit_multiplier_scale(&grid, &flux.multipliers[0]) {
            Ok(fit) => {
                report.flux_summaries.insert("multiplier_scale".into(), fit.scale);
                report.flux_summaries.insert("multiplier_amplitude".into(), fit.amplitude);
                report.flux_summaries.insert("multiplier_misfit".into(), fit.misfit);
            }
            Err(e) => report.warnings.push(format!("multiplier fit skipped: {e}")),
        }
    }
    let y = grid.nodes();
    curves.push(CurveSet::from_series("conserved", "y", y.clone(), component_series(&u_profile, "U"))?);
    curves.push(CurveSet::from_series("profile", "y", y.clone(), component_series(&c_profile, "C"))?);
    curves.push(CurveSet::from_series(
        "multipliers",
        "y",
        y.clone(),
        flux.multipliers
            .iter()
            .enumerate()
            .map(|(r, l)| (format!("Lambda{}", r + 1), l.clone()))
            .collect(),
    )?);
    curves.push(CurveSet::from_series(
        "fluxes",
        "y",
        y,
        flux.diffusive
            .iter()
            .enumerate()
            .map(|(j, q)| (format!("Q{}", j + 1), q.clone()))
            .collect(),
    )?);
    Ok((net, d, c_profile))
}

fn rds_simulate(
    config: &RunConfig,
    net: &ReactionNetwork,
    d: &DiffusionMatrix,
    c_profile: &Profile,
    report: &mut RunReport,
    curves: &mut Vec<CurveSet>,
) -> Result<()> {
    let schedule = schedule(config)?;
    let x = config.domain_half_width.unwrap_or(c_profile.grid.half_width());
    let n = c_profile.grid.len();
    let species = c_profile.components;
    let cl = c_profile.node(0).to_vec();
    let cr = c_profile.node(n - 1).to_vec();
    let initial = Field1D::from_fn(
        x,
        sim_nodes(config, 1201),
        species,
        |x| if x < 0.0 { cl.clone() } else { cr.clone() },
        Boundary::Dirichlet {
            left: cl.clone(),
            right: cr.clone(),
        },
    )?;
    let traj = run_rds(net, d, &initial, &schedule, &step_options(config))?;
    record_trajectory(report, "", &traj);
    // Compare on the window that stays inside the domain up to T.
    let window = c_profile
        .grid
        .half_width()
        .min(x / (1.0 + schedule.final_time).sqrt());
    let ref_grid = Grid::new(window, 401)?;
    let values: Vec<f64> = (0..ref_grid.len())
        .flat_map(|i| {
            let y = ref_grid.y(i);
            (0..species).map(move |k| c_profile.interpolate(k, y))
        })
        .collect();
    let reference = Profile::from_nodes(ref_grid, species, values, ProfileOrigin::Derived)?;
    let distance = scaled_convergence(&traj, &reference, Scaling::PARABOLIC)?;
    report.metric("reference_window", window);
    report.metric("final_scaled_distance", distance.last().map_or(f64::NAN, |d| d.1));
    for name in ["equilibrium_defect", "max_rate"] {
        if let Some(v) = traj.diagnostics.get(name).and_then(|v| v.last()) {
            report.metric(format!("final_{name}"), *v);
        }
    }
    curves.push(CurveSet::from_series(
        "scaled_distance",
        "t",
        distance.iter().map(|d| d.0).collect(),
        vec![("distance".into(), distance.iter().map(|d| d.1).collect())],
    )?);
    let last = traj.last();
    curves.push(CurveSet::from_series(
        "final_state",
        "x",
        last.xs(),
        (0..species).map(|k| (format!("c{}", k + 1), last.component(k))).collect(),
    )?);
    Ok(())
}

fn turbulence_profile(config: &RunConfig, report: &mut RunReport, curves: &mut Vec<CurveSet>) -> Result<()> {
    let a = config.turbulence_half_width.expect("validated");
    let exact = turbulence_exact(a)?;
    let grid = profile_grid(config, 2.0 * a)?;
    let h = grid.spacing();
    let y = grid.nodes();
    let residual = y
        .iter()
        .filter(|y| (y.abs() - a).abs() > h)
        .map(|&y| {
            let (rv, rk) = exact.steady_residuals(y);
            rv.abs().max(rk.abs())
        })
        .fold(0.0, f64::max);
    report.residual_norms.push(residual);
    report.iterations.push(0);
    let fluxes = turbulence_fluxes_exact(&grid, &exact);
    report.flux_summaries.insert("max_abs_momentum_flux".into(), max_abs(&fluxes.momentum_flux));
    report.flux_summaries.insert("max_abs_kinetic_flux".into(), max_abs(&fluxes.kinetic_flux));
    report.flux_summaries.insert("max_source".into(), max_abs(&fluxes.source));
    curves.push(CurveSet::from_series(
        "profile",
        "y",
        y.clone(),
        vec![
            ("V".into(), y.iter().map(|&y| exact.v(y)).collect()),
            ("K".into(), y.iter().map(|&y| exact.k(y)).collect()),
        ],
    )?);
    curves.push(CurveSet::from_series(
        "fluxes",
        "y",
        y,
        vec![
            ("momentum_flux".into(), fluxes.momentum_flux),
            ("kinetic_flux".into(), fluxes.kinetic_flux),
            ("source".into(), fluxes.source),
        ],
    )?);
    Ok(())
}

fn turbulence_simulate(config: &RunConfig, report: &mut RunReport, curves: &mut Vec<CurveSet>) -> Result<()> {
    let schedule = schedule(config)?;
    let params = TurbulenceParams::default();
    let n = sim_nodes(config, 801);
    let kind = config.turbulence_initial.unwrap_or_default();
    let traj = match kind {
        TurbulenceInitial::Exact => {
            turbulence_profile(config, report, curves)?;
            let a = config.turbulence_half_width.expect("validated");
            let exact = turbulence_exact(a)?;
            let x = config.domain_half_width.unwrap_or(4.0 * a);
            let initial = Field1D::from_fn(
                x,
                n,
                2,
                |x| vec![exact.v(x), exact.k(x)],
                Boundary::Dirichlet {
                    left: vec![exact.v(-x), 0.0],
                    right: vec![exact.v(x), 0.0],
                },
            )?;
            let traj = run_turbulence(&params, &initial, &schedule, &step_options(config))?;
            let ev = scaled_error_at_nodes(&traj, 0, Scaling::PARABOLIC, |y| exact.v(y));
            let ek = scaled_error_at_nodes(&traj, 1, Scaling::PARABOLIC, |y| exact.k(y));
            report.metric("max_v_error", ev.iter().map(|e| e.1).fold(0.0, f64::max));
            report.metric("max_k_error", ek.iter().map(|e| e.1).fold(0.0, f64::max));
            curves.push(CurveSet::from_series(
                "turbulence_error",
                "t",
                traj.times.clone(),
                vec![
                    ("v_error".into(), ev.iter().map(|e| e.1).collect()),
                    ("k_error".into(), ek.iter().map(|e| e.1).collect()),
                ],
            )?);
            traj
        }
        TurbulenceInitial::Compact => {
            let x = config.domain_half_width.unwrap_or(DEFAULT_HALF_WIDTH);
            let initial = Field1D::from_fn(
                x,
                n,
                2,
                |x| vec![x.tanh(), 0.1 * (-x * x).exp()],
                Boundary::NeumannZero,
            )?;
            let traj = run_turbulence(&params, &initial, &schedule, &step_options(config))?;
            let ledger = conserved_quantities(&traj);
            for name in ["momentum", "energy"] {
                report
                    .conservation
                    .insert(name.into(), ledger.relative_drift(name).unwrap_or(f64::NAN));
            }
            let mut series = Vec::new();
            for name in ["energy", "macroscopic_energy", "turbulent_energy"] {
                series.push((name.to_string(), ledger.get(name).unwrap_or(&[]).to_vec()));
            }
            curves.push(CurveSet::from_series("turbulence_energy", "t", traj.times.clone(), series)?);
            traj
        }
    };
    record_trajectory(report, "", &traj);
    let last = traj.last();
    curves.push(CurveSet::from_series(
        "final_state",
        "x",
        last.xs(),
        vec![("v".into(), last.component(0)), ("k".into(), last.component(1))],
    )?);
    Ok(())
}

fn gl(config: &RunConfig, report: &mut RunReport, curves: &mut Vec<CurveSet>) -> Result<()> {
    let params = config.gl_params()?;
    let grid = profile_grid(config, DEFAULT_HALF_WIDTH)?;
    let eta = gl_eta_profile(&params, &grid, &solve_options(config))?;
    record_profile(report, "eta", &eta);
    let recon = gl_psi_reconstruct(&eta, &params)?;
    report.metric("psi_discrepancy", recon.discrepancy);
    report.metric("psi_residual", max_abs(&gl_psi_residual(&recon)));
    let multiplier = gl_amplitude_multiplier(&eta)?;
    report.flux_summaries.insert("max_abs_amplitude_multiplier".into(), max_abs(&multiplier));
    let y = grid.nodes();
    curves.push(CurveSet::from_series(
        "profile",
        "y",
        y.clone(),
        vec![("eta".into(), eta.component(0)), ("psi".into(), recon.psi.component(0))],
    )?);
    curves.push(CurveSet::from_series(
        "multiplier",
        "y",
        y.clone(),
        vec![("Lambda".into(), multiplier)],
    )?);
    let speeds = match zero_speed_profile(&recon, ZERO_SPEED_EPS) {
        Ok(v) => {
            curves.push(CurveSet::from_series("zero_speed", "y", y, vec![("V".into(), v.clone())])?);
            Some(v)
        }
        Err(e) => {
            report.warnings.push(format!("zero speeds unavailable: {e}"));
            None
        }
    };
    if config.problem != Problem::GlSimulate {
        return Ok(());
    }

    let schedule = schedule(config)?;
    let field = gl_mixed_field(
        &recon,
        &params,
        config.domain_half_width.unwrap_or(80.0),
        sim_nodes(config, 3201),
    )?;
    let traj = run_gl(&field, &schedule, &step_options(config))?;
    record_trajectory(report, "", &traj);
    let constraint = traj.diagnostics.get("amplitude_constraint").cloned().unwrap_or_default();
    report.metric("final_amplitude_constraint", constraint.last().copied().unwrap_or(f64::NAN));
    curves.push(CurveSet::from_series(
        "amplitude_constraint",
        "t",
        traj.times.clone(),
        vec![("constraint".into(), constraint)],
    )?);
    // Backward difference over the last interval, compared at its midpoint.
    let t = schedule.final_time;
    let (mut xs, mut measured, mut predicted) = (Vec::new(), Vec::new(), Vec::new());
    for track in &traj.zero_tracks {
        let Some(j) = track.index_at(t) else { continue };
        if j == 0 {
            continue;
        }
        let (t0, t1) = (track.times[j - 1], track.times[j]);
        let (x0, x1) = (track.positions[j - 1], track.positions[j]);
        let s = (1.0 + 0.5 * (t0 + t1)).sqrt();
        let x = 0.5 * (x0 + x1);
        let p = speeds.as_ref().and_then(|sp| interp(&grid, sp, x / s)).map_or(f64::NAN, |v| v / s);
        xs.push(x);
        measured.push((x1 - x0) / (t1 - t0));
        predicted.push(p);
    }
    let s = (1.0 + t).sqrt();
    report.metric("zeros_at_final_time", xs.len() as f64);
    let core: Vec<f64> = xs
        .iter()
        .zip(measured.iter().zip(&predicted))
        .filter(|(x, (_, p))| (*x / s).abs() <= 2.0 && p.is_finite())
        .map(|(_, (m, p))| (m - p).abs() / p.abs().max(f64::MIN_POSITIVE))
        .collect();
    if !core.is_empty() {
        report.metric("max_relative_speed_error", core.iter().copied().fold(0.0, f64::max));
    }
    if !xs.is_empty() {
        curves.push(CurveSet::from_series(
            "zero_speeds",
            "x",
            xs,
            vec![("measured".into(), measured), ("predicted".into(), predicted)],
        )?);
    }
    Ok(())
}

fn plot_style(curve: &CurveSet) -> PlotStyle {
    PlotStyle {
        title: curve.name.clone(),
        x_label: curve.columns[0].clone(),
        ..PlotStyle::default()
    }
}

/// Writes curves in the requested format and `report.json` into `dir`.
pub fn write_artifacts(output: &mut RunOutput, dir: &Path, format: OutputFormat) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    for curve in &output.curves {
        if matches!(format, OutputFormat::Csv | OutputFormat::All) {
            let name = format!("{}.csv", curve.name);
            write_csv(curve, &dir.join(&name))?;
            output.report.artifacts.push(name);
        }
        if matches!(format, OutputFormat::Svg | OutputFormat::All) {
            let name = format!("{}.svg", curve.name);
            write_svg(curve, &plot_style(curve), &dir.join(&name))?;
            output.report.artifacts.push(name);
        }
    }
    if matches!(format, OutputFormat::Json | OutputFormat::All) {
        output.report.curves = output.curves.clone();
    }
    output.report.artifacts.push("report.json".into());
    output.report.write(&dir.join("report.json"))
}

/// Runs `config` and writes its artifacts; on failure a report with
/// `status: failed` is still written when the directory is usable.
pub fn execute(config: &RunConfig, dir: &Path, format: OutputFormat) -> Execution {
    execute_filtered(config, dir, format, |_| true)
}

/// Like [`execute`], writing only the curves accepted by `keep`.
pub fn execute_filtered(
    config: &RunConfig,
    dir: &Path,
    format: OutputFormat,
    keep: impl Fn(&CurveSet) -> bool,
) -> Execution {
    let start = Instant::now();
    match run(config) {
        Ok(mut output) => match {
            output.curves.retain(|c| keep(c));
            write_artifacts(&mut output, dir, format)
        } {
            Ok(()) => Execution {
                report: output.report,
                error: None,
            },
            Err(e) => Execution {
                report: output.report.failed(&e),
                error: Some(e),
            },
        },
        Err(e) => {
            let mut report = RunReport::new(config.problem.tag(), &config.label()).failed(&e);
            report.config = Some(config.clone());
            report.wall_clock_seconds = start.elapsed().as_secs_f64();
            report.artifacts.push("report.json".into());
            let written = std::fs::create_dir_all(dir)
                .map_err(|source| Error::Io {
                    path: dir.display().to_string(),
                    source,
                })
                .and_then(|()| report.write(&dir.join("report.json")));
            if let Err(w) = written {
                report.warnings.push(format!("report not written: {w}"));
            }
            debug_assert_eq!(report.status, RunStatus::Failed);
            Execution { report, error: Some(e) }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> RunConfig {
        RunConfig::from_json(text).unwrap()
    }

    #[test]
    fn barenblatt_curves_per_exponent() {
        let out = run(&config(r#"{"problem":"pme_barenblatt","m":[1.25,2,3],"N":1,"n":201}"#)).unwrap();
        let b = &out.curves[0];
        assert_eq!(b.columns.len(), 4);
        assert!(out.report.residual_norms.iter().all(|r| *r < 1e-10));
        assert!(out.report.metrics.contains_key("support_radius[m=2]"));
    }

    #[test]
    fn two_species_profile_reports_flux_scale() {
        let out = run(&config(
            r#"{"problem":"rds_profile","network":{"network":"two_species","beta":1,"gamma":1},
                "d":[1,0.5],"u_minus":1,"u_plus":6,"n":401}"#,
        ))
        .unwrap();
        assert!(out.report.flux_summaries["kernel_residual"] < 1e-8);
        assert!(out.report.flux_summaries.contains_key("multiplier_scale"));
        assert_eq!(out.curves.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(), [
            "conserved",
            "profile",
            "multipliers",
            "fluxes"
        ]);
    }

    #[test]
    fn gl_profile_has_zero_speeds() {
        let out = run(&config(r#"{"problem":"gl_profile","eta_minus":0.45,"eta_plus":0.3,"n":401}"#)).unwrap();
        assert!(out.curves.iter().any(|c| c.name == "zero_speed"));
    }

    #[test]
    fn execute_writes_report_even_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(r#"{"problem":"pme_barenblatt","m":2,"N":1}"#);
        c.m = Some(vec![0.5]);
        let exec = execute(&c, dir.path(), OutputFormat::Csv);
        assert!(exec.error.is_some());
        let report = RunReport::read(&dir.path().join("report.json")).unwrap();
        assert_eq!(report.status, RunStatus::Failed);
        assert_eq!(report.error.unwrap().parameter.as_deref(), Some("m"));
    }

    #[test]
    fn execute_writes_requested_formats() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(r#"{"problem":"turbulence_exact","A":1,"n":101}"#);
        let exec = execute(&c, dir.path(), OutputFormat::All);
        assert!(exec.error.is_none());
        for f in ["profile.csv", "profile.svg", "fluxes.csv", "report.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert_eq!(exec.report.curves.len(), 2);
    }
}
