use serde::{Deserialize, Serialize};

use super::closed_form::erf_profile_e;
use super::flux::FluxMap;
use super::grid::Grid;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, BandMatrix};
use crate::reaction_network::ReductionMap;

/// Newton options for [`solve_profile`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Max-norm tolerance on the discrete residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Backtracking halvings allowed per Newton step.
    pub max_halvings: usize,
    /// Continuation stages in the boundary gap (escalated to 8 on failure).
    pub continuation_steps: usize,
    /// Maximum number of node projections before giving up.
    pub projection_cap: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 30,
            continuation_steps: 1,
            projection_cap: None,
        }
    }
}

/// How a profile came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileOrigin {
    Solved,
    ClosedForm,
    Derived,
    Unsolved,
}

/// Solver bookkeeping attached to a profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub residual_history: Vec<f64>,
    pub projections: usize,
    pub continuation_stages: usize,
    /// Tolerance actually met: `tol`, or the rounding floor of the discrete
    /// operator when that is larger.
    pub effective_tolerance: f64,
    pub warnings: Vec<String>,
}

/// Node values of a (vector) similarity profile on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub grid: Grid,
    /// Node-major values, `values[i * m + k]` is component `k` at node `i`.
    pub values: Vec<f64>,
    pub components: usize,
    pub left_limit: Vec<f64>,
    pub right_limit: Vec<f64>,
    pub residual_norm: f64,
    pub newton_iterations: usize,
    pub origin: ProfileOrigin,
    pub report: SolveReport,
}

impl Profile {
    /// Wraps externally computed node values (closed forms, derived curves).
    pub fn from_nodes(grid: Grid, components: usize, values: Vec<f64>, origin: ProfileOrigin) -> Result<Self> {
        if components == 0 || values.len() != grid.len() * components {
            return Err(Error::domain(format!(
                "{} values do not fit {} nodes × {components} components",
                values.len(),
                grid.len()
            )));
        }
        let left_limit = values[..components].to_vec();
        let right_limit = values[values.len() - components..].to_vec();
        Ok(Self {
            grid,
            values,
            components,
            left_limit,
            right_limit,
            residual_norm: 0.0,
            newton_iterations: 0,
            origin,
            report: SolveReport::default(),
        })
    }

    /// Scalar profile from a function of `y`.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64, origin: ProfileOrigin) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self::from_nodes(grid, 1, values, origin).expect("scalar profile shape")
    }

    pub fn is_solved(&self) -> bool {
        self.origin != ProfileOrigin::Unsolved
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.components..(i + 1) * self.components]
    }

    #[inline]
    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.components + k]
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.value(i, k)).collect()
    }

    /// Linear interpolation of component `k`; constant extension outside.
    pub fn interpolate(&self, k: usize, y: f64) -> f64 {
        let n = self.grid.len();
        let l = self.grid.half_width();
        if y <= -l {
            return self.value(0, k);
        }
        if y >= l {
            return self.value(n - 1, k);
        }
        let s = (y + l) / self.grid.spacing();
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        (1.0 - t) * self.value(i, k) + t * self.value(i + 1, k)
    }
}

/// Discrete residual `(A_{i+1} − 2A_i + A_{i−1})/h² + (y_i/2)(U_{i+1} − U_{i−1})/(2h)`
/// at interior nodes, `U − U∓` at the two boundary nodes.
pub fn residual<F: FluxMap + ?Sized>(profile: &Profile, flux: &F) -> Result<Vec<f64>> {
    if flux.dim() != profile.components {
        return Err(Error::domain("flux dimension does not match the profile"));
    }
    let a = flux_values(flux, &profile.values, profile.components)?;
    Ok(assemble_residual(
        &profile.grid,
        profile.components,
        &profile.values,
        &a,
        &profile.left_limit,
        &profile.right_limit,
    ))
}

fn flux_values<F: FluxMap + ?Sized>(flux: &F, u: &[f64], m: usize) -> Result<Vec<f64>> {
    let mut a = vec![0.0; u.len()];
    for (ui, ai) in u.chunks(m).zip(a.chunks_mut(m)) {
        flux.value(ui, ai)?;
    }
    Ok(a)
}

fn assemble_residual(grid: &Grid, m: usize, u: &[f64], a: &[f64], left: &[f64], right: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let inv_2h = 0.5 / h;
    let mut r = vec![0.0; n * m];
    for k in 0..m {
        r[k] = u[k] - left[k];
        r[(n - 1) * m + k] = u[(n - 1) * m + k] - right[k];
    }
    for i in 1..n - 1 {
        let y = grid.y(i);
        for k in 0..m {
            let (p, c, q) = ((i - 1) * m + k, i * m + k, (i + 1) * m + k);
            r[c] = (a[q] - 2.0 * a[c] + a[p]) * inv_h2 + 0.5 * y * (u[q] - u[p]) * inv_2h;
        }
    }
    r
}

/// Size of the rounding noise in the discrete residual at `u`.
fn rounding_floor(grid: &Grid, u: &[f64], a: &[f64]) -> f64 {
    let h = grid.spacing();
    let scale = 4.0 * max_abs(a) / (h * h) + grid.half_width() * max_abs(u) / (2.0 * h);
    16.0 * f64::EPSILON * scale
}

/// `U₋ + (U₊−U₋)𝔼(y/√(2d̄))`.
fn initial_guess(grid: &Grid, left: &[f64], right: &[f64], d_bar: f64) -> Vec<f64> {
    let m = left.len();
    let scale = 1.0 / (2.0 * d_bar).sqrt();
    let mut u = Vec::with_capacity(grid.len() * m);
    for i in 0..grid.len() {
        let e = erf_profile_e(grid.y(i) * scale);
        for k in 0..m {
            u.push(left[k] + (right[k] - left[k]) * e);
        }
    }
    u
}

struct NewtonOutcome {
    u: Vec<f64>,
    residual: f64,
    iterations: usize,
    history: Vec<f64>,
    effective_tol: f64,
    converged: bool,
}

fn newton<F: FluxMap + ?Sized>(
    flux: &F,
    grid: &Grid,
    left: &[f64],
    right: &[f64],
    mut u: Vec<f64>,
    opts: &SolveOptions,
    projections: &mut usize,
    cap: usize,
) -> Result<NewtonOutcome> {
    let m = left.len();
    let n = grid.len();
    let size = n * m;
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let band = 2 * m - 1;

    u[..m].copy_from_slice(left);
    u[size - m..].copy_from_slice(right);
    let project_all = |u: &mut [f64], count: &mut usize| {
        for node in u.chunks_mut(m) {
            if flux.project(node) {
                *count += 1;
            }
        }
    };
    project_all(&mut u, projections);

    let mut a = flux_values(flux, &u, m)?;
    let mut r = assemble_residual(grid, m, &u, &a, left, right);
    let mut norm = max_abs(&r);
    let mut history = vec![norm];
    let mut jac_nodes = vec![0.0; n * m * m];
    let mut matrix = BandMatrix::zeros(size, band, band);
    let mut iterations = 0;
    let mut effective_tol = opts.tol;

    loop {
        if norm <= opts.tol {
            return Ok(NewtonOutcome {
                u,
                residual: norm,
                iterations,
                history,
                effective_tol,
                converged: true,
            });
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        for (ui, ji) in u.chunks(m).zip(jac_nodes.chunks_mut(m * m)) {
            flux.jacobian(ui, ji)?;
        }
        matrix.clear();
        for k in 0..m {
            matrix.set(k, k, 1.0);
            matrix.set(size - m + k, size - m + k, 1.0);
        }
        for i in 1..n - 1 {
            let adv = 0.25 * grid.y(i) / h;
            for r_k in 0..m {
                let row = i * m + r_k;
                for c_k in 0..m {
                    let jm = jac_nodes[(i - 1) * m * m + r_k * m + c_k] * inv_h2;
                    let jc = jac_nodes[i * m * m + r_k * m + c_k] * inv_h2;
                    let jp = jac_nodes[(i + 1) * m * m + r_k * m + c_k] * inv_h2;
                    let delta = if r_k == c_k { adv } else { 0.0 };
                    matrix.add(row, (i - 1) * m + c_k, jm - delta);
                    matrix.add(row, i * m + c_k, -2.0 * jc);
                    matrix.add(row, (i + 1) * m + c_k, jp + delta);
                }
            }
        }
        let mut step: Vec<f64> = r.iter().map(|v| -v).collect();
        if matrix.solve_in_place(&mut step).is_none() {
            return Err(Error::Solver {
                message: "singular Newton matrix".into(),
                last_residual: norm,
                residual_history: history,
                last_iterate: Some(u),
            });
        }
        let step_norm = max_abs(&step);

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let mut trial: Vec<f64> = u.iter().zip(&step).map(|(a, b)| a + lambda * b).collect();
            let mut trial_proj = 0;
            project_all(&mut trial, &mut trial_proj);
            if let Ok(ta) = flux_values(flux, &trial, m) {
                let tr = assemble_residual(grid, m, &trial, &ta, left, right);
                let tn = max_abs(&tr);
                if tn.is_finite() && tn < norm {
                    *projections += trial_proj;
                    u = trial;
                    a = ta;
                    r = tr;
                    norm = tn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        history.push(norm);
        if *projections > cap {
            return Err(Error::Solver {
                message: format!("projection cap {cap} exceeded"),
                last_residual: norm,
                residual_history: history,
                last_iterate: Some(u),
            });
        }
        // Once the Newton correction is at rounding level the residual cannot
        // drop further; accept it if it sits at the operator's rounding floor.
        let floor = rounding_floor(grid, &u, &a);
        let stalled = !accepted || lambda * step_norm <= 1e-13 * (1.0 + max_abs(&u));
        if stalled {
            if norm <= opts.tol.max(floor) {
                effective_tol = opts.tol.max(floor);
                return Ok(NewtonOutcome {
                    u,
                    residual: norm,
                    iterations,
                    history,
                    effective_tol,
                    converged: true,
                });
            }
            if !accepted {
                break;
            }
        }
        effective_tol = opts.tol;
    }
    Ok(NewtonOutcome {
        u,
        residual: norm,
        iterations,
        history,
        effective_tol,
        converged: false,
    })
}

fn run_continuation<F: FluxMap + ?Sized>(
    flux: &F,
    grid: &Grid,
    left: &[f64],
    right: &[f64],
    stages: usize,
    opts: &SolveOptions,
) -> Result<(NewtonOutcome, usize)> {
    let m = left.len();
    let cap = opts.projection_cap.unwrap_or(20 * grid.len() * m);
    let mean: Vec<f64> = left.iter().zip(right).map(|(a, b)| 0.5 * (a + b)).collect();
    let stage_limits = |s: usize| {
        let t = s as f64 / stages as f64;
        let l: Vec<f64> = (0..m).map(|k| mean[k] + t * (left[k] - mean[k])).collect();
        let r: Vec<f64> = (0..m).map(|k| mean[k] + t * (right[k] - mean[k])).collect();
        (l, r)
    };
    let mut projections = 0;
    let mut total_iterations = 0;
    let mut history = Vec::new();
    let mut current: Option<Vec<f64>> = None;
    let mut last = None;
    for s in 1..=stages {
        let (l, r) = stage_limits(s);
        let start = match current.take() {
            Some(prev) => {
                // Rescale the previous stage affinely in each component.
                let (pl, pr) = stage_limits(s - 1);
                let mut next = prev;
                for node in next.chunks_mut(m) {
                    for k in 0..m {
                        let gap = pr[k] - pl[k];
                        let t = if gap.abs() > 0.0 { (node[k] - pl[k]) / gap } else { 0.5 };
                        node[k] = l[k] + t * (r[k] - l[k]);
                    }
                }
                next
            }
            None => initial_guess(grid, &l, &r, flux.typical_diffusivity(&l, &r)),
        };
        let outcome = newton(flux, grid, &l, &r, start, opts, &mut projections, cap)?;
        total_iterations += outcome.iterations;
        history.extend_from_slice(&outcome.history);
        if !outcome.converged {
            return Err(Error::Solver {
                message: format!(
                    "Newton did not converge in continuation stage {s}/{stages} (residual {:.3e})",
                    outcome.residual
                ),
                last_residual: outcome.residual,
                residual_history: history,
                last_iterate: Some(outcome.u),
            });
        }
        current = Some(outcome.u.clone());
        last = Some(outcome);
    }
    let mut out = last.expect("at least one stage");
    out.iterations = total_iterations;
    out.history = history;
    Ok((out, projections))
}

/// Solves `0 = (A(U))″ + (y/2)U′` on `grid` with `U(∓L) = U∓` by damped
/// Newton on the centered-difference discretization, escalating to
/// 8-stage continuation in the boundary gap on failure.
pub fn solve_profile<F: FluxMap + ?Sized>(
    flux: &F,
    left: &[f64],
    right: &[f64],
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<Profile> {
    let m = flux.dim();
    if left.len() != m || right.len() != m {
        return Err(Error::domain(format!("boundary values must have {m} components")));
    }
    if left.iter().chain(right).any(|v| !v.is_finite()) {
        return Err(Error::domain("boundary values must be finite"));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::validation("tol", "tolerance and iteration limit must be positive"));
    }
    let mut l = left.to_vec();
    let mut r = right.to_vec();
    if flux.project(&mut l) || flux.project(&mut r) {
        return Err(Error::domain("boundary values lie outside the domain of the flux"));
    }
    let stages = opts.continuation_steps.max(1);
    let attempt = run_continuation(flux, grid, left, right, stages, opts);
    let (outcome, projections, stages_used) = match attempt {
        Ok((o, p)) => (o, p, stages),
        Err(first) if stages < 8 && first.is_solver_failure() => {
            match run_continuation(flux, grid, left, right, 8, opts) {
                Ok((o, p)) => (o, p, 8),
                Err(Error::Solver {
                    message,
                    last_residual,
                    mut residual_history,
                    last_iterate,
                }) => {
                    let mut all = first.residual_history().to_vec();
                    all.append(&mut residual_history);
                    return Err(Error::Solver {
                        message: format!("{message}; continuation exhausted"),
                        last_residual,
                        residual_history: all,
                        last_iterate,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        Err(e) => return Err(e),
    };

    let mut warnings = Vec::new();
    if outcome.u.chunks(m).any(|node| flux.at_clamp(node)) {
        warnings.push("profile touches the projection clamp; treat as unreliable".to_string());
    }
    if outcome.effective_tol > opts.tol {
        warnings.push(format!(
            "residual limited by rounding floor {:.3e} above tol {:.1e}",
            outcome.effective_tol, opts.tol
        ));
    }
    Ok(Profile {
        grid: *grid,
        values: outcome.u,
        components: m,
        left_limit: left.to_vec(),
        right_limit: right.to_vec(),
        residual_norm: outcome.residual,
        newton_iterations: outcome.iterations,
        origin: ProfileOrigin::Solved,
        report: SolveReport {
            residual_history: outcome.history,
            projections,
            continuation_stages: stages_used,
            effective_tolerance: outcome.effective_tol,
            warnings,
        },
    })
}

/// Nodewise `C(y) = Ψ(U(y))`.
pub fn composed_concentration_profile(u_profile: &Profile, reduction: &ReductionMap<'_>) -> Result<Profile> {
    let network = reduction.network();
    if u_profile.components != network.conserved_count() {
        return Err(Error::domain("profile dimension does not match the network"));
    }
    let bad: Vec<usize> = (0..u_profile.grid.len())
        .filter(|&i| u_profile.node(i).iter().any(|&v| !(v >= 0.0)))
        .collect();
    if !bad.is_empty() {
        let shown: Vec<String> = bad.iter().take(10).map(|i| i.to_string()).collect();
        return Err(Error::domain(format!(
            "profile leaves the admissible set at {} node(s): {}{}",
            bad.len(),
            shown.join(", "),
            if bad.len() > 10 { ", …" } else { "" }
        )));
    }
    let species = network.species_count();
    let mut values = Vec::with_capacity(u_profile.grid.len() * species);
    for i in 0..u_profile.grid.len() {
        values.extend(reduction.eval(u_profile.node(i))?);
    }
    let mut out = Profile::from_nodes(u_profile.grid, species, values, ProfileOrigin::Derived)?;
    out.left_limit = reduction.eval(&u_profile.left_limit)?;
    out.right_limit = reduction.eval(&u_profile.right_limit)?;
    out.residual_norm = u_profile.residual_norm;
    out.newton_iterations = u_profile.newton_iterations;
    if !u_profile.is_solved() {
        out.origin = ProfileOrigin::Unsolved;
    }
    Ok(out)
}

/// `sup_y |U(y) − ū(y)| / |U₊ − U₋|` against a reference interpolant `ū`.
pub fn uniform_estimate_constant(profile: &Profile, reference: impl Fn(f64, usize) -> f64) -> f64 {
    let m = profile.components;
    let gap = (0..m)
        .map(|k| (profile.right_limit[k] - profile.left_limit[k]).powi(2))
        .sum::<f64>()
        .sqrt();
    if gap == 0.0 {
        return 0.0;
    }
    let mut sup = 0.0_f64;
    for i in 0..profile.grid.len() {
        let y = profile.grid.y(i);
        let d = (0..m)
            .map(|k| (profile.value(i, k) - reference(y, k)).powi(2))
            .sum::<f64>()
            .sqrt();
        sup = sup.max(d);
    }
    sup / gap
}

#[cfg(test)]
mod tests {
    use super::super::flux::{LinearFlux, PowerFlux};
    use super::*;

    #[test]
    fn linear_flux_matches_closed_form() {
        let grid = Grid::new(10.0, 4001).unwrap();
        for &d in &[0.5, 1.0, 2.0] {
            let flux = LinearFlux::new(d).unwrap();
            let p = solve_profile(&flux, &[0.0], &[1.0], &grid, &SolveOptions::default()).unwrap();
            let err = (0..grid.len())
                .map(|i| (p.value(i, 0) - erf_profile_e(grid.y(i) / (2.0 * d).sqrt())).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-4, "d = {d}: {err}");
            assert!(p.residual_norm <= p.report.effective_tolerance);
        }
    }

    #[test]
    fn constant_data_needs_no_iterations() {
        let grid = Grid::new(10.0, 401).unwrap();
        let flux = LinearFlux::new(1.3).unwrap();
        let p = solve_profile(&flux, &[0.7], &[0.7], &grid, &SolveOptions::default()).unwrap();
        assert_eq!(p.newton_iterations, 0);
        assert!(p.values.iter().all(|&v| v == 0.7));
        assert!(residual(&p, &flux).unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn residual_of_solution_is_below_tolerance() {
        let grid = Grid::new(8.0, 801).unwrap();
        let flux = PowerFlux::new(2.0).unwrap();
        let p = solve_profile(&flux, &[2.0], &[0.5], &grid, &SolveOptions::default()).unwrap();
        let r = residual(&p, &flux).unwrap();
        assert!(max_abs(&r) <= p.report.effective_tolerance);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let grid = Grid::new(8.0, 81).unwrap();
        let flux = LinearFlux::new(1.0).unwrap();
        assert!(solve_profile(&flux, &[0.0, 1.0], &[1.0], &grid, &SolveOptions::default()).is_err());
    }

    #[test]
    fn failure_carries_residual_history() {
        let grid = Grid::new(10.0, 401).unwrap();
        let flux = LinearFlux::new(1.0).unwrap();
        let opts = SolveOptions {
            tol: 1e-300,
            max_iter: 1,
            ..SolveOptions::default()
        };
        let err = solve_profile(&flux, &[0.0], &[1.0], &grid, &opts).unwrap_err();
        assert!(err.is_solver_failure());
        assert!(!err.residual_history().is_empty());
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let grid = Grid::new(2.0, 21).unwrap();
        let p = Profile::from_fn(grid, |y| y * y, ProfileOrigin::ClosedForm);
        assert!((p.interpolate(0, grid.y(3)) - grid.y(3).powi(2)).abs() < 1e-14);
        assert_eq!(p.interpolate(0, -5.0), 4.0);
        let mid = 0.5 * (grid.y(3) + grid.y(4));
        assert!((p.interpolate(0, mid) - 0.5 * (grid.y(3).powi(2) + grid.y(4).powi(2))).abs() < 1e-15);
    }
}
