use super::field::{drive, Boundary, Field1D, Schedule, StepOptions, Trajectory, TrajectoryKind, ZeroTrack};
use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::profile_bvp::{GlParams, PsiReconstruction};

/// Default step of the semi-implicit scheme when `max_dt` is unset.
pub const GL_DEFAULT_DT: f64 = 0.05;

/// Roll `√(1−η²)(cos(ηx+φ), sin(ηx+φ))`.
pub fn gl_roll(eta: f64, phi: f64, x: f64) -> [f64; 2] {
    let rho = (1.0 - eta * eta).sqrt();
    let (s, c) = (eta * x + phi).sin_cos();
    [rho * c, rho * s]
}

/// Pure roll on `[−X, X]` with Dirichlet ends taken from the roll itself.
pub fn gl_roll_field(eta: f64, phi: f64, half_width: f64, nodes: usize) -> Result<Field1D> {
    if !(eta.abs() < 1.0) {
        return Err(Error::domain(format!("roll wavenumber |η| = {} must be below 1", eta.abs())));
    }
    let f = Field1D::from_fn(half_width, nodes, 2, |x| gl_roll(eta, phi, x).to_vec(), Boundary::NeumannZero)?;
    with_end_values(f)
}

/// Mixed-wavenumber data `ρ̄(x)e^{iψ̄(x)}` from a reconstructed phase
/// profile, continued by the limiting rolls `η±x + φ±` beyond the profile
/// grid; Dirichlet ends equal the initial values.
pub fn gl_mixed_field(recon: &PsiReconstruction, params: &GlParams, half_width: f64, nodes: usize) -> Result<Field1D> {
    let grid = recon.psi.grid;
    let l = grid.half_width();
    let n = grid.len();
    let left_offset = recon.psi.value(0, 0) - params.eta_minus * grid.y(0);
    let right_offset = recon.psi.value(n - 1, 0) - params.eta_plus * grid.y(n - 1);
    let h = grid.spacing();
    let eta_at = |y: f64| {
        let s = ((y + l) / h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        (1.0 - t) * recon.eta[i] + t * recon.eta[i + 1]
    };
    let f = Field1D::from_fn(
        half_width,
        nodes,
        2,
        |x| {
            let (psi, eta) = if x < -l {
                (params.eta_minus * x + left_offset + params.phi_minus, params.eta_minus)
            } else if x > l {
                (params.eta_plus * x + right_offset + params.phi_plus, params.eta_plus)
            } else {
                (recon.psi.interpolate(0, x) + params.phi_minus, eta_at(x))
            };
            let rho = (1.0 - eta * eta).max(0.0).sqrt();
            vec![rho * psi.cos(), rho * psi.sin()]
        },
        Boundary::NeumannZero,
    )?;
    with_end_values(f)
}

fn with_end_values(mut f: Field1D) -> Result<Field1D> {
    let last = f.nodes - 1;
    f.boundary = Boundary::Dirichlet {
        left: f.node(0).to_vec(),
        right: f.node(last).to_vec(),
    };
    Ok(f)
}

/// Semi-implicit stepping of `A_t = A_xx + A − |A|²A` with `A` stored as
/// `(Re A, Im A)`: `(I − dt∂ₓₓ)Aⁿ⁺¹ = Aⁿ + dt(Aⁿ − |Aⁿ|²Aⁿ)`.
///
/// Zeros of `Re A` are located at every snapshot and tracked; the
/// diagnostic `amplitude_constraint` records
/// `max_x |ρ² + (∂ₓ arg A)² − 1|` over interior nodes.
pub fn run_gl(initial: &Field1D, schedule: &Schedule, opts: &StepOptions) -> Result<Trajectory> {
    if initial.components != 2 {
        return Err(Error::domain("Ginzburg-Landau field needs components (Re A, Im A)"));
    }
    if initial.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("initial amplitude must be finite"));
    }
    let mut traj = Trajectory::start(TrajectoryKind::GinzburgLandau, initial);
    let mut field = initial.clone();
    let n = field.nodes;
    let h = field.spacing();
    let dirichlet = field.is_dirichlet();
    let dt_max = opts.max_dt.unwrap_or(GL_DEFAULT_DT);
    let mut zeros: Vec<Vec<f64>> = Vec::new();
    let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];

    drive(
        &mut field,
        schedule,
        &mut traj,
        |f, remaining| {
            let dt = dt_max.min(remaining);
            let r = dt / (h * h);
            for i in 0..n {
                let (a, b) = (f.values[2 * i], f.values[2 * i + 1]);
                let g = 1.0 - (a * a + b * b);
                re[i] = a + dt * g * a;
                im[i] = b + dt * g * b;
            }
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
            if let Boundary::Dirichlet { left, right } = &f.boundary {
                re[0] = left[0];
                im[0] = left[1];
                re[n - 1] = right[0];
                im[n - 1] = right[1];
            }
            solve_tridiagonal(&lower, &diag, &upper, &mut re);
            solve_tridiagonal(&lower, &diag, &upper, &mut im);
            for i in 0..n {
                f.values[2 * i] = re[i];
                f.values[2 * i + 1] = im[i];
            }
            if f.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::solver(format!("amplitude blew up at t = {}", f.time), vec![]));
            }
            Ok(dt)
        },
        |f, traj| {
            zeros.push(real_part_zeros(f));
            traj.diagnostics
                .entry("amplitude_constraint".into())
                .or_default()
                .push(amplitude_constraint(f));
        },
    )?;
    traj.zero_tracks = track_zeros(&traj.times, &zeros, 2.0 * h);
    Ok(traj)
}

/// Zeros of `Re A` from sign changes, linearly interpolated.
pub fn real_part_zeros(f: &Field1D) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..f.nodes - 1 {
        let (a, b) = (f.value(i, 0), f.value(i + 1, 0));
        if a == 0.0 {
            out.push(f.x(i));
        } else if a * b < 0.0 {
            out.push(f.x(i) + f.spacing() * a / (a - b));
        }
    }
    out
}

/// `max |ρ² + (∂ₓ arg A)² − 1|` over interior nodes, centered differences.
pub fn amplitude_constraint(f: &Field1D) -> f64 {
    let h = f.spacing();
    let mut worst = 0.0_f64;
    for i in 1..f.nodes - 1 {
        let (a, b) = (f.value(i, 0), f.value(i, 1));
        let rho2 = a * a + b * b;
        if rho2 < 1e-12 {
            continue;
        }
        let da = (f.value(i + 1, 0) - f.value(i - 1, 0)) / (2.0 * h);
        let db = (f.value(i + 1, 1) - f.value(i - 1, 1)) / (2.0 * h);
        let q = (a * db - b * da) / rho2;
        worst = worst.max((rho2 + q * q - 1.0).abs());
    }
    worst
}

/// Greedy nearest-neighbour matching of zero sets between consecutive
/// snapshots; pairs further apart than `max_jump` are not matched.
pub fn track_zeros(times: &[f64], zeros: &[Vec<f64>], max_jump: f64) -> Vec<ZeroTrack> {
    let mut tracks: Vec<ZeroTrack> = Vec::new();
    let mut open: Vec<(f64, usize)> = Vec::new();
    for (&t, set) in times.iter().zip(zeros) {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (a, &(x_old, _)) in open.iter().enumerate() {
            for (b, &x_new) in set.iter().enumerate() {
                let d = (x_new - x_old).abs();
                if d <= max_jump {
                    pairs.push((d, a, b));
                }
            }
        }
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut old_used = vec![false; open.len()];
        let mut new_track: Vec<Option<usize>> = vec![None; set.len()];
        for (_, a, b) in pairs {
            if !old_used[a] && new_track[b].is_none() {
                old_used[a] = true;
                new_track[b] = Some(open[a].1);
            }
        }
        let ended: Vec<usize> = (0..open.len()).filter(|&a| !old_used[a]).map(|a| open[a].1).collect();
        for &id in &ended {
            tracks[id].terminated = true;
        }
        for &id in &ended {
            let x = *tracks[id].positions.last().expect("tracks are nonempty");
            tracks[id].collided = ended.iter().any(|&other| {
                other != id && (tracks[other].positions.last().expect("nonempty") - x).abs() <= max_jump
            });
        }
        let mut next = Vec::with_capacity(set.len());
        for (b, &x) in set.iter().enumerate() {
            let id = match new_track[b] {
                Some(id) => id,
                None => {
                    tracks.push(ZeroTrack {
                        times: Vec::new(),
                        positions: Vec::new(),
                        terminated: false,
                        collided: false,
                    });
                    tracks.len() - 1
                }
            };
            tracks[id].times.push(t);
            tracks[id].positions.push(x);
            next.push((x, id));
        }
        open = next;
    }
    tracks
}
