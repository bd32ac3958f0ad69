use super::flux::PowerFlux;
use super::grid::Grid;
use super::solver::{residual, solve_profile, Profile, ProfileOrigin, SolveOptions};
use super::closed_form::{PmeBranch, PmeParams};
use crate::error::{Error, Result};
use crate::linalg::max_abs;

/// Mixing/infiltration profile of `(W^m)″ + (y/2)W′ = 0`, `W(∓∞) = U∓`.
///
/// With both limits positive (or `m = 1`) this is a Newton solve. When one
/// limit vanishes and `m > 1` the profile has a free boundary; it is then
/// integrated inward from the front and rescaled to the prescribed limit.
pub fn pme_mixing_profile(params: &PmeParams, grid: &Grid, opts: &SolveOptions) -> Result<Profile> {
    params.validate()?;
    let (left, right) = match params.branch {
        PmeBranch::Mixing { left, right } => (left, right),
        PmeBranch::Barenblatt { .. } => {
            return Err(Error::domain("mixing profiles need boundary values U±"))
        }
    };
    let flux = PowerFlux::new(params.m)?;
    let degenerate = params.m > 1.0 && (left == 0.0) != (right == 0.0);
    if !degenerate {
        return solve_profile(&flux, &[left], &[right], grid, opts);
    }
    // Integrate the mirror image when the zero state is on the left.
    let mirrored = left == 0.0;
    let level = if mirrored { right } else { left };
    let front = FrontProfile::truncated(params.m, level, grid.half_width())?;
    let n = grid.len();
    let mut values: Vec<f64> = (0..n)
        .map(|i| {
            let y = grid.y(i);
            front.value(if mirrored { -y } else { y })
        })
        .collect();
    values[0] = left;
    values[n - 1] = right;
    let mut profile = Profile::from_nodes(*grid, 1, values, ProfileOrigin::Solved)?;
    let r = residual(&profile, &flux)?;
    profile.residual_norm = max_abs(&r);
    profile.report.effective_tolerance = profile.residual_norm;
    profile.report.warnings.push(format!(
        "degenerate front at y = {:.6}; profile from front integration, centered residual dominated by the front cell",
        if mirrored { -front.front } else { front.front }
    ));
    Ok(profile)
}

/// Scalar infiltration profile with front at `front` and `W(−∞) = level`.
///
/// A unit-front solution is tabulated in the pressure variable `P = W^{m−1}`
/// and mapped by the scaling `W̃(y) = aW(a^{(1−m)/2}y)`.
#[derive(Debug, Clone)]
pub struct FrontProfile {
    pub m: f64,
    pub level: f64,
    pub front: f64,
    amplitude: f64,
    stretch: f64,
    step: f64,
    /// `(P, P′)` of the unit-front solution at `1 − j·step`.
    table: Vec<(f64, f64)>,
}

impl FrontProfile {
    const STEP: f64 = 1e-4;

    pub fn new(m: f64, level: f64) -> Result<Self> {
        if !(m > 1.0) {
            return Err(Error::domain("front integration needs m > 1"));
        }
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::domain("front integration needs a positive limit"));
        }
        let table = integrate_from_front(m, Self::STEP)?;
        let w_inf = table.last().expect("nonempty").0.powf(1.0 / (m - 1.0));
        let amplitude = level / w_inf;
        let stretch = amplitude.powf(0.5 * (1.0 - m));
        Ok(Self {
            m,
            level,
            front: 1.0 / stretch,
            amplitude,
            stretch,
            step: Self::STEP,
            table,
        })
    }

    /// Profile on `[−L, L]` with `W(−L) = level` exactly, as the Dirichlet
    /// problem requires; the amplitude is found by bisection in `log a`.
    pub fn truncated(m: f64, level: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::domain("half-width must be positive"));
        }
        let mut this = Self::new(m, level)?;
        let at_edge = |this: &mut Self, log_a: f64| {
            this.amplitude = log_a.exp();
            this.stretch = this.amplitude.powf(0.5 * (1.0 - m));
            this.value(-half_width) - level
        };
        let mut lo = this.amplitude.ln();
        if at_edge(&mut this, lo) < 0.0 {
            let mut hi = lo;
            let mut grow = 1e-3;
            while at_edge(&mut this, hi) < 0.0 {
                lo = hi;
                hi += grow;
                grow *= 2.0;
                if grow > 1e3 {
                    return Err(Error::solver("front amplitude bracket failed", vec![]));
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if at_edge(&mut this, mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            at_edge(&mut this, hi);
        }
        this.front = 1.0 / this.stretch;
        if this.front >= half_width {
            return Err(Error::domain(format!(
                "front at y = {} lies outside the domain; enlarge the half-width",
                this.front
            )));
        }
        Ok(this)
    }

    /// `W(y)`, by cubic Hermite interpolation of `P` in the table.
    pub fn value(&self, y: f64) -> f64 {
        let z = self.stretch * y;
        if z >= 1.0 {
            return 0.0;
        }
        let s = (1.0 - z) / self.step;
        let j = s.floor() as usize;
        if j + 1 >= self.table.len() {
            return self.level;
        }
        let t = s - j as f64;
        let (p0, d0) = self.table[j];
        let (p1, d1) = self.table[j + 1];
        // Parameter runs towards decreasing y, so dP/dt = −step·P′.
        let (m0, m1) = (-self.step * d0, -self.step * d1);
        let (t2, t3) = (t * t, t * t * t);
        let p = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1;
        self.amplitude * p.max(0.0).powf(1.0 / (self.m - 1.0))
    }
}

/// RK4 for `P″ = −k(P′² + yP′/(2(k+1)))/P`, `k = 1/(m−1)`, inward from
/// a unit front where `P = 0`, `P′ = −1/(2(k+1))`, until `P′` has decayed
/// to rounding level.
fn integrate_from_front(m: f64, step: f64) -> Result<Vec<(f64, f64)>> {
    let k = 1.0 / (m - 1.0);
    let g = 1.0 / (2.0 * (k + 1.0));
    let rhs = |y: f64, p: f64, dp: f64| -> f64 { -k * (dp * dp + g * y * dp) / p };
    // Local expansion P = g·s − k·g²·s² + O(s³), s = 1 − y.
    let mut y = 1.0 - step;
    let mut p = g * step - k * g * g * step * step;
    let mut dp = -g + 2.0 * k * g * g * step;
    let mut table = vec![(0.0, -g), (p, dp)];
    let max_steps = (400.0 / step) as usize;
    for _ in 0..max_steps {
        let h = -step;
        let k1p = dp;
        let k1d = rhs(y, p, dp);
        let k2p = dp + 0.5 * h * k1d;
        let k2d = rhs(y + 0.5 * h, p + 0.5 * h * k1p, dp + 0.5 * h * k1d);
        let k3p = dp + 0.5 * h * k2d;
        let k3d = rhs(y + 0.5 * h, p + 0.5 * h * k2p, dp + 0.5 * h * k2d);
        let k4p = dp + h * k3d;
        let k4d = rhs(y + h, p + h * k3p, dp + h * k3d);
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        dp += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        y += h;
        if !(p > 0.0 && p.is_finite() && dp.is_finite()) {
            return Err(Error::solver(
                format!("front integration broke down at y = {y}"),
                vec![p, dp],
            ));
        }
        table.push((p, dp));
        if dp.abs() <= 1e-17 * p {
            return Ok(table);
        }
    }
    Err(Error::solver("front integration did not settle", vec![p, dp]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile_bvp::FluxMap;

    #[test]
    fn infiltration_profile_solves_the_ode_away_from_the_front() {
        for &m in &[2.0, 3.0, 1.25] {
            let grid = Grid::new(10.0, 4001).unwrap();
            let p = pme_mixing_profile(&PmeParams::mixing(m, 1.0, 0.0).unwrap(), &grid, &SolveOptions::default())
                .unwrap();
            let front = FrontProfile::truncated(m, 1.0, 10.0).unwrap().front;
            let r = residual(&p, &PowerFlux::new(m).unwrap()).unwrap();
            let h = grid.spacing();
            for i in 1..grid.len() - 1 {
                if grid.y(i) < front - 0.5 {
                    assert!(r[i].abs() < 1e-5, "m = {m}, y = {}: {}", grid.y(i), r[i]);
                }
            }
            assert!((p.value(0, 0) - 1.0).abs() < 1e-14);
            assert!((p.interpolate(0, -9.0) - 1.0).abs() < 1e-3);
            assert!(p.values.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
            assert!(p.values.windows(2).all(|w| w[1] <= w[0] + 1e-14));
            assert_eq!(p.interpolate(0, front + 2.0 * h), 0.0);
        }
    }

    #[test]
    fn scaling_fixes_the_limit() {
        let a = FrontProfile::new(2.0, 1.0).unwrap();
        let b = FrontProfile::new(2.0, 4.0).unwrap();
        // W̃(y) = 4 W(y/2) for m = 2.
        for &y in &[-3.0, -1.0, 0.0, 0.5] {
            assert!((b.value(y) - 4.0 * a.value(y / 2.0)).abs() < 1e-12);
        }
        assert!((a.value(-30.0) - 1.0).abs() < 1e-15);
        assert!((b.front - 2.0 * a.front).abs() < 1e-12);
    }

    #[test]
    fn mirrored_and_nondegenerate_branches() {
        let grid = Grid::new(10.0, 801).unwrap();
        let opts = SolveOptions::default();
        let right = pme_mixing_profile(&PmeParams::mixing(2.0, 1.0, 0.0).unwrap(), &grid, &opts).unwrap();
        let left = pme_mixing_profile(&PmeParams::mixing(2.0, 0.0, 1.0).unwrap(), &grid, &opts).unwrap();
        for i in 0..grid.len() {
            assert!((left.value(i, 0) - right.value(grid.len() - 1 - i, 0)).abs() < 1e-14);
        }
        let smooth = pme_mixing_profile(&PmeParams::mixing(2.0, 1.0, 0.25).unwrap(), &grid, &opts).unwrap();
        assert!(smooth.residual_norm <= smooth.report.effective_tolerance);
        let flux = PowerFlux::new(2.0).unwrap();
        assert_eq!(flux.dim(), 1);
    }
}

