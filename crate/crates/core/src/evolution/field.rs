use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary treatment at `x = ±X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Boundary {
    /// End nodes held at the given per-component values.
    Dirichlet { left: Vec<f64>, right: Vec<f64> },
    /// Zero-flux ends (half control volumes at the boundary nodes).
    NeumannZero,
}

/// Uniform node-centered field on `[−X, X]`, values stored node-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field1D {
    pub half_width: f64,
    pub nodes: usize,
    pub components: usize,
    pub values: Vec<f64>,
    pub time: f64,
    pub boundary: Boundary,
}

impl Field1D {
    pub fn new(half_width: f64, nodes: usize, components: usize, values: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::validation("X", format!("half-width must be positive, got {half_width}")));
        }
        if nodes < 3 {
            return Err(Error::validation("n_x", format!("need at least 3 nodes, got {nodes}")));
        }
        if components == 0 || values.len() != nodes * components {
            return Err(Error::domain(format!(
                "field needs {nodes}×{components} values, got {}",
                values.len()
            )));
        }
        if let Boundary::Dirichlet { left, right } = &boundary {
            if left.len() != components || right.len() != components {
                return Err(Error::domain("Dirichlet values must have one entry per component"));
            }
        }
        let mut field = Self {
            half_width,
            nodes,
            components,
            values,
            time: 0.0,
            boundary,
        };
        field.apply_dirichlet();
        Ok(field)
    }

    /// Samples `f(x)` (one entry per component) at the nodes.
    pub fn from_fn(
        half_width: f64,
        nodes: usize,
        components: usize,
        f: impl Fn(f64) -> Vec<f64>,
        boundary: Boundary,
    ) -> Result<Self> {
        let h = 2.0 * half_width / (nodes.max(2) - 1) as f64;
        let mut values = Vec::with_capacity(nodes * components);
        for i in 0..nodes {
            let v = f(-half_width + i as f64 * h);
            if v.len() != components {
                return Err(Error::domain("sampling function returned the wrong number of components"));
            }
            values.extend(v);
        }
        Self::new(half_width, nodes, components, values, boundary)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.nodes - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.half_width
        } else {
            -self.half_width + i as f64 * self.spacing()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.x(i)).collect()
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.components + k]
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.components..(i + 1) * self.components]
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.nodes).map(|i| self.value(i, k)).collect()
    }

    pub(crate) fn set_component(&mut self, k: usize, data: &[f64]) {
        for (i, v) in data.iter().enumerate() {
            self.values[i * self.components + k] = *v;
        }
    }

    /// Linear interpolation; `None` outside `[−X, X]`.
    pub fn interpolate(&self, k: usize, x: f64) -> Option<f64> {
        if !(x >= -self.half_width && x <= self.half_width) {
            return None;
        }
        let s = (x + self.half_width) / self.spacing();
        let i = (s.floor() as usize).min(self.nodes - 2);
        let t = s - i as f64;
        Some((1.0 - t) * self.value(i, k) + t * self.value(i + 1, k))
    }

    /// Trapezoidal integral of `g` applied to each node.
    pub fn integrate(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        let h = self.spacing();
        let n = self.nodes;
        let inner: f64 = (1..n - 1).map(|i| g(self.node(i))).sum();
        h * (inner + 0.5 * (g(self.node(0)) + g(self.node(n - 1))))
    }

    pub fn integral(&self, k: usize) -> f64 {
        self.integrate(|c| c[k])
    }

    /// Trapezoidal integral of component `k` over `x ≥ x0`.
    pub fn integral_from(&self, k: usize, x0: f64) -> f64 {
        let h = self.spacing();
        let mut total = 0.0;
        for i in 0..self.nodes - 1 {
            let (a, b) = (self.x(i), self.x(i + 1));
            if b <= x0 {
                continue;
            }
            let (fa, fb) = (self.value(i, k), self.value(i + 1, k));
            if a >= x0 {
                total += 0.5 * h * (fa + fb);
            } else {
                let t = (x0 - a) / h;
                let f0 = fa + t * (fb - fa);
                total += 0.5 * (b - x0) * (f0 + fb);
            }
        }
        total
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn apply_dirichlet(&mut self) {
        if let Boundary::Dirichlet { left, right } = &self.boundary {
            let (m, n) = (self.components, self.nodes);
            self.values[..m].copy_from_slice(left);
            self.values[(n - 1) * m..].copy_from_slice(right);
        }
    }

    pub(crate) fn is_dirichlet(&self) -> bool {
        matches!(self.boundary, Boundary::Dirichlet { .. })
    }

    /// Clamps negative entries of the listed components to zero and returns
    /// the removed mass `h·Σ|negative part|`.
    pub(crate) fn clamp_nonnegative(&mut self, components: std::ops::Range<usize>) -> f64 {
        let h = self.spacing();
        let m = self.components;
        let mut removed = 0.0;
        for i in 0..self.nodes {
            for k in components.clone() {
                let v = &mut self.values[i * m + k];
                if *v < 0.0 {
                    removed -= *v;
                    *v = 0.0;
                }
            }
        }
        removed * h
    }
}

/// Snapshot times in `(t₀, T]`, strictly increasing, ending at `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub final_time: f64,
    pub snapshot_times: Vec<f64>,
}

impl Schedule {
    /// Adds `T` when missing.
    pub fn new(final_time: f64, mut snapshot_times: Vec<f64>) -> Result<Self> {
        if !(final_time.is_finite() && final_time > 0.0) {
            return Err(Error::validation("T", format!("final time must be positive, got {final_time}")));
        }
        if snapshot_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::validation("snapshots", "snapshot times must be strictly increasing"));
        }
        if let Some(&t) = snapshot_times.iter().find(|&&t| !(t > 0.0 && t <= final_time)) {
            return Err(Error::validation("snapshots", format!("snapshot time {t} outside (0, T]")));
        }
        if snapshot_times.last() != Some(&final_time) {
            snapshot_times.push(final_time);
        }
        Ok(Self {
            final_time,
            snapshot_times,
        })
    }

    /// `count` equally spaced snapshots ending at `T`.
    pub fn uniform(final_time: f64, count: usize) -> Result<Self> {
        let count = count.max(1);
        Self::new(
            final_time,
            (1..=count).map(|j| final_time * j as f64 / count as f64).collect(),
        )
    }
}

/// Step-size policy shared by the simulators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    /// Fraction of the explicit stability limit actually used.
    pub cfl: f64,
    /// Upper bound on the step (required by the implicit schemes).
    pub max_dt: Option<f64>,
    /// Steps below this are reported as a stability failure.
    pub dt_floor: f64,
    /// Allowed clamped mass relative to the total mass.
    pub clamp_budget: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            cfl: 0.9,
            max_dt: None,
            dt_floor: 1e-12,
            clamp_budget: 1e-10,
        }
    }
}

/// Simulated system, carrying what the conservation ledger needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum TrajectoryKind {
    Pme { m: f64 },
    /// `q` is the stoichiometric matrix, row-major.
    Rds { q: Vec<Vec<f64>> },
    Turbulence,
    GinzburgLandau,
}

/// Tracked zero of `Re A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroTrack {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// Ended before the last snapshot.
    pub terminated: bool,
    /// Ended next to another terminating track (collision/annihilation).
    pub collided: bool,
}

impl ZeroTrack {
    /// Speed at snapshot `j` of the track: centered difference when both
    /// neighbours exist, one-sided otherwise.
    pub fn speed(&self, j: usize) -> Option<f64> {
        let n = self.times.len();
        if n < 2 || j >= n {
            return None;
        }
        let (a, b) = match (j.checked_sub(1), j + 1 < n) {
            (Some(a), true) => (a, j + 1),
            (None, true) => (j, j + 1),
            (Some(a), false) => (a, j),
            (None, false) => return None,
        };
        Some((self.positions[b] - self.positions[a]) / (self.times[b] - self.times[a]))
    }

    /// Index of the snapshot at time `t`, if the track covers it.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }
}

/// Time series of snapshots (the initial state first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub times: Vec<f64>,
    pub snapshots: Vec<Field1D>,
    pub steps: usize,
    /// Total mass removed by nonnegativity clamping.
    pub clamped_mass: f64,
    /// Per-snapshot diagnostic series.
    pub diagnostics: BTreeMap<String, Vec<f64>>,
    pub zero_tracks: Vec<ZeroTrack>,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub(crate) fn start(kind: TrajectoryKind, initial: &Field1D) -> Self {
        Self {
            kind,
            times: vec![initial.time],
            snapshots: vec![initial.clone()],
            steps: 0,
            clamped_mass: 0.0,
            diagnostics: BTreeMap::new(),
            zero_tracks: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, field: &Field1D) {
        self.times.push(field.time);
        self.snapshots.push(field.clone());
    }

    pub fn last(&self) -> &Field1D {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    /// Snapshot whose time is closest to `t`.
    pub fn snapshot_near(&self, t: f64) -> &Field1D {
        let j = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(j, _)| j)
            .unwrap_or(0);
        &self.snapshots[j]
    }
}

/// Advances `field` through every snapshot time of `schedule`.
///
/// `step(field, remaining)` performs one step of size at most `remaining`
/// and returns the size taken.
pub(crate) fn drive(
    field: &mut Field1D,
    schedule: &Schedule,
    traj: &mut Trajectory,
    mut step: impl FnMut(&mut Field1D, f64) -> Result<f64>,
    mut on_snapshot: impl FnMut(&Field1D, &mut Trajectory),
) -> Result<()> {
    if schedule.snapshot_times[0] <= field.time {
        return Err(Error::validation("snapshots", "snapshot times must exceed the initial time"));
    }
    on_snapshot(field, traj);
    for &target in &schedule.snapshot_times {
        loop {
            let remaining = target - field.time;
            if remaining <= 1e-12 * target.abs().max(1.0) {
                break;
            }
            let dt = step(field, remaining)?;
            traj.steps += 1;
            if dt >= remaining {
                field.time = target;
                break;
            }
            field.time += dt;
        }
        field.time = target;
        traj.record(field);
        on_snapshot(field, traj);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_and_integrals() {
        let f = Field1D::from_fn(1.0, 5, 1, |x| vec![x * x], Boundary::NeumannZero).unwrap();
        assert_eq!(f.xs(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!((f.integral(0) - 0.75).abs() < 1e-15);
        assert!((f.integral_from(0, 0.0) - 0.375).abs() < 1e-15);
        assert!((f.integral_from(0, 0.25) - (0.375 - 0.25 * 0.125 / 2.0)).abs() < 1e-15);
        assert_eq!(f.interpolate(0, 0.25), Some(0.125));
        assert_eq!(f.interpolate(0, 1.5), None);
    }

    #[test]
    fn dirichlet_values_are_imposed() {
        let f = Field1D::from_fn(
            2.0,
            4,
            2,
            |_| vec![0.0, 0.0],
            Boundary::Dirichlet {
                left: vec![1.0, 2.0],
                right: vec![3.0, 4.0],
            },
        )
        .unwrap();
        assert_eq!(f.node(0), &[1.0, 2.0]);
        assert_eq!(f.node(3), &[3.0, 4.0]);
    }

    #[test]
    fn schedule_validation() {
        assert_eq!(Schedule::new(2.0, vec![1.0]).unwrap().snapshot_times, vec![1.0, 2.0]);
        assert!(Schedule::new(2.0, vec![1.0, 1.0]).is_err());
        assert!(Schedule::new(2.0, vec![3.0]).is_err());
        assert!(Schedule::new(-1.0, vec![]).is_err());
        assert_eq!(Schedule::uniform(1.0, 4).unwrap().snapshot_times.len(), 4);
    }

    #[test]
    fn track_speeds() {
        let t = ZeroTrack {
            times: vec![0.0, 1.0, 2.0],
            positions: vec![0.0, 1.0, 4.0],
            terminated: false,
            collided: false,
        };
        assert_eq!(t.speed(1), Some(2.0));
        assert_eq!(t.speed(0), Some(1.0));
        assert_eq!(t.speed(2), Some(3.0));
        assert_eq!(t.index_at(2.0), Some(2));
    }
}
