//! Mass-action reaction networks in detailed balance.
//!
//! A network carries its reversible reactions, the stoichiometric map `Q`
//! onto conserved quantities `u = Q c`, and the reduction map `Ψ` that
//! parametrizes the equilibrium manifold `{R(c) = 0}` by `u`. Combined with a
//! diagonal diffusion matrix `D` it yields the effective (reduced) diffusion
//! flux `A(u) = Q D Ψ(u)`.
//!
//! Sign convention: each reaction is written `forward ⇌ backward` and
//! contributes `κ (c^backward − c^forward) · (forward − backward)` to `R(c)`,
//! so `γX₁ ⇌ βX₂` gives `κ (c₂^β − c₁^γ) (γ, −β)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One reversible mass-action reaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
    pub rate: f64,
}

impl Reaction {
    /// `forward − backward`, the direction along which the multiplier of this
    /// reaction acts.
    pub fn direction(&self) -> Vec<f64> {
        self.forward
            .iter()
            .zip(&self.backward)
            .map(|(a, b)| a - b)
            .collect()
    }

    /// Net flux `κ (c^backward − c^forward)`.
    pub fn flux(&self, c: &[f64]) -> f64 {
        self.rate * (monomial(c, &self.backward) - monomial(c, &self.forward))
    }
}

fn monomial(c: &[f64], exponents: &[f64]) -> f64 {
    c.iter().zip(exponents).fold(1.0, |acc, (&ci, &e)| {
        if e == 0.0 {
            acc
        } else if e == e.trunc() && e.abs() < 16.0 {
            acc * ci.powi(e as i32)
        } else {
            acc * ci.powf(e)
        }
    })
}

/// Which closed form (if any) the network admits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetworkKind {
    /// `γX₁ ⇌ βX₂`
    TwoSpecies { beta: f64, gamma: f64 },
    /// `X₁ + X₂ ⇌ X₃`
    ThreeSpeciesBinary,
    /// `2X₁ ⇌ X₂`, `X₂ ⇌ X₃`
    TwoReactionChain,
    Generic,
}

/// Linear map `Q` (shape `j* × i*`) onto conserved quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct StoichiometricMap {
    q: DMatrix<f64>,
}

impl StoichiometricMap {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() == 0 || q.ncols() == 0 {
            return Err(Error::validation("Q", "empty stoichiometric matrix"));
        }
        let rank = q.clone().svd(false, false).rank(1e-10);
        if rank != q.nrows() {
            return Err(Error::validation(
                "Q",
                format!("rank {rank} but {} rows; Q must be surjective", q.nrows()),
            ));
        }
        Ok(Self { q })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn conserved_count(&self) -> usize {
        self.q.nrows()
    }

    pub fn species_count(&self) -> usize {
        self.q.ncols()
    }

    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        (0..self.q.nrows())
            .map(|j| (0..self.q.ncols()).map(|i| self.q[(j, i)] * c[i]).sum())
            .collect()
    }
}

/// Positive diagonal diffusion matrix `diag(d₁, …, d_{i*})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiffusionMatrix(Vec<f64>);

impl DiffusionMatrix {
    pub fn new(diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::validation("diffusion", "no diffusion constants given"));
        }
        if let Some((j, d)) = diagonal
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d > 0.0))
        {
            return Err(Error::validation(
                format!("diffusion[{j}]"),
                format!("diffusion constants must be positive, got {d}"),
            ));
        }
        Ok(Self(diagonal))
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

impl TryFrom<Vec<f64>> for DiffusionMatrix {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DiffusionMatrix> for Vec<f64> {
    fn from(d: DiffusionMatrix) -> Self {
        d.0
    }
}

/// Reversible mass-action network with its conservation structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: usize,
    reactions: Vec<Reaction>,
    stoichiometry: StoichiometricMap,
    kind: NetworkKind,
}

impl ReactionNetwork {
    /// `γX₁ ⇌ βX₂` with `Q = (β γ)`.
    pub fn two_species(beta: f64, gamma: f64, kappa: f64) -> Result<Self> {
        for (name, v) in [("beta", beta), ("gamma", gamma), ("kappa", kappa)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        let reactions = vec![Reaction {
            forward: vec![gamma, 0.0],
            backward: vec![0.0, beta],
            rate: kappa,
        }];
        let q = DMatrix::from_row_slice(1, 2, &[beta, gamma]);
        Ok(Self {
            species: 2,
            reactions,
            stoichiometry: StoichiometricMap::new(q)?,
            kind: NetworkKind::TwoSpecies { beta, gamma },
        })
    }

    /// `X₁ + X₂ ⇌ X₃` with `Q = [[1,0,1],[0,1,1]]`.
    pub fn three_species_binary(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::validation("kappa", format!("must be positive, got {kappa}")));
        }
        let reactions = vec![Reaction {
            forward: vec![1.0, 1.0, 0.0],
            backward: vec![0.0, 0.0, 1.0],
            rate: kappa,
        }];
        let q = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        Ok(Self {
            species: 3,
            reactions,
            stoichiometry: StoichiometricMap::new(q)?,
            kind: NetworkKind::ThreeSpeciesBinary,
        })
    }

    /// `2X₁ ⇌ X₂` (rate `k1`) and `X₂ ⇌ X₃` (rate `k2`) with `Q = (1 2 2)`.
    pub fn two_reaction_chain(k1: f64, k2: f64) -> Result<Self> {
        for (name, v) in [("k1", k1), ("k2", k2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        let reactions = vec![
            Reaction {
                forward: vec![2.0, 0.0, 0.0],
                backward: vec![0.0, 1.0, 0.0],
                rate: k1,
            },
            Reaction {
                forward: vec![0.0, 1.0, 0.0],
                backward: vec![0.0, 0.0, 1.0],
                rate: k2,
            },
        ];
        let q = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 2.0]);
        Ok(Self {
            species: 3,
            reactions,
            stoichiometry: StoichiometricMap::new(q)?,
            kind: NetworkKind::TwoReactionChain,
        })
    }

    /// Arbitrary network; `q` must be surjective with the reaction directions
    /// spanning its kernel.
    pub fn generic(species: usize, reactions: Vec<Reaction>, q: DMatrix<f64>) -> Result<Self> {
        if species == 0 {
            return Err(Error::validation("species_count", "must be positive"));
        }
        if q.ncols() != species {
            return Err(Error::validation(
                "Q",
                format!("has {} columns, expected {species}", q.ncols()),
            ));
        }
        for (r, reaction) in reactions.iter().enumerate() {
            if reaction.forward.len() != species || reaction.backward.len() != species {
                return Err(Error::validation(
                    format!("reactions[{r}]"),
                    "exponent vectors must have one entry per species",
                ));
            }
            if reaction
                .forward
                .iter()
                .chain(&reaction.backward)
                .any(|e| !(e.is_finite() && *e >= 0.0))
            {
                return Err(Error::validation(
                    format!("reactions[{r}]"),
                    "exponents must be nonnegative",
                ));
            }
            if !(reaction.rate.is_finite() && reaction.rate > 0.0) {
                return Err(Error::validation(
                    format!("reactions[{r}].rate"),
                    "must be positive",
                ));
            }
        }
        let stoichiometry = StoichiometricMap::new(q)?;
        let network = Self {
            species,
            reactions,
            stoichiometry,
            kind: NetworkKind::Generic,
        };
        let n = network.direction_matrix();
        let qn = network.stoichiometry.matrix() * &n;
        if qn.amax() > 1e-12 * (1.0 + n.amax()) {
            return Err(Error::validation("Q", "Q annihilates no reaction direction"));
        }
        let rank = if n.ncols() == 0 {
            0
        } else {
            n.clone().svd(false, false).rank(1e-10)
        };
        if rank + network.stoichiometry.conserved_count() != species {
            return Err(Error::validation(
                "reactions",
                "reaction directions do not span the kernel of Q",
            ));
        }
        Ok(network)
    }

    pub fn species_count(&self) -> usize {
        self.species
    }

    pub fn conserved_count(&self) -> usize {
        self.stoichiometry.conserved_count()
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn stoichiometry(&self) -> &StoichiometricMap {
        &self.stoichiometry
    }

    /// Columns are the reaction directions `forward − backward`.
    pub fn direction_matrix(&self) -> DMatrix<f64> {
        let mut n = DMatrix::zeros(self.species, self.reactions.len());
        for (r, reaction) in self.reactions.iter().enumerate() {
            for (i, v) in reaction.direction().into_iter().enumerate() {
                n[(i, r)] = v;
            }
        }
        n
    }

    /// Largest rate constant.
    pub fn max_rate(&self) -> f64 {
        self.reactions.iter().map(|r| r.rate).fold(0.0, f64::max)
    }

    /// Same network with every rate constant multiplied by `factor`.
    pub fn with_rates_scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.reactions {
            r.rate *= factor;
        }
        out
    }

    /// Mass-action rate vector `R(c)`.
    pub fn eval_rate(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.check_concentration(c)?;
        Ok(self.rate_unchecked(c))
    }

    pub(crate) fn rate_unchecked(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.species];
        for reaction in &self.reactions {
            let flux = reaction.flux(c);
            for (i, (a, b)) in reaction.forward.iter().zip(&reaction.backward).enumerate() {
                out[i] += flux * (a - b);
            }
        }
        out
    }

    /// Jacobian `DR(c)` (row-major `i* × i*`).
    pub(crate) fn rate_jacobian(&self, c: &[f64]) -> DMatrix<f64> {
        let n = self.species;
        let mut jac = DMatrix::zeros(n, n);
        for reaction in &self.reactions {
            let dir = reaction.direction();
            for k in 0..n {
                let d_back = monomial_derivative(c, &reaction.backward, k);
                let d_fwd = monomial_derivative(c, &reaction.forward, k);
                let dflux = reaction.rate * (d_back - d_fwd);
                for i in 0..n {
                    jac[(i, k)] += dir[i] * dflux;
                }
            }
        }
        jac
    }

    fn check_concentration(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.species {
            return Err(Error::domain(format!(
                "concentration has {} entries, network has {} species",
                c.len(),
                self.species
            )));
        }
        if let Some((i, v)) = c.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::domain(format!("concentration c[{i}] = {v} is negative")));
        }
        Ok(())
    }

    fn check_conserved(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.conserved_count() {
            return Err(Error::domain(format!(
                "conserved vector has {} entries, expected {}",
                u.len(),
                self.conserved_count()
            )));
        }
        if let Some((j, v)) = u.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::domain(format!("u[{j}] = {v} lies outside the admissible set")));
        }
        Ok(())
    }

    /// The reduction map `Ψ` for this network (closed form when available).
    pub fn reduction(&self) -> ReductionMap<'_> {
        let kind = match self.kind {
            NetworkKind::TwoSpecies { beta, gamma } => ReductionKind::TwoSpecies { beta, gamma },
            NetworkKind::ThreeSpeciesBinary => ReductionKind::ThreeSpeciesBinary,
            NetworkKind::TwoReactionChain => ReductionKind::TwoReactionChain,
            NetworkKind::Generic => ReductionKind::GenericNewton,
        };
        ReductionMap { network: self, kind }
    }

    /// The reduction map forced onto the generic Newton solver.
    pub fn generic_reduction(&self) -> ReductionMap<'_> {
        ReductionMap {
            network: self,
            kind: ReductionKind::GenericNewton,
        }
    }

    /// `Ψ(u)`: the equilibrium with conserved quantities `u`.
    pub fn reduce_psi(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.reduction().eval(u)
    }
}

fn monomial_derivative(c: &[f64], exponents: &[f64], k: usize) -> f64 {
    let e = exponents[k];
    if e == 0.0 {
        return 0.0;
    }
    let mut acc = e * if e == 1.0 { 1.0 } else { c[k].powf(e - 1.0) };
    for (i, (&ci, &ei)) in c.iter().zip(exponents).enumerate() {
        if i != k && ei != 0.0 {
            acc *= ci.powf(ei);
        }
    }
    acc
}

/// Variant tag of a reduction map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReductionKind {
    TwoSpecies { beta: f64, gamma: f64 },
    ThreeSpeciesBinary,
    TwoReactionChain,
    GenericNewton,
}

/// Parametrization `u ↦ Ψ(u)` of the equilibrium manifold, with derivative.
#[derive(Debug, Clone, Copy)]
pub struct ReductionMap<'a> {
    network: &'a ReactionNetwork,
    kind: ReductionKind,
}

impl<'a> ReductionMap<'a> {
    pub fn kind(&self) -> ReductionKind {
        self.kind
    }

    pub fn network(&self) -> &'a ReactionNetwork {
        self.network
    }

    pub fn eval(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.network.check_conserved(u)?;
        if u.iter().all(|&v| v == 0.0) {
            return Ok(vec![0.0; self.network.species]);
        }
        Ok(match self.kind {
            ReductionKind::TwoSpecies { beta, gamma } => two_species_psi(beta, gamma, u[0]).to_vec(),
            ReductionKind::ThreeSpeciesBinary => three_species_psi(u[0], u[1]).to_vec(),
            ReductionKind::TwoReactionChain => chain_psi(u[0]).to_vec(),
            ReductionKind::GenericNewton => generic_psi(self.network, u)?,
        })
    }

    /// `DΨ(u)` as an `i* × j*` matrix.
    pub fn derivative(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.network.species;
        let m = self.network.conserved_count();
        match self.kind {
            ReductionKind::TwoSpecies { beta, gamma } => {
                self.network.check_conserved(u)?;
                let c = two_species_psi(beta, gamma, u[0]);
                let (d1, d2) = two_species_psi_derivative(beta, gamma, c);
                Ok(DMatrix::from_column_slice(2, 1, &[d1, d2]))
            }
            ReductionKind::ThreeSpeciesBinary => {
                if u.len() != 2 {
                    return Err(Error::domain("three-species network expects two conserved values"));
                }
                let (s1, s2) = s_gradient(u[0], u[1]);
                Ok(DMatrix::from_row_slice(
                    3,
                    2,
                    &[
                        0.5 * (1.0 + s1),
                        0.5 * (s2 - 1.0),
                        0.5 * (s1 - 1.0),
                        0.5 * (1.0 + s2),
                        0.5 * (1.0 - s1),
                        0.5 * (1.0 - s2),
                    ],
                ))
            }
            ReductionKind::TwoReactionChain => {
                self.network.check_conserved(u)?;
                let ds = 1.0 / (1.0 + 16.0 * u[0]).sqrt();
                Ok(DMatrix::from_column_slice(
                    3,
                    1,
                    &[ds, 0.25 * (1.0 - ds), 0.25 * (1.0 - ds)],
                ))
            }
            ReductionKind::GenericNewton => {
                let c = self.eval(u)?;
                if c.iter().any(|&v| v <= 0.0) {
                    return Err(Error::domain(
                        "generic DΨ is only available in the interior of the admissible set",
                    ));
                }
                // Differentiate {Q c = u, Nᵀ log c = 0}.
                let q = self.network.stoichiometry.matrix();
                let dirs = self.network.direction_matrix();
                let r = dirs.ncols();
                let mut lhs = DMatrix::zeros(m + r, n);
                for j in 0..m {
                    for i in 0..n {
                        lhs[(j, i)] = q[(j, i)];
                    }
                }
                for k in 0..r {
                    for i in 0..n {
                        lhs[(m + k, i)] = dirs[(i, k)] / c[i];
                    }
                }
                let mut rhs = DMatrix::zeros(m + r, m);
                for j in 0..m {
                    rhs[(j, j)] = 1.0;
                }
                lhs.svd(true, true)
                    .solve(&rhs, 1e-14)
                    .map_err(|e| Error::domain(format!("singular equilibrium Jacobian: {e}")))
            }
        }
    }
}

/// Closed-form or scalar-solve `Ψ` for `γX₁ ⇌ βX₂`: `c₁^γ = c₂^β`, `βc₁ + γc₂ = u`.
pub(crate) fn two_species_psi(beta: f64, gamma: f64, u: f64) -> [f64; 2] {
    if u <= 0.0 {
        return [0.0, 0.0];
    }
    if beta == gamma {
        let c = u / (beta + gamma);
        return [c, c];
    }
    if beta == 1.0 && gamma == 2.0 {
        let root = (1.0 + 8.0 * u).sqrt();
        // c₁ = (√(1+8u) − 1)/4 written without cancellation; c₂ = c₁².
        let c1 = 2.0 * u / (root + 1.0);
        return [c1, c1 * c1];
    }
    // c₂ = c₁^p with p = γ/β; solve βc₁ + γc₁^p = u on [0, u/β].
    let p = gamma / beta;
    let f = |c1: f64| beta * c1 + gamma * c1.powf(p) - u;
    let df = |c1: f64| beta + gamma * p * c1.powf(p - 1.0);
    let (mut lo, mut hi) = (0.0_f64, u / beta);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            break;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = df(x);
        let mut next = x - fx / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            x = next;
            break;
        }
        x = next;
    }
    [x, x.powf(p)]
}

fn two_species_psi_derivative(beta: f64, gamma: f64, c: [f64; 2]) -> (f64, f64) {
    let denom = beta * beta * c[0] + gamma * gamma * c[1];
    if denom > 0.0 {
        (beta * c[0] / denom, gamma * c[1] / denom)
    } else if gamma > beta {
        (1.0 / beta, 0.0)
    } else if gamma < beta {
        (0.0, 1.0 / gamma)
    } else {
        (0.5 / beta, 0.5 / gamma)
    }
}

/// `s(u) = √((1+u₁+u₂)² − 4u₁u₂)`, extended by `1 + u₁ + u₂` when either
/// argument is nonpositive.
pub fn s_function(u1: f64, u2: f64) -> f64 {
    if u1 <= 0.0 || u2 <= 0.0 {
        1.0 + u1 + u2
    } else {
        // (1+u₁+u₂)² − 4u₁u₂ = (1+u₂−u₁)² + 4u₁, which is free of cancellation.
        let b = 1.0 + u2 - u1;
        (b * b + 4.0 * u1).sqrt()
    }
}

/// Partial derivatives `(s₁, s₂)` of the extended `s`.
pub fn s_gradient(u1: f64, u2: f64) -> (f64, f64) {
    if u1 <= 0.0 || u2 <= 0.0 {
        (1.0, 1.0)
    } else {
        let s = s_function(u1, u2);
        ((1.0 + u1 - u2) / s, (1.0 + u2 - u1) / s)
    }
}

pub(crate) fn three_species_psi(u1: f64, u2: f64) -> [f64; 3] {
    let s = s_function(u1, u2);
    // c₁ solves c₁² + (1 − u₁ + u₂)c₁ − u₁ = 0; pick the cancellation-free branch.
    let root = |own: f64, other: f64| {
        let b = 1.0 - own + other;
        if own <= 0.0 {
            0.0
        } else if b >= 0.0 {
            2.0 * own / (b + s)
        } else {
            0.5 * (s - b)
        }
    };
    let c1 = root(u1, u2);
    let c2 = root(u2, u1);
    [c1, c2, c1 * c2]
}

/// `σ(u) = (√(1+16u) − 1)/8`.
pub fn sigma(u: f64) -> f64 {
    2.0 * u / (1.0 + (1.0 + 16.0 * u).sqrt())
}

pub(crate) fn chain_psi(u: f64) -> [f64; 3] {
    let s = sigma(u);
    let c23 = s * s;
    [s, c23, c23]
}

/// Damped Gauss–Newton in log-concentrations on
/// `{Q c − u = 0, Nᵀ log c = 0}`.
fn generic_psi(network: &ReactionNetwork, u: &[f64]) -> Result<Vec<f64>> {
    let q = network.stoichiometry.matrix();
    let n = network.species;
    let m = q.nrows();
    let dirs = network.direction_matrix();

    // Species forced to zero by a vanishing conserved quantity.
    let nonneg_q = q.iter().all(|&v| v >= 0.0);
    let mut active = vec![true; n];
    let mut active_rows = vec![true; m];
    if nonneg_q {
        for j in 0..m {
            if u[j] == 0.0 {
                active_rows[j] = false;
                for i in 0..n {
                    if q[(j, i)] > 0.0 {
                        active[i] = false;
                    }
                }
            }
        }
    }
    let species: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    let rows: Vec<usize> = (0..m).filter(|&j| active_rows[j]).collect();
    let reactions: Vec<usize> = (0..dirs.ncols())
        .filter(|&r| (0..n).all(|i| active[i] || dirs[(i, r)] == 0.0))
        .collect();
    let mut c = vec![0.0; n];
    if species.is_empty() {
        return Ok(c);
    }

    // Initial guess: spread each u_j evenly over the species it counts.
    let mut z: Vec<f64> = species
        .iter()
        .map(|&i| {
            let (mut acc, mut cnt) = (0.0, 0usize);
            for &j in &rows {
                if q[(j, i)] > 0.0 {
                    let row_sum: f64 = (0..n).filter(|&k| active[k]).map(|k| q[(j, k)]).sum();
                    acc += u[j] / row_sum;
                    cnt += 1;
                }
            }
            if cnt == 0 || acc <= 0.0 {
                0.0
            } else {
                (acc / cnt as f64).ln()
            }
        })
        .collect();

    let scale: f64 = rows.iter().map(|&j| u[j].abs()).fold(0.0, f64::max).max(1e-300);
    let residual = |z: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len() + reactions.len());
        for &j in &rows {
            let s: f64 = species
                .iter()
                .zip(z)
                .map(|(&i, &zi)| q[(j, i)] * zi.exp())
                .sum();
            out.push((s - u[j]) / scale);
        }
        for &r in &reactions {
            out.push(species.iter().zip(z).map(|(&i, &zi)| dirs[(i, r)] * zi).sum());
        }
        out
    };
    let norm = |v: &[f64]| v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));

    let mut res = residual(&z);
    let mut history = vec![norm(&res)];
    for _ in 0..100 {
        if norm(&res) < 1e-14 {
            break;
        }
        let mut jac = DMatrix::zeros(res.len(), species.len());
        for (a, &j) in rows.iter().enumerate() {
            for (b, &i) in species.iter().enumerate() {
                jac[(a, b)] = q[(j, i)] * z[b].exp() / scale;
            }
        }
        for (a, &r) in reactions.iter().enumerate() {
            for (b, &i) in species.iter().enumerate() {
                jac[(rows.len() + a, b)] = dirs[(i, r)];
            }
        }
        let rhs = DVector::from_iterator(res.len(), res.iter().map(|v| -v));
        let step = jac
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::solver(format!("generic Ψ: {e}"), history.clone()))?;
        let current = norm(&res);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            // Cap the log-step so exp() cannot overflow.
            let trial: Vec<f64> = z
                .iter()
                .zip(step.iter())
                .map(|(zi, si)| zi + lambda * si.clamp(-20.0, 20.0))
                .collect();
            let trial_res = residual(&trial);
            if norm(&trial_res) < current || norm(&trial_res) < 1e-14 {
                z = trial;
                res = trial_res;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        history.push(norm(&res));
        if !accepted {
            break;
        }
    }
    let final_norm = norm(&res);
    if !(final_norm < 1e-11) {
        return Err(Error::solver(
            format!("generic Ψ did not converge for u = {u:?}"),
            history,
        ));
    }
    for (&i, zi) in species.iter().zip(&z) {
        c[i] = zi.exp();
    }
    Ok(c)
}

/// Effective diffusion `A(u) = Q D Ψ(u)` of a network.
#[derive(Debug, Clone)]
pub struct EffectiveDiffusion {
    network: ReactionNetwork,
    diffusion: DiffusionMatrix,
}

impl EffectiveDiffusion {
    pub fn new(network: ReactionNetwork, diffusion: DiffusionMatrix) -> Result<Self> {
        if diffusion.len() != network.species_count() {
            return Err(Error::validation(
                "diffusion",
                format!(
                    "{} constants given for {} species",
                    diffusion.len(),
                    network.species_count()
                ),
            ));
        }
        Ok(Self { network, diffusion })
    }

    pub fn network(&self) -> &ReactionNetwork {
        &self.network
    }

    pub fn diffusion(&self) -> &DiffusionMatrix {
        &self.diffusion
    }

    /// `A(u)`. The three-species network uses the globally extended `s`, so
    /// its value is defined on all of ℝ².
    pub fn value(&self, u: &[f64]) -> Result<Vec<f64>> {
        let d = self.diffusion.diagonal();
        match self.network.kind {
            NetworkKind::ThreeSpeciesBinary => {
                if u.len() != 2 {
                    return Err(Error::domain("three-species network expects two conserved values"));
                }
                let s = s_function(u[0], u[1]);
                Ok(vec![
                    0.5 * ((d[0] + d[2]) * u[0] + (d[2] - d[0]) * (1.0 + u[1] - s)),
                    0.5 * ((d[1] + d[2]) * u[1] + (d[2] - d[1]) * (1.0 + u[0] - s)),
                ])
            }
            _ => {
                let c = self.network.reduce_psi(u)?;
                let dc: Vec<f64> = c.iter().zip(d).map(|(a, b)| a * b).collect();
                Ok(self.network.stoichiometry.apply(&dc))
            }
        }
    }

    /// `DA(u) = Q D DΨ(u)`.
    pub fn jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let dpsi = self.network.reduction().derivative(u)?;
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(self.diffusion.diagonal()));
        Ok(self.network.stoichiometry.matrix() * d * dpsi)
    }

    /// `(A(u), DA(u))`.
    pub fn evaluate(&self, u: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        Ok((self.value(u)?, self.jacobian(u)?))
    }
}

/// `(A(u), DA(u))` for `network` with diffusion `diffusion`.
pub fn effective_diffusion(
    network: &ReactionNetwork,
    diffusion: &DiffusionMatrix,
    u: &[f64],
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    EffectiveDiffusion::new(network.clone(), diffusion.clone())?.evaluate(u)
}

/// Axis-aligned box in the space of conserved quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Result of a sampled monotonicity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCertificate {
    /// Minimum over the samples of the smallest eigenvalue of `½(DA + DAᵀ)`.
    pub a_lo: f64,
    /// Sample point attaining `a_lo`.
    pub witness: Vec<f64>,
    pub samples_per_axis: usize,
    pub points_evaluated: usize,
    pub sample_box: SampleBox,
}

impl MonotonicityCertificate {
    pub fn certifies_monotone(&self) -> bool {
        self.a_lo > 0.0
    }
}

/// Smallest eigenvalue of the symmetric part of a square matrix.
pub fn min_symmetric_eigenvalue(jac: &DMatrix<f64>) -> f64 {
    let sym = (jac + jac.transpose()) * 0.5;
    if sym.nrows() == 1 {
        return sym[(0, 0)];
    }
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Samples `DA` on a tensor grid with `samples` points per axis and reports
/// the smallest symmetric-part eigenvalue.
pub fn monotonicity_certificate(
    network: &ReactionNetwork,
    diffusion: &DiffusionMatrix,
    sample_box: &SampleBox,
    samples: usize,
) -> Result<MonotonicityCertificate> {
    let dim = network.conserved_count();
    if samples == 0 {
        return Err(Error::domain("at least one sample per axis is required"));
    }
    if sample_box.lower.len() != dim || sample_box.upper.len() != dim {
        return Err(Error::domain(format!("box must have dimension {dim}")));
    }
    if sample_box
        .lower
        .iter()
        .zip(&sample_box.upper)
        .any(|(lo, hi)| !(hi >= lo) || !lo.is_finite() || !hi.is_finite())
    {
        return Err(Error::domain("empty sampling box"));
    }
    if sample_box.lower.iter().any(|&v| v < 0.0) {
        return Err(Error::domain("sampling box leaves the admissible set"));
    }
    let flux = EffectiveDiffusion::new(network.clone(), diffusion.clone())?;
    let coord = |axis: usize, k: usize| {
        let (lo, hi) = (sample_box.lower[axis], sample_box.upper[axis]);
        if samples == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * k as f64 / (samples - 1) as f64
        }
    };
    let total = samples.pow(dim as u32);
    let mut best = f64::INFINITY;
    let mut witness = vec![0.0; dim];
    let mut point = vec![0.0; dim];
    for flat in 0..total {
        let mut rest = flat;
        for (axis, p) in point.iter_mut().enumerate() {
            *p = coord(axis, rest % samples);
            rest /= samples;
        }
        let lam = min_symmetric_eigenvalue(&flux.jacobian(&point)?);
        if lam < best {
            best = lam;
            witness.clone_from(&point);
        }
    }
    Ok(MonotonicityCertificate {
        a_lo: best,
        witness,
        samples_per_axis: samples,
        points_evaluated: total,
        sample_box: sample_box.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn rate_examples() {
        let net = ReactionNetwork::two_species(1.0, 2.0, 1.0).unwrap();
        assert!(close(&net.eval_rate(&[0.5, 0.25]).unwrap(), &[0.0, 0.0], 0.0));
        assert!(close(&net.eval_rate(&[1.0, 0.0]).unwrap(), &[-2.0, 1.0], 0.0));
        let three = ReactionNetwork::three_species_binary(1.0).unwrap();
        assert!(close(&three.eval_rate(&[1.0, 2.0, 2.0]).unwrap(), &[0.0; 3], 0.0));
    }

    #[test]
    fn negative_concentration_is_rejected() {
        let net = ReactionNetwork::two_species(1.0, 2.0, 1.0).unwrap();
        assert!(matches!(net.eval_rate(&[-0.1, 1.0]), Err(Error::Domain(_))));
        assert!(matches!(net.reduce_psi(&[-1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn psi_examples() {
        let net = ReactionNetwork::two_species(1.0, 2.0, 1.0).unwrap();
        assert!(close(&net.reduce_psi(&[1.0]).unwrap(), &[0.5, 0.25], 1e-15));
        assert!(close(&net.reduce_psi(&[6.0]).unwrap(), &[1.5, 2.25], 1e-15));
        assert_eq!(net.reduce_psi(&[0.0]).unwrap(), vec![0.0, 0.0]);

        let three = ReactionNetwork::three_species_binary(1.0).unwrap();
        assert!(close(&three.reduce_psi(&[3.0, 4.0]).unwrap(), &[1.0, 2.0, 2.0], 1e-14));
        assert_eq!(three.reduce_psi(&[0.0, 0.0]).unwrap(), vec![0.0; 3]);

        let chain = ReactionNetwork::two_reaction_chain(1.0, 1.0).unwrap();
        assert!(close(&chain.reduce_psi(&[5.0]).unwrap(), &[1.0, 1.0, 1.0], 1e-15));
        assert!((sigma(5.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_species_matches_printed_closed_form() {
        // Ψ = ½(u₁−u₂−1+s, u₂−u₁−1+s, u₁+u₂+1−s)
        for &(u1, u2) in &[(3.0, 4.0), (0.7, 0.2), (6.89, 1.89), (10.0, 0.01)] {
            let s = ((1.0 + u1 + u2) * (1.0_f64 + u1 + u2) - 4.0 * u1 * u2).sqrt();
            let printed = [
                0.5 * (u1 - u2 - 1.0 + s),
                0.5 * (u2 - u1 - 1.0 + s),
                0.5 * (u1 + u2 + 1.0 - s),
            ];
            assert!(close(&three_species_psi(u1, u2), &printed, 1e-12));
        }
    }

    #[test]
    fn two_species_general_exponents_solve_scalar_equation() {
        for &(beta, gamma) in &[(1.0, 3.0), (2.0, 1.0), (1.5, 2.5), (1.0, 2.0)] {
            let net = ReactionNetwork::two_species(beta, gamma, 1.0).unwrap();
            for &u in &[1e-6, 0.3, 1.0, 7.0, 1e3] {
                let c = net.reduce_psi(&[u]).unwrap();
                let q = beta * c[0] + gamma * c[1];
                assert!((q - u).abs() < 1e-12 * (1.0 + u), "Qc = {q}, u = {u}");
                let eq = c[0].powf(gamma) - c[1].powf(beta);
                assert!(eq.abs() < 1e-10 * (1.0 + c[1].powf(beta)));
            }
        }
    }

    #[test]
    fn generic_newton_agrees_with_closed_forms() {
        let nets = [
            (ReactionNetwork::two_species(1.0, 2.0, 1.0).unwrap(), vec![vec![1.0], vec![6.0], vec![0.01]]),
            (
                ReactionNetwork::three_species_binary(1.0).unwrap(),
                vec![vec![3.0, 4.0], vec![0.5, 5.0], vec![6.89, 1.89]],
            ),
            (ReactionNetwork::two_reaction_chain(1.0, 3.0).unwrap(), vec![vec![5.0], vec![0.2], vec![40.0]]),
        ];
        for (net, points) in nets {
            for u in points {
                let closed = net.reduce_psi(&u).unwrap();
                let newton = net.generic_reduction().eval(&u).unwrap();
                assert!(close(&closed, &newton, 1e-10 * (1.0 + u[0])), "{closed:?} vs {newton:?}");
            }
        }
    }

    #[test]
    fn generic_handles_partially_zero_conserved_vector() {
        let three = ReactionNetwork::three_species_binary(1.0).unwrap();
        let c = three.generic_reduction().eval(&[2.0, 0.0]).unwrap();
        assert!(close(&c, &[2.0, 0.0, 0.0], 1e-12));
        assert!(close(&three.reduce_psi(&[2.0, 0.0]).unwrap(), &[2.0, 0.0, 0.0], 1e-14));
    }

    #[test]
    fn generic_network_validation() {
        // Q not annihilating the direction.
        let reactions = vec![Reaction {
            forward: vec![1.0, 0.0],
            backward: vec![0.0, 1.0],
            rate: 1.0,
        }];
        let bad_q = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(ReactionNetwork::generic(2, reactions.clone(), bad_q).is_err());
        let q = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let net = ReactionNetwork::generic(2, reactions, q).unwrap();
        assert_eq!(net.reduction().kind(), ReductionKind::GenericNewton);
        let c = net.reduce_psi(&[3.0]).unwrap();
        assert!(close(&c, &[1.5, 1.5], 1e-12));
    }

    #[test]
    fn effective_diffusion_examples() {
        let d = DiffusionMatrix::new(vec![1.0, 0.5]).unwrap();
        let net = ReactionNetwork::two_species(1.0, 1.0, 1.0).unwrap();
        let (a, da) = effective_diffusion(&net, &d, &[2.0]).unwrap();
        assert!((a[0] - 1.5).abs() < 1e-15);
        assert!((da[(0, 0)] - 0.75).abs() < 1e-15);

        let d3 = DiffusionMatrix::new(vec![0.7; 3]).unwrap();
        let three = ReactionNetwork::three_species_binary(1.0).unwrap();
        for u in [[0.3, 2.0], [5.0, 5.0], [1.0, 0.0]] {
            let (a, _) = effective_diffusion(&three, &d3, &u).unwrap();
            assert!(close(&a, &[0.7 * u[0], 0.7 * u[1]], 1e-12));
        }

        let chain = ReactionNetwork::two_reaction_chain(1.0, 1.0).unwrap();
        let dc = DiffusionMatrix::new(vec![1.0, 1.0, 1.0]).unwrap();
        let (a, _) = effective_diffusion(&chain, &dc, &[5.0]).unwrap();
        assert!((a[0] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn extended_three_species_flux_is_continuous_across_axes() {
        let d = DiffusionMatrix::new(vec![2.0, 3.0, 10.0]).unwrap();
        let flux = EffectiveDiffusion::new(ReactionNetwork::three_species_binary(1.0).unwrap(), d).unwrap();
        let inside = flux.value(&[1e-12, 2.0]).unwrap();
        let outside = flux.value(&[-1e-12, 2.0]).unwrap();
        assert!(close(&inside, &outside, 1e-10));
        // On the axis u₁ ≤ 0 the first component reduces to d₁u₁.
        let a = flux.value(&[-0.5, 1.0]).unwrap();
        assert!((a[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn diffusion_matrix_rejects_nonpositive() {
        assert!(DiffusionMatrix::new(vec![1.0, 0.0]).is_err());
        assert!(DiffusionMatrix::new(vec![-1.0]).is_err());
        assert!(DiffusionMatrix::new(vec![]).is_err());
    }

    #[test]
    fn certificate_examples() {
        let three = ReactionNetwork::three_species_binary(1.0).unwrap();
        let bx = SampleBox {
            lower: vec![0.1, 0.1],
            upper: vec![6.0, 6.0],
        };
        let good = DiffusionMatrix::new(vec![2.0, 2.0, 10.0]).unwrap();
        let cert = monotonicity_certificate(&three, &good, &bx, 40).unwrap();
        assert!(cert.certifies_monotone(), "a_lo = {}", cert.a_lo);

        // The violation for d₁ > (3+√8)d₃ only shows up where u₁ ≫ u₂.
        let bad = DiffusionMatrix::new(vec![60.0, 2.0, 10.0]).unwrap();
        let near = monotonicity_certificate(&three, &bad, &bx, 60).unwrap();
        assert!(near.a_lo > 0.0);
        let wide = SampleBox {
            lower: vec![0.0, 0.0],
            upper: vec![1000.0, 1000.0],
        };
        let cert = monotonicity_certificate(&three, &bad, &wide, 101).unwrap();
        assert!(cert.a_lo < 0.0, "a_lo = {}", cert.a_lo);
        assert!(cert.witness[0] > 10.0 * cert.witness[1]);

        let two = ReactionNetwork::two_species(1.0, 2.0, 1.0).unwrap();
        let d = DiffusionMatrix::new(vec![1.0, 0.5]).unwrap();
        let bx1 = SampleBox {
            lower: vec![0.0],
            upper: vec![10.0],
        };
        let cert = monotonicity_certificate(&two, &d, &bx1, 101).unwrap();
        assert!(cert.a_lo >= 0.5 - 1e-12);

        let empty = SampleBox {
            lower: vec![1.0, 1.0],
            upper: vec![0.5, 2.0],
        };
        assert!(monotonicity_certificate(&three, &good, &empty, 4).is_err());
    }
}
