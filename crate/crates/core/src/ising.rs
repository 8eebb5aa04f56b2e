//! The doublet Hamiltonian and its relaxation to a linear system.
//!
//! With weights `w_ij` on adjacent doublet pairs the energy is
//!
//! ```text
//! H(S) = - Σ_pairs 2 w_ij S_i S_j
//!        + α Σ_bifurcations S_i S_j
//!        + β/2 (Σ S_i - N_hits)²
//!        + γ/2 Σ S_i²
//!        + δ/2 Σ (1 - 2 S_i)²
//! ```
//!
//! which is the quadratic form `½ Sᵀ A S - bᵀ S + H(0)`. [`assemble`] returns
//! the Hessian `A` and `b = -∇H(0)`, so that stationarity is `A S = b`.
//! With α = β = 0 this gives `A = (γ + 4δ) I - 2F` and `b = 2δ (1, …, 1)`.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doublets::{Doublet, DoubletGraph};
use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, MAX_DENSE_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub epsilon: f64,
    pub lambda: u32,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub threshold: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            epsilon: 1e-5,
            lambda: 1,
            alpha: 0.0,
            beta: 0.0,
            gamma: 2.0,
            delta: 1.0,
            threshold: 0.45,
        }
    }
}

impl Hyperparams {
    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Hyperparams { epsilon, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config("epsilon must be non-negative".into()));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(Error::Config("alpha and beta must be non-negative".into()));
        }
        if ![self.gamma, self.delta, self.threshold]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::Config(
                "gamma, delta and threshold must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Which angular weight feeds the coupling matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// Binary step weight `f`.
    #[default]
    Step,
    /// Smooth `cos^λ θ / (r_i + r_j)`.
    DpSmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermFlags {
    pub angular: bool,
    pub bifurcation: bool,
    pub occupancy: bool,
    pub spectral: bool,
    pub gap: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsingSystem {
    pub matrix: SymMatrix,
    pub b: Vec<f64>,
    pub hp: Hyperparams,
    pub mode: CouplingMode,
    pub terms: TermFlags,
    /// Dimension before padding.
    pub n_orig: usize,
    pub n_hits: usize,
}

impl IsingSystem {
    /// Current dimension (padded or not).
    pub fn n(&self) -> usize {
        self.matrix.dim()
    }

    pub fn is_padded(&self) -> bool {
        self.n() != self.n_orig
    }

    /// `A S - b`, the gradient of the energy.
    pub fn gradient(&self, s: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n(), s.len())?;
        let mut g = self.matrix.mul_vec(s);
        for (gi, bi) in g.iter_mut().zip(&self.b) {
            *gi -= bi;
        }
        Ok(g)
    }

    /// Writes `N N_pad nnz` followed by `i j value` for the upper triangle
    /// including the diagonal.
    pub fn write_coo(&self, w: &mut impl Write) -> std::io::Result<()> {
        let diag: Vec<_> = self
            .matrix
            .diag()
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 0.0)
            .map(|(i, &d)| (i, i, d))
            .collect();
        let mut entries: Vec<_> = diag
            .into_iter()
            .chain(self.matrix.upper().iter().copied())
            .collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        writeln!(
            w,
            "{} {} {}",
            self.n_orig,
            self.n_orig.next_power_of_two().max(self.n()),
            entries.len()
        )?;
        for (i, j, v) in entries {
            writeln!(w, "{i} {j} {}", crate::event::fmt_real(v))?;
        }
        Ok(())
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

fn pair_key(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

fn weight(c: &crate::doublets::TripletCoupling, mode: CouplingMode) -> f64 {
    match mode {
        CouplingMode::Step => f64::from(u8::from(c.f)),
        CouplingMode::DpSmooth => c.dp_weight,
    }
}

pub fn assemble(graph: &DoubletGraph, hp: &Hyperparams, mode: CouplingMode) -> Result<IsingSystem> {
    hp.validate()?;
    let n = graph.len();
    if hp.beta != 0.0 && n > MAX_DENSE_DIM {
        return Err(Error::Size(format!(
            "occupancy term couples all {n} doublets; limit is {MAX_DENSE_DIM}"
        )));
    }

    let mut off: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for c in &graph.couplings {
        let w = weight(c, mode);
        if w != 0.0 {
            *off.entry(pair_key(c.i, c.j)).or_default() -= 2.0 * w;
        }
    }
    if hp.alpha != 0.0 {
        for (i, j) in bifurcation_penalty(&graph.doublets) {
            *off.entry(pair_key(i, j)).or_default() += hp.alpha;
        }
    }
    if hp.beta != 0.0 {
        for i in 0..n {
            for j in i + 1..n {
                *off.entry((i, j)).or_default() += hp.beta;
            }
        }
    }

    let diag = vec![hp.gamma + 4.0 * hp.delta + hp.beta; n];
    let b = vec![2.0 * hp.delta + hp.beta * graph.n_hits as f64; n];

    Ok(IsingSystem {
        matrix: SymMatrix::from_parts(diag, off),
        b,
        hp: *hp,
        mode,
        terms: TermFlags {
            angular: !graph.couplings.is_empty(),
            bifurcation: hp.alpha != 0.0,
            occupancy: hp.beta != 0.0,
            spectral: hp.gamma != 0.0,
            gap: hp.delta != 0.0,
        },
        n_orig: n,
        n_hits: graph.n_hits,
    })
}

/// Unordered doublet pairs that share a start hit or an end hit.
pub fn bifurcation_penalty(doublets: &[Doublet]) -> Vec<(usize, usize)> {
    let mut by_start: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut by_end: HashMap<usize, Vec<usize>> = HashMap::new();
    for d in doublets {
        by_start.entry(d.hit_a).or_default().push(d.id);
        by_end.entry(d.hit_b).or_default().push(d.id);
    }
    let mut pairs = Vec::new();
    for group in by_start.values().chain(by_end.values()) {
        for (k, &i) in group.iter().enumerate() {
            for &j in &group[k + 1..] {
                pairs.push(pair_key(i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Energy of a (binary or relaxed) state, evaluated term by term from the
/// graph rather than from the assembled matrix.
pub fn evaluate_h(
    graph: &DoubletGraph,
    hp: &Hyperparams,
    mode: CouplingMode,
    state: &[f64],
) -> Result<f64> {
    check_dim(graph.len(), state.len())?;
    let bif = if hp.alpha != 0.0 {
        bifurcation_penalty(&graph.doublets)
    } else {
        Vec::new()
    };
    Ok(energy(graph, hp, mode, &bif, state))
}

fn energy(
    graph: &DoubletGraph,
    hp: &Hyperparams,
    mode: CouplingMode,
    bif: &[(usize, usize)],
    s: &[f64],
) -> f64 {
    let angular: f64 = graph
        .couplings
        .iter()
        .map(|c| -2.0 * weight(c, mode) * s[c.i] * s[c.j])
        .sum();
    let bifurcation: f64 = bif.iter().map(|&(i, j)| s[i] * s[j]).sum();
    let active: f64 = s.iter().sum();
    let occupancy = 0.5 * (active - graph.n_hits as f64).powi(2);
    let spectral = 0.5 * s.iter().map(|v| v * v).sum::<f64>();
    let gap = 0.5 * s.iter().map(|v| (1.0 - 2.0 * v).powi(2)).sum::<f64>();
    angular + hp.alpha * bifurcation + hp.beta * occupancy + hp.gamma * spectral + hp.delta * gap
}

/// Gradient `A S - b` of the assembled system.
pub fn gradient_h(system: &IsingSystem, state: &[f64]) -> Result<Vec<f64>> {
    system.gradient(state)
}

/// Largest problem accepted by the exhaustive search.
pub const BRUTE_FORCE_MAX: usize = 20;

/// Energies closer than this (relative to `1 + |H|`) count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Fewest active doublets, then lexicographically smallest.
    #[default]
    PreferOff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub state: Vec<bool>,
    pub energy: f64,
}

/// Exhaustive minimization of the energy over all `2^N` binary states.
pub fn brute_force_ground_state(
    graph: &DoubletGraph,
    hp: &Hyperparams,
    mode: CouplingMode,
    tie_break: TieBreak,
) -> Result<GroundState> {
    let n = graph.len();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::Size(format!(
            "{n} doublets; exhaustive search is limited to {BRUTE_FORCE_MAX}"
        )));
    }
    let bif = if hp.alpha != 0.0 {
        bifurcation_penalty(&graph.doublets)
    } else {
        Vec::new()
    };
    let eval = |mask: u32| {
        let s: Vec<f64> = (0..n).map(|k| f64::from((mask >> k) & 1)).collect();
        energy(graph, hp, mode, &bif, &s)
    };

    let total: u32 = 1 << n;
    let h_min = (0..total)
        .into_par_iter()
        .map(eval)
        .reduce(|| f64::INFINITY, f64::min);
    let tol = TIE_TOLERANCE * (1.0 + h_min.abs());

    // S_0 is the most significant position of the lexicographic order
    let lex_key = |mask: u32| -> u32 { (0..n).fold(0, |acc, k| (acc << 1) | ((mask >> k) & 1)) };
    let TieBreak::PreferOff = tie_break;
    let best = (0..total)
        .into_par_iter()
        .filter(|&m| eval(m) <= h_min + tol)
        .min_by_key(|&m| (m.count_ones(), lex_key(m)))
        .expect("state space is never empty");

    Ok(GroundState {
        state: (0..n).map(|k| (best >> k) & 1 == 1).collect(),
        energy: eval(best),
    })
}

/// Pads to the next power of two with a decoupled `(γ + 4δ) I` block.
///
/// The padded right-hand side repeats the (uniform) value of `b`, or `2δ`
/// when `b` is empty or not uniform.
pub fn pad_system(system: &IsingSystem) -> IsingSystem {
    let n = system.n();
    let n_pad = if n == 0 { 0 } else { n.next_power_of_two() };
    if n_pad == n {
        return system.clone();
    }
    let hp = &system.hp;
    let fill_b = match system.b.first() {
        Some(&b0) if system.b.iter().all(|&v| v == b0) => b0,
        _ => 2.0 * hp.delta,
    };
    let mut b = system.b.clone();
    b.resize(n_pad, fill_b);
    IsingSystem {
        matrix: system.matrix.padded(n_pad, hp.gamma + 4.0 * hp.delta),
        b,
        ..system.clone()
    }
}
