//! Least-squares solve of the relaxed system and binarization of its output.

use std::io::Write;

use rayon::prelude::*;

use crate::doublets::DoubletGraph;
use crate::error::{Error, Result};
use crate::event::Event;
use crate::ising::{assemble, CouplingMode, Hyperparams, IsingSystem};
use crate::linalg::norm2;

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    pub s: Vec<f64>,
    /// `‖A s − b‖₂` on the system that was solved.
    pub residual_norm: f64,
    pub threshold: f64,
    pub active: Vec<bool>,
}

impl RelaxedSolution {
    pub fn new(s: Vec<f64>, residual_norm: f64, threshold: f64) -> Self {
        let active = apply_threshold(&s, threshold);
        RelaxedSolution {
            s,
            residual_norm,
            threshold,
            active,
        }
    }

    pub fn with_threshold(self, threshold: f64) -> Self {
        Self::new(self.s, self.residual_norm, threshold)
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// One `doublet_id s_value active_flag` line per doublet.
    pub fn write_dump(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (i, (s, a)) in self.s.iter().zip(&self.active).enumerate() {
            writeln!(w, "{i} {} {}", crate::event::fmt_real(*s), u8::from(*a))?;
        }
        Ok(())
    }
}

/// `s = A⁺ b`, thresholded at the system's `T`.
///
/// A padded system is solved whole and truncated to its original dimension.
pub fn solve_least_squares(system: &IsingSystem) -> Result<RelaxedSolution> {
    let mut s = system.matrix.pinv_solve(&system.b)?;
    let residual = system.gradient(&s)?;
    let residual_norm = norm2(&residual);
    s.truncate(system.n_orig);
    Ok(RelaxedSolution::new(s, residual_norm, system.hp.threshold))
}

/// `S̃_i > T` is on, everything else off.
pub fn apply_threshold(s: &[f64], threshold: f64) -> Vec<bool> {
    s.iter().map(|&v| v > threshold).collect()
}

/// Range scanned for the largest gap between solution values.
pub const GAP_WINDOW: (f64, f64) = (0.0, 1.2);

/// Values closer than this are the same level.
const DISTINCT_TOL: f64 = 1e-9;

/// Midpoint of the largest gap between consecutive distinct values inside
/// [`GAP_WINDOW`], or `None` when fewer than two distinct values remain.
pub fn gap_midpoint(s: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = s
        .iter()
        .copied()
        .filter(|x| (GAP_WINDOW.0..=GAP_WINDOW.1).contains(x))
        .collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= DISTINCT_TOL);
    v.windows(2)
        .map(|w| (w[1] - w[0], 0.5 * (w[0] + w[1])))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, mid)| mid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub threshold: f64,
    pub midpoints: Vec<f64>,
    pub skipped: usize,
}

/// Mean largest-gap midpoint over a batch of events (step couplings,
/// consecutive-module doublets).
pub fn calibrate_threshold(batch: &[Event], hp: &Hyperparams) -> Result<Calibration> {
    if batch.is_empty() {
        return Err(Error::DegenerateBatch("empty batch".into()));
    }
    let mids = batch
        .par_iter()
        .map(|event| {
            let graph = DoubletGraph::build(event, 0, hp.epsilon, hp.lambda)?;
            let system = assemble(&graph, hp, CouplingMode::Step)?;
            Ok(gap_midpoint(&solve_least_squares(&system)?.s))
        })
        .collect::<Result<Vec<_>>>()?;

    let midpoints: Vec<f64> = mids.iter().flatten().copied().collect();
    if midpoints.is_empty() {
        return Err(Error::DegenerateBatch(format!(
            "all {} events yield fewer than two distinct solution values",
            batch.len()
        )));
    }
    Ok(Calibration {
        threshold: midpoints.iter().sum::<f64>() / midpoints.len() as f64,
        skipped: batch.len() - midpoints.len(),
        midpoints,
    })
}
