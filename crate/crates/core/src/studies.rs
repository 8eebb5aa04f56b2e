//! Sweeps over toy event size: sparsity of the system matrix and its
//! condition number.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::doublets::DoubletGraph;
use crate::error::{Error, Result};
use crate::ising::{assemble, CouplingMode, Hyperparams};
use crate::toy::{generate_event, ToyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "value")]
pub enum Kappa {
    NotComputed,
    Singular,
    Value(f64),
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Value(k) => Some(k),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRecord {
    pub n_particles: usize,
    pub n_layers: usize,
    pub seed: u64,
    pub n_doublets: usize,
    pub n_pad: usize,
    /// Stored entries of the full matrix, both triangles and the diagonal.
    pub nnz: usize,
    pub max_row_nnz: usize,
    pub density: f64,
    pub kappa: Kappa,
}

/// Axes of a sweep; points are visited sorted by (particles, layers, seed).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub particles: Vec<usize>,
    pub layers: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    pub fn points(&self) -> Vec<(usize, usize, u64)> {
        let mut pts: Vec<_> = self
            .particles
            .iter()
            .flat_map(|&p| {
                self.layers
                    .iter()
                    .flat_map(move |&l| self.seeds.iter().map(move |&s| (p, l, s)))
            })
            .collect();
        pts.sort_unstable();
        pts.dedup();
        pts
    }
}

fn study_point(
    n_particles: usize,
    n_layers: usize,
    seed: u64,
    hp: &Hyperparams,
    with_kappa: bool,
) -> Result<StudyRecord> {
    let event = generate_event(&ToyConfig::new(n_layers, n_particles, seed))?;
    let graph = DoubletGraph::build(&event, 0, hp.epsilon, hp.lambda)?;
    let n = graph.len();
    if n == 0 {
        return Err(Error::Config(format!(
            "{n_particles} particles on {n_layers} layers produce no doublets"
        )));
    }
    let system = assemble(&graph, hp, CouplingMode::Step)?;
    let nnz = system.matrix.nnz();
    let kappa = if !with_kappa {
        Kappa::NotComputed
    } else {
        match system.matrix.condition_number() {
            Ok(k) => Kappa::Value(k),
            Err(Error::Singular { .. }) => Kappa::Singular,
            Err(e) => return Err(e),
        }
    };
    Ok(StudyRecord {
        n_particles,
        n_layers,
        seed,
        n_doublets: n,
        n_pad: n.next_power_of_two(),
        nnz,
        max_row_nnz: system.matrix.row_nnz().into_iter().max().unwrap_or(0),
        density: nnz as f64 / (n * n) as f64,
        kappa,
    })
}

fn run(grid: &SweepGrid, hp: &Hyperparams, with_kappa: bool) -> Result<Vec<StudyRecord>> {
    hp.validate()?;
    grid.points()
        .into_par_iter()
        .map(|(p, l, s)| study_point(p, l, s, hp, with_kappa))
        .collect()
}

/// Exact nonzero structure of the assembled matrix at every sweep point.
pub fn run_sparsity_study(grid: &SweepGrid, hp: &Hyperparams) -> Result<Vec<StudyRecord>> {
    run(grid, hp, false)
}

/// As [`run_sparsity_study`], plus the condition number of the unpadded
/// matrix.
pub fn run_kappa_study(grid: &SweepGrid, hp: &Hyperparams) -> Result<Vec<StudyRecord>> {
    run(grid, hp, true)
}

pub const STUDY_CSV_HEADER: &str =
    "particles,layers,seed,n_doublets,n_pad,nnz,max_row_nnz,density,kappa";

/// `kappa` is empty when not computed and `singular` when σ_min is below the
/// cutoff.
pub fn write_study_csv(records: &[StudyRecord], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{STUDY_CSV_HEADER}")?;
    for r in records {
        let kappa = match r.kappa {
            Kappa::NotComputed => String::new(),
            Kappa::Singular => "singular".into(),
            Kappa::Value(k) => k.to_string(),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.n_particles,
            r.n_layers,
            r.seed,
            r.n_doublets,
            r.n_pad,
            r.nnz,
            r.max_row_nnz,
            r.density,
            kappa
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(
        particles: impl IntoIterator<Item = usize>,
        layers: impl IntoIterator<Item = usize>,
        seeds: &[u64],
    ) -> SweepGrid {
        SweepGrid {
            particles: particles.into_iter().collect(),
            layers: layers.into_iter().collect(),
            seeds: seeds.to_vec(),
        }
    }

    fn tight() -> Hyperparams {
        Hyperparams::default().with_epsilon(1e-9)
    }

    #[test]
    fn single_particle_chain() {
        let r = &run_sparsity_study(&grid([1], [4], &[0]), &Hyperparams::default()).unwrap()[0];
        assert_eq!(r.n_doublets, 3);
        assert_eq!(r.nnz, 7);
        assert_eq!(r.max_row_nnz, 3);
        assert_eq!(r.n_pad, 4);
        assert_eq!(r.kappa, Kappa::NotComputed);

        let r = &run_sparsity_study(&grid([1], [2], &[0]), &Hyperparams::default()).unwrap()[0];
        assert_eq!((r.n_doublets, r.nnz, r.density), (1, 1, 1.0));
    }

    #[test]
    fn density_falls_with_particles() {
        let rs = run_sparsity_study(&grid([5, 50], [26], &[3]), &tight()).unwrap();
        assert!(
            rs[1].density < rs[0].density,
            "{} vs {}",
            rs[1].density,
            rs[0].density
        );
    }

    #[test]
    fn kappa_small_cases() {
        // one 2-doublet track: eigenvalues 4 and 8
        let r = &run_kappa_study(&grid([1], [3], &[0]), &tight()).unwrap()[0];
        assert!((r.kappa.value().unwrap() - 2.0).abs() < 1e-12);
        // no couplings: 6·I
        let r = &run_kappa_study(&grid([3], [2], &[0]), &tight()).unwrap()[0];
        assert!((r.kappa.value().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_point_is_flagged() {
        // γ = δ = 0 leaves only the coupling term: a single doublet has A = 0
        let hp = Hyperparams {
            gamma: 0.0,
            delta: 0.0,
            ..tight()
        };
        let r = &run_kappa_study(&grid([1], [2], &[0]), &hp).unwrap()[0];
        assert_eq!(r.kappa, Kappa::Singular);
        let mut out = Vec::new();
        write_study_csv(std::slice::from_ref(r), &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().ends_with(",singular\n"));
    }

    #[test]
    fn kappa_bounded_for_disjoint_paths() {
        let rs = run_kappa_study(&grid(2..=8, 3..=7, &[0, 1]), &tight()).unwrap();
        for r in &rs {
            let k = r.kappa.value().unwrap();
            assert!(
                (1.0..5.0).contains(&k),
                "{} particles {} layers: {k}",
                r.n_particles,
                r.n_layers
            );
        }
    }

    #[test]
    fn max_row_nnz_independent_of_particles() {
        let rs = run_sparsity_study(&grid(1..=12, 3..=8, &[5]), &tight()).unwrap();
        for layers in 3..=8 {
            let rows: Vec<usize> = rs
                .iter()
                .filter(|r| r.n_layers == layers)
                .map(|r| r.max_row_nnz)
                .collect();
            assert!(
                rows.windows(2).all(|w| w[0] == w[1]),
                "{layers} layers: {rows:?}"
            );
        }
    }

    #[test]
    fn nnz_linear_in_doublets() {
        // single-particle chains of growing length; least-squares slope
        let rs = run_sparsity_study(&grid([1], 2..=30, &[0]), &tight()).unwrap();
        let xs: Vec<f64> = rs.iter().map(|r| r.n_doublets as f64).collect();
        let ys: Vec<f64> = rs.iter().map(|r| r.nnz as f64).collect();
        let (mx, my) = (
            xs.iter().sum::<f64>() / xs.len() as f64,
            ys.iter().sum::<f64>() / ys.len() as f64,
        );
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        assert!((2.5..=3.5).contains(&slope), "{slope}");
    }

    #[test]
    fn output_order_and_empty_grid() {
        let g = grid([3, 1], [4, 3], &[2, 0]);
        let rs = run_sparsity_study(&g, &Hyperparams::default()).unwrap();
        let keys: Vec<_> = rs
            .iter()
            .map(|r| (r.n_particles, r.n_layers, r.seed))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted);

        let rs = run_kappa_study(&grid([], [3], &[0]), &tight()).unwrap();
        let mut out = Vec::new();
        write_study_csv(&rs, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            format!("{STUDY_CSV_HEADER}\n")
        );
    }
}
