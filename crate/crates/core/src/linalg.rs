//! Sparse symmetric storage and the dense kernels used on its connected blocks.
//!
//! The coupling matrices produced by the model are block diagonal up to a
//! permutation: every connected component of the sparsity graph is an
//! independent sub-system. Pseudo-inverse solves and spectra are computed per
//! block, which keeps events with tens of thousands of doublets tractable.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest block materialized as a dense matrix.
pub const MAX_DENSE_DIM: usize = 4096;

/// Relative singular-value cutoff of the pseudo-inverse.
pub const PINV_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    diag: Vec<f64>,
    /// Strict upper triangle, `i < j`, sorted, no explicit zeros.
    upper: Vec<(usize, usize, f64)>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            diag: vec![0.0; n],
            upper: Vec::new(),
        }
    }

    /// Builds from a diagonal and off-diagonal entries keyed by `(min, max)`.
    pub fn from_parts(diag: Vec<f64>, off: BTreeMap<(usize, usize), f64>) -> Self {
        let n = diag.len();
        let upper = off
            .into_iter()
            .filter(|&(_, v)| v != 0.0)
            .map(|((i, j), v)| {
                assert!(i < j && j < n, "off-diagonal entry ({i}, {j}) out of range");
                (i, j, v)
            })
            .collect();
        SymMatrix { n, diag, upper }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        assert!(m.is_square());
        let n = m.nrows();
        let mut off = BTreeMap::new();
        for i in 0..n {
            for j in i + 1..n {
                off.insert((i, j), m[(i, j)]);
            }
        }
        Self::from_parts((0..n).map(|i| m[(i, i)]).collect(), off)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[(usize, usize, f64)] {
        &self.upper
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let key = (i.min(j), i.max(j));
        self.upper
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&key))
            .map_or(0.0, |k| self.upper[k].2)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for &(i, j, v) in &self.upper {
            y[i] += v * x[j];
            y[j] += v * x[i];
        }
        y
    }

    /// Nonzeros of the full matrix, both triangles and the diagonal.
    pub fn nnz(&self) -> usize {
        self.diag.iter().filter(|&&d| d != 0.0).count() + 2 * self.upper.len()
    }

    pub fn row_nnz(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self.diag.iter().map(|&d| usize::from(d != 0.0)).collect();
        for &(i, j, _) in &self.upper {
            rows[i] += 1;
            rows[j] += 1;
        }
        rows
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix {
            n: self.n,
            diag: self.diag.iter().map(|d| d * c).collect(),
            upper: self.upper.iter().map(|&(i, j, v)| (i, j, v * c)).collect(),
        }
    }

    /// `[[self, 0], [0, fill * I]]` of dimension `n_pad`.
    pub fn padded(&self, n_pad: usize, fill: f64) -> Self {
        assert!(n_pad >= self.n);
        let mut diag = self.diag.clone();
        diag.resize(n_pad, fill);
        SymMatrix {
            n: n_pad,
            diag,
            upper: self.upper.clone(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let idx: Vec<usize> = (0..self.n).collect();
        self.dense_block(&idx)
    }

    /// Dense principal sub-matrix on the given (sorted) indices.
    pub fn dense_block(&self, idx: &[usize]) -> DMatrix<f64> {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &i) in idx.iter().enumerate() {
            pos[i] = k;
        }
        let mut m = DMatrix::zeros(idx.len(), idx.len());
        for (k, &i) in idx.iter().enumerate() {
            m[(k, k)] = self.diag[i];
        }
        for &(i, j, v) in &self.upper {
            let (pi, pj) = (pos[i], pos[j]);
            if pi != usize::MAX && pj != usize::MAX {
                m[(pi, pj)] = v;
                m[(pj, pi)] = v;
            }
        }
        m
    }

    /// Connected components of the off-diagonal sparsity graph, each sorted,
    /// ordered by their smallest index.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(i, j, _) in &self.upper {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..self.n {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        groups.into_values().collect()
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut ev = Vec::with_capacity(self.n);
        for block in self.blocks() {
            check_block(&block)?;
            let m = self.dense_block(&block);
            ev.extend(SymmetricEigen::new(m).eigenvalues.iter().copied());
        }
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    /// Largest and smallest singular values.
    pub fn singular_extremes(&self) -> Result<(f64, f64)> {
        let ev = self.eigenvalues()?;
        let abs = ev.iter().map(|v| v.abs());
        let max = abs.clone().fold(0.0, f64::max);
        let min = abs.fold(f64::INFINITY, f64::min);
        Ok((max, if self.n == 0 { 0.0 } else { min }))
    }

    /// Ratio of extreme singular values; fails when the smallest one is below
    /// `PINV_RCOND * sigma_max`.
    pub fn condition_number(&self) -> Result<f64> {
        let (smax, smin) = self.singular_extremes()?;
        if !(smin > PINV_RCOND * smax) {
            return Err(Error::Singular {
                sigma_min: smin,
                sigma_max: smax,
            });
        }
        Ok(smax / smin)
    }

    /// Minimum-norm least-squares solution `A⁺ b`, computed with an SVD of
    /// every connected block.
    ///
    /// Singular values below `n * sigma_max * PINV_RCOND` (global `n` and
    /// `sigma_max`) are treated as zero.
    pub fn pinv_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: b.len(),
            });
        }
        let mut parts = Vec::new();
        let mut sigma_max: f64 = 0.0;
        for block in self.blocks() {
            check_block(&block)?;
            let svd = self.dense_block(&block).svd(true, true);
            sigma_max = sigma_max.max(svd.singular_values.max());
            parts.push((block, svd));
        }
        let cutoff = self.n as f64 * sigma_max * PINV_RCOND;

        let mut x = vec![0.0; self.n];
        for (block, svd) in parts {
            let u = svd.u.as_ref().expect("u requested");
            let vt = svd.v_t.as_ref().expect("v_t requested");
            let rhs = DVector::from_iterator(block.len(), block.iter().map(|&i| b[i]));
            let mut coeff = u.transpose() * rhs;
            for (c, &s) in coeff.iter_mut().zip(svd.singular_values.iter()) {
                *c = if s > cutoff { *c / s } else { 0.0 };
            }
            let sol = vt.transpose() * coeff;
            for (k, &i) in block.iter().enumerate() {
                x[i] = sol[k];
            }
        }
        Ok(x)
    }
}

fn check_block(block: &[usize]) -> Result<()> {
    if block.len() > MAX_DENSE_DIM {
        return Err(Error::Size(format!(
            "coupled block of {} doublets exceeds the dense limit {MAX_DENSE_DIM}",
            block.len()
        )));
    }
    Ok(())
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
