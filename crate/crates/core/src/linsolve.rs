//! Sparse direct linear algebra used by the Newton loops.
//!
//! Thin wrapper over a sparse LU factorization. Systems here are
//! saddle-point shaped (indefinite, unsymmetric once interface terms enter),
//! so LU with pivoting is the right default. Factorizations are retained so
//! tangent re-solves against multiple right-hand sides reuse the numeric
//! factors.

use crate::error::{Error, Result};
use faer::prelude::*;
use faer::sparse::SparseColMat;

/// Assembled sparse matrix in column-major compressed form.
pub struct SparseMatrix {
    mat: SparseColMat<usize, f64>,
    n: usize,
}

impl SparseMatrix {
    /// Builds an `n x n` matrix from (row, col, value) triplets; duplicate
    /// entries are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let entries: Vec<faer::sparse::Triplet<usize, usize, f64>> = triplets
            .iter()
            .map(|&(r, c, v)| faer::sparse::Triplet::new(r, c, v))
            .collect();
        let mat = SparseColMat::try_new_from_triplets(n, n, &entries)
            .map_err(|e| Error::LinearSolve(format!("bad triplets: {e:?}")))?;
        Ok(SparseMatrix { mat, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let xm = MatRef::from_column_major_slice(x, self.n, 1);
        let y = self.mat.as_ref() * xm;
        (0..self.n).map(|i| y[(i, 0)]).collect()
    }

    /// Sparse LU with partial pivoting.
    pub fn factorize(&self) -> Result<Factorization<'_>> {
        let lu = self
            .mat
            .as_ref()
            .sp_lu()
            .map_err(|e| Error::LinearSolve(format!("LU factorization failed: {e:?}")))?;
        Ok(Factorization { lu, parent: self })
    }

    /// Factorize-and-solve convenience for single right-hand sides.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.factorize()?.solve(rhs)
    }
}

pub struct Factorization<'a> {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    parent: &'a SparseMatrix,
}

impl Factorization<'_> {
    /// Solves A x = rhs and verifies the relative residual.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.parent.n;
        if rhs.len() != n {
            return Err(Error::LinearSolve(format!(
                "rhs length {} does not match system size {n}",
                rhs.len()
            )));
        }
        let mut b = Mat::<f64>::zeros(n, 1);
        for (i, &v) in rhs.iter().enumerate() {
            b[(i, 0)] = v;
        }
        let x = self.lu.solve(&b);
        let x: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        let ax = self.parent.matvec(&x);
        let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let res_norm = ax
            .iter()
            .zip(rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = rhs_norm.max(1e-300);
        if !(res_norm / scale).is_finite() || res_norm / scale > 1e-10 {
            return Err(Error::LinearSolve(format!(
                "direct solve residual {:.3e} exceeds 1e-10 (n = {n})",
                res_norm / scale
            )));
        }
        Ok(x)
    }
}
