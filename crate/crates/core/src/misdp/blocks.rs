//! Locations of the positive-semidefinite matrix blocks inside a stage
//! model.

use crate::linalg::SymMatrix;
use serde::{Deserialize, Serialize};

/// Which dual matrix a block holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PsdBlockName {
    /// `Z = [[z1, z2], [z2ᵀ, z3]]`, dimension `J+1`.
    Z,
    /// `Y`, dimension `J`.
    Y,
}

/// Column indices of a square matrix variable: entry `(a, b)` is column
/// `cols[a][b]`. Mirrored entries may share a column or use two columns
/// tied by symmetry rows; the matrix seen by the PSD handling is the
/// symmetric part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdBlockRef {
    pub name: PsdBlockName,
    pub dim: usize,
    pub cols: Vec<Vec<usize>>,
}

impl PsdBlockRef {
    /// Symmetric part of the block at the solution `x`.
    pub fn matrix(&self, x: &[f64]) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.dim);
        for a in 0..self.dim {
            for b in 0..=a {
                m.set(a, b, 0.5 * (x[self.cols[a][b]] + x[self.cols[b][a]]));
            }
        }
        m
    }

    /// Coefficients of the linear form `vᵀ M v` in the block columns.
    pub fn quad_coeffs(&self, v: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.dim * self.dim);
        for a in 0..self.dim {
            for b in 0..self.dim {
                let c = v[a] * v[b];
                if c != 0.0 {
                    out.push((self.cols[a][b], c));
                }
            }
        }
        out
    }

    /// Every column referenced by the block, without duplicates.
    pub fn columns(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.cols.iter().flatten().copied().collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}
