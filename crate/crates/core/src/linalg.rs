//! Dense symmetric linear algebra for the semidefinite bounding schemes.
//!
//! Everything here works on small matrices (a few dozen rows at most): the
//! covariance blocks `Z` and `Y` of the Type-3 dual, the nominal covariance
//! `Σ̄`, and the change-of-basis matrices used by the diagonally dominant
//! inner approximation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Residual tolerance for eigenpairs, relative to `max(1, ‖m‖∞)`.
pub const EIG_TOL: f64 = 1e-9;
/// Reconstruction tolerance for Cholesky factors, relative to `max(1, ‖m‖∞)`.
pub const CHOL_TOL: f64 = 1e-10;
/// Pivots in `[-CHOL_CLAMP, 0]` are treated as exact zeros.
pub const CHOL_CLAMP: f64 = 1e-12;
/// Condition estimate above which a basis matrix counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

const MAX_JACOBI_SWEEPS: usize = 100;

/// Errors raised by factorizations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive semidefinite (pivot {pivot:.3e} at row {row})")]
    NotPsd { row: usize, pivot: f64 },
    #[error("matrix is numerically singular (condition estimate {condition:.3e})")]
    SingularBasis { condition: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
}

/// A dense symmetric matrix stored in full row-major form.
///
/// Both triangles are kept so that callers can index naturally; every
/// mutator writes the mirrored entry as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// The `n × n` zero matrix. Panics if `n == 0`.
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "SymMatrix dimension must be at least 1");
        Self { n, data: vec![0.0; n * n] }
    }

    /// The `n × n` identity.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Diagonal matrix with the given entries.
    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds a matrix from rows, requiring exact symmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        if n == 0 {
            return Err(LinalgError::Dimension { expected: 1, got: 0 });
        }
        for r in rows {
            if r.len() != n {
                return Err(LinalgError::Dimension { expected: n, got: r.len() });
            }
        }
        for i in 0..n {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Ok(Self { n, data })
    }

    /// Builds a matrix from rows, averaging the two triangles.
    pub fn from_rows_symmetrized(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        if n == 0 {
            return Err(LinalgError::Dimension { expected: 1, got: 0 });
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            if rows[i].len() != n {
                return Err(LinalgError::Dimension { expected: n, got: rows[i].len() });
            }
            for j in 0..=i {
                m.set(i, j, 0.5 * (rows[i][j] + rows[j][i]));
            }
        }
        Ok(m)
    }

    /// Dimension `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Row-major nested copy.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec()).collect()
    }

    /// Returns `s · self`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Quadratic form `vᵀ m v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mv = self.mul_vec(v);
        mv.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Frobenius inner product `self • other`.
    pub fn frobenius_dot(&self, other: &SymMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Smallest eigenvalue and its unit eigenvector.
    pub fn min_eig(&self) -> (f64, Vec<f64>) {
        sym_eig(self).into_iter().next().expect("dimension is at least 1")
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = LinalgError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Self::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// A dense square matrix, used for general (triangular) change-of-basis
/// factors where symmetry does not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    pub n: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl SquareMatrix {
    /// The `n × n` identity.
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    /// Entry `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Copies a symmetric matrix.
    pub fn from_sym(m: &SymMatrix) -> Self {
        Self { n: m.n(), data: m.data.clone() }
    }

    /// Transpose.
    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        Self { n, data }
    }

    /// Cheap condition estimate `‖A‖₁·‖A⁻¹‖₁` via an explicit inverse;
    /// returns infinity when elimination meets a zero pivot.
    pub fn condition_estimate(&self) -> f64 {
        match invert(self) {
            Some(inv) => norm1(self) * norm1(&inv),
            None => f64::INFINITY,
        }
    }
}

fn norm1(m: &SquareMatrix) -> f64 {
    (0..m.n)
        .map(|j| (0..m.n).map(|i| m.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn invert(m: &SquareMatrix) -> Option<SquareMatrix> {
    let n = m.n;
    let mut a = m.data.clone();
    let mut inv = SquareMatrix::identity(n).data;
    let scale = m.data.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))?;
        if a[piv * n + col].abs() <= f64::EPSILON * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
        let d = a[col * n + col];
        for k in 0..n {
            a[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        a[r * n + k] -= f * a[col * n + k];
                        inv[r * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    Some(SquareMatrix { n, data: inv })
}

/// Eigen-decomposition by cyclic Jacobi rotations with threshold sweeps.
///
/// Returns `(eigenvalue, unit eigenvector)` pairs in ascending eigenvalue
/// order. Ties are ordered by the index of the diagonal entry they came
/// from, which keeps the output deterministic.
pub fn sym_eig(m: &SymMatrix) -> Vec<(f64, Vec<f64>)> {
    let n = m.n();
    let mut a = m.data.clone();
    let mut v = SquareMatrix::identity(n).data;
    let scale = m.norm_inf().max(f64::MIN_POSITIVE);

    for sweep in 0..MAX_JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        // Early sweeps skip small rotations; later sweeps rotate everything.
        let threshold = if sweep < 3 { 0.2 * off.sqrt() / (n * n) as f64 } else { 0.0 };
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= threshold || apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sgn / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]).then(i.cmp(&j)));
    order
        .into_iter()
        .map(|j| {
            let mut vec: Vec<f64> = (0..n).map(|k| v[k * n + j]).collect();
            let norm = vec.iter().map(|x| x * x).sum::<f64>().sqrt();
            // Fix the sign so the largest-magnitude component is positive.
            let lead = vec.iter().copied().fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            let sgn = if lead < 0.0 { -1.0 } else { 1.0 };
            for x in vec.iter_mut() {
                *x *= sgn / norm;
            }
            (a[j * n + j], vec)
        })
        .collect()
}

/// Lower-triangular Cholesky factor `L` with `m = L Lᵀ`.
///
/// Pivots in `[-1e-12, 0]` are clamped to zero (the corresponding column of
/// `L` is then zero); a pivot below `-1e-12` yields [`LinalgError::NotPsd`].
pub fn cholesky(m: &SymMatrix) -> Result<SquareMatrix, LinalgError> {
    let n = m.n();
    let mut l = vec![0.0; n * n];
    let scale = m.norm_inf().max(1.0);
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d < -CHOL_CLAMP * scale {
            return Err(LinalgError::NotPsd { row: j, pivot: d });
        }
        if d <= CHOL_CLAMP * scale {
            // Zero pivot: the remaining entries of this column must vanish
            // for the matrix to be PSD.
            for i in j + 1..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if s.abs() > 1e-9 * scale {
                    return Err(LinalgError::NotPsd { row: i, pivot: -s.abs() });
                }
            }
            continue;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(SquareMatrix { n, data: l })
}

/// Diagonal dominance test: `a_ii ≥ Σ_{j≠i} |a_ij|` for every row, compared
/// exactly.
pub fn is_dd(m: &SymMatrix) -> bool {
    let n = m.n();
    (0..n).all(|i| {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m.get(i, j).abs()).sum();
        m.get(i, i) >= off
    })
}

/// PSD test against an absolute eigenvalue floor.
pub fn is_psd(m: &SymMatrix, floor: f64) -> bool {
    m.min_eig().0 >= floor
}
