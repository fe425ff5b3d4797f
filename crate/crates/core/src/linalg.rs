//! Dense row-major matrices and the cyclic Jacobi eigensolver.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// Off-diagonal Frobenius mass, relative to the full Frobenius norm, at which
/// a Jacobi sweep is considered converged.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// A bounded linear map between finite-dimensional real spaces, stored as a
/// dense row-major `rows x cols` array with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLinearMap", into = "RawLinearMap")]
pub struct LinearMap {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLinearMap {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl TryFrom<RawLinearMap> for LinearMap {
    type Error = Error;

    fn try_from(raw: RawLinearMap) -> Result<Self> {
        LinearMap::new(raw.rows, raw.cols, raw.entries)
    }
}

impl From<LinearMap> for RawLinearMap {
    fn from(m: LinearMap) -> Self {
        RawLinearMap {
            rows: m.rows,
            cols: m.cols,
            entries: m.entries,
        }
    }
}

impl LinearMap {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("linear map with a zero dimension"));
        }
        ensure_dim("linear map entries", rows * cols, entries.len())?;
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("linear map entries"));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            ensure_dim("row length", c, row.len())?;
            entries.extend_from_slice(row);
        }
        Self::new(r, c, entries)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.entries[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = Self::zeros(d, d);
        for (i, &v) in diag.iter().enumerate() {
            m.entries[i * d + i] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.entries[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.entries[j * self.rows + i] = self.entries[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &LinearMap) -> Result<LinearMap> {
        ensure_dim("matrix product", self.cols, rhs.rows)?;
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.entries[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.entries[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.entries[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim("matrix-vector product", self.cols, x.len())?;
        let mut out = vec![0.0; self.rows];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked `out = self * x`; lengths must already agree.
    #[inline]
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self
                .row(i)
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|x| c * x).collect(),
        }
    }

    pub fn add(&self, rhs: &LinearMap) -> Result<LinearMap> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &LinearMap) -> Result<LinearMap> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &LinearMap, f: impl Fn(f64, f64) -> f64) -> Result<LinearMap> {
        ensure_dim("elementwise rows", self.rows, rhs.rows)?;
        ensure_dim("elementwise cols", self.cols, rhs.cols)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `Aᵀ A`, the Gram operator on the input space.
    pub fn gram(&self) -> LinearMap {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let a = row[i];
                if a == 0.0 {
                    continue;
                }
                for j in i..n {
                    g.entries[i * n + j] += a * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g.entries[i * n + j] = g.entries[j * n + i];
            }
        }
        g
    }

    pub fn trace(&self) -> Result<f64> {
        ensure_dim("trace of a square matrix", self.rows, self.cols)?;
        Ok((0..self.rows).map(|i| self.get(i, i)).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest `|M[i][j] - M[j][i]|`; zero for non-square maps is meaningless
    /// and reported as infinity.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrized(&self) -> Result<LinearMap> {
        ensure_dim("symmetrization", self.rows, self.cols)?;
        let n = self.rows;
        let mut s = self.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        Ok(s)
    }

    /// The diagonal, if every off-diagonal entry is exactly zero.
    pub fn as_diagonal(&self) -> Option<Vec<f64>> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        for i in 0..n {
            for j in 0..n {
                if i != j && self.get(i, j) != 0.0 {
                    return None;
                }
            }
        }
        Some((0..n).map(|i| self.get(i, i)).collect())
    }
}

/// Eigenpairs of a symmetric matrix: eigenvalues in nonincreasing order and
/// the matching orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: LinearMap,
}

/// Cyclic Jacobi eigensolver with a fixed row-by-row sweep order.
///
/// Sweeps stop once the off-diagonal Frobenius mass falls below
/// [`JACOBI_TOLERANCE`] times the Frobenius norm of the input.
pub fn symmetric_eigen(m: &LinearMap) -> Result<SymmetricEigen> {
    ensure_dim("eigensolve of a square matrix", m.rows, m.cols)?;
    let n = m.rows;
    let mut a = m.entries.clone();
    let mut v = LinearMap::identity(n).entries;
    let target = JACOBI_TOLERANCE * m.frobenius_norm();

    let off_mass = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_mass(&a) <= target;
    let mut sweep = 0;
    while !converged {
        if sweep == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                routine: "jacobi eigensolver",
                iterations: sweep,
            });
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
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
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        sweep += 1;
        converged = off_mass(&a) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = LinearMap::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, col, v[k * n + src]);
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// `V diag(values) Vᵀ` for eigenvectors stored as columns of `V`.
pub(crate) fn reconstruct(values: &[f64], vectors: &LinearMap) -> LinearMap {
    let n = vectors.rows();
    let mut out = LinearMap::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        for i in 0..n {
            let vik = lambda * vectors.get(i, k);
            if vik == 0.0 {
                continue;
            }
            for j in 0..n {
                out.entries[i * n + j] += vik * vectors.get(j, k);
            }
        }
    }
    out
}
