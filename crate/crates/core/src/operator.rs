//! Positive self-adjoint operators on a truncated Hilbert space.
//!
//! Every [`SymmetricOperator`] carries its eigendecomposition from the moment
//! it is built, so it is immutable and can be shared across sampling threads
//! without synchronisation. Diagonal operators skip the eigensolve entirely.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{reconstruct, symmetric_eigen, LinearMap};
use crate::spectrum::Spectrum;

/// Relative slack admitted below zero before an operator counts as indefinite.
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;
/// Relative asymmetry admitted in a dense input matrix.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Default tolerance for [`loewner_leq`].
pub const LOEWNER_TOLERANCE: f64 = 1e-10;

/// Trace, Hilbert–Schmidt norm and operator norm of a positive operator, i.e.
/// the ℓ¹, ℓ² and ℓ^∞ norms of its eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormTriple {
    pub trace: f64,
    pub hs: f64,
    pub op: f64,
}

impl NormTriple {
    /// Validated construction, for norms supplied analytically (for example
    /// the untruncated `π²/6` of `γ_i = i^{-2}`).
    pub fn new(trace: f64, hs: f64, op: f64) -> Result<Self> {
        let nt = Self { trace, hs, op };
        nt.validate()?;
        Ok(nt)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { trace, hs, op } = *self;
        if ![trace, hs, op].iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("norm triple"));
        }
        if trace < 0.0 || hs < 0.0 || op < 0.0 {
            return Err(Error::Domain(format!("negative norm in {self:?}")));
        }
        let slack = 1e-12 * (1.0 + trace);
        if op > hs + slack || hs > trace + slack || hs * hs > op * trace + slack * (1.0 + trace)
        {
            return Err(Error::Domain(format!(
                "inconsistent norms {self:?}: need op <= hs <= trace and hs^2 <= op*trace"
            )));
        }
        Ok(())
    }

    /// Norms from eigenvalues; entries below zero (roundoff) count as zero.
    pub fn from_eigenvalues(values: &[f64]) -> Self {
        let mut trace = 0.0;
        let mut hs2 = 0.0;
        let mut op = 0.0_f64;
        for &v in values {
            let v = v.max(0.0);
            trace += v;
            hs2 += v * v;
            op = op.max(v);
        }
        Self {
            trace,
            hs: hs2.sqrt(),
            op,
        }
    }

    /// Norms of `c·R` for `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            trace: c * self.trace,
            hs: c * self.hs,
            op: c * self.op,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Representation {
    Diagonal(Vec<f64>),
    Dense(LinearMap),
}

/// Where the eigenvectors live. For diagonal operators eigenvector `k` is the
/// coordinate vector `e_{order[k]}`.
#[derive(Debug, Clone, PartialEq)]
enum Basis {
    Coordinate { order: Vec<usize> },
    Dense(LinearMap),
}

/// A self-adjoint operator on `R^dim` with its eigendecomposition cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorJson", into = "OperatorJson")]
pub struct SymmetricOperator {
    dim: usize,
    repr: Representation,
    eigenvalues: Vec<f64>,
    basis: Basis,
    positive: bool,
}

/// Wire form: `{"dim": d, "kind": "diagonal"|"dense", "values": [...]}`,
/// dense values in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorJson {
    pub dim: usize,
    pub kind: OperatorKind,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Diagonal,
    Dense,
}

impl TryFrom<OperatorJson> for SymmetricOperator {
    type Error = Error;

    fn try_from(json: OperatorJson) -> Result<Self> {
        match json.kind {
            OperatorKind::Diagonal => {
                ensure_dim("diagonal operator values", json.dim, json.values.len())?;
                Self::diagonal(json.values)
            }
            OperatorKind::Dense => Self::dense(LinearMap::new(json.dim, json.dim, json.values)?),
        }
    }
}

impl From<SymmetricOperator> for OperatorJson {
    fn from(op: SymmetricOperator) -> Self {
        match op.repr {
            Representation::Diagonal(values) => Self {
                dim: op.dim,
                kind: OperatorKind::Diagonal,
                values,
            },
            Representation::Dense(m) => Self {
                dim: op.dim,
                kind: OperatorKind::Dense,
                values: m.entries().to_vec(),
            },
        }
    }
}

fn is_positive(eigenvalues: &[f64]) -> bool {
    let op = eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    min >= -POSITIVITY_TOLERANCE * (1.0 + op)
}

impl SymmetricOperator {
    pub fn diagonal(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("diagonal operator"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("diagonal operator"));
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        Ok(Self {
            dim: values.len(),
            positive: is_positive(&eigenvalues),
            eigenvalues,
            basis: Basis::Coordinate { order },
            repr: Representation::Diagonal(values),
        })
    }

    /// Dense symmetric operator. Asymmetry up to [`SYMMETRY_TOLERANCE`] times
    /// `max(1, max|M|)` is accepted and averaged away.
    pub fn dense(m: LinearMap) -> Result<Self> {
        ensure_dim("dense operator must be square", m.rows(), m.cols())?;
        let asym = m.asymmetry();
        if asym > SYMMETRY_TOLERANCE * m.max_abs().max(1.0) {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let m = m.symmetrized()?;
        let eig = symmetric_eigen(&m)?;
        Ok(Self {
            dim: m.rows(),
            positive: is_positive(&eig.values),
            eigenvalues: eig.values,
            basis: Basis::Dense(eig.vectors),
            repr: Representation::Dense(m),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(vec![1.0; dim]).expect("identity of positive dimension")
    }

    pub fn zero(dim: usize) -> Self {
        Self::diagonal(vec![0.0; dim]).expect("zero operator of positive dimension")
    }

    pub fn from_spectrum(spectrum: &Spectrum) -> Self {
        Self::diagonal(spectrum.values().to_vec()).expect("spectra are finite and nonempty")
    }

    /// Operator with the given eigenpairs (`vectors` as orthonormal columns).
    fn from_eigenpairs(values: Vec<f64>, vectors: LinearMap) -> Result<Self> {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
        let n = vectors.rows();
        let mut sorted_vectors = LinearMap::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            for k in 0..n {
                sorted_vectors.set(k, col, vectors.get(k, src));
            }
        }
        let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let m = reconstruct(&eigenvalues, &sorted_vectors).symmetrized()?;
        Ok(Self {
            dim: n,
            positive: is_positive(&eigenvalues),
            eigenvalues,
            basis: Basis::Dense(sorted_vectors),
            repr: Representation::Dense(m),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.repr, Representation::Diagonal(_))
    }

    /// Diagonal entries in coordinate order, for diagonal representations.
    pub fn diagonal_values(&self) -> Option<&[f64]> {
        match &self.repr {
            Representation::Diagonal(v) => Some(v),
            Representation::Dense(_) => None,
        }
    }

    /// Eigenvalues in nonincreasing order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> LinearMap {
        match &self.basis {
            Basis::Dense(v) => v.clone(),
            Basis::Coordinate { order } => {
                let mut v = LinearMap::zeros(self.dim, self.dim);
                for (k, &i) in order.iter().enumerate() {
                    v.set(i, k, 1.0);
                }
                v
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty")
    }

    /// Spectral norm `max |λ|`.
    pub fn op_norm(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> LinearMap {
        match &self.repr {
            Representation::Diagonal(v) => LinearMap::from_diagonal(v),
            Representation::Dense(m) => m.clone(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim("operator application", self.dim, x.len())?;
        Ok(match &self.repr {
            Representation::Diagonal(v) => v.iter().zip(x).map(|(a, b)| a * b).collect(),
            Representation::Dense(m) => m.apply(x)?,
        })
    }

    /// `⟨u, R u⟩`.
    pub fn quadratic_form(&self, u: &[f64]) -> Result<f64> {
        let ru = self.apply(u)?;
        Ok(u.iter().zip(&ru).map(|(a, b)| a * b).sum())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::NonFinite("operator scale factor"));
        }
        match &self.repr {
            Representation::Diagonal(v) => Self::diagonal(v.iter().map(|x| c * x).collect()),
            Representation::Dense(_) => {
                let values = self.eigenvalues.iter().map(|x| c * x).collect();
                Self::from_eigenpairs(values, self.eigenvectors())
            }
        }
    }

    pub fn add(&self, rhs: &SymmetricOperator) -> Result<Self> {
        ensure_dim("operator sum", self.dim, rhs.dim)?;
        match (&self.repr, &rhs.repr) {
            (Representation::Diagonal(a), Representation::Diagonal(b)) => {
                Self::diagonal(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            _ => Self::dense(self.to_dense().add(&rhs.to_dense())?),
        }
    }

    /// `Σ_k c_k v_k` over the eigenvectors; `coeffs` follows eigenvalue order.
    #[inline]
    pub(crate) fn combine_eigenvectors(&self, coeffs: &[f64], out: &mut [f64]) {
        match &self.basis {
            Basis::Coordinate { order } => {
                for (&i, &c) in order.iter().zip(coeffs) {
                    out[i] = c;
                }
            }
            Basis::Dense(v) => v.apply_into(coeffs, out),
        }
    }

    pub(crate) fn require_positive(&self) -> Result<()> {
        if self.positive {
            Ok(())
        } else {
            Err(Error::NotPositive {
                min_eigenvalue: self.min_eigenvalue(),
            })
        }
    }

    /// Marks a result positive by construction (e.g. `A R Aᵀ`). Eigenvalues
    /// that roundoff pushed below zero are clamped.
    fn assert_positive(mut self) -> Self {
        for v in &mut self.eigenvalues {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.positive = true;
        self
    }
}

/// `(tr R, ‖R‖_HS, ‖R‖)` from the eigenvalues of a positive operator.
pub fn norms(r: &SymmetricOperator) -> Result<NormTriple> {
    r.require_positive()?;
    Ok(NormTriple::from_eigenvalues(r.eigenvalues()))
}

/// `B = A R Aᵀ`, the proxy of `A X` for an `R`-subgaussian `X`.
pub fn conjugate(a: &LinearMap, r: &SymmetricOperator) -> Result<SymmetricOperator> {
    ensure_dim("conjugation A R A^T", r.dim(), a.cols())?;
    r.require_positive()?;
    if let (Some(ad), Some(rd)) = (a.as_diagonal(), r.diagonal_values()) {
        let values = ad.iter().zip(rd).map(|(x, g)| x * g * x).collect();
        return Ok(SymmetricOperator::diagonal(values)?.assert_positive());
    }
    let ar = match r.diagonal_values() {
        Some(rd) => {
            let mut ar = a.clone();
            for i in 0..a.rows() {
                for (j, g) in rd.iter().enumerate() {
                    ar.set(i, j, a.get(i, j) * g);
                }
            }
            ar
        }
        None => a.matmul(&r.to_dense())?,
    };
    let b = ar.matmul(&a.transpose())?.symmetrized()?;
    Ok(SymmetricOperator::dense(b)?.assert_positive())
}

/// `A ⪯ B` in the Loewner order, i.e. `λ_min(B − A) ≥ −tol·(1 + ‖A‖ + ‖B‖)`.
pub fn loewner_leq(a: &SymmetricOperator, b: &SymmetricOperator, tol: f64) -> Result<bool> {
    ensure_dim("Loewner comparison", a.dim(), b.dim())?;
    let min_gap = match (a.diagonal_values(), b.diagonal_values()) {
        (Some(ad), Some(bd)) => ad
            .iter()
            .zip(bd)
            .map(|(x, y)| y - x)
            .fold(f64::INFINITY, f64::min),
        _ => {
            let diff = b.to_dense().sub(&a.to_dense())?;
            *symmetric_eigen(&diff)?.values.last().expect("nonempty")
        }
    };
    Ok(min_gap >= -tol * (1.0 + a.op_norm() + b.op_norm()))
}

/// `f(T)` through the spectral calculus. Eigenvalues of `T` inside the
/// positivity tolerance but below zero are treated as exact zeros.
pub fn spectral_apply(
    f: impl Fn(f64) -> f64,
    t: &SymmetricOperator,
) -> Result<SymmetricOperator> {
    t.require_positive()?;
    let apply = |lambda: f64| -> Result<f64> {
        let v = f(lambda.max(0.0));
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("spectral function value"))
        }
    };
    match t.diagonal_values() {
        Some(d) => SymmetricOperator::diagonal(d.iter().map(|&x| apply(x)).collect::<Result<_>>()?),
        None => {
            let values = t
                .eigenvalues()
                .iter()
                .map(|&x| apply(x))
                .collect::<Result<Vec<_>>>()?;
            SymmetricOperator::from_eigenpairs(values, t.eigenvectors())
        }
    }
}

/// Anything with a dense matrix view.
pub trait AsDense {
    fn as_dense(&self) -> Cow<'_, LinearMap>;
}

impl AsDense for LinearMap {
    fn as_dense(&self) -> Cow<'_, LinearMap> {
        Cow::Borrowed(self)
    }
}

impl AsDense for SymmetricOperator {
    fn as_dense(&self) -> Cow<'_, LinearMap> {
        match &self.repr {
            Representation::Dense(m) => Cow::Borrowed(m),
            Representation::Diagonal(_) => Cow::Owned(self.to_dense()),
        }
    }
}

/// `tr(A B)` without forming the product; both `AB` and `BA` must be square.
pub fn trace_product(a: &impl AsDense, b: &impl AsDense) -> Result<f64> {
    let a = a.as_dense();
    let b = b.as_dense();
    ensure_dim("trace product (rows of A vs cols of B)", a.rows(), b.cols())?;
    ensure_dim("trace product (cols of A vs rows of B)", a.cols(), b.rows())?;
    let mut s = 0.0;
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            s += a.get(i, k) * b.get(k, i);
        }
    }
    Ok(s)
}

/// Orthogonal projector `u uᵀ / ‖u‖²` onto the span of `u`.
pub fn rank_one_projector(u: &[f64]) -> Result<LinearMap> {
    let norm2: f64 = u.iter().map(|x| x * x).sum();
    if norm2 == 0.0 || !norm2.is_finite() {
        return Err(Error::Domain("projector direction must be nonzero".into()));
    }
    let d = u.len();
    let mut p = LinearMap::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            p.set(i, j, u[i] * u[j] / norm2);
        }
    }
    Ok(p)
}
