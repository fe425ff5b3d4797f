//! Sampleable centered laws with a certified variance-proxy operator.
//!
//! A law is built from one of three base families and then pushed through
//! linear maps, independent sums, i.i.d. averages or independent random
//! operators. Each construction carries the proxy rule that keeps the result
//! `R`-subgaussian, so the proxy is always available without sampling.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::LinearMap;
use crate::operator::{conjugate, OperatorJson, SymmetricOperator};
use crate::rng::{chunk_count, chunk_rows, ChunkRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `N(0, R)`.
    Gaussian,
    /// `Σ sqrt(γ_i) ε_i e_i` with fair signs `ε_i` in the eigenbasis of `R`.
    Rademacher,
    /// Eigen-coordinates uniform on `[-sqrt(3γ_i), sqrt(3γ_i)]`.
    Uniform,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gaussian, Family::Rademacher, Family::Uniform];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Rademacher => "rademacher",
            Self::Uniform => "uniform",
        }
    }

    #[inline]
    fn standard_draw(&self, rng: &mut ChunkRng) -> f64 {
        match self {
            Self::Gaussian => rng.normal(),
            Self::Rademacher => rng.sign(),
            Self::Uniform => (2.0 * rng.uniform() - 1.0) * 3f64.sqrt(),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "rademacher" => Ok(Self::Rademacher),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::Parse(format!("unknown law family `{other}`"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Random operators drawn afresh, independently of `X`, for every sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RandomOperatorFamily {
    /// Haar-distributed orthogonal matrix; `‖A‖ = 1`.
    Rotation,
    /// `Q diag(u) Qᵀ` with Haar `Q` and `u_i` uniform on `[-c, c]`; self-adjoint
    /// with `‖A‖ ≤ c`.
    SymmetricBounded { c: f64 },
}

impl RandomOperatorFamily {
    /// Almost-sure operator-norm bound `c`, so that `C = c·I` dominates `AᵀA`.
    pub fn norm_bound(&self) -> f64 {
        match *self {
            Self::Rotation => 1.0,
            Self::SymmetricBounded { c } => c,
        }
    }

    pub fn draw(&self, rng: &mut ChunkRng, dim: usize) -> LinearMap {
        let q = haar_orthogonal(rng, dim);
        match *self {
            Self::Rotation => q,
            Self::SymmetricBounded { c } => {
                let u: Vec<f64> = (0..dim).map(|_| c * (2.0 * rng.uniform() - 1.0)).collect();
                let mut qd = q.clone();
                for i in 0..dim {
                    for (j, uj) in u.iter().enumerate() {
                        qd.set(i, j, q.get(i, j) * uj);
                    }
                }
                qd.matmul(&q.transpose())
                    .and_then(|m| m.symmetrized())
                    .expect("square factors")
            }
        }
    }
}

/// Haar-distributed orthogonal matrix: Gram–Schmidt on a Gaussian matrix with
/// the sign of each column fixed by the diagonal of `R` in `G = QR`.
pub fn haar_orthogonal(rng: &mut ChunkRng, dim: usize) -> LinearMap {
    let mut cols: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| rng.normal()).collect())
        .collect();
    for j in 0..dim {
        for i in 0..j {
            let (done, rest) = cols.split_at_mut(j);
            let qi = &done[i];
            let cj = &mut rest[0];
            let dot: f64 = qi.iter().zip(cj.iter()).map(|(a, b)| a * b).sum();
            for (c, q) in cj.iter_mut().zip(qi) {
                *c -= dot * q;
            }
        }
        let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        for c in &mut cols[j] {
            *c /= norm;
        }
    }
    let mut q = LinearMap::zeros(dim, dim);
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            q.set(i, j, *v);
        }
    }
    q
}

#[derive(Debug, Clone)]
enum LawKind {
    Base {
        family: Family,
        /// `sqrt(γ_k)` in eigenvalue order.
        scales: Vec<f64>,
    },
    Transformed {
        map: LinearMap,
        inner: Box<SubgaussianLaw>,
    },
    Sum(Vec<SubgaussianLaw>),
    IidMean {
        inner: Box<SubgaussianLaw>,
        n: usize,
    },
    RandomOperator {
        family: RandomOperatorFamily,
        inner: Box<SubgaussianLaw>,
    },
}

/// A centered, sampleable law on `R^dim` together with an operator `R` such
/// that `log E exp⟨u, X⟩ ≤ ⟨u, R u⟩ / 2` for every `u`.
#[derive(Debug, Clone)]
pub struct SubgaussianLaw {
    kind: LawKind,
    proxy: SymmetricOperator,
}

/// JSON-friendly description of how a law was assembled.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LawDescriptor {
    Gaussian { proxy: OperatorJson },
    Rademacher { proxy: OperatorJson },
    Uniform { proxy: OperatorJson },
    Transformed { map: LinearMap, inner: Box<LawDescriptor> },
    Sum { laws: Vec<LawDescriptor> },
    IidMean { n: usize, inner: Box<LawDescriptor> },
    RandomOperator {
        operator: RandomOperatorFamily,
        inner: Box<LawDescriptor>,
    },
}

/// Base law of the given family with proxy `R`.
pub fn make_law(family: Family, r: &SymmetricOperator) -> Result<SubgaussianLaw> {
    r.require_positive()?;
    let scales = r.eigenvalues().iter().map(|g| g.max(0.0).sqrt()).collect();
    Ok(SubgaussianLaw {
        kind: LawKind::Base { family, scales },
        proxy: r.clone(),
    })
}

/// Law of `A X`, with proxy `A R Aᵀ`.
pub fn transform_law(a: &LinearMap, law: &SubgaussianLaw) -> Result<SubgaussianLaw> {
    let proxy = conjugate(a, &law.proxy)?;
    Ok(SubgaussianLaw {
        kind: LawKind::Transformed {
            map: a.clone(),
            inner: Box::new(law.clone()),
        },
        proxy,
    })
}

/// Law of the sum of independent draws, with proxy `Σ R_i`.
pub fn sum_law(laws: &[SubgaussianLaw]) -> Result<SubgaussianLaw> {
    let (first, rest) = laws.split_first().ok_or(Error::Empty("list of laws"))?;
    if rest.is_empty() {
        return Ok(first.clone());
    }
    let mut proxy = first.proxy.clone();
    for law in rest {
        proxy = proxy.add(&law.proxy)?;
    }
    Ok(SubgaussianLaw {
        kind: LawKind::Sum(laws.to_vec()),
        proxy,
    })
}

/// Law of the mean of `n` independent copies, with proxy `R / n`.
pub fn iid_mean_law(law: &SubgaussianLaw, n: usize) -> Result<SubgaussianLaw> {
    if n < 1 {
        return Err(Error::Domain("i.i.d. mean needs at least one copy".into()));
    }
    if n == 1 {
        return Ok(law.clone());
    }
    Ok(SubgaussianLaw {
        proxy: law.proxy.scaled(1.0 / n as f64)?,
        kind: LawKind::IidMean {
            inner: Box::new(law.clone()),
            n,
        },
    })
}

/// Proxy `C R Cᵀ` for `A X`, with `A` a random operator independent of `X`
/// and `AᵀA ⪯ CᵀC` almost surely. For a self-adjoint `A` with `‖A‖ ≤ c`,
/// pass `C = c·I`.
pub fn random_operator_proxy(c: &LinearMap, r: &SymmetricOperator) -> Result<SymmetricOperator> {
    conjugate(c, r)
}

/// Law of `A X` for a fresh random operator `A` per draw. The proxy is
/// `random_operator_proxy(c·I, R)` with `c` the family's norm bound.
pub fn random_operator_law(
    family: RandomOperatorFamily,
    law: &SubgaussianLaw,
) -> Result<SubgaussianLaw> {
    let c = family.norm_bound();
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::Domain(format!("operator norm bound must be >= 0, got {c}")));
    }
    let bound = LinearMap::identity(law.dim()).scaled(c);
    Ok(SubgaussianLaw {
        proxy: random_operator_proxy(&bound, &law.proxy)?,
        kind: LawKind::RandomOperator {
            family,
            inner: Box::new(law.clone()),
        },
    })
}

impl SubgaussianLaw {
    pub fn dim(&self) -> usize {
        self.proxy.dim()
    }

    pub fn proxy(&self) -> &SymmetricOperator {
        &self.proxy
    }

    /// `"gaussian"`, `"rademacher"`, `"uniform"`, `"transformed"`, `"sum"`,
    /// `"iid_mean"` or `"random_operator"`.
    pub fn family_tag(&self) -> &'static str {
        match &self.kind {
            LawKind::Base { family, .. } => family.name(),
            LawKind::Transformed { .. } => "transformed",
            LawKind::Sum(_) => "sum",
            LawKind::IidMean { .. } => "iid_mean",
            LawKind::RandomOperator { .. } => "random_operator",
        }
    }

    pub fn descriptor(&self) -> LawDescriptor {
        match &self.kind {
            LawKind::Base { family, .. } => {
                let proxy = OperatorJson::from(self.proxy.clone());
                match family {
                    Family::Gaussian => LawDescriptor::Gaussian { proxy },
                    Family::Rademacher => LawDescriptor::Rademacher { proxy },
                    Family::Uniform => LawDescriptor::Uniform { proxy },
                }
            }
            LawKind::Transformed { map, inner } => LawDescriptor::Transformed {
                map: map.clone(),
                inner: Box::new(inner.descriptor()),
            },
            LawKind::Sum(laws) => LawDescriptor::Sum {
                laws: laws.iter().map(Self::descriptor).collect(),
            },
            LawKind::IidMean { inner, n } => LawDescriptor::IidMean {
                n: *n,
                inner: Box::new(inner.descriptor()),
            },
            LawKind::RandomOperator { family, inner } => LawDescriptor::RandomOperator {
                operator: *family,
                inner: Box::new(inner.descriptor()),
            },
        }
    }

    /// One draw into `out` (length `dim`), consuming `rng` sequentially.
    pub fn draw(&self, rng: &mut ChunkRng, out: &mut [f64]) {
        match &self.kind {
            LawKind::Base { family, scales } => {
                let coeffs: Vec<f64> =
                    scales.iter().map(|s| s * family.standard_draw(rng)).collect();
                self.proxy.combine_eigenvectors(&coeffs, out);
            }
            LawKind::Transformed { map, inner } => {
                let mut x = vec![0.0; inner.dim()];
                inner.draw(rng, &mut x);
                map.apply_into(&x, out);
            }
            LawKind::Sum(laws) => {
                out.fill(0.0);
                let mut x = vec![0.0; out.len()];
                for law in laws {
                    law.draw(rng, &mut x);
                    for (o, v) in out.iter_mut().zip(&x) {
                        *o += v;
                    }
                }
            }
            LawKind::IidMean { inner, n } => {
                out.fill(0.0);
                let mut x = vec![0.0; out.len()];
                for _ in 0..*n {
                    inner.draw(rng, &mut x);
                    for (o, v) in out.iter_mut().zip(&x) {
                        *o += v;
                    }
                }
                let scale = 1.0 / *n as f64;
                for o in out.iter_mut() {
                    *o *= scale;
                }
            }
            LawKind::RandomOperator { family, inner } => {
                let mut x = vec![0.0; inner.dim()];
                inner.draw(rng, &mut x);
                let a = family.draw(rng, inner.dim());
                a.apply_into(&x, out);
            }
        }
    }

    /// Draws `n` rows with `seed` and reduces every chunk with `f`, which
    /// receives the chunk's rows as one row-major slice. Results come back in
    /// chunk order whatever the size of the current rayon pool.
    pub fn map_chunks<T, F>(&self, n: usize, seed: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync,
    {
        let d = self.dim();
        (0..chunk_count(n))
            .into_par_iter()
            .map(|c| {
                let rows = chunk_rows(n, c);
                let mut rng = ChunkRng::new(seed, c as u64);
                let mut buf = vec![0.0; rows.len() * d];
                for row in buf.chunks_exact_mut(d) {
                    self.draw(&mut rng, row);
                }
                f(&buf)
            })
            .collect()
    }
}

/// Materialised draws, one row per sample.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub n: usize,
    pub dim: usize,
    pub data: Vec<f64>,
    pub seed: u64,
    pub law: LawDescriptor,
}

/// `n` draws, deterministic in `(law, n, seed)`.
pub fn sample(law: &SubgaussianLaw, n: usize, seed: u64) -> Result<SampleBatch> {
    if n < 1 {
        return Err(Error::Empty("sample batch"));
    }
    let data = law.map_chunks(n, seed, <[f64]>::to_vec).concat();
    Ok(SampleBatch {
        n,
        dim: law.dim(),
        data,
        seed,
        law: law.descriptor(),
    })
}

impl SampleBatch {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for row in self.rows() {
            for (a, b) in m.iter_mut().zip(row) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.n as f64);
        m
    }

    /// Second-moment matrix `(1/n) Σ x xᵀ` (the laws are centered).
    pub fn second_moment(&self) -> LinearMap {
        let d = self.dim;
        let mut acc = vec![0.0; d * d];
        for row in self.rows() {
            for i in 0..d {
                let xi = row[i];
                for j in i..d {
                    acc[i * d + j] += xi * row[j];
                }
            }
        }
        let mut m = LinearMap::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = acc[i * d + j] / self.n as f64;
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    /// CSV with header `x0,...,x{d-1}` and one row per draw.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((0..self.dim).map(|i| format!("x{i}")))?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{loewner_leq, norms};
    use approx::assert_abs_diff_eq;

    fn diag(v: &[f64]) -> SymmetricOperator {
        SymmetricOperator::diagonal(v.to_vec()).unwrap()
    }

    #[test]
    fn make_law_rejects_indefinite_proxy() {
        assert!(matches!(
            make_law(Family::Gaussian, &diag(&[1.0, -0.5])),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn rademacher_squared_norm_is_trace() {
        let r = SymmetricOperator::dense(
            LinearMap::from_rows(&[vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.2], vec![0.0, 0.2, 0.5]])
                .unwrap(),
        )
        .unwrap();
        let tr = norms(&r).unwrap().trace;
        let batch = sample(&make_law(Family::Rademacher, &r).unwrap(), 500, 3).unwrap();
        for row in batch.rows() {
            let sq: f64 = row.iter().map(|x| x * x).sum();
            assert_abs_diff_eq!(sq, tr, epsilon = 1e-12 * tr);
        }
    }

    #[test]
    fn rademacher_identity_has_sign_coordinates() {
        let batch = sample(&make_law(Family::Rademacher, &diag(&[1.0, 1.0])).unwrap(), 1000, 9)
            .unwrap();
        assert!(batch.data.iter().all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn uniform_support() {
        let batch = sample(&make_law(Family::Uniform, &diag(&[1.0])).unwrap(), 10_000, 1).unwrap();
        let edge = 3f64.sqrt();
        assert!(batch.data.iter().all(|x| x.abs() <= edge));
        assert!(batch.data.iter().any(|x| x.abs() > 0.95 * edge));
    }

    #[test]
    fn sampling_is_deterministic() {
        let law = make_law(Family::Gaussian, &diag(&[1.0, 0.3])).unwrap();
        let a = sample(&law, 10_000, 42).unwrap();
        let b = sample(&law, 10_000, 42).unwrap();
        let c = sample(&law, 10_000, 43).unwrap();
        assert_eq!(a.data, b.data);
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn sampling_is_worker_count_invariant() {
        let law = iid_mean_law(&make_law(Family::Gaussian, &diag(&[1.0, 0.5, 0.2])).unwrap(), 3)
            .unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample(&law, 20_000, 5).unwrap().data)
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn transform_law_examples() {
        let base = make_law(Family::Gaussian, &SymmetricOperator::identity(2)).unwrap();
        let same = transform_law(&LinearMap::identity(2), &base).unwrap();
        assert_eq!(same.proxy().diagonal_values().unwrap(), &[1.0, 1.0]);
        assert_eq!(same.family_tag(), "transformed");

        let proj = transform_law(&LinearMap::from_diagonal(&[1.0, 0.0]), &base).unwrap();
        assert_eq!(proj.proxy().diagonal_values().unwrap(), &[1.0, 0.0]);

        let s = 0.5f64.sqrt();
        let avg = transform_law(&LinearMap::from_rows(&[vec![s, s]]).unwrap(), &base).unwrap();
        assert_eq!(avg.dim(), 1);
        assert_abs_diff_eq!(avg.proxy().to_dense().get(0, 0), 1.0, epsilon = 1e-15);

        assert!(transform_law(&LinearMap::identity(3), &base).is_err());
    }

    #[test]
    fn sum_law_examples() {
        let r = diag(&[1.0, 0.25]);
        let g = make_law(Family::Gaussian, &r).unwrap();
        assert_eq!(sum_law(std::slice::from_ref(&g)).unwrap().proxy(), g.proxy());
        let two = sum_law(&[g.clone(), g.clone()]).unwrap();
        assert_eq!(two.proxy().diagonal_values().unwrap(), &[2.0, 0.5]);

        let mixed = sum_law(&[
            make_law(Family::Gaussian, &diag(&[1.0])).unwrap(),
            make_law(Family::Rademacher, &diag(&[1.0])).unwrap(),
        ])
        .unwrap();
        assert_eq!(mixed.proxy().diagonal_values().unwrap(), &[2.0]);

        assert!(matches!(sum_law(&[]), Err(Error::Empty(_))));
        let other = make_law(Family::Gaussian, &diag(&[1.0])).unwrap();
        assert!(matches!(
            sum_law(&[g, other]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn iid_mean_examples() {
        let g = make_law(Family::Gaussian, &SymmetricOperator::identity(2)).unwrap();
        assert_eq!(iid_mean_law(&g, 1).unwrap().family_tag(), "gaussian");
        let m = iid_mean_law(&g, 4).unwrap();
        assert_eq!(m.proxy().diagonal_values().unwrap(), &[0.25, 0.25]);
        assert!(iid_mean_law(&g, 0).is_err());
    }

    #[test]
    fn iid_mean_variance() {
        let g = make_law(Family::Gaussian, &diag(&[1.0])).unwrap();
        let m = iid_mean_law(&g, 100).unwrap();
        let n = 100_000;
        let batch = sample(&m, n, 17).unwrap();
        let var = batch.data.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // Var of the sample variance of N(0, 0.01): 2·0.01²/n
        let se = (2.0 * 1e-4 / n as f64).sqrt();
        assert!((var - 0.01).abs() < 5.0 * se, "var = {var}");
    }

    #[test]
    fn random_operator_proxy_examples() {
        let r = diag(&[1.0, 0.25]);
        assert_eq!(
            random_operator_proxy(&LinearMap::identity(2), &r).unwrap(),
            r
        );
        let c = LinearMap::identity(2).scaled(2.0);
        let p = random_operator_proxy(&c, &r).unwrap();
        assert_eq!(p.diagonal_values().unwrap(), &[4.0, 1.0]);
        let law = random_operator_law(
            RandomOperatorFamily::SymmetricBounded { c: 2.0 },
            &make_law(Family::Gaussian, &r).unwrap(),
        )
        .unwrap();
        assert_eq!(law.proxy().diagonal_values().unwrap(), &[4.0, 1.0]);
    }

    #[test]
    fn haar_matrices_are_orthogonal() {
        let mut rng = ChunkRng::new(3, 0);
        for d in [1usize, 2, 6] {
            let q = haar_orthogonal(&mut rng, d);
            let qtq = q.transpose().matmul(&q).unwrap();
            assert!(qtq.sub(&LinearMap::identity(d)).unwrap().max_abs() < 1e-12);
        }
        let a = RandomOperatorFamily::SymmetricBounded { c: 0.7 }.draw(&mut rng, 5);
        let op = SymmetricOperator::dense(a).unwrap().op_norm();
        assert!(op <= 0.7 + 1e-12);
    }

    #[test]
    fn covariance_dominated_by_proxy() {
        let r = SymmetricOperator::dense(
            LinearMap::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.5]]).unwrap(),
        )
        .unwrap();
        for fam in Family::ALL {
            let law = make_law(fam, &r).unwrap();
            let batch = sample(&law, 200_000, 23).unwrap();
            let cov = batch.second_moment();
            let err = cov.sub(&r.to_dense()).unwrap().max_abs();
            assert!(err < 0.02, "{fam}: covariance error {err}");
            let slack = r.scaled(1.02).unwrap();
            let cov_op = SymmetricOperator::dense(cov).unwrap();
            assert!(loewner_leq(&cov_op, &slack, 1e-10).unwrap(), "{fam}");
        }
    }

    #[test]
    fn csv_export() {
        let law = make_law(Family::Rademacher, &diag(&[1.0, 4.0])).unwrap();
        let batch = sample(&law, 3, 0).unwrap();
        let mut out = Vec::new();
        batch.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x0,x1");
        assert_eq!(lines.len(), 4);
        assert!(lines[1..].iter().all(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            v[0].abs() == 1.0 && v[1].abs() == 2.0
        }));
        let json = serde_json::to_value(batch.law).unwrap();
        assert_eq!(json["family"], "rademacher");
        assert_eq!(json["proxy"]["kind"], "diagonal");
    }
}
