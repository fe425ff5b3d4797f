//! Randomized checks of the operator inequalities the bounds rest on.

use rayon::prelude::*;
use serde::Serialize;
use subgauss::linalg::{symmetric_eigen, LinearMap};
use subgauss::operator::{conjugate, loewner_leq, rank_one_projector, trace_product};
use subgauss::rng::{ChunkRng, StreamTag};
use subgauss::{Result, SymmetricOperator};

use crate::config::SuiteConfig;

pub const PROPERTIES: [&str; 5] = [
    "cyclic_trace",
    "trace_order",
    "conjugation_monotone",
    "gram_order_implies_conjugation_order",
    "projector_trace",
];

#[derive(Debug, Clone, Serialize)]
pub struct PropertyRow {
    pub property: &'static str,
    pub instances: usize,
    pub violations: usize,
    /// Largest violation, relative to the tolerance scale.
    pub worst: f64,
}

struct Gen(ChunkRng);

impl Gen {
    fn dim(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.0.next_u64() % (hi - lo + 1) as u64) as usize
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> LinearMap {
        let v = (0..rows * cols).map(|_| self.0.normal()).collect();
        LinearMap::new(rows, cols, v).expect("shape")
    }

    fn symmetric(&mut self, dim: usize) -> Result<LinearMap> {
        self.matrix(dim, dim).symmetrized()
    }

    fn positive(&mut self, dim: usize) -> Result<SymmetricOperator> {
        let rank = self.dim(1, dim);
        let g = self.matrix(dim, rank);
        SymmetricOperator::dense(g.matmul(&g.transpose())?.symmetrized()?)
    }

    fn contraction(&mut self, dim: usize) -> Result<LinearMap> {
        let k = self.matrix(dim, dim);
        let op = symmetric_eigen(&k.gram())?.values[0].max(0.0).sqrt();
        Ok(k.scaled((1.0 - 0.5 * self.0.uniform()) / op))
    }
}

/// Signed gaps `lhs − rhs` of each property on one instance, scaled so that
/// a positive value above `tol` is a violation.
fn instance(cfg: &SuiteConfig, index: usize) -> Result<[f64; 5]> {
    let mut g = Gen(ChunkRng::tagged(cfg.seed, StreamTag::Auxiliary, index as u64));
    let (m, d) = (g.dim(cfg.min_dim, cfg.max_dim), g.dim(cfg.min_dim, cfg.max_dim));
    let tol = cfg.tolerance;
    let mut gaps = [0.0; 5];

    let a = g.matrix(m, d);
    let b = g.matrix(d, m);
    let (ab, ba) = (trace_product(&a, &b)?, trace_product(&b, &a)?);
    gaps[0] = (ab - ba).abs() / (1.0 + ab.abs());

    let p = g.positive(d)?;
    let c = SymmetricOperator::dense(g.symmetric(d)?)?;
    let r = c.add(&g.positive(d)?)?;
    let (lo, hi) = (trace_product(&p, &c)?, trace_product(&p, &r)?);
    gaps[1] = (lo - hi) / (1.0 + lo.abs() + hi.abs());

    let c = g.positive(d)?;
    let r = c.add(&g.positive(d)?)?;
    gaps[2] = loewner_gap(&conjugate(&a, &c)?, &conjugate(&a, &r)?, tol)?;

    let cmap = g.matrix(m, d);
    let amap = g.contraction(m)?.matmul(&cmap)?;
    let r = g.positive(d)?;
    gaps[3] = loewner_gap(&conjugate(&amap, &r)?, &conjugate(&cmap, &r)?, tol)?;

    let s = g.symmetric(d)?;
    let u = g.matrix(d, 1).entries().to_vec();
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let unit: Vec<f64> = u.iter().map(|x| x / norm).collect();
    let form: f64 = unit.iter().zip(s.apply(&unit)?).map(|(x, y)| x * y).sum();
    let tr = trace_product(&s, &rank_one_projector(&u)?)?;
    gaps[4] = (form - tr).abs() / (1.0 + form.abs());

    Ok(gaps)
}

/// `tol` if `a ⪯ b` fails at tolerance `tol`, else 0; the suite only counts.
fn loewner_gap(a: &SymmetricOperator, b: &SymmetricOperator, tol: f64) -> Result<f64> {
    if loewner_leq(a, b, tol)? {
        return Ok(0.0);
    }
    let diff = b.to_dense().sub(&a.to_dense())?;
    let min = *symmetric_eigen(&diff)?.values.last().expect("nonempty");
    Ok(-min / (1.0 + a.op_norm() + b.op_norm()))
}

pub fn run(cfg: &SuiteConfig) -> Result<Vec<PropertyRow>> {
    let gaps = (0..cfg.instances)
        .into_par_iter()
        .map(|i| instance(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(PROPERTIES
        .iter()
        .enumerate()
        .map(|(k, &property)| {
            let col = gaps.iter().map(|g| g[k]);
            PropertyRow {
                property,
                instances: cfg.instances,
                violations: col.clone().filter(|&v| v > cfg.tolerance).count(),
                worst: col.fold(0.0, f64::max),
            }
        })
        .collect())
}
