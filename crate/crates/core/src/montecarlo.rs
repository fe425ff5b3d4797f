//! Empirical verification of the tail and CGF bounds.
//!
//! Exceedances are counted exactly and certified with one-sided
//! Clopper–Pearson bounds, so a failing row is evidence of a violation rather
//! than a hint. Statistics are evaluated chunk by chunk while sampling; memory
//! does not grow with `n`.

use std::io::Write;

use serde::Serialize;

use crate::bounds::{squared_norm_threshold, Statistic, TailFunction};
use crate::error::{ensure_dim, Error, Result};
use crate::law::{LawDescriptor, SampleBatch, SubgaussianLaw};
use crate::operator::NormTriple;
use crate::spectrum::SpectrumFamily;

pub use crate::special::{chi_square_sf, clopper_pearson_upper};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub exceed_count: u64,
    pub n: u64,
    pub p_hat: f64,
    pub cp_upper: f64,
}

impl TailEstimate {
    pub fn new(exceed_count: u64, n: u64, confidence: f64) -> Result<Self> {
        Ok(Self {
            exceed_count,
            n,
            p_hat: exceed_count as f64 / n as f64,
            cp_upper: clopper_pearson_upper(exceed_count, n, confidence)?,
        })
    }
}

fn check_confidence(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("confidence must lie in (0, 1), got {confidence}")))
    }
}

fn check_statistic(statistic: &Statistic, dim: usize) -> Result<()> {
    if let Statistic::Transformed { map } = statistic {
        ensure_dim("statistic map input", dim, map.cols())?;
    }
    Ok(())
}

/// Fraction of rows whose statistic strictly exceeds `threshold`, with its
/// Clopper–Pearson upper bound at `confidence`.
pub fn empirical_tail(
    batch: &SampleBatch,
    statistic: &Statistic,
    threshold: f64,
    confidence: f64,
) -> Result<TailEstimate> {
    if batch.n == 0 {
        return Err(Error::Empty("sample batch"));
    }
    check_confidence(confidence)?;
    check_statistic(statistic, batch.dim)?;
    let count = batch
        .rows()
        .filter(|x| statistic.eval(x) > threshold)
        .count() as u64;
    TailEstimate::new(count, batch.n as u64, confidence)
}

/// Running `(max, Σ exp(v − max), count)` of a log-sum-exp reduction.
#[derive(Debug, Clone, Copy)]
struct LogSumExp {
    max: f64,
    scaled_sum: f64,
}

impl LogSumExp {
    const EMPTY: Self = Self {
        max: f64::NEG_INFINITY,
        scaled_sum: 0.0,
    };

    fn push(&mut self, v: f64) {
        if v > self.max {
            self.scaled_sum = self.scaled_sum * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.scaled_sum += (v - self.max).exp();
        }
    }

    fn merge(self, other: Self) -> Self {
        if other.max == f64::NEG_INFINITY {
            return self;
        }
        if self.max == f64::NEG_INFINITY {
            return other;
        }
        let max = self.max.max(other.max);
        Self {
            max,
            scaled_sum: self.scaled_sum * (self.max - max).exp()
                + other.scaled_sum * (other.max - max).exp(),
        }
    }

    fn log_mean(&self, n: usize) -> f64 {
        self.max + self.scaled_sum.ln() - (n as f64).ln()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(())
}

fn finish_cgf(lse: LogSumExp, n: usize, lambda: f64) -> Result<f64> {
    let v = lse.log_mean(n);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!(
            "empirical CGF at lambda = {lambda} is not finite"
        )))
    }
}

/// `ln((1/n) Σ exp(λ ‖x_i‖²))`, evaluated with a max shift.
pub fn empirical_cgf(batch: &SampleBatch, lambda: f64) -> Result<f64> {
    if batch.n == 0 {
        return Err(Error::Empty("sample batch"));
    }
    check_lambda(lambda)?;
    let mut lse = LogSumExp::EMPTY;
    for row in batch.rows() {
        lse.push(lambda * Statistic::SquaredNorm.eval(row));
    }
    finish_cgf(lse, batch.n, lambda)
}

/// Empirical CGF with the delta-method standard error of its logarithm,
/// `sd(e^{λ‖x‖²}) / (√n · mean(e^{λ‖x‖²}))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgfEstimate {
    pub lambda: f64,
    pub value: f64,
    pub std_error: f64,
}

/// Streaming empirical CGF over `n` fresh draws, for several `λ` at once.
pub fn streaming_cgf(
    law: &SubgaussianLaw,
    lambdas: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<CgfEstimate>> {
    if n < 2 {
        return Err(Error::Domain("streaming CGF needs at least two draws".into()));
    }
    lambdas.iter().try_for_each(|&l| check_lambda(l))?;
    let d = law.dim();
    // Per λ: log-sum-exp of λs and of 2λs (for the second moment).
    let partials = law.map_chunks(n, seed, |rows| {
        let mut acc = vec![(LogSumExp::EMPTY, LogSumExp::EMPTY); lambdas.len()];
        for x in rows.chunks_exact(d) {
            let s = Statistic::SquaredNorm.eval(x);
            for (a, &l) in acc.iter_mut().zip(lambdas) {
                a.0.push(l * s);
                a.1.push(2.0 * l * s);
            }
        }
        acc
    });
    let mut total = vec![(LogSumExp::EMPTY, LogSumExp::EMPTY); lambdas.len()];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.0 = t.0.merge(p.0);
            t.1 = t.1.merge(p.1);
        }
    }
    lambdas
        .iter()
        .zip(total)
        .map(|(&lambda, (first, second))| {
            let value = finish_cgf(first, n, lambda)?;
            let log_m2 = finish_cgf(second, n, 2.0 * lambda)?;
            // Var(e^{λs}) / mean² = m2 / m1² − 1
            let rel_var = ((log_m2 - 2.0 * value).exp() - 1.0).max(0.0);
            Ok(CgfEstimate {
                lambda,
                value,
                std_error: (rel_var / n as f64).sqrt(),
            })
        })
        .collect()
}

/// `ln E exp(λ ‖ξ‖²) = −½ Σ ln(1 − 2λγ_i)` for `ξ ~ N(0, diag γ)`.
pub fn exact_gaussian_sqnorm_cgf(eigenvalues: &[f64], lambda: f64) -> Result<f64> {
    let gmax = eigenvalues.iter().fold(0.0_f64, |m, &g| m.max(g));
    if lambda.is_nan() || lambda < 0.0 || 2.0 * lambda * gmax >= 1.0 {
        return Err(Error::Domain(format!(
            "lambda = {lambda} outside [0, 1/(2·{gmax}))"
        )));
    }
    Ok(-0.5
        * eigenvalues
            .iter()
            .map(|&g| (-2.0 * lambda * g).ln_1p())
            .sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub t: f64,
    pub threshold: f64,
    pub exceed_count: u64,
    pub n: u64,
    pub p_hat: f64,
    pub cp_upper: f64,
    pub bound: f64,
    /// `cp_upper ≤ e^{-t}`: the bound is confirmed at the report's confidence.
    pub pass: bool,
}

impl TailRow {
    /// Point estimate within the bound, whether or not the CP bound confirms it.
    pub fn point_pass(&self) -> bool {
        self.p_hat <= self.bound
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub bound: TailFunction,
    pub law: LawDescriptor,
    pub seed: u64,
    pub confidence: f64,
    pub rows: Vec<TailRow>,
}

impl TailReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

/// Samples `n` draws of `law` with `seed` and compares, for every `t` in
/// `t_grid`, the empirical exceedance of `bound.threshold(t)` with `e^{-t}`.
pub fn verify_bound(
    law: &SubgaussianLaw,
    bound: &TailFunction,
    t_grid: &[f64],
    n: usize,
    seed: u64,
    confidence: f64,
) -> Result<TailReport> {
    if n == 0 {
        return Err(Error::Empty("Monte Carlo sample"));
    }
    if t_grid.is_empty() {
        return Err(Error::Empty("t grid"));
    }
    check_confidence(confidence)?;
    check_statistic(&bound.statistic, law.dim())?;
    let thresholds = t_grid
        .iter()
        .map(|&t| bound.threshold(t))
        .collect::<Result<Vec<_>>>()?;
    let d = law.dim();
    let statistic = &bound.statistic;
    let counts = law
        .map_chunks(n, seed, |rows| {
            let mut c = vec![0u64; thresholds.len()];
            for x in rows.chunks_exact(d) {
                let s = statistic.eval(x);
                for (ci, &th) in c.iter_mut().zip(&thresholds) {
                    if s > th {
                        *ci += 1;
                    }
                }
            }
            c
        })
        .into_iter()
        .fold(vec![0u64; thresholds.len()], |mut acc, c| {
            acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
            acc
        });
    let rows = t_grid
        .iter()
        .zip(&thresholds)
        .zip(counts)
        .map(|((&t, &threshold), count)| {
            let est = TailEstimate::new(count, n as u64, confidence)?;
            let bound = (-t).exp();
            Ok(TailRow {
                t,
                threshold,
                exceed_count: count,
                n: n as u64,
                p_hat: est.p_hat,
                cp_upper: est.cp_upper,
                bound,
                pass: est.cp_upper <= bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TailReport {
        bound: bound.clone(),
        law: law.descriptor(),
        seed,
        confidence,
        rows,
    })
}

/// Empirical `1 − δ` quantile (order statistic `⌈(1−δ) n⌉`) of a statistic.
pub fn empirical_quantile(
    law: &SubgaussianLaw,
    statistic: &Statistic,
    level: f64,
    n: usize,
    seed: u64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Empty("Monte Carlo sample"));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1], got {level}")));
    }
    check_statistic(statistic, law.dim())?;
    let d = law.dim();
    let mut values: Vec<f64> = law
        .map_chunks(n, seed, |rows| {
            rows.chunks_exact(d).map(|x| statistic.eval(x)).collect::<Vec<_>>()
        })
        .concat();
    values.sort_by(f64::total_cmp);
    let rank = ((level * n as f64).ceil() as usize).clamp(1, n);
    Ok(values[rank - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationRow {
    pub d: usize,
    pub trace: f64,
    pub hs: f64,
    pub op: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationTable {
    pub family: SpectrumFamily,
    pub t: f64,
    pub rows: Vec<TruncationRow>,
    /// Norms and threshold of the untruncated operator.
    pub limit: Option<(NormTriple, f64)>,
}

impl TruncationTable {
    /// Every column nondecreasing in `d`.
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| {
            let (a, b) = (&w[0], &w[1]);
            a.trace <= b.trace && a.hs <= b.hs && a.op <= b.op && a.threshold <= b.threshold
        })
    }

    /// `limit threshold − threshold at the largest d`.
    pub fn limit_gap(&self) -> Option<f64> {
        let last = self.rows.last()?;
        self.limit.map(|(_, th)| th - last.threshold)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Norms and thresholds of the rank-`d` truncations `Π_d R` of a spectrum
/// family, next to the untruncated limit.
pub fn truncation_convergence(
    family: SpectrumFamily,
    d_grid: &[usize],
    t: f64,
) -> Result<TruncationTable> {
    if family == SpectrumFamily::Explicit {
        return Err(Error::Domain(
            "truncation needs a generated spectrum family".into(),
        ));
    }
    let mut grid = d_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.first().is_none_or(|&d| d == 0) {
        return Err(Error::Domain("d grid must be nonempty and positive".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    let (mut trace, mut hs2, mut op) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut next = 1;
    for &d in &grid {
        while next <= d {
            let g = family.eigenvalue(next).expect("generated family");
            trace += g;
            hs2 += g * g;
            op = op.max(g);
            next += 1;
        }
        let nt = NormTriple {
            trace,
            hs: hs2.sqrt(),
            op,
        };
        rows.push(TruncationRow {
            d,
            trace,
            hs: nt.hs,
            op,
            threshold: squared_norm_threshold(&nt, t)?,
        });
    }
    let limit = match family.limit_norms() {
        Some(nt) => Some((nt, squared_norm_threshold(&nt, t)?)),
        None => None,
    };
    Ok(TruncationTable {
        family,
        t,
        rows,
        limit,
    })
}
