//! Closed-form concentration bounds for `‖X‖²` of an `R`-subgaussian `X`.
//!
//! Everything here is a function of the [`NormTriple`] of the proxy, so the
//! untruncated norms of an infinite-dimensional operator can be fed in
//! directly. ε-parameterised tails are capped at 1.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::LinearMap;
use crate::operator::{conjugate, norms, NormTriple, SymmetricOperator};

fn check_t(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Domain(format!("epsilon must be > 0, got {eps}")));
    }
    Ok(())
}

/// `λ tr + λ² hs² / (1 − 2λ op)` on `0 ≤ λ < 1/(2 op)`.
pub fn cgf_bound(nt: &NormTriple, lambda: f64) -> Result<f64> {
    if lambda.is_nan() || lambda < 0.0 || 2.0 * lambda * nt.op >= 1.0 {
        return Err(Error::Domain(format!(
            "lambda = {lambda} outside [0, 1/(2·{}))",
            nt.op
        )));
    }
    Ok(lambda * nt.trace + lambda * lambda * nt.hs * nt.hs / (1.0 - 2.0 * lambda * nt.op))
}

/// `tr + 2√t hs + 2t op`, exceeded by `‖X‖²` with probability at most `e^{-t}`.
pub fn squared_norm_threshold(nt: &NormTriple, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(nt.trace + 2.0 * t.sqrt() * nt.hs + 2.0 * t * nt.op)
}

/// `(√tr + √(2t op))²`, the simplified upper envelope of
/// [`squared_norm_threshold`].
pub fn binomial_threshold(nt: &NormTriple, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok((nt.trace.sqrt() + (2.0 * t * nt.op).sqrt()).powi(2))
}

/// `√tr + √(2 ln(1/δ) op)`, a `1 − δ` bound on `‖X‖`.
pub fn norm_deviation(nt: &NormTriple, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1], got {delta}")));
    }
    Ok(nt.trace.sqrt() + (2.0 * (1.0 / delta).ln() * nt.op).sqrt())
}

/// `P[‖X‖ > ε] ≤ exp(−ε² / (8 op))`, claimed only for `ε > 2√tr`.
pub fn outer_tail(nt: &NormTriple, eps: f64) -> Result<f64> {
    let floor = 2.0 * nt.trace.sqrt();
    if eps.is_nan() || eps <= floor {
        return Err(Error::Precondition(format!(
            "outer tail needs epsilon > 2·sqrt(tr) = {floor}, got {eps}"
        )));
    }
    Ok((-eps * eps / (8.0 * nt.op)).exp().min(1.0))
}

/// Tail of the mean of `n` i.i.d. copies: `exp(−n ε² / (8 op))` for
/// `ε > 2√(tr/n)`. `nt` are the norms of the single-copy proxy.
pub fn hoeffding_sum_tail(nt: &NormTriple, n: usize, eps: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("Hoeffding tail needs n >= 1".into()));
    }
    let nf = n as f64;
    let floor = 2.0 * (nt.trace / nf).sqrt();
    if eps.is_nan() || eps <= floor {
        return Err(Error::Precondition(format!(
            "Hoeffding tail needs epsilon > 2·sqrt(tr/n) = {floor}, got {eps}"
        )));
    }
    Ok((-nf * eps * eps / (8.0 * nt.op)).exp().min(1.0))
}

/// Sub-gamma (Bernstein) tail of `‖X‖² − tr > ε`:
/// `exp(−ε² / (4 (hs² + ε op)))`.
pub fn bernstein_tail(nt: &NormTriple, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let v = nt.hs * nt.hs;
    Ok((-eps * eps / (4.0 * (v + eps * nt.op))).exp().min(1.0))
}

/// Sub-exponential competitor: `exp(−ε² / (8 max(hs², ε op)))`.
pub fn chen_yang_tail(nt: &NormTriple, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let v = nt.hs * nt.hs;
    Ok((-eps * eps / (8.0 * v.max(eps * nt.op))).exp().min(1.0))
}

/// `σ² (tr(AᵀA) + 2√t ‖AᵀA‖_HS + 2t ‖AᵀA‖)`, the classical bound for a
/// `σ²`-weakly subgaussian `X`.
pub fn hsu_threshold(a: &LinearMap, sigma2: f64, t: f64) -> Result<f64> {
    check_t(t)?;
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::Domain(format!("sigma^2 must be > 0, got {sigma2}")));
    }
    squared_norm_threshold(&gram_norms(a)?.scaled(sigma2), t)
}

/// Norms of `AᵀA`.
pub fn gram_norms(a: &LinearMap) -> Result<NormTriple> {
    norms(&SymmetricOperator::dense(a.gram())?)
}

/// Threshold for `‖A X‖²` through the proxy `B = A R Aᵀ`.
pub fn quadratic_form_threshold(a: &LinearMap, r: &SymmetricOperator, t: f64) -> Result<f64> {
    squared_norm_threshold(&norms(&conjugate(a, r)?)?, t)
}

const GOLDEN_MAX_ITERATIONS: usize = 200;
const GOLDEN_RELATIVE_TOLERANCE: f64 = 1e-10;

/// Numerical Chernoff inversion of [`cgf_bound`]:
/// `tr + inf_λ (t + λ² hs² / (1 − 2λ op)) / λ` by golden-section search.
pub fn chernoff_invert(nt: &NormTriple, t: f64) -> Result<f64> {
    check_t(t)?;
    if t == 0.0 || nt.op == 0.0 {
        return Ok(nt.trace);
    }
    let v = nt.hs * nt.hs;
    let objective = |lambda: f64| (t + lambda * lambda * v / (1.0 - 2.0 * lambda * nt.op)) / lambda;

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 1.0 / (2.0 * nt.op));
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    for _ in 0..GOLDEN_MAX_ITERATIONS {
        if hi - lo <= GOLDEN_RELATIVE_TOLERANCE * 0.5 * (hi + lo) {
            return Ok(nt.trace + f1.min(f2));
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2);
        }
    }
    Err(Error::NoConvergence {
        routine: "golden-section Chernoff inversion",
        iterations: GOLDEN_MAX_ITERATIONS,
    })
}

/// Statistic of a draw `x` that a tail bound speaks about.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "statistic", rename_all = "snake_case")]
pub enum Statistic {
    SquaredNorm,
    Norm,
    /// `‖A x‖²`.
    Transformed { map: LinearMap },
}

impl Statistic {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::SquaredNorm => x.iter().map(|v| v * v).sum(),
            Self::Norm => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Self::Transformed { map } => (0..map.rows())
                .map(|i| {
                    let y: f64 = map.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
                    y * y
                })
                .sum(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SquaredNorm => "sqnorm",
            Self::Norm => "norm",
            Self::Transformed { .. } => "transformed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailKind {
    /// `‖X‖² > tr + 2√t hs + 2t op`.
    SquaredNorm,
    /// `‖X‖ > √tr + √(2t op)`.
    NormDeviation,
    /// `‖X‖ > ε` with `e^{-t} = exp(−ε²/(8 op))`.
    OuterTail,
    /// Norm of the mean of `n` copies; the triple is the single-copy one.
    HoeffdingMean { n: usize },
    /// `‖X‖² − tr > ε`, sub-gamma exponent.
    Bernstein,
    /// `‖X‖² − tr > ε`, sub-exponential exponent.
    ChenYang,
    /// `‖A X‖²` against `σ²·AᵀA`.
    Hsu { sigma2: f64 },
    /// `‖A X‖²` against `B = A R Aᵀ`.
    QuadraticForm,
}

/// A tail bound with its norms captured, evaluable as a threshold at
/// confidence `e^{-t}` or as a probability at a level of its statistic.
#[derive(Debug, Clone, Serialize)]
pub struct TailFunction {
    pub kind: TailKind,
    pub triple: NormTriple,
    #[serde(flatten)]
    pub statistic: Statistic,
}

impl TailFunction {
    fn build(kind: TailKind, triple: NormTriple, statistic: Statistic) -> Result<Self> {
        triple.validate()?;
        Ok(Self {
            kind,
            triple,
            statistic,
        })
    }

    pub fn squared_norm(nt: NormTriple) -> Result<Self> {
        Self::build(TailKind::SquaredNorm, nt, Statistic::SquaredNorm)
    }

    pub fn norm_deviation(nt: NormTriple) -> Result<Self> {
        Self::build(TailKind::NormDeviation, nt, Statistic::Norm)
    }

    pub fn outer_tail(nt: NormTriple) -> Result<Self> {
        Self::build(TailKind::OuterTail, nt, Statistic::Norm)
    }

    /// For samples of the mean of `n` copies of a law whose proxy has norms `nt`.
    pub fn hoeffding_mean(nt: NormTriple, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("Hoeffding tail needs n >= 1".into()));
        }
        Self::build(TailKind::HoeffdingMean { n }, nt, Statistic::Norm)
    }

    pub fn bernstein(nt: NormTriple) -> Result<Self> {
        Self::build(TailKind::Bernstein, nt, Statistic::SquaredNorm)
    }

    pub fn chen_yang(nt: NormTriple) -> Result<Self> {
        Self::build(TailKind::ChenYang, nt, Statistic::SquaredNorm)
    }

    pub fn hsu(a: &LinearMap, sigma2: f64) -> Result<Self> {
        if sigma2.is_nan() || sigma2 <= 0.0 {
            return Err(Error::Domain(format!("sigma^2 must be > 0, got {sigma2}")));
        }
        Self::build(
            TailKind::Hsu { sigma2 },
            gram_norms(a)?.scaled(sigma2),
            Statistic::Transformed { map: a.clone() },
        )
    }

    pub fn quadratic_form(a: &LinearMap, r: &SymmetricOperator) -> Result<Self> {
        Self::build(
            TailKind::QuadraticForm,
            norms(&conjugate(a, r)?)?,
            Statistic::Transformed { map: a.clone() },
        )
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            TailKind::SquaredNorm => "sqnorm",
            TailKind::NormDeviation => "norm_deviation",
            TailKind::OuterTail => "outer_tail",
            TailKind::HoeffdingMean { .. } => "hoeffding",
            TailKind::Bernstein => "bernstein",
            TailKind::ChenYang => "chen_yang",
            TailKind::Hsu { .. } => "hsu",
            TailKind::QuadraticForm => "quadratic_form",
        }
    }

    /// Level of the statistic exceeded with probability at most `e^{-t}`.
    pub fn threshold(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        let nt = &self.triple;
        match self.kind {
            TailKind::SquaredNorm | TailKind::Hsu { .. } | TailKind::QuadraticForm => {
                squared_norm_threshold(nt, t)
            }
            TailKind::NormDeviation => Ok(nt.trace.sqrt() + (2.0 * t * nt.op).sqrt()),
            TailKind::OuterTail => {
                let eps = (8.0 * nt.op * t).sqrt();
                outer_tail(nt, eps).map(|_| eps)
            }
            TailKind::HoeffdingMean { n } => {
                let eps = (8.0 * nt.op * t / n as f64).sqrt();
                hoeffding_sum_tail(nt, n, eps).map(|_| eps)
            }
            TailKind::Bernstein => {
                let (v, c) = (nt.hs * nt.hs, nt.op);
                Ok(nt.trace + 2.0 * t * c + 2.0 * (t * t * c * c + t * v).sqrt())
            }
            TailKind::ChenYang => {
                let (v, c) = (nt.hs * nt.hs, nt.op);
                Ok(nt.trace + (8.0 * t * v).sqrt().max(8.0 * t * c))
            }
        }
    }

    /// Bound on `P[statistic > level]`. For the Bernstein and Chen–Yang kinds
    /// `level` is the excess `ε` of `‖X‖²` over `tr`.
    pub fn probability(&self, level: f64) -> Result<f64> {
        let nt = &self.triple;
        match self.kind {
            TailKind::SquaredNorm | TailKind::Hsu { .. } | TailKind::QuadraticForm => {
                let excess = level - nt.trace;
                if level.is_nan() {
                    return Err(Error::Domain("level is NaN".into()));
                }
                if excess <= 0.0 {
                    return Ok(1.0);
                }
                if nt.op == 0.0 {
                    return Ok(0.0);
                }
                // 2 op s² + 2 hs s − excess = 0 with s = √t
                let s = (-nt.hs + (nt.hs * nt.hs + 2.0 * nt.op * excess).sqrt()) / (2.0 * nt.op);
                Ok((-s * s).exp().min(1.0))
            }
            TailKind::NormDeviation => {
                let excess = level - nt.trace.sqrt();
                if level.is_nan() {
                    return Err(Error::Domain("level is NaN".into()));
                }
                if excess <= 0.0 {
                    return Ok(1.0);
                }
                Ok((-excess * excess / (2.0 * nt.op)).exp().min(1.0))
            }
            TailKind::OuterTail => outer_tail(nt, level),
            TailKind::HoeffdingMean { n } => hoeffding_sum_tail(nt, n, level),
            TailKind::Bernstein => bernstein_tail(nt, level),
            TailKind::ChenYang => chen_yang_tail(nt, level),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn id1() -> NormTriple {
        NormTriple::new(1.0, 1.0, 1.0).unwrap()
    }

    fn basel3() -> NormTriple {
        NormTriple::from_eigenvalues(&[1.0, 0.25, 1.0 / 9.0])
    }

    #[test]
    fn cgf_examples() {
        assert_eq!(cgf_bound(&id1(), 0.0).unwrap(), 0.0);
        assert_relative_eq!(cgf_bound(&id1(), 0.25).unwrap(), 0.375, max_relative = 1e-15);
        assert!(cgf_bound(&id1(), 0.5).is_err());
        assert!(cgf_bound(&id1(), -0.1).is_err());
    }

    #[test]
    fn squared_norm_threshold_examples() {
        let nt = basel3();
        assert_eq!(squared_norm_threshold(&nt, 0.0).unwrap(), nt.trace);
        assert_eq!(squared_norm_threshold(&id1(), 1.0).unwrap(), 5.0);
        // 49/36 + 2·sqrt(1393/1296) + 2
        let exact = 49.0 / 36.0 + 2.0 * (1393.0f64 / 1296.0).sqrt() + 2.0;
        assert_relative_eq!(squared_norm_threshold(&nt, 1.0).unwrap(), exact, max_relative = 1e-15);
        assert_abs_diff_eq!(squared_norm_threshold(&nt, 1.0).unwrap(), 5.434606, epsilon = 1e-6);
        assert!(squared_norm_threshold(&nt, -1.0).is_err());
    }

    #[test]
    fn norm_deviation_examples() {
        let nt = basel3();
        assert_eq!(norm_deviation(&nt, 1.0).unwrap(), nt.trace.sqrt());
        assert_relative_eq!(norm_deviation(&id1(), (-2.0f64).exp()).unwrap(), 3.0, max_relative = 1e-15);
        assert!(norm_deviation(&nt, 0.0).is_err());
        assert!(norm_deviation(&nt, 1.5).is_err());
    }

    #[test]
    fn outer_tail_examples() {
        assert_relative_eq!(outer_tail(&id1(), 3.0).unwrap(), (-9.0f64 / 8.0).exp(), max_relative = 1e-15);
        assert_abs_diff_eq!(outer_tail(&id1(), 3.0).unwrap(), 0.32465, epsilon = 1e-5);
        assert_eq!(outer_tail(&id1(), 1e4).unwrap(), 0.0);
        assert!(matches!(outer_tail(&id1(), 2.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn hoeffding_examples() {
        assert_eq!(hoeffding_sum_tail(&id1(), 1, 3.0).unwrap(), outer_tail(&id1(), 3.0).unwrap());
        assert_relative_eq!(
            hoeffding_sum_tail(&id1(), 4, 1.5).unwrap(),
            (-1.125f64).exp(),
            max_relative = 1e-15
        );
        let a = hoeffding_sum_tail(&id1(), 4, 1.5).unwrap();
        let b = hoeffding_sum_tail(&id1(), 5, 1.5).unwrap();
        assert!(b < a);
        assert!(matches!(hoeffding_sum_tail(&id1(), 4, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn bernstein_and_chen_yang_examples() {
        let nt = basel3();
        let v = nt.hs * nt.hs + 2.0 * nt.op;
        assert_relative_eq!(bernstein_tail(&nt, 2.0).unwrap(), (-1.0 / v).exp(), max_relative = 1e-14);
        assert_abs_diff_eq!(bernstein_tail(&nt, 2.0).unwrap(), 0.72237, epsilon = 1e-5);
        assert_relative_eq!(bernstein_tail(&id1(), 1.0).unwrap(), (-0.125f64).exp(), max_relative = 1e-15);
        assert_abs_diff_eq!(chen_yang_tail(&id1(), 1.0).unwrap(), 0.88250, epsilon = 1e-5);
        assert_relative_eq!(chen_yang_tail(&nt, 2.0).unwrap(), (-0.25f64).exp(), max_relative = 1e-15);
        assert_abs_diff_eq!(chen_yang_tail(&nt, 1e-9).unwrap(), 1.0, epsilon = 1e-12);
        assert!(bernstein_tail(&nt, 0.0).is_err());
        assert!(chen_yang_tail(&nt, -1.0).is_err());
    }

    #[test]
    fn hsu_and_quadratic_form_examples() {
        assert_eq!(hsu_threshold(&LinearMap::identity(1), 1.0, 1.0).unwrap(), 5.0);
        let a = LinearMap::from_diagonal(&[1.0, 0.5]);
        let exact = 2.0 * (1.25 + 2.0 * (1.0625f64).sqrt() + 2.0);
        assert_relative_eq!(hsu_threshold(&a, 2.0, 1.0).unwrap(), exact, max_relative = 1e-14);
        // 10.623104 is quoted from a rounded square root
        assert_abs_diff_eq!(hsu_threshold(&a, 2.0, 1.0).unwrap(), 10.623104, epsilon = 1e-5);
        assert!(hsu_threshold(&a, 0.0, 1.0).is_err());
        assert!(hsu_threshold(&a, 1.0, -1.0).is_err());

        let i2 = SymmetricOperator::identity(2);
        let r = SymmetricOperator::diagonal(vec![1.0, 0.3]).unwrap();
        assert_eq!(
            quadratic_form_threshold(&LinearMap::identity(2), &r, 1.5).unwrap(),
            squared_norm_threshold(&norms(&r).unwrap(), 1.5).unwrap()
        );
        assert_eq!(
            quadratic_form_threshold(&LinearMap::from_diagonal(&[1.0, 0.0]), &i2, 0.0).unwrap(),
            1.0
        );
        assert_abs_diff_eq!(quadratic_form_threshold(&a, &i2, 1.0).unwrap(), 5.311552, epsilon = 1e-6);
        assert!(quadratic_form_threshold(&LinearMap::identity(3), &i2, 1.0).is_err());
    }

    #[test]
    fn chernoff_examples() {
        assert_eq!(chernoff_invert(&basel3(), 0.0).unwrap(), basel3().trace);
        assert_abs_diff_eq!(chernoff_invert(&id1(), 1.0).unwrap(), 5.0, epsilon = 1e-8);
        let nt = basel3();
        for t in [0.01, 0.3, 1.0, 4.0, 10.0] {
            let num = chernoff_invert(&nt, t).unwrap();
            let closed = squared_norm_threshold(&nt, t).unwrap();
            assert_relative_eq!(num, closed, max_relative = 1e-9);
        }
    }

    #[test]
    fn tail_function_threshold_probability_roundtrip() {
        let nt = basel3();
        let kinds = [
            TailFunction::squared_norm(nt).unwrap(),
            TailFunction::norm_deviation(nt).unwrap(),
            TailFunction::outer_tail(nt).unwrap(),
            TailFunction::hoeffding_mean(nt, 9).unwrap(),
            TailFunction::bernstein(nt).unwrap(),
            TailFunction::chen_yang(nt).unwrap(),
        ];
        for f in &kinds {
            for t in [3.0, 5.0] {
                let level = f.threshold(t).unwrap();
                let level = match f.kind {
                    TailKind::Bernstein | TailKind::ChenYang => level - nt.trace,
                    _ => level,
                };
                assert_relative_eq!(f.probability(level).unwrap(), (-t).exp(), max_relative = 1e-12);
            }
        }
        assert!(TailFunction::outer_tail(nt).unwrap().threshold(0.1).is_err());
    }

    #[test]
    fn tail_thresholds_increase_in_t() {
        let nt = basel3();
        let f = TailFunction::chen_yang(nt).unwrap();
        let g = TailFunction::bernstein(nt).unwrap();
        let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 1..200 {
            let t = 0.05 * i as f64;
            let cur = (f.threshold(t).unwrap(), g.threshold(t).unwrap());
            assert!(cur.0 > prev.0 && cur.1 > prev.1);
            prev = cur;
        }
    }
}
