//! Linear inverse problems `Y = T u + ε` with subgaussian noise, solved by
//! spectral regularization `û_α = g_α(T) Y`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{squared_norm_threshold, Statistic};
use crate::error::{ensure_dim, Error, Result};
use crate::law::{make_law, Family, SubgaussianLaw};
use crate::operator::{conjugate, loewner_leq, norms, spectral_apply, SymmetricOperator, LOEWNER_TOLERANCE};

/// Tolerance on `op(R̃) = 1`.
pub const UNIT_PROXY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularizerKind {
    Tikhonov,
    Tsvd,
    /// Gradient iteration with step `eta`, run for `m = round(1/α)` steps.
    Landweber { eta: f64 },
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Tikhonov => f.write_str("tikhonov"),
            Self::Tsvd => f.write_str("tsvd"),
            Self::Landweber { eta } => write!(f, "landweber(eta={eta})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSpec {
    #[serde(flatten)]
    pub kind: RegularizerKind,
    pub alpha: f64,
}

impl RegularizerSpec {
    pub fn new(kind: RegularizerKind, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
        }
        if let RegularizerKind::Landweber { eta } = kind {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::Domain(format!("landweber step must be positive, got {eta}")));
            }
        }
        Ok(Self { kind, alpha })
    }

    pub fn tikhonov(alpha: f64) -> Result<Self> {
        Self::new(RegularizerKind::Tikhonov, alpha)
    }

    pub fn tsvd(alpha: f64) -> Result<Self> {
        Self::new(RegularizerKind::Tsvd, alpha)
    }

    pub fn landweber(alpha: f64, eta: f64) -> Result<Self> {
        Self::new(RegularizerKind::Landweber { eta }, alpha)
    }

    /// Landweber iteration count `round(1/α)`, at least one.
    pub fn iterations(&self) -> usize {
        ((1.0 / self.alpha).round() as usize).max(1)
    }

    /// The filter `g_α(λ)` for `λ ≥ 0`.
    pub fn filter(&self, lambda: f64) -> f64 {
        match self.kind {
            RegularizerKind::Tikhonov => 1.0 / (lambda + self.alpha),
            RegularizerKind::Tsvd => {
                if lambda >= self.alpha && lambda > 0.0 {
                    1.0 / lambda
                } else {
                    0.0
                }
            }
            RegularizerKind::Landweber { eta } => {
                let m = self.iterations() as f64;
                if lambda == 0.0 {
                    eta * m
                } else {
                    // 1 − (1 − ηλ)^m without cancellation at small ηλ
                    -(m * (-eta * lambda).ln_1p()).exp_m1() / lambda
                }
            }
        }
    }

    /// Constant `b` with `sup_λ |g_α(λ)| ≤ b/α`. For Landweber the supremum
    /// is `η m`, so `b = η m α`, which equals `η` whenever `1/α` is an integer.
    pub fn qualification(&self) -> f64 {
        match self.kind {
            RegularizerKind::Tikhonov | RegularizerKind::Tsvd => 1.0,
            RegularizerKind::Landweber { eta } => eta * self.iterations() as f64 * self.alpha,
        }
    }

    /// Landweber needs `η · op(T) < 1`.
    pub fn check_forward(&self, forward: &SymmetricOperator) -> Result<()> {
        if let RegularizerKind::Landweber { eta } = self.kind {
            let product = eta * forward.op_norm();
            if product >= 1.0 {
                return Err(Error::InvalidStep { product });
            }
        }
        Ok(())
    }
}

/// Noise `ε` with proxy `(σ²/n) R̃`, where `op(R̃) = 1`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub family: Family,
    pub base: SymmetricOperator,
    pub sigma2: f64,
    pub n: usize,
}

impl NoiseModel {
    pub fn new(family: Family, base: SymmetricOperator, sigma2: f64, n: usize) -> Result<Self> {
        base.require_positive()?;
        let op = base.op_norm();
        if (op - 1.0).abs() > UNIT_PROXY_TOLERANCE {
            return Err(Error::Domain(format!("noise base proxy must have op norm 1, got {op}")));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain(format!("sigma2 must be >= 0, got {sigma2}")));
        }
        if n == 0 {
            return Err(Error::Domain("noise sample size n must be >= 1".into()));
        }
        Ok(Self {
            family,
            base,
            sigma2,
            n,
        })
    }

    /// `R = (σ²/n) R̃`.
    pub fn proxy(&self) -> Result<SymmetricOperator> {
        self.base.scaled(self.sigma2 / self.n as f64)
    }
}

#[derive(Debug, Clone)]
pub struct InverseProblemModel {
    forward: SymmetricOperator,
    truth: Vec<f64>,
    noise: NoiseModel,
    noise_law: SubgaussianLaw,
    s: f64,
}

/// `λ^s` with `0^s = 0` for every `s`, including `s = 0`.
fn power(lambda: f64, s: f64) -> f64 {
    if lambda == 0.0 {
        0.0
    } else {
        lambda.powf(s)
    }
}

impl InverseProblemModel {
    pub fn new(forward: SymmetricOperator, truth: Vec<f64>, noise: NoiseModel, s: f64) -> Result<Self> {
        forward.require_positive()?;
        ensure_dim("truth", forward.dim(), truth.len())?;
        ensure_dim("noise proxy", forward.dim(), noise.base.dim())?;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("error exponent s must lie in [0, 1], got {s}")));
        }
        if truth.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("truth"));
        }
        let noise_law = make_law(noise.family, &noise.proxy()?)?;
        Ok(Self {
            forward,
            truth,
            noise,
            noise_law,
            s,
        })
    }

    /// Diagonal forward operator `λ_i = i^{-1}`, truth `u_i = i^{-3/2}`.
    pub fn default_forward(dim: usize) -> Result<(SymmetricOperator, Vec<f64>)> {
        if dim == 0 {
            return Err(Error::Empty("forward operator"));
        }
        let t = SymmetricOperator::diagonal((1..=dim).map(|i| 1.0 / i as f64).collect())?;
        let u = (1..=dim).map(|i| (i as f64).powf(-1.5)).collect();
        Ok((t, u))
    }

    pub fn dim(&self) -> usize {
        self.forward.dim()
    }

    pub fn forward(&self) -> &SymmetricOperator {
        &self.forward
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn noise_law(&self) -> &SubgaussianLaw {
        &self.noise_law
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `g_α(T)`.
    pub fn filter_operator(&self, reg: &RegularizerSpec) -> Result<SymmetricOperator> {
        reg.check_forward(&self.forward)?;
        spectral_apply(|l| reg.filter(l), &self.forward)
    }

    /// `T^s g_α(T)`, the map through which noise enters the weighted error.
    pub fn noise_map(&self, reg: &RegularizerSpec) -> Result<SymmetricOperator> {
        reg.check_forward(&self.forward)?;
        let s = self.s;
        spectral_apply(|l| power(l, s) * reg.filter(l), &self.forward)
    }

    /// `û_α = g_α(T)(T u + ε)`.
    pub fn estimate(&self, reg: &RegularizerSpec, noise_draw: &[f64]) -> Result<Vec<f64>> {
        ensure_dim("noise draw", self.dim(), noise_draw.len())?;
        let g = self.filter_operator(reg)?;
        let y: Vec<f64> = self
            .forward
            .apply(&self.truth)?
            .iter()
            .zip(noise_draw)
            .map(|(a, b)| a + b)
            .collect();
        g.apply(&y)
    }

    /// `‖T^s (û − u)‖`.
    pub fn error(&self, reg: &RegularizerSpec, noise_draw: &[f64]) -> Result<f64> {
        let est = self.estimate(reg, noise_draw)?;
        let diff: Vec<f64> = est.iter().zip(&self.truth).map(|(a, b)| a - b).collect();
        let ts = spectral_apply(|l| power(l, self.s), &self.forward)?;
        Ok(Statistic::Norm.eval(&ts.apply(&diff)?))
    }

    /// `‖T^s (g_α(T) T − I) u‖`.
    pub fn bias(&self, reg: &RegularizerSpec) -> Result<f64> {
        reg.check_forward(&self.forward)?;
        let s = self.s;
        let y = apply_signed(&self.forward, |l| power(l, s) * (reg.filter(l) * l - 1.0), &self.truth)?;
        Ok(Statistic::Norm.eval(&y))
    }

    /// `B = T^s g_α(T) R g_α(T) T^s`.
    pub fn variance_proxy_operator(&self, reg: &RegularizerSpec) -> Result<SymmetricOperator> {
        let m = self.noise_map(reg)?;
        conjugate(&m.to_dense(), self.noise_law.proxy())
    }

    /// `tr B + 2√(ln 1/δ) hs B + 2 ln(1/δ) op B`, exceeded by
    /// `‖T^s g_α(T) ε‖²` with probability at most `δ`.
    pub fn variance_bound(&self, reg: &RegularizerSpec, delta: f64) -> Result<f64> {
        check_delta(delta)?;
        let b = self.variance_proxy_operator(reg)?;
        squared_norm_threshold(&norms(&b)?, (1.0 / delta).ln())
    }

    /// `(σ² b² / (α² n)) · op(T)^{2s} · (tr R̃ + 2√(ln 1/δ) hs R̃ + 2 ln 1/δ)`.
    pub fn simplified_variance_bound(&self, reg: &RegularizerSpec, delta: f64) -> Result<f64> {
        check_delta(delta)?;
        reg.check_forward(&self.forward)?;
        let b = reg.qualification();
        let scale = self.noise.sigma2 * b * b / (reg.alpha * reg.alpha * self.noise.n as f64)
            * power(self.forward.op_norm(), 2.0 * self.s);
        Ok(scale * squared_norm_threshold(&norms(&self.noise.base)?, (1.0 / delta).ln())?)
    }

    /// Whether `g_α(T) R g_α(T) ⪯ (b/α)² R`.
    pub fn proxy_dominated(&self, reg: &RegularizerSpec) -> Result<bool> {
        let g = self.filter_operator(reg)?;
        let lhs = conjugate(&g.to_dense(), self.noise_law.proxy())?;
        let b = reg.qualification() / reg.alpha;
        let rhs = self.noise_law.proxy().scaled(b * b)?;
        loewner_leq(&lhs, &rhs, LOEWNER_TOLERANCE)
    }
}

/// `f(T) x` for a spectral function that may take negative values.
fn apply_signed(t: &SymmetricOperator, f: impl Fn(f64) -> f64, x: &[f64]) -> Result<Vec<f64>> {
    match t.diagonal_values() {
        Some(d) => Ok(d.iter().zip(x).map(|(&l, &v)| f(l.max(0.0)) * v).collect()),
        None => {
            let v = t.eigenvectors();
            let coeffs = v.transpose().apply(x)?;
            let scaled: Vec<f64> = coeffs
                .iter()
                .zip(t.eigenvalues())
                .map(|(c, &l)| c * f(l.max(0.0)))
                .collect();
            v.apply(&scaled)
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("delta must lie in (0, 1], got {delta}")))
    }
}

/// Regularization schedule `n ↦ α(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AlphaRule {
    Fixed { alpha: f64 },
    /// `α(n) = n^{-exponent}`.
    Power { exponent: f64 },
}

impl AlphaRule {
    pub fn alpha(&self, n: usize) -> f64 {
        match *self {
            Self::Fixed { alpha } => alpha,
            Self::Power { exponent } => (n as f64).powf(-exponent),
        }
    }

    /// Whether `α(n)² n → ∞`.
    pub fn consistent(&self) -> bool {
        match *self {
            Self::Fixed { .. } => true,
            Self::Power { exponent } => exponent < 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Fixed { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::Domain(format!("alpha must be positive, got {alpha}")))
            }
            Self::Power { exponent } if !exponent.is_finite() => {
                Err(Error::Domain("alpha exponent must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

impl FromStr for AlphaRule {
    type Err = Error;

    /// `fixed:<α>` or `power:<e>` for `α(n) = n^{-e}`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, tail) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("alpha rule `{s}` needs `fixed:` or `power:`")))?;
        let v: f64 = tail
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad number in alpha rule `{s}`")))?;
        let rule = match head.trim() {
            "fixed" => Self::Fixed { alpha: v },
            "power" => Self::Power { exponent: v },
            other => return Err(Error::Parse(format!("unknown alpha rule `{other}`"))),
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl fmt::Display for AlphaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed { alpha } => write!(f, "fixed:{alpha}"),
            Self::Power { exponent } => write!(f, "power:{exponent}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScheduleConfig {
    pub forward: SymmetricOperator,
    pub truth: Vec<f64>,
    pub base_proxy: SymmetricOperator,
    pub family: Family,
    pub sigma2: f64,
    pub kind: RegularizerKind,
    pub alpha_rule: AlphaRule,
    pub s: f64,
    pub n_grid: Vec<usize>,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleRow {
    pub n: usize,
    pub alpha: f64,
    pub bias: f64,
    /// Bound from the exact `B`.
    pub var_bound: f64,
    /// Empirical `1 − δ` quantile of `‖T^s g_α(T) ε‖²`.
    pub empirical_quantile: f64,
    /// `bias + √var_bound`, a `1 − δ` bound on `‖T^s(û − u)‖`.
    pub total: f64,
    pub simplified_bound: f64,
    /// `empirical_quantile / simplified_bound`.
    pub ratio: f64,
    /// Trials with `‖T^s g_α(T) ε‖² > var_bound`.
    pub exceed_count: u64,
    pub trials: usize,
}

impl ScheduleRow {
    pub fn bound_holds(&self) -> bool {
        self.simplified_bound >= self.empirical_quantile && self.var_bound >= self.empirical_quantile
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleTable {
    pub alpha_rule: AlphaRule,
    pub regularizer: RegularizerKind,
    pub delta: f64,
    pub seed: u64,
    /// Whether `α(n)² n → ∞` under the rule.
    pub consistent: bool,
    pub rows: Vec<ScheduleRow>,
}

impl ScheduleTable {
    pub fn all_bounds_hold(&self) -> bool {
        self.rows.iter().all(ScheduleRow::bound_holds)
    }

    pub fn simplified_decreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].simplified_bound < w[0].simplified_bound)
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

/// Per-`n` seed, decorrelated from neighbouring seeds.
fn row_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn schedule_demo(config: &ScheduleConfig) -> Result<ScheduleTable> {
    config.alpha_rule.validate()?;
    check_delta(config.delta)?;
    if config.n_grid.is_empty() {
        return Err(Error::Empty("n grid"));
    }
    if config.trials == 0 {
        return Err(Error::Domain("schedule demo needs at least one trial".into()));
    }
    let mut rows = Vec::with_capacity(config.n_grid.len());
    for (idx, &n) in config.n_grid.iter().enumerate() {
        let noise = NoiseModel::new(config.family, config.base_proxy.clone(), config.sigma2, n)?;
        let model = InverseProblemModel::new(config.forward.clone(), config.truth.clone(), noise, config.s)?;
        let alpha = config.alpha_rule.alpha(n);
        let reg = RegularizerSpec::new(config.kind, alpha)?;
        let bias = model.bias(&reg)?;
        let var_bound = model.variance_bound(&reg, config.delta)?;
        let simplified_bound = model.simplified_variance_bound(&reg, config.delta)?;
        let statistic = Statistic::Transformed {
            map: model.noise_map(&reg)?.to_dense(),
        };
        let d = model.dim();
        let mut values: Vec<f64> = model
            .noise_law()
            .map_chunks(config.trials, row_seed(config.seed, idx), |chunk| {
                chunk.chunks_exact(d).map(|e| statistic.eval(e)).collect::<Vec<_>>()
            })
            .concat();
        let exceed_count = values.iter().filter(|&&v| v > var_bound).count() as u64;
        values.sort_by(f64::total_cmp);
        let rank = (((1.0 - config.delta) * config.trials as f64).ceil() as usize).clamp(1, config.trials);
        let empirical_quantile = values[rank - 1];
        rows.push(ScheduleRow {
            n,
            alpha,
            bias,
            var_bound,
            empirical_quantile,
            total: bias + var_bound.sqrt(),
            simplified_bound,
            ratio: empirical_quantile / simplified_bound,
            exceed_count,
            trials: config.trials,
        });
    }
    Ok(ScheduleTable {
        alpha_rule: config.alpha_rule,
        regularizer: config.kind,
        delta: config.delta,
        seed: config.seed,
        consistent: config.alpha_rule.consistent(),
        rows,
    })
}
