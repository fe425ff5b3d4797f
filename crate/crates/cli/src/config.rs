//! Experiment descriptors. Every command resolves to one of these before it
//! runs, and the resolved form is embedded in the command's summary.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use subgauss::inverse::AlphaRule;
use subgauss::operator::OperatorJson;
use subgauss::{Family, NormTriple, SpectrumSpec};

/// Serde through `Display` / `FromStr`, for the one-flag shorthands.
pub mod as_string {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(value)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// A grid of positive reals: `v1,v2,...`, `log:<lo>..<hi>[:<points>]` or
/// `lin:<lo>..<hi>[:<points>]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    List(Vec<f64>),
    Log { lo: f64, hi: f64, points: usize },
    Lin { lo: f64, hi: f64, points: usize },
}

pub const DEFAULT_GRID_POINTS: usize = 50;

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Self::List(ref v) => v.clone(),
            Self::Log { lo, hi, points } => spaced(lo.ln(), hi.ln(), points)
                .into_iter()
                .map(f64::exp)
                .collect(),
            Self::Lin { lo, hi, points } => spaced(lo, hi, points),
        }
    }
}

fn spaced(a: f64, b: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![a];
    }
    (0..points)
        .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
        .collect()
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad number `{v}` in grid `{s}`: {e}"))
        };
        let range = |body: &str| -> Result<(f64, f64, usize), String> {
            let (bounds, points) = match body.rsplit_once(':') {
                Some((b, p)) => (
                    b,
                    p.trim()
                        .parse::<usize>()
                        .map_err(|e| format!("bad point count in grid `{s}`: {e}"))?,
                ),
                None => (body, DEFAULT_GRID_POINTS),
            };
            let (lo, hi) = bounds
                .split_once("..")
                .ok_or_else(|| format!("grid `{s}` needs `<lo>..<hi>`"))?;
            let (lo, hi) = (num(lo)?, num(hi)?);
            if points == 0 || !(lo <= hi) {
                return Err(format!("grid `{s}` needs lo <= hi and at least one point"));
            }
            Ok((lo, hi, points))
        };
        let s = s.trim();
        if let Some(body) = s.strip_prefix("log:") {
            let (lo, hi, points) = range(body)?;
            if !(lo > 0.0) {
                return Err(format!("log grid `{s}` needs a positive lower end"));
            }
            Ok(Self::Log { lo, hi, points })
        } else if let Some(body) = s.strip_prefix("lin:") {
            let (lo, hi, points) = range(body)?;
            Ok(Self::Lin { lo, hi, points })
        } else {
            let values = s.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(format!("grid `{s}` has a non-finite value"));
            }
            Ok(Self::List(values))
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::List(v) => {
                let parts: Vec<String> = v.iter().map(f64::to_string).collect();
                f.write_str(&parts.join(","))
            }
            Self::Log { lo, hi, points } => write!(f, "log:{lo}..{hi}:{points}"),
            Self::Lin { lo, hi, points } => write!(f, "lin:{lo}..{hi}:{points}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Verify(VerifyConfig),
    BoundsEval(BoundsEvalConfig),
    Compare(CompareConfig),
    Inverse(InverseConfig),
    PropertySuite(SuiteConfig),
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Verify(_) => "verify",
            Self::BoundsEval(_) => "bounds-eval",
            Self::Compare(_) => "compare",
            Self::Inverse(_) => "inverse",
            Self::PropertySuite(_) => "property-suite",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Verify(c) => Some(c.seed),
            Self::Inverse(c) => Some(c.seed),
            Self::PropertySuite(c) => Some(c.seed),
            Self::BoundsEval(_) | Self::Compare(_) => None,
        }
    }

    pub fn out_mut(&mut self) -> &mut Option<PathBuf> {
        match self {
            Self::Verify(c) => &mut c.out,
            Self::BoundsEval(c) => &mut c.out,
            Self::Compare(c) => &mut c.out,
            Self::Inverse(c) => &mut c.out,
            Self::PropertySuite(c) => &mut c.out,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyBound {
    /// `‖X‖²` against `tr + 2√t hs + 2t op`.
    Sqnorm,
    /// `‖X‖` against `√tr + √(2t op)`.
    NormDeviation,
    /// `‖X‖` against `√(8t op)`.
    OuterTail,
    /// Norm of the mean of `--mean-of` copies.
    Hoeffding,
    Bernstein,
    ChenYang,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub law: Family,
    #[serde(with = "as_string")]
    pub spectrum: SpectrumSpec,
    #[serde(default)]
    pub dim: Option<usize>,
    pub bound: VerifyBound,
    /// Average of this many independent copies.
    #[serde(default = "one")]
    pub mean_of: usize,
    #[serde(with = "as_string")]
    pub t_grid: Grid,
    pub n: usize,
    pub seed: u64,
    pub confidence: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EvalBound {
    /// CGF bound at `λ`.
    Cgf,
    /// `tr + 2√t hs + 2t op` at `t`.
    SqnormThreshold,
    /// `(√tr + √(2t op))²` at `t`.
    BinomialThreshold,
    /// Numerical Chernoff inversion of the CGF bound at `t`.
    ChernoffThreshold,
    /// `√tr + √(2 ln(1/δ) op)` at `δ`.
    NormDeviation,
    /// Tail probability of `‖X‖` at `ε`.
    OuterTail,
    /// Tail probability of the mean of `n` copies at `ε`.
    Hoeffding,
    /// Tail probability of `‖X‖² − tr` at `ε`.
    Bernstein,
    ChenYang,
}

/// Norms come from exactly one of `triple`, `operator` or `spectrum`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsEvalConfig {
    pub bound: EvalBound,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<NormTriple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorJson>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_string")]
    pub spectrum: Option<SpectrumSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(with = "as_string")]
    pub grid: Grid,
    /// Copies averaged, for `hoeffding`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

mod opt_string {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(value: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.collect_str(v),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Option<T>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse().map_err(de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(with = "as_string")]
    pub spectrum: SpectrumSpec,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(with = "as_string")]
    pub eps_grid: Grid,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizerName {
    Tikhonov,
    Tsvd,
    Landweber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseConfig {
    pub kind: RegularizerName,
    /// Landweber step.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(with = "as_string")]
    pub alpha_rule: AlphaRule,
    pub s: f64,
    pub sigma2: f64,
    pub n_grid: Vec<usize>,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Truncation dimension of the default diagonal forward operator.
    pub dim: usize,
    /// Base noise proxy `R̃`; its operator norm must be 1.
    #[serde(with = "as_string")]
    pub noise_spectrum: SpectrumSpec,
    pub family: Family,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub instances: usize,
    pub seed: u64,
    pub min_dim: usize,
    pub max_dim: usize,
    pub tolerance: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}
