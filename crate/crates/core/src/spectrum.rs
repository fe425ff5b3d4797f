//! Truncated eigenvalue sequences of trace-class operators.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::NormTriple;

/// How a [`Spectrum`] was generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpectrumFamily {
    Explicit,
    /// `γ_i = i^{-p}`, `p > 1`.
    Polynomial { p: f64 },
    /// `γ_i = ρ^i`, `0 < ρ < 1`.
    Exponential { rho: f64 },
}

impl SpectrumFamily {
    pub fn polynomial(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Domain(format!(
                "polynomial decay exponent must exceed 1, got {p}"
            )));
        }
        Ok(Self::Polynomial { p })
    }

    pub fn exponential(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Domain(format!(
                "exponential ratio must lie in (0, 1), got {rho}"
            )));
        }
        Ok(Self::Exponential { rho })
    }

    /// The `i`-th eigenvalue, counting from 1.
    pub fn eigenvalue(&self, i: usize) -> Option<f64> {
        match *self {
            Self::Explicit => None,
            Self::Polynomial { p } => Some((i as f64).powf(-p)),
            Self::Exponential { rho } => Some(rho.powi(i as i32)),
        }
    }

    /// Norms of the untruncated operator, where they have a closed form.
    pub fn limit_norms(&self) -> Option<NormTriple> {
        match *self {
            Self::Explicit => None,
            Self::Polynomial { p } => Some(NormTriple {
                trace: zeta(p),
                hs: zeta(2.0 * p).sqrt(),
                op: 1.0,
            }),
            Self::Exponential { rho } => Some(NormTriple {
                trace: rho / (1.0 - rho),
                hs: (rho * rho / (1.0 - rho * rho)).sqrt(),
                op: rho,
            }),
        }
    }
}

/// Nonincreasing list of nonnegative eigenvalues, truncated at `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
    family: SpectrumFamily,
}

impl Spectrum {
    /// Eigenvalues given directly; they are sorted into nonincreasing order.
    pub fn explicit(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("spectrum"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        if let Some(v) = values.iter().find(|v| **v < 0.0) {
            return Err(Error::Domain(format!("negative eigenvalue {v}")));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self {
            values,
            family: SpectrumFamily::Explicit,
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::explicit(vec![1.0; dim])
    }

    pub fn polynomial(p: f64, dim: usize) -> Result<Self> {
        Self::from_family(SpectrumFamily::polynomial(p)?, dim)
    }

    pub fn exponential(rho: f64, dim: usize) -> Result<Self> {
        Self::from_family(SpectrumFamily::exponential(rho)?, dim)
    }

    pub fn from_family(family: SpectrumFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("spectrum"));
        }
        let values = (1..=dim)
            .map(|i| family.eigenvalue(i))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Domain("explicit spectra carry their own values".into()))?;
        Ok(Self { values, family })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn family(&self) -> SpectrumFamily {
        self.family
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn norms(&self) -> NormTriple {
        NormTriple::from_eigenvalues(&self.values)
    }
}

/// Shorthand spectrum descriptor: `poly:<p>`, `exp:<rho>`, `list:v1,v2,...`
/// or `identity`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumSpec {
    Polynomial(f64),
    Exponential(f64),
    List(Vec<f64>),
    Identity,
}

impl SpectrumSpec {
    /// Materialize at truncation dimension `dim`. A `list:` spec fixes its own
    /// dimension; passing a different `dim` is an error.
    pub fn build(&self, dim: Option<usize>) -> Result<Spectrum> {
        let need_dim = || dim.ok_or_else(|| Error::Parse("spectrum needs a dimension".into()));
        match self {
            Self::Polynomial(p) => Spectrum::polynomial(*p, need_dim()?),
            Self::Exponential(rho) => Spectrum::exponential(*rho, need_dim()?),
            Self::Identity => Spectrum::identity(need_dim()?),
            Self::List(values) => {
                if let Some(d) = dim {
                    crate::error::ensure_dim("list spectrum length", d, values.len())?;
                }
                Spectrum::explicit(values.clone())
            }
        }
    }

    pub fn family(&self) -> Result<SpectrumFamily> {
        match self {
            Self::Polynomial(p) => SpectrumFamily::polynomial(*p),
            Self::Exponential(rho) => SpectrumFamily::exponential(*rho),
            Self::Identity | Self::List(_) => Ok(SpectrumFamily::Explicit),
        }
    }
}

impl FromStr for SpectrumSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "identity" {
            return Ok(Self::Identity);
        }
        let (head, tail) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("spectrum `{s}` lacks a `kind:` prefix")))?;
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad number `{v}` in spectrum: {e}")))
        };
        match head {
            "poly" => {
                let p = num(tail)?;
                SpectrumFamily::polynomial(p)?;
                Ok(Self::Polynomial(p))
            }
            "exp" => {
                let rho = num(tail)?;
                SpectrumFamily::exponential(rho)?;
                Ok(Self::Exponential(rho))
            }
            "list" => Ok(Self::List(
                tail.split(',').map(num).collect::<Result<Vec<_>>>()?,
            )),
            other => Err(Error::Parse(format!("unknown spectrum kind `{other}`"))),
        }
    }
}

impl fmt::Display for SpectrumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Polynomial(p) => write!(f, "poly:{p}"),
            Self::Exponential(rho) => write!(f, "exp:{rho}"),
            Self::Identity => write!(f, "identity"),
            Self::List(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "list:{}", parts.join(","))
            }
        }
    }
}

/// Riemann zeta for real `s > 1` by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    const N: usize = 16;
    // B_2, B_4, ..., B_12 divided by (2j)!
    const COEFFS: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let n = N as f64;
    let mut sum: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) times N^{-s-2j+1}
    let mut rising = s;
    let mut power = n.powf(-s - 1.0);
    for (j, c) in COEFFS.iter().enumerate() {
        sum += c * rising * power;
        let m = 2.0 * j as f64;
        rising *= (s + m + 1.0) * (s + m + 2.0);
        power /= n * n;
    }
    sum
}
