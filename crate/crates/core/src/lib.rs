//! Norm concentration for vectors with an operator-valued variance proxy.
//!
//! A centered random vector `X` is `R`-subgaussian when
//! `log E exp⟨u, X⟩ ≤ ⟨u, R u⟩ / 2` for every `u`. The tail of `‖X‖²` is then
//! controlled by the trace, Hilbert–Schmidt norm and operator norm of `R`.
//! This crate computes those bounds, samples laws that satisfy them, checks
//! the bounds by Monte Carlo, and applies them to regularized inverse problems.

pub mod bounds;
pub mod error;
pub mod inverse;
pub mod law;
pub mod linalg;
pub mod montecarlo;
pub mod operator;
pub mod rng;
pub mod special;
pub mod spectrum;

pub use bounds::{Statistic, TailFunction, TailKind};
pub use error::{Error, Result};
pub use inverse::{AlphaRule, InverseProblemModel, NoiseModel, RegularizerKind, RegularizerSpec};
pub use law::{Family, SampleBatch, SubgaussianLaw};
pub use linalg::LinearMap;
pub use montecarlo::{verify_bound, TailReport, TailRow};
pub use operator::{norms, NormTriple, SymmetricOperator};
pub use spectrum::{Spectrum, SpectrumFamily, SpectrumSpec};
