//! Growth processes on random Boolean formulas.
//!
//! A process `(μ, α)` draws leaves uniformly from a subset of projections, negations and constants
//! and combines `k` independent subformulas with a fixed connective `α` at every internal node.
//! This crate iterates the induced distributions on functions exactly or by sampling, computes
//! their Walsh–Hadamard spectra, predicts limits from structural properties of `α`, and checks
//! the supporting inequalities numerically.
//!
//! Numeric code is generic over [`Real`] (`f32`/`f64`); polynomial evaluation also accepts exact
//! rationals through [`Scalar`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod boolfn;
pub mod connective;
pub mod error;
pub mod process;
pub mod scalar;
pub mod spectrum;

pub use boolfn::{LinearFn, PropertySet, TruthTable};
pub use connective::{CharPoly, Connective, ConvergenceClass, FixedPointReport, SpectralProfile};
pub use error::{Error, Result};
pub use process::{Distribution, Domain, Metric, ProcessSpec, SupportSpec};
pub use scalar::{Real, Scalar};
pub use spectrum::{BoundConstants, Spectrum};

pub type Distribution64 = Distribution<f64>;
pub type Distribution32 = Distribution<f32>;
pub type Spectrum64 = Spectrum<f64>;
pub type Spectrum32 = Spectrum<f32>;
/// Exact rational for polynomial identities.
pub type Rational = num_rational::BigRational;
