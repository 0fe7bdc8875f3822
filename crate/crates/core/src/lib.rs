//! Random power series `f(z) = sum xi_k z^k`: coefficient models, sampling,
//! truncated evaluation, analytic characteristics and Monte Carlo checks.

pub mod cli;
pub mod coeff;
pub mod conditions;
pub mod config;
pub mod empirical;
pub mod error;
pub mod ext;
pub mod rng;
pub mod series;
pub mod sigma;
pub mod tail;
pub mod theory;

pub use coeff::{sample, CoefficientFamily, CoefficientModel, SampleSeries};
pub use error::{Error, Result};
pub use series::{eval_truncated, max_modulus, truncation_bound, CirclePlan};
pub use sigma::SigmaModel;
pub use tail::TailModel;
