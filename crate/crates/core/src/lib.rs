//! Knowledge-state algorithms for randomized paging.
//!
//! The core types are generic over a [`Scalar`]; the aliases below fix the
//! exact (`BigRational`) and floating-point instantiations.

pub mod bar;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod k2k3;
pub mod ks;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod simulate;
pub mod transport;

pub use error::{Error, Result};
pub use model::{Configuration, Page};
pub use scalar::Scalar;

/// Exact arithmetic used for all certification work.
pub type Rational = num_rational::BigRational;

pub type ExactEstimator = estimator::Estimator<Rational>;
pub type FloatEstimator = estimator::Estimator<f64>;
pub type ExactDistribution = transport::ConfigDistribution<Rational>;
pub type FloatDistribution = transport::ConfigDistribution<f64>;
pub type ExactKnowledgeState = ks::KnowledgeState<Rational>;
pub type FloatKnowledgeState = ks::KnowledgeState<f64>;
pub type ExactRules = k2k3::RuleTable<Rational>;
pub type FloatRules = k2k3::RuleTable<f64>;
