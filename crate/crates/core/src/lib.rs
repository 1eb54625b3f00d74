//! Heteroscedastic James–Stein shrinkage: estimators δ = (I − G·φ(z)/z)·x for
//! x ~ N_p(θ, Σ) with diagonal Σ and G, their ordinary and ensemble risks,
//! and checkers for the sufficient conditions under which they are ordinary
//! or ensemble minimax.
//!
//! Module map:
//!
//! * [`model`]: covariance spectra, shrinkage matrices, seeded samplers
//! * [`phi`]: shrinkage profiles, including the generalized-Bayes φ*
//! * [`estimator`]: applying a rule to an observation
//! * [`risk`]: Monte Carlo, SURE, Rao–Blackwell and Dirichlet risk engines
//! * [`conditions`]: minimaxity conditions
//! * [`experiments`]: table runs, config files and output formatting

pub mod conditions;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod model;
pub mod phi;
pub mod quadrature;
pub mod risk;
pub mod stats;

pub use error::{Error, Result};
pub use estimator::{apply, statistic_z, EstimateResult, ShrinkageRule};
pub use model::{CovarianceSpec, MeanVector, ShrinkageMatrix};
pub use phi::PhiSpec;
pub use risk::{Engine, RiskEstimate};
