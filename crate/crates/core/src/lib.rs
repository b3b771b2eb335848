//! Bayesian model averaging for differential expression with confounding
//! covariates.
//!
//! Each gene is regressed on every model of a covariate model space; models
//! are compared to the intercept-only model through Zellner-Siow Bayes
//! factors, an empirical prior over models is calibrated across genes, and
//! posterior inclusion probabilities rank genes for each covariate of
//! interest.

pub mod baselines;
pub mod bf;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod model_space;
pub mod ols;
pub mod posterior;
pub mod prior;
pub mod quadrature;
pub mod simulator;

pub use error::{Error, Result};
