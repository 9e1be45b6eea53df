//! Stochastic subgradient MCMC for Bayesian models whose log-posteriors are
//! continuous but not differentiable: max-margin (hinge-loss) classifiers
//! and Laplace-prior sparse models.
//!
//! The crate provides
//! - an [`potential::EnergyModel`] contract (log-prior, per-datum
//!   log-likelihood, subgradients) together with unbiased minibatch
//!   subgradient estimators,
//! - the sampler family in [`samplers`]: subgradient leapfrog HMC with
//!   optional Metropolis correction, stochastic subgradient Langevin
//!   dynamics, a Nose-Hoover thermostat variant, and a stochastic
//!   random-walk Metropolis baseline,
//! - concrete models: Bayesian linear SVMs ([`svm_model`], including a
//!   data-augmentation Gibbs baseline), parametric mixtures of SVMs
//!   ([`mixture_model`]) and sparse Bayesian logistic regression
//!   ([`sparse_model`]),
//! - dataset handling ([`data`]) and trace diagnostics ([`diagnostics`]).

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod mixture_model;
pub mod potential;
pub mod samplers;
pub mod sparse_model;
pub mod svm_model;

#[cfg(test)]
pub(crate) mod testutil;

pub use data::Dataset;
pub use error::{Error, Result};
pub use potential::{EnergyModel, Minibatch};
pub use samplers::{ChainState, SamplerConfig, StepsizeSchedule};
