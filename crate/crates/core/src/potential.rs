//! Energy-model contract and minibatch subgradient estimators.
//!
//! Targets are represented by their potential energy
//! `U(theta) = -log p0(theta) - sum_i log p(x_i | theta)`. A model supplies
//! the log-prior, per-datum log-likelihoods and their (sub)gradients; the
//! functions here assemble full or minibatch-scaled potential subgradients
//! for the samplers. All evaluations are pure: neither `theta` nor the
//! dataset is mutated, so chains may share a dataset freely.

use ndarray::Array1;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Uniformly drawn index subset with the scaling factor that makes the
/// minibatch likelihood term an unbiased estimate of the full sum.
#[derive(Clone, Debug)]
pub struct Minibatch {
    /// Row indices into the dataset, no duplicates.
    pub indices: Vec<usize>,
    /// N / N-tilde, exactly.
    pub scale: f64,
}

impl Minibatch {
    /// The whole dataset in row order, scale 1.
    pub fn full(n: usize) -> Self {
        Minibatch {
            indices: (0..n).collect(),
            scale: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Log-posterior contract the samplers consume.
///
/// `datum_subgrad` must return an element of the subdifferential of
/// `datum_loglik` at `theta`; at differentiable points that is the gradient,
/// which the tests pin against central finite differences.
pub trait EnergyModel {
    fn dim(&self) -> usize;

    /// log p0(theta), normalization constants included.
    fn prior_logdensity(&self, theta: &Array1<f64>) -> f64;

    /// Subgradient of log p0 at theta.
    fn prior_subgrad(&self, theta: &Array1<f64>) -> Array1<f64>;

    /// log p(x_i | theta) for dataset row i.
    fn datum_loglik(&self, theta: &Array1<f64>, data: &Dataset, i: usize) -> f64;

    /// Adds `scale` times the subgradient of `datum_loglik` to `out`.
    fn accum_datum_subgrad(
        &self,
        theta: &Array1<f64>,
        data: &Dataset,
        i: usize,
        scale: f64,
        out: &mut Array1<f64>,
    );

    /// Subgradient of `datum_loglik` as a fresh vector.
    fn datum_subgrad(&self, theta: &Array1<f64>, data: &Dataset, i: usize) -> Array1<f64> {
        let mut g = Array1::zeros(theta.len());
        self.accum_datum_subgrad(theta, data, i, 1.0, &mut g);
        g
    }
}

fn check_inputs<M: EnergyModel>(model: &M, theta: &Array1<f64>, data: &Dataset) -> Result<()> {
    if theta.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: theta.len(),
        });
    }
    if data.n() > 0 && data.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: data.dim(),
        });
    }
    Ok(())
}

/// Unbiased minibatch estimate of the potential subgradient:
/// `-G log p0(theta) - scale * sum_{i in batch} G log p(x_i | theta)`.
pub fn stochastic_subgradient<M: EnergyModel>(
    model: &M,
    theta: &Array1<f64>,
    batch: &Minibatch,
    data: &Dataset,
) -> Result<Array1<f64>> {
    check_inputs(model, theta, data)?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut g = model.prior_subgrad(theta);
    for &i in &batch.indices {
        if i >= data.n() {
            return Err(Error::BadIndex {
                index: i,
                n: data.n(),
            });
        }
        model.accum_datum_subgrad(theta, data, i, batch.scale, &mut g);
    }
    g.mapv_inplace(|v| -v);
    Ok(g)
}

/// Exact potential subgradient over the whole dataset.
pub fn full_subgradient<M: EnergyModel>(
    model: &M,
    theta: &Array1<f64>,
    data: &Dataset,
) -> Result<Array1<f64>> {
    check_inputs(model, theta, data)?;
    let mut g = model.prior_subgrad(theta);
    for i in 0..data.n() {
        model.accum_datum_subgrad(theta, data, i, 1.0, &mut g);
    }
    g.mapv_inplace(|v| -v);
    Ok(g)
}

/// Potential energy `U = -log p0(theta) - sum_i log p(x_i | theta)`.
pub fn full_energy<M: EnergyModel>(model: &M, theta: &Array1<f64>, data: &Dataset) -> Result<f64> {
    check_inputs(model, theta, data)?;
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite theta in full_energy".into()));
    }
    let mut u = -model.prior_logdensity(theta);
    for i in 0..data.n() {
        u -= model.datum_loglik(theta, data, i);
    }
    Ok(u)
}

/// Minibatch estimate of the potential energy; the likelihood part is scaled
/// by N / N-tilde, the prior enters exactly.
pub fn stochastic_energy<M: EnergyModel>(
    model: &M,
    theta: &Array1<f64>,
    batch: &Minibatch,
    data: &Dataset,
) -> Result<f64> {
    check_inputs(model, theta, data)?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut lik = 0.0;
    for &i in &batch.indices {
        if i >= data.n() {
            return Err(Error::BadIndex {
                index: i,
                n: data.n(),
            });
        }
        lik += model.datum_loglik(theta, data, i);
    }
    Ok(-model.prior_logdensity(theta) - batch.scale * lik)
}
