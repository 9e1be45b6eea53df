//! Bayesian linear SVM: standard-normal prior over the weights and a hinge
//! pseudo-likelihood `p(y | x, eta) = exp(-c max(0, 1 - y eta.x))`, plus the
//! data-augmentation Gibbs baseline for desk-scale verification.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, InverseGaussian};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, chol_solve, solve_lower_transpose};
use crate::potential::EnergyModel;
use crate::samplers::standard_normal_vec;

const LN_2PI: f64 = 1.8378770664093453;

/// Dense Gaussian conditional draws are refused above this dimension; the
/// augmented sampler is a verification baseline, not a scalable method.
const DA_GIBBS_MAX_DIM: usize = 2000;

/// Linear SVM energy model: `U(eta) = |eta|^2/2 + c sum_i max(0, 1 - y_i eta.x_i)`
/// up to the prior's normalization constant.
#[derive(Clone, Copy, Debug)]
pub struct LinearSvmModel {
    /// Hinge regularization constant, >= 0.
    pub c: f64,
    pub dim: usize,
}

impl EnergyModel for LinearSvmModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn prior_logdensity(&self, theta: &Array1<f64>) -> f64 {
        -0.5 * theta.dot(theta) - 0.5 * self.dim as f64 * LN_2PI
    }

    fn prior_subgrad(&self, theta: &Array1<f64>) -> Array1<f64> {
        theta.mapv(|v| -v)
    }

    fn datum_loglik(&self, theta: &Array1<f64>, data: &Dataset, i: usize) -> f64 {
        let margin = 1.0 - data.label(i) * data.dot(i, theta);
        -self.c * margin.max(0.0)
    }

    /// Gradient of the per-datum log-likelihood: `c y x` while the hinge is
    /// active (the boundary counts as active), zero once the margin is met.
    fn accum_datum_subgrad(
        &self,
        theta: &Array1<f64>,
        data: &Dataset,
        i: usize,
        scale: f64,
        out: &mut Array1<f64>,
    ) {
        let y = data.label(i);
        if 1.0 - y * data.dot(i, theta) >= 0.0 {
            data.add_scaled(i, scale * self.c * y, out);
        }
    }
}

/// Piecewise subgradient of the per-datum hinge energy
/// `c max(0, 1 - y eta.x)`: `-c y x` while the margin constraint is active
/// (boundary included), zero otherwise. This is the quantity that enters the
/// potential-energy gradient; the log-likelihood gradient is its negation.
pub fn svm_datum_subgrad(eta: &Array1<f64>, x: &Array1<f64>, y: f64, c: f64) -> Result<Array1<f64>> {
    if y != 1.0 && y != -1.0 {
        return Err(Error::Config(format!("label {y} is not +1/-1")));
    }
    if eta.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: eta.len(),
            got: x.len(),
        });
    }
    if 1.0 - y * eta.dot(x) >= 0.0 {
        Ok(x.mapv(|v| -c * y * v))
    } else {
        Ok(Array1::zeros(x.len()))
    }
}

/// Decision rule `sign(eta.x)`; an exact tie is classified as +1.
pub fn predict(eta: &Array1<f64>, x: &Array1<f64>) -> f64 {
    if eta.dot(x) >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Weights plus the per-datum latent scale variables of the augmented
/// sampler.
#[derive(Clone, Debug)]
pub struct AugmentedState {
    pub eta: Array1<f64>,
    pub lambda: Vec<f64>,
}

impl AugmentedState {
    pub fn new(eta: Array1<f64>, n: usize) -> Self {
        AugmentedState {
            eta,
            lambda: vec![1.0; n],
        }
    }
}

/// One sweep of the data-augmentation Gibbs sampler.
///
/// The hinge pseudo-likelihood admits a Gaussian scale-mixture form
/// `exp(-c max(0, u)) = ∫ (2 pi l)^{-1/2} exp(-(l + (c/2) u)^2 / (2 l)) dl`,
/// which gives the conditionals sampled here: with k = c/2,
/// `1/lambda_i | eta ~ InverseGaussian(1 / (k |1 - y_i eta.x_i|), 1)` and
/// `eta | lambda ~ N(P^{-1} b, P^{-1})` with
/// `P = I + k^2 sum_i x_i x_i^T / lambda_i` and
/// `b = k sum_i (1 + k / lambda_i) y_i x_i`.
/// Its stationary distribution is the same posterior the subgradient
/// samplers target, which the quadrature and cross-sampler tests pin down.
pub fn da_gibbs_step<R: Rng>(
    state: &AugmentedState,
    data: &Dataset,
    c: f64,
    rng: &mut R,
) -> Result<AugmentedState> {
    let d = state.eta.len();
    let n = data.n();
    if n > 0 && data.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: data.dim(),
        });
    }
    if state.lambda.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: state.lambda.len(),
        });
    }
    if d > DA_GIBBS_MAX_DIM {
        return Err(Error::Config(format!(
            "da_gibbs_step refuses dimension {d} > {DA_GIBBS_MAX_DIM}"
        )));
    }
    let k = 0.5 * c;

    // lambda | eta
    let mut lambda = vec![1.0; n];
    if k > 0.0 {
        for i in 0..n {
            let u = 1.0 - data.label(i) * data.dot(i, &state.eta);
            let mean = 1.0 / (k * u.abs().max(1e-10));
            let ig = InverseGaussian::new(mean, 1.0)
                .map_err(|e| Error::Numerical(format!("inverse gaussian for datum {i}: {e}")))?;
            let inv_lambda: f64 = ig.sample(rng);
            let li = 1.0 / inv_lambda;
            if !li.is_finite() || li <= 0.0 {
                return Err(Error::Numerical(format!(
                    "degenerate augmentation variable for datum {i}: {li}"
                )));
            }
            lambda[i] = li;
        }
    }

    // eta | lambda, D
    let mut precision = Array2::<f64>::eye(d);
    let mut b = Array1::<f64>::zeros(d);
    if k > 0.0 {
        for i in 0..n {
            let li = lambda[i];
            if li < 1e-300 {
                return Err(Error::Numerical(format!(
                    "degenerate covariance from datum {i}: lambda {li}"
                )));
            }
            let x = data.dense_row(i);
            let w = k * k / li;
            for r in 0..d {
                if x[r] == 0.0 {
                    continue;
                }
                for s in 0..d {
                    precision[[r, s]] += w * x[r] * x[s];
                }
            }
            let coef = k * (1.0 + k / li) * data.label(i);
            b = b + &x.mapv(|v| coef * v);
        }
    }
    let chol = cholesky(&precision)
        .map_err(|e| Error::Numerical(format!("eta conditional not positive definite: {e}")))?;
    let mean = chol_solve(&chol, &b);
    let z = standard_normal_vec(d, rng);
    let eta = &mean + &solve_lower_transpose(&chol, &z);

    Ok(AugmentedState { eta, lambda })
}
