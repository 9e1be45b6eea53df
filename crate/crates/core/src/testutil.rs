//! Analytic targets shared by the unit tests.

use ndarray::Array1;

use crate::data::Dataset;
use crate::potential::EnergyModel;

/// Zero-mean Gaussian with diagonal covariance, expressed as a prior-only
/// energy model (pair it with `Dataset::empty`).
pub struct DiagGaussian {
    variances: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(variances: Vec<f64>) -> Self {
        DiagGaussian { variances }
    }

    pub fn standard(d: usize) -> Self {
        DiagGaussian {
            variances: vec![1.0; d],
        }
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
}

impl EnergyModel for DiagGaussian {
    fn dim(&self) -> usize {
        self.variances.len()
    }

    fn prior_logdensity(&self, theta: &Array1<f64>) -> f64 {
        let mut l = 0.0;
        for (t, v) in theta.iter().zip(self.variances.iter()) {
            l += -0.5 * t * t / v - 0.5 * (2.0 * std::f64::consts::PI * v).ln();
        }
        l
    }

    fn prior_subgrad(&self, theta: &Array1<f64>) -> Array1<f64> {
        Array1::from_iter(
            theta
                .iter()
                .zip(self.variances.iter())
                .map(|(t, v)| -t / v),
        )
    }

    fn datum_loglik(&self, _: &Array1<f64>, _: &Dataset, _: usize) -> f64 {
        0.0
    }

    fn accum_datum_subgrad(
        &self,
        _: &Array1<f64>,
        _: &Dataset,
        _: usize,
        _: f64,
        _: &mut Array1<f64>,
    ) {
    }
}
