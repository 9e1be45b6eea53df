//! Trace statistics, convergence logging, and the polynomial-smoothing
//! verification harness for non-differentiable 1-D potentials.

use std::io::Write;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::potential::EnergyModel;
use crate::samplers::{hmc_draw, ChainState, SamplerConfig};

/// Ordered samples with iteration and wall-clock stamps.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    samples: Vec<Array1<f64>>,
    iterations: Vec<u64>,
    wall_ms: Vec<f64>,
    burn_in: Option<usize>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    /// Appends a sample; stamps must be nondecreasing.
    pub fn push(&mut self, sample: Array1<f64>, iteration: u64, wall_ms: f64) {
        if let Some(last) = self.wall_ms.last() {
            assert!(wall_ms >= *last, "wall-clock stamps must be nondecreasing");
        }
        if let Some(last) = self.iterations.last() {
            assert!(iteration >= *last, "iteration stamps must be nondecreasing");
        }
        self.samples.push(sample);
        self.iterations.push(iteration);
        self.wall_ms.push(wall_ms);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Overrides the default burn-in (first 20 % of the trace).
    pub fn set_burn_in(&mut self, burn_in: usize) {
        self.burn_in = Some(burn_in);
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.len() / 5).min(self.len())
    }

    pub fn samples(&self) -> &[Array1<f64>] {
        &self.samples
    }

    pub fn post_burn_samples(&self) -> &[Array1<f64>] {
        &self.samples[self.burn_in()..]
    }

    pub fn iterations(&self) -> &[u64] {
        &self.iterations
    }

    pub fn wall_ms(&self) -> &[f64] {
        &self.wall_ms
    }

    /// Mean over the post-burn-in samples.
    pub fn posterior_mean(&self) -> Result<Array1<f64>> {
        let post = self.post_burn_samples();
        if post.is_empty() {
            return Err(Error::Config("trace has no post-burn-in samples".into()));
        }
        let mut m = Array1::<f64>::zeros(post[0].len());
        for s in post {
            m = m + s;
        }
        Ok(m.mapv(|v| v / post.len() as f64))
    }

    /// CSV dump: one row per sample, `iteration,wall_ms,theta_0,...`.
    pub fn write_csv<W: Write>(&self, mut w: W, config_hash: Option<&str>) -> std::io::Result<()> {
        if let Some(h) = config_hash {
            writeln!(w, "# config_hash={h}")?;
        }
        let d = self.samples.first().map_or(0, |s| s.len());
        let mut header = String::from("iteration,wall_ms");
        for j in 0..d {
            header.push_str(&format!(",theta_{j}"));
        }
        writeln!(w, "{header}")?;
        for i in 0..self.len() {
            let mut row = format!("{},{}", self.iterations[i], self.wall_ms[i]);
            for v in self.samples[i].iter() {
                row.push_str(&format!(",{v}"));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Posterior mean, unbiased covariance, and principal directions of a trace.
#[derive(Clone, Debug)]
pub struct TraceMoments {
    pub mean: Array1<f64>,
    pub covariance: Array2<f64>,
    /// Covariance eigenvalues, descending.
    pub eigenvalues: Array1<f64>,
    /// Matching eigenvectors as columns.
    pub principal_directions: Array2<f64>,
}

pub fn trace_moments(trace: &Trace) -> Result<TraceMoments> {
    let post = trace.post_burn_samples();
    if post.len() < 2 {
        return Err(Error::Config(format!(
            "trace_moments needs at least 2 post-burn-in samples, got {}",
            post.len()
        )));
    }
    let n = post.len();
    let d = post[0].len();
    let mut mean = Array1::<f64>::zeros(d);
    for s in post {
        mean = mean + s;
    }
    mean.mapv_inplace(|v| v / n as f64);
    let mut cov = Array2::<f64>::zeros((d, d));
    for s in post {
        let r = s - &mean;
        for i in 0..d {
            for j in 0..d {
                cov[[i, j]] += r[i] * r[j];
            }
        }
    }
    cov.mapv_inplace(|v| v / (n - 1) as f64);
    let (eigenvalues, principal_directions) = symmetric_eigen(&cov)?;
    Ok(TraceMoments {
        mean,
        covariance: cov,
        eigenvalues,
        principal_directions,
    })
}

/// One checkpoint of an accuracy-vs-progress curve.
#[derive(Clone, Debug)]
pub struct AccuracyPoint {
    pub iteration: u64,
    pub wall_ms: f64,
    pub accuracy: f64,
}

/// Renders checkpoints as CSV, columns exactly `iteration,wall_ms,accuracy`.
pub fn accuracy_curve_csv(points: &[AccuracyPoint], config_hash: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = config_hash {
        out.push_str(&format!("# config_hash={h}\n"));
    }
    out.push_str("iteration,wall_ms,accuracy\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.iteration, p.wall_ms, p.accuracy));
    }
    out
}

/// Accuracy of the running posterior-mean parameter on a held-out set, one
/// row per recorded checkpoint. `predictor(mean, test, i)` returns the
/// predicted label of test row i.
pub fn accuracy_curve<F>(trace: &Trace, test: &Dataset, predictor: F) -> Result<Vec<AccuracyPoint>>
where
    F: Fn(&Array1<f64>, &Dataset, usize) -> f64,
{
    if test.n() == 0 {
        return Err(Error::Config("accuracy_curve needs a nonempty test set".into()));
    }
    if trace.is_empty() {
        return Err(Error::Config("accuracy_curve needs a nonempty trace".into()));
    }
    let d = trace.samples()[0].len();
    let mut running = Array1::<f64>::zeros(d);
    let mut out = Vec::with_capacity(trace.len());
    for (t, sample) in trace.samples().iter().enumerate() {
        running = running + sample;
        let mean = running.mapv(|v| v / (t + 1) as f64);
        let mut correct = 0usize;
        for i in 0..test.n() {
            if predictor(&mean, test, i) == test.label(i) {
                correct += 1;
            }
        }
        out.push(AccuracyPoint {
            iteration: trace.iterations()[t],
            wall_ms: trace.wall_ms()[t],
            accuracy: correct as f64 / test.n() as f64,
        });
    }
    Ok(out)
}

/// A 1-D potential given by value and derivative closures plus the locations
/// where the derivative jumps. `grad` must return the chosen subgradient at
/// the kinks themselves.
pub struct OneDimPotential {
    value: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    grad: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    kinks: Vec<f64>,
}

impl OneDimPotential {
    pub fn new<F, G>(value: F, grad: G, kinks: Vec<f64>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        OneDimPotential {
            value: Box::new(value),
            grad: Box::new(grad),
            kinks,
        }
    }

    pub fn value(&self, q: f64) -> f64 {
        (self.value)(q)
    }

    pub fn grad(&self, q: f64) -> f64 {
        (self.grad)(q)
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }
}

impl EnergyModel for OneDimPotential {
    fn dim(&self) -> usize {
        1
    }
    fn prior_logdensity(&self, theta: &Array1<f64>) -> f64 {
        -self.value(theta[0])
    }
    fn prior_subgrad(&self, theta: &Array1<f64>) -> Array1<f64> {
        Array1::from_vec(vec![-self.grad(theta[0])])
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

/// A base potential with one kink replaced by a cubic Hermite patch on
/// `[q0 - eps, q0 + eps]`; equal to the base outside the window, C^1 on the
/// whole line.
pub struct SmoothedPotential<'a> {
    base: &'a OneDimPotential,
    left: f64,
    right: f64,
    f_left: f64,
    f_right: f64,
    d_left: f64,
    d_right: f64,
}

impl SmoothedPotential<'_> {
    pub fn value(&self, q: f64) -> f64 {
        if q < self.left || q > self.right {
            return self.base.value(q);
        }
        let h = self.right - self.left;
        let u = (q - self.left) / h;
        let h00 = (2.0 * u - 3.0) * u * u + 1.0;
        let h10 = ((u - 2.0) * u + 1.0) * u;
        let h01 = (3.0 - 2.0 * u) * u * u;
        let h11 = (u - 1.0) * u * u;
        h00 * self.f_left + h10 * h * self.d_left + h01 * self.f_right + h11 * h * self.d_right
    }

    pub fn grad(&self, q: f64) -> f64 {
        if q < self.left || q > self.right {
            return self.base.grad(q);
        }
        let h = self.right - self.left;
        let u = (q - self.left) / h;
        let dh00 = 6.0 * u * u - 6.0 * u;
        let dh10 = 3.0 * u * u - 4.0 * u + 1.0;
        let dh01 = -6.0 * u * u + 6.0 * u;
        let dh11 = 3.0 * u * u - 2.0 * u;
        (dh00 * self.f_left + dh10 * h * self.d_left + dh01 * self.f_right + dh11 * h * self.d_right)
            / h
    }
}

impl EnergyModel for SmoothedPotential<'_> {
    fn dim(&self) -> usize {
        1
    }
    fn prior_logdensity(&self, theta: &Array1<f64>) -> f64 {
        -self.value(theta[0])
    }
    fn prior_subgrad(&self, theta: &Array1<f64>) -> Array1<f64> {
        Array1::from_vec(vec![-self.grad(theta[0])])
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

/// Replaces the kink at `q0` with the minimal-degree polynomial matching the
/// base's value and derivative at both window endpoints (a cubic Hermite
/// patch). Rejects windows containing any other kink.
pub fn smooth_poly_1d(base: &OneDimPotential, q0: f64, eps: f64) -> Result<SmoothedPotential<'_>> {
    if eps <= 0.0 {
        return Err(Error::Config(format!("smoothing width {eps} must be > 0")));
    }
    for &k in base.kinks() {
        if k != q0 && (k - q0).abs() <= eps {
            return Err(Error::Config(format!(
                "kink at {k} lies inside the smoothing window around {q0}"
            )));
        }
    }
    let left = q0 - eps;
    let right = q0 + eps;
    Ok(SmoothedPotential {
        base,
        left,
        right,
        f_left: base.value(left),
        f_right: base.value(right),
        d_left: base.grad(left),
        d_right: base.grad(right),
    })
}

/// Standard error of a chain mean by the method of batch means.
pub fn batch_means_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return f64::INFINITY;
    }
    let n_batches = ((n as f64).sqrt() as usize).clamp(2, 64);
    let len = n / n_batches;
    let used = n_batches * len;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| xs[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    let grand = xs[..used].iter().sum::<f64>() / used as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>()
        / (n_batches as f64 - 1.0);
    (var / n_batches as f64).sqrt()
}

/// Mean of q under exp(-U(q)) by trapezoid quadrature on [lo, hi].
pub fn quadrature_mean_1d<F: Fn(f64) -> f64>(u: F, lo: f64, hi: f64, points: usize) -> f64 {
    let h = (hi - lo) / (points - 1) as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..points {
        let q = lo + i as f64 * h;
        let w = (-u(q)).exp();
        let trap = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
        num += trap * q * w;
        den += trap * w;
    }
    num / den
}

/// Result of comparing subgradient HMC on a kinked potential against
/// MH-corrected HMC on progressively tighter smoothed versions.
#[derive(Clone, Debug)]
pub struct SmoothingReport {
    pub eps: Vec<f64>,
    pub smoothed_means: Vec<f64>,
    pub smoothed_ses: Vec<f64>,
    pub subgrad_mean: f64,
    pub subgrad_se: f64,
    /// |smoothed mean - subgradient mean| per eps.
    pub discrepancies: Vec<f64>,
    pub quadrature_mean: f64,
    /// Discrepancy sequence is nonincreasing up to 3-sigma Monte Carlo slack.
    pub nonincreasing_within_mc: bool,
}

fn run_1d_chain<M: EnergyModel>(
    model: &M,
    config: &SamplerConfig,
    draws: usize,
    burn: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let data = Dataset::empty(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ChainState::new(Array1::zeros(1));
    let mut kept = Vec::with_capacity(draws);
    for t in 0..(draws + burn) {
        state = hmc_draw(model, &state, config, &data, &mut rng)?;
        if t >= burn {
            kept.push(state.theta[0]);
        }
    }
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    Ok((mean, batch_means_se(&kept)))
}

/// Runs MH-corrected HMC on each smoothed potential and subgradient HMC on
/// the kinked base, reporting mean discrepancies per smoothing width against
/// the quadrature ground truth. `eps_list` must be decreasing.
pub fn smoothing_convergence_study(
    base: &OneDimPotential,
    q0: f64,
    eps_list: &[f64],
    config: &SamplerConfig,
    draws: usize,
    burn: usize,
    seed: u64,
) -> Result<SmoothingReport> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("eps_list must be strictly decreasing".into()));
    }
    let mut mh_config = config.clone();
    mh_config.mh_correction = true;
    mh_config.batch_size = 0;

    let quadrature_mean = quadrature_mean_1d(|q| base.value(q), -30.0, 30.0, 600_001);
    let (subgrad_mean, subgrad_se) = run_1d_chain(base, &mh_config, draws, burn, seed)?;

    let mut smoothed_means = Vec::new();
    let mut smoothed_ses = Vec::new();
    for (i, &eps) in eps_list.iter().enumerate() {
        let (mean, se) = if base.kinks().is_empty() {
            run_1d_chain(base, &mh_config, draws, burn, seed + 1 + i as u64)?
        } else {
            let smoothed = smooth_poly_1d(base, q0, eps)?;
            run_1d_chain(&smoothed, &mh_config, draws, burn, seed + 1 + i as u64)?
        };
        smoothed_means.push(mean);
        smoothed_ses.push(se);
    }
    let discrepancies: Vec<f64> = smoothed_means
        .iter()
        .map(|m| (m - subgrad_mean).abs())
        .collect();
    let mut nonincreasing = true;
    for i in 1..discrepancies.len() {
        let slack = 3.0
            * (smoothed_ses[i - 1].powi(2)
                + smoothed_ses[i].powi(2)
                + 2.0 * subgrad_se.powi(2))
            .sqrt();
        if discrepancies[i] > discrepancies[i - 1] + slack {
            nonincreasing = false;
        }
    }
    Ok(SmoothingReport {
        eps: eps_list.to_vec(),
        smoothed_means,
        smoothed_ses,
        subgrad_mean,
        subgrad_se,
        discrepancies,
        quadrature_mean,
        nonincreasing_within_mc: nonincreasing,
    })
}

/// |q| + q^2/2: the standard kinked test potential.
pub fn abs_plus_quadratic() -> OneDimPotential {
    OneDimPotential::new(
        |q| q.abs() + 0.5 * q * q,
        |q| if q > 0.0 { 1.0 + q } else if q < 0.0 { -1.0 + q } else { 1.0 },
        vec![0.0],
    )
}
