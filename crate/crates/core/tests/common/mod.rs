//! Shared fixtures and independent oracles for the integration suites.
//!
//! Everything here goes through the crate's public API only; oracles are
//! written from scratch so they cannot share a bug with the code under test.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ssmcmc::data::Dataset;
use ssmcmc::potential::EnergyModel;
use ssmcmc::samplers::{ChainState, SamplerConfig, StepsizeSchedule};

/// Environment variable pointing at a directory of real benchmark datasets.
pub const DATA_ROOT_ENV: &str = "SSMCMC_DATA_ROOT";

/// Zero-mean Gaussian with diagonal covariance as a prior-only target.
pub struct DiagTarget {
    pub variances: Vec<f64>,
}

impl DiagTarget {
    pub fn standard(d: usize) -> Self {
        DiagTarget {
            variances: vec![1.0; d],
        }
    }
}

impl EnergyModel for DiagTarget {
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

/// Reference implementation of one MH-corrected full-batch HMC draw for a
/// smooth diagonal-Gaussian target, written independently of the library
/// integrator but drawing from the RNG in the same order (momentum, then one
/// uniform when the Metropolis ratio is below one).
pub fn gradient_hmc_draw_oracle<R: Rng>(
    variances: &[f64],
    state: &ChainState,
    eps: f64,
    leapfrog_steps: usize,
    mh: bool,
    rng: &mut R,
) -> ChainState {
    let d = variances.len();
    let p0 = Array1::from_iter((0..d).map(|_| {
        let z: f64 = StandardNormal.sample(rng);
        z
    }));
    let grad = |th: &Array1<f64>| -> Array1<f64> {
        Array1::from_iter(th.iter().zip(variances.iter()).map(|(t, v)| -(-t / v)))
    };
    let energy = |th: &Array1<f64>| -> f64 {
        let mut u = 0.0;
        for (t, v) in th.iter().zip(variances.iter()) {
            u -= -0.5 * t * t / v - 0.5 * (2.0 * std::f64::consts::PI * v).ln();
        }
        u
    };
    let eps_vec = Array1::from_elem(d, eps);
    let h_old = energy(&state.theta) + 0.5 * p0.dot(&p0);
    let mut theta = state.theta.clone();
    let mut p = p0.clone();
    for _ in 0..leapfrog_steps {
        let g0 = grad(&theta);
        let mut p_half = p.clone();
        for j in 0..d {
            p_half[j] -= 0.5 * eps_vec[j] * g0[j];
        }
        let mut theta_new = theta.clone();
        for j in 0..d {
            theta_new[j] += eps_vec[j] * 1.0 * p_half[j];
        }
        let g1 = grad(&theta_new);
        let mut p_new = p_half;
        for j in 0..d {
            p_new[j] -= 0.5 * eps_vec[j] * g1[j];
        }
        theta = theta_new;
        p = p_new;
    }
    let accept = if mh {
        let h_new = energy(&theta) + 0.5 * p.dot(&p);
        let log_ratio = h_old - h_new;
        log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
    } else {
        true
    };
    ChainState {
        theta: if accept { theta } else { state.theta.clone() },
        momentum: if accept { p } else { p0 },
        thermostat: state.thermostat,
        step: state.step + 1,
        adapt_accum: state.adapt_accum.clone(),
    }
}

/// Sample mean over a slice of vectors.
pub fn mean_of(samples: &[Array1<f64>]) -> Array1<f64> {
    let d = samples[0].len();
    let mut m = Array1::<f64>::zeros(d);
    for s in samples {
        m = m + s;
    }
    m.mapv(|v| v / samples.len() as f64)
}

/// Unbiased sample covariance.
pub fn cov_of(samples: &[Array1<f64>]) -> Array2<f64> {
    let d = samples[0].len();
    let m = mean_of(samples);
    let mut c = Array2::<f64>::zeros((d, d));
    for s in samples {
        let r = s - &m;
        for i in 0..d {
            for j in 0..d {
                c[[i, j]] += r[i] * r[j];
            }
        }
    }
    c.mapv(|v| v / (samples.len() - 1) as f64)
}

/// Angle in degrees between two directions (sign-insensitive).
pub fn principal_angle_deg(u: &Array1<f64>, v: &Array1<f64>) -> f64 {
    let cos = u.dot(v).abs() / (u.dot(u).sqrt() * v.dot(v).sqrt());
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Fraction of rows classified correctly by `sign(w.x)`.
pub fn linear_accuracy(w: &Array1<f64>, data: &Dataset) -> f64 {
    let mut correct = 0usize;
    for i in 0..data.n() {
        let pred = if data.dot(i, w) >= 0.0 { 1.0 } else { -1.0 };
        if pred == data.label(i) {
            correct += 1;
        }
    }
    correct as f64 / data.n() as f64
}

/// Deterministic full-batch subgradient descent on the SVM potential; a
/// plain optimization baseline used as the accuracy reference.
pub fn batch_svm_reference(data: &Dataset, c: f64, iters: usize) -> Array1<f64> {
    let d = data.dim();
    let model = ssmcmc::svm_model::LinearSvmModel { c, dim: d };
    let mut w = Array1::<f64>::zeros(d);
    let mut best = w.clone();
    let mut best_u = f64::INFINITY;
    for t in 1..=iters {
        let g = ssmcmc::potential::full_subgradient(&model, &w, data).unwrap();
        let norm = g.dot(&g).sqrt().max(1e-12);
        let step = 0.5 / (t as f64).sqrt();
        w = &w - &g.mapv(|v| step * v / norm * (data.n() as f64).sqrt());
        let u = ssmcmc::potential::full_energy(&model, &w, data).unwrap();
        if u < best_u {
            best_u = u;
            best = w.clone();
        }
    }
    best
}

/// AdaGrad full-batch subgradient descent on the SVM potential: a
/// deterministic batch solver that copes with heterogeneous feature scales.
pub fn adagrad_svm_reference(data: &Dataset, c: f64, lr: f64, iters: usize) -> Array1<f64> {
    let d = data.dim();
    let model = ssmcmc::svm_model::LinearSvmModel { c, dim: d };
    let mut w = Array1::<f64>::zeros(d);
    let mut accum = Array1::<f64>::zeros(d);
    let mut best = w.clone();
    let mut best_u = f64::INFINITY;
    for _ in 0..iters {
        let g = ssmcmc::potential::full_subgradient(&model, &w, data).unwrap();
        for j in 0..d {
            accum[j] += g[j] * g[j];
            w[j] -= lr * g[j] / (accum[j].sqrt() + 1e-12);
        }
        let u = ssmcmc::potential::full_energy(&model, &w, data).unwrap();
        if u < best_u {
            best_u = u;
            best = w.clone();
        }
    }
    best
}

/// Locates a real dataset file under `SSMCMC_DATA_ROOT`, trying each name
/// and a gzipped variant.
pub fn find_data_file(names: &[&str]) -> Option<std::path::PathBuf> {
    let root = std::env::var(DATA_ROOT_ENV).ok()?;
    for name in names {
        for suffix in ["", ".gz"] {
            let p = std::path::Path::new(&root).join(format!("{name}{suffix}"));
            if p.is_file() {
                return Some(p);
            }
        }
    }
    None
}

/// Two well-separated Gaussian clusters in d dimensions with opposite
/// within-cluster linear label rules (orthogonal to the center axis, so no
/// bias term is needed) and a little label noise. A stand-in with the same
/// shape as the IJCNN task for runs where the real files are absent.
/// Center axis and within-cluster rule used by `two_cluster_surrogate` for a
/// given seed.
pub fn two_cluster_truth(d: usize, seed: u64) -> (Array1<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = Array1::from_iter((0..d).map(|_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z
    }));
    let nu = u.dot(&u).sqrt();
    u.mapv_inplace(|v| v / nu);
    let mut w = Array1::from_iter((0..d).map(|_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z
    }));
    let proj = w.dot(&u);
    w = &w - &u.mapv(|v| v * proj);
    let nw = w.dot(&w).sqrt();
    w.mapv_inplace(|v| 2.0 * v / nw);
    (u, w)
}

pub fn two_cluster_surrogate(
    n: usize,
    d: usize,
    noise: f64,
    truth_seed: u64,
    sample_seed: u64,
) -> (Dataset, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let (u, w) = two_cluster_truth(d, truth_seed);

    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut clusters = Vec::with_capacity(n);
    for _ in 0..n {
        let cluster = usize::from(rng.random::<f64>() < 0.5);
        let sign = if cluster == 0 { 1.0 } else { -1.0 };
        let x = Array1::from_iter((0..d).map(|j| {
            let z: f64 = StandardNormal.sample(&mut rng);
            2.5 * sign * u[j] + z
        }));
        let rule = if cluster == 0 {
            w.dot(&x)
        } else {
            -w.dot(&x)
        };
        let mut y = if rule >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < noise {
            y = -y;
        }
        rows.push(x.to_vec());
        labels.push(y);
        clusters.push(cluster);
    }
    (Dataset::from_dense(rows, labels).unwrap(), clusters)
}

/// Noisy linear-rule data in d dimensions with feature scales spanning two
/// orders of magnitude: a stand-in with the same shape as the Higgs task
/// (large n, moderate d, imperfectly separable, heterogeneous raw features).
pub fn noisy_linear_surrogate(
    n: usize,
    d: usize,
    noise_sd: f64,
    truth_seed: u64,
    sample_seed: u64,
) -> Dataset {
    let mut truth_rng = ChaCha8Rng::seed_from_u64(truth_seed);
    let mut w = Array1::from_iter((0..d).map(|_| {
        let z: f64 = StandardNormal.sample(&mut truth_rng);
        z
    }));
    let nw = w.dot(&w).sqrt();
    w.mapv_inplace(|v| v / nw);
    // per-feature scales log-spaced in [0.1, 10]
    let scales = Array1::from_iter(
        (0..d).map(|j| 10f64.powf(-1.0 + 2.0 * j as f64 / (d - 1) as f64)),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let z = Array1::from_iter((0..d).map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        }));
        let e: f64 = StandardNormal.sample(&mut rng);
        // the rule acts on the standardized coordinates; features are stored
        // on their raw scales
        let y = if w.dot(&z) + noise_sd * e >= 0.0 { 1.0 } else { -1.0 };
        let x: Vec<f64> = z.iter().zip(scales.iter()).map(|(v, s)| v * s).collect();
        rows.push(x);
        labels.push(y);
    }
    Dataset::from_dense(rows, labels).unwrap()
}

/// Runs a chain of `steps` SSGLD/SSGNHT-style updates given a step closure,
/// recording every `stride`-th position after `burn` steps.
pub fn run_chain<F>(
    mut state: ChainState,
    steps: usize,
    burn: usize,
    stride: usize,
    mut advance: F,
) -> Vec<Array1<f64>>
where
    F: FnMut(ChainState) -> ChainState,
{
    let mut out = Vec::new();
    for t in 0..steps {
        state = advance(state);
        if t >= burn && (t - burn) % stride == 0 {
            out.push(state.theta.clone());
        }
    }
    out
}

/// Convenience constructor for constant-stepsize sampler configs.
pub fn constant_config(eps: f64, batch_size: usize) -> SamplerConfig {
    SamplerConfig {
        schedule: StepsizeSchedule::Constant(eps),
        batch_size,
        ..Default::default()
    }
}
