//! Parametric mixture of SVMs: per-component Gaussian input densities
//! N(mu_k, Sigma_k) with Sigma_k = L_k^T L_k, per-component linear SVM
//! weights eta_k with hinge pseudo-likelihoods, and a fixed uniform mixing
//! distribution.
//!
//! Two samplers operate on the posterior: a doubly stochastic round that
//! marginalizes the assignments over one minibatch and advances the packed
//! (eta, mu, L) vector with a stochastic-subgradient step, and an
//! HMC-within-Gibbs round that alternates hard assignments with
//! per-component updates.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::data::{draw_minibatch, Dataset};
use crate::error::{Error, Result};
use crate::linalg::invert;
use crate::potential::Minibatch;
use crate::samplers::{
    check_state, leapfrog_kernel, resample_momentum, ssgld_kernel, ssgnht_kernel,
    standard_normal_vec, stepsize_core, SamplerConfig, StepsizeSchedule,
};
use crate::svm_model::{predict, LinearSvmModel};

const LN_2PI: f64 = 1.8378770664093453;

/// Diagonal entries of the covariance factors are floored at this magnitude
/// after every update so Sigma = L^T L stays invertible.
const DIAG_FLOOR: f64 = 1e-6;

/// Which stochastic-subgradient step advances the packed parameters in the
/// doubly stochastic round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerSampler {
    Ssgld,
    Ssgnht,
}

/// Mixture-specific knobs; sampler knobs live in [`SamplerConfig`].
#[derive(Clone, Debug)]
pub struct MixtureConfig {
    pub k: usize,
    /// Hinge regularization constant shared by all components.
    pub c: f64,
    /// Variance of the N(0, v I) prior on the Gaussian means; None drops the
    /// prior term (improper flat prior).
    pub mu_prior_var: Option<f64>,
    /// When set, the doubly stochastic round only updates the eta blocks.
    pub freeze_gaussian: bool,
    pub inner: InnerSampler,
    /// Constant stepsize for the (mu, L) Langevin updates inside the
    /// within-Gibbs round.
    pub gauss_eps: f64,
}

impl MixtureConfig {
    pub fn new(k: usize) -> Self {
        MixtureConfig {
            k,
            c: 1.0,
            mu_prior_var: Some(100.0),
            freeze_gaussian: false,
            inner: InnerSampler::Ssgld,
            gauss_eps: 1e-3,
        }
    }
}

/// Per-component SVM weights, Gaussian means and covariance factors, plus
/// the mixing distribution. Sigma_k = L_k^T L_k by construction, so the
/// covariances stay positive semidefinite under any update to L_k.
#[derive(Clone, Debug)]
pub struct MixtureParams {
    pub weights: Vec<Array1<f64>>,
    pub means: Vec<Array1<f64>>,
    pub cov_factors: Vec<Array2<f64>>,
    pub mixing: Array1<f64>,
}

impl MixtureParams {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len())
    }

    /// Seeds the component means by a short k-means pass over a random
    /// candidate subsample (farthest-point picks, then Lloyd iterations),
    /// with identity covariance factors, zero weights, and uniform mixing.
    /// Deterministic given the RNG state.
    pub fn init<R: Rng>(k: usize, data: &Dataset, rng: &mut R) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        if data.n() == 0 {
            return Err(Error::Config("cannot seed mixture from an empty dataset".into()));
        }
        let d = data.dim();
        let n_cand = 1000.max(k).min(data.n());
        let cand: Vec<Array1<f64>> = rand::seq::index::sample(rng, data.n(), n_cand)
            .into_iter()
            .map(|i| data.dense_row(i))
            .collect();
        let mut means: Vec<Array1<f64>> = vec![cand[0].clone()];
        while means.len() < k {
            let far = cand
                .iter()
                .max_by(|a, b| {
                    let da: f64 = means
                        .iter()
                        .map(|m| {
                            let r = *a - m;
                            r.dot(&r)
                        })
                        .fold(f64::INFINITY, f64::min);
                    let db: f64 = means
                        .iter()
                        .map(|m| {
                            let r = *b - m;
                            r.dot(&r)
                        })
                        .fold(f64::INFINITY, f64::min);
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            means.push(far.clone());
        }
        // Lloyd iterations over the candidates pull the seeds onto cluster
        // centroids
        for _ in 0..10 {
            let mut sums: Vec<Array1<f64>> = vec![Array1::zeros(d); k];
            let mut counts = vec![0usize; k];
            for x in &cand {
                let nearest = (0..k)
                    .min_by(|&a, &b| {
                        let ra = x - &means[a];
                        let rb = x - &means[b];
                        ra.dot(&ra).partial_cmp(&rb.dot(&rb)).unwrap()
                    })
                    .unwrap();
                sums[nearest] = &sums[nearest] + x;
                counts[nearest] += 1;
            }
            for j in 0..k {
                if counts[j] > 0 {
                    means[j] = sums[j].mapv(|v| v / counts[j] as f64);
                }
            }
        }
        Ok(MixtureParams {
            weights: vec![Array1::zeros(d); k],
            means,
            cov_factors: vec![Array2::eye(d); k],
            mixing: Array1::from_elem(k, 1.0 / k as f64),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        let d = self.dim();
        if k == 0 {
            return Err(Error::Config("mixture has no components".into()));
        }
        if self.means.len() != k || self.cov_factors.len() != k || self.mixing.len() != k {
            return Err(Error::Config("mixture component counts disagree".into()));
        }
        for m in &self.means {
            if m.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: m.len(),
                });
            }
        }
        for l in &self.cov_factors {
            if l.nrows() != d || l.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: l.nrows(),
                });
            }
            for j in 0..d {
                if l[[j, j]] == 0.0 {
                    return Err(Error::Numerical(format!(
                        "covariance factor has zero diagonal at {j}"
                    )));
                }
            }
        }
        let s: f64 = self.mixing.sum();
        if (s - 1.0).abs() > 1e-9 || self.mixing.iter().any(|&p| p < 0.0) {
            return Err(Error::Config("mixing weights are not a simplex point".into()));
        }
        Ok(())
    }

    fn floor_diagonals(&mut self) {
        for l in &mut self.cov_factors {
            for j in 0..l.nrows() {
                let v = l[[j, j]];
                if v.abs() < DIAG_FLOOR {
                    l[[j, j]] = if v < 0.0 { -DIAG_FLOOR } else { DIAG_FLOOR };
                }
            }
        }
    }

    /// Number of packed coordinates: the eta blocks, plus the Gaussian
    /// blocks unless frozen.
    pub fn packed_len(&self, freeze_gaussian: bool) -> usize {
        let (k, d) = (self.k(), self.dim());
        if freeze_gaussian {
            k * d
        } else {
            k * (2 * d + d * d)
        }
    }

    /// Packs [eta_0.., mu_0.., vec(L_0)..] into one vector (eta blocks only
    /// when frozen).
    pub fn pack(&self, freeze_gaussian: bool) -> Array1<f64> {
        let (k, d) = (self.k(), self.dim());
        let mut out = Vec::with_capacity(self.packed_len(freeze_gaussian));
        for w in &self.weights {
            out.extend(w.iter().copied());
        }
        if !freeze_gaussian {
            for m in &self.means {
                out.extend(m.iter().copied());
            }
            for l in &self.cov_factors {
                out.extend(l.iter().copied());
            }
        }
        debug_assert_eq!(out.len(), self.packed_len(freeze_gaussian));
        let _ = (k, d);
        Array1::from_vec(out)
    }

    /// Writes a packed vector back into the parameters (inverse of `pack`).
    pub fn unpack_into(&mut self, packed: &Array1<f64>, freeze_gaussian: bool) -> Result<()> {
        if packed.len() != self.packed_len(freeze_gaussian) {
            return Err(Error::DimensionMismatch {
                expected: self.packed_len(freeze_gaussian),
                got: packed.len(),
            });
        }
        let (k, d) = (self.k(), self.dim());
        let mut at = 0;
        for w in &mut self.weights {
            for j in 0..d {
                w[j] = packed[at + j];
            }
            at += d;
        }
        if !freeze_gaussian {
            for m in &mut self.means {
                for j in 0..d {
                    m[j] = packed[at + j];
                }
                at += d;
            }
            for l in &mut self.cov_factors {
                for r in 0..d {
                    for s in 0..d {
                        l[[r, s]] = packed[at + r * d + s];
                    }
                }
                at += d * d;
            }
        }
        let _ = k;
        Ok(())
    }
}

/// Per-component Gaussian quantities reused across data points within one
/// round: Sigma^-1, log|Sigma| and L^-T.
struct GaussCache {
    sigma_inv: Vec<Array2<f64>>,
    logdet: Vec<f64>,
    l_inv_t: Vec<Array2<f64>>,
}

impl GaussCache {
    fn build(params: &MixtureParams) -> Result<Self> {
        let mut sigma_inv = Vec::with_capacity(params.k());
        let mut logdet = Vec::with_capacity(params.k());
        let mut l_inv_t = Vec::with_capacity(params.k());
        for (k, l) in params.cov_factors.iter().enumerate() {
            let (l_inv, log_abs_det_l) = invert(l).map_err(|e| {
                Error::Numerical(format!("singular covariance factor for component {k}: {e}"))
            })?;
            // Sigma = L^T L  =>  Sigma^-1 = L^-1 L^-T, log|Sigma| = 2 log|det L|
            sigma_inv.push(l_inv.dot(&l_inv.t()));
            logdet.push(2.0 * log_abs_det_l);
            l_inv_t.push(l_inv.t().to_owned());
        }
        Ok(GaussCache {
            sigma_inv,
            logdet,
            l_inv_t,
        })
    }

    fn log_gaussian(&self, k: usize, x: &Array1<f64>, mu: &Array1<f64>) -> f64 {
        let d = x.len() as f64;
        let r = x - mu;
        let quad = r.dot(&self.sigma_inv[k].dot(&r));
        -0.5 * (d * LN_2PI + self.logdet[k] + quad)
    }
}

fn hinge_loglik(eta: &Array1<f64>, x: &Array1<f64>, y: f64, c: f64) -> f64 {
    -c * (1.0 - y * eta.dot(x)).max(0.0)
}

fn responsibilities_cached(
    params: &MixtureParams,
    cache: &GaussCache,
    x: &Array1<f64>,
    y: Option<f64>,
    c: f64,
) -> Result<Array1<f64>> {
    let k = params.k();
    if k == 1 {
        return Ok(Array1::from_vec(vec![1.0]));
    }
    let mut logw = Array1::<f64>::zeros(k);
    for j in 0..k {
        let mut lw = params.mixing[j].ln() + cache.log_gaussian(j, x, &params.means[j]);
        if let Some(y) = y {
            lw += hinge_loglik(&params.weights[j], x, y, c);
        }
        logw[j] = lw;
    }
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::Numerical(
            "responsibilities underflowed to zero for the given datum".into(),
        ));
    }
    let mut w = logw.mapv(|v| (v - m).exp());
    let s = w.sum();
    w.mapv_inplace(|v| v / s);
    Ok(w)
}

/// Posterior component probabilities for a labeled datum, proportional to
/// `pi_k N(x | mu_k, Sigma_k) exp(-c max(0, 1 - y eta_k.x))`, computed in
/// log space.
pub fn responsibilities(
    x: &Array1<f64>,
    y: f64,
    params: &MixtureParams,
    c: f64,
) -> Result<Array1<f64>> {
    params.validate()?;
    let cache = GaussCache::build(params)?;
    responsibilities_cached(params, &cache, x, Some(y), c)
}

/// Component probabilities at prediction time, when the label is unknown:
/// only the Gaussian and mixing factors enter.
pub fn responsibilities_unlabeled(x: &Array1<f64>, params: &MixtureParams) -> Result<Array1<f64>> {
    params.validate()?;
    let cache = GaussCache::build(params)?;
    responsibilities_cached(params, &cache, x, None, 0.0)
}

/// N x K responsibility matrix over a whole dataset (labeled).
pub fn responsibilities_matrix(
    params: &MixtureParams,
    data: &Dataset,
    c: f64,
) -> Result<Array2<f64>> {
    params.validate()?;
    let cache = GaussCache::build(params)?;
    let mut r = Array2::zeros((data.n(), params.k()));
    for i in 0..data.n() {
        let x = data.dense_row(i);
        let row = responsibilities_cached(params, &cache, &x, Some(data.label(i)), c)
            .map_err(|e| Error::Numerical(format!("datum {i}: {e}")))?;
        for j in 0..params.k() {
            r[[i, j]] = row[j];
        }
    }
    Ok(r)
}

fn batch_responsibilities(
    params: &MixtureParams,
    cache: &GaussCache,
    batch: &Minibatch,
    data: &Dataset,
    c: f64,
) -> Result<Vec<Array1<f64>>> {
    batch
        .indices
        .iter()
        .map(|&i| {
            let x = data.dense_row(i);
            responsibilities_cached(params, cache, &x, Some(data.label(i)), c)
                .map_err(|e| Error::Numerical(format!("datum {i}: {e}")))
        })
        .collect()
}

/// d log q / d eta_k over a minibatch: the N(0, I) prior gradient plus the
/// scaled responsibility-weighted hinge log-likelihood gradients.
pub fn ds_grad_eta(
    params: &MixtureParams,
    k: usize,
    batch: &Minibatch,
    data: &Dataset,
    cfg: &MixtureConfig,
) -> Result<Array1<f64>> {
    params.validate()?;
    let cache = GaussCache::build(params)?;
    let r = batch_responsibilities(params, &cache, batch, data, cfg.c)?;
    Ok(grad_eta_block(params, k, batch, &r, data, cfg.c))
}

fn grad_eta_block(
    params: &MixtureParams,
    k: usize,
    batch: &Minibatch,
    resp: &[Array1<f64>],
    data: &Dataset,
    c: f64,
) -> Array1<f64> {
    let eta = &params.weights[k];
    let mut g = eta.mapv(|v| -v);
    for (&i, r) in batch.indices.iter().zip(resp.iter()) {
        let y = data.label(i);
        if 1.0 - y * data.dot(i, eta) >= 0.0 {
            data.add_scaled(i, batch.scale * r[k] * c * y, &mut g);
        }
    }
    g
}

/// d log q / d mu_k over a minibatch: responsibility-weighted
/// `Sigma_k^-1 (x_i - mu_k)` plus the mean-prior gradient when configured.
pub fn ds_grad_mu(
    params: &MixtureParams,
    k: usize,
    batch: &Minibatch,
    data: &Dataset,
    cfg: &MixtureConfig,
) -> Result<Array1<f64>> {
    params.validate()?;
    let cache = GaussCache::build(params)?;
    let r = batch_responsibilities(params, &cache, batch, data, cfg.c)?;
    Ok(grad_mu_block(params, &cache, k, batch, &r, data, cfg))
}

fn grad_mu_block(
    params: &MixtureParams,
    cache: &GaussCache,
    k: usize,
    batch: &Minibatch,
    resp: &[Array1<f64>],
    data: &Dataset,
    cfg: &MixtureConfig,
) -> Array1<f64> {
    let mu = &params.means[k];
    let mut g = match cfg.mu_prior_var {
        Some(v) => mu.mapv(|m| -m / v),
        None => Array1::zeros(mu.len()),
    };
    for (&i, r) in batch.indices.iter().zip(resp.iter()) {
        let x = data.dense_row(i);
        let resid = &x - mu;
        let dir = cache.sigma_inv[k].dot(&resid);
        g = g + &dir.mapv(|v| batch.scale * r[k] * v);
    }
    g
}

/// d log q / d L_k over a minibatch. Per unit responsibility the per-datum
/// term is `-L^-T + (L a) a^T` with `a = Sigma^-1 (x - mu)`; the quadratic
/// part carries the full Sigma^-1 on both sides (equivalently
/// `L^-T r r^T Sigma^-1`), which the finite-difference tests pin down. The
/// flat prior on L contributes nothing.
pub fn ds_grad_l(
    params: &MixtureParams,
    k: usize,
    batch: &Minibatch,
    data: &Dataset,
    cfg: &MixtureConfig,
) -> Result<Array2<f64>> {
    params.validate()?;
    let cache = GaussCache::build(params)?;
    let r = batch_responsibilities(params, &cache, batch, data, cfg.c)?;
    Ok(grad_l_block(params, &cache, k, batch, &r, data))
}

fn grad_l_block(
    params: &MixtureParams,
    cache: &GaussCache,
    k: usize,
    batch: &Minibatch,
    resp: &[Array1<f64>],
    data: &Dataset,
) -> Array2<f64> {
    let d = params.dim();
    let l = &params.cov_factors[k];
    let mu = &params.means[k];
    let mut g = Array2::<f64>::zeros((d, d));
    for (&i, r) in batch.indices.iter().zip(resp.iter()) {
        let w = batch.scale * r[k];
        if w == 0.0 {
            continue;
        }
        let x = data.dense_row(i);
        let resid = &x - mu;
        let a = cache.sigma_inv[k].dot(&resid);
        let la = l.dot(&a);
        for rr in 0..d {
            for cc in 0..d {
                g[[rr, cc]] += w * (-cache.l_inv_t[k][[rr, cc]] + la[rr] * a[cc]);
            }
        }
    }
    g
}

/// Sampler bookkeeping carried across doubly stochastic rounds: step
/// counter, adaptive accumulator, and (for the thermostatted inner sampler)
/// momentum and thermostat over the packed coordinates.
#[derive(Clone, Debug)]
pub struct RoundBookkeeping {
    pub step: u64,
    pub adapt_accum: Array1<f64>,
    pub momentum: Array1<f64>,
    pub thermostat: Option<f64>,
}

impl RoundBookkeeping {
    pub fn new<R: Rng>(
        params: &MixtureParams,
        scfg: &SamplerConfig,
        mcfg: &MixtureConfig,
        rng: &mut R,
    ) -> Self {
        let dim = params.packed_len(mcfg.freeze_gaussian);
        let (momentum, thermostat) = match mcfg.inner {
            InnerSampler::Ssgld => (Array1::zeros(dim), None),
            InnerSampler::Ssgnht => (standard_normal_vec(dim, rng), Some(scfg.diffusion)),
        };
        RoundBookkeeping {
            step: 1,
            adapt_accum: Array1::zeros(dim),
            momentum,
            thermostat,
        }
    }
}

/// One doubly stochastic round: draw a minibatch, compute responsibilities
/// for those points only, and advance the packed (eta, mu, L) vector by one
/// stochastic-subgradient step (SSGLD or SSGNHT per config).
pub fn doubly_stochastic_hmc_round<R: Rng>(
    params: &MixtureParams,
    book: &mut RoundBookkeeping,
    scfg: &SamplerConfig,
    mcfg: &MixtureConfig,
    data: &Dataset,
    rng: &mut R,
) -> Result<MixtureParams> {
    params.validate()?;
    let cache = GaussCache::build(params)?;
    let batch = draw_minibatch(data, scfg.batch_size.min(data.n()), rng)?;
    let resp = batch_responsibilities(params, &cache, &batch, data, mcfg.c)?;

    // potential gradient = -(d log q) over the packed active coordinates
    let k = params.k();
    let active = params.packed_len(mcfg.freeze_gaussian);
    let mut g = Array1::<f64>::zeros(active);
    let d = params.dim();
    let mut at = 0;
    for j in 0..k {
        let block = grad_eta_block(params, j, &batch, &resp, data, mcfg.c);
        for (o, v) in g.slice_mut(ndarray::s![at..at + d]).iter_mut().zip(block.iter()) {
            *o = -v;
        }
        at += d;
    }
    if !mcfg.freeze_gaussian {
        for j in 0..k {
            let block = grad_mu_block(params, &cache, j, &batch, &resp, data, mcfg);
            for (o, v) in g.slice_mut(ndarray::s![at..at + d]).iter_mut().zip(block.iter()) {
                *o = -v;
            }
            at += d;
        }
        for j in 0..k {
            let block = grad_l_block(params, &cache, j, &batch, &resp, data);
            for (o, v) in g.slice_mut(ndarray::s![at..at + d * d]).iter_mut().zip(block.iter()) {
                *o = -v;
            }
            at += d * d;
        }
    }

    let theta = params.pack(mcfg.freeze_gaussian);
    let eps = stepsize_core(&scfg.schedule, book.step, &mut book.adapt_accum, &g)?;
    let theta_new = match mcfg.inner {
        InnerSampler::Ssgld => ssgld_kernel(&theta, &g, &eps, rng),
        InnerSampler::Ssgnht => {
            let xi = book.thermostat.ok_or_else(|| {
                Error::Config("thermostatted round bookkeeping missing thermostat".into())
            })?;
            let (t, p, xi_new) =
                ssgnht_kernel(&theta, &book.momentum, xi, &g, &eps, scfg.diffusion, rng);
            book.momentum = p;
            book.thermostat = Some(xi_new);
            t
        }
    };
    check_state(&theta_new, book.step)?;
    book.step += 1;

    let mut out = params.clone();
    out.unpack_into(&theta_new, mcfg.freeze_gaussian)?;
    if !mcfg.freeze_gaussian {
        out.floor_diagonals();
    }
    Ok(out)
}

/// Samples a component index for every datum from its labeled
/// responsibilities. Indices are 0-based.
pub fn gibbs_assignments<R: Rng>(
    params: &MixtureParams,
    data: &Dataset,
    c: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    params.validate()?;
    if params.k() == 1 {
        return Ok(vec![0; data.n()]);
    }
    let cache = GaussCache::build(params)?;
    let mut z = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let x = data.dense_row(i);
        let r = responsibilities_cached(params, &cache, &x, Some(data.label(i)), c)
            .map_err(|e| Error::Numerical(format!("datum {i}: {e}")))?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = params.k() - 1;
        for (j, &p) in r.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = j;
                break;
            }
        }
        z.push(pick);
    }
    Ok(z)
}

/// Wall-clock split of one within-Gibbs round.
#[derive(Clone, Copy, Debug, Default)]
pub struct GibbsRoundTiming {
    pub assign_ms: f64,
    pub eta_ms: f64,
    pub gauss_ms: f64,
}

fn draw_pool_batch<R: Rng>(pool: &[usize], nb: usize, rng: &mut R) -> Minibatch {
    let n = pool.len();
    if nb >= n {
        return Minibatch {
            indices: pool.to_vec(),
            scale: 1.0,
        };
    }
    let picked = rand::seq::index::sample(rng, n, nb);
    Minibatch {
        indices: picked.iter().map(|j| pool[j]).collect(),
        scale: n as f64 / nb as f64,
    }
}

/// One HMC-within-Gibbs round: (a) hard assignments for every datum,
/// (b) per-component stochastic subgradient HMC trajectory for eta_k over
/// its assigned rows, (c) one Langevin step on (mu_k, L_k) against the
/// assigned-data Gaussian log-density. Empty components fall back to the
/// prior: eta_k moves under the prior gradient alone and (mu_k, L_k) are
/// redrawn (mean from its Gaussian prior, factor reset to identity).
///
/// Returns the new parameters and the wall-clock split between phases.
/// `t` is the round index (drives the stepsize schedule); the adaptive
/// schedule is not meaningful here and is rejected.
pub fn hmc_within_gibbs_round<R: Rng>(
    params: &MixtureParams,
    t: u64,
    scfg: &SamplerConfig,
    mcfg: &MixtureConfig,
    data: &Dataset,
    rng: &mut R,
) -> Result<(MixtureParams, GibbsRoundTiming)> {
    if matches!(scfg.schedule, StepsizeSchedule::Adaptive { .. }) {
        return Err(Error::Config(
            "within-Gibbs rounds support constant or polynomial stepsizes only".into(),
        ));
    }
    params.validate()?;
    let d = params.dim();
    let k = params.k();
    let mut timing = GibbsRoundTiming::default();

    let t0 = Instant::now();
    let z = gibbs_assignments(params, data, mcfg.c, rng)?;
    timing.assign_ms = t0.elapsed().as_secs_f64() * 1e3;

    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &zi) in z.iter().enumerate() {
        pools[zi].push(i);
    }

    let mut out = params.clone();
    let mut accum = Array1::<f64>::zeros(d);
    let eps = stepsize_core(&scfg.schedule, t, &mut accum, &Array1::zeros(d))?;

    // (b) eta updates, conditioned on the assignments
    let t1 = Instant::now();
    let svm = LinearSvmModel { c: mcfg.c, dim: d };
    let empty = Dataset::empty(d);
    for j in 0..k {
        let mut theta = out.weights[j].clone();
        let mut p = resample_momentum(d, None, rng);
        for _ in 0..scfg.leapfrog_steps.max(1) {
            let (batch, dataset): (Minibatch, &Dataset) = if pools[j].is_empty() {
                (Minibatch::full(0), &empty)
            } else {
                (
                    draw_pool_batch(&pools[j], scfg.batch_size.min(pools[j].len()), rng),
                    data,
                )
            };
            let (th, pm) = leapfrog_kernel(&svm, &theta, &p, &eps, None, dataset, &batch, t)?;
            theta = th;
            p = pm;
        }
        check_state(&theta, t)?;
        out.weights[j] = theta;
    }
    timing.eta_ms = t1.elapsed().as_secs_f64() * 1e3;

    // (c) Gaussian parameter updates on the assigned data
    let t2 = Instant::now();
    let cache = GaussCache::build(&out)?;
    let gauss_eps = Array1::from_elem(d, mcfg.gauss_eps);
    let gauss_eps_l = Array1::from_elem(d * d, mcfg.gauss_eps);
    for j in 0..k {
        if pools[j].is_empty() {
            let var = mcfg.mu_prior_var.unwrap_or(100.0);
            out.means[j] = standard_normal_vec(d, rng).mapv(|v| v * var.sqrt());
            out.cov_factors[j] = Array2::eye(d);
            continue;
        }
        let batch = draw_pool_batch(&pools[j], scfg.batch_size.min(pools[j].len()), rng);
        // hard assignment: responsibility 1 for the owning component
        let ones: Vec<Array1<f64>> = batch
            .indices
            .iter()
            .map(|_| {
                let mut r = Array1::zeros(k);
                r[j] = 1.0;
                r
            })
            .collect();
        let g_mu = grad_mu_block(&out, &cache, j, &batch, &ones, data, mcfg).mapv(|v| -v);
        out.means[j] = ssgld_kernel(&out.means[j], &g_mu, &gauss_eps, rng);
        let g_l = grad_l_block(&out, &cache, j, &batch, &ones, data).mapv(|v| -v);
        let l_flat = Array1::from_iter(out.cov_factors[j].iter().copied());
        let g_l_flat = Array1::from_iter(g_l.iter().copied());
        let l_new = ssgld_kernel(&l_flat, &g_l_flat, &gauss_eps_l, rng);
        check_state(&l_new, t)?;
        for r in 0..d {
            for s in 0..d {
                out.cov_factors[j][[r, s]] = l_new[r * d + s];
            }
        }
    }
    out.floor_diagonals();
    timing.gauss_ms = t2.elapsed().as_secs_f64() * 1e3;

    Ok((out, timing))
}

/// Posterior samples prepared for repeated Gibbs-classifier votes.
pub struct GibbsClassifier {
    samples: Vec<MixtureParams>,
    caches: Vec<GaussCache>,
}

impl GibbsClassifier {
    pub fn new(samples: Vec<MixtureParams>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("gibbs classifier needs posterior samples".into()));
        }
        let caches = samples
            .iter()
            .map(GaussCache::build)
            .collect::<Result<Vec<_>>>()?;
        Ok(GibbsClassifier { samples, caches })
    }

    /// One vote: draw a posterior sample, draw a component from the
    /// label-free responsibilities, output sign(eta_z . x). Majority over
    /// `votes` (ties go to +1).
    pub fn predict<R: Rng>(&self, x: &Array1<f64>, votes: usize, rng: &mut R) -> Result<f64> {
        if votes == 0 {
            return Err(Error::Config("votes must be >= 1".into()));
        }
        let mut tally = 0i64;
        for _ in 0..votes {
            let s = rng.random_range(0..self.samples.len());
            let params = &self.samples[s];
            let r = responsibilities_cached(params, &self.caches[s], x, None, 0.0)?;
            let z = if params.k() == 1 {
                0
            } else {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = params.k() - 1;
                for (j, &p) in r.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = j;
                        break;
                    }
                }
                pick
            };
            tally += if predict(&params.weights[z], x) > 0.0 { 1 } else { -1 };
        }
        Ok(if tally >= 0 { 1.0 } else { -1.0 })
    }
}

/// Majority-vote Gibbs classifier over a set of posterior samples.
pub fn gibbs_classifier_predict<R: Rng>(
    samples: &[MixtureParams],
    x: &Array1<f64>,
    votes: usize,
    rng: &mut R,
) -> Result<f64> {
    GibbsClassifier::new(samples.to_vec())?.predict(x, votes, rng)
}
