//! Sampler family: subgradient leapfrog HMC with optional MH correction,
//! SSGLD, SSGNHT, a stochastic random-walk Metropolis baseline, and the
//! stepsize schedules they share.
//!
//! All steps are deterministic functions of (state, config, RNG stream):
//! the same seed reproduces the same trace bit for bit. One `ChainState` is
//! owned by one logical thread; chains share the dataset read-only.

use ndarray::Array1;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{draw_minibatch, Dataset};
use crate::error::{Error, Result};
use crate::potential::{
    full_energy, full_subgradient, stochastic_energy, stochastic_subgradient, EnergyModel,
    Minibatch,
};

/// Any coordinate beyond this magnitude aborts the chain.
pub const DIVERGENCE_BOUND: f64 = 1e10;

/// Position, momentum and bookkeeping for one chain.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub theta: Array1<f64>,
    pub momentum: Array1<f64>,
    /// Thermostat variable; present only on SSGNHT chains.
    pub thermostat: Option<f64>,
    /// Step counter, starts at 1 and increases by 1 per step.
    pub step: u64,
    /// Per-dimension squared-gradient accumulator for adaptive stepsizes.
    pub adapt_accum: Array1<f64>,
}

impl ChainState {
    pub fn new(theta: Array1<f64>) -> Self {
        let d = theta.len();
        ChainState {
            theta,
            momentum: Array1::zeros(d),
            thermostat: None,
            step: 1,
            adapt_accum: Array1::zeros(d),
        }
    }

    /// SSGNHT chain: momentum drawn from N(0, I), thermostat starts at the
    /// diffusion constant.
    pub fn new_thermostat<R: Rng>(theta: Array1<f64>, diffusion: f64, rng: &mut R) -> Self {
        let d = theta.len();
        let momentum = standard_normal_vec(d, rng);
        ChainState {
            theta,
            momentum,
            thermostat: Some(diffusion),
            step: 1,
            adapt_accum: Array1::zeros(d),
        }
    }
}

/// Stepsize schedules. `polynomial` yields `a * t^-gamma`; `adaptive` keeps a
/// per-dimension squared-gradient accumulator and yields
/// `eps0 / (sqrt(accum_j) + delta)`.
#[derive(Clone, Debug, PartialEq)]
pub enum StepsizeSchedule {
    Constant(f64),
    Polynomial { a: f64, gamma: f64 },
    Adaptive { eps0: f64, delta: f64 },
}

impl StepsizeSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepsizeSchedule::Constant(e) if e > 0.0 => Ok(()),
            StepsizeSchedule::Constant(e) => {
                Err(Error::Config(format!("constant stepsize {e} must be > 0")))
            }
            StepsizeSchedule::Polynomial { a, gamma } => {
                if a <= 0.0 {
                    Err(Error::Config(format!("polynomial coefficient {a} must be > 0")))
                } else if !(0.0..=1.0).contains(&gamma) {
                    Err(Error::Config(format!("gamma {gamma} outside [0, 1]")))
                } else {
                    Ok(())
                }
            }
            StepsizeSchedule::Adaptive { eps0, delta } => {
                if eps0 <= 0.0 {
                    Err(Error::Config(format!("eps0 {eps0} must be > 0")))
                } else if delta <= 0.0 {
                    Err(Error::Config(format!("delta {delta} must be > 0")))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn is_adaptive(&self) -> bool {
        matches!(self, StepsizeSchedule::Adaptive { .. })
    }
}

/// Schedule evaluation on raw bookkeeping; `next_stepsize` and the mixture
/// rounds share this path so their adaptive accumulators behave identically.
pub(crate) fn stepsize_core(
    schedule: &StepsizeSchedule,
    step: u64,
    accum: &mut Array1<f64>,
    g: &Array1<f64>,
) -> Result<Array1<f64>> {
    schedule.validate()?;
    let d = accum.len();
    match *schedule {
        StepsizeSchedule::Constant(e) => Ok(Array1::from_elem(d, e)),
        StepsizeSchedule::Polynomial { a, gamma } => {
            let e = a * (step as f64).powf(-gamma);
            Ok(Array1::from_elem(d, e))
        }
        StepsizeSchedule::Adaptive { eps0, delta } => {
            for (acc, gj) in accum.iter_mut().zip(g.iter()) {
                *acc += gj * gj;
            }
            Ok(accum.mapv(|acc| eps0 / (acc.sqrt() + delta)))
        }
    }
}

/// Per-dimension stepsize for the state's current step.
///
/// The adaptive schedule first folds `g` into the accumulator, so the first
/// step sees `eps0 / (|g_1j| + delta)` per dimension.
pub fn next_stepsize(
    schedule: &StepsizeSchedule,
    state: &mut ChainState,
    g: &Array1<f64>,
) -> Result<Array1<f64>> {
    stepsize_core(schedule, state.step, &mut state.adapt_accum, g)
}

/// Knobs shared by every sampler in the family.
#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub schedule: StepsizeSchedule,
    /// Leapfrog steps per HMC trajectory (also the SSGNHT steps-per-sample
    /// convention used by experiment runners).
    pub leapfrog_steps: usize,
    /// SSGNHT diffusion constant A.
    pub diffusion: f64,
    /// Diagonal mass matrix for HMC; None means identity.
    pub mass: Option<Array1<f64>>,
    /// Minibatch size N-tilde.
    pub batch_size: usize,
    pub mh_correction: bool,
    /// Proposal standard deviation for the random-walk baseline.
    pub proposal_stddev: f64,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            schedule: StepsizeSchedule::Constant(0.001),
            leapfrog_steps: 20,
            diffusion: 1.0,
            mass: None,
            batch_size: usize::MAX, // clamped to N by the runners
            mh_correction: false,
            proposal_stddev: 0.1,
            rng_seed: 0,
        }
    }
}

pub(crate) fn standard_normal_vec<R: Rng>(d: usize, rng: &mut R) -> Array1<f64> {
    Array1::from_iter((0..d).map(|_| {
        let z: f64 = StandardNormal.sample(rng);
        z
    }))
}

pub(crate) fn check_state(theta: &Array1<f64>, step: u64) -> Result<()> {
    for &v in theta.iter() {
        if !v.is_finite() || v.abs() > DIVERGENCE_BOUND {
            return Err(Error::ChainDiverged {
                step,
                what: format!("coordinate reached {v}"),
            });
        }
    }
    Ok(())
}

fn kinetic_energy(p: &Array1<f64>, mass: Option<&Array1<f64>>) -> f64 {
    match mass {
        None => 0.5 * p.dot(p),
        Some(m) => 0.5 * p.iter().zip(m.iter()).map(|(pj, mj)| pj * pj / mj).sum::<f64>(),
    }
}

pub(crate) fn resample_momentum<R: Rng>(
    d: usize,
    mass: Option<&Array1<f64>>,
    rng: &mut R,
) -> Array1<f64> {
    let z = standard_normal_vec(d, rng);
    match mass {
        None => z,
        Some(m) => Array1::from_iter(z.iter().zip(m.iter()).map(|(zj, mj)| zj * mj.sqrt())),
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn leapfrog_kernel<M: EnergyModel>(
    model: &M,
    theta: &Array1<f64>,
    p: &Array1<f64>,
    eps: &Array1<f64>,
    mass: Option<&Array1<f64>>,
    data: &Dataset,
    batch: &Minibatch,
    step: u64,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let grad = |th: &Array1<f64>| -> Result<Array1<f64>> {
        if batch.len() == data.n() {
            full_subgradient(model, th, data)
        } else {
            stochastic_subgradient(model, th, batch, data)
        }
    };
    let g0 = grad(theta)?;
    let mut p_half = p.clone();
    for j in 0..p_half.len() {
        p_half[j] -= 0.5 * eps[j] * g0[j];
    }
    let mut theta_new = theta.clone();
    for j in 0..theta_new.len() {
        let minv = mass.map_or(1.0, |m| 1.0 / m[j]);
        theta_new[j] += eps[j] * minv * p_half[j];
    }
    check_state(&theta_new, step)?;
    let g1 = grad(&theta_new)?;
    let mut p_new = p_half;
    for j in 0..p_new.len() {
        p_new[j] -= 0.5 * eps[j] * g1[j];
    }
    if p_new.iter().any(|v| !v.is_finite()) {
        return Err(Error::ChainDiverged {
            step,
            what: "non-finite momentum".into(),
        });
    }
    Ok((theta_new, p_new))
}

/// One leapfrog step of the subgradient Hamiltonian dynamics:
/// half momentum kick, full position drift, half momentum kick. The
/// subgradient is evaluated on the supplied batch (exact when the batch is
/// the full dataset).
pub fn leapfrog_step<M: EnergyModel>(
    model: &M,
    state: &ChainState,
    eps: f64,
    data: &Dataset,
    batch: &Minibatch,
) -> Result<ChainState> {
    if eps <= 0.0 {
        return Err(Error::Config(format!("leapfrog stepsize {eps} must be > 0")));
    }
    let eps_vec = Array1::from_elem(state.theta.len(), eps);
    let (theta, momentum) = leapfrog_kernel(
        model,
        &state.theta,
        &state.momentum,
        &eps_vec,
        None,
        data,
        batch,
        state.step,
    )?;
    Ok(ChainState {
        theta,
        momentum,
        thermostat: state.thermostat,
        step: state.step,
        adapt_accum: state.adapt_accum.clone(),
    })
}

/// One HMC draw: resample momentum, run `leapfrog_steps` leapfrog steps, and
/// (optionally) apply a Metropolis-Hastings accept/reject on the exact
/// Hamiltonian. MH correction requires full-batch energies.
///
/// RNG consumption order: momentum draws, then per-step batch draws (only in
/// minibatch mode), then one uniform for the MH test.
pub fn hmc_draw<M: EnergyModel, R: Rng>(
    model: &M,
    state: &ChainState,
    config: &SamplerConfig,
    data: &Dataset,
    rng: &mut R,
) -> Result<ChainState> {
    if config.leapfrog_steps == 0 {
        return Err(Error::Config("leapfrog_steps must be >= 1".into()));
    }
    let n = data.n();
    let batch_size = config.batch_size.min(n.max(1));
    let full_batch = n == 0 || batch_size == n;
    if config.mh_correction && !full_batch {
        return Err(Error::Config(
            "MH correction requires full-batch energies".into(),
        ));
    }
    let d = state.theta.len();
    let mass = config.mass.as_ref();
    if let Some(m) = mass {
        if m.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: m.len(),
            });
        }
    }

    let mut work = state.clone();
    let p0 = resample_momentum(d, mass, rng);

    // Stepsize is fixed for the whole trajectory. The adaptive schedule needs
    // a gradient to fold into its accumulator; probe it at the start point.
    let eps = if config.schedule.is_adaptive() {
        let probe = if full_batch {
            full_subgradient(model, &work.theta, data)?
        } else {
            let b = draw_minibatch(data, batch_size, rng)?;
            stochastic_subgradient(model, &work.theta, &b, data)?
        };
        next_stepsize(&config.schedule, &mut work, &probe)?
    } else {
        next_stepsize(&config.schedule, &mut work, &Array1::zeros(d))?
    };

    let h_old = if config.mh_correction {
        Some(full_energy(model, &work.theta, data)? + kinetic_energy(&p0, mass))
    } else {
        None
    };

    let mut theta = work.theta.clone();
    let mut p = p0.clone();
    for _ in 0..config.leapfrog_steps {
        let batch = if full_batch {
            Minibatch::full(n)
        } else {
            draw_minibatch(data, batch_size, rng)?
        };
        let (t, pm) = leapfrog_kernel(model, &theta, &p, &eps, mass, data, &batch, work.step)?;
        theta = t;
        p = pm;
    }

    let accept = match h_old {
        None => true,
        Some(h0) => {
            let h1 = full_energy(model, &theta, data)? + kinetic_energy(&p, mass);
            let log_ratio = h0 - h1;
            log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
        }
    };

    Ok(ChainState {
        theta: if accept { theta } else { work.theta },
        momentum: if accept { p } else { p0 },
        thermostat: work.thermostat,
        step: work.step + 1,
        adapt_accum: work.adapt_accum,
    })
}

/// Langevin position update shared by `ssgld_step` and the mixture round:
/// `theta' = theta - eps^2/2 * g + eps * z`, z standard normal.
pub(crate) fn ssgld_kernel<R: Rng>(
    theta: &Array1<f64>,
    g: &Array1<f64>,
    eps: &Array1<f64>,
    rng: &mut R,
) -> Array1<f64> {
    let mut out = theta.clone();
    for j in 0..out.len() {
        let z: f64 = StandardNormal.sample(rng);
        out[j] += -0.5 * eps[j] * eps[j] * g[j] + eps[j] * z;
    }
    out
}

/// Potential subgradient from a freshly drawn minibatch; prior-only targets
/// (empty datasets) skip the batch machinery.
fn draw_subgradient<M: EnergyModel, R: Rng>(
    model: &M,
    theta: &Array1<f64>,
    config: &SamplerConfig,
    data: &Dataset,
    rng: &mut R,
) -> Result<Array1<f64>> {
    if data.n() == 0 {
        return full_subgradient(model, theta, data);
    }
    let batch = draw_minibatch(data, config.batch_size.min(data.n()), rng)?;
    stochastic_subgradient(model, theta, &batch, data)
}

/// One SSGLD step. Draws a fresh minibatch, estimates the potential
/// subgradient, and applies the Langevin update without MH correction (the
/// decaying/adaptive stepsize plays that role).
pub fn ssgld_step<M: EnergyModel, R: Rng>(
    model: &M,
    state: &ChainState,
    config: &SamplerConfig,
    data: &Dataset,
    rng: &mut R,
) -> Result<ChainState> {
    let g = draw_subgradient(model, &state.theta, config, data, rng)?;
    let mut next = state.clone();
    let eps = next_stepsize(&config.schedule, &mut next, &g)?;
    next.theta = ssgld_kernel(&state.theta, &g, &eps, rng);
    check_state(&next.theta, next.step)?;
    next.step += 1;
    Ok(next)
}

/// Thermostatted momentum/position/thermostat update shared by `ssgnht_step`
/// and the mixture round. Uses the post-update momentum in the thermostat
/// increment, with the mean stepsize as the thermostat's scalar step when the
/// schedule is per-dimension.
pub(crate) fn ssgnht_kernel<R: Rng>(
    theta: &Array1<f64>,
    p: &Array1<f64>,
    xi: f64,
    g: &Array1<f64>,
    eps: &Array1<f64>,
    diffusion: f64,
    rng: &mut R,
) -> (Array1<f64>, Array1<f64>, f64) {
    let d = theta.len();
    let mut p_new = p.clone();
    for j in 0..d {
        let z: f64 = StandardNormal.sample(rng);
        p_new[j] += -eps[j] * xi * p[j] - eps[j] * g[j] + (2.0 * diffusion * eps[j]).sqrt() * z;
    }
    let mut theta_new = theta.clone();
    for j in 0..d {
        theta_new[j] += eps[j] * p_new[j];
    }
    let eps_mean = eps.sum() / d as f64;
    let xi_new = xi + eps_mean * (p_new.dot(&p_new) / d as f64 - 1.0);
    (theta_new, p_new, xi_new)
}

/// One SSGNHT step (Euler integrator with a Nose-Hoover thermostat absorbing
/// the minibatch gradient noise).
pub fn ssgnht_step<M: EnergyModel, R: Rng>(
    model: &M,
    state: &ChainState,
    config: &SamplerConfig,
    data: &Dataset,
    rng: &mut R,
) -> Result<ChainState> {
    if config.diffusion <= 0.0 {
        return Err(Error::Config(format!(
            "diffusion {} must be > 0",
            config.diffusion
        )));
    }
    let xi = state.thermostat.ok_or_else(|| {
        Error::Config("SSGNHT chain must be initialized with a thermostat".into())
    })?;
    let g = draw_subgradient(model, &state.theta, config, data, rng)?;
    let mut next = state.clone();
    let eps = next_stepsize(&config.schedule, &mut next, &g)?;
    let (theta, p, xi_new) =
        ssgnht_kernel(&state.theta, &state.momentum, xi, &g, &eps, config.diffusion, rng);
    check_state(&theta, next.step)?;
    next.theta = theta;
    next.momentum = p;
    next.thermostat = Some(xi_new);
    next.step += 1;
    Ok(next)
}

/// Stochastic random-walk Metropolis baseline: isotropic Gaussian proposal,
/// accepted on a minibatch energy-difference estimate (prior part exact, the
/// likelihood part scaled by N / N-tilde, one shared batch for both points).
pub fn srwm_step<M: EnergyModel, R: Rng>(
    model: &M,
    state: &ChainState,
    config: &SamplerConfig,
    data: &Dataset,
    rng: &mut R,
) -> Result<ChainState> {
    if config.proposal_stddev <= 0.0 {
        return Err(Error::Config(format!(
            "proposal_stddev {} must be > 0",
            config.proposal_stddev
        )));
    }
    let d = state.theta.len();
    let z = standard_normal_vec(d, rng);
    let proposal = &state.theta + &z.mapv(|v| v * config.proposal_stddev);

    let batch_size = config.batch_size.min(data.n());
    let delta_u = if data.n() == 0 {
        model.prior_logdensity(&proposal) - model.prior_logdensity(&state.theta)
    } else {
        let batch = draw_minibatch(data, batch_size, rng)?;
        stochastic_energy(model, &state.theta, &batch, data)?
            - stochastic_energy(model, &proposal, &batch, data)?
    };

    let accept = delta_u >= 0.0 || rng.random::<f64>().ln() < delta_u;
    let mut next = state.clone();
    if accept {
        check_state(&proposal, next.step)?;
        next.theta = proposal;
    }
    next.step += 1;
    Ok(next)
}
