//! Blocked Gibbs sampler for the latent-variable density model
//! `y_i = μ(η_i) + σ ε_i`, `η_i ~ U(0, 1)`, and the posterior contraction
//! experiment built on it.
//!
//! `μ` is represented by its values on equally spaced knots and interpolated
//! linearly in between, so the transfer update is a finite-dimensional
//! conjugate Gaussian draw.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::exec;
use crate::gp_prior::{sample_rescale, standard_normals, GPPriorConfig, PathSampler, SigmaPrior};
use crate::grid::{hellinger, trapezoid, GridDensity, GridSpec, KERNEL_SDS, MAX_CONVOLUTION_LOSS, MIN_POINTS_PER_SIGMA};
use crate::presets;
use crate::report::{slope_fit, SlopeReport};
use crate::rng;
use crate::transfer::{mixture_values, MixtureRule, TransferFunction};

pub const LATENT_CELLS: usize = 512;
pub const DEFAULT_LATENT_KNOTS: usize = 64;
pub const MIN_OBSERVATIONS: usize = 10;
pub const SIGMA_STEP: f64 = 0.1;
pub const ADAPT_BATCH: usize = 50;
pub const ADAPT_FACTOR: f64 = 1.25;
pub const ACCEPT_BAND: (f64, f64) = (0.2, 0.4);
const CUTOFF_SQ: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NLLVMState {
    pub mu_values: Vec<f64>,
    pub sigma: f64,
    pub eta: Vec<f64>,
    pub log_post: f64,
}

impl NLLVMState {
    pub fn transfer(&self) -> Result<TransferFunction> {
        TransferFunction::on_uniform_knots(self.mu_values.clone())
    }

    pub fn check(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(param(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.eta.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(param("latents must lie in [0, 1]"));
        }
        if self.mu_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric { what: "transfer value".into(), index: None });
        }
        Ok(())
    }

    fn fitted(&self, eta: f64) -> f64 {
        let (j, w) = interp_weights(self.mu_values.len(), eta);
        (1.0 - w) * self.mu_values[j] + w * self.mu_values[j + 1]
    }

    pub fn residual_ss(&self, data: &[f64]) -> f64 {
        data.iter().zip(&self.eta).map(|(&y, &e)| (y - self.fitted(e)).powi(2)).sum()
    }
}

/// Segment index and weight of `t` on `k` equally spaced knots.
fn interp_weights(k: usize, t: f64) -> (usize, f64) {
    let pos = t.clamp(0.0, 1.0) * (k - 1) as f64;
    let j = (pos.floor() as usize).min(k - 2);
    (j, pos - j as f64)
}

fn check_data(data: &[f64], state: &NLLVMState) -> Result<()> {
    if data.len() != state.eta.len() {
        return Err(Error::Shape(format!("{} observations vs {} latents", data.len(), state.eta.len())));
    }
    Ok(())
}

/// Redraws every `η_i` from its full conditional, discretized to
/// [`LATENT_CELLS`] cells with a uniform draw inside the chosen cell.
pub fn update_latents(state: &mut NLLVMState, data: &[f64], rng: &mut impl Rng) -> Result<()> {
    check_data(data, state)?;
    let centers: Vec<f64> = (0..LATENT_CELLS)
        .map(|k| state.fitted((k as f64 + 0.5) / LATENT_CELLS as f64))
        .collect();
    let inv = 1.0 / state.sigma;
    let mut d2 = vec![0.0; LATENT_CELLS];
    let mut cum = vec![0.0; LATENT_CELLS];
    let mut stranded = 0usize;
    for (eta, &y) in state.eta.iter_mut().zip(data) {
        let mut min = f64::INFINITY;
        for (d, &c) in d2.iter_mut().zip(&centers) {
            let z = (y - c) * inv;
            *d = z * z;
            min = min.min(*d);
        }
        if min > CUTOFF_SQ {
            stranded += 1;
            *eta = rng.random::<f64>();
            continue;
        }
        let mut total = 0.0;
        for (c, &d) in cum.iter_mut().zip(&d2) {
            if d <= CUTOFF_SQ {
                total += (-0.5 * (d - min)).exp();
            }
            *c = total;
        }
        let u = rng.random::<f64>() * total;
        let k = cum.partition_point(|&c| c <= u).min(LATENT_CELLS - 1);
        *eta = ((k as f64 + rng.random::<f64>()) / LATENT_CELLS as f64).min(1.0);
    }
    if stranded > 0 {
        tracing::warn!(stranded, "observations beyond 8 sigma of the transfer range; latents drawn uniformly");
    }
    Ok(())
}

/// Gaussian conditional of the whitened knot values `z` (with `μ = L z`).
struct TransferConditional {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

fn transfer_conditional(state: &NLLVMState, data: &[f64], prior: &PathSampler) -> Result<TransferConditional> {
    let k = prior.knots().len();
    if state.mu_values.len() != k {
        return Err(Error::Shape(format!("{} transfer values vs {k} knots", state.mu_values.len())));
    }
    let mut g = DMatrix::<f64>::zeros(k, k);
    let mut r = DVector::<f64>::zeros(k);
    for (&y, &e) in data.iter().zip(&state.eta) {
        let (j, w) = interp_weights(k, e);
        let (a, b) = (1.0 - w, w);
        g[(j, j)] += a * a;
        g[(j, j + 1)] += a * b;
        g[(j + 1, j)] += a * b;
        g[(j + 1, j + 1)] += b * b;
        r[j] += a * y;
        r[j + 1] += b * y;
    }
    let l = prior.factor();
    let s2 = state.sigma * state.sigma;
    let mut precision = l.transpose() * g * l / s2;
    for i in 0..k {
        precision[(i, i)] += 1.0;
    }
    let b = l.transpose() * r / s2;
    let ch = precision.cholesky().ok_or(Error::Conditioning { jitter: 0.0 })?;
    Ok(TransferConditional { mean: ch.solve(&b), factor: ch.l() })
}

/// Conditional mean of the knot values given latents and σ.
pub fn transfer_posterior_mean(state: &NLLVMState, data: &[f64], prior: &PathSampler) -> Result<Vec<f64>> {
    check_data(data, state)?;
    let c = transfer_conditional(state, data, prior)?;
    Ok((prior.factor() * c.mean).iter().copied().collect())
}

/// Conjugate Gibbs draw of the knot values given `(η_i, y_i)` and σ.
pub fn update_transfer(state: &mut NLLVMState, data: &[f64], prior: &PathSampler, rng: &mut impl Rng) -> Result<()> {
    check_data(data, state)?;
    let c = transfer_conditional(state, data, prior)?;
    let eps = standard_normals(c.mean.len(), rng);
    let dz = c
        .factor
        .transpose()
        .solve_upper_triangular(&eps)
        .ok_or(Error::Conditioning { jitter: 0.0 })?;
    let mu = prior.factor() * (c.mean + dz);
    state.mu_values = mu.iter().copied().collect();
    Ok(())
}

/// Batch step-size adaptation for the log-σ random walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaAdapter {
    pub step: f64,
    pub adapting: bool,
    batch: usize,
    batch_accepted: usize,
    proposals: usize,
    accepted: usize,
}

impl Default for SigmaAdapter {
    fn default() -> Self {
        Self { step: SIGMA_STEP, adapting: true, batch: 0, batch_accepted: 0, proposals: 0, accepted: 0 }
    }
}

impl SigmaAdapter {
    fn record(&mut self, accepted: bool) {
        if self.adapting {
            self.batch += 1;
            self.batch_accepted += usize::from(accepted);
            if self.batch == ADAPT_BATCH {
                let rate = self.batch_accepted as f64 / ADAPT_BATCH as f64;
                if rate > ACCEPT_BAND.1 {
                    self.step *= ADAPT_FACTOR;
                } else if rate < ACCEPT_BAND.0 {
                    self.step /= ADAPT_FACTOR;
                }
                self.batch = 0;
                self.batch_accepted = 0;
            }
        } else {
            self.proposals += 1;
            self.accepted += usize::from(accepted);
        }
    }

    /// Acceptance rate since adaptation stopped.
    pub fn acceptance(&self) -> Option<f64> {
        (self.proposals > 0).then(|| self.accepted as f64 / self.proposals as f64)
    }
}

fn log_sigma_target(sigma: f64, n: usize, rss: f64, prior: &SigmaPrior) -> f64 {
    // The trailing ln σ is the Jacobian of the log transform.
    -(n as f64) * sigma.ln() - rss / (2.0 * sigma * sigma) + prior.log_density(sigma) + sigma.ln()
}

/// One random-walk Metropolis step on `log σ`. Returns whether it moved.
pub fn update_sigma(
    state: &mut NLLVMState,
    data: &[f64],
    prior: &SigmaPrior,
    adapter: &mut SigmaAdapter,
    rng: &mut impl Rng,
) -> Result<bool> {
    check_data(data, state)?;
    let rss = state.residual_ss(data);
    let proposal = state.sigma * (adapter.step * rng.sample::<f64, _>(StandardNormal)).exp();
    let log_ratio = log_sigma_target(proposal, data.len(), rss, prior)
        - log_sigma_target(state.sigma, data.len(), rss, prior);
    let accept = proposal > 0.0 && proposal.is_finite() && rng.random::<f64>().ln() < log_ratio;
    if accept {
        state.sigma = proposal;
    }
    adapter.record(accept);
    Ok(accept)
}

/// Unnormalized joint log density of `(y, η, μ, σ)`.
pub fn log_posterior(state: &NLLVMState, data: &[f64], prior: &PathSampler, sigma_prior: &SigmaPrior) -> f64 {
    let n = data.len() as f64;
    let rss = state.residual_ss(data);
    let loglik = -n * state.sigma.ln() - rss / (2.0 * state.sigma * state.sigma);
    let mu = DVector::from_column_slice(&state.mu_values);
    let gp = match prior.factor().solve_lower_triangular(&mu) {
        Some(z) => -0.5 * z.norm_squared(),
        None => f64::NEG_INFINITY,
    };
    loglik + gp + sigma_prior.log_density(state.sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// Knot values at empirical quantiles, latents at mid-ranks, σ a quarter of the sample sd.
    EmpiricalQuantile,
    /// Flat transfer at `value`, latents uniform.
    Constant { value: f64, sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_knots: usize,
    pub init: Init,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { iters: 3000, burn_in: 1000, thin: 10, seed: 0, n_knots: DEFAULT_LATENT_KNOTS, init: Init::EmpiricalQuantile }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub states: Vec<NLLVMState>,
    pub acceptance: BTreeMap<String, f64>,
    pub mcmc: McmcConfig,
    pub prior: GPPriorConfig,
    pub rescale: f64,
    pub sigma_step: f64,
    /// Joint log density after every cycle, burn-in included.
    pub log_post_trace: Vec<f64>,
    pub seed: u64,
}

fn sample_sd(data: &[f64]) -> f64 {
    let n = data.len() as f64;
    let m = data.iter().sum::<f64>() / n;
    (data.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn initial_state(data: &[f64], n_knots: usize, init: Init, rng: &mut impl Rng) -> Result<NLLVMState> {
    let n = data.len();
    let state = match init {
        Init::EmpiricalQuantile => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| data[a].total_cmp(&data[b]));
            let sorted: Vec<f64> = order.iter().map(|&i| data[i]).collect();
            let mu_values = crate::transfer::uniform_knots(n_knots)
                .iter()
                .map(|&t| {
                    let pos = t * (n - 1) as f64;
                    let j = (pos.floor() as usize).min(n - 2);
                    let w = pos - j as f64;
                    (1.0 - w) * sorted[j] + w * sorted[j + 1]
                })
                .collect();
            let mut eta = vec![0.0; n];
            for (rank, &i) in order.iter().enumerate() {
                eta[i] = (rank as f64 + 0.5) / n as f64;
            }
            let sigma = (0.25 * sample_sd(data)).max(1e-6);
            NLLVMState { mu_values, sigma, eta, log_post: 0.0 }
        }
        Init::Constant { value, sigma } => NLLVMState {
            mu_values: vec![value; n_knots],
            sigma,
            eta: (0..n).map(|_| rng.random::<f64>()).collect(),
            log_post: 0.0,
        },
    };
    state.check()?;
    Ok(state)
}

/// Runs the blocked Gibbs sampler: latents, then transfer, then σ.
pub fn fit_mcmc(data: &[f64], cfg: &GPPriorConfig, mcmc: &McmcConfig) -> Result<PosteriorSamples> {
    cfg.validate()?;
    if data.len() < MIN_OBSERVATIONS {
        return Err(param(format!("need at least {MIN_OBSERVATIONS} observations, got {}", data.len())));
    }
    if let Some(i) = data.iter().position(|y| !y.is_finite()) {
        return Err(Error::Numeric { what: "observation".into(), index: Some(i) });
    }
    if mcmc.iters <= mcmc.burn_in || mcmc.thin == 0 {
        return Err(param("need iters > burn_in and thin ≥ 1"));
    }
    let mut rng = rng::task_rng(mcmc.seed, "mcmc", 0);
    let rescale = sample_rescale(cfg, &mut rng)?;
    let prior = PathSampler::new(cfg, rescale, mcmc.n_knots)?;
    let mut state = initial_state(data, mcmc.n_knots, mcmc.init, &mut rng)?;
    let mut adapter = SigmaAdapter::default();
    let mut states = Vec::with_capacity((mcmc.iters - mcmc.burn_in).div_ceil(mcmc.thin));
    let mut trace = Vec::with_capacity(mcmc.iters);
    for it in 0..mcmc.iters {
        adapter.adapting = it < mcmc.burn_in;
        let abort = |e: Error| {
            tracing::error!(iteration = it, "gibbs cycle failed: {e}");
            Error::Aborted { iteration: it, source: Box::new(e) }
        };
        update_latents(&mut state, data, &mut rng).map_err(abort)?;
        update_transfer(&mut state, data, &prior, &mut rng).map_err(abort)?;
        update_sigma(&mut state, data, &cfg.sigma_prior, &mut adapter, &mut rng).map_err(abort)?;
        state.log_post = log_posterior(&state, data, &prior, &cfg.sigma_prior);
        if !state.log_post.is_finite() {
            tracing::error!(iteration = it, sigma = state.sigma, "log posterior is not finite");
            return Err(abort(Error::Numeric { what: "log posterior".into(), index: None }));
        }
        trace.push(state.log_post);
        if it >= mcmc.burn_in && (it - mcmc.burn_in).is_multiple_of(mcmc.thin) {
            states.push(state.clone());
        }
    }
    let mut acceptance = BTreeMap::new();
    acceptance.insert("latents".to_string(), 1.0);
    acceptance.insert("transfer".to_string(), 1.0);
    acceptance.insert("sigma".to_string(), adapter.acceptance().unwrap_or(0.0));
    Ok(PosteriorSamples {
        states,
        acceptance,
        mcmc: *mcmc,
        prior: *cfg,
        rescale,
        sigma_step: adapter.step,
        log_post_trace: trace,
        seed: mcmc.seed,
    })
}

/// Posterior mean of `f_{μ,σ}` over the kept states. Individual states may
/// spill past the window; the average may lose at most 1e−4 of its mass.
pub fn predictive_density(samples: &PosteriorSamples, grid: &GridSpec) -> Result<GridDensity> {
    if samples.states.is_empty() {
        return Err(param("no kept states"));
    }
    if let Some(st) = samples.states.iter().find(|s| s.sigma / grid.dx() < MIN_POINTS_PER_SIGMA) {
        return Err(Error::Resolution(format!("kept sigma {} below 4 grid spacings", st.sigma)));
    }
    let parts = exec::map_range(samples.states.len(), |s| {
        let st = &samples.states[s];
        mixture_values(&st.transfer()?, st.sigma, grid, MixtureRule::ExactLinear)
    });
    let mut acc = vec![0.0; grid.n];
    for p in parts {
        acc.iter_mut().zip(p?).for_each(|(a, v)| *a += v);
    }
    let k = samples.states.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    let lost = 1.0 - trapezoid(&acc, grid.dx());
    if lost > MAX_CONVOLUTION_LOSS {
        return Err(Error::Coverage { lost });
    }
    GridDensity::new(*grid, acc)
}

/// Log exponent `t = β(2 ∨ q)/(2β + 1) + 1` of the optimal rate.
pub fn rate_log_exponent(beta: f64, q: f64) -> f64 {
    beta * q.max(2.0) / (2.0 * beta + 1.0) + 1.0
}

/// `ε_n = n^{−β/(2β+1)} (log n)^t`.
pub fn target_rate(n: f64, beta: f64, q: f64) -> f64 {
    n.powf(-beta / (2.0 * beta + 1.0)) * n.ln().powf(rate_log_exponent(beta, q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// Medians of the Hellinger distance per `n`, their log-log slope, and in
    /// `target` the log-log slope of `ε_n` over the same `n`.
    pub slope: SlopeReport,
    pub t: f64,
    pub target_rate: Vec<f64>,
    /// Per-`n` replicate distances.
    pub hellinger: Vec<Vec<f64>>,
}

/// Zero points to add per side of `grid` so it holds `range(μ) ± 8.5σ` of every state.
fn padding_for(samples: &PosteriorSamples, grid: &GridSpec) -> usize {
    let reach = KERNEL_SDS + 0.5;
    let (lo, hi) = samples.states.iter().fold((grid.lo, grid.hi), |(lo, hi), st| {
        let mn = st.mu_values.iter().copied().fold(f64::INFINITY, f64::min);
        let mx = st.mu_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo.min(mn - reach * st.sigma), hi.max(mx + reach * st.sigma))
    });
    ((grid.lo - lo).max(hi - grid.hi) / grid.dx()).ceil() as usize
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) }
}

/// Fits the sampler to `reps` samples of each size in `n_list` drawn from
/// `f0` and tracks the Hellinger distance of the predictive density to `f0`.
/// Distances are computed on the window of `f0` padded with zeros until it
/// covers every kept state.
/// Passes when the medians strictly decrease; the slope carries no threshold.
#[allow(clippy::too_many_arguments)]
pub fn contraction_experiment(
    f0: &GridDensity,
    n_list: &[usize],
    reps: usize,
    cfg: &GPPriorConfig,
    mcmc: &McmcConfig,
    beta: f64,
    q: f64,
    seed: u64,
) -> Result<ContractionReport> {
    if reps == 0 {
        return Err(param("reps must be positive"));
    }
    let t = rate_log_exponent(beta, q);
    let xs: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    let target_rate: Vec<f64> = xs.iter().map(|&n| target_rate(n, beta, q)).collect();
    let mut flags = Vec::new();
    if n_list.len() < 3 {
        flags.push("insufficient-points".to_string());
    } else if n_list.windows(2).any(|w| w[1] <= w[0]) {
        flags.push("n-not-increasing".to_string());
    } else if n_list[n_list.len() - 1] < 16 * n_list[0] {
        flags.push("insufficient-span".to_string());
    }
    let empty = |flags| ContractionReport {
        slope: SlopeReport { xs: xs.clone(), ys: vec![], slope: f64::NAN, r2: f64::NAN, target: None, pass: false, seed, flags },
        t,
        target_rate: target_rate.clone(),
        hellinger: vec![],
    };
    if !flags.is_empty() {
        return Ok(empty(flags));
    }

    let tasks = n_list.len() * reps;
    let results = exec::map_range(tasks, |task| {
        let n = n_list[task / reps];
        let mut r = rng::task_rng(seed, "contraction-data", task as u64);
        let data = presets::sample(f0, n, &mut r);
        let run = McmcConfig { seed: rng::stream_id("contraction-chain", seed ^ task as u64), ..*mcmc };
        let samples = fit_mcmc(&data, cfg, &run)?;
        let wide = f0.padded(padding_for(&samples, f0.grid()))?;
        hellinger(&predictive_density(&samples, wide.grid())?, &wide)
    });
    let mut hell = vec![Vec::with_capacity(reps); n_list.len()];
    for (task, r) in results.into_iter().enumerate() {
        match r {
            Ok(h) => hell[task / reps].push(h),
            Err(e) => {
                tracing::warn!(task, "contraction fit aborted: {e}");
                flags.push(format!("fit-aborted: {e}"));
            }
        }
    }
    if !flags.is_empty() {
        return Ok(ContractionReport { hellinger: hell, ..empty(flags) });
    }
    let ys: Vec<f64> = hell.iter().map(|h| median(h)).collect();
    let (slope, r2) = slope_fit(&xs, &ys, true)?;
    let (target, _) = slope_fit(&xs, &target_rate, true)?;
    let pass = ys.windows(2).all(|w| w[1] < w[0]);
    Ok(ContractionReport {
        slope: SlopeReport { xs, ys, slope, r2, target: Some(target), pass, seed, flags },
        t,
        target_rate,
        hellinger: hell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp_prior::RescaleDist;

    fn state(mu: Vec<f64>, sigma: f64, n: usize) -> NLLVMState {
        NLLVMState { mu_values: mu, sigma, eta: vec![0.5; n], log_post: 0.0 }
    }

    #[test]
    fn constant_transfer_gives_uniform_latents() {
        let data = vec![0.7; 10_000];
        let mut s = state(vec![0.7; 16], 0.3, data.len());
        let mut r = rng::stream(1, 0);
        update_latents(&mut s, &data, &mut r).unwrap();
        let m = s.eta.iter().sum::<f64>() / s.eta.len() as f64;
        assert!((m - 0.5).abs() < 0.02, "{m}");
    }

    #[test]
    fn identity_transfer_pins_latent() {
        let data = vec![0.3; 10_000];
        let mut s = state(crate::transfer::uniform_knots(64), 0.01, data.len());
        let mut r = rng::stream(2, 0);
        update_latents(&mut s, &data, &mut r).unwrap();
        let m = s.eta.iter().sum::<f64>() / s.eta.len() as f64;
        // Oracle: truncated normal mean on the unit interval, by direct quadrature.
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..100_000 {
            let e = (k as f64 + 0.5) / 100_000.0;
            let w = (-0.5 * ((0.3 - e) / 0.01_f64).powi(2)).exp();
            num += e * w;
            den += w;
        }
        assert!((m - num / den).abs() < 0.01, "{m}");
        assert!(s.eta.iter().all(|e| (0.0..=1.0).contains(e)));
    }

    #[test]
    fn latent_draws_are_deterministic() {
        let data: Vec<f64> = (0..50).map(|i| i as f64 / 50.0).collect();
        let mut a = state(crate::transfer::uniform_knots(32), 0.05, 50);
        let mut b = a.clone();
        update_latents(&mut a, &data, &mut rng::stream(3, 0)).unwrap();
        update_latents(&mut b, &data, &mut rng::stream(3, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stranded_observation_falls_back_to_uniform() {
        let data = vec![100.0; 20];
        let mut s = state(vec![0.0; 16], 0.01, 20);
        update_latents(&mut s, &data, &mut rng::stream(4, 0)).unwrap();
        assert!(s.eta.iter().all(|e| (0.0..=1.0).contains(e)));
    }

    fn prior(a: f64, k: usize) -> (GPPriorConfig, PathSampler) {
        let cfg = GPPriorConfig { rescale: RescaleDist::Fixed(a), ..Default::default() };
        let p = PathSampler::new(&cfg, a, k).unwrap();
        (cfg, p)
    }

    #[test]
    fn no_data_transfer_draw_is_prior() {
        let (_, p) = prior(20.0, 32);
        let mut s = state(vec![0.0; 32], 0.1, 0);
        let mut r = rng::stream(5, 0);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| {
                update_transfer(&mut s, &[], &p, &mut r).unwrap();
                s.mu_values[7]
            })
            .collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((v - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn transfer_mean_matches_direct_regression() {
        let (_, p) = prior(20.0, 64);
        let n = 1000;
        let mut r = rng::stream(6, 0);
        let eta: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let truth = |e: f64| (2.0 * std::f64::consts::PI * e).sin();
        let data: Vec<f64> = eta.iter().map(|&e| truth(e) + 0.05 * r.sample::<f64, _>(StandardNormal)).collect();
        let s = NLLVMState { mu_values: vec![0.0; 64], sigma: 0.05, eta: eta.clone(), log_post: 0.0 };
        let mean = transfer_posterior_mean(&s, &data, &p).unwrap();

        // Oracle: the n×n form K Hᵀ (H K Hᵀ + σ²I)⁻¹ y with K the jittered knot covariance.
        let l = p.factor();
        let kk = l * l.transpose();
        let h = DMatrix::from_fn(n, 64, |i, j| {
            let (jj, w) = interp_weights(64, eta[i]);
            if j == jj { 1.0 - w } else if j == jj + 1 { w } else { 0.0 }
        });
        let mut gram = &h * &kk * h.transpose();
        for i in 0..n {
            gram[(i, i)] += 0.05 * 0.05;
        }
        let alpha = gram.lu().solve(&DVector::from_vec(data.clone())).unwrap();
        let oracle = &kk * h.transpose() * alpha;
        let gap = mean.iter().zip(oracle.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-6, "{gap}");

        let tf = TransferFunction::on_uniform_knots(mean).unwrap();
        let rmse = (eta.iter().map(|&e| (tf.eval(e) - truth(e)).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!(rmse < 0.05, "{rmse}");
    }

    #[test]
    fn duplicated_observations_pull_the_mean() {
        let (_, p) = prior(20.0, 64);
        let eta = vec![0.4; 20];
        let data = vec![1.3; 20];
        let s = NLLVMState { mu_values: vec![0.0; 64], sigma: 0.1, eta, log_post: 0.0 };
        let tf = TransferFunction::on_uniform_knots(transfer_posterior_mean(&s, &data, &p).unwrap()).unwrap();
        assert!((tf.eval(0.4) - 1.3).abs() < 0.2);
    }

    #[test]
    fn sigma_walk_targets_prior_without_data() {
        let sp = SigmaPrior { a: 3.0, b: 1.0 };
        let mut s = state(vec![0.0; 16], 0.5, 0);
        let mut ad = SigmaAdapter::default();
        let mut r = rng::stream(7, 0);
        for _ in 0..10_000 {
            update_sigma(&mut s, &[], &sp, &mut ad, &mut r).unwrap();
        }
        ad.adapting = false;
        let mut sum = 0.0;
        for _ in 0..100_000 {
            update_sigma(&mut s, &[], &sp, &mut ad, &mut r).unwrap();
            sum += s.sigma;
        }
        let mean = sum / 1e5;
        assert!((mean / 0.5 - 1.0).abs() < 0.03, "{mean}");
        let acc = ad.acceptance().unwrap();
        assert!((0.1..=0.6).contains(&acc), "{acc}");
    }

    #[test]
    fn zero_residuals_shrink_sigma() {
        let sp = SigmaPrior { a: 3.0, b: 0.01 };
        let data = vec![0.0; 50];
        let mut s = state(vec![0.0; 16], 1.0, 50);
        let mut ad = SigmaAdapter::default();
        let mut r = rng::stream(8, 0);
        let mut draws: Vec<f64> = (0..10_000)
            .map(|_| {
                update_sigma(&mut s, &data, &sp, &mut ad, &mut r).unwrap();
                s.sigma
            })
            .collect();
        draws.sort_by(f64::total_cmp);
        assert!(draws[5000] < 1.0);
    }

    #[test]
    fn fit_bookkeeping_and_determinism() {
        let mut r = rng::stream(9, 0);
        let f0 = presets::recovery_truth(1024).unwrap();
        let data = presets::sample(&f0, 60, &mut r);
        let cfg = GPPriorConfig::default();
        let mc = McmcConfig { iters: 40, burn_in: 39, thin: 5, seed: 3, ..Default::default() };
        let a = fit_mcmc(&data, &cfg, &mc).unwrap();
        assert_eq!(a.states.len(), 1);
        let b = fit_mcmc(&data, &cfg, &mc).unwrap();
        assert_eq!(a.acceptance, b.acceptance);
        assert_eq!(a.states, b.states);
        let mc = McmcConfig { iters: 100, burn_in: 40, thin: 7, ..mc };
        let c = fit_mcmc(&data, &cfg, &mc).unwrap();
        assert_eq!(c.states.len(), 60usize.div_ceil(7));
        for st in &c.states {
            st.check().unwrap();
        }
        assert!(c.acceptance.values().all(|a| (0.0..=1.0).contains(a)));
        assert!(fit_mcmc(&data[..5], &cfg, &mc).is_err());
        assert!(fit_mcmc(&data, &cfg, &McmcConfig { burn_in: 100, ..mc }).is_err());
    }

    #[test]
    fn single_state_predictive_is_its_mixture() {
        let mut r = rng::stream(10, 0);
        let f0 = presets::recovery_truth(1024).unwrap();
        let data = presets::sample(&f0, 60, &mut r);
        let mc = McmcConfig { iters: 30, burn_in: 29, thin: 1, seed: 1, ..Default::default() };
        let s = fit_mcmc(&data, &GPPriorConfig::default(), &mc).unwrap();
        let g = GridSpec::new(-1.0, 2.0, 2048).unwrap();
        let p = predictive_density(&s, &g).unwrap();
        let st = &s.states[0];
        let direct = crate::transfer::mixture_density_with(&st.transfer().unwrap(), st.sigma, &g, MixtureRule::ExactLinear)
            .unwrap()
            .density;
        assert!(p.sup_distance(&direct).unwrap() < 1e-12);
        assert!((p.mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rate_exponent() {
        assert_eq!(rate_log_exponent(2.0, 0.0), 1.8);
        assert!((rate_log_exponent(1.0, 3.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn contraction_flags_degenerate_lists() {
        let f0 = presets::recovery_truth(512).unwrap();
        let rep = contraction_experiment(&f0, &[100], 2, &GPPriorConfig::default(), &McmcConfig::default(), 2.0, 0.0, 1)
            .unwrap();
        assert!(rep.slope.invalid());
        assert!(rep.slope.flags[0].contains("insufficient-points"));
        assert!(rep.slope.slope.is_nan());
        assert!(!rep.slope.pass);
    }
}
