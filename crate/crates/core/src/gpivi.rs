//! Implicit variational family `q_{μ,σ}(θ) = ∫₀¹ φ_σ(θ − μ(η)) dη` for scalar
//! parameters, the α-VB objective, a deterministic optimizer, and the
//! restricted-family and risk-bound quantities.
//!
//! Every expectation under `q` is a trapezoid sum on a local grid covering
//! `range(μ) ± 8.5σ` at ten points per σ.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{param, Error, Result};
use crate::grid::{std_normal_cdf, GridDensity, GridSpec};
use crate::models::{posterior_moments, prior_density, BayesModel};
use crate::rng;
use crate::transfer::{mixture_density_with, quantile_of, uniform_knots, MixtureRule, TransferFunction};

pub const MIN_VI_KNOTS: usize = 8;
pub const MAX_VI_KNOTS: usize = 256;
pub const Q_REACH: f64 = 8.5;
pub const Q_POINTS_PER_SIGMA: f64 = 10.0;
pub const MAX_Q_POINTS: usize = 1 << 15;
pub const SUPPORT_TOL: f64 = 1e-8;
pub const FD_STEP: f64 = 1e-4;
pub const MAX_HALVINGS: u32 = 30;
pub const REL_TOL: f64 = 1e-8;
pub const FAMILY_MEANS: usize = 41;
pub const FAMILY_TAUS: usize = 9;
/// Standard-normal quantile knots cover `|z| ≤ 7` in steps of 0.01.
const QUANTILE_Z_MAX: f64 = 7.0;
const QUANTILE_Z_NODES: usize = 1401;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalParams {
    pub mu: TransferFunction,
    pub log_sigma: f64,
}

impl VariationalParams {
    pub fn new(mu: TransferFunction, log_sigma: f64) -> Result<Self> {
        if !log_sigma.is_finite() {
            return Err(param("log sigma must be finite"));
        }
        Ok(Self { mu, log_sigma })
    }

    pub fn constant(m: f64, sigma: f64) -> Result<Self> {
        Self::new(TransferFunction::constant(m)?, sigma.ln())
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }
}

/// Piecewise-linear quantile of `N(mean, sd²)` with knots at `Φ(z)` for `z` on
/// a uniform grid; the outer `10⁻¹²` of mass sits at `±7sd`.
pub fn normal_quantile_transfer(mean: f64, sd: f64) -> Result<TransferFunction> {
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(param(format!("sd must be non-negative, got {sd}")));
    }
    let mut knots = vec![0.0];
    let mut values = vec![mean - QUANTILE_Z_MAX * sd];
    for k in 0..QUANTILE_Z_NODES {
        let z = -QUANTILE_Z_MAX + 2.0 * QUANTILE_Z_MAX * k as f64 / (QUANTILE_Z_NODES - 1) as f64;
        knots.push(std_normal_cdf(z));
        values.push(mean + sd * z);
    }
    knots.push(1.0);
    values.push(mean + QUANTILE_Z_MAX * sd);
    TransferFunction::new(knots, values)
}

/// Window `range(μ) ± 8.5σ` at ten points per σ.
pub fn local_grid(params: &VariationalParams) -> Result<GridSpec> {
    let s = params.sigma();
    let lo = params.mu.min_value() - Q_REACH * s;
    let hi = params.mu.max_value() + Q_REACH * s;
    let n = ((hi - lo) / s * Q_POINTS_PER_SIGMA).ceil() as usize + 1;
    if n > MAX_Q_POINTS {
        return Err(Error::Resolution(format!("q spans {:.1} bandwidths", (hi - lo) / s)));
    }
    GridSpec::new(lo, hi, n.max(65))
}

/// `q_{μ,σ}` tabulated on `grid`.
pub fn q_density(params: &VariationalParams, grid: &GridSpec) -> Result<GridDensity> {
    mixture_density_with(&params.mu, params.sigma(), grid, MixtureRule::ExactLinear).map(|m| m.density)
}

/// `q_{μ,σ}` on its own [`local_grid`].
pub fn q_local(params: &VariationalParams) -> Result<GridDensity> {
    q_density(params, &local_grid(params)?)
}

fn trapezoid_weights(n: usize, dx: f64) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if i == 0 || i == n - 1 { 0.5 * dx } else { dx })
}

/// `∫ q f` by the trapezoid rule on the grid of `q`.
pub fn expect_q(q: &GridDensity, f: impl Fn(f64) -> f64) -> f64 {
    let g = q.grid();
    trapezoid_weights(g.n, g.dx())
        .zip(q.values())
        .enumerate()
        .filter(|(_, (_, &v))| v > 0.0)
        .map(|(i, (w, &v))| w * v * f(g.x(i)))
        .sum()
}

/// `D(q ‖ prior)`, or a support error when `q` leaves the prior support.
pub fn prior_kl(q: &GridDensity, model: &dyn BayesModel) -> Result<f64> {
    let (a, b) = model.prior_support();
    let g = q.grid();
    let mut outside = 0.0;
    let mut kl = 0.0;
    for (i, (w, &v)) in trapezoid_weights(g.n, g.dx()).zip(q.values()).enumerate() {
        let x = g.x(i);
        if x < a || x > b {
            outside += w * v;
        } else if v > 0.0 {
            kl += w * v * (v.ln() - model.log_prior(x));
        }
    }
    if outside > SUPPORT_TOL {
        return Err(Error::Support { mass: outside });
    }
    Ok(kl)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParts {
    /// `E_q[−Σ_i log p(y_i | θ)]`.
    pub expected_nll: f64,
    pub prior_kl: f64,
}

impl ObjectiveParts {
    pub fn objective(&self, alpha: f64) -> f64 {
        alpha * self.expected_nll + self.prior_kl
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(param(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

pub fn objective_parts(
    params: &VariationalParams,
    model: &dyn BayesModel,
    loglik: &dyn Fn(f64) -> f64,
) -> Result<ObjectiveParts> {
    let q = q_local(params)?;
    let prior_kl = prior_kl(&q, model)?;
    let expected_nll = -expect_q(&q, loglik);
    if !expected_nll.is_finite() {
        return Err(Error::Numeric { what: "expected log likelihood".into(), index: None });
    }
    Ok(ObjectiveParts { expected_nll, prior_kl })
}

/// `α E_q[−Σ log p(y_i|θ)] + D(q ‖ prior)`, which equals `α Ψ(q)` up to a
/// constant independent of `q`.
pub fn practical_objective(params: &VariationalParams, model: &dyn BayesModel, data: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if data.is_empty() {
        return Err(param("objective needs data"));
    }
    let loglik = model.loglik_fn(data);
    objective_parts(params, model, &*loglik).map(|p| p.objective(alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiDiagnostic {
    /// `E_q[Σ_i log(p(y_i|θ*)/p(y_i|θ))]`.
    pub model_fit: f64,
    pub prior_kl: f64,
    /// `model_fit + prior_kl/α`.
    pub psi: f64,
}

pub fn psi_diagnostic(params: &VariationalParams, model: &dyn BayesModel, data: &[f64], alpha: f64) -> Result<PsiDiagnostic> {
    check_alpha(alpha)?;
    let loglik = model.loglik_fn(data);
    let parts = objective_parts(params, model, &*loglik)?;
    let model_fit = loglik(model.theta_star()) + parts.expected_nll;
    Ok(PsiDiagnostic { model_fit, prior_kl: parts.prior_kl, psi: model_fit + parts.prior_kl / alpha })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VariationalInit {
    /// Half the posterior variance in the bandwidth, half in the spread of `μ`.
    MomentMatched,
    /// Central prior quantiles with a narrow bandwidth.
    Prior,
    /// Sorted random knot values around the prior mean, drawn from the seed.
    Random,
    Params(VariationalParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub iters: usize,
    pub seed: u64,
    pub init: VariationalInit,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self { iters: 200, seed: 0, init: VariationalInit::MomentMatched }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub params: VariationalParams,
    pub objective: f64,
    pub initial_objective: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// A full sweep ran out of line-search halvings on every coordinate.
    pub stalled: bool,
    /// Objective after each sweep.
    pub trace: Vec<f64>,
}

fn prior_moments(model: &dyn BayesModel) -> Result<(f64, f64, GridDensity)> {
    let (lo, hi) = model.window();
    let p = prior_density(model, &GridSpec::new(lo, hi, 8193)?)?;
    Ok((p.mean(), p.variance().sqrt(), p))
}

pub fn initial_params(
    model: &dyn BayesModel,
    data: &[f64],
    alpha: f64,
    knots: usize,
    init: &VariationalInit,
    seed: u64,
) -> Result<VariationalParams> {
    let ts = uniform_knots(knots);
    match init {
        VariationalInit::MomentMatched => {
            let (m, sd) = posterior_moments(model, data, alpha)?;
            let half = sd / 2f64.sqrt();
            let z = Normal::standard();
            let clip = 0.5 / knots as f64;
            let values = ts.iter().map(|&t| m + half * z.inverse_cdf(t.clamp(clip, 1.0 - clip))).collect();
            VariationalParams::new(TransferFunction::new(ts, values)?, half.ln())
        }
        VariationalInit::Prior => {
            let (_, sd, p) = prior_moments(model)?;
            let q = quantile_of(&p, 4 * knots + 1)?;
            let values = ts.iter().map(|&t| q.eval(0.1 + 0.8 * t)).collect();
            VariationalParams::new(TransferFunction::new(ts, values)?, (0.05 * sd).ln())
        }
        VariationalInit::Random => {
            use rand::Rng;
            let (m, sd, _) = prior_moments(model)?;
            let mut r = rng::task_rng(seed, "vi-init", 0);
            let mut values: Vec<f64> =
                (0..knots).map(|_| m + 0.25 * sd * r.sample::<f64, _>(rand_distr::StandardNormal)).collect();
            values.sort_by(f64::total_cmp);
            VariationalParams::new(TransferFunction::new(ts, values)?, (0.05 * sd).ln())
        }
        VariationalInit::Params(p) => Ok(p.clone()),
    }
}

/// Coordinate descent on the knot values of `μ` and `log σ` minimizing
/// [`practical_objective`]. Each coordinate takes a Newton step from central
/// differences, halved until the objective drops. After each sweep the knot
/// values are sorted when that does not raise the objective. The best point
/// seen is returned, so the result is never worse than the initialization.
pub fn optimize(
    model: &dyn BayesModel,
    data: &[f64],
    alpha: f64,
    knots: usize,
    opt: &OptimizeConfig,
) -> Result<OptimizeResult> {
    check_alpha(alpha)?;
    if data.is_empty() {
        return Err(param("optimize needs data"));
    }
    if !(MIN_VI_KNOTS..=MAX_VI_KNOTS).contains(&knots) {
        return Err(param(format!("knots must lie in [{MIN_VI_KNOTS}, {MAX_VI_KNOTS}], got {knots}")));
    }
    let init = initial_params(model, data, alpha, knots, &opt.init, opt.seed)?;
    let loglik = model.loglik_fn(data);
    let knot_grid = init.mu.knots().to_vec();
    let k = knot_grid.len();
    let build = |x: &[f64]| -> Result<VariationalParams> {
        VariationalParams::new(TransferFunction::new(knot_grid.clone(), x[..k].to_vec())?, x[k])
    };
    let eval = |x: &[f64]| -> f64 {
        build(x)
            .and_then(|p| objective_parts(&p, model, &*loglik))
            .map(|parts| parts.objective(alpha))
            .unwrap_or(f64::INFINITY)
    };

    let mut x: Vec<f64> = init.mu.values().to_vec();
    x.push(init.log_sigma);
    let initial_objective = {
        let parts = objective_parts(&init, model, &*loglik)?;
        parts.objective(alpha)
    };
    let mut fx = initial_objective;
    let mut trace = Vec::new();
    let (mut converged, mut stalled) = (false, false);
    let mut sweeps = 0;

    while sweeps < opt.iters {
        sweeps += 1;
        let f_start = fx;
        let mut exhausted = 0;
        for i in 0..x.len() {
            let xi = x[i];
            let h = FD_STEP * xi.abs().max(1.0);
            x[i] = xi + h;
            let fp = eval(&x);
            x[i] = xi - h;
            let fm = eval(&x);
            x[i] = xi;
            if !(fp.is_finite() && fm.is_finite()) {
                continue;
            }
            let g = (fp - fm) / (2.0 * h);
            let c = (fp - 2.0 * fx + fm) / (h * h);
            if g == 0.0 {
                continue;
            }
            let step = if c > 0.0 { -g / c } else { -g.signum() * 100.0 * h };
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..=MAX_HALVINGS {
                x[i] = xi + t * step;
                let ft = eval(&x);
                if ft < fx {
                    fx = ft;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                // Fall back to the better difference point when it improves.
                if fp.min(fm) < fx {
                    x[i] = if fp < fm { xi + h } else { xi - h };
                    fx = fp.min(fm);
                } else {
                    x[i] = xi;
                    exhausted += 1;
                }
            }
        }
        if x[..k].windows(2).any(|w| w[1] < w[0]) {
            let mut sorted = x.clone();
            sorted[..k].sort_by(f64::total_cmp);
            let fs = eval(&sorted);
            if fs <= fx {
                x = sorted;
                fx = fs;
            }
        }
        trace.push(fx);
        if (f_start - fx).abs() <= REL_TOL * fx.abs().max(1.0) {
            converged = true;
            break;
        }
        if exhausted == x.len() {
            stalled = true;
            break;
        }
    }
    Ok(OptimizeResult {
        params: build(&x)?,
        objective: fx,
        initial_objective,
        sweeps,
        converged,
        stalled,
        trace,
    })
}

/// `D(q ‖ p)` for `q` on its grid and `p` given as a normalized log density.
pub fn kl_to_logpdf(q: &GridDensity, logpdf: &dyn Fn(f64) -> f64) -> f64 {
    let g = q.grid();
    trapezoid_weights(g.n, g.dx())
        .zip(q.values())
        .enumerate()
        .filter(|(_, (_, &v))| v > 0.0)
        .map(|(i, (w, &v))| w * v * (v.ln() - logpdf(g.x(i))))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictedFamilySpec {
    pub m_bound: f64,
    pub sigma_n: f64,
    pub c0: f64,
}

impl RestrictedFamilySpec {
    /// `σ_n = ½ n^{−1/2}` and `c₀ = 4`, so that `σ_n ≤ n^{−1/2} ≤ c₀^{1/2} σ_n`.
    pub fn for_n(n: usize, m_bound: f64) -> Self {
        Self { m_bound, sigma_n: 0.5 / (n as f64).sqrt(), c0: 4.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_bound > 0.0 && self.sigma_n > 0.0 && self.c0 >= 1.0) {
            return Err(param(format!("invalid restricted family {self:?}")));
        }
        Ok(())
    }

    pub fn means(&self) -> Vec<f64> {
        (0..FAMILY_MEANS)
            .map(|i| -self.m_bound + 2.0 * self.m_bound * i as f64 / (FAMILY_MEANS - 1) as f64)
            .collect()
    }

    pub fn taus(&self) -> Vec<f64> {
        let top = self.c0.sqrt() * self.sigma_n;
        (0..FAMILY_TAUS)
            .map(|j| self.sigma_n + (top - self.sigma_n) * j as f64 / (FAMILY_TAUS - 1) as f64)
            .collect()
    }
}

/// The members of the small-bandwidth family: the quantile of each
/// `N(m, τ²)` pushed through the kernel at bandwidth `σ_n`. Members do not
/// depend on the data, so each `τ` is tabulated once centered at zero and
/// shifted to every mean.
#[derive(Debug, Clone)]
pub struct RestrictedFamily {
    pub spec: RestrictedFamilySpec,
    means: Vec<f64>,
    taus: Vec<f64>,
    shapes: Vec<GridDensity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictedMin {
    pub value: f64,
    pub mean: f64,
    pub tau: f64,
}

impl RestrictedFamily {
    pub fn new(spec: RestrictedFamilySpec) -> Result<Self> {
        spec.validate()?;
        let taus = spec.taus();
        let shapes = taus
            .iter()
            .map(|&tau| {
                let p = VariationalParams::new(normal_quantile_transfer(0.0, tau)?, spec.sigma_n.ln())?;
                q_local(&p)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, means: spec.means(), taus, shapes })
    }

    pub fn len(&self) -> usize {
        self.means.len() * self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smallest `D(q ‖ p)` over the members, `p` a normalized log density.
    pub fn min_kl(&self, logpdf: &dyn Fn(f64) -> f64) -> RestrictedMin {
        let mut best = RestrictedMin { value: f64::INFINITY, mean: f64::NAN, tau: f64::NAN };
        for (shape, &tau) in self.shapes.iter().zip(&self.taus) {
            for &m in &self.means {
                let v = kl_to_logpdf(shape, &|x| logpdf(x + m));
                if v < best.value {
                    best = RestrictedMin { value: v, mean: m, tau };
                }
            }
        }
        best
    }
}

/// `m_n*(Q_n)`: the smallest KL from a family member to the exact posterior.
pub fn restricted_min_kl(family: &RestrictedFamily, model: &dyn BayesModel, data: &[f64]) -> Result<RestrictedMin> {
    let logpdf = model
        .exact_posterior_logpdf(data, 1.0)
        .ok_or_else(|| Error::Unsupported(format!("{} has no closed-form posterior", model.name())))?;
    Ok(family.min_kl(&*logpdf))
}

/// `D(N(mean, sd²) ‖ p)` by quadrature.
pub fn gaussian_kl_to(mean: f64, sd: f64, logpdf: &dyn Fn(f64) -> f64) -> Result<f64> {
    let q = GridDensity::normal(GridSpec::new(mean - 10.0 * sd, mean + 10.0 * sd, 2001)?, mean, sd)?;
    Ok(kl_to_logpdf(&q, logpdf))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KLBallSpec {
    pub theta_star: f64,
    pub eps: f64,
    pub n: usize,
}

/// Membership in `{θ : n D₁(θ*‖θ) ≤ nε², n V₁(θ*‖θ) ≤ nε²}`.
pub fn kl_ball_contains(spec: &KLBallSpec, model: &dyn BayesModel, theta: f64) -> Result<bool> {
    if !model.is_iid() {
        return Err(Error::Unsupported("KL ball needs IID data".into()));
    }
    if !(spec.eps > 0.0) || spec.n == 0 {
        return Err(param("KL ball needs eps > 0 and n ≥ 1"));
    }
    let n = spec.n as f64;
    let r = n * spec.eps * spec.eps;
    Ok(n * model.kl1(spec.theta_star, theta) <= r && n * model.v1(spec.theta_star, theta) <= r)
}

/// End points of the ball on each side of θ*, found by doubling then
/// bisection and clipped to the prior window.
pub fn kl_ball_interval(spec: &KLBallSpec, model: &dyn BayesModel) -> Result<(f64, f64)> {
    let (wlo, whi) = model.window();
    let (slo, shi) = model.prior_support();
    let (lo_lim, hi_lim) = (wlo.max(slo), whi.min(shi));
    let edge = |dir: f64, limit: f64| -> Result<f64> {
        let c = spec.theta_star;
        let mut inside = 0.0;
        let mut step = 1e-9;
        loop {
            let t = c + dir * step;
            if dir * (t - limit) >= 0.0 {
                return Ok(limit);
            }
            if !kl_ball_contains(spec, model, t)? {
                break;
            }
            inside = step;
            step *= 2.0;
        }
        let mut outside = step;
        for _ in 0..100 {
            let mid = 0.5 * (inside + outside);
            if kl_ball_contains(spec, model, c + dir * mid)? {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(c + dir * inside)
    };
    Ok((edge(-1.0, lo_lim)?, edge(1.0, hi_lim)?))
}

/// Prior mass of the KL ball and the ball itself.
pub fn kl_ball_mass(spec: &KLBallSpec, model: &dyn BayesModel) -> Result<(f64, (f64, f64))> {
    let (a, b) = kl_ball_interval(spec, model)?;
    if !(b > a) {
        return Err(Error::Resolution("KL ball has zero width".into()));
    }
    let g = GridSpec::new(a, b, 20001)?;
    let vals: Vec<f64> = g.points().iter().map(|&t| model.log_prior(t).exp()).collect();
    let mass = crate::grid::trapezoid(&vals, g.dx());
    if !(mass > 0.0) {
        return Err(Error::Resolution("KL ball has zero prior mass".into()));
    }
    Ok((mass.min(1.0), (a, b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBound {
    /// `Dα/(1−α) ε²`.
    pub eps_term: f64,
    /// `[n(1−α)]⁻¹ log(1/P[B_n])`.
    pub complexity_term: f64,
    /// `[n(1−α)]⁻¹ log((D−1)² n ε²)`.
    pub remainder: f64,
    pub ball_mass: f64,
    pub ball: (f64, f64),
    /// `log(1/P[B_n]) ≤ nε²`.
    pub a1_holds: bool,
    /// The same comparison against `−nε²`; never satisfiable.
    pub a1_negative_sign_holds: bool,
}

impl RiskBound {
    pub fn rhs(&self) -> f64 {
        self.eps_term + self.complexity_term
    }

    pub fn rhs_with_remainder(&self) -> f64 {
        self.rhs() + self.remainder
    }
}

pub fn risk_bound_rhs(model: &dyn BayesModel, data: &[f64], alpha: f64, eps: f64, d_const: f64) -> Result<RiskBound> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(d_const > 1.0) {
        return Err(param(format!("D must exceed 1, got {d_const}")));
    }
    let n = data.len();
    let spec = KLBallSpec { theta_star: model.theta_star(), eps, n };
    let (ball_mass, ball) = kl_ball_mass(&spec, model)?;
    let nf = n as f64;
    let log_inv = -ball_mass.ln();
    Ok(RiskBound {
        eps_term: d_const * alpha / (1.0 - alpha) * eps * eps,
        complexity_term: log_inv / (nf * (1.0 - alpha)),
        remainder: ((d_const - 1.0).powi(2) * nf * eps * eps).ln() / (nf * (1.0 - alpha)),
        ball_mass,
        ball,
        a1_holds: log_inv <= nf * eps * eps,
        a1_negative_sign_holds: log_inv <= -nf * eps * eps,
    })
}

/// `∫ D_α(p_θ ‖ p_{θ*}) q(θ) dθ`, the per-datum risk for IID data.
pub fn risk_integral(params: &VariationalParams, model: &dyn BayesModel, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let q = q_local(params)?;
    let star = model.theta_star();
    Ok(expect_q(&q, |t| model.renyi1(alpha, t, star)).max(0.0))
}

/// `∫ h²(p_θ, p_{θ*}) q(θ) dθ` with the halved Hellinger convention.
pub fn hellinger_risk(params: &VariationalParams, model: &dyn BayesModel) -> Result<f64> {
    let q = q_local(params)?;
    let star = model.theta_star();
    Ok(expect_q(&q, |t| model.hellinger_sq1(t, star)).max(0.0))
}
