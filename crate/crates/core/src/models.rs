//! Parametric models for variational inference with a scalar parameter θ.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::grid::{normal_pdf, std_normal_cdf, GridDensity, GridSpec};
use crate::rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MeanPrior {
    /// Uniform on `[lo, hi]`.
    Flat { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl MeanPrior {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MeanPrior::Flat { lo, hi } if lo < hi && lo.is_finite() && hi.is_finite() => Ok(()),
            MeanPrior::Normal { mean, sd } if sd > 0.0 && mean.is_finite() && sd.is_finite() => Ok(()),
            _ => Err(param(format!("invalid prior {self:?}"))),
        }
    }

    pub fn log_density(&self, theta: f64) -> f64 {
        match *self {
            MeanPrior::Flat { lo, hi } => {
                if (lo..=hi).contains(&theta) {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            MeanPrior::Normal { mean, sd } => -0.5 * LN_2PI - sd.ln() - 0.5 * ((theta - mean) / sd).powi(2),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            MeanPrior::Flat { lo, hi } => (lo, hi),
            MeanPrior::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn window(&self) -> (f64, f64) {
        match *self {
            MeanPrior::Flat { lo, hi } => (lo, hi),
            MeanPrior::Normal { mean, sd } => (mean - 12.0 * sd, mean + 12.0 * sd),
        }
    }

    pub fn mean_sd(&self) -> (f64, f64) {
        match *self {
            MeanPrior::Flat { lo, hi } => (0.5 * (lo + hi), (hi - lo) / 12f64.sqrt()),
            MeanPrior::Normal { mean, sd } => (mean, sd),
        }
    }
}

/// A scalar-parameter model with IID data and a known true parameter.
pub trait BayesModel: Sync + Send {
    fn name(&self) -> &'static str;
    fn log_likelihood(&self, theta: f64, datum: f64) -> f64;
    /// Normalized log prior density; `−∞` off the support.
    fn log_prior(&self, theta: f64) -> f64;
    fn theta_star(&self) -> f64;
    /// Closed interval carrying the prior; infinite ends for full support.
    fn prior_support(&self) -> (f64, f64);
    /// Finite window holding all but a negligible part of the prior mass.
    fn window(&self) -> (f64, f64);

    /// `θ ↦ Σ_i log p(y_i | θ)`. Models override this with sufficient statistics.
    fn loglik_fn<'a>(&'a self, data: &'a [f64]) -> Box<dyn Fn(f64) -> f64 + Sync + 'a> {
        Box::new(move |theta| data.iter().map(|&y| self.log_likelihood(theta, y)).sum())
    }

    /// Normalized log density of the α-fractional posterior, when known in closed form.
    fn exact_posterior_logpdf(&self, data: &[f64], alpha: f64) -> Option<Box<dyn Fn(f64) -> f64 + Sync>>;

    /// Per-datum `D(θ* ‖ θ) = −E_{θ*} ℓ_1(θ, θ*)`.
    fn kl1(&self, theta_star: f64, theta: f64) -> f64;
    /// Per-datum `μ_2(θ* ‖ θ) = E_{θ*} ℓ_1(θ, θ*)²`.
    fn v1(&self, theta_star: f64, theta: f64) -> f64;
    /// Per-datum Rényi divergence `D_α(p_θ ‖ p_{θ*})`.
    fn renyi1(&self, alpha: f64, theta: f64, theta_star: f64) -> f64;
    /// Per-datum halved squared Hellinger distance.
    fn hellinger_sq1(&self, theta: f64, theta_star: f64) -> f64;

    fn sample_data(&self, n: usize, rng: &mut rng::Rng) -> Vec<f64>;

    fn is_iid(&self) -> bool {
        true
    }
}

/// Prior tabulated on `grid`.
pub fn prior_density(model: &dyn BayesModel, grid: &GridSpec) -> Result<GridDensity> {
    GridDensity::from_fn(*grid, |t| model.log_prior(t).exp())
}

/// α-fractional posterior by direct quadrature on `grid`.
pub fn quadrature_posterior(model: &dyn BayesModel, data: &[f64], alpha: f64, grid: &GridSpec) -> Result<GridDensity> {
    let loglik = model.loglik_fn(data);
    let logw: Vec<f64> = grid.points().iter().map(|&t| alpha * loglik(t) + model.log_prior(t)).collect();
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(param("posterior vanishes on the whole grid"));
    }
    GridDensity::new(*grid, logw.iter().map(|l| (l - top).exp()).collect())
}

/// Closed-form α-fractional posterior on `grid`, when the model has one.
pub fn exact_posterior(model: &dyn BayesModel, data: &[f64], alpha: f64, grid: &GridSpec) -> Option<Result<GridDensity>> {
    let logpdf = model.exact_posterior_logpdf(data, alpha)?;
    Some(GridDensity::from_fn(*grid, |t| logpdf(t).exp()))
}

/// Mean and sd of the α-fractional posterior by quadrature, zooming in until
/// the posterior spans at least 40 grid cells.
pub fn posterior_moments(model: &dyn BayesModel, data: &[f64], alpha: f64) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = model.window();
    let mut out = (0.0, 0.0);
    for _ in 0..4 {
        let g = GridSpec::new(lo, hi, 4097)?;
        let post = quadrature_posterior(model, data, alpha, &g)?;
        let (m, sd) = (post.mean(), post.variance().max(0.0).sqrt());
        out = (m, sd);
        if sd > 40.0 * g.dx() {
            break;
        }
        let (a, b) = model.prior_support();
        lo = (m - 14.0 * sd.max(g.dx())).max(a).max(lo);
        hi = (m + 14.0 * sd.max(g.dx())).min(b).min(hi);
    }
    Ok(out)
}

/// `y ~ N(θ, s²)` with known `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalMean {
    pub noise_sd: f64,
    pub prior: MeanPrior,
    pub theta_star: f64,
}

impl NormalMean {
    pub fn new(noise_sd: f64, prior: MeanPrior, theta_star: f64) -> Result<Self> {
        prior.validate()?;
        if !(noise_sd > 0.0 && noise_sd.is_finite()) || !theta_star.is_finite() {
            return Err(param("noise sd must be positive and θ* finite"));
        }
        Ok(Self { noise_sd, prior, theta_star })
    }

    /// The conjugate normal-normal model.
    pub fn conjugate(noise_sd: f64, prior_mean: f64, prior_sd: f64, theta_star: f64) -> Result<Self> {
        Self::new(noise_sd, MeanPrior::Normal { mean: prior_mean, sd: prior_sd }, theta_star)
    }

    /// `(n, ȳ, Σ(y − ȳ)²)`.
    pub fn sufficient(data: &[f64]) -> (f64, f64, f64) {
        let n = data.len() as f64;
        if data.is_empty() {
            return (0.0, 0.0, 0.0);
        }
        let m = data.iter().sum::<f64>() / n;
        (n, m, data.iter().map(|y| (y - m).powi(2)).sum())
    }

    /// Mean and variance of the α-fractional posterior with a normal prior.
    pub fn conjugate_posterior(&self, data: &[f64], alpha: f64) -> Option<(f64, f64)> {
        let MeanPrior::Normal { mean, sd } = self.prior else { return None };
        let (n, ybar, _) = Self::sufficient(data);
        let s2 = self.noise_sd * self.noise_sd;
        let prec = alpha * n / s2 + 1.0 / (sd * sd);
        Some(((alpha * n * ybar / s2 + mean / (sd * sd)) / prec, 1.0 / prec))
    }
}

impl BayesModel for NormalMean {
    fn name(&self) -> &'static str {
        match self.prior {
            MeanPrior::Flat { .. } => "normal-mean",
            MeanPrior::Normal { .. } => "normal-normal",
        }
    }

    fn log_likelihood(&self, theta: f64, datum: f64) -> f64 {
        let s = self.noise_sd;
        -0.5 * LN_2PI - s.ln() - 0.5 * ((datum - theta) / s).powi(2)
    }

    fn log_prior(&self, theta: f64) -> f64 {
        self.prior.log_density(theta)
    }

    fn theta_star(&self) -> f64 {
        self.theta_star
    }

    fn prior_support(&self) -> (f64, f64) {
        self.prior.support()
    }

    fn window(&self) -> (f64, f64) {
        self.prior.window()
    }

    fn loglik_fn<'a>(&'a self, data: &'a [f64]) -> Box<dyn Fn(f64) -> f64 + Sync + 'a> {
        let (n, ybar, ss) = Self::sufficient(data);
        let s = self.noise_sd;
        let c = -n * (0.5 * LN_2PI + s.ln());
        Box::new(move |theta| c - (ss + n * (ybar - theta).powi(2)) / (2.0 * s * s))
    }

    fn exact_posterior_logpdf(&self, data: &[f64], alpha: f64) -> Option<Box<dyn Fn(f64) -> f64 + Sync>> {
        match self.prior {
            MeanPrior::Normal { .. } => {
                let (m, v) = self.conjugate_posterior(data, alpha)?;
                let sd = v.sqrt();
                Some(Box::new(move |t| -0.5 * LN_2PI - sd.ln() - 0.5 * ((t - m) / sd).powi(2)))
            }
            MeanPrior::Flat { lo, hi } => {
                let (n, ybar, _) = Self::sufficient(data);
                if n == 0.0 {
                    let c = -(hi - lo).ln();
                    return Some(Box::new(move |t| if (lo..=hi).contains(&t) { c } else { f64::NEG_INFINITY }));
                }
                let sd = self.noise_sd / (alpha * n).sqrt();
                let z = (std_normal_cdf((hi - ybar) / sd) - std_normal_cdf((lo - ybar) / sd)).ln();
                Some(Box::new(move |t| {
                    if (lo..=hi).contains(&t) {
                        -0.5 * LN_2PI - sd.ln() - 0.5 * ((t - ybar) / sd).powi(2) - z
                    } else {
                        f64::NEG_INFINITY
                    }
                }))
            }
        }
    }

    fn kl1(&self, theta_star: f64, theta: f64) -> f64 {
        (theta - theta_star).powi(2) / (2.0 * self.noise_sd.powi(2))
    }

    fn v1(&self, theta_star: f64, theta: f64) -> f64 {
        let d = self.kl1(theta_star, theta);
        d * d + (theta - theta_star).powi(2) / self.noise_sd.powi(2)
    }

    fn renyi1(&self, alpha: f64, theta: f64, theta_star: f64) -> f64 {
        alpha * (theta - theta_star).powi(2) / (2.0 * self.noise_sd.powi(2))
    }

    fn hellinger_sq1(&self, theta: f64, theta_star: f64) -> f64 {
        1.0 - (-(theta - theta_star).powi(2) / (8.0 * self.noise_sd.powi(2))).exp()
    }

    fn sample_data(&self, n: usize, rng: &mut rng::Rng) -> Vec<f64> {
        (0..n).map(|_| self.theta_star + self.noise_sd * rng.sample::<f64, _>(StandardNormal)).collect()
    }
}

/// Logistic regression through the origin with one standard normal covariate.
/// A datum is `s·x` for label `s ∈ {−1, 1}`, which is sufficient for θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Logistic1D {
    pub prior: MeanPrior,
    pub theta_star: f64,
}

const COVARIATE_NODES: usize = 2001;
const COVARIATE_REACH: f64 = 10.0;

fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 { -(-z).exp().ln_1p() } else { z - z.exp().ln_1p() }
}

impl Logistic1D {
    pub fn new(prior: MeanPrior, theta_star: f64) -> Result<Self> {
        prior.validate()?;
        Ok(Self { prior, theta_star })
    }

    /// `E_x Σ_s g(log p_θ(s|x), log p_{θ*}(s|x))` by trapezoid quadrature in `x`.
    fn covariate_expectation(&self, theta: f64, theta_star: f64, g: impl Fn(f64, f64) -> f64) -> f64 {
        let dx = 2.0 * COVARIATE_REACH / (COVARIATE_NODES - 1) as f64;
        let mut acc = 0.0;
        for k in 0..COVARIATE_NODES {
            let x = -COVARIATE_REACH + k as f64 * dx;
            let w = if k == 0 || k == COVARIATE_NODES - 1 { 0.5 } else { 1.0 };
            let (lp, lm) = (log_sigmoid(theta * x), log_sigmoid(-theta * x));
            let (sp, sm) = (log_sigmoid(theta_star * x), log_sigmoid(-theta_star * x));
            acc += w * normal_pdf(x, 0.0, 1.0) * (g(lp, sp) * sp.exp() + g(lm, sm) * sm.exp());
        }
        acc * dx
    }
}

impl BayesModel for Logistic1D {
    fn name(&self) -> &'static str {
        "logistic-1d"
    }

    fn log_likelihood(&self, theta: f64, datum: f64) -> f64 {
        log_sigmoid(theta * datum)
    }

    fn log_prior(&self, theta: f64) -> f64 {
        self.prior.log_density(theta)
    }

    fn theta_star(&self) -> f64 {
        self.theta_star
    }

    fn prior_support(&self) -> (f64, f64) {
        self.prior.support()
    }

    fn window(&self) -> (f64, f64) {
        self.prior.window()
    }

    fn exact_posterior_logpdf(&self, _data: &[f64], _alpha: f64) -> Option<Box<dyn Fn(f64) -> f64 + Sync>> {
        None
    }

    fn kl1(&self, theta_star: f64, theta: f64) -> f64 {
        self.covariate_expectation(theta, theta_star, |l, s| s - l)
    }

    fn v1(&self, theta_star: f64, theta: f64) -> f64 {
        self.covariate_expectation(theta, theta_star, |l, s| (l - s).powi(2))
    }

    fn renyi1(&self, alpha: f64, theta: f64, theta_star: f64) -> f64 {
        // Σ_s p^α p*^{1−α} = Σ_s p* · exp(α (log p − log p*)).
        let m = self.covariate_expectation(theta, theta_star, |l, s| (alpha * (l - s)).exp());
        m.ln() / (alpha - 1.0)
    }

    fn hellinger_sq1(&self, theta: f64, theta_star: f64) -> f64 {
        1.0 - self.covariate_expectation(theta, theta_star, |l, s| (0.5 * (l - s)).exp())
    }

    fn sample_data(&self, n: usize, rng: &mut rng::Rng) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                let p1 = log_sigmoid(self.theta_star * x).exp();
                if rng.random::<f64>() < p1 { x } else { -x }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_divergences_closed_form() {
        let m = NormalMean::new(2.0, MeanPrior::Flat { lo: -5.0, hi: 5.0 }, 0.3).unwrap();
        let d = 0.8;
        assert!((m.kl1(0.3, 0.3 + d) - d * d / 8.0).abs() < 1e-15);
        // Direct moments of ℓ = Z d/s − d²/(2s²) with Z standard normal.
        let (a, b) = (d / 2.0, d * d / 8.0);
        assert!((m.v1(0.3, 0.3 + d) - (a * a + b * b)).abs() < 1e-14);
        assert_eq!(m.kl1(0.3, 0.3), 0.0);
    }

    #[test]
    fn normal_renyi_by_quadrature() {
        let m = NormalMean::new(1.0, MeanPrior::Flat { lo: -5.0, hi: 5.0 }, 0.0).unwrap();
        let g = GridSpec::new(-15.0, 15.0, 30001).unwrap();
        for alpha in [0.3, 0.5, 0.99] {
            let (theta, star) = (0.7, 0.0);
            let integrand: Vec<f64> = g
                .points()
                .iter()
                .map(|&y| normal_pdf(y, theta, 1.0).powf(alpha) * normal_pdf(y, star, 1.0).powf(1.0 - alpha))
                .collect();
            let direct = crate::grid::trapezoid(&integrand, g.dx()).ln() / (alpha - 1.0);
            assert!((direct - m.renyi1(alpha, theta, star)).abs() < 1e-9);
        }
    }

    #[test]
    fn conjugate_posterior_matches_quadrature() {
        let m = NormalMean::conjugate(1.0, 0.0, 1.0, 0.4).unwrap();
        let mut r = rng::stream(1, 0);
        let data = m.sample_data(50, &mut r);
        let g = GridSpec::new(-3.0, 3.0, 6001).unwrap();
        for alpha in [0.5, 1.0] {
            let exact = exact_posterior(&m, &data, alpha, &g).unwrap().unwrap();
            let quad = quadrature_posterior(&m, &data, alpha, &g).unwrap();
            assert!(exact.sup_distance(&quad).unwrap() < 1e-8);
        }
        let (mu, sd) = posterior_moments(&m, &data, 1.0).unwrap();
        let (cm, cv) = m.conjugate_posterior(&data, 1.0).unwrap();
        assert!((mu - cm).abs() < 1e-6 && (sd - cv.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn flat_prior_posterior_is_truncated() {
        let m = NormalMean::new(1.0, MeanPrior::Flat { lo: -1.0, hi: 1.0 }, 0.9).unwrap();
        let data = vec![1.2; 5];
        let g = GridSpec::new(-1.0, 1.0, 4001).unwrap();
        let exact = exact_posterior(&m, &data, 1.0, &g).unwrap().unwrap();
        let quad = quadrature_posterior(&m, &data, 1.0, &g).unwrap();
        assert!(exact.sup_distance(&quad).unwrap() < 1e-5);
        assert_eq!(m.exact_posterior_logpdf(&data, 1.0).unwrap()(1.5), f64::NEG_INFINITY);
    }

    #[test]
    fn logistic_divergences() {
        let m = Logistic1D::new(MeanPrior::Normal { mean: 0.0, sd: 2.0 }, 1.0).unwrap();
        assert!(m.kl1(1.0, 1.0).abs() < 1e-12);
        assert!(m.hellinger_sq1(1.0, 1.0).abs() < 1e-12);
        let (k, h, r) = (m.kl1(1.0, 2.0), m.hellinger_sq1(2.0, 1.0), m.renyi1(0.5, 2.0, 1.0));
        assert!(k > 0.0 && h > 0.0 && r > 0.0);
        // D_{1/2} = −2 log(1 − h²) for the halved Hellinger affinity.
        assert!((r + 2.0 * (1.0 - h).ln()).abs() < 1e-12);
        assert!(m.v1(1.0, 2.0) >= k * k);
        assert!(m.exact_posterior_logpdf(&[1.0], 1.0).is_none());
    }

    #[test]
    fn logistic_posterior_concentrates() {
        let m = Logistic1D::new(MeanPrior::Normal { mean: 0.0, sd: 3.0 }, 1.5).unwrap();
        let mut r = rng::stream(2, 0);
        let data = m.sample_data(4000, &mut r);
        let (mu, sd) = posterior_moments(&m, &data, 1.0).unwrap();
        assert!((mu - 1.5).abs() < 4.0 * sd, "{mu} {sd}");
        assert!(sd < 0.1);
    }
}
