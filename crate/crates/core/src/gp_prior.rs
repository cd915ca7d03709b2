//! Rescaled squared-exponential GP prior on transfer functions and the
//! inverse-gamma prior on the bandwidth.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{trapezoid, GridDensity, GridSpec};
use crate::rng;
use crate::transfer::{mixture_values, uniform_knots, MixtureRule, TransferFunction};

pub const MIN_PATH_KNOTS: usize = 16;
pub const MAX_PATH_KNOTS: usize = 1024;
pub const JITTER_DOUBLINGS: u32 = 3;
pub const DEFAULT_PRIOR_KNOTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RescaleDist {
    Fixed(f64),
    Gamma { shape: f64, rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaPrior {
    pub a: f64,
    pub b: f64,
}

impl SigmaPrior {
    /// Log density of the inverse-gamma prior, up to a constant.
    pub fn log_density(&self, sigma: f64) -> f64 {
        -(self.a + 1.0) * sigma.ln() - self.b / sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GPPriorConfig {
    pub variance: f64,
    pub rescale: RescaleDist,
    pub sigma_prior: SigmaPrior,
    pub jitter: f64,
}

impl Default for GPPriorConfig {
    fn default() -> Self {
        Self {
            variance: 1.0,
            rescale: RescaleDist::Fixed(20.0),
            sigma_prior: SigmaPrior { a: 3.0, b: 0.1 },
            jitter: 1e-8,
        }
    }
}

impl GPPriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(param(format!("{name} must be positive, got {v}")))
            }
        };
        positive("variance", self.variance)?;
        positive("a_sigma", self.sigma_prior.a)?;
        positive("b_sigma", self.sigma_prior.b)?;
        positive("jitter", self.jitter)?;
        match self.rescale {
            RescaleDist::Fixed(a) => positive("rescale", a)?,
            RescaleDist::Gamma { shape, rate } => {
                positive("rescale shape", shape)?;
                positive("rescale rate", rate)?;
            }
        }
        if self.jitter > 1e-6 * self.variance {
            return Err(param("jitter must not exceed 1e-6 times the variance"));
        }
        Ok(())
    }

    pub fn with_rescale(mut self, a: f64) -> Self {
        self.rescale = RescaleDist::Fixed(a);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GPDraw {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub rescale_used: f64,
    pub seed: u64,
}

impl GPDraw {
    pub fn transfer(&self) -> Result<TransferFunction> {
        TransferFunction::new(self.knots.clone(), self.values.clone())
    }
}

pub fn se_kernel(variance: f64, a: f64, x: f64, y: f64) -> f64 {
    let d = a * (x - y);
    variance * (-d * d).exp()
}

pub fn covariance(cfg: &GPPriorConfig, a: f64, knots: &[f64]) -> DMatrix<f64> {
    let n = knots.len();
    DMatrix::from_fn(n, n, |i, j| se_kernel(cfg.variance, a, knots[i], knots[j]))
}

/// Lower Cholesky factor of `K + jitter·I`, doubling the jitter up to three times.
pub fn jittered_cholesky(k: &DMatrix<f64>, jitter: f64) -> Result<DMatrix<f64>> {
    let mut jit = jitter;
    for attempt in 0..=JITTER_DOUBLINGS {
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jit;
        }
        if let Some(ch) = m.cholesky() {
            if attempt > 0 {
                tracing::debug!(jitter = jit, "cholesky needed extra jitter");
            }
            return Ok(ch.l());
        }
        if attempt < JITTER_DOUBLINGS {
            jit *= 2.0;
        }
    }
    Err(Error::Conditioning { jitter: jit })
}

pub fn standard_normals(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Cached factor for repeated path draws at fixed `(A, n_knots)`.
#[derive(Debug, Clone)]
pub struct PathSampler {
    knots: Vec<f64>,
    chol: DMatrix<f64>,
    rescale: f64,
}

impl PathSampler {
    pub fn new(cfg: &GPPriorConfig, a: f64, n_knots: usize) -> Result<Self> {
        cfg.validate()?;
        if !(MIN_PATH_KNOTS..=MAX_PATH_KNOTS).contains(&n_knots) {
            return Err(param(format!(
                "n_knots must lie in [{MIN_PATH_KNOTS}, {MAX_PATH_KNOTS}], got {n_knots}"
            )));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(param(format!("rescale must be positive, got {a}")));
        }
        let knots = uniform_knots(n_knots);
        let chol = jittered_cholesky(&covariance(cfg, a, &knots), cfg.jitter)?;
        Ok(Self { knots, chol, rescale: a })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn draw_values(&self, rng: &mut impl Rng) -> Vec<f64> {
        let z = standard_normals(self.knots.len(), rng);
        (&self.chol * z).iter().copied().collect()
    }

    /// Draw reproducible from its recorded seed.
    pub fn draw(&self, seed: u64) -> GPDraw {
        let mut r = rng::stream(seed, 0);
        GPDraw {
            knots: self.knots.clone(),
            values: self.draw_values(&mut r),
            rescale_used: self.rescale,
            seed,
        }
    }
}

pub fn sample_rescale(cfg: &GPPriorConfig, rng: &mut impl Rng) -> Result<f64> {
    match cfg.rescale {
        RescaleDist::Fixed(a) => Ok(a),
        RescaleDist::Gamma { shape, rate } => {
            let g = Gamma::new(shape, 1.0 / rate).map_err(|e| param(e.to_string()))?;
            // Gamma draws can underflow to zero for tiny shapes.
            Ok(g.sample(rng).max(f64::MIN_POSITIVE))
        }
    }
}

/// One path of the rescaled SE process on `n_knots` equally spaced knots. The
/// path seed is taken from `rng` and recorded in the draw.
pub fn sample_path(cfg: &GPPriorConfig, a: f64, n_knots: usize, rng: &mut impl RngCore) -> Result<GPDraw> {
    let sampler = PathSampler::new(cfg, a, n_knots)?;
    Ok(sampler.draw(rng.next_u64()))
}

/// Inverse-gamma draw with density ∝ σ^{−(a+1)} e^{−b/σ}.
pub fn sample_sigma(cfg: &GPPriorConfig, rng: &mut impl Rng) -> Result<f64> {
    let SigmaPrior { a, b } = cfg.sigma_prior;
    let g = Gamma::new(a, 1.0 / b).map_err(|e| param(e.to_string()))?;
    Ok(1.0 / g.sample(rng).max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorDraw {
    pub density: GridDensity,
    pub path: GPDraw,
    pub sigma: f64,
    /// Mass of `f_{μ,σ}` falling outside the window before renormalization.
    pub lost_mass: f64,
}

/// One density from the induced prior, tabulated on `grid` and renormalized.
pub fn prior_draw_density(
    cfg: &GPPriorConfig,
    grid: &GridSpec,
    n_knots: usize,
    rng: &mut impl RngCore,
) -> Result<PriorDraw> {
    let mut rng = rng;
    let a = sample_rescale(cfg, &mut rng)?;
    let path = sample_path(cfg, a, n_knots, &mut rng)?;
    let sigma = sample_sigma(cfg, &mut rng)?;
    let mu = path.transfer()?;
    let values = mixture_values(&mu, sigma, grid, MixtureRule::ExactLinear)?;
    let lost_mass = 1.0 - trapezoid(&values, grid.dx());
    let density = GridDensity::new(*grid, values)?;
    Ok(PriorDraw { density, path, sigma, lost_mass })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportProbe {
    pub delta: f64,
    pub draws: usize,
    /// Raw Monte Carlo hits of the sup-norm ball.
    pub hits: usize,
    /// `‖m − μ*‖∞` for the GP interpolant `m` through the knots of `μ*`.
    pub interpolant_error: f64,
    /// True when the interpolant lies strictly inside the ball, which gives the
    /// ball positive prior mass.
    pub positive: bool,
}

/// Checks that the sup-norm ball of radius `delta` around `target` has
/// positive prior mass with `A = 1/delta`.
pub fn support_probe(
    cfg: &GPPriorConfig,
    target: &TransferFunction,
    delta: f64,
    n_knots: usize,
    draws: usize,
    seed: u64,
) -> Result<SupportProbe> {
    let a = 1.0 / delta;
    let sampler = PathSampler::new(cfg, a, n_knots)?;
    let knots = sampler.knots().to_vec();
    let hits = crate::exec::map_range(draws, |d| {
        let mut r = rng::task_rng(seed, "support-probe", d as u64);
        let v = sampler.draw_values(&mut r);
        let mu = TransferFunction::new(knots.clone(), v).expect("finite draw");
        mu.sup_distance(target) < delta
    })
    .into_iter()
    .filter(|&h| h)
    .count();

    // Conditional mean of the process given its values at the knots.
    let y = DVector::from_iterator(knots.len(), knots.iter().map(|&t| target.eval(t)));
    let k = covariance(cfg, a, &knots);
    let l = jittered_cholesky(&k, cfg.jitter)?;
    let alpha = l.transpose().solve_upper_triangular(
        &l.solve_lower_triangular(&y).ok_or(Error::Conditioning { jitter: cfg.jitter })?,
    )
    .ok_or(Error::Conditioning { jitter: cfg.jitter })?;
    let fine = uniform_knots(4 * n_knots + 1);
    let interpolant_error = fine
        .iter()
        .map(|&t| {
            let m: f64 = knots
                .iter()
                .zip(alpha.iter())
                .map(|(&s, w)| se_kernel(cfg.variance, a, t, s) * w)
                .sum();
            (m - target.eval(t)).abs()
        })
        .fold(0.0, f64::max);
    Ok(SupportProbe {
        delta,
        draws,
        hits,
        interpolant_error,
        positive: interpolant_error < delta,
    })
}
