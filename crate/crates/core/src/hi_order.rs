//! The bias-corrected sequence `f_{j+1} = f₀ − (φ_σ * f_j − f_j)`, its binomial
//! closed form, and slope experiments for its approximation order.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::exec;
use crate::grid::{convolve_gaussian, convolve_raw, divergence, trapezoid, DivergenceKind, GridDensity};
use crate::report::{slope_fit, SlopeReport};

pub const MAX_NEGATIVE_MASS: f64 = 1e-3;
/// Sup errors are measured where `f₀` is at least this large.
pub const INTERIOR_FLOOR: f64 = 1e-3;
/// Relative band around the target slope used for the report's pass flag.
pub const SLOPE_BAND: f64 = 0.15;
pub const MIN_R2: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessSpec {
    pub beta: f64,
    pub j: u32,
}

impl SmoothnessSpec {
    pub fn new(beta: f64, j: u32) -> Result<Self> {
        let lo = 2.0 * j as f64;
        if beta > lo && beta <= lo + 2.0 {
            Ok(Self { beta, j })
        } else {
            Err(param(format!("beta {beta} is outside ({lo}, {}]", lo + 2.0)))
        }
    }

    pub fn from_beta(beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(param("beta must be positive"));
        }
        Self::new(beta, ((beta / 2.0).ceil() as u32).saturating_sub(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FBeta {
    /// Floored and renormalized `f_β`.
    pub density: GridDensity,
    /// Signed values before flooring.
    pub raw: Vec<f64>,
    /// `∫ max(−f_β, 0)` before flooring.
    pub negative_mass: f64,
}

fn finish(f0: &GridDensity, raw: Vec<f64>) -> Result<FBeta> {
    let dx = f0.grid().dx();
    let neg: Vec<f64> = raw.iter().map(|v| (-v).max(0.0)).collect();
    let negative_mass = trapezoid(&neg, dx);
    if negative_mass > MAX_NEGATIVE_MASS {
        return Err(Error::SigmaTooLarge { negative_mass });
    }
    let floored = raw.iter().map(|v| v.max(0.0)).collect();
    Ok(FBeta { density: GridDensity::new(*f0.grid(), floored)?, raw, negative_mass })
}

fn check_sigma(f0: &GridDensity, sigma: f64, j: u32) -> Result<()> {
    // The closed form needs the widest kernel σ√j on this grid.
    if j > 0 {
        convolve_gaussian(f0, sigma)?;
        convolve_gaussian(f0, sigma * (j as f64).sqrt())?;
    } else if !(sigma > 0.0) {
        return Err(param("sigma must be positive"));
    }
    Ok(())
}

/// Applies the recursion `j` times starting from `f₀`.
pub fn fbeta_iterative(f0: &GridDensity, sigma: f64, j: u32) -> Result<FBeta> {
    check_sigma(f0, sigma, j)?;
    let base = f0.values();
    let mut f = base.to_vec();
    for _ in 0..j {
        let smoothed = convolve_raw(&f, f0.grid(), sigma);
        f = base
            .iter()
            .zip(&f)
            .zip(&smoothed)
            .map(|((b, cur), s)| b - (s - cur))
            .collect();
    }
    finish(f0, f)
}

/// `(−1)^i C(j+1, i+1)` for `i = 0..=j`.
pub fn closed_form_coefficients(j: u32) -> Vec<f64> {
    let n = j as u64 + 1;
    let mut c = 1u64;
    (0..=j as u64)
        .map(|i| {
            // C(n, i+1) from C(n, i).
            c = c * (n - i) / (i + 1);
            if i % 2 == 0 {
                c as f64
            } else {
                -(c as f64)
            }
        })
        .collect()
}

/// `Σ_i (−1)^i C(j+1, i+1) φ_{σ√i} * f₀`.
pub fn fbeta_closed_form(f0: &GridDensity, sigma: f64, j: u32) -> Result<FBeta> {
    check_sigma(f0, sigma, j)?;
    let coeffs = closed_form_coefficients(j);
    let mut acc = vec![0.0; f0.len()];
    for (i, c) in coeffs.iter().enumerate() {
        let term = if i == 0 {
            f0.clone()
        } else {
            convolve_gaussian(f0, sigma * (i as f64).sqrt())?
        };
        acc.iter_mut().zip(term.values()).for_each(|(a, t)| *a += c * t);
    }
    finish(f0, acc)
}

fn judge(xs: Vec<f64>, ys: Vec<f64>, target: f64, mut flags: Vec<String>) -> SlopeReport {
    let fit = slope_fit(&xs, &ys, true);
    let (slope, r2) = match fit {
        Ok(v) => v,
        Err(e) => {
            flags.push(e.to_string());
            (f64::NAN, 0.0)
        }
    };
    let pass = flags.is_empty()
        && (slope - target).abs() <= SLOPE_BAND * target
        && r2 >= MIN_R2;
    SlopeReport { xs, ys, slope, r2, target: Some(target), pass, seed: 0, flags }
}

fn check_sigmas(sigmas: &[f64]) -> Vec<String> {
    let mut flags = Vec::new();
    if sigmas.len() < 5 {
        flags.push(format!("need at least 5 sigma values, got {}", sigmas.len()));
    }
    let (lo, hi) = sigmas
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    if hi < 10.0 * lo * (1.0 - 1e-9) {
        flags.push("sigma values must span at least one decade".into());
    }
    flags
}

/// Sup error of `φ_σ * f_β` against `f₀` on `{f₀ ≥ 1e−3}`.
pub fn sup_error(f0: &GridDensity, sigma: f64, j: u32) -> Result<f64> {
    let fb = fbeta_iterative(f0, sigma, j)?;
    let smoothed = convolve_gaussian(&fb.density, sigma)?;
    Ok(f0
        .values()
        .iter()
        .zip(smoothed.values())
        .filter(|(a, _)| **a >= INTERIOR_FLOOR)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// `KL(f₀ ‖ φ_σ * f_β)`.
pub fn kl_error(f0: &GridDensity, sigma: f64, j: u32) -> Result<f64> {
    let fb = fbeta_iterative(f0, sigma, j)?;
    let smoothed = convolve_gaussian(&fb.density, sigma)?;
    let kl = divergence(DivergenceKind::Kl, f0, &smoothed)?;
    if kl < -1e-10 {
        return Err(Error::Numeric { what: format!("negative KL {kl:e}"), index: None });
    }
    Ok(kl)
}

/// Fits the order of `‖φ_σ * f_β − f₀‖∞` in σ; the target is `β = 2j + 2`.
pub fn approx_order_experiment(f0: &GridDensity, j: u32, sigmas: &[f64]) -> Result<SlopeReport> {
    let mut flags = check_sigmas(sigmas);
    let errs = exec::map_range(sigmas.len(), |k| sup_error(f0, sigmas[k], j));
    let ys = errs.into_iter().collect::<Result<Vec<f64>>>()?;
    // Errors should shrink with σ; count consecutive pairs that disagree.
    let mut order: Vec<(f64, f64)> = sigmas.iter().copied().zip(ys.iter().copied()).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let bad = order.windows(2).filter(|w| w[1].1 <= w[0].1).count();
    if bad as f64 > 0.1 * (order.len() - 1) as f64 {
        flags.push(format!("{bad} non-monotone error pairs"));
    }
    Ok(judge(sigmas.to_vec(), ys, 2.0 * j as f64 + 2.0, flags))
}

/// Fits the order of `KL(f₀ ‖ φ_σ * f_β)` in σ; the target is `2β`.
pub fn kl_rate_experiment(f0: &GridDensity, j: u32, sigmas: &[f64]) -> Result<SlopeReport> {
    let flags = check_sigmas(sigmas);
    let kls = exec::map_range(sigmas.len(), |k| kl_error(f0, sigmas[k], j));
    let ys = kls.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(judge(sigmas.to_vec(), ys, 2.0 * (2.0 * j as f64 + 2.0), flags))
}

/// `n` values log-spaced from `hi` down to `lo`.
pub fn log_spaced(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (hi.ln() + (lo.ln() - hi.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{normal_pdf, GridSpec};

    fn padded_normal(mean: f64, sd: f64) -> GridDensity {
        GridDensity::normal(GridSpec::new(-1.0, 2.0, 3001).unwrap(), mean, sd).unwrap()
    }

    #[test]
    fn smoothness_spec() {
        assert!(SmoothnessSpec::new(2.0, 0).is_ok());
        assert!(SmoothnessSpec::new(2.5, 0).is_err());
        assert_eq!(SmoothnessSpec::from_beta(4.0).unwrap().j, 1);
        assert_eq!(SmoothnessSpec::from_beta(4.5).unwrap().j, 2);
        assert_eq!(SmoothnessSpec::from_beta(0.5).unwrap().j, 0);
    }

    #[test]
    fn coefficients() {
        assert_eq!(closed_form_coefficients(0), vec![1.0]);
        assert_eq!(closed_form_coefficients(1), vec![2.0, -1.0]);
        assert_eq!(closed_form_coefficients(2), vec![3.0, -3.0, 1.0]);
        assert_eq!(closed_form_coefficients(3), vec![4.0, -6.0, 4.0, -1.0]);
    }

    #[test]
    fn zero_iterations_return_f0() {
        let f0 = padded_normal(0.5, 0.15);
        let fb = fbeta_iterative(&f0, 0.02, 0).unwrap();
        assert!(fb.density.sup_distance(&f0).unwrap() < 1e-14);
        assert_eq!(fb.negative_mass, 0.0);
    }

    #[test]
    fn one_iteration_is_two_f0_minus_smoothed() {
        let f0 = padded_normal(0.5, 0.15);
        let sigma = 0.02;
        let fb = fbeta_iterative(&f0, sigma, 1).unwrap();
        let g = f0.grid();
        let sd = (0.15f64.powi(2) + sigma * sigma).sqrt();
        // Analytic 2f₀ − N(0.5, 0.15² + σ²) on the grid, normalised like f₀.
        let scale = f0.values()[1500] / normal_pdf(0.5, 0.5, 0.15);
        let mut neg = vec![0.0; g.n];
        for (i, n) in neg.iter_mut().enumerate() {
            let x = g.x(i);
            let exact = scale * (2.0 * normal_pdf(x, 0.5, 0.15) - normal_pdf(x, 0.5, sd));
            assert!((fb.raw[i] - exact).abs() < 1e-8, "x = {x}");
            *n = (-exact).max(0.0);
        }
        assert!(trapezoid(&neg, g.dx()) < 1e-6);
        assert!(fb.negative_mass < 1e-6);
    }

    #[test]
    fn closed_form_matches_recursion() {
        let g = GridSpec::new(-2.0, 3.0, 2001).unwrap();
        let f0 = GridDensity::from_fn(g, |x| 0.6 * normal_pdf(x, 0.3, 0.2) + 0.4 * normal_pdf(x, 0.8, 0.15))
            .unwrap();
        for j in 0..=3 {
            let a = fbeta_iterative(&f0, 0.03, j).unwrap();
            let b = fbeta_closed_form(&f0, 0.03, j).unwrap();
            let d = crate::grid::sup_abs_diff(&a.raw, &b.raw);
            assert!(d < 1e-8, "j = {j}: {d}");
            if a.negative_mass < 1e-6 {
                assert!((trapezoid(&a.raw, g.dx()) - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn too_large_sigma_is_rejected() {
        let g = GridSpec::new(-1.0, 2.0, 1024).unwrap();
        let f0 = GridDensity::uniform(g, 0.0, 1.0).unwrap();
        assert!(matches!(fbeta_iterative(&f0, 0.1, 1), Err(Error::SigmaTooLarge { .. })));
    }

    #[test]
    fn negative_mass_shrinks_with_sigma() {
        let f0 = padded_normal(0.5, 0.1);
        let mut last = f64::INFINITY;
        for sigma in [0.08, 0.04, 0.02, 0.01] {
            let m = fbeta_iterative(&f0, sigma, 2).map(|f| f.negative_mass).unwrap_or(f64::INFINITY);
            assert!(m <= last + 1e-10, "{sigma}: {m} > {last}");
            last = m;
        }
    }

    #[test]
    fn degenerate_sigma_lists_are_flagged() {
        let f0 = padded_normal(0.5, 0.15);
        let r = approx_order_experiment(&f0, 0, &[0.05, 0.04, 0.03]).unwrap();
        assert!(r.invalid() && !r.pass);
    }

    #[test]
    fn log_spacing() {
        let s = log_spaced(0.1, 0.01, 5);
        assert!((s[0] - 0.1).abs() < 1e-15 && (s[4] - 0.01).abs() < 1e-15);
        assert!((s[2] - 0.1f64.sqrt() * 0.1).abs() < 1e-12);
    }
}
