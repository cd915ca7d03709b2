//! Densities tabulated on uniform grids, trapezoid quadrature, Gaussian
//! smoothing and divergences between densities on a shared grid.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{param, Error, Result};
use crate::exec;

pub const DEFAULT_GRID_N: usize = 1024;
pub const MIN_GRID_N: usize = 16;
/// Floor applied to the denominator of log ratios.
pub const LOG_FLOOR: f64 = 1e-300;
/// Gaussian kernels are truncated at this many standard deviations.
pub const KERNEL_SDS: f64 = 8.0;
pub const MIN_POINTS_PER_SIGMA: f64 = 4.0;
pub const MAX_CONVOLUTION_LOSS: f64 = 1e-4;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * SQRT_2PI)
}

/// Standard normal CDF, accurate in both tails.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `Φ(a) − Φ(b)` without cancellation when both arguments sit in the same tail.
pub fn std_normal_diff(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        std_normal_cdf(-b) - std_normal_cdf(-a)
    } else {
        std_normal_cdf(a) - std_normal_cdf(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(param(format!("grid needs finite lo < hi, got [{lo}, {hi}]")));
        }
        if n < MIN_GRID_N {
            return Err(param(format!("grid needs at least {MIN_GRID_N} points, got {n}")));
        }
        Ok(Self { lo, hi, n })
    }

    /// Grid on `[lo, hi]` fine enough that the spacing is at most `dx_max`.
    pub fn with_spacing(lo: f64, hi: f64, dx_max: f64) -> Result<Self> {
        let n = (((hi - lo) / dx_max).ceil() as usize + 1).max(MIN_GRID_N);
        Self::new(lo, hi, n)
    }

    pub fn dx(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.dx()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.n == other.n && self.lo == other.lo && self.hi == other.hi
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "grids differ: [{}, {}; {}] vs [{}, {}; {}]",
                self.lo, self.hi, self.n, other.lo, other.hi, other.n
            )))
        }
    }
}

/// Trapezoid rule on equally spaced samples.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dx * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    grid: GridSpec,
    values: Vec<f64>,
}

impl GridDensity {
    /// Validates and renormalizes tabulated values.
    pub fn new(grid: GridSpec, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.n
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric { what: "density value".into(), index: Some(i) });
        }
        if let Some(i) = values.iter().position(|&v| v < 0.0) {
            return Err(param(format!("negative density value {} at index {i}", values[i])));
        }
        let mass = trapezoid(&values, grid.dx());
        if !(mass > 0.0) {
            return Err(param("density has zero mass on the grid"));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.n).map(|i| f(grid.x(i)).max(0.0)).collect();
        Self::new(grid, values)
    }

    pub fn normal(grid: GridSpec, mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0) {
            return Err(param("normal density needs sd > 0"));
        }
        Self::from_fn(grid, |x| normal_pdf(x, mean, sd))
    }

    /// Indicator of `[a, b]`; grid points exactly at an interior jump get the
    /// midpoint value so the trapezoid mass equals `b − a`.
    pub fn uniform(grid: GridSpec, a: f64, b: f64) -> Result<Self> {
        Self::from_fn(grid, |x| {
            if x < a || x > b {
                0.0
            } else if (x == a && a > grid.lo) || (x == b && b < grid.hi) {
                0.5
            } else {
                1.0
            }
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.grid.x(i)
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.grid.dx())
    }

    /// Linear interpolation; zero outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g.lo || x > g.hi {
            return 0.0;
        }
        let t = (x - g.lo) / g.dx();
        let i = (t.floor() as usize).min(g.n - 2);
        let w = t - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Cumulative trapezoid sums, starting at 0.
    pub fn cdf_values(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * dx * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    /// `∫ g(x) f(x) dx` by the trapezoid rule.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        let vals: Vec<f64> = (0..self.len()).map(|i| g(self.x(i)) * self.values[i]).collect();
        trapezoid(&vals, self.grid.dx())
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m))
    }

    pub fn sup_distance(&self, other: &GridDensity) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(sup_abs_diff(&self.values, &other.values))
    }

    /// Same density on a window extended by `extra` zero-valued points per side.
    pub fn padded(&self, extra: usize) -> Result<GridDensity> {
        let dx = self.grid.dx();
        let grid = GridSpec::new(
            self.grid.lo - extra as f64 * dx,
            self.grid.hi + extra as f64 * dx,
            self.grid.n + 2 * extra,
        )?;
        let mut values = vec![0.0; extra];
        values.extend_from_slice(&self.values);
        values.resize(grid.n, 0.0);
        GridDensity::new(grid, values)
    }

    /// Mixture `Σ w_k f_k` of densities sharing this grid.
    pub fn average(parts: &[GridDensity]) -> Result<GridDensity> {
        let first = parts.first().ok_or_else(|| param("cannot average zero densities"))?;
        let mut acc = vec![0.0; first.len()];
        for p in parts {
            first.grid.check_same(&p.grid)?;
            acc.iter_mut().zip(&p.values).for_each(|(a, v)| *a += v);
        }
        GridDensity::new(first.grid, acc)
    }
}

pub fn sup_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_bandwidth(grid: &GridSpec, sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(param(format!("sigma must be positive and finite, got {sigma}")));
    }
    if sigma > (grid.hi - grid.lo) / 4.0 {
        return Err(param(format!(
            "sigma {sigma} exceeds a quarter of the domain width {}",
            grid.hi - grid.lo
        )));
    }
    if sigma / grid.dx() < MIN_POINTS_PER_SIGMA {
        return Err(Error::Resolution(format!(
            "{:.2} grid points per sigma, need at least {MIN_POINTS_PER_SIGMA}",
            sigma / grid.dx()
        )));
    }
    Ok(())
}

/// `∫ φ_σ(y − t) v(t) dt` at every grid point by direct trapezoid quadrature
/// with the kernel truncated at ±8σ. Accepts signed input and does not
/// renormalize.
pub fn convolve_raw(values: &[f64], grid: &GridSpec, sigma: f64) -> Vec<f64> {
    let n = values.len();
    let dx = grid.dx();
    let half = ((KERNEL_SDS * sigma) / dx).ceil() as usize;
    let kernel: Vec<f64> = (0..=half)
        .map(|k| normal_pdf(k as f64 * dx, 0.0, sigma) * dx)
        .collect();
    let weighted: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| v * trapezoid_weight(i, n))
        .collect();
    let mut out = vec![0.0; n];
    exec::fill(&mut out, |i| {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        (lo..=hi).map(|t| weighted[t] * kernel[i.abs_diff(t)]).sum()
    });
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convolution {
    pub density: GridDensity,
    /// Mass lost off the grid edges before renormalization.
    pub lost_mass: f64,
}

/// `φ_σ * f` on the grid of `f`, renormalized, with the lost mass recorded.
pub fn convolve_gaussian_report(f: &GridDensity, sigma: f64) -> Result<Convolution> {
    check_bandwidth(&f.grid, sigma)?;
    let raw = convolve_raw(&f.values, &f.grid, sigma);
    let lost_mass = f.mass() - trapezoid(&raw, f.grid.dx());
    if lost_mass > MAX_CONVOLUTION_LOSS {
        return Err(Error::Coverage { lost: lost_mass });
    }
    let raw = raw.into_iter().map(|v| v.max(0.0)).collect();
    Ok(Convolution { density: GridDensity::new(f.grid, raw)?, lost_mass })
}

pub fn convolve_gaussian(f: &GridDensity, sigma: f64) -> Result<GridDensity> {
    convolve_gaussian_report(f, sigma).map(|c| c.density)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DivergenceKind {
    Kl,
    V,
    /// Squared Hellinger distance `½∫(√p − √q)²`, valued in [0, 1].
    HellingerSq,
    L1,
    SupLogRatio,
    RenyiAlpha(f64),
}

impl DivergenceKind {
    pub fn renyi(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(DivergenceKind::RenyiAlpha(alpha))
        } else {
            Err(param(format!("Renyi order must lie in (0, 1), got {alpha}")))
        }
    }
}

fn checked_integral(integrand: &[f64], dx: f64, what: &str) -> Result<f64> {
    if let Some(i) = integrand.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric { what: what.into(), index: Some(i) });
    }
    Ok(trapezoid(integrand, dx))
}

fn log_ratio(p: f64, q: f64) -> f64 {
    (p / q.max(LOG_FLOOR)).ln()
}

pub fn divergence(kind: DivergenceKind, p: &GridDensity, q: &GridDensity) -> Result<f64> {
    p.grid.check_same(&q.grid)?;
    let dx = p.grid.dx();
    let pairs = p.values.iter().zip(&q.values);
    match kind {
        DivergenceKind::Kl => {
            let g: Vec<f64> = pairs
                .map(|(&a, &b)| if a > 0.0 { a * log_ratio(a, b) } else { 0.0 })
                .collect();
            checked_integral(&g, dx, "KL integrand")
        }
        DivergenceKind::V => {
            let g: Vec<f64> = pairs
                .map(|(&a, &b)| if a > 0.0 { a * log_ratio(a, b).powi(2) } else { 0.0 })
                .collect();
            checked_integral(&g, dx, "V integrand")
        }
        DivergenceKind::HellingerSq => {
            let g: Vec<f64> = pairs.map(|(&a, &b)| (a.sqrt() - b.sqrt()).powi(2)).collect();
            Ok(0.5 * checked_integral(&g, dx, "Hellinger integrand")?)
        }
        DivergenceKind::L1 => {
            let g: Vec<f64> = pairs.map(|(&a, &b)| (a - b).abs()).collect();
            checked_integral(&g, dx, "L1 integrand")
        }
        DivergenceKind::SupLogRatio => {
            let mut best = f64::NEG_INFINITY;
            for (i, (&a, &b)) in pairs.enumerate() {
                if a > 0.0 {
                    let r = log_ratio(a, b);
                    if !r.is_finite() {
                        return Err(Error::Numeric { what: "log ratio".into(), index: Some(i) });
                    }
                    best = best.max(r);
                }
            }
            Ok(best)
        }
        DivergenceKind::RenyiAlpha(alpha) => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(param(format!("Renyi order must lie in (0, 1), got {alpha}")));
            }
            let g: Vec<f64> = pairs.map(|(&a, &b)| a.powf(alpha) * b.powf(1.0 - alpha)).collect();
            let affinity = checked_integral(&g, dx, "Renyi integrand")?;
            let d = affinity.ln() / (alpha - 1.0);
            if d.is_finite() {
                Ok(d)
            } else {
                Err(Error::Numeric { what: "Renyi divergence".into(), index: None })
            }
        }
    }
}

/// Hellinger distance, the square root of [`DivergenceKind::HellingerSq`].
pub fn hellinger(p: &GridDensity, q: &GridDensity) -> Result<f64> {
    divergence(DivergenceKind::HellingerSq, p, q).map(|h2| h2.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: f64, hi: f64, n: usize) -> GridSpec {
        GridSpec::new(lo, hi, n).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(0.0, 1.0, 15).is_err());
        assert!(GridSpec::new(1.0, 0.0, 64).is_err());
        assert!(GridDensity::new(grid(0.0, 1.0, 16), vec![0.0; 16]).is_err());
        let mut v = vec![1.0; 16];
        v[3] = f64::NAN;
        assert_eq!(
            GridDensity::new(grid(0.0, 1.0, 16), v).unwrap_err(),
            Error::Numeric { what: "density value".into(), index: Some(3) }
        );
    }

    #[test]
    fn construction_normalizes() {
        let f = GridDensity::from_fn(grid(0.0, 2.0, 101), |x| 3.0 * x).unwrap();
        assert!((f.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_convolution_identity() {
        let g = grid(-2.0, 2.0, 1024);
        let f = GridDensity::normal(g, 0.0, 0.2).unwrap();
        let out = convolve_gaussian(&f, 0.1).unwrap();
        let sd = (0.2f64.powi(2) + 0.1f64.powi(2)).sqrt();
        let exact = GridDensity::normal(g, 0.0, sd).unwrap();
        assert!(out.sup_distance(&exact).unwrap() < 1e-4);
        assert!((out.mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn uniform_convolution_matches_phi_difference() {
        // 0, 0.5 and 1 fall on grid points.
        let g = grid(-0.5, 1.5, 1025);
        let f = GridDensity::uniform(g, 0.0, 1.0).unwrap();
        let out = convolve_gaussian(&f, 0.05).unwrap();
        let sigma = 0.05;
        for i in (0..g.n).step_by(16) {
            let y: f64 = g.x(i);
            let exact = std_normal_cdf(y / sigma) - std_normal_cdf((y - 1.0) / sigma);
            assert!((out.values()[i] - exact).abs() < 2e-2, "y = {y}");
        }
        let mid = out.values()[512];
        let exact = std_normal_cdf(10.0) - std_normal_cdf(-10.0);
        assert!((mid - exact).abs() < 1e-6, "{mid} vs {exact}");
    }

    #[test]
    fn convolution_errors() {
        let f = GridDensity::normal(grid(-1.0, 1.0, 64), 0.0, 0.2).unwrap();
        assert!(matches!(convolve_gaussian(&f, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(convolve_gaussian(&f, 0.6), Err(Error::Parameter(_))));
        assert!(matches!(convolve_gaussian(&f, 0.05), Err(Error::Resolution(_))));
    }

    #[test]
    fn convolution_reports_lost_mass() {
        let f = GridDensity::uniform(grid(0.0, 1.0, 512), 0.0, 1.0).unwrap();
        assert!(matches!(convolve_gaussian(&f, 0.05), Err(Error::Coverage { .. })));
    }

    #[test]
    fn semigroup() {
        let g = grid(-3.0, 3.0, 1024);
        let f = GridDensity::from_fn(g, |x| {
            0.6 * normal_pdf(x, -0.4, 0.25) + 0.4 * normal_pdf(x, 0.7, 0.15)
        })
        .unwrap();
        let twice = convolve_gaussian(&convolve_gaussian(&f, 0.1).unwrap(), 0.1).unwrap();
        let once = convolve_gaussian(&f, 0.1 * 2f64.sqrt()).unwrap();
        assert!(twice.sup_distance(&once).unwrap() < 2e-4);
    }

    #[test]
    fn divergence_closed_forms() {
        let g = grid(-8.0, 9.0, 4096);
        let p = GridDensity::normal(g, 0.0, 1.0).unwrap();
        let q = GridDensity::normal(g, 1.0, 1.0).unwrap();
        assert!(divergence(DivergenceKind::Kl, &p, &p).unwrap().abs() < 1e-12);
        let kl = divergence(DivergenceKind::Kl, &p, &q).unwrap();
        assert!((kl - 0.5).abs() < 1e-4, "{kl}");
        // Closed-form affinity of two unit-variance normals one apart.
        let h2 = divergence(DivergenceKind::HellingerSq, &p, &q).unwrap();
        assert!((h2 - (1.0 - (-1.0f64 / 8.0).exp())).abs() < 1e-4, "{h2}");
        // V = KL² + Δ²/σ² for equal-variance normals.
        let v = divergence(DivergenceKind::V, &p, &q).unwrap();
        assert!((v - 1.25).abs() < 1e-4, "{v}");
        // Renyi of order α between N(0,1) and N(1,1) is α/2.
        let r = divergence(DivergenceKind::RenyiAlpha(0.3), &p, &q).unwrap();
        assert!((r - 0.15).abs() < 1e-4, "{r}");
        let l1 = divergence(DivergenceKind::L1, &p, &q).unwrap();
        let exact = 2.0 * (std_normal_cdf(0.5) - std_normal_cdf(-0.5));
        assert!((l1 - exact).abs() < 1e-4, "{l1}");
        let sup = divergence(DivergenceKind::SupLogRatio, &p, &q).unwrap();
        // log p/q = 0.5 − x is largest at the left edge.
        assert!((sup - 8.5).abs() < 1e-9, "{sup}");
    }

    #[test]
    fn divergence_errors() {
        let p = GridDensity::normal(grid(-4.0, 4.0, 64), 0.0, 1.0).unwrap();
        let q = GridDensity::normal(grid(-4.0, 4.0, 65), 0.0, 1.0).unwrap();
        assert!(matches!(divergence(DivergenceKind::Kl, &p, &q), Err(Error::Shape(_))));
        assert!(DivergenceKind::renyi(1.0).is_err());
        assert!(matches!(
            divergence(DivergenceKind::RenyiAlpha(1.5), &p, &p),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn floor_keeps_kl_finite_on_disjoint_support() {
        let g = grid(0.0, 1.0, 101);
        let p = GridDensity::uniform(g, 0.0, 0.4).unwrap();
        let q = GridDensity::uniform(g, 0.6, 1.0).unwrap();
        let kl = divergence(DivergenceKind::Kl, &p, &q).unwrap();
        assert!(kl.is_finite() && kl > 600.0);
        let h2 = divergence(DivergenceKind::HellingerSq, &p, &q).unwrap();
        assert!((h2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_difference_is_accurate_in_the_tail() {
        let d = std_normal_diff(12.0, 11.0);
        let direct = statrs::function::erf::erfc(11.0 / 2f64.sqrt()) / 2.0
            - statrs::function::erf::erfc(12.0 / 2f64.sqrt()) / 2.0;
        assert!(((d - direct) / direct).abs() < 1e-12);
        assert!(d > 0.0);
    }
}
