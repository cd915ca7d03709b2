//! Transfer functions `μ: [0,1] → ℝ`, quantile extraction and the latent
//! variable marginal `f_{μ,σ}(y) = ∫₀¹ φ_σ(y − μ(x)) dx`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::exec;
use crate::grid::{
    normal_pdf, std_normal_diff, trapezoid, GridDensity, GridSpec, KERNEL_SDS,
    MAX_CONVOLUTION_LOSS, MIN_POINTS_PER_SIGMA,
};

pub const MIN_QUANTILE_KNOTS: usize = 16;
pub const DEFAULT_MIXTURE_M: usize = 2048;
pub const MAX_MIXTURE_M: usize = 1 << 16;
pub const MIXTURE_REFINE_TOL: f64 = 1e-6;
pub const HISTOGRAM_SAMPLES: usize = 1 << 16;
/// Clip level for quantiles of densities with unbounded support.
pub const DEFAULT_QUANTILE_CLIP: f64 = 1e-6;

/// Piecewise-linear map on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl TransferFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(param(format!(
                "need at least two knots with matching values, got {} knots and {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots[0] != 0.0 || knots[knots.len() - 1] != 1.0 {
            return Err(param("knots must start at 0 and end at 1"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(param("knots must be strictly increasing"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric { what: "transfer value".into(), index: Some(i) });
        }
        Ok(Self { knots, values })
    }

    /// Values on `n` equally spaced knots.
    pub fn on_uniform_knots(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(param("need at least two knots"));
        }
        Self::new(uniform_knots(n), values)
    }

    pub fn from_fn(n_knots: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let knots = uniform_knots(n_knots.max(2));
        let values = knots.iter().map(|&t| f(t)).collect();
        Self::new(knots, values)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![c, c])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        let k = self.knots.partition_point(|&s| s <= t).clamp(1, self.knots.len() - 1);
        let (t0, t1) = (self.knots[k - 1], self.knots[k]);
        let w = (t - t0) / (t1 - t0);
        self.values[k - 1] * (1.0 - w) + self.values[k] * w
    }

    /// `μ` at the midpoints `(j + ½)/m`, in order.
    pub fn eval_midpoints(&self, m: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(m);
        let mut k = 1;
        for j in 0..m {
            let t = (j as f64 + 0.5) / m as f64;
            while k + 1 < self.knots.len() && self.knots[k] < t {
                k += 1;
            }
            let (t0, t1) = (self.knots[k - 1], self.knots[k]);
            let w = (t - t0) / (t1 - t0);
            out.push(self.values[k - 1] * (1.0 - w) + self.values[k] * w);
        }
        out
    }

    /// `‖μ − ν‖∞`; exact for piecewise-linear maps since the maximum sits on a knot.
    pub fn sup_distance(&self, other: &TransferFunction) -> f64 {
        if self.knots == other.knots {
            return self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        }
        self.knots
            .iter()
            .chain(&other.knots)
            .map(|&t| (self.eval(t) - other.eval(t)).abs())
            .fold(0.0, f64::max)
    }

    /// Sorts the knot values ascending (projection onto monotone maps).
    pub fn sort_values(&mut self) {
        self.values.sort_by(f64::total_cmp);
    }
}

pub fn uniform_knots(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| if k + 1 == n { 1.0 } else { k as f64 / (n - 1) as f64 })
        .collect()
}

/// Left-continuous inverse of the piecewise-linear trapezoid CDF at `t`.
fn inverse_cdf(cdf: &[f64], grid: &GridSpec, t: f64) -> f64 {
    let n = cdf.len();
    if t <= 0.0 {
        // Left end of the support.
        let j = cdf.partition_point(|&c| c <= 0.0);
        return grid.x(j.saturating_sub(1));
    }
    if t >= 1.0 {
        let j = cdf.partition_point(|&c| c < 1.0);
        return grid.x(j.min(n - 1));
    }
    let i = cdf.partition_point(|&c| c < t).clamp(1, n - 1);
    let (c0, c1) = (cdf[i - 1], cdf[i]);
    let w = if c1 > c0 { (t - c0) / (c1 - c0) } else { 1.0 };
    (grid.x(i - 1) + w * grid.dx()).clamp(grid.lo, grid.hi)
}

fn normalized_cdf(f: &GridDensity) -> Vec<f64> {
    let mut cdf = f.cdf_values();
    let total = *cdf.last().expect("grid has points");
    cdf.iter_mut().for_each(|c| *c /= total);
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    let v = f.values();
    let first = v.iter().position(|&x| x > 0.0).unwrap_or(0);
    let last = v.iter().rposition(|&x| x > 0.0).unwrap_or(0);
    let flat_interior = first < last && v[first..=last].contains(&0.0);
    if flat_interior {
        tracing::warn!("density has a zero-mass gap; quantile uses the left-continuous inverse");
    }
    cdf
}

/// `μ₀ = F⁻¹` on `n_knots` equally spaced knots; `μ₀(0)` and `μ₀(1)` are the
/// ends of the support of `f`.
pub fn quantile_of(f: &GridDensity, n_knots: usize) -> Result<TransferFunction> {
    quantile_of_clipped(f, n_knots, 0.0)
}

/// Quantile function evaluated at `clamp(t, clip, 1 − clip)`.
pub fn quantile_of_clipped(f: &GridDensity, n_knots: usize, clip: f64) -> Result<TransferFunction> {
    if n_knots < MIN_QUANTILE_KNOTS {
        return Err(param(format!("quantile needs at least {MIN_QUANTILE_KNOTS} knots")));
    }
    if !(0.0..0.5).contains(&clip) {
        return Err(param(format!("clip level must lie in [0, 0.5), got {clip}")));
    }
    let cdf = normalized_cdf(f);
    let knots = uniform_knots(n_knots);
    let values = knots
        .iter()
        .map(|&t| inverse_cdf(&cdf, f.grid(), t.clamp(clip, 1.0 - clip)))
        .collect();
    TransferFunction::new(knots, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MixtureRule {
    /// Midpoint rule in `x` with `m` nodes; doubled until successive results
    /// differ by less than 1e−6 in sup-norm when `refine` is set.
    Midpoint { m: usize, refine: bool },
    /// Exact integral over each linear segment of `μ` via normal CDF differences.
    ExactLinear,
}

impl Default for MixtureRule {
    fn default() -> Self {
        MixtureRule::Midpoint { m: DEFAULT_MIXTURE_M, refine: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub density: GridDensity,
    pub lost_mass: f64,
    /// Midpoint nodes used; zero for the exact rule.
    pub nodes: usize,
}

fn check_mixture_inputs(sigma: f64, grid: &GridSpec) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(param(format!("sigma must be positive and finite, got {sigma}")));
    }
    if sigma / grid.dx() < MIN_POINTS_PER_SIGMA {
        return Err(Error::Resolution(format!(
            "{:.2} grid points per sigma, need at least {MIN_POINTS_PER_SIGMA}",
            sigma / grid.dx()
        )));
    }
    Ok(())
}

/// Grid points per block in [`kernel_sums`]; fixed so results do not depend
/// on the thread count.
const KERNEL_BLOCK: usize = 256;

/// `Σ_c exp(−(y − c)²/2σ²)` over sorted `centers` within the kernel reach of
/// each grid point `y`. Along the grid the kernel obeys `e_{i+1} = e_i r_i`,
/// `r_{i+1} = r_i q` with `q = exp(−dx²/σ²)`, so each center costs three
/// exponentials instead of one per grid point.
fn kernel_sums(centers: &[f64], sigma: f64, grid: &GridSpec) -> Vec<f64> {
    let reach = KERNEL_SDS * sigma;
    let dx = grid.dx();
    let h = dx / sigma;
    let q = (-h * h).exp();
    let blocks = exec::map_range(grid.n.div_ceil(KERNEL_BLOCK), |b| {
        let i0 = b * KERNEL_BLOCK;
        let i1 = (i0 + KERNEL_BLOCK).min(grid.n);
        let mut acc = vec![0.0; i1 - i0];
        let a = centers.partition_point(|&c| c < grid.x(i0) - reach);
        let z = centers.partition_point(|&c| c <= grid.x(i1 - 1) + reach);
        for &c in &centers[a..z] {
            let lo = (((c - reach - grid.lo) / dx).ceil().max(0.0) as usize).max(i0);
            let hi = (((c + reach - grid.lo) / dx).floor().max(0.0) as usize).min(i1 - 1);
            if lo > hi {
                continue;
            }
            let d = (grid.x(lo) - c) / sigma;
            let mut e = (-0.5 * d * d).exp();
            let mut r = (-(d * h + 0.5 * h * h)).exp();
            for v in &mut acc[lo - i0..=hi - i0] {
                *v += e;
                e *= r;
                r *= q;
            }
        }
        acc
    });
    blocks.concat()
}

fn midpoint_values(mu: &TransferFunction, sigma: f64, grid: &GridSpec, m: usize) -> Vec<f64> {
    let mut centers = mu.eval_midpoints(m);
    centers.sort_by(f64::total_cmp);
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt() * m as f64);
    let mut out = kernel_sums(&centers, sigma, grid);
    out.iter_mut().for_each(|v| *v *= norm);
    out
}

fn exact_linear_values(mu: &TransferFunction, sigma: f64, grid: &GridSpec) -> Vec<f64> {
    let reach = KERNEL_SDS * sigma;
    let segments: Vec<(f64, f64, f64)> = mu
        .knots
        .windows(2)
        .zip(mu.values.windows(2))
        .map(|(t, v)| (t[1] - t[0], v[0], v[1]))
        .collect();
    let mut out = vec![0.0; grid.n];
    exec::fill(&mut out, |i| {
        let y = grid.x(i);
        let mut acc = 0.0;
        for &(dt, a, b) in &segments {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            if y < lo - reach || y > hi + reach {
                continue;
            }
            if hi - lo < 1e-6 * sigma {
                acc += dt * normal_pdf(y, 0.5 * (lo + hi), sigma);
            } else {
                acc += dt / (hi - lo) * std_normal_diff((y - lo) / sigma, (y - hi) / sigma);
            }
        }
        acc
    });
    out
}

pub fn mixture_density_with(
    mu: &TransferFunction,
    sigma: f64,
    grid: &GridSpec,
    rule: MixtureRule,
) -> Result<Mixture> {
    check_mixture_inputs(sigma, grid)?;
    let (raw, nodes) = match rule {
        MixtureRule::ExactLinear => (exact_linear_values(mu, sigma, grid), 0),
        MixtureRule::Midpoint { m, refine } => {
            if m == 0 {
                return Err(param("midpoint rule needs m > 0"));
            }
            let mut m = m;
            let mut cur = midpoint_values(mu, sigma, grid, m);
            while refine && m < MAX_MIXTURE_M {
                let next = midpoint_values(mu, sigma, grid, 2 * m);
                m *= 2;
                let change = crate::grid::sup_abs_diff(&cur, &next);
                cur = next;
                if change < MIXTURE_REFINE_TOL {
                    break;
                }
            }
            (cur, m)
        }
    };
    let lost_mass = 1.0 - trapezoid(&raw, grid.dx());
    if lost_mass > MAX_CONVOLUTION_LOSS {
        return Err(Error::Coverage { lost: lost_mass });
    }
    Ok(Mixture { density: GridDensity::new(*grid, raw)?, lost_mass, nodes })
}

/// Raw pointwise values of `f_{μ,σ}` on `grid`, with no coverage check and no
/// renormalization. Meant for windows that deliberately truncate the density.
pub fn mixture_values(mu: &TransferFunction, sigma: f64, grid: &GridSpec, rule: MixtureRule) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(param(format!("sigma must be positive, got {sigma}")));
    }
    match rule {
        MixtureRule::ExactLinear => Ok(exact_linear_values(mu, sigma, grid)),
        MixtureRule::Midpoint { m, .. } if m > 0 => Ok(midpoint_values(mu, sigma, grid, m)),
        MixtureRule::Midpoint { .. } => Err(param("midpoint rule needs m > 0")),
    }
}

/// `f_{μ,σ}` on `grid` with the default adaptive midpoint rule.
pub fn mixture_density(mu: &TransferFunction, sigma: f64, grid: &GridSpec) -> Result<GridDensity> {
    mixture_density_with(mu, sigma, grid, MixtureRule::default()).map(|m| m.density)
}

/// Smallest grid window holding `range(μ) ± 8σ`, with at least 4 points per σ.
pub fn covering_grid(mu: &TransferFunction, sigma: f64, min_points: usize) -> Result<GridSpec> {
    let lo = mu.min_value() - (KERNEL_SDS + 0.5) * sigma;
    let hi = mu.max_value() + (KERNEL_SDS + 0.5) * sigma;
    let n = min_points.max(((hi - lo) / sigma * MIN_POINTS_PER_SIGMA).ceil() as usize + 2);
    GridSpec::new(lo, hi, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingHistogram {
    pub bin_edges: Vec<f64>,
    pub masses: Vec<f64>,
}

/// Pushforward of Lebesgue measure through `μ` on `n_bins` equal bins over
/// the range of `μ`.
pub fn induced_histogram(mu: &TransferFunction, n_bins: usize) -> Result<MixingHistogram> {
    if n_bins < 2 {
        return Err(param("histogram needs at least two bins"));
    }
    let (mut lo, mut hi) = (mu.min_value(), mu.max_value());
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let edges = (0..=n_bins)
        .map(|b| if b == n_bins { hi } else { lo + (hi - lo) * b as f64 / n_bins as f64 })
        .collect();
    induced_histogram_on(mu, edges)
}

/// Same with caller-supplied edges; bins are `[e_b, e_{b+1})`, the last one closed.
/// Values outside the edges are dropped, so masses may sum below 1.
pub fn induced_histogram_on(mu: &TransferFunction, bin_edges: Vec<f64>) -> Result<MixingHistogram> {
    if bin_edges.len() < 3 || bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(param("bin edges must be increasing with at least two bins"));
    }
    let nb = bin_edges.len() - 1;
    let mut masses = vec![0.0; nb];
    let w = 1.0 / HISTOGRAM_SAMPLES as f64;
    let last = bin_edges[nb];
    for v in mu.eval_midpoints(HISTOGRAM_SAMPLES) {
        if v == last {
            masses[nb - 1] += w;
            continue;
        }
        let b = bin_edges.partition_point(|&e| e <= v);
        if b >= 1 && b <= nb {
            masses[b - 1] += w;
        }
    }
    Ok(MixingHistogram { bin_edges, masses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{convolve_gaussian, std_normal_cdf};

    fn spec(lo: f64, hi: f64, n: usize) -> GridSpec {
        GridSpec::new(lo, hi, n).unwrap()
    }

    #[test]
    fn kernel_recurrence_matches_direct_sums() {
        let g = spec(-1.0, 2.0, 1201);
        let mut centers: Vec<f64> = (0..300).map(|k| ((k * 37) % 300) as f64 / 300.0 * 1.2 - 0.1).collect();
        centers.sort_by(f64::total_cmp);
        for sigma in [0.005, 0.02, 0.3] {
            let fast = kernel_sums(&centers, sigma, &g);
            for (i, v) in fast.iter().enumerate() {
                let y = g.x(i);
                let direct: f64 = centers
                    .iter()
                    .filter(|&&c| (y - c).abs() <= KERNEL_SDS * sigma)
                    .map(|&c| (-0.5 * ((y - c) / sigma).powi(2)).exp())
                    .sum();
                assert!((v - direct).abs() <= 1e-11 * direct.max(1.0), "sigma {sigma}, y {y}: {v} vs {direct}");
            }
        }
    }

    #[test]
    fn validation() {
        assert!(TransferFunction::new(vec![0.0, 0.5], vec![1.0, 2.0]).is_err());
        assert!(TransferFunction::new(vec![0.0, 0.5, 0.5, 1.0], vec![0.0; 4]).is_err());
        assert!(TransferFunction::new(vec![0.0, 1.0], vec![0.0, f64::INFINITY]).is_err());
        let mu = TransferFunction::new(vec![0.0, 0.25, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert!((mu.eval(0.125) - 0.5).abs() < 1e-15);
        assert!((mu.eval(0.625) - 0.5).abs() < 1e-15);
        let mids = mu.eval_midpoints(8);
        for (j, v) in mids.iter().enumerate() {
            assert!((v - mu.eval((j as f64 + 0.5) / 8.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_quantile_is_identity() {
        let f = GridDensity::uniform(spec(0.0, 1.0, 1025), 0.0, 1.0).unwrap();
        let mu = quantile_of(&f, 257).unwrap();
        for (&t, &v) in mu.knots().iter().zip(mu.values()) {
            assert!((t - v).abs() < 1e-6, "{t} -> {v}");
        }
    }

    #[test]
    fn symmetric_quantiles() {
        let g = spec(0.0, 1.0, 2049);
        let f = GridDensity::normal(g, 0.5, 0.1).unwrap();
        let mu = quantile_of(&f, 65).unwrap();
        assert!((mu.eval(0.5) - 0.5).abs() < 1e-4);

        let f = GridDensity::from_fn(g, |x| normal_pdf(x, 0.3, 0.05) + normal_pdf(x, 0.7, 0.05)).unwrap();
        // Direct CDF oracle: half the mass lies left of 0.5.
        let cdf = f.cdf_values();
        assert!((cdf[1024] - 0.5).abs() < 1e-9);
        let mu = quantile_of(&f, 65).unwrap();
        assert!((mu.eval(0.5) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn quantile_endpoints_are_support_ends() {
        let g = spec(-1.0, 2.0, 3001);
        let f = GridDensity::uniform(g, 0.0, 1.0).unwrap();
        let mu = quantile_of(&f, 33).unwrap();
        assert!((mu.values()[0] - (-0.001)).abs() < 1e-9);
        assert!((mu.values()[32] - 1.001).abs() < 1e-9);
        assert!(mu.values().windows(2).all(|w| w[1] >= w[0]));
        assert!(quantile_of(&f, 8).is_err());
    }

    #[test]
    fn quantile_crosses_a_gap() {
        let g = spec(0.0, 1.0, 1001);
        let f = GridDensity::from_fn(g, |x| if (0.3..=0.7).contains(&x) { 0.0 } else { 1.0 }).unwrap();
        let mu = quantile_of(&f, 101).unwrap();
        assert!(mu.values().windows(2).all(|w| w[1] >= w[0]));
        // Half the mass sits on each side of the gap.
        assert!(mu.eval(0.49) < 0.31 && mu.eval(0.51) > 0.69);
    }

    #[test]
    fn constant_map_gives_normal() {
        let g = spec(-1.0, 3.0, 2048);
        let mu = TransferFunction::constant(1.2).unwrap();
        let exact = GridDensity::normal(g, 1.2, 0.15).unwrap();
        for rule in [MixtureRule::default(), MixtureRule::ExactLinear] {
            let f = mixture_density_with(&mu, 0.15, &g, rule).unwrap().density;
            assert!(f.sup_distance(&exact).unwrap() < 1e-5);
        }
    }

    #[test]
    fn step_map_gives_two_components() {
        let g = spec(-1.0, 2.0, 2048);
        let mu = TransferFunction::new(vec![0.0, 0.5 - 1e-9, 0.5, 1.0], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let f = mixture_density(&mu, 0.1, &g).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..g.n {
            let y = g.x(i);
            let exact = 0.5 * normal_pdf(y, 0.0, 0.1) + 0.5 * normal_pdf(y, 1.0, 0.1);
            worst = worst.max((f.values()[i] - exact).abs());
        }
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn midpoint_matches_exact_segments() {
        // 0.4 sits on grid point 700.
        let g = spec(-1.0, 2.0, 1501);
        let mu = TransferFunction::from_fn(9, |t| (3.0 * t).sin() * 0.6 + 0.2 * t).unwrap();
        for sigma in [0.03, 0.1] {
            let mid = mixture_density(&mu, sigma, &g).unwrap();
            let exact = mixture_density_with(&mu, sigma, &g, MixtureRule::ExactLinear).unwrap();
            assert!(mid.sup_distance(&exact.density).unwrap() < 1e-5, "sigma {sigma}");

            let y = 0.4;
            let mut oracle = 0.0;
            for k in 0..8 {
                let (t0, t1) = (mu.knots()[k], mu.knots()[k + 1]);
                let (a, b) = (mu.values()[k], mu.values()[k + 1]);
                oracle += (t1 - t0) / (b - a).abs()
                    * (std_normal_cdf((y - a) / sigma) - std_normal_cdf((y - b) / sigma)).abs();
            }
            let unnormalized = exact.density.values()[700] * (1.0 - exact.lost_mass);
            assert!((unnormalized - oracle).abs() < 1e-9 * oracle.max(1.0), "{unnormalized} vs {oracle}");
        }
    }

    #[test]
    fn quantile_mixture_matches_convolution() {
        let g = spec(-1.0, 2.0, 2048);
        let f0 = GridDensity::from_fn(g, |x| {
            if (0.0..=1.0).contains(&x) {
                0.7 * normal_pdf(x, 0.35, 0.1) + 0.3 * normal_pdf(x, 0.7, 0.08)
            } else {
                0.0
            }
        })
        .unwrap();
        let mu = quantile_of(&f0, 8192).unwrap();
        for sigma in [0.02, 0.1] {
            let a = mixture_density(&mu, sigma, &g).unwrap();
            let b = convolve_gaussian(&f0, sigma).unwrap();
            let d = a.sup_distance(&b).unwrap();
            assert!(d < 2e-3, "sigma {sigma}: {d}");
        }
    }

    #[test]
    fn mixture_errors() {
        let g = spec(0.0, 1.0, 256);
        let mu = TransferFunction::constant(0.5).unwrap();
        assert!(matches!(mixture_density(&mu, 0.0, &g), Err(Error::Parameter(_))));
        assert!(matches!(mixture_density(&mu, 0.005, &g), Err(Error::Resolution(_))));
        assert!(matches!(mixture_density(&mu, 0.2, &g), Err(Error::Coverage { .. })));
    }

    #[test]
    fn histograms() {
        let id = TransferFunction::from_fn(2, |t| t).unwrap();
        let h = induced_histogram(&id, 2).unwrap();
        assert_eq!(h.bin_edges, vec![0.0, 0.5, 1.0]);
        assert!((h.masses[0] - 0.5).abs() < 1e-12 && (h.masses[1] - 0.5).abs() < 1e-12);

        let step = TransferFunction::new(vec![0.0, 0.3, 1.0], vec![0.0, 0.0, 1.0]).unwrap();
        let h = induced_histogram_on(&step, vec![-0.5, 1e-12, 0.5, 1.0]).unwrap();
        assert!((h.masses[0] - 0.3).abs() <= 1.0 / HISTOGRAM_SAMPLES as f64);
        assert!((h.masses.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert!(induced_histogram(&id, 1).is_err());
    }

    #[test]
    fn increasing_map_has_no_atoms() {
        // μ(x) = x² pushes Lebesgue to density 1/(2√y) on (0, 1].
        let mu = TransferFunction::from_fn(513, |t| t * t).unwrap();
        let h = induced_histogram(&mu, 50).unwrap();
        for (b, m) in h.masses.iter().enumerate().skip(1) {
            let (a, c) = (h.bin_edges[b], h.bin_edges[b + 1]);
            let exact = c.sqrt() - a.sqrt();
            assert!((m - exact).abs() < 1e-3, "bin {b}");
            let width = c - a;
            assert!(*m <= width * 0.5 / a.sqrt() + 1e-3);
        }
    }
}
