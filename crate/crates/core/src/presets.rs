//! Named test densities used by the experiments and the command line.

use crate::error::Result;
use crate::grid::{normal_pdf, GridDensity, GridSpec};

/// `exp(−1/(1 − u²))` with `u = (x − center)/half_width`, zero outside.
pub fn bump_value(x: f64, center: f64, half_width: f64) -> f64 {
    let u = (x - center) / half_width;
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// Smooth compactly supported bump on `[center ± half_width]`.
pub fn bump(grid: GridSpec, center: f64, half_width: f64) -> Result<GridDensity> {
    GridDensity::from_fn(grid, |x| bump_value(x, center, half_width))
}

/// Bump on `[−2.5, 3.5]`, wide enough that σ ∈ [0.01, 0.1] is in the
/// asymptotic regime of the sup-norm error.
pub fn wide_bump() -> Result<GridDensity> {
    bump(GridSpec::new(-3.5, 4.5, 4096)?, 0.5, 3.0)
}

/// `Σ w_k N(m_k, s_k²)` on `grid`.
pub fn gaussian_mixture(grid: GridSpec, components: &[(f64, f64, f64)]) -> Result<GridDensity> {
    GridDensity::from_fn(grid, |x| {
        components.iter().map(|&(w, m, s)| w * normal_pdf(x, m, s)).sum()
    })
}

pub const KL_MIXTURE: [(f64, f64, f64); 2] = [(0.5, 0.3, 0.3), (0.5, 0.9, 0.35)];

/// Smooth full-support mixture for the KL order experiment; the window holds
/// nine standard deviations of each component.
pub fn kl_mixture() -> Result<GridDensity> {
    gaussian_mixture(GridSpec::with_spacing(-2.4, 4.05, 0.0025)?, &KL_MIXTURE)
}

/// `N(mean, sd²)` restricted to `[a, b]` on `grid`.
pub fn truncated_normal(grid: GridSpec, mean: f64, sd: f64, a: f64, b: f64) -> Result<GridDensity> {
    GridDensity::from_fn(grid, |x| if x >= a && x <= b { normal_pdf(x, mean, sd) } else { 0.0 })
}

/// `N(0.5, 0.2²)` truncated to `[0, 1]`, tabulated on a padded window.
pub fn recovery_truth(n: usize) -> Result<GridDensity> {
    truncated_normal(GridSpec::new(-0.5, 1.5, n)?, 0.5, 0.2, 0.0, 1.0)
}

/// Two well separated bumps on `[0, 1]`.
pub const BIMODAL: [(f64, f64, f64); 2] = [(0.5, 0.3, 0.07), (0.5, 0.72, 0.07)];

pub fn bimodal(grid: GridSpec) -> Result<GridDensity> {
    GridDensity::from_fn(grid, |x| {
        if (0.0..=1.0).contains(&x) {
            BIMODAL.iter().map(|&(w, m, s)| w * normal_pdf(x, m, s)).sum()
        } else {
            0.0
        }
    })
}

/// Draws `n` points from a tabulated density by inverting its CDF.
pub fn sample(f: &GridDensity, n: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    let cdf = f.cdf_values();
    let total = *cdf.last().unwrap_or(&1.0);
    let g = f.grid();
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let i = cdf.partition_point(|&c| c < u).clamp(1, cdf.len() - 1);
            let (c0, c1) = (cdf[i - 1], cdf[i]);
            let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
            g.x(i - 1) + w * g.dx()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        let b = wide_bump().unwrap();
        assert!((b.mass() - 1.0).abs() < 1e-12);
        assert!(b.values()[0] == 0.0 && b.values()[b.len() - 1] == 0.0);
        let k = kl_mixture().unwrap();
        assert!(k.grid().dx() <= 0.0025);
        let t = recovery_truth(1024).unwrap();
        assert!((t.mean() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn sampling_matches_moments() {
        let f = recovery_truth(2048).unwrap();
        let mut rng = crate::rng::stream(3, 1);
        let xs = sample(&f, 20000, &mut rng);
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((m - f.mean()).abs() < 0.01);
        assert!(xs.iter().all(|&x| (0.0 - 1e-3..=1.0 + 1e-3).contains(&x)));
    }
}
