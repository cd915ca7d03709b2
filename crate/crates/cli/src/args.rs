//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "nllvm-lab", version, about = "Latent variable density estimation and GP-IVI experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the latent variable density model by MCMC and write its predictive density.
    Estimate(EstimateArgs),
    /// Fit a GP-IVI approximation to an α-fractional posterior.
    Vi(ViArgs),
    /// Run one of the bound or rate checks.
    Verify(VerifyArgs),
    /// Posterior contraction experiment over increasing sample sizes.
    Contract(ContractArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Report path; plot data goes beside it with a .csv extension.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn grid_points() -> clap::builder::RangedU64ValueParser<usize> {
    clap::builder::RangedU64ValueParser::<usize>::new().range(64..=65536)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// One-column CSV of observations, optional header `y`.
    #[arg(long)]
    pub data: PathBuf,
    /// Points of the predictive density grid.
    #[arg(long, default_value_t = 1024, value_parser = grid_points())]
    pub grid: usize,
    #[arg(long, default_value_t = 3000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn: usize,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    /// Knots of the interpolated transfer function.
    #[arg(long, default_value_t = 64)]
    pub knots: usize,
    /// Inverse length scale of the squared exponential kernel.
    #[arg(long, default_value_t = 20.0)]
    pub rescale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    NormalMean,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    MomentMatched,
    Prior,
    Random,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ViArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Observations; simulated from the model at `--theta-star` when absent.
    /// Logistic data are label-signed covariates `s·x`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Sample size when simulating.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = ModelKind::NormalMean)]
    pub model: ModelKind,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 16)]
    pub knots: usize,
    /// Maximum coordinate sweeps.
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    #[arg(long, value_enum, default_value_t = InitKind::MomentMatched)]
    pub init: InitKind,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0.0)]
    pub prior_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    pub prior_sd: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta_star: f64,
    /// Points of the grid on which q and the posterior are tabulated.
    #[arg(long, default_value_t = 1024, value_parser = grid_points())]
    pub grid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    FbetaEquivalence,
    ApproxOrder,
    KlRate,
    HellingerBound,
    LogsupBound,
    L1Support,
    MixtureIdentity,
    Chi2Limit,
    RestrictedKl,
    RiskBound,
    RiskDecay,
}

impl Check {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

/// Reference densities for the checks that take an `f0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// N(0.5, 0.1²) truncated to [0, 1].
    TruncatedNormal,
    /// N(0.5, 0.25²) truncated to [0, 1].
    WideTruncatedNormal,
    Bimodal,
    /// Smooth compactly supported bump.
    WideBump,
    /// Two-component Gaussian mixture.
    KlMixture,
}

/// Per-check settings; unset values take the check's default and are echoed
/// in the report after resolution.
#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub check: Check,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    /// Order of the kernel correction.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<u32>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f0: Option<Preset>,
    #[arg(long, value_parser = grid_points())]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    /// Half-width M of the mean grid in the restricted family.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_bound: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<f64>,
    /// Constant D > 1 of the risk bound.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_const: Option<f64>,
    /// Knots of the variational transfer function.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knots: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ContractArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', default_values_t = vec![100, 400, 1600])]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Points of the grid holding the true density.
    #[arg(long, default_value_t = 2048, value_parser = grid_points())]
    pub grid: usize,
    #[arg(long, default_value_t = 3000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn: usize,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    /// Smoothness used for the reference rate.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    /// Tail exponent used for the reference rate.
    #[arg(long, default_value_t = 0.0)]
    pub q: f64,
}
