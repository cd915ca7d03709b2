//! Routes parsed commands to the library and turns the results into reports.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use nllvm_core::gp_prior::{GPPriorConfig, RescaleDist};
use nllvm_core::gpivi::{
    hellinger_risk, optimize, psi_diagnostic, q_density, risk_integral, OptimizeConfig, VariationalInit,
};
use nllvm_core::grid::{divergence, DivergenceKind, GridDensity, GridSpec};
use nllvm_core::harness::{self, Chi2Model, RiskExperiment};
use nllvm_core::hi_order::{approx_order_experiment, kl_rate_experiment, log_spaced};
use nllvm_core::models::{exact_posterior, posterior_moments, quadrature_posterior, BayesModel, Logistic1D, MeanPrior, NormalMean};
use nllvm_core::posterior::{contraction_experiment, fit_mcmc, predictive_density, McmcConfig};
use nllvm_core::report::{CheckReport, SlopeReport};
use nllvm_core::{presets, rng, Error};

use crate::args::{Check, ContractArgs, EstimateArgs, InitKind, ModelKind, Preset, VerifyArgs, ViArgs};
use crate::data::load_csv;
use crate::report::{Report, Table};

/// A failure before any experiment ran; reported as a usage error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl From<crate::data::DataError> for UsageError {
    fn from(e: crate::data::DataError) -> Self {
        UsageError(e.to_string())
    }
}

/// What a command produced: the report, plot data, or a usage problem.
pub type Outcome = Result<(Report, Table), UsageError>;

fn config_of(args: &impl Serialize) -> BTreeMap<String, Value> {
    match serde_json::to_value(args).expect("arguments serialize") {
        Value::Object(map) => map.into_iter().collect(),
        _ => unreachable!("argument structs serialize to objects"),
    }
}

/// Parameter errors mean the flags were unusable; anything else is a failed run.
fn settle(mut report: Report, table: Table, result: Result<(), Error>) -> Outcome {
    match result {
        Ok(()) => Ok((report, table)),
        Err(Error::Parameter(msg)) => Err(UsageError(msg)),
        Err(e) => {
            tracing::error!("{e}");
            report.pass = Some(false);
            report.error = Some(e.to_string());
            Ok((report, table))
        }
    }
}

fn sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn estimate(args: &EstimateArgs) -> Outcome {
    let data = load_csv(&args.data)?;
    let mut report = Report::new("estimate", config_of(args), args.common.seed);
    let mut table = Table::new(&["y", "density"]);
    let res = (|| {
        let cfg = GPPriorConfig { rescale: RescaleDist::Fixed(args.rescale), ..Default::default() };
        let mcmc = McmcConfig {
            iters: args.iters,
            burn_in: args.burn,
            thin: args.thin,
            seed: args.common.seed,
            n_knots: args.knots,
            ..Default::default()
        };
        let fit = fit_mcmc(&data, &cfg, &mcmc)?;
        // Window holding every kept mixture out to 8.5 bandwidths.
        let (lo, hi) = fit.states.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            let mn = s.mu_values.iter().copied().fold(f64::INFINITY, f64::min);
            let mx = s.mu_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo.min(mn - 8.5 * s.sigma), hi.max(mx + 8.5 * s.sigma))
        });
        let grid = GridSpec::new(lo, hi, args.grid)?;
        let p = predictive_density(&fit, &grid)?;
        let sigmas: Vec<f64> = fit.states.iter().map(|s| s.sigma).collect();
        report.metric("n", data.len() as f64);
        report.metric("kept_states", fit.states.len() as f64);
        report.metric("sigma_mean", sigmas.iter().sum::<f64>() / sigmas.len() as f64);
        report.metric("sigma_sd", sd(&sigmas));
        report.metric("rescale", fit.rescale);
        report.metric("sigma_step", fit.sigma_step);
        for (k, v) in &fit.acceptance {
            report.metric(&format!("acceptance_{k}"), *v);
        }
        report.metric("log_post_final", fit.log_post_trace.last().copied().unwrap_or(f64::NAN));
        report.metric("predictive_mean", p.mean());
        report.metric("predictive_sd", p.variance().sqrt());
        for (i, v) in p.values().iter().enumerate() {
            table.push(&[p.x(i), *v]);
        }
        Ok(())
    })();
    settle(report, table, res)
}

fn vi_model(args: &ViArgs) -> Result<Box<dyn BayesModel>, Error> {
    let prior = MeanPrior::Normal { mean: args.prior_mean, sd: args.prior_sd };
    Ok(match args.model {
        ModelKind::NormalMean => Box::new(NormalMean::new(args.noise_sd, prior, args.theta_star)?),
        ModelKind::Logistic => Box::new(Logistic1D::new(prior, args.theta_star)?),
    })
}

pub fn vi(args: &ViArgs) -> Outcome {
    let model = vi_model(args).map_err(|e| UsageError(e.to_string()))?;
    let data = match &args.data {
        Some(path) => load_csv(path)?,
        None => model.sample_data(args.n, &mut rng::task_rng(args.common.seed, "vi-data", 0)),
    };
    let mut report = Report::new("vi", config_of(args), args.common.seed);
    let mut table = Table::new(&["theta", "q", "posterior"]);
    let res = (|| {
        let init = match args.init {
            InitKind::MomentMatched => VariationalInit::MomentMatched,
            InitKind::Prior => VariationalInit::Prior,
            InitKind::Random => VariationalInit::Random,
        };
        let opt = OptimizeConfig { iters: args.iters, seed: args.common.seed, init };
        let fit = optimize(&*model, &data, args.alpha, args.knots, &opt)?;
        let psi = psi_diagnostic(&fit.params, &*model, &data, args.alpha)?;
        let (m, v) = posterior_moments(&*model, &data, args.alpha)?;
        let grid = GridSpec::new(m - 12.0 * v.sqrt(), m + 12.0 * v.sqrt(), args.grid)?;
        let (post, exact) = match exact_posterior(&*model, &data, args.alpha, &grid) {
            Some(p) => (p?, true),
            None => (quadrature_posterior(&*model, &data, args.alpha, &grid)?, false),
        };
        let q = q_density(&fit.params, &grid)?;
        report.metric("n", data.len() as f64);
        report.metric("objective", fit.objective);
        report.metric("initial_objective", fit.initial_objective);
        report.metric("sweeps", fit.sweeps as f64);
        report.metric("converged", f64::from(u8::from(fit.converged)));
        report.metric("stalled", f64::from(u8::from(fit.stalled)));
        report.metric("bandwidth", fit.params.sigma());
        report.metric("q_mean", q.mean());
        report.metric("q_sd", q.variance().sqrt());
        report.metric("posterior_mean", m);
        report.metric("posterior_sd", v.sqrt());
        report.metric("posterior_exact", f64::from(u8::from(exact)));
        report.metric("kl_to_posterior", divergence(DivergenceKind::Kl, &q, &post)?);
        report.metric("model_fit", psi.model_fit);
        report.metric("prior_kl", psi.prior_kl);
        report.metric("psi", psi.psi);
        if args.alpha < 1.0 {
            report.metric("risk_integral", risk_integral(&fit.params, &*model, args.alpha)?);
        }
        report.metric("hellinger_risk", hellinger_risk(&fit.params, &*model)?);
        for i in 0..grid.n {
            table.push(&[grid.x(i), q.values()[i], post.values()[i]]);
        }
        Ok(())
    })();
    settle(report, table, res)
}

fn preset(p: Preset, grid_n: usize) -> Result<GridDensity, Error> {
    let window = || GridSpec::new(-1.0, 2.0, grid_n);
    match p {
        Preset::TruncatedNormal => presets::truncated_normal(window()?, 0.5, 0.1, 0.0, 1.0),
        Preset::WideTruncatedNormal => presets::truncated_normal(window()?, 0.5, 0.25, 0.0, 1.0),
        Preset::Bimodal => presets::bimodal(window()?),
        Preset::WideBump => presets::wide_bump(),
        Preset::KlMixture => presets::kl_mixture(),
    }
}

fn check_table(r: &CheckReport, report: &mut Report) -> Table {
    report.metric("trials", r.trials as f64);
    report.metric("violations", r.violations as f64);
    report.metric("worst_margin", r.worst_margin);
    report.metrics_from(&r.metrics);
    report.pass = Some(r.pass);
    let mut t = Table::new(&["metric", "value"]);
    for (k, v) in &r.metrics {
        t.push_labeled(Some(k), &[*v]);
    }
    t
}

fn slope_table(r: &SlopeReport, report: &mut Report) -> Table {
    report.metric("slope", r.slope);
    report.metric("r2", r.r2);
    if let Some(t) = r.target {
        report.metric("target", t);
    }
    report.flags.extend(r.flags.iter().cloned());
    report.pass = Some(r.pass);
    let mut t = Table::new(&["x", "y"]);
    for (x, y) in r.xs.iter().zip(&r.ys) {
        t.push(&[*x, *y]);
    }
    t
}

/// Fills every unset flag the check reads with its default.
fn resolve(a: &mut VerifyArgs) {
    let default_sigmas = || log_spaced(0.1, 0.01, 9);
    match a.check {
        Check::FbetaEquivalence => {
            a.trials.get_or_insert(20);
            a.sigma.get_or_insert(0.03);
        }
        Check::ApproxOrder | Check::KlRate => {
            a.f0.get_or_insert(if a.check == Check::ApproxOrder { Preset::WideBump } else { Preset::KlMixture });
            a.j.get_or_insert(0);
            a.sigmas.get_or_insert_with(default_sigmas);
        }
        Check::HellingerBound => {
            a.trials.get_or_insert(200);
        }
        Check::LogsupBound => {
            a.f0.get_or_insert(Preset::WideTruncatedNormal);
            a.sigma.get_or_insert(0.1);
            a.deltas.get_or_insert_with(|| vec![0.05, 0.1, 0.2]);
            a.trials.get_or_insert(50);
        }
        Check::L1Support => {
            a.f0.get_or_insert(Preset::TruncatedNormal);
            a.eps.get_or_insert(0.05);
        }
        Check::MixtureIdentity => {
            a.trials.get_or_insert(10);
            a.sigmas.get_or_insert_with(|| vec![0.02, 0.1]);
        }
        Check::Chi2Limit => {
            a.n.get_or_insert(10_000);
            a.reps.get_or_insert(2000);
        }
        Check::RestrictedKl => {
            a.n_list.get_or_insert_with(|| vec![100, 1000, 10_000]);
            a.reps.get_or_insert(200);
            a.m_bound.get_or_insert(8.0);
            a.theta_star.get_or_insert(0.0);
        }
        Check::RiskBound | Check::RiskDecay => {
            let bound = a.check == Check::RiskBound;
            a.n_list.get_or_insert_with(|| if bound { vec![50, 200, 800] } else { vec![50, 200, 800, 3200] });
            a.alphas.get_or_insert_with(|| if bound { vec![0.5, 0.99] } else { vec![0.5] });
            a.reps.get_or_insert(20);
            a.theta_star.get_or_insert(0.3);
            a.d_const.get_or_insert(2.0);
            a.knots.get_or_insert(16);
        }
    }
    if matches!(a.f0, Some(Preset::TruncatedNormal | Preset::WideTruncatedNormal | Preset::Bimodal)) {
        a.grid.get_or_insert(3001);
    }
}

pub fn verify(args: &VerifyArgs) -> Outcome {
    let mut a = args.clone();
    resolve(&mut a);
    let seed = a.common.seed;
    let mut report = Report::new(&format!("verify {}", a.check.name()), config_of(&a), seed);
    let mut table = Table::new(&[]);
    let res = (|| {
        let f0 = a.f0.map(|p| preset(p, a.grid.unwrap_or(3001))).transpose()?;
        let risk = || -> Result<RiskExperiment, Error> {
            let model = NormalMean::conjugate(1.0, 0.0, 1.0, a.theta_star.unwrap_or(0.3))?;
            let mut exp = RiskExperiment::new(model, a.n_list.clone().unwrap_or_default(), a.alphas.clone().unwrap_or_default(), seed);
            exp.reps = a.reps.unwrap_or(exp.reps);
            exp.d_const = a.d_const.unwrap_or(exp.d_const);
            exp.knots = a.knots.unwrap_or(exp.knots);
            Ok(exp)
        };
        let (trials, sigma) = (a.trials.unwrap_or(0), a.sigma.unwrap_or(0.0));
        table = match a.check {
            Check::FbetaEquivalence => check_table(&harness::fbeta_equivalence_check(trials, sigma, seed)?, &mut report),
            Check::ApproxOrder | Check::KlRate => {
                let (f0, j, sigmas) = (f0.as_ref().expect("resolved"), a.j.unwrap_or(0), a.sigmas.as_deref().unwrap_or(&[]));
                let r = if a.check == Check::ApproxOrder {
                    approx_order_experiment(f0, j, sigmas)?
                } else {
                    kl_rate_experiment(f0, j, sigmas)?
                };
                slope_table(&r, &mut report)
            }
            Check::HellingerBound => check_table(&harness::check_hellinger_bound(trials, seed)?, &mut report),
            Check::LogsupBound => {
                let deltas = a.deltas.as_deref().unwrap_or(&[]);
                check_table(&harness::check_logsup_bound(f0.as_ref().expect("resolved"), sigma, deltas, trials, seed)?, &mut report)
            }
            Check::L1Support => {
                check_table(&harness::l1_support_search(f0.as_ref().expect("resolved"), a.eps.unwrap_or(0.05))?, &mut report)
            }
            Check::MixtureIdentity => {
                check_table(&harness::mixture_identity_check(trials, a.sigmas.as_deref().unwrap_or(&[]), seed)?, &mut report)
            }
            Check::Chi2Limit => check_table(
                &harness::chi2_limit_experiment(a.n.unwrap_or(0), a.reps.unwrap_or(0), &Chi2Model::default(), seed)?,
                &mut report,
            ),
            Check::RestrictedKl => {
                let model = NormalMean::conjugate(1.0, 0.0, 1.0, a.theta_star.unwrap_or(0.0))?;
                let r = harness::restricted_kl_experiment(
                    &model,
                    a.n_list.as_deref().unwrap_or(&[]),
                    a.reps.unwrap_or(0),
                    a.m_bound.unwrap_or(8.0),
                    seed,
                )?;
                check_table(&r, &mut report)
            }
            Check::RiskBound => check_table(&harness::risk_bound_experiment(&risk()?)?, &mut report),
            Check::RiskDecay => slope_table(&harness::risk_decay_experiment(&risk()?)?, &mut report),
        };
        Ok(())
    })();
    settle(report, table, res)
}

pub fn contract(args: &ContractArgs) -> Outcome {
    let mut report = Report::new("contract", config_of(args), args.common.seed);
    let mut table = Table::new(&["n", "replicate", "hellinger", "target_rate"]);
    let res = (|| {
        let f0 = presets::recovery_truth(args.grid)?;
        let mcmc = McmcConfig { iters: args.iters, burn_in: args.burn, thin: args.thin, ..Default::default() };
        let r = contraction_experiment(
            &f0,
            &args.n_list,
            args.reps,
            &GPPriorConfig::default(),
            &mcmc,
            args.beta,
            args.q,
            args.common.seed,
        )?;
        report.metric("t", r.t);
        report.metric("slope", r.slope.slope);
        report.metric("r2", r.slope.r2);
        report.metric("target_slope", r.slope.target.unwrap_or(f64::NAN));
        for (n, m) in args.n_list.iter().zip(&r.slope.ys) {
            report.metric(&format!("median_hellinger_n{n}"), *m);
        }
        report.flags.extend(r.slope.flags.iter().cloned());
        report.pass = Some(r.slope.pass);
        for ((n, reps), rate) in args.n_list.iter().zip(&r.hellinger).zip(&r.target_rate) {
            for (i, h) in reps.iter().enumerate() {
                table.push(&[*n as f64, i as f64, *h, *rate]);
            }
        }
        Ok(())
    })();
    settle(report, table, res)
}
