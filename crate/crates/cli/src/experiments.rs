//! The experiment drivers: each consumes a validated config and produces
//! long-format rows.

use kmimo_core::baselines::{detect_direct, herman_ka_trace, naive_ka_od_trace};
use kmimo_core::channel::{
    draw_symbols, noisy_estimate, uplink_observation, ChannelSampler, RngStream, StreamLabel,
};
use kmimo_core::gains::{
    average_projector, kappa_rmt, kappa_suboptimal, optimal_row_distribution, GainReport,
    StepRule,
};
use kmimo_core::kaczmarz::{build_row_distribution, KaSweep};
use kmimo_core::numerics::{eigh, norm_sq, sub_vec};
use kmimo_core::rates::{
    budget_to_iterations, mc_ergodic_rates, BudgetPolicy, RateSummary, Regularizer, Scheme,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::Row;
use crate::CliError;

pub struct ExperimentOutput {
    pub rows: Vec<Row>,
    /// Gains runs also emit their reports for the JSON metadata record.
    pub gain_reports: Option<serde_json::Value>,
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    match config.kind {
        ExperimentKind::Gains => run_gains(config),
        ExperimentKind::Convergence => run_convergence(config),
        ExperimentKind::RatesUl => run_rates(config, false),
        ExperimentKind::RatesDl => run_rates(config, true),
        ExperimentKind::Gap => run_gap(config),
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Gain comparison over a grid of user counts: suboptimal vs optimized
/// distribution, the 1/K bound, the random-matrix value, and the projector
/// spectrum under the optimized distribution (spectrum rows reuse the
/// `budget_mk` column as the eigenvalue index).
fn run_gains(config: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &k in &config.k_grid {
        let params = kmimo_core::channel::ChannelParams {
            m: config.m,
            k,
            a: config.a,
            tau: 0.0,
            snr_db: 0.0,
        };
        let sampler = ChannelSampler::<f64>::new(params).map_err(numerical)?;
        let a_mat = sampler.sample(RngStream::new(config.seed, StreamLabel::Channel, 0));
        let label = format!("k={k}");
        let bound = 1.0 / k as f64;
        let sub = kappa_suboptimal(&a_mat).map_err(numerical)?;
        let opt = optimal_row_distribution(
            &a_mat,
            config.opt_iters,
            StepRule::Polyak { target: bound },
        )
        .map_err(numerical)?;
        let pbar = average_projector(&a_mat, &opt.distribution).map_err(numerical)?;
        let spectrum = eigh(&pbar).map_err(numerical)?.values;
        let rmt = kappa_rmt::<f64>(config.m, k);
        for (metric, value) in [
            ("kappa_suboptimal", sub),
            ("kappa_optimal", opt.kappa),
            ("kappa_rmt", rmt),
            ("bound_inv_k", bound),
        ] {
            rows.push(Row {
                scheme: label.clone(),
                snr_db: 0.0,
                budget_mk: 0.0,
                metric: metric.into(),
                value,
                stderr: 0.0,
                trials: 1,
            });
        }
        for (idx, &lambda) in spectrum.iter().enumerate() {
            rows.push(Row {
                scheme: label.clone(),
                snr_db: 0.0,
                budget_mk: (idx + 1) as f64,
                metric: "spectrum".into(),
                value: lambda,
                stderr: 0.0,
                trials: 1,
            });
        }
        reports.push(GainReport {
            kappa_suboptimal: sub,
            kappa_optimal: Some(opt.kappa),
            kappa_closed_form: kmimo_core::gains::kappa_closed_form_ul(&a_mat, 0.0)
                .map_err(numerical)?,
            kappa_rmt: rmt,
            spectrum,
        });
    }
    Ok(ExperimentOutput {
        rows,
        gain_reports: Some(serde_json::to_value(&reports).map_err(numerical)?),
    })
}

/// Per-iteration detection-error traces `||s_t - s0||^2` against the
/// complexity-budget axis, trial-averaged, one curve per scheme and SNR.
fn run_convergence(config: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let mut rows = Vec::new();
    for &snr_db in &config.snr_grid {
        let params = config.channel_params(snr_db);
        let sampler = ChannelSampler::<f64>::new(params).map_err(numerical)?;
        let noise_var = params.noise_var();
        for &scheme in &config.schemes {
            let xi = config.regularizer.xi_ul(noise_var);
            // budgets priced into iteration counts; below-overhead points are skipped
            let mut points: Vec<(f64, u64)> = Vec::new();
            for &b in &config.budget_grid {
                let policy = BudgetPolicy::for_scheme(b, scheme);
                if b < policy.overhead_mk {
                    continue;
                }
                let t = budget_to_iterations(&policy, config.m, config.k, scheme)
                    .map_err(numerical)?;
                points.push((b, t));
            }
            if points.is_empty() {
                continue;
            }
            let checkpoints: Vec<u64> = points.iter().map(|&(_, t)| t).collect();
            let traces: Vec<Vec<f64>> = (0..config.trials)
                .into_par_iter()
                .map(|trial| {
                    trace_one_trial(config, &sampler, scheme, xi, snr_db, &checkpoints, trial)
                })
                .collect::<Result<Vec<_>, _>>()?;
            for (ci, &(budget, _)) in points.iter().enumerate() {
                let n = config.trials as f64;
                let mean = traces.iter().map(|t| t[ci]).sum::<f64>() / n;
                let var =
                    traces.iter().map(|t| (t[ci] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                rows.push(Row {
                    scheme: scheme.name().into(),
                    snr_db,
                    budget_mk: budget,
                    metric: "detection_error".into(),
                    value: mean,
                    stderr: (var / n).sqrt(),
                    trials: config.trials,
                });
            }
        }
    }
    Ok(ExperimentOutput { rows, gain_reports: None })
}

fn trace_one_trial(
    config: &ExperimentConfig,
    sampler: &ChannelSampler<f64>,
    scheme: Scheme,
    xi: f64,
    snr_db: f64,
    checkpoints: &[u64],
    trial: u64,
) -> Result<Vec<f64>, CliError> {
    let seed = config.seed;
    let h = sampler.sample(RngStream::new(seed, StreamLabel::Channel, trial));
    let q = noisy_estimate(&h, config.tau, RngStream::new(seed, StreamLabel::EstimateNoise, trial));
    let s0 = draw_symbols::<f64>(config.k, RngStream::new(seed, StreamLabel::Symbols, trial));
    let y = uplink_observation(&h, &s0, snr_db, RngStream::new(seed, StreamLabel::RxNoise, trial));
    let rows_stream = RngStream::new(seed, StreamLabel::KaRows, trial);
    let err = |estimate: &[num_complex::Complex64]| norm_sq(&sub_vec(estimate, &s0));
    match scheme {
        Scheme::ProposedUl => {
            let dist = build_row_distribution(&q, xi).map_err(numerical)?;
            let b = q.adjoint_mul_vec(&y);
            let mut sweep = KaSweep::new(&q, xi, &b, &dist, 0);
            let mut rng = rows_stream.rng();
            let mut out = Vec::with_capacity(checkpoints.len());
            let mut t = 0;
            for &cp in checkpoints {
                while t < cp {
                    sweep.sample_step(&mut rng);
                    t += 1;
                }
                out.push(err(&sweep.state().v));
            }
            Ok(out)
        }
        Scheme::NaiveOd => {
            let iterates = naive_ka_od_trace(&q, &y, checkpoints, rows_stream).map_err(numerical)?;
            Ok(iterates.iter().map(|s| err(s)).collect())
        }
        Scheme::Herman => {
            let xi_h = xi.max(f64::MIN_POSITIVE);
            let iterates =
                herman_ka_trace(&q, &y, xi_h, checkpoints, rows_stream).map_err(numerical)?;
            Ok(iterates.iter().map(|s| err(s)).collect())
        }
        Scheme::DirectZf | Scheme::DirectMmse => {
            let xi_d = if scheme == Scheme::DirectZf { 0.0 } else { xi };
            let exact = detect_direct(&q, &y, xi_d).map_err(numerical)?;
            Ok(vec![err(&exact); checkpoints.len()])
        }
        other => Err(CliError::Config(format!(
            "scheme '{}' is not a convergence-trace scheme",
            other.name()
        ))),
    }
}

/// Ergodic-rate bounds over the SNR and budget grids.
fn run_rates(config: &ExperimentConfig, downlink: bool) -> Result<ExperimentOutput, CliError> {
    for &scheme in &config.schemes {
        if scheme.is_downlink() != downlink {
            return Err(CliError::Config(format!(
                "scheme '{}' does not match the {} experiment",
                scheme.name(),
                if downlink { "downlink" } else { "uplink" }
            )));
        }
    }
    let mut rows = Vec::new();
    for &snr_db in &config.snr_grid {
        let params = config.channel_params(snr_db);
        for &scheme in &config.schemes {
            let budgets: &[f64] = if scheme.cost_per_iteration(config.m, config.k).is_some() {
                &config.budget_grid
            } else {
                &[0.0]
            };
            for &budget in budgets {
                let policy = if budget == 0.0 {
                    BudgetPolicy::new(0.0, 0.0)
                } else {
                    BudgetPolicy::for_scheme(budget, scheme)
                };
                let summary = mc_ergodic_rates(
                    &params,
                    scheme,
                    config.regularizer,
                    &policy,
                    config.trials,
                    config.seed,
                )
                .map_err(numerical)?;
                push_rate_rows(&mut rows, &summary, budget, config.k);
            }
        }
    }
    Ok(ExperimentOutput { rows, gain_reports: None })
}

fn push_rate_rows(rows: &mut Vec<Row>, s: &RateSummary, budget: f64, k: usize) {
    let kf = k as f64;
    for (metric, value, stderr) in [
        ("rate_ub_per_user", s.mean_upper, s.mean_upper_se),
        ("rate_lb_per_user", s.mean_lower, s.mean_lower_se),
        ("sum_rate_ub", s.sum_upper, kf * s.mean_upper_se),
        ("sum_rate_lb", s.sum_lower, kf * s.mean_lower_se),
    ] {
        rows.push(Row {
            scheme: s.scheme.clone(),
            snr_db: s.snr_db,
            budget_mk: budget,
            metric: metric.into(),
            value,
            stderr,
            trials: s.trials,
        });
    }
}

/// Normalized gap to the matching exact scheme across the budget grid; the
/// upper-bound gap uses paired per-trial differences (both runs share the
/// master seed, hence the channel draws).
fn run_gap(config: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let mut rows = Vec::new();
    for &snr_db in &config.snr_grid {
        let params = config.channel_params(snr_db);
        for &scheme in &config.schemes {
            let reference_scheme = match (scheme.is_downlink(), config.regularizer) {
                (false, Regularizer::Zf) => Scheme::DirectZf,
                (false, _) => Scheme::DirectMmse,
                (true, Regularizer::Zf) => Scheme::DirectZfbf,
                (true, _) => Scheme::DirectRzfbf,
            };
            if scheme.cost_per_iteration(config.m, config.k).is_none() {
                return Err(CliError::Config(format!(
                    "gap experiments need an iterative scheme, got '{}'",
                    scheme.name()
                )));
            }
            let reference = mc_ergodic_rates(
                &params,
                reference_scheme,
                config.regularizer,
                &BudgetPolicy::new(0.0, 0.0),
                config.trials,
                config.seed,
            )
            .map_err(numerical)?;
            push_rate_rows(&mut rows, &reference, 0.0, config.k);
            for &budget in &config.budget_grid {
                let summary = mc_ergodic_rates(
                    &params,
                    scheme,
                    config.regularizer,
                    &BudgetPolicy::for_scheme(budget, scheme),
                    config.trials,
                    config.seed,
                )
                .map_err(numerical)?;
                let (gap_ub, gap_ub_se) = paired_gap(&reference, &summary);
                let gap_lb = (reference.mean_lower - summary.mean_lower) / reference.mean_lower;
                let gap_lb_se =
                    (reference.mean_lower_se + summary.mean_lower_se) / reference.mean_lower;
                for (metric, value, stderr) in
                    [("gap_ub", gap_ub, gap_ub_se), ("gap_lb", gap_lb, gap_lb_se)]
                {
                    rows.push(Row {
                        scheme: scheme.name().into(),
                        snr_db,
                        budget_mk: budget,
                        metric: metric.into(),
                        value,
                        stderr,
                        trials: config.trials,
                    });
                }
            }
        }
    }
    Ok(ExperimentOutput { rows, gain_reports: None })
}

fn paired_gap(reference: &RateSummary, candidate: &RateSummary) -> (f64, f64) {
    let n = reference.per_trial_mean_upper.len() as f64;
    let diffs: Vec<f64> = reference
        .per_trial_mean_upper
        .iter()
        .zip(&candidate.per_trial_mean_upper)
        .map(|(r, s)| r - s)
        .collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean / reference.mean_upper, (var / n).sqrt() / reference.mean_upper)
}
