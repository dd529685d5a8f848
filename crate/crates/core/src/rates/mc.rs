//! Monte-Carlo estimation of the ergodic-rate bounds.
//!
//! Each trial draws a fresh `(H, Q)` pair, runs the selected scheme to its
//! budgeted iteration count, extracts the effective linear map (for the
//! randomized schemes, by replaying the logged row indices through
//! unit-input sweeps), and feeds the resulting interference sample into
//! both bound estimators. Trials are independent units of work; they may be
//! computed in parallel but are always reduced in trial order, so results
//! are byte-identical for a fixed master seed regardless of thread count.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    budget_to_iterations, interference_dl, interference_ul, rate_lower, rate_upper_sample,
    BudgetPolicy, InterferenceSample, RateAccumulators, RateError,
};
use crate::channel::{
    draw_symbols, noisy_estimate, uplink_observation, ChannelParams, ChannelSampler, RngStream,
    StreamLabel,
};
use crate::kaczmarz::{
    dl_precode, replay_linear_map, row_norm_distribution, ul_detect, FactorizedLinearMap,
};
use crate::numerics::{norm, norm_sq, Cholesky, ComplexMatrix};
use crate::scalar::Scalar;

/// Total downlink transmit power (the per-realization normalization target).
pub const DL_TOTAL_POWER: f64 = 1.0;

/// Transceiver computation under evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scheme {
    ProposedUl,
    ProposedDl,
    NaiveOd,
    Herman,
    DirectZf,
    DirectMmse,
    DirectZfbf,
    DirectRzfbf,
    Mrc,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ProposedUl => "proposed-ul",
            Scheme::ProposedDl => "proposed-dl",
            Scheme::NaiveOd => "naive-od",
            Scheme::Herman => "herman",
            Scheme::DirectZf => "direct-zf",
            Scheme::DirectMmse => "direct-mmse",
            Scheme::DirectZfbf => "direct-zfbf",
            Scheme::DirectRzfbf => "direct-rzfbf",
            Scheme::Mrc => "mrc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "proposed-ul" => Scheme::ProposedUl,
            "proposed-dl" => Scheme::ProposedDl,
            "naive-od" => Scheme::NaiveOd,
            "herman" => Scheme::Herman,
            "direct-zf" => Scheme::DirectZf,
            "direct-mmse" => Scheme::DirectMmse,
            "direct-zfbf" => Scheme::DirectZfbf,
            "direct-rzfbf" => Scheme::DirectRzfbf,
            "mrc" => Scheme::Mrc,
            _ => return None,
        })
    }

    pub fn is_downlink(self) -> bool {
        matches!(self, Scheme::ProposedDl | Scheme::DirectZfbf | Scheme::DirectRzfbf)
    }

    /// Cost of one iteration in multiply-accumulate units; `None` for the
    /// exact schemes, which do not iterate.
    pub fn cost_per_iteration(self, m: usize, k: usize) -> Option<u64> {
        match self {
            Scheme::ProposedUl | Scheme::ProposedDl => Some(2 * m as u64),
            Scheme::NaiveOd => Some(2 * k as u64),
            Scheme::Herman => Some(2 * k as u64 + 2),
            Scheme::DirectZf
            | Scheme::DirectMmse
            | Scheme::DirectZfbf
            | Scheme::DirectRzfbf
            | Scheme::Mrc => None,
        }
    }

    /// Fixed pre-iteration cost in MK units: the sampling distribution plus,
    /// for the uplink/downlink sweeps, one adjoint or forward product.
    pub fn default_overhead_mk(self) -> f64 {
        match self {
            Scheme::ProposedUl | Scheme::ProposedDl => 2.0,
            Scheme::NaiveOd | Scheme::Herman => 1.0,
            _ => 0.0,
        }
    }
}

/// Regularization choice for the schemes that take one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Regularizer {
    /// `xi = 0` (zero-forcing limit).
    Zf,
    /// `xi` matched to the operating noise level.
    Mmse,
    /// Fixed numeric value.
    Fixed(f64),
}

impl Regularizer {
    /// Uplink regularizer: the noise variance per unit symbol power.
    pub fn xi_ul(self, noise_var: f64) -> f64 {
        match self {
            Regularizer::Zf => 0.0,
            Regularizer::Mmse => noise_var,
            Regularizer::Fixed(v) => v,
        }
    }

    /// Downlink regularizer `K sigma² / p_tx` in the matched case.
    pub fn xi_dl(self, k: usize, noise_var_dl: f64) -> f64 {
        match self {
            Regularizer::Zf => 0.0,
            Regularizer::Mmse => k as f64 * noise_var_dl / DL_TOTAL_POWER,
            Regularizer::Fixed(v) => v,
        }
    }
}

/// Monte-Carlo estimates of both bounds, with accounting metadata.
#[derive(Clone, Debug, Serialize)]
pub struct RateSummary {
    pub scheme: String,
    pub snr_db: f64,
    pub budget_mk: f64,
    pub overhead_mk: f64,
    pub iterations: u64,
    pub trials: u64,
    /// Per-user upper bound (mean of per-sample log terms) and its
    /// standard error.
    pub per_user_upper: Vec<f64>,
    pub per_user_upper_se: Vec<f64>,
    /// Per-user moment-based lower bound and its jackknife standard error.
    pub per_user_lower: Vec<f64>,
    pub per_user_lower_se: Vec<f64>,
    /// User-averaged bounds (the figures' per-user spectral efficiency).
    pub mean_upper: f64,
    pub mean_upper_se: f64,
    pub mean_lower: f64,
    pub mean_lower_se: f64,
    pub sum_upper: f64,
    pub sum_lower: f64,
    /// User-averaged upper-bound term of each trial, in trial order; feeds
    /// paired comparisons across schemes sharing a master seed.
    #[serde(skip)]
    pub per_trial_mean_upper: Vec<f64>,
}

struct TrialRecord {
    diag: Vec<Complex<f64>>,
    abs2_diag: Vec<f64>,
    offdiag: Vec<f64>,
    sigma2: Vec<f64>,
    upper_terms: Vec<f64>,
}

/// Runs `trials` independent channel draws of `scheme` at the budgeted
/// iteration count and returns both bound estimates. Pure function of its
/// arguments: reruns are byte-identical.
pub fn mc_ergodic_rates(
    params: &ChannelParams,
    scheme: Scheme,
    regularizer: Regularizer,
    budget: &BudgetPolicy,
    trials: u64,
    master_seed: u64,
) -> Result<RateSummary, RateError> {
    if trials < 2 {
        return Err(RateError::InsufficientSamples(trials));
    }
    params
        .validate()
        .map_err(|e| RateError::trial(0, "channel parameters", e))?;
    let (m, k) = (params.m, params.k);
    let iterations = budget_to_iterations(budget, m, k, scheme)?;
    let sampler = ChannelSampler::<f64>::new(*params)
        .map_err(|e| RateError::trial(0, "covariance factorization", e))?;

    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|trial| run_trial(&sampler, params, scheme, regularizer, iterations, master_seed, trial))
        .collect::<Result<Vec<_>, _>>()?;

    // Upper bound: running mean/variance of the per-sample log terms.
    let n = trials as f64;
    let mut per_user_upper = vec![0.0; k];
    let mut per_user_upper_sq = vec![0.0; k];
    let mut mean_term_sum = 0.0;
    let mut mean_term_sq = 0.0;
    let mut per_trial_mean_upper = Vec::with_capacity(records.len());
    let mut acc = RateAccumulators::<f64>::new(k);
    for rec in &records {
        let mut user_avg = 0.0;
        for user in 0..k {
            let v = rec.upper_terms[user];
            per_user_upper[user] += v;
            per_user_upper_sq[user] += v * v;
            user_avg += v;
        }
        user_avg /= k as f64;
        per_trial_mean_upper.push(user_avg);
        mean_term_sum += user_avg;
        mean_term_sq += user_avg * user_avg;
        acc.count += 1;
        for user in 0..k {
            acc.sum_tkk[user] += rec.diag[user];
            acc.sum_abs2_tkk[user] += rec.abs2_diag[user];
            acc.sum_offdiag[user] += rec.offdiag[user];
            acc.sum_sigma2[user] += rec.sigma2[user];
        }
    }
    let mut per_user_upper_se = vec![0.0; k];
    for user in 0..k {
        per_user_upper[user] /= n;
        let var = (per_user_upper_sq[user] / n - per_user_upper[user].powi(2)).max(0.0);
        per_user_upper_se[user] = (var / (n - 1.0)).sqrt();
    }
    let mean_upper = mean_term_sum / n;
    let mean_upper_se = ((mean_term_sq / n - mean_upper.powi(2)).max(0.0) / (n - 1.0)).sqrt();

    let per_user_lower = rate_lower(&acc)?;
    let mean_lower = per_user_lower.iter().sum::<f64>() / k as f64;

    // Jackknife standard errors for the moment-based bound: recompute the
    // rate from the leave-one-out sums, user by user.
    let mut per_user_lower_se = vec![0.0; k];
    let mut jack_mean = vec![0.0; records.len()];
    let mut loo = vec![0.0; records.len()];
    let n1 = n - 1.0;
    for (user, se_slot) in per_user_lower_se.iter_mut().enumerate() {
        for (slot, rec) in loo.iter_mut().zip(&records) {
            let mean_t = (acc.sum_tkk[user] - rec.diag[user]) / Complex::new(n1, 0.0);
            let signal = mean_t.norm_sqr();
            let e_abs2 = (acc.sum_abs2_tkk[user] - rec.abs2_diag[user]) / n1;
            let var = (e_abs2 - signal).max(0.0);
            let off = (acc.sum_offdiag[user] - rec.offdiag[user]) / n1;
            let sig2 = (acc.sum_sigma2[user] - rec.sigma2[user]) / n1;
            let denom = var + off + sig2;
            *slot = if denom > 0.0 { (1.0 + signal / denom).log2() } else { 0.0 };
        }
        *se_slot = jackknife_se(&loo);
        for (jm, &r) in jack_mean.iter_mut().zip(&loo) {
            *jm += r / k as f64;
        }
    }
    let mean_lower_se = jackknife_se(&jack_mean);

    Ok(RateSummary {
        scheme: scheme.name().to_string(),
        snr_db: params.snr_db,
        budget_mk: budget.budget_mk,
        overhead_mk: budget.overhead_mk,
        iterations,
        trials,
        sum_upper: per_user_upper.iter().sum(),
        sum_lower: per_user_lower.iter().sum(),
        per_user_upper,
        per_user_upper_se,
        per_user_lower,
        per_user_lower_se,
        mean_upper,
        mean_upper_se,
        mean_lower,
        mean_lower_se,
        per_trial_mean_upper,
    })
}

fn jackknife_se(loo: &[f64]) -> f64 {
    let n = loo.len() as f64;
    let mean = loo.iter().sum::<f64>() / n;
    let ss = loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    ((n - 1.0) / n * ss).sqrt()
}

fn run_trial(
    sampler: &ChannelSampler<f64>,
    params: &ChannelParams,
    scheme: Scheme,
    regularizer: Regularizer,
    iterations: u64,
    master_seed: u64,
    trial: u64,
) -> Result<TrialRecord, RateError> {
    let k = params.k;
    let h = sampler.sample(RngStream::new(master_seed, StreamLabel::Channel, trial));
    let q = noisy_estimate(&h, params.tau, RngStream::new(master_seed, StreamLabel::EstimateNoise, trial));
    let noise_var = params.noise_var();
    let snr = if noise_var > 0.0 { 1.0 / noise_var } else { f64::INFINITY };
    let rows_stream = RngStream::new(master_seed, StreamLabel::KaRows, trial);
    let symbols_stream = RngStream::new(master_seed, StreamLabel::Symbols, trial);
    let rx_stream = RngStream::new(master_seed, StreamLabel::RxNoise, trial);

    let sample: InterferenceSample<f64> = match scheme {
        Scheme::DirectZf | Scheme::DirectMmse => {
            let xi = if scheme == Scheme::DirectZf { 0.0 } else { noise_var };
            let g = crate::numerics::gram(&q).add_diag(xi);
            let inv = Cholesky::factor(&g)
                .map_err(|e| RateError::trial(trial, "direct detector factorization", e))?
                .inverse();
            let map = FactorizedLinearMap::from_matrix(inv);
            interference_ul(&map, &q, &h, snr)?
        }
        Scheme::Mrc => {
            let map = FactorizedLinearMap::from_matrix(ComplexMatrix::identity(k));
            interference_ul(&map, &q, &h, snr)?
        }
        Scheme::ProposedUl => {
            let xi = regularizer.xi_ul(noise_var);
            let s0 = draw_symbols::<f64>(k, symbols_stream);
            let y = uplink_observation(&h, &s0, params.snr_db, rx_stream);
            let run = ul_detect(&q, &y, xi, iterations, rows_stream)
                .map_err(|e| RateError::trial(trial, "ul_detect", e))?;
            let map = replay_linear_map(&q, xi, &run.indices, &[iterations])
                .map_err(|e| RateError::trial(trial, "replay_linear_map", e))?
                .remove(0);
            interference_ul(&map, &q, &h, snr)?
        }
        Scheme::NaiveOd => {
            let (g, row_norms) = naive_operator(&q, iterations, rows_stream)
                .map_err(|e| RateError::trial(trial, "naive-od operator", e))?;
            let t = g.mul_mat(&h);
            let sigma2 = row_norms.iter().map(|&r| r / snr).collect();
            InterferenceSample { t, sigma2 }
        }
        Scheme::Herman => {
            let xi = regularizer.xi_ul(noise_var).max(f64::MIN_POSITIVE);
            let (g, row_norms) = herman_operator(&q, xi, iterations, rows_stream)
                .map_err(|e| RateError::trial(trial, "herman operator", e))?;
            let t = g.mul_mat(&h);
            let sigma2 = row_norms.iter().map(|&r| r / snr).collect();
            InterferenceSample { t, sigma2 }
        }
        Scheme::ProposedDl => {
            let sigma2_dl = params.noise_var_dl();
            let xi = regularizer.xi_dl(k, sigma2_dl);
            let s = draw_symbols::<f64>(k, symbols_stream);
            let run = dl_precode(&q, &s, xi, iterations, rows_stream)
                .map_err(|e| RateError::trial(trial, "dl_precode", e))?;
            let map = replay_linear_map(&q, xi, &run.indices, &[iterations])
                .map_err(|e| RateError::trial(trial, "replay_linear_map", e))?
                .remove(0);
            let raw = norm(&run.x);
            let beta = if raw > 0.0 { DL_TOTAL_POWER.sqrt() / raw } else { 0.0 };
            interference_dl(&map, &q, &h, beta, sigma2_dl)?
        }
        Scheme::DirectZfbf | Scheme::DirectRzfbf => {
            let sigma2_dl = params.noise_var_dl();
            let xi = if scheme == Scheme::DirectZfbf {
                0.0
            } else {
                Regularizer::Mmse.xi_dl(k, sigma2_dl)
            };
            let s = draw_symbols::<f64>(k, symbols_stream);
            let out = crate::baselines::precode_direct(&q, &s, xi, DL_TOTAL_POWER)
                .map_err(|e| RateError::trial(trial, "precode_direct", e))?;
            let g = crate::numerics::gram(&q).add_diag(xi);
            let inv = Cholesky::factor(&g)
                .map_err(|e| RateError::trial(trial, "direct precoder factorization", e))?
                .inverse();
            let map = FactorizedLinearMap::from_matrix(inv);
            interference_dl(&map, &q, &h, out.beta, sigma2_dl)?
        }
    };

    let upper_terms = rate_upper_sample(&sample)?;
    let mut diag = Vec::with_capacity(k);
    let mut abs2_diag = Vec::with_capacity(k);
    let mut offdiag = Vec::with_capacity(k);
    for user in 0..k {
        let d = sample.t[(user, user)];
        diag.push(d);
        abs2_diag.push(d.norm_sqr());
        let mut off = 0.0;
        for other in 0..k {
            if other != user {
                off += sample.t[(user, other)].norm_sqr();
            }
        }
        offdiag.push(off);
    }
    Ok(TrialRecord { diag, abs2_diag, offdiag, sigma2: sample.sigma2, upper_terms })
}

/// Effective `K x M` map of the plain row-action iteration on `Q s = y`
/// after `iterations` steps from zero, via the rank-1 operator recursion;
/// also returns the squared row norms of the map.
fn naive_operator<T: Scalar>(
    q: &ComplexMatrix<T>,
    iterations: u64,
    stream: RngStream,
) -> Result<(ComplexMatrix<T>, Vec<T>), crate::kaczmarz::KaczmarzError> {
    let (m, k) = (q.rows(), q.cols());
    let dist = row_norm_distribution(q)?;
    let mut rng = stream.rng();
    let mut g = ComplexMatrix::<T>::zeros(k, m);
    let mut a_row = vec![Complex::new(T::zero(), T::zero()); k];
    let mut tmp = vec![Complex::new(T::zero(), T::zero()); m];
    for _ in 0..iterations {
        let r = dist.sample(&mut rng);
        let w = Complex::new(dist.weight(r), T::zero());
        for i in 0..k {
            a_row[i] = q[(r, i)];
        }
        // tmp = a_rᴴ G  (row vector over the m columns of G)
        for (j, slot) in tmp.iter_mut().enumerate() {
            let col = g.col(j);
            let mut accum = Complex::new(T::zero(), T::zero());
            for i in 0..k {
                accum = accum + a_row[i] * col[i];
            }
            *slot = accum;
        }
        // G <- G - a_r (tmp / w); then column r gains a_r / w
        for (j, &t) in tmp.iter().enumerate() {
            let coef = t / w;
            let col = g.col_mut(j);
            for i in 0..k {
                col[i] = col[i] - a_row[i].conj() * coef;
            }
        }
        let col_r = g.col_mut(r);
        for i in 0..k {
            col_r[i] = col_r[i] + a_row[i].conj() / w;
        }
    }
    let row_norms = (0..k).map(|i| norm_sq(&g.row_to_vec(i))).collect();
    Ok((g, row_norms))
}

/// Effective symbol-part map of the augmented consistent iteration on
/// `[Q, sqrt(xi) I_M] z = y`, plus its squared row norms. The noise block
/// is kept transposed so both its read and write patterns stay contiguous.
fn herman_operator<T: Scalar>(
    q: &ComplexMatrix<T>,
    xi: T,
    iterations: u64,
    stream: RngStream,
) -> Result<(ComplexMatrix<T>, Vec<T>), crate::kaczmarz::KaczmarzError> {
    let (m, k) = (q.rows(), q.cols());
    let sqrt_xi = Complex::new(xi.sqrt(), T::zero());
    let mut weights = vec![xi; m];
    for j in 0..k {
        for (i, z) in q.col(j).iter().enumerate() {
            weights[i] = weights[i] + z.norm_sqr();
        }
    }
    let dist = crate::kaczmarz::RowDistribution::from_weights(weights)?;
    let mut rng = stream.rng();
    // gs maps y to the symbol part; gn_t is the noise part stored transposed
    let mut gs = ComplexMatrix::<T>::zeros(k, m);
    let mut gn_t = ComplexMatrix::<T>::zeros(m, m);
    let mut a_conj = vec![Complex::new(T::zero(), T::zero()); k];
    let mut tmp = vec![Complex::new(T::zero(), T::zero()); m];
    for _ in 0..iterations {
        let r = dist.sample(&mut rng);
        let w = Complex::new(dist.weight(r), T::zero());
        for i in 0..k {
            a_conj[i] = q[(r, i)].conj();
        }
        // tmp_j = sum_i q[r,i] gs[i,j] + sqrt_xi * gn[r,j]
        {
            let gn_col = gn_t.col(r);
            for (j, slot) in tmp.iter_mut().enumerate() {
                let col = gs.col(j);
                let mut accum = Complex::new(T::zero(), T::zero());
                for i in 0..k {
                    accum = accum + q[(r, i)] * col[i];
                }
                *slot = accum + sqrt_xi * gn_col[j];
            }
        }
        for (j, &t) in tmp.iter().enumerate() {
            let coef = t / w;
            let col = gs.col_mut(j);
            for i in 0..k {
                col[i] = col[i] - a_conj[i] * coef;
            }
        }
        {
            let gn_col = gn_t.col_mut(r);
            for (j, &t) in tmp.iter().enumerate() {
                gn_col[j] = gn_col[j] - sqrt_xi * (t / w);
            }
        }
        // add a_r e_rᵀ / w on the sparse support
        let col_r = gs.col_mut(r);
        for i in 0..k {
            col_r[i] = col_r[i] + a_conj[i] / w;
        }
        gn_t.col_mut(r)[r] = gn_t.col(r)[r] + sqrt_xi / w;
    }
    let row_norms = (0..k).map(|i| norm_sq(&gs.row_to_vec(i))).collect();
    Ok((gs, row_norms))
}
