//! Ergodic spectral-efficiency machinery: finite-iteration interference
//! matrices, the expected-log upper bound and the moment-based lower bound,
//! complexity-budget accounting, and the Monte-Carlo driver.
//!
//! Rates are in bit/s/Hz (base-2 logs throughout).

mod mc;

pub use mc::{mc_ergodic_rates, RateSummary, Regularizer, Scheme, DL_TOTAL_POWER};

use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

use crate::kaczmarz::FactorizedLinearMap;
use crate::numerics::{norm_sq, ComplexMatrix};
use crate::scalar::{real, Scalar};

#[derive(Debug, Error)]
pub enum RateError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("degenerate SINR for user {user}: zero denominator")]
    DegenerateSinr { user: usize },
    #[error("need at least 2 samples, got {0}")]
    InsufficientSamples(u64),
    #[error("budget {budget} MK below overhead {overhead} MK")]
    BudgetTooSmall { budget: f64, overhead: f64 },
    #[error("reference spectral efficiency {0} is not positive")]
    NonpositiveReference(f64),
    #[error("trial {trial}: {operation} failed: {message}")]
    TrialFailure { trial: u64, operation: &'static str, message: String },
}

impl RateError {
    pub(crate) fn trial(trial: u64, operation: &'static str, e: impl std::fmt::Display) -> Self {
        RateError::TrialFailure { trial, operation, message: e.to_string() }
    }
}

/// Effective channel of one realization: the detector/precoder composed
/// with the true channel, plus the per-user effective noise power.
#[derive(Clone, Debug)]
pub struct InterferenceSample<T> {
    /// `K x K` composed matrix; entry `(k, k')` couples user `k'`'s symbol
    /// into user `k`'s estimate.
    pub t: ComplexMatrix<T>,
    /// Per-user effective noise power.
    pub sigma2: Vec<T>,
}

/// Uplink composition `T = Wᴴ (Qᴴ H)` with per-user noise
/// `sigma2_k = ||Q w_k||² / snr` (`w_k` = column `k` of `W`), computed
/// without materializing the `K x M` detector.
pub fn interference_ul<T: Scalar>(
    map: &FactorizedLinearMap<T>,
    q: &ComplexMatrix<T>,
    h: &ComplexMatrix<T>,
    snr: T,
) -> Result<InterferenceSample<T>, RateError> {
    let k = map.dim();
    if q.cols() != k || h.cols() != k || h.rows() != q.rows() {
        return Err(RateError::ShapeMismatch {
            expected: format!("Q and H of shape {}x{}", q.rows(), k),
            got: format!("Q {}x{}, H {}x{}", q.rows(), q.cols(), h.rows(), h.cols()),
        });
    }
    let qh = q.adjoint_mul_mat(h);
    let t = map.w().adjoint_mul_mat(&qh);
    let sigma2 = (0..k)
        .map(|user| {
            let g_user = q.mul_vec(map.w().col(user));
            norm_sq(&g_user) / snr
        })
        .collect();
    Ok(InterferenceSample { t, sigma2 })
}

/// Downlink composition `T = beta Hᴴ Q W_dl` where `W_dl = Wᴴ` is the map
/// the precoder actually applies; the user-side noise is broadcast.
pub fn interference_dl<T: Scalar>(
    map: &FactorizedLinearMap<T>,
    q: &ComplexMatrix<T>,
    h: &ComplexMatrix<T>,
    beta: T,
    sigma2: T,
) -> Result<InterferenceSample<T>, RateError> {
    let k = map.dim();
    if q.cols() != k || h.cols() != k || h.rows() != q.rows() {
        return Err(RateError::ShapeMismatch {
            expected: format!("Q and H of shape {}x{}", q.rows(), k),
            got: format!("Q {}x{}, H {}x{}", q.rows(), q.cols(), h.rows(), h.cols()),
        });
    }
    let hq = h.adjoint_mul_mat(q);
    let t = hq.mul_mat(&map.w().adjoint()).scale(Complex::new(beta, T::zero()));
    Ok(InterferenceSample { t, sigma2: vec![sigma2; k] })
}

/// Per-user, per-sample upper-bound term `log2(1 + SINR_k)` with
/// `SINR_k = |T_kk|² / (sum_{k' != k} |T_kk'|² + sigma2_k)`.
pub fn rate_upper_sample<T: Scalar>(
    sample: &InterferenceSample<T>,
) -> Result<Vec<T>, RateError> {
    let k = sample.t.rows();
    let mut out = Vec::with_capacity(k);
    for user in 0..k {
        let mut interference = T::zero();
        for other in 0..k {
            if other != user {
                interference = interference + sample.t[(user, other)].norm_sqr();
            }
        }
        let denom = interference + sample.sigma2[user];
        let signal = sample.t[(user, user)].norm_sqr();
        if denom <= T::zero() {
            if signal > T::zero() {
                return Err(RateError::DegenerateSinr { user });
            }
            out.push(T::zero());
            continue;
        }
        out.push((T::one() + signal / denom).log2());
    }
    Ok(out)
}

/// Running per-user moments feeding the ergodic-rate lower bound.
#[derive(Clone, Debug, Default)]
pub struct RateAccumulators<T> {
    pub sum_tkk: Vec<Complex<T>>,
    pub sum_abs2_tkk: Vec<T>,
    pub sum_offdiag: Vec<T>,
    pub sum_sigma2: Vec<T>,
    pub count: u64,
}

impl<T: Scalar> RateAccumulators<T> {
    pub fn new(k: usize) -> Self {
        Self {
            sum_tkk: vec![Complex::new(T::zero(), T::zero()); k],
            sum_abs2_tkk: vec![T::zero(); k],
            sum_offdiag: vec![T::zero(); k],
            sum_sigma2: vec![T::zero(); k],
            count: 0,
        }
    }

    pub fn update(&mut self, sample: &InterferenceSample<T>) {
        let k = self.sum_tkk.len();
        for user in 0..k {
            let d = sample.t[(user, user)];
            self.sum_tkk[user] = self.sum_tkk[user] + d;
            self.sum_abs2_tkk[user] = self.sum_abs2_tkk[user] + d.norm_sqr();
            let mut off = T::zero();
            for other in 0..k {
                if other != user {
                    off = off + sample.t[(user, other)].norm_sqr();
                }
            }
            self.sum_offdiag[user] = self.sum_offdiag[user] + off;
            self.sum_sigma2[user] = self.sum_sigma2[user] + sample.sigma2[user];
        }
        self.count += 1;
    }

    /// Order-independent merge (all fields are plain sums).
    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.sum_tkk.iter_mut().zip(&other.sum_tkk) {
            *a = *a + *b;
        }
        for (a, b) in self.sum_abs2_tkk.iter_mut().zip(&other.sum_abs2_tkk) {
            *a = *a + *b;
        }
        for (a, b) in self.sum_offdiag.iter_mut().zip(&other.sum_offdiag) {
            *a = *a + *b;
        }
        for (a, b) in self.sum_sigma2.iter_mut().zip(&other.sum_sigma2) {
            *a = *a + *b;
        }
        self.count += other.count;
    }
}

/// Moment-based lower bound
/// `log2(1 + |E T_kk|² / (Var(T_kk) + sum E|T_kk'|² + E sigma2_k))`
/// per user; the variance estimate is clamped at zero.
pub fn rate_lower<T: Scalar>(acc: &RateAccumulators<T>) -> Result<Vec<T>, RateError> {
    if acc.count < 2 {
        return Err(RateError::InsufficientSamples(acc.count));
    }
    let n = real::<T>(acc.count as f64);
    let k = acc.sum_tkk.len();
    let mut out = Vec::with_capacity(k);
    for user in 0..k {
        let mean = acc.sum_tkk[user] / Complex::new(n, T::zero());
        let signal = mean.norm_sqr();
        let var = (acc.sum_abs2_tkk[user] / n - signal).max(T::zero());
        let denom = var + acc.sum_offdiag[user] / n + acc.sum_sigma2[user] / n;
        if denom <= T::zero() {
            if signal > T::zero() {
                return Err(RateError::DegenerateSinr { user });
            }
            out.push(T::zero());
            continue;
        }
        out.push((T::one() + signal / denom).log2());
    }
    Ok(out)
}

/// Normalized gap to the reference spectral efficiency
/// `(s_max - s_t) / s_max`; negative when `s_t` exceeds the reference
/// (reported, not clamped).
pub fn gap_to_capacity<T: Scalar>(s_t: T, s_max: T) -> Result<T, RateError> {
    if s_max <= T::zero() || !s_max.is_finite() {
        return Err(RateError::NonpositiveReference(s_max.to_f64().unwrap_or(f64::NAN)));
    }
    Ok((s_max - s_t) / s_max)
}

/// Complexity budget in `M*K` multiply-accumulate units.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BudgetPolicy {
    /// Total allowance, in MK units.
    pub budget_mk: f64,
    /// Fixed cost charged before iterating, in MK units.
    pub overhead_mk: f64,
}

impl BudgetPolicy {
    pub fn new(budget_mk: f64, overhead_mk: f64) -> Self {
        Self { budget_mk, overhead_mk }
    }

    /// Budget with the scheme's documented default overhead.
    pub fn for_scheme(budget_mk: f64, scheme: Scheme) -> Self {
        Self { budget_mk, overhead_mk: scheme.default_overhead_mk() }
    }
}

/// Iterations affordable under the policy:
/// `floor((budget - overhead) * M * K / cost_per_iteration)`.
///
/// Per-iteration costs: `2M` for the uplink/downlink sweeps, `2K` for the
/// plain overdetermined iteration, `2K + 2` for the augmented variant
/// (its rows have `K + 1` nonzeros). Exact schemes take zero iterations.
pub fn budget_to_iterations(
    policy: &BudgetPolicy,
    m: usize,
    k: usize,
    scheme: Scheme,
) -> Result<u64, RateError> {
    if policy.budget_mk < policy.overhead_mk {
        return Err(RateError::BudgetTooSmall {
            budget: policy.budget_mk,
            overhead: policy.overhead_mk,
        });
    }
    let cost = match scheme.cost_per_iteration(m, k) {
        None => return Ok(0),
        Some(c) => c as f64,
    };
    let available = (policy.budget_mk - policy.overhead_mk) * (m as f64) * (k as f64);
    Ok((available / cost).floor() as u64)
}
