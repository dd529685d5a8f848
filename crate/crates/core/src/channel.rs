//! Correlated Rayleigh channel realizations, noisy channel estimates and
//! uplink observations, all under deterministic seeded randomness.
//!
//! Every randomized quantity draws from an [`RngStream`]: a `(master seed,
//! stream label, trial index)` triple. Identical triples replay the exact
//! same sequence; distinct labels or trials give independent streams, so
//! Monte-Carlo trials are reproducible and order-independent.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{Cholesky, ComplexMatrix, ComplexVector, NumericsError};
use crate::scalar::{complex_standard_normal, real, Scalar};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("correlation parameter {0} outside [0, 1)")]
    InvalidCorrelation(f64),
    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// System and channel-model parameters.
///
/// `snr_db` is the per-receive-antenna transmit-power-to-noise ratio in dB:
/// with unit-power user symbols and unit-variance channel entries the total
/// received signal power per BS antenna is `K`, so the uplink noise variance
/// is `sigma^2 = K * 10^(-snr_db/10)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChannelParams {
    /// BS antenna count `M`.
    pub m: usize,
    /// Served user count `K`.
    pub k: usize,
    /// Antenna correlation parameter `a` in `[0, 1)`.
    pub a: f64,
    /// Estimation quality `tau` in `[0, 1]`; `0` is a perfect estimate.
    pub tau: f64,
    /// SNR per receive antenna in dB.
    pub snr_db: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.m < self.k || self.k < 1 {
            return Err(ChannelError::InvalidParams(format!(
                "need M >= K >= 1, got M={} K={}",
                self.m, self.k
            )));
        }
        if !(0.0..1.0).contains(&self.a) {
            return Err(ChannelError::InvalidCorrelation(self.a));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(ChannelError::InvalidParams(format!("tau={} outside [0,1]", self.tau)));
        }
        Ok(())
    }

    /// Uplink noise variance implied by `snr_db` (unit symbol power).
    pub fn noise_var(&self) -> f64 {
        self.k as f64 * 10f64.powf(-self.snr_db / 10.0)
    }

    /// Downlink per-user noise variance (unit total BS transmit power).
    pub fn noise_var_dl(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }
}

/// A true channel together with the noisy estimate the BS works from.
#[derive(Clone, Debug)]
pub struct ChannelRealization<T> {
    pub h: ComplexMatrix<T>,
    pub q: ComplexMatrix<T>,
    pub params: ChannelParams,
}

/// Named sub-streams of the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamLabel {
    Channel,
    EstimateNoise,
    RxNoise,
    KaRows,
    Symbols,
}

impl StreamLabel {
    fn id(self) -> u64 {
        match self {
            StreamLabel::Channel => 1,
            StreamLabel::EstimateNoise => 2,
            StreamLabel::RxNoise => 3,
            StreamLabel::KaRows => 4,
            StreamLabel::Symbols => 5,
        }
    }
}

/// Identity of one reproducible random stream.
#[derive(Clone, Copy, Debug)]
pub struct RngStream {
    pub master: u64,
    pub label: StreamLabel,
    pub trial: u64,
}

impl RngStream {
    pub fn new(master: u64, label: StreamLabel, trial: u64) -> Self {
        Self { master, label, trial }
    }

    /// Materializes the stream. The 256-bit key is derived by chaining a
    /// SplitMix64 mix over (master, label, trial), so distinct triples give
    /// statistically independent streams.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut state = splitmix64(self.master ^ 0x4b61_637a_6d61_727a);
        state = splitmix64(state ^ self.label.id());
        state = splitmix64(state ^ self.trial.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut seed = [0u8; 32];
        let mut word = state;
        for chunk in seed.chunks_exact_mut(8) {
            word = splitmix64(word);
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha12Rng::from_seed(seed)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Antenna covariance `[Phi]_{ij} = a^|i-j|`: real symmetric Toeplitz,
/// positive definite for `0 <= a < 1`.
pub fn make_covariance<T: Scalar>(m: usize, a: f64) -> Result<ComplexMatrix<T>, ChannelError> {
    if !(0.0..1.0).contains(&a) {
        return Err(ChannelError::InvalidCorrelation(a));
    }
    let a_t: T = real(a);
    Ok(ComplexMatrix::from_fn(m, m, |i, j| {
        Complex::new(a_t.powi(i.abs_diff(j) as i32), T::zero())
    }))
}

/// Reusable sampler that factors the antenna covariance once.
#[derive(Clone, Debug)]
pub struct ChannelSampler<T> {
    params: ChannelParams,
    /// Lower-triangular factor of the covariance; `None` for `a = 0`.
    chol: Option<ComplexMatrix<T>>,
}

impl<T: Scalar> ChannelSampler<T> {
    pub fn new(params: ChannelParams) -> Result<Self, ChannelError> {
        params.validate()?;
        let chol = if params.a == 0.0 {
            None
        } else {
            let phi = make_covariance::<T>(params.m, params.a)?;
            Some(Cholesky::factor(&phi)?.factor_l().clone())
        };
        Ok(Self { params, chol })
    }

    /// Draws the true channel: column `k` is `L z^k` with `z^k ~ CN(0, I_M)`,
    /// distributionally equal to `Phi^(1/2) z^k`. Entries are drawn
    /// column-major so a fixed stream gives a bitwise-identical matrix.
    pub fn sample(&self, stream: RngStream) -> ComplexMatrix<T> {
        let mut rng = stream.rng();
        let (m, k) = (self.params.m, self.params.k);
        let white = ComplexMatrix::from_fn(m, k, |_, _| complex_standard_normal(&mut rng));
        match &self.chol {
            None => white,
            Some(l) => {
                let mut h = ComplexMatrix::zeros(m, k);
                for j in 0..k {
                    // lower-triangular product, column by column
                    let z = white.col(j);
                    let col = h.col_mut(j);
                    for (i, slot) in col.iter_mut().enumerate() {
                        let mut acc = Complex::new(T::zero(), T::zero());
                        for (t, &zt) in z.iter().enumerate().take(i + 1) {
                            acc = acc + l[(i, t)] * zt;
                        }
                        *slot = acc;
                    }
                }
                h
            }
        }
    }
}

/// One-shot channel draw; prefer [`ChannelSampler`] inside trial loops.
pub fn sample_channel<T: Scalar>(
    params: &ChannelParams,
    stream: RngStream,
) -> Result<ComplexMatrix<T>, ChannelError> {
    Ok(ChannelSampler::new(*params)?.sample(stream))
}

/// Noisy channel estimate `Q = sqrt(1 - tau^2) H + tau N`, `N ~ CN(0, 1)` iid.
///
/// `tau = 0` returns `H` exactly (bitwise), `tau = 1` is independent of `H`,
/// and unit-variance `H` entries keep unit-variance `Q` entries for any tau.
pub fn noisy_estimate<T: Scalar>(
    h: &ComplexMatrix<T>,
    tau: f64,
    stream: RngStream,
) -> ComplexMatrix<T> {
    assert!((0.0..=1.0).contains(&tau), "tau must lie in [0, 1]");
    if tau == 0.0 {
        return h.clone();
    }
    let mut rng = stream.rng();
    let scale_h: T = real((1.0 - tau * tau).sqrt());
    let scale_n: T = real(tau);
    ComplexMatrix::from_fn(h.rows(), h.cols(), |i, j| {
        let n: Complex<T> = complex_standard_normal(&mut rng);
        h[(i, j)] * Complex::new(scale_h, T::zero()) + n * Complex::new(scale_n, T::zero())
    })
}

/// Uplink observation `y = H s + n` with `n ~ CN(0, sigma^2 I_M)` and
/// `sigma^2 = K * 10^(-snr_db/10)` (unit symbol power; `snr_db = inf` is the
/// noiseless path).
pub fn uplink_observation<T: Scalar>(
    h: &ComplexMatrix<T>,
    s: &[Complex<T>],
    snr_db: f64,
    stream: RngStream,
) -> ComplexVector<T> {
    assert_eq!(s.len(), h.cols(), "symbol count must equal user count");
    let mut y = h.mul_vec(s);
    let sigma2 = s.len() as f64 * 10f64.powf(-snr_db / 10.0);
    if sigma2 > 0.0 {
        let sigma: T = real(sigma2.sqrt());
        let mut rng = stream.rng();
        for yi in &mut y {
            let n: Complex<T> = complex_standard_normal(&mut rng);
            *yi = *yi + n * Complex::new(sigma, T::zero());
        }
    }
    y
}

/// Unit-power user symbols `s ~ CN(0, I_K)`.
pub fn draw_symbols<T: Scalar>(k: usize, stream: RngStream) -> ComplexVector<T> {
    let mut rng = stream.rng();
    (0..k).map(|_| complex_standard_normal(&mut rng)).collect()
}

/// Draws a `(H, Q)` pair for one trial.
pub fn realize_channel<T: Scalar>(
    sampler: &ChannelSampler<T>,
    master: u64,
    trial: u64,
) -> ChannelRealization<T> {
    let params = sampler.params;
    let h = sampler.sample(RngStream::new(master, StreamLabel::Channel, trial));
    let q = noisy_estimate(&h, params.tau, RngStream::new(master, StreamLabel::EstimateNoise, trial));
    ChannelRealization { h, q, params }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{min_eig_hermitian, norm_sq, sub_vec};
    use num_complex::Complex64;

    fn params(m: usize, k: usize, a: f64, tau: f64, snr_db: f64) -> ChannelParams {
        ChannelParams { m, k, a, tau, snr_db }
    }

    #[test]
    fn covariance_a_zero_is_identity() {
        let phi = make_covariance::<f64>(3, 0.0).unwrap();
        assert_eq!(phi, crate::numerics::ComplexMatrix::identity(3));
    }

    #[test]
    fn covariance_direct_formula() {
        let phi = make_covariance::<f64>(2, 0.5).unwrap();
        assert_eq!(phi[(0, 1)].re, 0.5);
        assert_eq!(phi[(1, 0)].re, 0.5);
        assert_eq!(phi[(0, 0)].re, 1.0);
    }

    #[test]
    fn covariance_toeplitz_symmetric_and_pd() {
        let phi = make_covariance::<f64>(8, 0.6).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(phi[(i, j)], phi[(j, i)]);
                if i + 1 < 8 && j + 1 < 8 {
                    assert_eq!(phi[(i, j)], phi[(i + 1, j + 1)]);
                }
                assert_eq!(phi[(i, j)].im, 0.0);
            }
        }
        assert!(min_eig_hermitian(&phi).unwrap() > 0.0);
    }

    #[test]
    fn covariance_rejects_bad_a() {
        assert!(make_covariance::<f64>(4, 1.0).is_err());
        assert!(make_covariance::<f64>(4, -0.1).is_err());
    }

    #[test]
    fn channel_is_deterministic() {
        let p = params(16, 4, 0.3, 0.0, 10.0);
        let s = ChannelSampler::<f64>::new(p).unwrap();
        let h1 = s.sample(RngStream::new(7, StreamLabel::Channel, 3));
        let h2 = s.sample(RngStream::new(7, StreamLabel::Channel, 3));
        assert_eq!(h1, h2);
        let h3 = s.sample(RngStream::new(7, StreamLabel::Channel, 4));
        assert_ne!(h1, h3);
    }

    #[test]
    fn empirical_covariance_uncorrelated() {
        // Law-of-large-numbers oracle at 1e5 draws, 5% entrywise.
        let p = params(4, 1, 0.0, 0.0, 10.0);
        let s = ChannelSampler::<f64>::new(p).unwrap();
        let n = 100_000;
        let mut acc = crate::numerics::ComplexMatrix::<f64>::zeros(4, 4);
        for t in 0..n {
            let h = s.sample(RngStream::new(11, StreamLabel::Channel, t));
            let col = h.col(0);
            for i in 0..4 {
                for j in 0..4 {
                    acc[(i, j)] += col[i] * col[j].conj();
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                let est = acc[(i, j)] / Complex64::new(n as f64, 0.0);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (est.re - want).abs() < 0.05 && est.im.abs() < 0.05,
                    "entry ({i},{j}) = {est}"
                );
            }
        }
    }

    #[test]
    fn empirical_cross_correlation_a06() {
        let p = params(2, 1, 0.6, 0.0, 10.0);
        let s = ChannelSampler::<f64>::new(p).unwrap();
        let n = 100_000;
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..n {
            let h = s.sample(RngStream::new(3, StreamLabel::Channel, t));
            acc += h[(0, 0)] * h[(1, 0)].conj();
        }
        let est = acc / Complex64::new(n as f64, 0.0);
        assert!((est.re - 0.6).abs() < 0.05, "E[h1 conj(h2)] = {est}");
        assert!(est.im.abs() < 0.05);
    }

    #[test]
    fn estimate_tau_zero_is_exact() {
        let p = params(8, 2, 0.0, 0.0, 10.0);
        let s = ChannelSampler::<f64>::new(p).unwrap();
        let h = s.sample(RngStream::new(1, StreamLabel::Channel, 0));
        let q = noisy_estimate(&h, 0.0, RngStream::new(1, StreamLabel::EstimateNoise, 0));
        assert_eq!(h, q);
    }

    #[test]
    fn estimate_tau_one_is_independent() {
        let p = params(1, 1, 0.0, 0.0, 10.0);
        let s = ChannelSampler::<f64>::new(p).unwrap();
        let n = 10_000;
        let mut corr = Complex64::new(0.0, 0.0);
        for t in 0..n {
            let h = s.sample(RngStream::new(5, StreamLabel::Channel, t));
            let q = noisy_estimate(&h, 1.0, RngStream::new(5, StreamLabel::EstimateNoise, t));
            corr += h[(0, 0)] * q[(0, 0)].conj();
        }
        assert!((corr / Complex64::new(n as f64, 0.0)).norm() < 0.05);
    }

    #[test]
    fn estimate_preserves_variance() {
        let p = params(2, 2, 0.0, 0.0, 10.0);
        let s = ChannelSampler::<f64>::new(p).unwrap();
        for &tau in &[0.25, 0.5, 0.9] {
            let n = 10_000;
            let mut power = 0.0;
            for t in 0..n {
                let h = s.sample(RngStream::new(8, StreamLabel::Channel, t));
                let q = noisy_estimate(&h, tau, RngStream::new(8, StreamLabel::EstimateNoise, t));
                power += q[(0, 0)].norm_sqr();
            }
            let var = power / n as f64;
            assert!((var - 1.0).abs() < 0.05, "tau={tau}: per-entry variance {var}");
        }
    }

    #[test]
    fn observation_noiseless_limit() {
        let h = crate::numerics::ComplexMatrix::<f64>::identity(3);
        let s = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        let y = uplink_observation(&h, &s, f64::INFINITY, RngStream::new(0, StreamLabel::RxNoise, 0));
        assert_eq!(y, s);
    }

    #[test]
    fn observation_noise_power() {
        let p = params(8, 2, 0.0, 0.0, 0.0);
        let sampler = ChannelSampler::<f64>::new(p).unwrap();
        let h = sampler.sample(RngStream::new(2, StreamLabel::Channel, 0));
        let s = draw_symbols::<f64>(2, RngStream::new(2, StreamLabel::Symbols, 0));
        let hs = h.mul_vec(&s);
        let sigma2 = p.noise_var(); // K * 10^0 = 2
        assert!((sigma2 - 2.0).abs() < 1e-12);
        let n = 10_000;
        let mut acc = 0.0;
        for t in 0..n {
            let y = uplink_observation(&h, &s, 0.0, RngStream::new(2, StreamLabel::RxNoise, t));
            acc += norm_sq(&sub_vec(&y, &hs));
        }
        let mean = acc / n as f64;
        let want = 8.0 * sigma2;
        assert!((mean - want).abs() < 0.05 * want, "noise power {mean} vs {want}");
    }

    #[test]
    fn stream_labels_are_independent() {
        let a = RngStream::new(9, StreamLabel::Channel, 0).rng().get_seed();
        let b = RngStream::new(9, StreamLabel::Symbols, 0).rng().get_seed();
        assert_ne!(a, b);
    }
}
