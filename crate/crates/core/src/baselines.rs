//! Exact linear transceivers and the two flawed row-action variants used as
//! comparison points: the plain iteration applied to the overdetermined
//! noisy system (which stalls at a residual floor) and the augmented
//! underdetermined variant (consistent, but with a much smaller gain).

use num_complex::Complex;
use thiserror::Error;

use crate::channel::RngStream;
use crate::kaczmarz::{row_norm_distribution, KaczmarzError, RowDistribution};
use crate::numerics::{gram, norm, solve_hpd, ComplexMatrix, ComplexVector, NumericsError};
use crate::scalar::{real, Scalar};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Kaczmarz(#[from] KaczmarzError),
    #[error("unnormalized precoder output is zero; no power scaling exists")]
    ZeroSignal,
}

/// Normalized transmit vector with its power scaling.
#[derive(Clone, Debug)]
pub struct PrecoderOutput<T> {
    pub x: ComplexVector<T>,
    pub beta: T,
}

/// Exact linear detection `(QᴴQ + xi I)⁻¹ Qᴴ y`; `xi = 0` is zero forcing.
pub fn detect_direct<T: Scalar>(
    q: &ComplexMatrix<T>,
    y: &[Complex<T>],
    xi: T,
) -> Result<ComplexVector<T>, BaselineError> {
    let s = gram(q).add_diag(xi);
    Ok(solve_hpd(&s, &q.adjoint_mul_vec(y))?)
}

/// Exact linear precoding `x = beta Q (QᴴQ + xi I)⁻¹ s` with per-realization
/// power normalization `||x||² = p_tx`.
pub fn precode_direct<T: Scalar>(
    q: &ComplexMatrix<T>,
    s: &[Complex<T>],
    xi: T,
    p_tx: T,
) -> Result<PrecoderOutput<T>, BaselineError> {
    let g = gram(q).add_diag(xi);
    let w = solve_hpd(&g, s)?;
    let x_raw = q.mul_vec(&w);
    let raw_norm = norm(&x_raw);
    if raw_norm <= T::zero() || !raw_norm.is_finite() {
        return Err(BaselineError::ZeroSignal);
    }
    let beta = p_tx.sqrt() / raw_norm;
    let scale = Complex::new(beta, T::zero());
    Ok(PrecoderOutput { x: x_raw.into_iter().map(|z| z * scale).collect(), beta })
}

/// Maximum ratio combining `Qᴴ y`.
pub fn mrc<T: Scalar>(q: &ComplexMatrix<T>, y: &[Complex<T>]) -> ComplexVector<T> {
    q.adjoint_mul_vec(y)
}

/// Plain randomized row-action iteration applied directly to the
/// overdetermined system `H s = y`, rows sampled over the `M` system rows
/// with norm-proportional weights. With noisy `y` the iterate stalls at a
/// residual floor instead of reaching the least-squares solution.
pub fn naive_ka_od<T: Scalar>(
    h: &ComplexMatrix<T>,
    y: &[Complex<T>],
    iterations: u64,
    stream: RngStream,
) -> Result<ComplexVector<T>, BaselineError> {
    let zero = vec![Complex::new(T::zero(), T::zero()); h.cols()];
    Ok(crate::kaczmarz::ka_basic(h, y, iterations, stream, &zero)?)
}

/// Checkpointed variant of [`naive_ka_od`] driving its own sampling; emits
/// the iterate at each requested iteration count (ascending).
pub fn naive_ka_od_trace<T: Scalar>(
    h: &ComplexMatrix<T>,
    y: &[Complex<T>],
    checkpoints: &[u64],
    stream: RngStream,
) -> Result<Vec<ComplexVector<T>>, BaselineError> {
    let dist = row_norm_distribution(h)?;
    let mut rng = stream.rng();
    let mut x = vec![Complex::new(T::zero(), T::zero()); h.cols()];
    let mut row = x.clone();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut t = 0u64;
    for &cp in checkpoints {
        while t < cp {
            naive_step(h, y, &dist, &mut rng, &mut x, &mut row);
            t += 1;
        }
        out.push(x.clone());
    }
    Ok(out)
}

fn naive_step<T: Scalar>(
    h: &ComplexMatrix<T>,
    y: &[Complex<T>],
    dist: &RowDistribution<T>,
    rng: &mut impl rand::Rng,
    x: &mut [Complex<T>],
    row: &mut [Complex<T>],
) {
    let r = dist.sample(rng);
    let w = dist.weight(r);
    let mut prod = Complex::new(T::zero(), T::zero());
    for j in 0..h.cols() {
        let hrj = h[(r, j)];
        row[j] = hrj.conj();
        prod = prod + hrj * x[j];
    }
    let gamma = (y[r] - prod) / Complex::new(w, T::zero());
    crate::numerics::axpy(gamma, row, x);
}

/// State of the augmented underdetermined iteration on
/// `[H, sqrt(xi) I_M] z = y` with `z = [s; n]`.
///
/// The augmented system is always consistent, so the iteration converges to
/// the regularized estimate; the identity block is `M x M` so the stacked
/// unknown matches the `z = [s; n]` decomposition. Its gain on the row span
/// is `xi / (||H||_F² + M xi)`; see the gains module for the measured value.
pub struct HermanKa<'a, T> {
    h: &'a ComplexMatrix<T>,
    y: &'a [Complex<T>],
    sqrt_xi: T,
    dist: RowDistribution<T>,
    /// Symbol part of the iterate (first `K` components of `z`).
    pub s: ComplexVector<T>,
    /// Noise part of the iterate (last `M` components of `z`).
    pub n: ComplexVector<T>,
}

impl<'a, T: Scalar> HermanKa<'a, T> {
    pub fn new(
        h: &'a ComplexMatrix<T>,
        y: &'a [Complex<T>],
        xi: T,
    ) -> Result<Self, BaselineError> {
        assert!(xi > T::zero(), "the augmented variant needs xi > 0");
        assert_eq!(y.len(), h.rows());
        let mut weights = vec![xi; h.rows()];
        for j in 0..h.cols() {
            for (i, z) in h.col(j).iter().enumerate() {
                weights[i] = weights[i] + z.norm_sqr();
            }
        }
        let dist = RowDistribution::from_weights(weights)?;
        let zero = Complex::new(T::zero(), T::zero());
        Ok(Self {
            h,
            y,
            sqrt_xi: xi.sqrt(),
            dist,
            s: vec![zero; h.cols()],
            n: vec![zero; h.rows()],
        })
    }

    /// One projection onto system row `r`: the row is `[H_r, sqrt(xi) e_r]`,
    /// so only the symbol block and one noise coordinate are touched.
    pub fn step(&mut self, r: usize) {
        let k = self.h.cols();
        let mut prod = self.n[r] * Complex::new(self.sqrt_xi, T::zero());
        for j in 0..k {
            prod = prod + self.h[(r, j)] * self.s[j];
        }
        let gamma = (self.y[r] - prod) / Complex::new(self.dist.weight(r), T::zero());
        for j in 0..k {
            self.s[j] = self.s[j] + gamma * self.h[(r, j)].conj();
        }
        self.n[r] = self.n[r] + gamma * Complex::new(self.sqrt_xi, T::zero());
    }

    pub fn sample_step(&mut self, rng: &mut impl rand::Rng) {
        let r = self.dist.sample(rng);
        self.step(r);
    }
}

/// Runs the augmented variant for `iterations` steps and returns the symbol
/// part of the iterate.
pub fn herman_ka<T: Scalar>(
    h: &ComplexMatrix<T>,
    y: &[Complex<T>],
    xi: T,
    iterations: u64,
    stream: RngStream,
) -> Result<ComplexVector<T>, BaselineError> {
    let mut ka = HermanKa::new(h, y, xi)?;
    let mut rng = stream.rng();
    for _ in 0..iterations {
        ka.sample_step(&mut rng);
    }
    Ok(ka.s)
}

/// Checkpointed variant of [`herman_ka`].
pub fn herman_ka_trace<T: Scalar>(
    h: &ComplexMatrix<T>,
    y: &[Complex<T>],
    xi: T,
    checkpoints: &[u64],
    stream: RngStream,
) -> Result<Vec<ComplexVector<T>>, BaselineError> {
    let mut ka = HermanKa::new(h, y, xi)?;
    let mut rng = stream.rng();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut t = 0u64;
    for &cp in checkpoints {
        while t < cp {
            ka.sample_step(&mut rng);
            t += 1;
        }
        out.push(ka.s.clone());
    }
    Ok(out)
}

/// The augmented system matrix `[H, sqrt(xi) I_M]`, materialized for gain
/// analysis (never used by the iteration itself).
pub fn herman_system_matrix<T: Scalar>(h: &ComplexMatrix<T>, xi: T) -> ComplexMatrix<T> {
    let (m, k) = (h.rows(), h.cols());
    let sqrt_xi = xi.sqrt();
    ComplexMatrix::from_fn(m, m + k, |i, j| {
        if j < k {
            h[(i, j)]
        } else if j - k == i {
            Complex::new(sqrt_xi, T::zero())
        } else {
            Complex::new(T::zero(), T::zero())
        }
    })
}

/// Printed closed form of the augmented variant's gain with the
/// dimensionally consistent `M x M` identity block.
pub fn herman_gain_closed_form<T: Scalar>(h: &ComplexMatrix<T>, xi: T) -> T {
    let m = real::<T>(h.rows() as f64);
    xi / (h.frobenius_sq() + m * xi)
}
