//! Convergence-gain analytics for the randomized row-action iteration: the
//! average projection operator, the norm-proportional and optimized row
//! distributions, closed forms for the uplink/downlink system matrices, the
//! random-matrix approximation, and the expected-decay envelope with its
//! tail bound.

use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

use crate::kaczmarz::RowDistribution;
use crate::numerics::{dot, eigh, gram, norm_sq, ComplexMatrix, NumericsError};
use crate::scalar::{real, Scalar};

#[derive(Debug, Error)]
pub enum GainsError {
    #[error("row {0} has zero norm but positive sampling weight")]
    ZeroRowWithPositiveWeight(usize),
    #[error("matrix is rank deficient (numerical rank {rank} of {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Gain summary for one system matrix.
#[derive(Clone, Debug, Serialize)]
pub struct GainReport<T> {
    pub kappa_suboptimal: T,
    pub kappa_optimal: Option<T>,
    pub kappa_closed_form: T,
    pub kappa_rmt: T,
    /// Eigenvalues of the average projector on the active subspace,
    /// ascending (for the optimized distribution when one was computed,
    /// else for the norm-proportional one).
    pub spectrum: Vec<T>,
}

/// Average of the rank-1 row projection under sampling distribution `p`:
/// `P̄ = Σ p_i a_i a_iᴴ / ||a_i||²` with `a_i` the conjugated `i`-th row.
/// Hermitian PSD with unit trace.
pub fn average_projector<T: Scalar>(
    a: &ComplexMatrix<T>,
    p: &RowDistribution<T>,
) -> Result<ComplexMatrix<T>, GainsError> {
    assert_eq!(p.len(), a.rows(), "distribution must cover the rows");
    let n = a.cols();
    let mut out = ComplexMatrix::zeros(n, n);
    for r in 0..a.rows() {
        let prob = p.probability(r);
        if prob == T::zero() {
            continue;
        }
        let row = a.row_to_vec(r);
        let nsq = norm_sq(&row);
        if nsq <= T::zero() {
            return Err(GainsError::ZeroRowWithPositiveWeight(r));
        }
        let scale = Complex::new(prob / nsq, T::zero());
        // a_r a_rᴴ with a_r = conj(row): (a_r)_i (a_r)_j^* = conj(row_i) row_j
        for j in 0..n {
            let rj = row[j];
            for i in 0..n {
                out[(i, j)] = out[(i, j)] + row[i].conj() * rj * scale;
            }
        }
    }
    Ok(out)
}

/// Smallest eigenvalue of `AᴴA` restricted to the column span of `Aᴴ`,
/// i.e. the smallest eigenvalue above the numerical-rank threshold,
/// together with the restricted spectrum.
fn restricted_min_eig<T: Scalar>(a: &ComplexMatrix<T>) -> Result<(T, Vec<T>), GainsError> {
    // Work on the smaller Gram matrix: the nonzero spectra of AᴴA and AAᴴ
    // coincide, and the active subspace has dimension at most min(m, n).
    let use_rows = a.rows() < a.cols();
    let g = if use_rows { gram(&a.adjoint()) } else { gram(a) };
    let decomp = eigh(&g)?;
    let lambda_max = *decomp.values.last().expect("nonempty spectrum");
    let tol = T::RANK_TOL * lambda_max.max(T::min_positive_value());
    let spectrum: Vec<T> = decomp.values.iter().copied().filter(|&l| l > tol).collect();
    if spectrum.is_empty() {
        return Err(GainsError::RankDeficient { rank: 0, cols: a.cols() });
    }
    Ok((spectrum[0], spectrum))
}

/// Normalized minimum gain with the norm-proportional row distribution:
/// `min ||Ax||² / (||A||_F² ||x||²)` over the span of the conjugated rows.
pub fn kappa_suboptimal<T: Scalar>(a: &ComplexMatrix<T>) -> Result<T, GainsError> {
    let (lambda_min, _) = restricted_min_eig(a)?;
    Ok(lambda_min / a.frobenius_sq())
}

/// The same, also returning the restricted spectrum normalized by
/// `||A||_F²` (the projector spectrum under the norm-proportional p).
pub fn kappa_suboptimal_with_spectrum<T: Scalar>(
    a: &ComplexMatrix<T>,
) -> Result<(T, Vec<T>), GainsError> {
    let (lambda_min, spectrum) = restricted_min_eig(a)?;
    let f = a.frobenius_sq();
    Ok((lambda_min / f, spectrum.into_iter().map(|l| l / f).collect()))
}

/// Closed-form gain of the uplink (and, by symmetry, downlink) system:
/// `(λ_min(QᴴQ) + xi) / (||Q||_F² + K xi)`.
pub fn kappa_closed_form_ul<T: Scalar>(
    q: &ComplexMatrix<T>,
    xi: T,
) -> Result<T, GainsError> {
    let lambda_min = eigh(&gram(q))?.values[0];
    let k = real::<T>(q.cols() as f64);
    Ok((lambda_min + xi) / (q.frobenius_sq() + k * xi))
}

/// Random-matrix approximation of the gain for an i.i.d. Gaussian matrix:
/// `(1 - sqrt(K/M))² / K`.
pub fn kappa_rmt<T: Scalar>(m: usize, k: usize) -> T {
    assert!(m >= k && k >= 1, "need M >= K >= 1");
    let rho = k as f64 / m as f64;
    real((1.0 - rho.sqrt()).powi(2) / k as f64)
}

/// Step rule of the projected supergradient ascent.
#[derive(Clone, Copy, Debug)]
pub enum StepRule {
    /// `eta0 / sqrt(j)` at iteration `j` (1-based).
    Diminishing { eta0: f64 },
    /// Polyak-style step toward a known objective bound.
    Polyak { target: f64 },
}

/// Outcome of the row-distribution optimization.
#[derive(Clone, Debug)]
pub struct OptimizedDistribution<T> {
    pub distribution: RowDistribution<T>,
    pub kappa: T,
    /// Iterations on which the minimum eigenvalue was degenerate
    /// (gap below 1e-8), where the supergradient direction is one of
    /// several valid choices; ties are broken by the eigensolver's
    /// deterministic ascending order.
    pub degenerate_steps: usize,
}

/// Maximizes the minimum eigenvalue of the average projector over the
/// probability simplex by projected supergradient ascent.
///
/// At step `j` the supergradient at the current minimum eigenvector `v` has
/// components `|<a_i, v>|² / ||a_i||²`; the iterate moves along it and is
/// projected back onto the simplex (sorted-threshold projection). The best
/// iterate is returned, so the result can never fall below the
/// norm-proportional starting point.
pub fn optimal_row_distribution<T: Scalar>(
    a: &ComplexMatrix<T>,
    iters: usize,
    step: StepRule,
) -> Result<OptimizedDistribution<T>, GainsError> {
    let (m, n) = (a.rows(), a.cols());
    // Full column rank is required so the active subspace is all of C^n and
    // the projector eigensolve needs no basis change.
    let gram_spec = eigh(&gram(a))?;
    let lambda_max = *gram_spec.values.last().unwrap();
    let rank = gram_spec
        .values
        .iter()
        .filter(|&&l| l > T::RANK_TOL * lambda_max.max(T::min_positive_value()))
        .count();
    if rank < n {
        return Err(GainsError::RankDeficient { rank, cols: n });
    }

    // a_i = conjugated i-th row, the vector the projection acts along
    let conj_rows: Vec<Vec<Complex<T>>> = (0..m)
        .map(|r| a.row_to_vec(r).iter().map(|z| z.conj()).collect())
        .collect();
    let row_norms_sq: Vec<T> = conj_rows.iter().map(|r| norm_sq(r)).collect();
    let fro = a.frobenius_sq();

    // start from the norm-proportional distribution (a feasible point)
    let mut p: Vec<T> = row_norms_sq.iter().map(|&w| w / fro).collect();
    let mut best_p = p.clone();
    let mut best_kappa = T::neg_infinity();
    let mut degenerate_steps = 0usize;

    let tie_tol: T = real(1e-8);
    for j in 1..=iters.max(1) {
        let pbar = projector_from_probs(&conj_rows, &row_norms_sq, &p, n);
        let decomp = eigh(&pbar)?;
        let lambda = decomp.values[0];
        if lambda > best_kappa {
            best_kappa = lambda;
            best_p.copy_from_slice(&p);
        }
        if decomp.values.len() > 1 && decomp.values[1] - decomp.values[0] < tie_tol {
            degenerate_steps += 1;
        }
        if j == iters {
            break;
        }
        let v = decomp.vectors.col(0);
        let g: Vec<T> = conj_rows
            .iter()
            .zip(&row_norms_sq)
            .map(|(a_i, &nsq)| {
                if nsq > T::zero() {
                    dot(a_i, v).norm_sqr() / nsq
                } else {
                    T::zero()
                }
            })
            .collect();
        let eta = match step {
            StepRule::Diminishing { eta0 } => real::<T>(eta0 / (j as f64).sqrt()),
            StepRule::Polyak { target } => {
                let gap = real::<T>(target) - lambda;
                let gsq: T = g.iter().map(|&x| x * x).sum();
                if gap <= T::zero() || gsq <= T::zero() {
                    real::<T>(0.0)
                } else {
                    gap / gsq
                }
            }
        };
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi = *pi + eta * *gi;
        }
        project_onto_simplex(&mut p);
    }

    // exact value at the best iterate
    let pbar = projector_from_probs(&conj_rows, &row_norms_sq, &best_p, n);
    let kappa = eigh(&pbar)?.values[0];
    let distribution = RowDistribution::from_weights(best_p)
        .expect("simplex point has positive total");
    Ok(OptimizedDistribution { distribution, kappa, degenerate_steps })
}

// P̄ from conjugated rows: entry (i, j) is sum_r p_r (a_r)_i conj((a_r)_j) / ||a_r||².
fn projector_from_probs<T: Scalar>(
    conj_rows: &[Vec<Complex<T>>],
    row_norms_sq: &[T],
    p: &[T],
    n: usize,
) -> ComplexMatrix<T> {
    let mut out = ComplexMatrix::zeros(n, n);
    for ((a_i, &nsq), &prob) in conj_rows.iter().zip(row_norms_sq).zip(p) {
        if prob == T::zero() || nsq <= T::zero() {
            continue;
        }
        let scale = Complex::new(prob / nsq, T::zero());
        for j in 0..n {
            let aj = a_i[j].conj();
            for i in 0..n {
                out[(i, j)] = out[(i, j)] + a_i[i] * aj * scale;
            }
        }
    }
    out
}

/// Euclidean projection onto the probability simplex (sorted-threshold).
fn project_onto_simplex<T: Scalar>(p: &mut [T]) {
    let mut sorted: Vec<T> = p.to_vec();
    sorted.sort_by(|x, y| y.partial_cmp(x).expect("finite weights"));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    let mut rho = 0usize;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum = cumsum + u;
        let candidate = (cumsum - T::one()) / real::<T>((j + 1) as f64);
        if u - candidate > T::zero() {
            rho = j + 1;
            theta = candidate;
        }
    }
    debug_assert!(rho > 0);
    for pi in p.iter_mut() {
        *pi = (*pi - theta).max(T::zero());
    }
}

/// Expected-decay envelope `(1 - kappa)^t * init_err`.
pub fn decay_envelope<T: Scalar>(kappa: T, t: u64, init_err: T) -> T {
    assert!(kappa >= T::zero() && kappa <= T::one(), "kappa must lie in [0, 1]");
    (T::one() - kappa).powi(t as i32) * init_err
}

/// Tail bound `P[err² >= zeta] <= (1 - kappa)^t * init_err / zeta`,
/// clamped to `[0, 1]`.
pub fn markov_tail<T: Scalar>(kappa: T, t: u64, init_err: T, zeta: T) -> T {
    assert!(zeta > T::zero(), "zeta must be positive");
    (decay_envelope(kappa, t, init_err) / zeta).min(T::one()).max(T::zero())
}
