//! Hermitian eigendecomposition by cyclic Jacobi rotations.
//!
//! Simple and accurate at the problem sizes this crate meets (all
//! eigensolves are at most a few hundred rows); eigenvalues come back
//! sorted ascending with matching eigenvector columns, which also fixes a
//! deterministic tie-breaking order for downstream consumers.

use num_complex::Complex;

use super::{ComplexMatrix, NumericsError};
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 60;

#[derive(Clone, Debug)]
pub struct EigDecomposition<T> {
    /// Eigenvalues, ascending.
    pub values: Vec<T>,
    /// Unit eigenvectors as columns, ordered like `values`.
    pub vectors: ComplexMatrix<T>,
}

/// Full eigendecomposition of a Hermitian matrix.
///
/// Rejects inputs whose largest entrywise deviation from `Sᴴ` exceeds
/// `HERMITIAN_TOL * ||S||_F`.
pub fn eigh<T: Scalar>(s: &ComplexMatrix<T>) -> Result<EigDecomposition<T>, NumericsError> {
    let n = s.rows();
    if s.cols() != n {
        return Err(NumericsError::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", s.rows(), s.cols()),
        });
    }
    let fro = s.frobenius_norm();
    let dev = s.hermitian_deviation();
    if dev > T::HERMITIAN_TOL * fro {
        return Err(NumericsError::NotHermitian { deviation: dev.to_f64().unwrap_or(f64::NAN) });
    }

    let mut a = s.clone();
    // Work on the exactly-Hermitian average to keep the sweep symmetric.
    for j in 0..n {
        for i in 0..j {
            let half = crate::scalar::real::<T>(0.5);
            let v = (a[(i, j)] + a[(j, i)].conj()) * Complex::new(half, T::zero());
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
        a[(j, j)] = Complex::new(a[(j, j)].re, T::zero());
    }

    let mut v = ComplexMatrix::<T>::identity(n);
    let stop = T::JACOBI_TOL * fro.max(T::min_positive_value());
    for _sweep in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for j in 0..n {
            for i in 0..j {
                off = off + a[(i, j)].norm_sqr();
            }
        }
        if (off + off).sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));

    let values: Vec<T> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.col_mut(dst).copy_from_slice(v.col(src));
    }
    Ok(EigDecomposition { values, vectors })
}

/// One complex Jacobi rotation annihilating the `(p, q)` entry.
fn rotate<T: Scalar>(a: &mut ComplexMatrix<T>, v: &mut ComplexMatrix<T>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let abs = apq.norm();
    if abs == T::zero() {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Phase factor that makes the 2x2 block real symmetric, then a standard
    // real rotation with the stable small-angle root.
    let phi = apq.conj() / Complex::new(abs, T::zero());
    let tau = (aqq - app) / (abs + abs);
    let t = if tau >= T::zero() {
        T::one() / (tau + (T::one() + tau * tau).sqrt())
    } else {
        -T::one() / (-tau + (T::one() + tau * tau).sqrt())
    };
    let c = T::one() / (T::one() + t * t).sqrt();
    let s = t * c;

    let cs = Complex::new(c, T::zero());
    let s_phi = phi * Complex::new(s, T::zero());
    let c_phi = phi * Complex::new(c, T::zero());

    let n = a.rows();
    // A <- A J  (columns p, q)
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = aip * cs - aiq * s_phi;
        a[(i, q)] = aip * Complex::new(s, T::zero()) + aiq * c_phi;
    }
    // A <- Jᴴ A  (rows p, q)
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = apj * cs - aqj * s_phi.conj();
        a[(q, j)] = apj * Complex::new(s, T::zero()) + aqj * c_phi.conj();
    }
    a[(p, q)] = Complex::new(T::zero(), T::zero());
    a[(q, p)] = Complex::new(T::zero(), T::zero());
    a[(p, p)] = Complex::new(a[(p, p)].re, T::zero());
    a[(q, q)] = Complex::new(a[(q, q)].re, T::zero());

    // V <- V J
    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * cs - viq * s_phi;
        v[(i, q)] = vip * Complex::new(s, T::zero()) + viq * c_phi;
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eig_hermitian<T: Scalar>(s: &ComplexMatrix<T>) -> Result<T, NumericsError> {
    Ok(eigh(s)?.values[0])
}
