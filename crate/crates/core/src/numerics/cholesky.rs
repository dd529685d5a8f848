//! Triangular factorization and solves for Hermitian positive-definite
//! systems. Backs the exact detector/precoder baselines.

use num_complex::Complex;

use super::{ComplexMatrix, ComplexVector, NumericsError};
use crate::scalar::Scalar;

/// Lower-triangular factor `L` with `S = L Lᴴ`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: ComplexMatrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors a Hermitian positive-definite matrix.
    ///
    /// A pivot at or below `HPD_PIVOT_TOL * trace(S)/n` rejects the matrix
    /// as not positive definite; the threshold is relative so the check is
    /// scale-free.
    pub fn factor(s: &ComplexMatrix<T>) -> Result<Self, NumericsError> {
        let n = s.rows();
        if s.cols() != n {
            return Err(NumericsError::ShapeMismatch {
                expected: "square matrix".into(),
                got: format!("{}x{}", s.rows(), s.cols()),
            });
        }
        let scale = s.trace().re / T::from_usize(n.max(1)).unwrap();
        let tol = T::HPD_PIVOT_TOL * scale;
        let mut l = ComplexMatrix::<T>::zeros(n, n);
        for j in 0..n {
            let mut d = s[(j, j)].re;
            for k in 0..j {
                d = d - l[(j, k)].norm_sqr();
            }
            if d <= tol || !d.is_finite() {
                return Err(NumericsError::NotPositiveDefinite {
                    pivot: d.to_f64().unwrap_or(f64::NAN),
                    index: j,
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex::new(djj, T::zero());
            for i in j + 1..n {
                let mut v = s[(i, j)];
                for k in 0..j {
                    v = v - l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = v / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor_l(&self) -> &ComplexMatrix<T> {
        &self.l
    }

    /// Solves `S x = b`.
    pub fn solve(&self, b: &[Complex<T>]) -> ComplexVector<T> {
        let n = self.l.rows();
        assert_eq!(b.len(), n, "rhs length must equal dimension");
        // forward: L z = b
        let mut z = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let lik = self.l[(i, k)];
                z[i] = z[i] - lik * z[k];
            }
            z[i] = z[i] / self.l[(i, i)];
        }
        // backward: Lᴴ x = z
        for i in (0..n).rev() {
            for k in i + 1..n {
                let lki = self.l[(k, i)].conj();
                z[i] = z[i] - lki * z[k];
            }
            z[i] = z[i] / self.l[(i, i)];
        }
        z
    }

    /// Solves `S X = B` column by column.
    pub fn solve_mat(&self, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let mut out = ComplexMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve(b.col(j));
            out.col_mut(j).copy_from_slice(&col);
        }
        out
    }

    /// `S⁻¹`, Hermitian.
    pub fn inverse(&self) -> ComplexMatrix<T> {
        let n = self.l.rows();
        self.solve_mat(&ComplexMatrix::identity(n))
    }
}

/// Solves the Hermitian positive-definite system `S x = b`.
pub fn solve_hpd<T: Scalar>(
    s: &ComplexMatrix<T>,
    b: &[Complex<T>],
) -> Result<ComplexVector<T>, NumericsError> {
    Ok(Cholesky::factor(s)?.solve(b))
}
