//! Self-contained dense complex linear algebra: Gram matrices, a Hermitian
//! eigensolver, a Cholesky-style HPD solver, norms and the small vector
//! kernels everything else is built from.
//!
//! Matrices are stored **column-major** throughout the crate; columns are
//! contiguous slices. File formats may present data row-major, the in-memory
//! layout never changes.

mod cholesky;
mod eigh;

pub use cholesky::{solve_hpd, Cholesky};
pub use eigh::{eigh, min_eig_hermitian, EigDecomposition};

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Scalar;

/// Vector of complex scalars; length is implicit, entries must stay finite.
pub type ComplexVector<T> = Vec<Complex<T>>;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },
    #[error("matrix is not Hermitian (max deviation {deviation})")]
    NotHermitian { deviation: f64 },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
}

/// Dense complex matrix, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> ComplexMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex::new(T::zero(), T::zero()); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from a row-major slice of entries (the interchange-format order).
    pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex<T>]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count must be rows*cols");
        Self::from_fn(rows, cols, |i, j| entries[i * cols + j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Column `j` as a contiguous slice.
    #[inline]
    pub fn col(&self, j: usize) -> &[Complex<T>] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [Complex<T>] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Row `i` collected into a vector (rows are strided).
    pub fn row_to_vec(&self, i: usize) -> ComplexVector<T> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[Complex<T>]) -> ComplexVector<T> {
        assert_eq!(x.len(), self.cols, "vector length must equal cols");
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.rows];
        for (j, &xj) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.col(j)) {
                *o = *o + a * xj;
            }
        }
        out
    }

    /// `Aᴴ y` without forming the adjoint; one contiguous column dot per entry.
    pub fn adjoint_mul_vec(&self, y: &[Complex<T>]) -> ComplexVector<T> {
        assert_eq!(y.len(), self.rows, "vector length must equal rows");
        (0..self.cols).map(|j| dot(self.col(j), y)).collect()
    }

    /// `A B`.
    pub fn mul_mat(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let col = self.mul_vec(other.col(j));
            out.col_mut(j).copy_from_slice(&col);
        }
        out
    }

    /// `Aᴴ B`.
    pub fn adjoint_mul_mat(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "row counts must agree");
        let mut out = Self::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            for i in 0..self.cols {
                out[(i, j)] = dot(self.col(i), other.col(j));
            }
        }
        out
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = *v * s;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v = *v + *w;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v = *v - *w;
        }
        out
    }

    /// Adds `c` to the diagonal.
    pub fn add_diag(&self, c: T) -> Self {
        let mut out = self.clone();
        let n = self.rows.min(self.cols);
        for i in 0..n {
            out[(i, i)] = out[(i, i)] + Complex::new(c, T::zero());
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        let n = self.rows.min(self.cols);
        (0..n).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + self[(i, i)])
    }

    pub fn frobenius_norm(&self) -> T {
        self.frobenius_sq().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// Largest entrywise deviation from `Aᴴ`, i.e. `max |A - Aᴴ|`.
    pub fn hermitian_deviation(&self) -> T {
        assert_eq!(self.rows, self.cols, "square matrix required");
        let mut dev = T::zero();
        for j in 0..self.cols {
            for i in 0..=j {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[j * self.rows + i]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[j * self.rows + i]
    }
}

/// `AᴴA`: Hermitian positive semi-definite Gram matrix, cols x cols.
///
/// The lower triangle is mirrored from the upper so the result is Hermitian
/// by construction, with an exactly real diagonal.
pub fn gram<T: Scalar>(a: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let n = a.cols();
    let mut g = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let v = dot(a.col(i), a.col(j));
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
        g[(j, j)] = Complex::new(norm_sq(a.col(j)), T::zero());
    }
    g
}

/// Squared Frobenius norm `sum |a_ij|^2`.
pub fn frobenius_sq<T: Scalar>(a: &ComplexMatrix<T>) -> T {
    a.data.iter().map(|z| z.norm_sqr()).sum()
}

impl<T: Scalar> ComplexMatrix<T> {
    pub fn frobenius_sq(&self) -> T {
        frobenius_sq(self)
    }
}

/// Inner product `<a, b> = aᴴ b` (conjugate-linear in the first argument).
#[inline]
pub fn dot<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Complex::new(T::zero(), T::zero());
    for (x, y) in a.iter().zip(b) {
        acc = acc + x.conj() * *y;
    }
    acc
}

#[inline]
pub fn norm_sq<T: Scalar>(a: &[Complex<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).sum()
}

#[inline]
pub fn norm<T: Scalar>(a: &[Complex<T>]) -> T {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`.
#[inline]
pub fn axpy<T: Scalar>(alpha: Complex<T>, x: &[Complex<T>], y: &mut [Complex<T>]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

pub fn sub_vec<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> ComplexVector<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

pub fn scale_vec<T: Scalar>(alpha: Complex<T>, a: &[Complex<T>]) -> ComplexVector<T> {
    a.iter().map(|x| *x * alpha).collect()
}
