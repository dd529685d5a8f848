//! Scalar abstraction so the whole library runs in either `f32` or `f64`.
//!
//! All numerical tolerances live here as associated constants, scaled to
//! the precision of the concrete type. Everything downstream is expressed
//! relative to a Frobenius norm or a trace, never as a bare magic number.

use std::fmt;
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};
use rand::distributions::uniform::SampleUniform;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar the library is generic over.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + SampleUniform
    + Sum
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Pivot threshold for the Hermitian positive-definite factorization,
    /// relative to `trace(S)/dim`.
    const HPD_PIVOT_TOL: Self;
    /// Hermitian-symmetry check threshold, relative to the Frobenius norm.
    const HERMITIAN_TOL: Self;
    /// Off-diagonal convergence threshold for the Jacobi eigensolver,
    /// relative to the Frobenius norm.
    const JACOBI_TOL: Self;
    /// Relative threshold separating numerically-zero eigenvalues from the
    /// positive part of a PSD spectrum.
    const RANK_TOL: Self;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw in `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    const HPD_PIVOT_TOL: Self = 1e-14;
    const HERMITIAN_TOL: Self = 1e-12;
    const JACOBI_TOL: Self = 1e-14;
    const RANK_TOL: Self = 1e-11;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f64>()
    }
}

impl Scalar for f32 {
    const HPD_PIVOT_TOL: Self = 1e-6;
    const HERMITIAN_TOL: Self = 1e-5;
    const JACOBI_TOL: Self = 1e-6;
    const RANK_TOL: Self = 1e-4;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f32>()
    }
}

/// Shorthand for converting an `f64` literal into the generic scalar.
#[inline]
pub fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Standard circularly-symmetric complex Gaussian `CN(0, 1)`:
/// independent real and imaginary parts of variance 1/2.
#[inline]
pub fn complex_standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let half = T::FRAC_1_SQRT_2();
    Complex::new(T::standard_normal(rng) * half, T::standard_normal(rng) * half)
}
