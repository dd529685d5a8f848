//! Randomized row-action machinery: weighted row sampling, the basic
//! Kaczmarz iteration, and the consistent uplink/downlink variants that
//! drive a coupled `(u, v)` state instead of dividing by `sqrt(xi)`, so the
//! zero-regularization limit needs no special casing.
//!
//! Work is accounted in complex multiply-accumulate units. One sweep step
//! costs two M-length vector operations (one inner product against the
//! selected column, one axpy) plus [`ITER_EXTRA_OPS`] bookkeeping units.

mod linmap;

pub use linmap::{
    apply_detector, apply_precoder, compute_linear_map, replay_linear_map, FactorizedLinearMap,
};

use num_complex::Complex;
use rand::Rng;
use thiserror::Error;

use crate::channel::RngStream;
use crate::numerics::{axpy, dot, norm_sq, ComplexMatrix, ComplexVector};
use crate::scalar::Scalar;

/// Per-iteration bookkeeping cost beyond the two M-length vector operations:
/// the `xi * v_r` term in the residual and the final scaling.
pub const ITER_EXTRA_OPS: u64 = 2;

#[derive(Debug, Error)]
pub enum KaczmarzError {
    #[error("row distribution is degenerate (total weight is zero)")]
    DegenerateDistribution,
    #[error("selected row {0} has zero norm")]
    ZeroRowSelected(usize),
    #[error("row index {index} out of range for {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
}

/// Sampling weights over row indices, with a cumulative table for
/// `O(log K)` draws. Zero-weight rows are never selected.
#[derive(Clone, Debug)]
pub struct RowDistribution<T> {
    weights: Vec<T>,
    cumulative: Vec<T>,
    total: T,
    last_positive: usize,
}

impl<T: Scalar> RowDistribution<T> {
    pub fn from_weights(weights: Vec<T>) -> Result<Self, KaczmarzError> {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut total = T::zero();
        let mut last_positive = None;
        for (i, &w) in weights.iter().enumerate() {
            debug_assert!(w >= T::zero() && w.is_finite());
            total = total + w;
            cumulative.push(total);
            if w > T::zero() {
                last_positive = Some(i);
            }
        }
        let last_positive = last_positive.ok_or(KaczmarzError::DegenerateDistribution)?;
        if total <= T::zero() || !total.is_finite() {
            return Err(KaczmarzError::DegenerateDistribution);
        }
        Ok(Self { weights, cumulative, total, last_positive })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> T {
        self.total
    }

    /// Raw weight of row `i` (for the uplink distribution this is
    /// `||q_i||^2 + xi`, which doubles as the projection denominator).
    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn probability(&self, i: usize) -> T {
        self.weights[i] / self.total
    }

    /// Draws one index with probability `weight_i / total`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = T::unit_uniform(rng) * self.total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        if idx >= self.weights.len() {
            self.last_positive
        } else {
            idx
        }
    }
}

/// Sampling weights of the uplink/downlink sweeps: `||q_i||^2 + xi` over the
/// `K` columns of `Q`. Costs `M*K` multiply-accumulates.
pub fn build_row_distribution<T: Scalar>(
    q: &ComplexMatrix<T>,
    xi: T,
) -> Result<RowDistribution<T>, KaczmarzError> {
    let weights = (0..q.cols()).map(|j| norm_sq(q.col(j)) + xi).collect();
    RowDistribution::from_weights(weights)
}

/// Norm-proportional weights over the `m` rows of a general system matrix.
pub fn row_norm_distribution<T: Scalar>(
    a: &ComplexMatrix<T>,
) -> Result<RowDistribution<T>, KaczmarzError> {
    let mut weights = vec![T::zero(); a.rows()];
    for j in 0..a.cols() {
        for (i, z) in a.col(j).iter().enumerate() {
            weights[i] = weights[i] + z.norm_sqr();
        }
    }
    RowDistribution::from_weights(weights)
}

/// Draws one index from `dist`; successive draws from the same generator
/// are independent.
pub fn sample_row<T: Scalar, R: Rng + ?Sized>(dist: &RowDistribution<T>, rng: &mut R) -> usize {
    dist.sample(rng)
}

/// Iterate of the uplink/downlink sweep, with the arithmetic-operation
/// counter. The coupling `u = Q v` holds at every iteration up to rounding.
#[derive(Clone, Debug)]
pub struct KaState<T> {
    pub u: ComplexVector<T>,
    pub v: ComplexVector<T>,
    pub iterations: u64,
    pub ops: u64,
}

impl<T: Scalar> KaState<T> {
    fn start(m: usize, k: usize, ops: u64) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        Self { u: vec![zero; m], v: vec![zero; k], iterations: 0, ops }
    }
}

/// One consistent row-action sweep over the columns of `Q`.
///
/// The driven system is the underdetermined adjoint system whose unknown is
/// `z = [u; sqrt(xi) v]`; each step projects onto the hyperplane of one
/// selected index `r`, after which that equation holds exactly:
/// `<q_r, u> + xi v_r = rhs_r`.
pub struct KaSweep<'a, T> {
    q: &'a ComplexMatrix<T>,
    xi: T,
    rhs: &'a [Complex<T>],
    dist: &'a RowDistribution<T>,
    state: KaState<T>,
}

impl<'a, T: Scalar> KaSweep<'a, T> {
    pub fn new(
        q: &'a ComplexMatrix<T>,
        xi: T,
        rhs: &'a [Complex<T>],
        dist: &'a RowDistribution<T>,
        initial_ops: u64,
    ) -> Self {
        assert_eq!(rhs.len(), q.cols(), "rhs length must equal column count");
        assert_eq!(dist.len(), q.cols(), "distribution must cover the columns");
        Self { q, xi, rhs, dist, state: KaState::start(q.rows(), q.cols(), initial_ops) }
    }

    pub fn state(&self) -> &KaState<T> {
        &self.state
    }

    pub fn into_state(self) -> KaState<T> {
        self.state
    }

    /// Residual of equation `r` at the current iterate.
    pub fn equation_residual(&self, r: usize) -> Complex<T> {
        let qr = self.q.col(r);
        self.rhs[r] - dot(qr, &self.state.u) - self.state.v[r] * Complex::new(self.xi, T::zero())
    }

    /// One projection step onto equation `r`.
    pub fn step(&mut self, r: usize) {
        let qr = self.q.col(r);
        let denom = self.dist.weight(r);
        let gamma = self.equation_residual(r) / Complex::new(denom, T::zero());
        axpy(gamma, qr, &mut self.state.u);
        self.state.v[r] = self.state.v[r] + gamma;
        self.state.iterations += 1;
        self.state.ops += 2 * self.q.rows() as u64 + ITER_EXTRA_OPS;
    }

    /// Samples an index, steps, and returns the index.
    pub fn sample_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let r = self.dist.sample(rng);
        self.step(r);
        r
    }
}

/// Outcome of an uplink detection run.
#[derive(Clone, Debug)]
pub struct UplinkRun<T> {
    /// Symbol estimate `v^T`.
    pub s_hat: ComplexVector<T>,
    pub state: KaState<T>,
    /// Row indices in selection order; replaying them reproduces the run.
    pub indices: Vec<u32>,
}

/// Outcome of a downlink precoding run.
#[derive(Clone, Debug)]
pub struct DownlinkRun<T> {
    /// Transmit vector `Q w`.
    pub x: ComplexVector<T>,
    /// Weight vector `w = v^T`.
    pub w: ComplexVector<T>,
    pub state: KaState<T>,
    pub indices: Vec<u32>,
}

/// Uplink detection: `iterations` randomized steps toward
/// `(QᴴQ + xi I)⁻¹ Qᴴ y`; `xi = 0` is the zero-forcing limit.
///
/// Total cost: `M*K` for the distribution, `M*K` for `b = Qᴴ y`, then
/// `2M + ITER_EXTRA_OPS` per iteration, all recorded in `state.ops`.
pub fn ul_detect<T: Scalar>(
    q: &ComplexMatrix<T>,
    y: &[Complex<T>],
    xi: T,
    iterations: u64,
    stream: RngStream,
) -> Result<UplinkRun<T>, KaczmarzError> {
    let (m, k) = (q.rows(), q.cols());
    if y.len() != m {
        return Err(KaczmarzError::ShapeMismatch {
            expected: format!("observation of length {m}"),
            got: format!("{}", y.len()),
        });
    }
    let dist = build_row_distribution(q, xi)?;
    let b = q.adjoint_mul_vec(y);
    let mut sweep = KaSweep::new(q, xi, &b, &dist, 2 * (m * k) as u64);
    let mut rng = stream.rng();
    let mut indices = Vec::with_capacity(iterations as usize);
    for _ in 0..iterations {
        indices.push(sweep.sample_step(&mut rng) as u32);
    }
    let state = sweep.into_state();
    Ok(UplinkRun { s_hat: state.v.clone(), state, indices })
}

/// Replays an uplink run with a fixed index sequence, returning the symbol
/// iterate at each requested checkpoint. Driving the same arithmetic with
/// the logged indices of a previous run reproduces its iterates bitwise.
pub fn ul_detect_with_indices<T: Scalar>(
    q: &ComplexMatrix<T>,
    y: &[Complex<T>],
    xi: T,
    indices: &[u32],
    checkpoints: &[u64],
) -> Result<Vec<ComplexVector<T>>, KaczmarzError> {
    let dist = build_row_distribution(q, xi)?;
    let b = q.adjoint_mul_vec(y);
    let mut sweep = KaSweep::new(q, xi, &b, &dist, 0);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    let mut t: u64 = 0;
    while let Some(&&cp) = next.peek() {
        if cp == t {
            out.push(sweep.state().v.clone());
            next.next();
            continue;
        }
        let r = *indices
            .get(t as usize)
            .ok_or(KaczmarzError::IndexOutOfRange { index: t as usize, rows: indices.len() })?
            as usize;
        if r >= q.cols() {
            return Err(KaczmarzError::IndexOutOfRange { index: r, rows: q.cols() });
        }
        sweep.step(r);
        t += 1;
    }
    Ok(out)
}

/// Downlink precoding: same sweep as [`ul_detect`] with the user symbols as
/// the right-hand side; returns `x = Q w` (cost `M*K`, recorded) along with
/// the weights `w`.
pub fn dl_precode<T: Scalar>(
    q: &ComplexMatrix<T>,
    s: &[Complex<T>],
    xi: T,
    iterations: u64,
    stream: RngStream,
) -> Result<DownlinkRun<T>, KaczmarzError> {
    let (m, k) = (q.rows(), q.cols());
    if s.len() != k {
        return Err(KaczmarzError::ShapeMismatch {
            expected: format!("symbol vector of length {k}"),
            got: format!("{}", s.len()),
        });
    }
    let dist = build_row_distribution(q, xi)?;
    let mut sweep = KaSweep::new(q, xi, s, &dist, (m * k) as u64);
    let mut rng = stream.rng();
    let mut indices = Vec::with_capacity(iterations as usize);
    for _ in 0..iterations {
        indices.push(sweep.sample_step(&mut rng) as u32);
    }
    let mut state = sweep.into_state();
    let w = state.v.clone();
    let x = q.mul_vec(&w);
    state.ops += (m * k) as u64;
    Ok(DownlinkRun { x, w, state, indices })
}

/// Basic randomized Kaczmarz on a general system `A x = b`, rows sampled
/// proportionally to their squared norms. Projects the iterate onto one
/// equation per step; after the step the selected equation holds exactly.
pub fn ka_basic<T: Scalar>(
    a: &ComplexMatrix<T>,
    b: &[Complex<T>],
    iterations: u64,
    stream: RngStream,
    init: &[Complex<T>],
) -> Result<ComplexVector<T>, KaczmarzError> {
    assert_eq!(b.len(), a.rows(), "rhs length must equal row count");
    assert_eq!(init.len(), a.cols(), "init length must equal column count");
    let dist = row_norm_distribution(a)?;
    let mut x = init.to_vec();
    let mut rng = stream.rng();
    let mut row = vec![Complex::new(T::zero(), T::zero()); a.cols()];
    for _ in 0..iterations {
        let r = dist.sample(&mut rng);
        let w = dist.weight(r);
        if w <= T::zero() {
            return Err(KaczmarzError::ZeroRowSelected(r));
        }
        // a_r is the conjugate of row r; <a_r, x> is the plain row product.
        let mut prod = Complex::new(T::zero(), T::zero());
        for (j, (row_j, &x_j)) in row.iter_mut().zip(&x).enumerate() {
            let arj = a[(r, j)];
            *row_j = arj.conj();
            prod = prod + arj * x_j;
        }
        let gamma = (b[r] - prod) / Complex::new(w, T::zero());
        axpy(gamma, &row, &mut x);
    }
    Ok(x)
}
