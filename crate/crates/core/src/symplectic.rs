//! Per-cycle transfer matrices, their classification, and overflow-safe
//! products.
//!
//! A Hill cycle with a symmetric barrier maps principal-solution coefficients
//! through
//!
//! ```text
//!     M = [ h   (h^2 - 1)/g ]
//!         [ g        h      ]
//! ```
//!
//! which has unit determinant. When `h != 0` it factors as `M = h B` with
//! `B = [[1, x phi], [1/x, 1]]`, `x = h/g` and `phi = 1 - 1/h^2`.
//!
//! Products are accumulated in a [`ProductState`], which keeps the running
//! product normalized and folds the magnitude into a log scale so that chains
//! of millions of factors do not overflow.

use std::ops::Mul;

use crate::error::{Error, Result};
use crate::stats::BatchedMean;

/// Default tolerance for the parabolic band `||h| - 1| <= tol`.
pub const PARABOLIC_TOL: f64 = 1e-12;

/// Relative tolerance on `det = 1` accepted by [`CycleMatrix::new`].
pub const UNIMODULAR_TOL: f64 = 1e-12;

/// Below this `|h|` the `h B` factorization is refused.
pub const FACTORIZATION_MIN_H: f64 = 1e-6;

/// Plain real 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Self { m11, m12, m21, m22 }
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)
    }

    pub fn frobenius(&self) -> f64 {
        (self.m11 * self.m11 + self.m12 * self.m12 + self.m21 * self.m21 + self.m22 * self.m22)
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.m11
            .abs()
            .max(self.m12.abs())
            .max(self.m21.abs())
            .max(self.m22.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.m11.is_finite() && self.m12.is_finite() && self.m21.is_finite() && self.m22.is_finite()
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> f64 {
        let tr = self.trace();
        let det = self.det();
        let disc = tr * tr - 4.0 * det;
        if disc >= 0.0 {
            // stable root: the larger one never suffers cancellation
            let big = 0.5 * (tr + tr.signum() * disc.sqrt());
            big.abs()
        } else {
            det.abs().sqrt()
        }
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (self.m11 - other.m11)
            .abs()
            .max((self.m12 - other.m12).abs())
            .max((self.m21 - other.m21).abs())
            .max((self.m22 - other.m22).abs())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.m11 * r.m11 + self.m12 * r.m21,
            self.m11 * r.m12 + self.m12 * r.m22,
            self.m21 * r.m11 + self.m22 * r.m21,
            self.m21 * r.m12 + self.m22 * r.m22,
        )
    }
}

/// Unit-determinant map of one Hill cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleMatrix(Mat2);

impl CycleMatrix {
    /// Wraps `m` after checking `det m = 1` to relative tolerance
    /// [`UNIMODULAR_TOL`].
    pub fn new(m: Mat2) -> Result<Self> {
        let det = m.det();
        let scale = 1.0_f64
            .max((m.m11 * m.m22).abs())
            .max((m.m12 * m.m21).abs());
        if !m.is_finite() || (det - 1.0).abs() > UNIMODULAR_TOL * scale {
            return Err(Error::NotUnimodular { det });
        }
        Ok(Self(m))
    }

    /// `[[h, (h^2 - 1)/g], [g, h]]` from the principal solutions.
    pub fn from_principal(h: f64, g: f64) -> Result<Self> {
        if g == 0.0 {
            return Err(Error::DegenerateCycle { h });
        }
        if !h.is_finite() || !g.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite cycle (h = {h}, g = {g})"
            )));
        }
        Ok(Self(Mat2::new(h, (h * h - 1.0) / g, g, h)))
    }

    /// The `g = 0` cycle: `|h| = 1` and the upper-right entry is free.
    pub fn parabolic(h: f64, upper: f64) -> Result<Self> {
        if (h.abs() - 1.0).abs() > PARABOLIC_TOL {
            return Err(Error::WrongRegime(format!(
                "a cycle with g = 0 needs |h| = 1, got h = {h}"
            )));
        }
        let s = h.signum();
        Ok(Self(Mat2::new(s, upper, 0.0, s)))
    }

    pub fn matrix(&self) -> Mat2 {
        self.0
    }

    pub fn h(&self) -> f64 {
        self.0.m11
    }

    pub fn g(&self) -> f64 {
        self.0.m21
    }
}

impl From<CycleMatrix> for Mat2 {
    fn from(m: CycleMatrix) -> Mat2 {
        m.0
    }
}

impl Mul for CycleMatrix {
    type Output = CycleMatrix;

    fn mul(self, r: CycleMatrix) -> CycleMatrix {
        CycleMatrix(self.0 * r.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `|h| > 1`: real eigenvalues of equal sign, classically unstable.
    Hyperbolic,
    /// `|h| < 1`: complex-conjugate eigenvalues on the unit circle.
    Elliptic,
    /// `|h| = 1`: degenerate eigenvalue `+1` or `-1`.
    Parabolic,
}

/// Classifies a cycle from `|h|` alone.
pub fn classify(h: f64, tol: f64) -> Regime {
    let a = h.abs();
    if a > 1.0 + tol {
        Regime::Hyperbolic
    } else if a < 1.0 - tol {
        Regime::Elliptic
    } else {
        Regime::Parabolic
    }
}

/// Per-cycle random variables `(h, g, x, phi)` and the regime tag.
///
/// `x` is `h/g` and is infinite for a parabolic `g = 0` cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleParams {
    pub h: f64,
    pub g: f64,
    pub x: f64,
    pub phi: f64,
    pub regime: Regime,
}

impl CycleParams {
    pub fn new(h: f64, g: f64) -> Self {
        Self::with_tol(h, g, PARABOLIC_TOL)
    }

    pub fn with_tol(h: f64, g: f64, tol: f64) -> Self {
        Self {
            h,
            g,
            x: h / g,
            phi: 1.0 - 1.0 / (h * h),
            regime: classify(h, tol),
        }
    }

    /// Whether the exact recursion may consume this cycle (`x` finite and > 0).
    pub fn has_positive_x(&self) -> bool {
        self.x.is_finite() && self.x > 0.0
    }

    pub fn b_matrix(&self) -> Mat2 {
        b_matrix(self.x, self.phi)
    }
}

/// `B = [[1, x phi], [1/x, 1]]`.
pub fn b_matrix(x: f64, phi: f64) -> Mat2 {
    Mat2::new(1.0, x * phi, 1.0 / x, 1.0)
}

/// Splits a symmetric cycle matrix as `M = h B`.
pub fn decompose(m: &CycleMatrix) -> Result<(f64, Mat2)> {
    let a = m.matrix();
    let h = a.m11;
    if (a.m11 - a.m22).abs() > 1e-12 * a.m11.abs().max(1.0) {
        return Err(Error::Domain(format!(
            "decomposition needs m11 = m22, got {} and {}",
            a.m11, a.m22
        )));
    }
    if h.abs() <= FACTORIZATION_MIN_H {
        return Err(Error::SingularFactorization { h });
    }
    Ok((h, Mat2::new(1.0, a.m12 / h, a.m21 / h, 1.0)))
}

/// Matrix norm used to renormalize running products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    Frobenius,
    MaxEntry,
}

impl Norm {
    pub fn of(self, m: &Mat2) -> f64 {
        match self {
            Norm::Frobenius => m.frobenius(),
            Norm::MaxEntry => m.max_abs(),
        }
    }
}

/// Running product `M_n ... M_1` held as `exp(log_scale) * scaled`, with
/// `norm(scaled) = 1`.
///
/// The determinant is tracked separately (sign and log-magnitude of the
/// factor determinants), because recomputing it from `scaled` cancels
/// catastrophically once the product is strongly elongated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductState {
    pub scaled: Mat2,
    pub log_scale: f64,
    pub count: usize,
    norm: Norm,
    log_abs_det: f64,
    det_sign: f64,
}

impl Default for ProductState {
    fn default() -> Self {
        Self::identity()
    }
}

impl ProductState {
    /// Identity under the Frobenius norm: `scaled = I/sqrt(2)`,
    /// `log_scale = ln sqrt(2)`.
    pub fn identity() -> Self {
        Self::identity_with(Norm::Frobenius)
    }

    pub fn identity_with(norm: Norm) -> Self {
        let n = norm.of(&Mat2::IDENTITY);
        Self {
            scaled: Mat2::IDENTITY.scale(1.0 / n),
            log_scale: n.ln(),
            count: 0,
            norm,
            log_abs_det: 0.0,
            det_sign: 1.0,
        }
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    /// Left-multiplies by `m` and renormalizes. Returns the log of the
    /// normalization factor, which is the increment of `log_scale`.
    pub fn push(&mut self, m: impl Into<Mat2>) -> Result<f64> {
        let m = m.into();
        let next = m * self.scaled;
        let s = self.norm.of(&next);
        if !next.is_finite() || !(s.is_finite() && s > 0.0) {
            return Err(Error::NumericOverflow {
                count: self.count + 1,
            });
        }
        let d = m.det();
        let inc = s.ln();
        self.scaled = next.scale(1.0 / s);
        self.log_scale += inc;
        self.count += 1;
        self.log_abs_det += d.abs().ln();
        if d < 0.0 {
            self.det_sign = -self.det_sign;
        }
        Ok(inc)
    }

    /// Value-semantics form of [`push`](Self::push).
    pub fn multiply(mut self, m: impl Into<Mat2>) -> Result<Self> {
        self.push(m)?;
        Ok(self)
    }

    /// Recomposed product. Overflows to infinity for long unstable chains.
    pub fn product(&self) -> Mat2 {
        self.scaled.scale(self.log_scale.exp())
    }

    /// Determinant of the product from the tracked factor determinants.
    pub fn determinant(&self) -> f64 {
        self.det_sign * self.log_abs_det.exp()
    }

    /// Determinant recomputed from the normalized entries. Only meaningful
    /// while the product stays well conditioned.
    pub fn determinant_from_entries(&self) -> f64 {
        self.scaled.det() * (2.0 * self.log_scale).exp()
    }

    /// `ln |trace|` of the product.
    pub fn log_abs_trace(&self) -> f64 {
        self.scaled.trace().abs().ln() + self.log_scale
    }

    /// `ln` of the top eigenvalue modulus of the product.
    pub fn log_spectral_radius(&self) -> f64 {
        let det_scaled = self.determinant() * (-2.0 * self.log_scale).exp();
        let tr = self.scaled.trace();
        let disc = tr * tr - 4.0 * det_scaled;
        let r = if disc >= 0.0 {
            (0.5 * (tr + tr.signum() * disc.sqrt())).abs()
        } else {
            det_scaled.abs().sqrt()
        };
        r.ln() + self.log_scale
    }

    /// `ln(norm(P) / norm(I))`: zero for the empty product.
    pub fn log_growth(&self) -> f64 {
        self.log_scale - self.norm.of(&Mat2::IDENTITY).ln()
    }
}

/// Free-function form of [`ProductState::multiply`].
pub fn multiply_accumulate(state: ProductState, m: impl Into<Mat2>) -> Result<ProductState> {
    state.multiply(m)
}

/// A growth rate in nats per cycle with its batched-means error bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEstimate {
    pub gamma: f64,
    pub n_cycles: usize,
    pub std_error: f64,
    pub seed: u64,
}

impl GrowthEstimate {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Combined error bar for comparing two independent-ish estimates.
    pub fn joint_std_error(&self, other: &GrowthEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }

    pub(crate) fn from_batches(acc: &BatchedMean, n_cycles: usize, denominator: usize) -> Self {
        Self {
            gamma: acc.total() / denominator as f64,
            n_cycles,
            std_error: acc.std_error(),
            seed: 0,
        }
    }
}

/// Direct Monte Carlo growth rate `(1/n) ln(|P_n| / |I|)` of the first `n`
/// matrices of `stream`, Frobenius-renormalized every factor.
pub fn lyapunov_direct<I>(stream: I, n: usize) -> Result<GrowthEstimate>
where
    I: IntoIterator,
    I::Item: Into<Mat2>,
{
    lyapunov_direct_with_norm(stream, n, Norm::Frobenius)
}

pub fn lyapunov_direct_with_norm<I>(stream: I, n: usize, norm: Norm) -> Result<GrowthEstimate>
where
    I: IntoIterator,
    I::Item: Into<Mat2>,
{
    if n == 0 {
        return Err(Error::Domain("lyapunov_direct needs n >= 1".into()));
    }
    let mut state = ProductState::identity_with(norm);
    let mut acc = BatchedMean::new(n);
    for m in stream.into_iter().take(n) {
        acc.push(state.push(m)?);
    }
    if state.count < n {
        return Err(Error::StreamTooShort {
            need: n,
            got: state.count,
        });
    }
    Ok(GrowthEstimate::from_batches(&acc, n, n))
}

/// `(1/n) sum ln|h_k|`, the scalar part of the growth of `M = h B`.
pub fn gamma_h_component<I>(stream: I, n: usize) -> Result<f64>
where
    I: IntoIterator<Item = f64>,
{
    if n == 0 {
        return Err(Error::Domain("gamma_h_component needs n >= 1".into()));
    }
    let mut sum = 0.0;
    let mut got = 0;
    for (k, h) in stream.into_iter().take(n).enumerate() {
        if h == 0.0 || !h.is_finite() {
            return Err(Error::Domain(format!(
                "log|h| undefined for h = {h} at cycle {k}"
            )));
        }
        sum += h.abs().ln();
        got += 1;
    }
    if got < n {
        return Err(Error::StreamTooShort { need: n, got });
    }
    Ok(sum / n as f64)
}
