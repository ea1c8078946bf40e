//! Exact growth rate of `B_k = [[1, x_k phi_k], [1/x_k, 1]]` products via the
//! `alpha` recursion, the `phi = 1` closed form, and the lower bound.
//!
//! For the running product `P_N = B_N ... B_1`, write the ratio of its first
//! column entries as `P11 / P21 = x_N alpha_N`. Left-multiplying by the next
//! factor gives
//!
//! ```text
//!     alpha' = (x phi + x_N alpha) / (x + x_N alpha)
//!     F      = 1 + (x^2 phi + b alpha x_N) / (x (b + alpha x_N))
//! ```
//!
//! where `F` is the growth of the linear functional `P11 + b P21`. The
//! product of the `F` factors telescopes, so every `b > 0` yields the same
//! rate; production paths use `b = 1`. A single factor has `alpha_1 = 1`.

use crate::error::{Error, Result};
use crate::stats::BatchedMean;
use crate::symplectic::GrowthEstimate;

/// Recursion state after some number of cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaState {
    pub alpha: f64,
    pub x_prev: f64,
    pub phi_prev: f64,
}

impl AlphaState {
    /// State after the first cycle: `alpha_1 = 1`.
    pub fn initial(x: f64, phi: f64) -> Self {
        Self {
            alpha: 1.0,
            x_prev: x,
            phi_prev: phi,
        }
    }

    /// `beta = alpha_{k-1} x_{k-1} / x_k`, so that
    /// `alpha_k = (phi_k + beta) / (1 + beta)`.
    pub fn beta(&self, x: f64) -> f64 {
        self.alpha * self.x_prev / x
    }
}

/// Advances the recursion by one cycle.
///
/// Fails with [`Error::SingularStep`] (index 0; chain drivers substitute the
/// real cycle index) when `x + x_prev alpha` vanishes, which can only happen
/// for `phi < 0`.
pub fn alpha_step(state: AlphaState, x: f64, phi: f64) -> Result<AlphaState> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "alpha recursion needs x > 0, got {x}"
        )));
    }
    let carried = state.x_prev * state.alpha;
    let den = x + carried;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::SingularStep { index: 0 });
    }
    Ok(AlphaState {
        alpha: (x * phi + carried) / den,
        x_prev: x,
        phi_prev: phi,
    })
}

/// Iteration factor `F` for the step into cycle `(x, phi)` from `state`.
pub fn growth_factor(state: &AlphaState, x: f64, phi: f64, b: f64) -> f64 {
    let carried = state.alpha * state.x_prev;
    1.0 + (x * x * phi + b * carried) / (x * (b + carried))
}

/// Sequential driver for the recursion. Feed cycles with
/// [`push`](Self::push); every cycle after the first yields `ln |F_k|`.
#[derive(Debug, Clone)]
pub struct AlphaChain {
    b: f64,
    state: Option<AlphaState>,
    index: usize,
}

impl AlphaChain {
    pub fn new() -> Self {
        Self::with_b(1.0)
    }

    /// Chain with an explicit functional weight `b`. Only tests need `b != 1`.
    pub fn with_b(b: f64) -> Self {
        Self {
            b,
            state: None,
            index: 0,
        }
    }

    pub fn state(&self) -> Option<AlphaState> {
        self.state
    }

    pub fn push(&mut self, x: f64, phi: f64) -> Result<Option<f64>> {
        let index = self.index;
        self.index += 1;
        let Some(state) = self.state else {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::Domain(format!("x must be positive, got {x}")).at_cycle(index));
            }
            self.state = Some(AlphaState::initial(x, phi));
            return Ok(None);
        };
        let f = growth_factor(&state, x, phi, self.b);
        let next = alpha_step(state, x, phi).map_err(|e| match e {
            Error::SingularStep { .. } => Error::SingularStep { index },
            other => other.at_cycle(index),
        })?;
        if f == 0.0 || !f.is_finite() {
            return Err(Error::SingularStep { index });
        }
        self.state = Some(next);
        Ok(Some(f.abs().ln()))
    }
}

impl Default for AlphaChain {
    fn default() -> Self {
        Self::new()
    }
}

fn need_two(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::Domain(format!("need n >= 2 cycles, got {n}")))
    } else {
        Ok(())
    }
}

/// Exact growth rate of the `B_k` chain from the `alpha` recursion with
/// `b = 1`. The rate is the mean of the `n - 1` factors `ln F_k`,
/// `k = 2..n`.
pub fn gamma_theorem1<I>(stream: I, n: usize) -> Result<GrowthEstimate>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    gamma_theorem1_with_b(stream, n, 1.0)
}

/// [`gamma_theorem1`] with an explicit functional weight `b > 0`.
pub fn gamma_theorem1_with_b<I>(stream: I, n: usize, b: f64) -> Result<GrowthEstimate>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    need_two(n)?;
    if !(b > 0.0) {
        return Err(Error::Domain(format!("b must be positive, got {b}")));
    }
    let mut chain = AlphaChain::with_b(b);
    let mut acc = BatchedMean::new(n - 1);
    let mut got = 0;
    for (x, phi) in stream.into_iter().take(n) {
        if let Some(term) = chain.push(x, phi)? {
            acc.push(term);
        }
        got += 1;
    }
    if got < n {
        return Err(Error::StreamTooShort { need: n, got });
    }
    Ok(GrowthEstimate::from_batches(&acc, n, n - 1))
}

/// Growth rate in the `phi = 1` regime: mean of `ln(1 + x_{k-1}/x_k)` over
/// `k = 2..n`.
pub fn gamma_highly_unstable<I>(stream: I, n: usize) -> Result<GrowthEstimate>
where
    I: IntoIterator<Item = f64>,
{
    need_two(n)?;
    let mut acc = BatchedMean::new(n - 1);
    let mut prev: Option<f64> = None;
    let mut got = 0;
    for (k, x) in stream.into_iter().take(n).enumerate() {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!("x must be positive, got {x}")).at_cycle(k));
        }
        if let Some(p) = prev {
            acc.push((p / x).ln_1p());
        }
        prev = Some(x);
        got += 1;
    }
    if got < n {
        return Err(Error::StreamTooShort { need: n, got });
    }
    Ok(GrowthEstimate::from_batches(&acc, n, n - 1))
}

/// Lower bound `gamma0 + (1/2) <ln phi_k>` on the growth rate for
/// `0 < phi_k <= 1`.
///
/// The bound is commonly quoted as `gamma0 - gamma <= (1/2) <ln phi>`, whose
/// right side is non-positive; the orientation implemented here,
/// `gamma >= gamma0 + (1/2) <ln phi>`, is the one that lies below `gamma0`.
pub fn gamma_lower_bound<I>(gamma0: f64, phis: I, n: usize) -> Result<f64>
where
    I: IntoIterator<Item = f64>,
{
    if n == 0 {
        return Err(Error::Domain("need n >= 1".into()));
    }
    let mut sum = 0.0;
    let mut got = 0;
    for (k, phi) in phis.into_iter().take(n).enumerate() {
        if !(phi > 0.0 && phi <= 1.0) {
            return Err(
                Error::Domain(format!("lower bound needs 0 < phi <= 1, got {phi}")).at_cycle(k),
            );
        }
        sum += phi.ln();
        got += 1;
    }
    if got < n {
        return Err(Error::StreamTooShort { need: n, got });
    }
    Ok(gamma0 + 0.5 * sum / n as f64)
}
