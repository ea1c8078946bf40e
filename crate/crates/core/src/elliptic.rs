//! Elliptical rotations `E(theta; L) = [[cos t, -L sin t], [(1/L) sin t, cos t]]`
//! for classically stable cycles (`|h| <= 1`).
//!
//! Rotations sharing `L` form a group, so fixed-`L` chains never grow.
//! Fluctuating `L_k = L0 (1 + eta_k)` with symmetric `eta` produces growth at
//! rate `(1/2) <ln(cos^2 theta + R sin^2 theta)>`, `R = <1/(1 + eta)>`.

use crate::ensembles::{DistributionSpec, StreamHandle};
use crate::error::{Error, Result};
use crate::stats::BatchedMean;
use crate::symplectic::{CycleMatrix, GrowthEstimate, Mat2, PARABOLIC_TOL};

/// Samples used when `R` has no closed form.
pub const R_QUADRATURE_SAMPLES: usize = 1_000_000;

/// Seed of the deterministic quadrature for `R`.
pub const R_QUADRATURE_SEED: u64 = 0x5EED_0004;

/// Below this `|cos theta|` the `(x, phi)` form is not used.
pub const MIN_COS_FOR_FACTORIZATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticParams {
    pub theta: f64,
    pub l: f64,
}

impl EllipticParams {
    pub fn new(theta: f64, l: f64) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() || !theta.is_finite() {
            return Err(Error::Domain(format!(
                "elliptic rotation needs finite theta and L > 0, got ({theta}, {l})"
            )));
        }
        Ok(Self { theta, l })
    }

    pub fn matrix(&self) -> CycleMatrix {
        let (s, c) = quarter_exact_sin_cos(self.theta);
        CycleMatrix::new(Mat2::new(c, -self.l * s, s / self.l, c))
            .expect("elliptic rotations are unimodular")
    }

    /// `(x, phi) = (L / tan theta, -tan^2 theta)`, the `M = cos(theta) B` form.
    /// Refused when `|cos theta|` is below [`MIN_COS_FOR_FACTORIZATION`].
    pub fn to_x_phi(&self) -> Result<(f64, f64)> {
        let (s, c) = quarter_exact_sin_cos(self.theta);
        if c.abs() <= MIN_COS_FOR_FACTORIZATION {
            return Err(Error::SingularFactorization { h: c });
        }
        let t = s / c;
        Ok((self.l / t, -t * t))
    }
}

/// `E(theta; L)` as a cycle matrix.
/// `sin_cos` that is exact at multiples of `pi/2`.
///
/// `cos(FRAC_PI_2)` is `6e-17`, not zero; in a `theta = pi/2` chain that
/// residue couples to the random walk of `ln L` and shows up as spurious growth.
pub fn quarter_exact_sin_cos(theta: f64) -> (f64, f64) {
    let r = theta / std::f64::consts::FRAC_PI_2;
    let k = r.round();
    if (r - k).abs() <= 4.0 * f64::EPSILON * k.abs().max(1.0) {
        match k.rem_euclid(4.0) as u8 {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        theta.sin_cos()
    }
}

pub fn elliptic_matrix(p: EllipticParams) -> Result<CycleMatrix> {
    EllipticParams::new(p.theta, p.l).map(|p| p.matrix())
}

/// `E(t1; L) E(t2; L) = E(t1 + t2; L)`.
pub fn compose_same_l(p1: EllipticParams, p2: EllipticParams) -> Result<EllipticParams> {
    if (p1.l - p2.l).abs() > 1e-12 * p1.l.max(p2.l) {
        return Err(Error::LMismatch {
            left: p1.l,
            right: p2.l,
        });
    }
    EllipticParams::new(p1.theta + p2.theta, p1.l)
}

/// `(theta, L)` of a stable cycle: `h = cos theta`, `L = sin theta / g`.
///
/// At `|h| = 1` the matrix is `+-I` whatever `L` is; `L = 1` is returned.
pub fn from_stable_cycle(h: f64, g: f64) -> Result<EllipticParams> {
    if h.abs() > 1.0 + PARABOLIC_TOL {
        return Err(Error::WrongRegime(format!(
            "elliptic form needs |h| <= 1, got h = {h}"
        )));
    }
    if g == 0.0 {
        return Err(Error::DegenerateCycle { h });
    }
    let h = h.clamp(-1.0, 1.0);
    let s = ((1.0 - h) * (1.0 + h)).sqrt();
    if s == 0.0 {
        let theta = if h > 0.0 { 0.0 } else { std::f64::consts::PI };
        return EllipticParams::new(theta, 1.0);
    }
    // E(-theta; -L) = E(theta; L): negative g is absorbed into theta < 0
    let theta = s.atan2(h);
    if g < 0.0 {
        EllipticParams::new(-theta, -s / g)
    } else {
        EllipticParams::new(theta, s / g)
    }
}

/// Symmetric relative fluctuations of `L` about `l0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationSpec {
    pub l0: f64,
    pub eta: DistributionSpec,
}

impl FluctuationSpec {
    /// Requires `l0 > 0`, `eta` symmetric about zero and supported in
    /// `(-1, inf)`.
    pub fn new(l0: f64, eta: DistributionSpec) -> Result<Self> {
        eta.validate()?;
        if !(l0 > 0.0) {
            return Err(Error::Domain(format!("L0 must be positive, got {l0}")));
        }
        if !eta.is_symmetric_about_zero() {
            return Err(Error::Domain(format!(
                "eta = {eta} is not symmetric about zero"
            )));
        }
        if eta.support().0 <= -1.0 {
            return Err(Error::Domain(format!(
                "eta = {eta} reaches -1; L would vanish"
            )));
        }
        Ok(Self { l0, eta })
    }

    /// `R = <1/(1 + eta)>`.
    pub fn r_factor(&self) -> Result<f64> {
        r_factor(&self.eta)
    }

    /// `L_k = l0 (1 + eta_k)` for the given `eta` stream.
    pub fn l_at(&self, eta: f64) -> f64 {
        self.l0 * (1.0 + eta)
    }
}

/// `<1/(1 + eta)>`: closed form for constant and uniform `eta`, otherwise a
/// deterministic Monte Carlo quadrature.
pub fn r_factor(eta: &DistributionSpec) -> Result<f64> {
    let r = match r_factor_closed_form(eta) {
        Some(r) => r,
        None => r_factor_quadrature(eta, R_QUADRATURE_SAMPLES, R_QUADRATURE_SEED)?,
    };
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::Domain(format!(
            "<1/(1+eta)> is not finite for eta = {eta}"
        )));
    }
    Ok(r)
}

pub fn r_factor_closed_form(eta: &DistributionSpec) -> Option<f64> {
    match *eta {
        DistributionSpec::Constant(c) => Some(1.0 / (1.0 + c)),
        _ => eta
            .as_uniform()
            .map(|(lo, hi)| ((1.0 + hi) / (1.0 + lo)).ln() / (hi - lo)),
    }
}

pub fn r_factor_quadrature(eta: &DistributionSpec, samples: usize, seed: u64) -> Result<f64> {
    if eta.support().0 <= -1.0 {
        return Err(Error::Domain(format!("eta = {eta} reaches -1")));
    }
    let h = StreamHandle::new(*eta, seed)?;
    let sum: f64 = h.values_par(samples).iter().map(|e| 1.0 / (1.0 + e)).sum();
    Ok(sum / samples as f64)
}

/// Growth rate for variable `theta_k` and fluctuating `L`.
pub fn gamma_theorem4<I>(thetas: I, f: &FluctuationSpec, n: usize) -> Result<GrowthEstimate>
where
    I: IntoIterator<Item = f64>,
{
    if n == 0 {
        return Err(Error::Domain("need n >= 1".into()));
    }
    let r = f.r_factor()?;
    // Jensen: R >= 1/(1 + <eta>) = 1 for symmetric eta
    if r < 1.0 - 1e-15 {
        return Err(Error::Domain(format!("R = {r} < 1; eta is not symmetric")));
    }
    let mut acc = BatchedMean::new(n);
    let mut got = 0;
    for theta in thetas.into_iter().take(n) {
        let (s, c) = theta.sin_cos();
        acc.push(0.5 * (c * c + s * s * r).ln());
        got += 1;
    }
    if got < n {
        return Err(Error::StreamTooShort { need: n, got });
    }
    let est = GrowthEstimate::from_batches(&acc, n, n);
    debug_assert!(est.gamma >= -1e-15);
    Ok(est)
}

/// Small-`eta` reduction `(1/2) <sin^2 theta> <eta^2>`.
///
/// Inaccurate at `theta = pi/2`, where the true rate vanishes.
pub fn gamma_small_eta(mean_sin2_theta: f64, mean_eta2: f64) -> f64 {
    0.5 * mean_sin2_theta * mean_eta2
}
