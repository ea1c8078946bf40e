//! Perturbative and heuristic growth rates for `B_k` products.
//!
//! * small `phi`: `ln(1 + sqrt(<1/x> <x phi>))`, error `O(<x phi>)`;
//! * `phi` near one: a first-order deficit below the `phi = 1` rate;
//! * two heuristic closures of the `alpha` recursion that replace `alpha` by
//!   a function of freshly sampled neighbours.

use crate::ensembles::{moments, DistributionSpec};
use crate::error::{Error, Result};

/// The two moments feeding the small-`phi` formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
    /// `<1/x_k>`
    pub mean_inv_x: f64,
    /// `<x_k phi_k>`
    pub mean_x_phi: f64,
    pub n: usize,
}

impl MomentSummary {
    /// Empirical moments of paired samples.
    pub fn from_samples(xs: &[f64], phis: &[f64]) -> Result<Self> {
        if xs.len() != phis.len() || xs.is_empty() {
            return Err(Error::Domain(
                "need equal, non-empty x and phi samples".into(),
            ));
        }
        let n = xs.len();
        let mut inv = 0.0;
        let mut xphi = 0.0;
        for (&x, &phi) in xs.iter().zip(phis) {
            if !(x > 0.0) {
                return Err(Error::Domain(format!("x must be positive, got {x}")));
            }
            inv += 1.0 / x;
            xphi += x * phi;
        }
        Ok(Self {
            mean_inv_x: inv / n as f64,
            mean_x_phi: xphi / n as f64,
            n,
        })
    }

    /// Exact moments for independent `x` and `phi` streams.
    pub fn from_specs(x: &DistributionSpec, phi: &DistributionSpec) -> Result<Self> {
        let mx = moments(x, &[-1, 1])?;
        let mphi = moments(phi, &[1])?;
        Ok(Self {
            mean_inv_x: mx[0],
            mean_x_phi: mx[1] * mphi[0],
            n: 0,
        })
    }
}

/// Which form of the small-`phi` rate to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmallPhiForm {
    /// `ln(1 + sqrt(<1/x><x phi>))`
    #[default]
    Log,
    /// `sqrt(<1/x><x phi>)`, equal to the log form at leading order.
    Sqrt,
}

/// Small-`phi` growth rate.
pub fn gamma_small_phi(m: &MomentSummary, form: SmallPhiForm) -> Result<f64> {
    if !(m.mean_x_phi >= 0.0) || !(m.mean_inv_x >= 0.0) {
        return Err(Error::Domain(format!(
            "small-phi rate needs <x phi> >= 0 and <1/x> >= 0, got {} and {}",
            m.mean_x_phi, m.mean_inv_x
        )));
    }
    let root = (m.mean_inv_x * m.mean_x_phi).sqrt();
    Ok(match form {
        SmallPhiForm::Log => root.ln_1p(),
        SmallPhiForm::Sqrt => root,
    })
}

/// First-order deficit `gamma0 - gamma` for `phi` near one:
/// mean over interior cycles of
/// `(1 - phi_k) x_k^2 / ((x_{k+1} + x_k)(x_k + x_{k-1}))`.
///
/// The first and last cycles lack a neighbour and are dropped.
pub fn delta_gamma_near_unity<I>(stream: I, n: usize) -> Result<f64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    if n < 3 {
        return Err(Error::Domain(format!("need n >= 3 cycles, got {n}")));
    }
    let mut it = stream.into_iter().take(n);
    let first = it.next();
    let second = it.next();
    let (Some((x0, _)), Some((mut x1, mut phi1))) = (first, second) else {
        return Err(Error::StreamTooShort { need: n, got: 0 });
    };
    let mut x0 = x0;
    let mut sum = 0.0;
    let mut got = 2;
    for (x2, phi2) in it {
        if !x2.is_finite() || !phi2.is_finite() {
            return Err(Error::Domain("non-finite input".into()));
        }
        sum += (1.0 - phi1) * x1 * x1 / ((x2 + x1) * (x1 + x0));
        x0 = x1;
        x1 = x2;
        phi1 = phi2;
        got += 1;
    }
    if got < n {
        return Err(Error::StreamTooShort { need: n, got });
    }
    Ok(sum / (n - 2) as f64)
}

/// One term of the heuristic closures: three independent `x` draws and two
/// independent `phi` draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureSample {
    pub x: [f64; 3],
    pub phi: [f64; 2],
}

/// Factor with `alpha_{k-1}` replaced by its one-step value from `alpha = 1`.
pub fn approx1_factor(s: &ClosureSample) -> f64 {
    let [x1, x2, x3] = s.x;
    let [p1, p2] = s.phi;
    let carried = x2 * (x2 * p2 + x3);
    1.0 + (x1 * x1 * p1 * (x2 + x3) + carried) / (x1 * ((x2 + x3) + carried))
}

/// Factor with `alpha_{k-1}` replaced by the constant-parameter fixed point.
pub fn approx2_factor(s: &ClosureSample) -> Result<f64> {
    let [x1, x2, x3] = s.x;
    let [p1, p2] = s.phi;
    let d = x3 - x2;
    let disc = d * d + 4.0 * x2 * x3 * p2;
    if disc < 0.0 {
        return Err(Error::Domain(format!(
            "negative discriminant {disc} in fixed-point closure (phi = {p2})"
        )));
    }
    let carried = x2 * (d + disc.sqrt());
    Ok(1.0 + (x1 * x1 * p1 * 2.0 * x3 + carried) / (x1 * (2.0 * x3 + carried)))
}

fn mean_log<I, F>(stream: I, n: usize, mut factor: F) -> Result<f64>
where
    I: IntoIterator<Item = ClosureSample>,
    F: FnMut(&ClosureSample) -> Result<f64>,
{
    if n == 0 {
        return Err(Error::Domain("need n >= 1".into()));
    }
    let mut sum = 0.0;
    let mut got = 0;
    for (j, s) in stream.into_iter().take(n).enumerate() {
        if s.x.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::Domain(format!("x must be positive, got {:?}", s.x)).at_cycle(j));
        }
        let f = factor(&s).map_err(|e| e.at_cycle(j))?;
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::Domain(format!("non-positive factor {f}")).at_cycle(j));
        }
        sum += f.ln();
        got += 1;
    }
    if got < n {
        return Err(Error::StreamTooShort { need: n, got });
    }
    Ok(sum / n as f64)
}

/// Mean of `ln F_j` with the one-step closure.
pub fn gamma_approx1<I>(stream: I, n: usize) -> Result<f64>
where
    I: IntoIterator<Item = ClosureSample>,
{
    mean_log(stream, n, |s| Ok(approx1_factor(s)))
}

/// Mean of `ln F_k` with the fixed-point closure.
pub fn gamma_approx2<I>(stream: I, n: usize) -> Result<f64>
where
    I: IntoIterator<Item = ClosureSample>,
{
    mean_log(stream, n, approx2_factor)
}
