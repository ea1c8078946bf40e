//! `B_k` chain experiments over `x_k` and `phi_k` ensembles.
//!
//! The `phi = 1` reference rate `gamma0` is measured with the same direct
//! product on the same `x_k` draws as `gamma_direct`, so the two share their
//! finite-`n` boundary terms and `A = 0` reproduces `gamma0` exactly.

use crate::approx::{
    delta_gamma_near_unity, gamma_approx1, gamma_approx2, gamma_small_phi, ClosureSample,
    MomentSummary, SmallPhiForm,
};
use crate::ensembles::{DistributionSpec, StreamHandle};
use crate::error::{Error, Result};
use crate::exact::{gamma_highly_unstable, gamma_lower_bound, gamma_theorem1};
use crate::stats::{loglog_slope, BatchedMean};
use crate::symplectic::{b_matrix, lyapunov_direct, GrowthEstimate, ProductState};

use super::{over_grid, substream, ExperimentConfig, Table};

/// Draws `n` values of `x` and of the unit `xi`.
fn draws(
    x: DistributionSpec,
    xi: DistributionSpec,
    seed: u64,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let xs = StreamHandle::new(x, seed)?
        .substream(substream::X)
        .values_par(n);
    let us = StreamHandle::new(xi, seed)?
        .substream(substream::XI)
        .values_par(n);
    Ok((xs, us))
}

/// Direct-product growth of `B(x_k, phi_k)` and of `B(x_k, 1)` in one pass,
/// with the standard error of their difference.
struct PairedChains {
    unit: GrowthEstimate,
    chain: GrowthEstimate,
    diff_std_error: f64,
}

fn paired_chains(xs: &[f64], phis: impl Iterator<Item = f64>) -> Result<PairedChains> {
    let n = xs.len();
    let mut unit = ProductState::identity();
    let mut chain = ProductState::identity();
    let (mut au, mut ac, mut ad) = (
        BatchedMean::new(n),
        BatchedMean::new(n),
        BatchedMean::new(n),
    );
    for (&x, phi) in xs.iter().zip(phis) {
        let du = unit.push(b_matrix(x, 1.0))?;
        let dc = chain.push(b_matrix(x, phi))?;
        au.push(du);
        ac.push(dc);
        ad.push(du - dc);
    }
    Ok(PairedChains {
        unit: GrowthEstimate::from_batches(&au, n, n),
        chain: GrowthEstimate::from_batches(&ac, n, n),
        diff_std_error: ad.std_error(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig1Point {
    pub a: f64,
    pub gamma_direct: f64,
    pub gamma_theorem2: f64,
    pub delta: f64,
    pub std_error: f64,
}

/// Small-`phi` point: `phi_k = a xi_k`.
pub fn fig1_point(
    xs: &[f64],
    us: &[f64],
    x: &DistributionSpec,
    xi: &DistributionSpec,
    a: f64,
) -> Result<Fig1Point> {
    let n = xs.len();
    let direct = lyapunov_direct(xs.iter().zip(us).map(|(&x, &u)| b_matrix(x, a * u)), n)?;
    let phi = xi.scaled(a)?;
    let m = match MomentSummary::from_specs(x, &phi) {
        Ok(m) => m,
        Err(Error::NotImplemented(_)) => {
            let phis: Vec<f64> = us.iter().map(|u| a * u).collect();
            MomentSummary::from_samples(xs, &phis)?
        }
        Err(e) => return Err(e),
    };
    let gamma_theorem2 = gamma_small_phi(&m, SmallPhiForm::Log)?;
    Ok(Fig1Point {
        a,
        gamma_direct: direct.gamma,
        gamma_theorem2,
        delta: gamma_theorem2 - direct.gamma,
        std_error: direct.std_error,
    })
}

fn run_columns(cfg: &ExperimentConfig) -> [super::Cell; 2] {
    [cfg.run.n_cycles.into(), cfg.run.seed.into()]
}

pub fn run_fig1(cfg: &ExperimentConfig) -> Result<Table> {
    let (x, xi) = (cfg.x_spec()?, cfg.xi_spec()?);
    let (xs, us) = draws(x, xi, cfg.run.seed, cfg.run.n_cycles)?;
    let points = over_grid(&cfg.grid.amplitudes, |a| fig1_point(&xs, &us, &x, &xi, a))?;
    let mut t = Table::new(&[
        "a",
        "gamma_direct",
        "gamma_theorem2",
        "delta",
        "stderr",
        "n_cycles",
        "seed",
    ]);
    for p in &points {
        let mut row = vec![
            p.a.into(),
            p.gamma_direct.into(),
            p.gamma_theorem2.into(),
            p.delta.into(),
            p.std_error.into(),
        ];
        row.extend(run_columns(cfg));
        t.push(row);
    }
    let a: Vec<f64> = points.iter().map(|p| p.a).collect();
    let g: Vec<f64> = points.iter().map(|p| p.gamma_direct).collect();
    let d: Vec<f64> = points.iter().map(|p| p.delta).collect();
    t.note("slope_gamma_vs_a", loglog_slope(&a, &g).unwrap_or(f64::NAN));
    t.note("slope_delta_vs_a", loglog_slope(&a, &d).unwrap_or(f64::NAN));
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig2Point {
    pub amplitude: f64,
    pub gamma0: f64,
    pub gamma_direct: f64,
    pub delta_gamma_true: f64,
    pub delta_gamma_theorem3: f64,
    pub error: f64,
    pub std_error: f64,
}

/// Near-unity point: `phi_k = 1 - A xi_k`.
pub fn fig2_point(xs: &[f64], us: &[f64], amplitude: f64) -> Result<Fig2Point> {
    let n = xs.len();
    let phi = |u: &f64| 1.0 - amplitude * u;
    let pair = paired_chains(xs, us.iter().map(phi))?;
    let true_delta = pair.unit.gamma - pair.chain.gamma;
    let thm3 = delta_gamma_near_unity(xs.iter().copied().zip(us.iter().map(phi)), n)?;
    Ok(Fig2Point {
        amplitude,
        gamma0: pair.unit.gamma,
        gamma_direct: pair.chain.gamma,
        delta_gamma_true: true_delta,
        delta_gamma_theorem3: thm3,
        error: thm3 - true_delta,
        std_error: pair.diff_std_error,
    })
}

pub fn run_fig2(cfg: &ExperimentConfig) -> Result<Table> {
    let (xs, us) = draws(
        cfg.x_spec()?,
        cfg.xi_spec()?,
        cfg.run.seed,
        cfg.run.n_cycles,
    )?;
    let points = over_grid(&cfg.grid.amplitudes, |a| fig2_point(&xs, &us, a))?;
    let mut t = Table::new(&[
        "A",
        "gamma0",
        "gamma_direct",
        "delta_gamma_true",
        "delta_gamma_thm3",
        "error",
        "stderr",
        "n_cycles",
        "seed",
    ]);
    for p in &points {
        let mut row = vec![
            p.amplitude.into(),
            p.gamma0.into(),
            p.gamma_direct.into(),
            p.delta_gamma_true.into(),
            p.delta_gamma_theorem3.into(),
            p.error.into(),
            p.std_error.into(),
        ];
        row.extend(run_columns(cfg));
        t.push(row);
    }
    let a: Vec<f64> = points.iter().map(|p| p.amplitude).collect();
    let d: Vec<f64> = points.iter().map(|p| p.delta_gamma_true).collect();
    let e: Vec<f64> = points.iter().map(|p| p.error.abs()).collect();
    t.note(
        "slope_delta_gamma_vs_A",
        loglog_slope(&a, &d).unwrap_or(f64::NAN),
    );
    t.note("slope_error_vs_A", loglog_slope(&a, &e).unwrap_or(f64::NAN));
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig3Point {
    pub amplitude: f64,
    pub gamma0: f64,
    /// `gamma0` from the closed form in `x` alone.
    pub gamma0_closed_form: f64,
    pub gamma_direct: f64,
    pub gamma_approx1: f64,
    pub gamma_approx2: f64,
    pub lower_bound: f64,
    pub std_error: f64,
}

/// Closure inputs from consecutive cycles: `x = [x_k, x_{k-1}, x_{k-2}]`,
/// `phi = [phi_k, phi_{k-1}]`.
fn closure_windows<'a>(xs: &'a [f64], phis: &'a [f64]) -> impl Iterator<Item = ClosureSample> + 'a {
    (2..xs.len()).map(move |k| ClosureSample {
        x: [xs[k], xs[k - 1], xs[k - 2]],
        phi: [phis[k], phis[k - 1]],
    })
}

pub fn fig3_point(xs: &[f64], us: &[f64], amplitude: f64) -> Result<Fig3Point> {
    let n = xs.len();
    let phis: Vec<f64> = us.iter().map(|u| 1.0 - amplitude * u).collect();
    let pair = paired_chains(xs, phis.iter().copied())?;
    let closed = gamma_highly_unstable(xs.iter().copied(), n)?;
    let a1 = gamma_approx1(closure_windows(xs, &phis), n - 2)?;
    let a2 = gamma_approx2(closure_windows(xs, &phis), n - 2)?;
    let lower = gamma_lower_bound(pair.unit.gamma, phis.iter().copied(), n)?;
    Ok(Fig3Point {
        amplitude,
        gamma0: pair.unit.gamma,
        gamma0_closed_form: closed.gamma,
        gamma_direct: pair.chain.gamma,
        gamma_approx1: a1,
        gamma_approx2: a2,
        lower_bound: lower,
        std_error: pair.chain.std_error,
    })
}

pub fn run_fig3(cfg: &ExperimentConfig) -> Result<Table> {
    let (xs, us) = draws(
        cfg.x_spec()?,
        cfg.xi_spec()?,
        cfg.run.seed,
        cfg.run.n_cycles,
    )?;
    let points = over_grid(&cfg.grid.amplitudes, |a| fig3_point(&xs, &us, a))?;
    let mut t = Table::new(&[
        "A",
        "gamma0",
        "gamma_direct",
        "gamma_approx1",
        "gamma_approx2",
        "lower_bound",
        "stderr",
        "n_cycles",
        "seed",
    ]);
    for p in &points {
        let mut row = vec![
            p.amplitude.into(),
            p.gamma0.into(),
            p.gamma_direct.into(),
            p.gamma_approx1.into(),
            p.gamma_approx2.into(),
            p.lower_bound.into(),
            p.std_error.into(),
        ];
        row.extend(run_columns(cfg));
        t.push(row);
    }
    if let Some(p) = points.first() {
        t.note("gamma0_closed_form", p.gamma0_closed_form);
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectPoint {
    pub direct: GrowthEstimate,
    pub theorem1: GrowthEstimate,
}

impl DirectPoint {
    pub fn joint_std_error(&self) -> f64 {
        self.direct.joint_std_error(&self.theorem1)
    }
}

/// One `(x, phi)` ensemble through the direct product and the recursion.
pub fn direct_point(
    x: DistributionSpec,
    phi: DistributionSpec,
    seed: u64,
    n: usize,
) -> Result<DirectPoint> {
    let xs = StreamHandle::new(x, seed)?.substream(substream::X);
    let ps = StreamHandle::new(phi, seed)?.substream(substream::XI);
    let direct = lyapunov_direct(xs.iter().zip(ps.iter()).map(|(x, p)| b_matrix(x, p)), n)?;
    let theorem1 = gamma_theorem1(xs.iter().zip(ps.iter()), n)?;
    Ok(DirectPoint {
        direct: direct.with_seed(seed),
        theorem1: theorem1.with_seed(seed),
    })
}

pub fn run_direct(cfg: &ExperimentConfig) -> Result<Table> {
    let p = direct_point(
        cfg.x_spec()?,
        cfg.phi_spec()?,
        cfg.run.seed,
        cfg.run.n_cycles,
    )?;
    let mut t = Table::new(&[
        "gamma_direct",
        "gamma_theorem1",
        "difference",
        "stderr_direct",
        "stderr_theorem1",
        "n_cycles",
        "seed",
    ]);
    let mut row = vec![
        p.direct.gamma.into(),
        p.theorem1.gamma.into(),
        (p.theorem1.gamma - p.direct.gamma).into(),
        p.direct.std_error.into(),
        p.theorem1.std_error.into(),
    ];
    row.extend(run_columns(cfg));
    t.push(row);
    Ok(t)
}
