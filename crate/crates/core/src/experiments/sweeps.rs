//! Elliptic-regime sweeps, Hill end-to-end runs and forcing extraction.

use std::f64::consts::FRAC_PI_2;
use std::fs::File;
use std::io::BufReader;

use crate::elliptic::{gamma_small_eta, gamma_theorem4, EllipticParams, FluctuationSpec};
use crate::ensembles::{moments, DistributionSpec, StreamHandle};
use crate::error::{Error, Result};
use crate::exact::gamma_theorem1;
use crate::forcing::{extract_cycles, ExtractedCycle, Trajectory};
use crate::hill::{cycle_stream, recursion_inputs, BarrierShape};
use crate::symplectic::{gamma_h_component, lyapunov_direct, Regime};

use super::{over_grid, substream, Cell, ExperimentConfig, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllipticCase {
    Sweep,
    /// `theta = pi/2` with fluctuating `L` only; the true rate is zero.
    HalfPiNull,
}

impl EllipticCase {
    fn label(self) -> &'static str {
        match self {
            EllipticCase::Sweep => "sweep",
            EllipticCase::HalfPiNull => "half_pi_null",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticPoint {
    pub eta_amplitude: f64,
    pub gamma_direct: f64,
    pub gamma_theorem4: f64,
    pub gamma_small_eta: f64,
    pub std_error: f64,
}

/// `E(theta_k; l0 (1 + a zeta_k))` with `zeta_k` drawn from `eta_base`.
pub fn elliptic_point(
    theta: DistributionSpec,
    eta_base: DistributionSpec,
    l0: f64,
    amplitude: f64,
    seed: u64,
    n: usize,
) -> Result<EllipticPoint> {
    let eta = eta_base.scaled(amplitude)?;
    let f = FluctuationSpec::new(l0, eta)?;
    let thetas = StreamHandle::new(theta, seed)?.substream(substream::THETA);
    let etas = StreamHandle::new(eta, seed)?.substream(substream::ETA);
    let mut bad = None;
    let matrices = thetas
        .iter()
        .zip(etas.iter())
        .enumerate()
        .map(|(k, (t, e))| match EllipticParams::new(t, f.l_at(e)) {
            Ok(p) => p.matrix(),
            Err(err) => {
                bad.get_or_insert(err.at_cycle(k));
                EllipticParams::new(t, l0).expect("l0 is positive").matrix()
            }
        });
    let direct = lyapunov_direct(matrices, n)?;
    if let Some(err) = bad {
        return Err(err);
    }
    let thm4 = gamma_theorem4(thetas.iter(), &f, n)?;
    let mean_sin2 = thetas.iter().take(n).map(|t| t.sin().powi(2)).sum::<f64>() / n as f64;
    let mean_eta2 = moments(&eta, &[2])?[0];
    Ok(EllipticPoint {
        eta_amplitude: amplitude,
        gamma_direct: direct.gamma,
        gamma_theorem4: thm4.gamma,
        gamma_small_eta: gamma_small_eta(mean_sin2, mean_eta2),
        std_error: direct.std_error,
    })
}

pub fn run_elliptic_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let theta = cfg.theta_spec()?;
    let eta = cfg.eta_spec()?;
    let (l0, seed, n) = (cfg.ensemble.l0, cfg.run.seed, cfg.run.n_cycles);
    let amps = &cfg.grid.amplitudes;
    let mut cases: Vec<(EllipticCase, DistributionSpec, f64)> = amps
        .iter()
        .map(|&a| (EllipticCase::Sweep, theta, a))
        .collect();
    let null_amp = amps.last().copied().filter(|&a| a > 0.0).unwrap_or(0.3);
    cases.push((
        EllipticCase::HalfPiNull,
        DistributionSpec::Constant(FRAC_PI_2),
        null_amp,
    ));
    let idx: Vec<f64> = (0..cases.len()).map(|i| i as f64).collect();
    let points = over_grid(&idx, |i| {
        let (_, th, a) = cases[i as usize];
        elliptic_point(th, eta, l0, a, seed, n)
    })?;
    let mut t = Table::new(&[
        "case",
        "eta_amplitude",
        "gamma_direct",
        "gamma_thm4",
        "gamma_small_eta",
        "stderr",
        "n_cycles",
        "seed",
    ]);
    for ((case, _, _), p) in cases.iter().zip(&points) {
        t.push(vec![
            case.label().into(),
            p.eta_amplitude.into(),
            p.gamma_direct.into(),
            p.gamma_theorem4.into(),
            p.gamma_small_eta.into(),
            p.std_error.into(),
            cfg.run.n_cycles.into(),
            cfg.run.seed.into(),
        ]);
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HillPoint {
    pub amplitude: f64,
    pub gamma_direct: f64,
    pub gamma_h: f64,
    /// Exact recursion over the cycles with `x > 0`; `NaN` when unavailable.
    pub gamma_theorem1: f64,
    pub excluded: usize,
    pub fraction_hyperbolic: f64,
    pub std_error: f64,
    pub warning: Option<String>,
}

impl HillPoint {
    pub fn gamma_decomposed(&self) -> f64 {
        self.gamma_h + self.gamma_theorem1
    }
}

/// Cycles with `q_k = amplitude * q_base_k`.
pub fn hill_point(
    af: DistributionSpec,
    q_base: DistributionSpec,
    shape: BarrierShape,
    amplitude: f64,
    seed: u64,
    n: usize,
) -> Result<HillPoint> {
    let cycles = cycle_stream(af, q_base.scaled(amplitude)?, shape, seed, n)?;
    let direct = lyapunov_direct(cycles.iter().map(|c| c.fundamental), n)?;
    let gamma_h = gamma_h_component(cycles.iter().map(|c| c.params.h), n)?;
    let hyper = cycles
        .iter()
        .filter(|c| c.params.regime == Regime::Hyperbolic)
        .count();
    let (inputs, excluded) = recursion_inputs(&cycles);
    let mut warning = (excluded > 0).then(|| {
        format!("amplitude {amplitude}: {excluded} cycles with x <= 0 left out of the recursion")
    });
    let gamma_theorem1 = if inputs.len() >= 2 {
        match gamma_theorem1(inputs.iter().copied(), inputs.len()) {
            Ok(g) => g.gamma,
            Err(e) => {
                warning = Some(format!("amplitude {amplitude}: recursion failed: {e}"));
                f64::NAN
            }
        }
    } else {
        f64::NAN
    };
    Ok(HillPoint {
        amplitude,
        gamma_direct: direct.gamma,
        gamma_h,
        gamma_theorem1,
        excluded,
        fraction_hyperbolic: hyper as f64 / n as f64,
        std_error: direct.std_error,
        warning,
    })
}

pub fn run_hill(cfg: &ExperimentConfig) -> Result<Table> {
    let (af, q, shape) = (cfg.af_spec()?, cfg.q_spec()?, cfg.shape()?);
    let (seed, n) = (cfg.run.seed, cfg.run.n_cycles);
    let points = over_grid(&cfg.grid.amplitudes, |a| {
        hill_point(af, q, shape, a, seed, n)
    })?;
    let mut t = Table::new(&[
        "amplitude",
        "gamma_direct",
        "gamma_h",
        "gamma_theorem1",
        "gamma_decomposed",
        "excluded_cycles",
        "fraction_hyperbolic",
        "stderr",
        "n_cycles",
        "seed",
    ]);
    for p in &points {
        t.push(vec![
            p.amplitude.into(),
            p.gamma_direct.into(),
            p.gamma_h.into(),
            p.gamma_theorem1.into(),
            p.gamma_decomposed().into(),
            p.excluded.into(),
            p.fraction_hyperbolic.into(),
            p.std_error.into(),
            n.into(),
            seed.into(),
        ]);
        t.warnings.extend(p.warning.clone());
    }
    Ok(t)
}

/// Reads the configured trajectory and extracts its forcing cycles.
pub fn extract_forcing(cfg: &ExperimentConfig) -> Result<Vec<ExtractedCycle>> {
    let path = cfg
        .forcing
        .trajectory
        .as_ref()
        .ok_or_else(|| Error::Config("no trajectory file configured".into()))?;
    let file = File::open(path).map_err(|e| Error::Config(format!("cannot open {path}: {e}")))?;
    let traj = Trajectory::read_csv(BufReader::new(file))?;
    extract_cycles(&cfg.halo()?, &traj)
}

pub fn run_extract_forcing(cfg: &ExperimentConfig) -> Result<Table> {
    let cycles = extract_forcing(cfg)?;
    Ok(cycles_table(&cycles))
}

pub fn cycles_table(cycles: &[ExtractedCycle]) -> Table {
    let mut t = Table::new(&["cycle_index", "af", "q", "segment_length"]);
    for (i, c) in cycles.iter().enumerate() {
        t.push(vec![
            i.into(),
            c.af.into(),
            c.q.into(),
            c.segment_length.into(),
        ]);
    }
    t
}

/// `cycle_index,tau,qhat` rows of the normalized empirical shapes.
pub fn shapes_table(cycles: &[ExtractedCycle]) -> Table {
    let mut t = Table::new(&["cycle_index", "tau", "qhat"]);
    for (i, c) in cycles.iter().enumerate() {
        for &(tau, q) in &c.shape {
            t.push(vec![Cell::from(i), tau.into(), q.into()]);
        }
    }
    t
}
