//! Experiment configuration: TOML sections layered over per-experiment
//! defaults, then `key=value` overrides.
//!
//! ```toml
//! [run]
//! experiment = "fig1"
//! seed = 42
//! n_cycles = 1000000
//!
//! [ensemble]
//! x = "loguniform(-2,2)"
//! xi = "uniform(0,1)"
//!
//! [grid]
//! amplitudes = [1e-4, 1e-3, 1e-2]
//! ```

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::ensembles::DistributionSpec;
use crate::error::{Error, Result};
use crate::hill::BarrierShape;

/// Smallest chain length accepted for figure experiments.
pub const MIN_FIGURE_CYCLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Fig1,
    Fig2,
    Fig3,
    Elliptic,
    Hill,
    /// A single `(x, phi)` ensemble through the direct product and the exact
    /// recursion.
    Direct,
    ExtractForcing,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Fig1,
        Experiment::Fig2,
        Experiment::Fig3,
        Experiment::Elliptic,
        Experiment::Hill,
        Experiment::Direct,
        Experiment::ExtractForcing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Elliptic => "elliptic",
            Experiment::Hill => "hill",
            Experiment::Direct => "direct",
            Experiment::ExtractForcing => "extract-forcing",
        }
    }

    pub fn is_figure(self) -> bool {
        matches!(self, Experiment::Fig1 | Experiment::Fig2 | Experiment::Fig3)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub experiment: Experiment,
    pub seed: u64,
    pub n_cycles: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// Distribution encodings are kept as text and parsed on use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    /// `x_k` for the `B_k` chains.
    pub x: String,
    /// Unit draw `xi_k` behind `phi = a xi` (fig1) or `phi = 1 - A xi`.
    pub xi: String,
    /// `phi_k` for the direct experiment.
    pub phi: String,
    pub theta: String,
    /// Shape of the `L` fluctuation; the grid amplitude scales it.
    pub eta: String,
    pub l0: f64,
    pub af: String,
    /// Base forcing strength; the grid amplitude scales it.
    pub q: String,
    pub shape: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    /// Optional file for the normalized per-cycle shapes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shapes: Option<String>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rho0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub ensemble: EnsembleSection,
    pub grid: GridSection,
    pub forcing: ForcingSection,
}

fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let n = ((b - a) * per_decade as f64).round() as usize;
    (0..=n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / n as f64))
        .collect()
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let amplitudes = match experiment {
            Experiment::Fig1 => log_grid(1e-4, 1e-2, 4),
            Experiment::Fig2 => vec![0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3],
            Experiment::Fig3 => (0..=10).map(|i| i as f64 / 10.0).collect(),
            Experiment::Elliptic => vec![0.0, 0.05, 0.1, 0.2, 0.3],
            Experiment::Hill => vec![0.5, 1.0, 1.5],
            Experiment::Direct | Experiment::ExtractForcing => vec![1.0],
        };
        let n_cycles = match experiment {
            Experiment::Hill => 100_000,
            _ => 1_000_000,
        };
        Self {
            run: RunSection {
                experiment,
                seed: 42,
                n_cycles,
                output: None,
            },
            ensemble: EnsembleSection {
                x: "loguniform(-2,2)".into(),
                xi: "uniform(0,1)".into(),
                phi: "affine(1,-0.5)".into(),
                theta: format!("const({FRAC_PI_4})"),
                eta: "uniform(-1,1)".into(),
                l0: 1.0,
                af: "const(0.25)".into(),
                q: "uniform(1.5,2.5)".into(),
                shape: "delta".into(),
            },
            grid: GridSection { amplitudes },
            forcing: ForcingSection {
                trajectory: None,
                shapes: None,
                a: 2.0,
                b: 1.5,
                c: 1.0,
                rho0: 1.0,
            },
        }
    }

    /// Defaults for `experiment`, overlaid with an optional TOML file and
    /// `key=value` overrides, then validated.
    pub fn load(experiment: Experiment, file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = Table::try_from(Self::defaults(experiment))
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let user: Table = text
                .parse()
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if let Some(exp) = user.get("run").and_then(|r| r.get("experiment")) {
                if exp.as_str() != Some(experiment.name()) {
                    return Err(Error::Config(format!(
                        "config is for experiment {exp}, not {experiment}"
                    )));
                }
            }
            merge(&mut table, user);
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if cfg.run.experiment != experiment {
            return Err(Error::Config("the experiment cannot be overridden".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let exp = self.run.experiment;
        if exp.is_figure() && self.run.n_cycles < MIN_FIGURE_CYCLES {
            return Err(Error::Config(format!(
                "figure experiments need n_cycles >= {MIN_FIGURE_CYCLES}, got {}",
                self.run.n_cycles
            )));
        }
        if self.run.n_cycles < 3 {
            return Err(Error::Config("n_cycles must be at least 3".into()));
        }
        let amps = &self.grid.amplitudes;
        if amps.is_empty() {
            return Err(Error::Config("amplitude grid is empty".into()));
        }
        if amps.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Config(
                "amplitudes must be finite and non-negative".into(),
            ));
        }
        if amps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "amplitude grid must be strictly increasing".into(),
            ));
        }
        match exp {
            Experiment::Fig1 | Experiment::Fig2 | Experiment::Fig3 => {
                self.x_spec()?;
                let (lo, hi) = self.xi_spec()?.support();
                if lo < 0.0 || hi > 1.0 {
                    return Err(Error::Config(format!(
                        "xi = {} must lie in [0, 1]",
                        self.ensemble.xi
                    )));
                }
                if exp != Experiment::Fig1 && amps.last().is_some_and(|&a| a > 1.0) {
                    return Err(Error::Config("phi = 1 - A xi needs A <= 1".into()));
                }
            }
            Experiment::Direct => {
                self.x_spec()?;
                self.phi_spec()?;
            }
            Experiment::Elliptic => {
                self.theta_spec()?;
                let eta = self.eta_spec()?;
                if !eta.is_symmetric_about_zero() {
                    return Err(Error::Config(format!(
                        "eta = {eta} must be symmetric about zero"
                    )));
                }
                if !(self.ensemble.l0 > 0.0) {
                    return Err(Error::Config("l0 must be positive".into()));
                }
                let reach = eta.support().1 * amps.last().copied().unwrap_or(0.0);
                if reach >= 1.0 {
                    return Err(Error::Config(format!(
                        "eta amplitude reaches {reach}; L would vanish"
                    )));
                }
            }
            Experiment::Hill => {
                self.af_spec()?;
                let q = self.q_spec()?;
                if q.support().0 < 0.0 {
                    return Err(Error::Config(format!("q = {q} must be non-negative")));
                }
                self.shape()?;
            }
            Experiment::ExtractForcing => {
                if self.forcing.trajectory.is_none() {
                    return Err(Error::Config(
                        "extract-forcing needs a trajectory file".into(),
                    ));
                }
                self.halo()?;
            }
        }
        Ok(())
    }

    fn spec(text: &str, key: &str) -> Result<DistributionSpec> {
        text.parse()
            .map_err(|e| Error::Config(format!("ensemble.{key}: {e}")))
    }

    pub fn x_spec(&self) -> Result<DistributionSpec> {
        Self::spec(&self.ensemble.x, "x")
    }

    pub fn xi_spec(&self) -> Result<DistributionSpec> {
        Self::spec(&self.ensemble.xi, "xi")
    }

    pub fn phi_spec(&self) -> Result<DistributionSpec> {
        Self::spec(&self.ensemble.phi, "phi")
    }

    pub fn theta_spec(&self) -> Result<DistributionSpec> {
        Self::spec(&self.ensemble.theta, "theta")
    }

    pub fn eta_spec(&self) -> Result<DistributionSpec> {
        Self::spec(&self.ensemble.eta, "eta")
    }

    pub fn af_spec(&self) -> Result<DistributionSpec> {
        Self::spec(&self.ensemble.af, "af")
    }

    pub fn q_spec(&self) -> Result<DistributionSpec> {
        Self::spec(&self.ensemble.q, "q")
    }

    pub fn shape(&self) -> Result<BarrierShape> {
        self.ensemble
            .shape
            .parse()
            .map_err(|e| Error::Config(format!("ensemble.shape: {e}")))
    }

    pub fn halo(&self) -> Result<crate::forcing::TriaxialHalo> {
        // equal axes are allowed so the spherical and axisymmetric limits run
        let f = &self.forcing;
        if !(f.a >= f.b && f.b >= f.c) {
            return Err(Error::Config(format!(
                "forcing: halo axes must satisfy a >= b >= c, got ({}, {}, {})",
                f.a, f.b, f.c
            )));
        }
        crate::forcing::TriaxialHalo::unordered(f.a, f.b, f.c, f.rho0)
            .map_err(|e| Error::Config(format!("forcing: {e}")))
    }
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Applies `key=value` (a leading `--` is accepted). The key is either
/// `section.key` or a bare key that names exactly one field; dashes count as
/// underscores.
pub fn apply_override(table: &mut Table, text: &str) -> Result<()> {
    let body = text.strip_prefix("--").unwrap_or(text);
    let (key, raw) = body
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{text}` is not key=value")))?;
    let key = key.trim().replace('-', "_");
    let (section, field) = match key.split_once('.') {
        Some((s, f)) => (s.to_string(), f.to_string()),
        None => {
            let owners: Vec<String> = table
                .iter()
                .filter(|(_, v)| v.as_table().is_some_and(|t| t.contains_key(&key)))
                .map(|(s, _)| s.clone())
                .collect();
            match owners.as_slice() {
                [s] => (s.clone(), key.clone()),
                [] if ["output", "trajectory", "shapes"].contains(&key.as_str()) => {
                    let s = if key == "output" { "run" } else { "forcing" };
                    (s.to_string(), key.clone())
                }
                [] => return Err(Error::Config(format!("unknown config key `{key}`"))),
                _ => {
                    return Err(Error::Config(format!(
                        "ambiguous key `{key}`; qualify it as section.{key}"
                    )))
                }
            }
        }
    };
    let sec = table
        .get_mut(&section)
        .and_then(Value::as_table_mut)
        .ok_or_else(|| Error::Config(format!("unknown config section `{section}`")))?;
    let value = parse_value(&field, raw.trim(), sec.get(&field));
    sec.insert(field, value);
    Ok(())
}

fn parse_value(field: &str, raw: &str, current: Option<&Value>) -> Value {
    match current {
        // text fields (and the optional paths) stay text even if numeric
        Some(Value::String(_)) | None => return Value::String(raw.to_string()),
        Some(Value::Array(_)) if field == "amplitudes" && !raw.starts_with('[') => {
            return format!("v = [{raw}]")
                .parse::<Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| Value::String(raw.to_string()));
        }
        _ => {}
    }
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => match (current, t.remove("v").expect("parsed key")) {
            // integers may feed float fields
            (Some(Value::Float(_)), Value::Integer(i)) => Value::Float(i as f64),
            (_, v) => v,
        },
        Err(_) => Value::String(raw.to_string()),
    }
}
