//! Experiment runners that turn a configuration into a CSV table.
//!
//! Grid points run concurrently but every stream is a pure function of
//! `(seed, substream, index)` and results are assembled by grid index, so
//! output bytes do not depend on scheduling. All `B_k` chains in one run share
//! the same `x_k` and `xi_k` draws across amplitudes.

mod config;
mod figures;
mod sweeps;

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::error::Result;

pub use config::{
    apply_override, EnsembleSection, Experiment, ExperimentConfig, ForcingSection, GridSection,
    RunSection, MIN_FIGURE_CYCLES,
};
pub use figures::{
    direct_point, fig1_point, fig2_point, fig3_point, run_direct, run_fig1, run_fig2, run_fig3,
    DirectPoint, Fig1Point, Fig2Point, Fig3Point,
};
pub use sweeps::{
    cycles_table, elliptic_point, extract_forcing, hill_point, run_elliptic_sweep,
    run_extract_forcing, run_hill, shapes_table, EllipticCase, EllipticPoint, HillPoint,
};

/// Substream ids shared by all runners.
pub(crate) mod substream {
    pub const X: u64 = 0;
    pub const XI: u64 = 1;
    pub const THETA: u64 = 2;
    pub const ETA: u64 = 3;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// A result table plus trailing `# name = value` summary lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<(String, f64)>,
    /// Non-fatal conditions worth surfacing on stderr.
    pub warnings: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, name: impl Into<String>, value: f64) {
        self.notes.push((name.into(), value));
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[i] {
                    Cell::Num(v) => v,
                    Cell::Int(v) => v as f64,
                    Cell::Text(_) => f64::NAN,
                })
                .collect(),
        )
    }

    pub fn note_value(&self, name: &str) -> Option<f64> {
        self.notes.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Header and rows only.
    pub fn render_plain(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::to_string).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }

    /// CSV text: the config echoed as `#` lines, the header, the rows, and the
    /// summary notes.
    pub fn render(&self, cfg: &ExperimentConfig) -> String {
        let mut out = String::new();
        writeln!(out, "# hillgrowth {}", cfg.run.experiment).unwrap();
        for line in cfg.to_toml().lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                writeln!(out, "# {line}").unwrap();
            }
        }
        out.push_str(&self.render_plain());
        for (name, value) in &self.notes {
            writeln!(out, "# {name} = {value}").unwrap();
        }
        out
    }
}

/// Runs `point` on every amplitude concurrently; errors are reported for the
/// lowest failing grid index.
pub(crate) fn over_grid<T, F>(amplitudes: &[f64], point: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(f64) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = amplitudes.par_iter().map(|&a| point(a)).collect();
    results.into_iter().collect()
}

/// Dispatches on the configured experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<Table> {
    match cfg.run.experiment {
        Experiment::Fig1 => run_fig1(cfg),
        Experiment::Fig2 => run_fig2(cfg),
        Experiment::Fig3 => run_fig3(cfg),
        Experiment::Elliptic => run_elliptic_sweep(cfg),
        Experiment::Hill => run_hill(cfg),
        Experiment::Direct => run_direct(cfg),
        Experiment::ExtractForcing => run_extract_forcing(cfg),
    }
}
