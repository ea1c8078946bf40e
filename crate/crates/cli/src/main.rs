use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hillgrowth::experiments::{self, shapes_table, Experiment, ExperimentConfig};
use hillgrowth::Error;

/// Growth rates of random Hill-equation cycle products.
///
/// Any other `--key=value` argument overrides a config field, e.g.
/// `--x=loguniform(-1,1)` or `--amplitudes=0.1,0.2`.
#[derive(Parser, Debug)]
#[command(name = "hillgrowth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long = "n-cycles", global = true)]
    n_cycles: Option<usize>,

    /// TOML config layered over the experiment defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Small-phi growth rates against the moment formula.
    Fig1,
    /// Near-unity deficit against the first-order formula.
    Fig2,
    /// Approximations and bounds over phi = 1 - A xi.
    Fig3,
    /// Elliptic rotations with fluctuating axis ratio.
    Elliptic,
    /// ODE cycles through the direct product and the decomposition.
    Hill,
    /// Per-cycle (af, q) from a `t,x,z` trajectory file.
    ExtractForcing,
    /// One (x, phi) ensemble through the direct product and the recursion.
    Direct,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::Fig1 => Experiment::Fig1,
            Command::Fig2 => Experiment::Fig2,
            Command::Fig3 => Experiment::Fig3,
            Command::Elliptic => Experiment::Elliptic,
            Command::Hill => Experiment::Hill,
            Command::ExtractForcing => Experiment::ExtractForcing,
            Command::Direct => Experiment::Direct,
        }
    }
}

const OWN_FLAGS: [&str; 5] = ["seed", "n-cycles", "config", "out", "help"];

/// Splits `--key=value` config overrides from the arguments clap handles.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<String>) {
    let (overrides, own) = args.into_iter().partition(|a| {
        a.strip_prefix("--")
            .and_then(|rest| rest.split_once('='))
            .is_some_and(|(k, _)| !OWN_FLAGS.contains(&k))
    });
    (own, overrides)
}

fn load(cli: &Cli, mut overrides: Vec<String>) -> Result<ExperimentConfig, Error> {
    if let Some(seed) = cli.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    if let Some(n) = cli.n_cycles {
        overrides.push(format!("run.n_cycles={n}"));
    }
    ExperimentConfig::load(cli.command.experiment(), cli.config.as_deref(), &overrides)
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: &Cli, overrides: Vec<String>) -> Result<(), Error> {
    let cfg = load(cli, overrides)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.run.output.clone().map(PathBuf::from));
    if cfg.run.experiment == Experiment::ExtractForcing {
        let cycles = experiments::extract_forcing(&cfg)?;
        write_output(
            out.as_ref(),
            &experiments::cycles_table(&cycles).render_plain(),
        )?;
        if let Some(p) = &cfg.forcing.shapes {
            write_output(
                Some(&PathBuf::from(p)),
                &shapes_table(&cycles).render_plain(),
            )?;
        }
        return Ok(());
    }
    let table = experiments::run(&cfg)?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    write_output(out.as_ref(), &table.render(&cfg))
}

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args().collect());
    let cli = Cli::parse_from(args);
    match execute(&cli, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
