//! Command-line front end: config ingestion, dispatch and output.
//!
//! Exit status is 0 on success, 1 for usage and config errors, 2 for numeric
//! failures and failed verdicts.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

pub mod commands;
pub mod config;
pub mod output;

use crate::error::Error;
use crate::model::TransparentVariant;
use commands::Output;
use config::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "wavebend", version, about = "One-dimensional wave mechanics workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Allowed and forbidden zones of a periodic potential.
    Bands(Common),
    /// Growing and decaying solutions across a forbidden zone.
    Gap(Common),
    /// Period-to-period modulation inside allowed zones.
    Beats(WithEnergies),
    /// Surface state of a half-infinite lattice.
    Tamm(Common),
    /// Reflection and transmission off a single-channel potential.
    Scatter(WithEnergies),
    /// Multichannel scattering probabilities.
    Channels(WithEnergies),
    /// Reflectionless two-channel pairs.
    Transparent(TransparentArgs),
    /// Gap widths of a complex periodic potential.
    Complexbands(Common),
    /// Bound state embedded in the continuum.
    Bsec(Common),
    /// Equation residual and bending of one solution.
    Residual(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Config file, or inline JSON starting with `{`.
    #[arg(long)]
    config: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Sample count override.
    #[arg(long)]
    samples: Option<usize>,
    /// Step size override.
    #[arg(long)]
    h: Option<f64>,
}

#[derive(Debug, Args)]
struct WithEnergies {
    #[command(flatten)]
    common: Common,
    /// Comma-separated energies, replacing those of the config.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    energies: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct TransparentArgs {
    #[command(flatten)]
    inner: WithEnergies,
    #[arg(long)]
    variant: Option<TransparentVariant>,
    #[arg(long)]
    kappa: Option<f64>,
}

enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid(_)
            | Error::InvalidArgument(_)
            | Error::SupportMismatch { .. }
            | Error::ChannelNotClosed { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

fn load<T: DeserializeOwned + Versioned + Default>(src: &Option<String>) -> Result<T, Failure> {
    let Some(src) = src else {
        return Ok(T::default());
    };
    let text = if src.trim_start().starts_with('{') {
        src.clone()
    } else {
        std::fs::read_to_string(src).map_err(|e| Failure::Usage(format!("config {src}: {e}")))?
    };
    parse(&text).map_err(Failure::Usage)
}

fn energies(sweep: &mut Sweep, list: &Option<Vec<f64>>, samples: Option<usize>) {
    if let Some(list) = list {
        sweep.values = list.clone();
        sweep.range = None;
    }
    if let Some(n) = samples {
        sweep.samples = n;
    }
}

fn no_override(what: &str, present: bool, command: &str) -> Result<(), Failure> {
    if present {
        Err(Failure::Usage(format!("{command} takes no --{what} override")))
    } else {
        Ok(())
    }
}

fn dispatch(cmd: &Command) -> Result<(Output, &Common), Failure> {
    use commands as c;
    let csv = Format::Csv;
    Ok(match cmd {
        Command::Bands(a) => {
            let mut cfg: BandsConfig = load(&a.config)?;
            cfg.samples = a.samples.unwrap_or(cfg.samples);
            cfg.h = a.h.unwrap_or(cfg.h);
            let f = a.format.unwrap_or(csv);
            (c::bands(&cfg, f)?, a)
        }
        Command::Gap(a) => {
            let mut cfg: GapConfig = load(&a.config)?;
            cfg.samples = a.samples.unwrap_or(cfg.samples);
            cfg.h = a.h.unwrap_or(cfg.h);
            let f = a.format.unwrap_or(csv);
            (c::gap(&cfg, f)?, a)
        }
        Command::Beats(w) => {
            let a = &w.common;
            let mut cfg: BeatsConfig = load(&a.config)?;
            energies(&mut cfg.energies, &w.energies, a.samples);
            cfg.h = a.h.unwrap_or(cfg.h);
            let f = a.format.unwrap_or(csv);
            (c::beats(&cfg, f)?, a)
        }
        Command::Tamm(a) => {
            let mut cfg: TammConfig = load(&a.config)?;
            no_override("samples", a.samples.is_some(), "tamm")?;
            cfg.h = a.h.unwrap_or(cfg.h);
            let f = a.format.unwrap_or(csv);
            (c::tamm(&cfg, f)?, a)
        }
        Command::Scatter(w) => {
            let a = &w.common;
            let mut cfg: ScatterConfig = load(&a.config)?;
            energies(&mut cfg.energies, &w.energies, a.samples);
            cfg.h = a.h.unwrap_or(cfg.h);
            let f = a.format.unwrap_or(csv);
            (c::scatter(&cfg, f)?, a)
        }
        Command::Channels(w) => {
            let a = &w.common;
            let mut cfg: ChannelsConfig = load(&a.config)?;
            energies(&mut cfg.energies, &w.energies, a.samples);
            cfg.h = a.h.unwrap_or(cfg.h);
            let f = a.format.unwrap_or(csv);
            (c::channels(&cfg, f)?, a)
        }
        Command::Transparent(t) => {
            let a = &t.inner.common;
            let mut cfg: TransparentConfig = load(&a.config)?;
            energies(&mut cfg.energies, &t.inner.energies, a.samples);
            cfg.h = a.h.unwrap_or(cfg.h);
            cfg.variant = t.variant.unwrap_or(cfg.variant);
            cfg.kappa = t.kappa.unwrap_or(cfg.kappa);
            let f = a.format.unwrap_or(csv);
            (c::transparent(&cfg, f)?, a)
        }
        Command::Complexbands(a) => {
            let mut cfg: ComplexBandsConfig = load(&a.config)?;
            if let Some(n) = a.samples {
                cfg.t.samples = n;
            }
            cfg.h = a.h.unwrap_or(cfg.h);
            let f = a.format.unwrap_or(csv);
            (c::complexbands(&cfg, f)?, a)
        }
        Command::Bsec(a) => {
            let mut cfg: BsecConfig = load(&a.config)?;
            no_override("h", a.h.is_some(), "bsec")?;
            cfg.samples = a.samples.unwrap_or(cfg.samples);
            let f = a.format.unwrap_or(Format::Json);
            (c::bsec(&cfg, f)?, a)
        }
        Command::Residual(a) => {
            let mut cfg: ResidualConfig = load(&a.config)?;
            cfg.samples = a.samples.or(cfg.samples);
            cfg.h = a.h.unwrap_or(cfg.h);
            let f = a.format.unwrap_or(csv);
            (c::residual(&cfg, f)?, a)
        }
    })
}

/// Runs one invocation and returns its exit status. `args` includes the
/// program name.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                1
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let (out, common) = match dispatch(&cli.command) {
        Ok(r) => r,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            return 1;
        }
        Err(Failure::Numeric(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            return 2;
        }
    };
    let written = match &common.out {
        Some(path) => std::fs::write(path, &out.text).map_err(|e| format!("{}: {e}", path.display())),
        None => stdout.write_all(out.text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(m) = written {
        let _ = writeln!(stderr, "error: writing output: {m}");
        return 1;
    }
    match out.failure {
        Some(m) => {
            let _ = writeln!(stderr, "error: {m}");
            2
        }
        None => 0,
    }
}

/// Entry point of the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
