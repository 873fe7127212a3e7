//! Command-line front end for vibrational Bloch-Siegert shift calculations.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod units;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Command, Format, RunConfig, Units};
pub use error::CliError;
use units::Frequency;

#[derive(Debug, Parser)]
#[command(name = "vbshift", version, about = "Vibrational Bloch-Siegert shifts of trapped-ion sideband resonances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: SubCommand,
}

#[derive(Debug, Subcommand)]
pub enum SubCommand {
    /// Shift of one sideband resonance, perturbative and exact.
    Shift(Flags),
    /// Dressed energy levels against detuning.
    Sweep(Flags),
    /// Shift against the Lamb-Dicke parameter.
    ScanEta(Flags),
    /// Shifts of the first few red and blue sidebands.
    Sidebands(Flags),
    /// Self-test battery; exits non-zero if any check fails.
    Check(Flags),
}

impl SubCommand {
    fn split(&self) -> (Command, &Flags) {
        match self {
            SubCommand::Shift(f) => (Command::Shift, f),
            SubCommand::Sweep(f) => (Command::Sweep, f),
            SubCommand::ScanEta(f) => (Command::ScanEta, f),
            SubCommand::Sidebands(f) => (Command::Sidebands, f),
            SubCommand::Check(f) => (Command::Check, f),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON file with any of the settings below; flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Trap frequency, e.g. 2pi*1.36MHz or 1.36MHz.
    #[arg(long, value_name = "FREQ")]
    pub trap_freq: Option<Frequency>,
    /// Rabi frequency with a unit, or a bare ratio to the trap frequency.
    #[arg(long, value_name = "FREQ")]
    pub rabi: Option<Frequency>,
    /// Lamb-Dicke parameter.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["k_laser", "mass"])]
    pub eta: Option<f64>,
    /// Laser wavenumber projected on the trap axis, 1/m.
    #[arg(long, requires = "mass")]
    pub k_laser: Option<f64>,
    /// Ion mass, kg or e.g. 40u.
    #[arg(long, requires = "k_laser")]
    pub mass: Option<String>,
    #[arg(long)]
    pub ng: Option<usize>,
    #[arg(long)]
    pub ne: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub eta_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub eta_max: Option<f64>,
    /// Highest phonon number of the basis (starting size for the exact shift).
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Highest phonon number in the perturbative sums.
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Add the uncoupled energy lines to a sweep.
    #[arg(long)]
    pub bare: bool,
    #[arg(long, value_enum)]
    pub units: Option<Units>,
    /// Require the Lamb-Dicke expansion (rejected for the carrier).
    #[arg(long)]
    pub ld: bool,
    /// Highest phonon number whose levels a sweep follows.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Highest sideband order listed by `sidebands`.
    #[arg(long)]
    pub orders: Option<usize>,
    /// Multiply every `check` tolerance.
    #[arg(long)]
    pub tolerance_scale: Option<f64>,
}

impl clap::ValueEnum for Format {
    fn value_variants<'a>() -> &'a [Self] {
        &[Format::Csv, Format::Json]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }))
    }
}

impl clap::ValueEnum for Units {
    fn value_variants<'a>() -> &'a [Self] {
        &[Units::Dimensionless, Units::Physical]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            Units::Dimensionless => "dimensionless",
            Units::Physical => "physical",
        }))
    }
}

impl Flags {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            trap_freq: self.trap_freq,
            rabi: self.rabi,
            eta: self.eta,
            k_laser: self.k_laser,
            mass: self.mass.clone(),
            ng: self.ng,
            ne: self.ne,
            delta_min: self.delta_min,
            delta_max: self.delta_max,
            points: self.points,
            eta_min: self.eta_min,
            eta_max: self.eta_max,
            nmax: self.nmax,
            kmax: self.kmax,
            format: self.format,
            out: self.out.clone(),
            bare: self.bare.then_some(true),
            units: self.units,
            ld: self.ld.then_some(true),
            levels: self.levels,
            orders: self.orders,
            tolerance_scale: self.tolerance_scale,
        }
    }
}

/// Resolve the configuration, run the command and write its output.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let (command, flags) = cli.command.split();
    let file = flags.config.as_deref().map(RunConfig::from_json_file).transpose()?;
    let cfg = config::resolve(command, file, &flags.to_config())?;
    let report = commands::run(&cfg)?;
    match &cfg.out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            report.table.write(cfg.format, &cfg, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            report.table.write(cfg.format, &cfg, &mut w)?;
            w.flush()?;
        }
    }
    report.deferred.map_or(Ok(()), Err)
}
