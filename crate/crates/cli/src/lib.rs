//! Command-line front end for `cowqkd`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error,
//! 3 verification failure.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;

use config::{RunConfig, Settings};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "cowqkd",
    version,
    about = "Asymptotic key rates for coherent-one-way QKD"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimise (μ, t_B) at every length of --L and write CSV.
    Scan(Flags),
    /// Evaluate one (L, μ, t_B) without optimisation.
    Point(Flags),
    /// Optimise (μ, t_B) at a single length.
    Optimize(Flags),
    /// Compare the analytic gains with the Monte-Carlo oracle.
    Verify(Flags),
    /// Azuma deviation ε for K rounds and a failure probability.
    FiniteSize(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Dark-count probability per detector per slot.
    #[arg(long)]
    pd: Option<String>,
    /// Detector efficiency.
    #[arg(long = "eta-d")]
    eta_d: Option<String>,
    /// Misalignment error.
    #[arg(long)]
    ea: Option<String>,
    /// Error-correction efficiency.
    #[arg(long)]
    f: Option<String>,
    /// Mean photon number (fixes μ in scan/optimize).
    #[arg(long)]
    mu: Option<String>,
    /// Data-line coefficient t_B (fixes t_B in scan/optimize).
    #[arg(long)]
    tb: Option<String>,
    /// passive | active
    #[arg(long)]
    variant: Option<String>,
    /// Fiber attenuation in dB/km.
    #[arg(long)]
    atten: Option<String>,
    /// Lengths in km: `start:stop:step` or a single value.
    #[arg(long = "L")]
    lengths: Option<String>,
    /// cow | nonclassical
    #[arg(long)]
    protocol: Option<String>,
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Monte-Carlo samples per gain.
    #[arg(long)]
    samples: Option<String>,
    /// Number of rounds K (finite-size).
    #[arg(long)]
    k: Option<String>,
    /// Failure probability (finite-size).
    #[arg(long)]
    fail: Option<String>,
}

impl Flags {
    fn settings(&self) -> Result<Settings, CliError> {
        let mut s = match &self.config {
            Some(path) => config::load_config(path)?,
            None => Settings::new(),
        };
        let pairs = [
            ("pd", &self.pd),
            ("eta-d", &self.eta_d),
            ("ea", &self.ea),
            ("f", &self.f),
            ("mu", &self.mu),
            ("tb", &self.tb),
            ("variant", &self.variant),
            ("atten", &self.atten),
            ("L", &self.lengths),
            ("protocol", &self.protocol),
            ("out", &self.out),
            ("seed", &self.seed),
            ("samples", &self.samples),
            ("k", &self.k),
            ("fail", &self.fail),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                s.insert(key.to_string(), v.clone());
            }
        }
        Ok(s)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run(args: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    run_with(args, stdout, stderr, &cowqkd::gains::data_line_gains)
}

/// As [`run`], with the analytic data-line model used by `verify` supplied
/// by the caller.
pub fn run_with(
    args: &[String],
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    analytic: &commands::AnalyticDataLine,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(rendered.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(rendered.as_bytes());
                    1
                }
            };
        }
    };
    match dispatch(cli.command, stdout, stderr, analytic) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}

fn dispatch(
    command: Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    analytic: &commands::AnalyticDataLine,
) -> Result<(), CliError> {
    let (flags, default_range) = match &command {
        Command::Scan(f) => (f, config::DEFAULT_SCAN_RANGE),
        Command::Point(f) | Command::Optimize(f) | Command::Verify(f) | Command::FiniteSize(f) => {
            (f, "0")
        }
    };
    let cfg = RunConfig::resolve(&flags.settings()?, default_range)?;
    match command {
        Command::Scan(_) => commands::scan(&cfg, stdout),
        Command::Point(_) => commands::point(&cfg, stdout),
        Command::Optimize(_) => commands::optimize(&cfg, stdout),
        Command::Verify(_) => commands::verify(&cfg, stdout, stderr, analytic),
        Command::FiniteSize(_) => commands::finite_size(&cfg, stdout),
    }
}
