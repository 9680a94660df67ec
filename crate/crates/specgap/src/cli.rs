use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{cmd_bands, cmd_certify, cmd_family, cmd_gapdetect, cmd_truncation, Format, Overrides, Params};
use crate::config::load_config;
use crate::error::{CliError, EXIT_CONFIG, EXIT_OK};

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "SPECGAP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "specgap", version, about = "Spectral bands, truncation spectra and gap detection for banded operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Band intervals of the matrix symbol: bands.json, branches.csv.
    Bands(Flags),
    /// Eigenvalue trajectories and bound estimates: trajectories.csv, estimate.json.
    Truncation(Flags),
    /// Weighted-average gap criterion: evidence.json.
    Gapdetect(Flags),
    /// Perturbation-bound gap certificates and Borg check: certificates.json.
    Certify(Flags),
    /// Parameter sweep and gap stability radius: sweep.csv, stability.json.
    Family(Flags),
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub cap: Option<usize>,
    /// uniform | entry:I | twopoint:T:L:M
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

impl Command {
    fn flags(&self) -> &Flags {
        match self {
            Command::Bands(f) | Command::Truncation(f) | Command::Gapdetect(f) | Command::Certify(f) | Command::Family(f) => f,
        }
    }
}

fn thread_count() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config { path: THREADS_VAR.into(), message: format!("expected a positive integer, got \"{v}\"") }),
        },
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let flags = cli.command.flags();
    let config = load_config(&flags.config)?;
    let overrides = Overrides {
        grid: flags.grid,
        nmax: flags.nmax,
        kmax: flags.kmax,
        delta: flags.delta,
        cap: flags.cap,
        scheme: flags.scheme.clone(),
        eps: flags.eps,
    };
    let params = Params::resolve(&config, &overrides, flags.format)?;
    let spec = config.operator.operator()?;
    std::fs::create_dir_all(&flags.out)
        .map_err(|source| CliError::Io { path: flags.out.display().to_string(), source })?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Io { path: "thread pool".into(), source: std::io::Error::other(e) })?;
    let out = flags.out.as_path();
    pool.install(|| match &cli.command {
        Command::Bands(_) => cmd_bands(&spec, &params, out).map(drop),
        Command::Truncation(_) => cmd_truncation(&spec, &config, &params, out).map(drop),
        Command::Gapdetect(_) => cmd_gapdetect(&spec, &params, out).map(drop),
        Command::Certify(_) => cmd_certify(&spec, &params, out).map(drop),
        Command::Family(_) => cmd_family(&config, &params, out).map(drop),
    })
}

/// Parses arguments, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("specgap: {e}");
            e.exit_code()
        }
    }
}
