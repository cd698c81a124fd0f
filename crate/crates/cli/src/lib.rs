//! Command-line driver: dataset-wide fusion, tone mapping, segmentation,
//! response recovery and evaluation, configured by JSON and flags.

pub mod args;
pub mod commands;
pub mod config;

use std::fmt;

use clap::Parser;
use hdrcloudseg_core::eval::{ImageType, Method};

pub use args::{Cli, Command, EvalCommand};
pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or referenced paths; nothing was processed.
    Usage(String),
    Run(hdrcloudseg_core::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hdrcloudseg_core::Error> for CliError {
    fn from(e: hdrcloudseg_core::Error) -> Self {
        CliError::Run(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some samples failed; the rest were written.
    Partial,
}

pub fn exit_code(result: &Result<Outcome, CliError>) -> i32 {
    match result {
        Ok(Outcome::Success) => EXIT_OK,
        Ok(Outcome::Partial) | Err(CliError::Run(_)) => EXIT_PARTIAL,
        Err(CliError::Usage(_)) => EXIT_USAGE,
    }
}

fn needs_dataset(command: &Command) -> bool {
    !matches!(
        command,
        Command::Synth { .. } | Command::Tonemap { input: Some(_), .. }
    )
}

/// Resolves and validates the configuration, then runs the command on a
/// pool of `--jobs` threads.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = RunConfig::resolve(cli)?;
    cfg.validate(needs_dataset(&cli.command))?;
    if let Command::Segment { .. } = cli.command {
        if let (Method::Baseline(b), ImageType::Hdr) = (cfg.segment.method, cfg.segment.image_type) {
            return Err(CliError::Usage(format!("baseline {b} operates on 8-bit images only")));
        }
    }
    if let Command::Tonemap { input: Some(p), .. } = &cli.command {
        if !p.is_file() {
            return Err(CliError::Usage(format!("input {} not found", p.display())));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| commands::dispatch(&cli.command, &cfg))
}

/// Parses `args`, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let result = run(&cli);
    match &result {
        Err(CliError::Usage(m)) => eprintln!("error: {m}"),
        Err(CliError::Run(e)) => eprintln!("error: {e}"),
        Ok(Outcome::Partial) => eprintln!("warning: some samples failed; see the run manifest"),
        Ok(Outcome::Success) => {}
    }
    exit_code(&result)
}
