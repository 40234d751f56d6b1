//! `ldp` command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

pub mod jobs;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_FLAGGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ldp", version, about = "Deviation rates for moving-average processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON job description.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker thread cap.
    #[arg(long, global = true, env = "LDP_THREADS")]
    pub threads: Option<usize>,

    /// Exit with status 3 when a result is flagged imprecise.
    #[arg(long, global = true)]
    pub strict: bool,

    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    RateEval,
    Conjugate,
    GaussRate,
    VerifyLimits,
    Simulate,
    Tail,
    SpeedScan,
    PiCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::RateEval => "rate-eval",
            Command::Conjugate => "conjugate",
            Command::GaussRate => "gauss-rate",
            Command::VerifyLimits => "verify-limits",
            Command::Simulate => "simulate",
            Command::Tail => "tail",
            Command::SpeedScan => "speed-scan",
            Command::PiCheck => "pi-check",
        }
    }
}

/// Validation failures (bad config, unusable parameters): exit status 2.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

/// What a job produced before it is written out.
pub struct Artifacts {
    pub summary: serde_json::Value,
    pub csv: Option<String>,
    pub flagged: bool,
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<Invalid>().is_some() || e.downcast_ref::<ldp_core::Error>().is_some() {
        EXIT_INVALID
    } else {
        EXIT_FAILURE
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Invalid("--config <path> is required".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| Invalid(format!("cannot read {}: {e}", path.display())))?;
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(Invalid("--threads must be positive".into()).into());
        }
    }
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(k) = cli.threads {
            b = b.num_threads(k);
        }
        b.build().context("building the worker pool")?
    };
    let art = pool.install(|| jobs::dispatch(cli.command, &text, cli.seed, cli.verbose))?;
    write_outputs(&cli.out, cli.command.name(), &art)?;
    Ok(if cli.strict && art.flagged {
        eprintln!("a result was flagged imprecise (--strict)");
        EXIT_FLAGGED
    } else {
        EXIT_OK
    })
}

fn write_outputs(dir: &Path, name: &str, art: &Artifacts) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let json = dir.join(format!("{name}.json"));
    let body = serde_json::to_string_pretty(&art.summary)?;
    fs::write(&json, body + "\n").with_context(|| format!("writing {}", json.display()))?;
    if let Some(csv) = &art.csv {
        let p = dir.join(format!("{name}.csv"));
        fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}
