//! Front end for the `minlift` binary: argument parsing, configuration and the
//! `consensus`, `rpca` and `verify` commands.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod config;
mod consensus;
mod rpca;
mod verify;

use config::ConfigFile;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] minlift_core::Error),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }

    /// `error: <kind>: <message>` on a single line.
    pub fn report(&self) -> String {
        let msg = self.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error: {}: {msg}", self.kind())
    }
}

#[derive(Debug, Parser)]
#[command(name = "minlift", version, about = "Minimal-lifting splitting experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decentralised l1 consensus: minimise sum_i |x - c_i| over a cycle of n nodes.
    Consensus(consensus::ConsensusArgs),
    /// Robust PCA on a partially observed checkerboard-plus-sparse matrix.
    Rpca(rpca::RpcaArgs),
    /// Check a splitting scheme given as matrices (a file, or mt, ryu3, ryu4, dr).
    Verify(verify::VerifyArgs),
}

/// Flags shared by every command.
#[derive(Debug, Default, Args)]
pub struct Common {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// A key=value file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Common {
    fn file(&self, allowed: &[&str]) -> Result<ConfigFile, CliError> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        file.restrict(allowed)?;
        Ok(file)
    }
}

const COMMON_KEYS: [&str; 5] = ["seed", "tol", "max-iter", "gamma", "out"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Mt,
    ProductDr,
    Ryu3,
    /// PDHG with one of the three built-in step pairs (1-based).
    Pdhg(usize),
    /// PDHG with `--tau` and `--sigma`.
    PdhgCustom,
    AdmmAvg,
    AdmmAuglag,
    Asalm,
}

impl FromStr for Algorithm {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s.trim() {
            "mt" => Algorithm::Mt,
            "product_dr" => Algorithm::ProductDr,
            "ryu3" => Algorithm::Ryu3,
            "pdhg1" => Algorithm::Pdhg(1),
            "pdhg2" => Algorithm::Pdhg(2),
            "pdhg3" => Algorithm::Pdhg(3),
            "pdhg" => Algorithm::PdhgCustom,
            "admm_avg" => Algorithm::AdmmAvg,
            "admm_auglag" => Algorithm::AdmmAuglag,
            "asalm" => Algorithm::Asalm,
            other => {
                return Err(CliError::Config(format!(
                    "unknown algorithm `{other}` (known: mt, product_dr, ryu3, pdhg1, pdhg2, pdhg3, pdhg, admm_avg, admm_auglag, asalm)"
                )))
            }
        })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Mt => f.write_str("mt"),
            Algorithm::ProductDr => f.write_str("product_dr"),
            Algorithm::Ryu3 => f.write_str("ryu3"),
            Algorithm::Pdhg(i) => write!(f, "pdhg{i}"),
            Algorithm::PdhgCustom => f.write_str("pdhg"),
            Algorithm::AdmmAvg => f.write_str("admm_avg"),
            Algorithm::AdmmAuglag => f.write_str("admm_auglag"),
            Algorithm::Asalm => f.write_str("asalm"),
        }
    }
}

/// Comma-separated algorithm list; duplicates are rejected so CSV rows stay
/// unambiguous.
pub fn parse_algorithms(
    list: &str,
    allowed: &[Algorithm],
    command: &str,
) -> Result<Vec<Algorithm>, CliError> {
    let mut out = Vec::new();
    for name in list.split(',').filter(|s| !s.trim().is_empty()) {
        let a: Algorithm = name.parse()?;
        if !allowed.contains(&a) {
            return Err(CliError::Config(format!(
                "algorithm `{a}` is not available for {command}"
            )));
        }
        if out.contains(&a) {
            return Err(CliError::Config(format!("algorithm `{a}` listed twice")));
        }
        out.push(a);
    }
    if out.is_empty() {
        return Err(CliError::Config("no algorithms selected".into()));
    }
    Ok(out)
}

pub(crate) fn require(ok: bool, msg: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg.into()))
    }
}

/// What a command produced: the main text (CSV or report), where it goes,
/// a short summary for stderr, and the exit status.
pub struct Outcome {
    pub body: String,
    pub out: Option<PathBuf>,
    pub summary: Vec<String>,
    pub status: u8,
}

/// Parses `args` (including the program name) and runs the command. When an
/// output path is configured the body is written there and cleared.
pub fn run<I, T>(args: I) -> Result<Outcome, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Ok(Outcome {
                body: e.to_string(),
                out: None,
                summary: Vec::new(),
                status: 0,
            })
        }
        Err(e) => return Err(CliError::Usage(clap_reason(&e))),
    };
    let mut outcome = match &cli.command {
        Command::Consensus(a) => consensus::run(a)?,
        Command::Rpca(a) => rpca::run(a)?,
        Command::Verify(a) => verify::run(a)?,
    };
    if let Some(p) = &outcome.out {
        std::fs::write(p, &outcome.body).map_err(|e| CliError::io(p, e))?;
        outcome.body.clear();
    }
    Ok(outcome)
}

/// The first line of a clap error without its `error:` prefix.
fn clap_reason(e: &clap::Error) -> String {
    let text = e.to_string();
    let first = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("invalid arguments");
    first.trim().trim_start_matches("error:").trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for name in [
            "mt",
            "product_dr",
            "ryu3",
            "pdhg1",
            "pdhg2",
            "pdhg3",
            "pdhg",
            "admm_avg",
            "admm_auglag",
            "asalm",
        ] {
            assert_eq!(name.parse::<Algorithm>().unwrap().to_string(), name);
        }
        assert_eq!("pdhg4".parse::<Algorithm>().unwrap_err().kind(), "config");
    }

    #[test]
    fn algorithm_lists_are_checked() {
        let allowed = [Algorithm::Mt, Algorithm::Pdhg(1)];
        assert_eq!(
            parse_algorithms("mt,pdhg1", &allowed, "x").unwrap(),
            allowed.to_vec()
        );
        assert!(parse_algorithms("mt,mt", &allowed, "x").is_err());
        assert!(parse_algorithms("asalm", &allowed, "x").is_err());
        assert!(parse_algorithms(",", &allowed, "x").is_err());
    }

    #[test]
    fn reports_are_one_line() {
        let e = CliError::Usage("bad\n\n  thing\n".into());
        assert_eq!(e.report(), "error: usage: bad thing");
        assert_eq!(e.exit_code(), 2);
    }
}
