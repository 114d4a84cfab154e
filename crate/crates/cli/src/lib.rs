//! Driver behind the `harnack-lab` binary: configuration, commands and
//! report persistence. Every command returns an [`Output`]; the binary only
//! prints it, writes artifacts and exits with [`Output::exit_code`].
//!
//! Exit codes: 0 all checks pass, 1 a verified inequality or identity fails,
//! 2 invalid input or unmet preconditions, 3 exploratory run (the theorem's
//! hypotheses are unmet or `C < 10`).

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use harnack_core::fd_oracle::OracleError;
use harnack_core::geodesic::GeodesicError;
use harnack_core::green::GreenError;
use harnack_core::harnack::HarnackError;
use harnack_core::models::ModelError;
use harnack_symbolic::SymbolicError;

pub use config::{RunConfig, Tolerances};
pub use report::{Check, Envelope, Status};

/// Exit code for invalid input and unmet preconditions.
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("precondition not met: {0}")]
    Precondition(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Harnack(#[from] HarnackError),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Parser)]
#[command(
    name = "harnack-lab",
    version,
    about = "Numerical and symbolic checks of the matrix Harnack inequality for Green functions"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags that override the config file. Unset flags leave the file value.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// euclidean, cone:<c>, smoothed-cone:<c>:<r0> or custom:<csv>
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Harnack constant
    #[arg(long = "C", global = true, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long, global = true)]
    pub r_min: Option<f64>,
    #[arg(long, global = true)]
    pub r_max: Option<f64>,
    #[arg(long, global = true)]
    pub grid_size: Option<usize>,
    /// Tolerance on inequality margins
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Allow C < 10 and label the run exploratory
    #[arg(long, global = true)]
    pub exploratory: bool,
    /// Include wall-clock timings in the report
    #[arg(long, global = true)]
    pub timing: bool,
    /// Comma-separated interpolation parameters for `corollary`
    #[arg(long, global = true, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Number of random endpoint pairs for `corollary`
    #[arg(long, global = true)]
    pub triples: Option<usize>,
    /// Comma-separated charts for `oracle commutators`
    #[arg(long = "chart", global = true, value_delimiter = ',')]
    pub charts: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub probes: Option<usize>,
    /// Finite-difference step for the oracle
    #[arg(long, global = true)]
    pub oracle_h: Option<f64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check Hess b² ≤ C g on the grid
    Verify,
    /// Smallest admissible C on the grid
    MinC,
    /// Convexity inequality along random minimal geodesics
    Corollary,
    /// Signs of the grouped terms in the maximum-principle argument
    Audit,
    /// Exact symbolic reduction of the tensor identities
    Symbolic {
        #[command(subcommand)]
        command: SymbolicCommand,
    },
    /// Finite-difference checks in coordinate charts
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
    /// Model manifold presets
    Models {
        #[command(subcommand)]
        command: ModelsCommand,
    },
    /// Write the radial Green profile as CSV
    ExportProfile,
}

#[derive(Debug, Clone, Subcommand)]
pub enum SymbolicCommand {
    /// Reduce every catalogued identity to zero
    VerifyAll,
}

#[derive(Debug, Clone, Subcommand)]
pub enum OracleCommand {
    /// Finite-difference residuals of the commutator identities
    Commutators,
}

#[derive(Debug, Clone, Subcommand)]
pub enum ModelsCommand {
    List,
}

impl Command {
    /// Name used for report files and the `command` field.
    pub fn slug(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::MinC => "min-c",
            Command::Corollary => "corollary",
            Command::Audit => "audit",
            Command::Symbolic { .. } => "symbolic-verify-all",
            Command::Oracle { .. } => "oracle-commutators",
            Command::Models { .. } => "models-list",
            Command::ExportProfile => "export-profile",
        }
    }
}

impl Overrides {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = &self.$flag { cfg.$field = v.clone(); })*
            };
        }
        take!(model => model, n => n, c => c, r_min => r_min, r_max => r_max, grid_size => grid_size,
              seed => seed, lambdas => lambdas, triples => triples, charts => charts, probes => probes,
              oracle_h => oracle_h);
        if let Some(t) = self.tol {
            cfg.tolerances.inequality = t;
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = Some(dir.clone());
        }
        cfg.exploratory |= self.exploratory;
        cfg.timing |= self.timing;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A finished command: the report plus any CSV artifact.
#[derive(Debug, Clone)]
pub struct Output {
    pub envelope: Option<Envelope>,
    pub csv: Option<(String, String)>,
}

impl Output {
    pub fn exit_code(&self) -> i32 {
        self.envelope.as_ref().map_or(0, |e| e.exit_code)
    }

    /// Write the JSON report and CSV artifact under `dir`.
    pub fn persist(&self, dir: &std::path::Path, slug: &str) -> Result<Vec<PathBuf>, CliError> {
        let io = |path: &std::path::Path, e: std::io::Error| CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut written = Vec::new();
        if let Some(env) = &self.envelope {
            let path = dir.join(format!("{slug}.json"));
            std::fs::write(&path, report::to_json(env)).map_err(|e| io(&path, e))?;
            written.push(path);
        }
        if let Some((name, body)) = &self.csv {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Resolve the configuration and run one command.
pub fn run(cli: &Cli) -> Result<(RunConfig, Output), CliError> {
    let cfg = cli.overrides.resolve()?;
    let out = commands::execute(&cli.command, &cfg)?;
    Ok((cfg, out))
}
