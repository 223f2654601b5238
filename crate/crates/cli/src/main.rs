//! `treeshift`: analyses of weighted shifts on directed trees from JSON specs.

mod commands;
mod report;

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use treeshift::asymptotics::{DEFAULT_MAX_DEPTH, DEFAULT_TOL, DEFAULT_ZERO_THRESHOLD};
use treeshift::linalg::{DEFAULT_DIMENSION_CAP, DEFAULT_RANK_TOL};
use treeshift::similarity::{DEFAULT_BLOWUP, DEFAULT_RATIO_HORIZON};

#[derive(Parser)]
#[command(name = "treeshift", version, about = "Weighted shifts on directed trees: asymptotics, asymptotes, cyclicity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a tree spec and print its shape.
    Validate(ValidateArgs),
    /// Norm, α and a tables, stable subtree and C_{ij} classification.
    Analyze(Common),
    /// Isometric asymptote `S_β` on the stable subtree.
    Asymptote(Common),
    /// Isometric asymptote of the adjoint.
    AdjointAsymptote(Common),
    /// Cyclicity verdict; constructs and verifies a cyclic vector for backward shifts.
    Cyclic(CyclicArgs),
    /// Similarity or quasiaffinity witness for fork-shaped trees.
    Similarity(SimilarityArgs),
    /// Matrix-free operations compared against the dense window matrix.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Tree spec (JSON).
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// Weight spec (JSON).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Window levels `a:b`; defaults to the whole finite tree, `0:8` when
    /// rooted and `-4:6` otherwise.
    #[arg(long, value_parser = parse_levels, allow_hyphen_values = true)]
    pub levels: Option<(i64, i64)>,
    /// Vertices kept per window level.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(usize))]
    pub breadth: usize,
    /// Convergence tolerance for the α and a limits
    #[arg(long, default_value_t = DEFAULT_TOL, value_parser = parse_positive)]
    pub tol: f64,
    /// Limits at or below this count as zero
    #[arg(long = "zero-th", default_value_t = DEFAULT_ZERO_THRESHOLD, value_parser = parse_positive)]
    pub zero_threshold: f64,
    /// Relative pivot threshold for dense rank tests
    #[arg(long, default_value_t = DEFAULT_RANK_TOL, value_parser = parse_positive)]
    pub rank_tol: f64,
    /// Depth cap for truncated sums and products.
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    pub depth: usize,
    /// Largest dense matrix dimension any command may build.
    #[arg(long, default_value_t = DEFAULT_DIMENSION_CAP)]
    pub cap: usize,
    /// Line-delimited JSON records instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct CyclicArgs {
    #[command(flatten)]
    pub common: Common,
    /// Backward-shift spec (JSON) to analyse instead of a tree.
    #[arg(long, conflicts_with_all = ["tree", "weights"])]
    pub backward: Option<PathBuf>,
    /// Number of terms in the constructed cyclic vector.
    #[arg(long, default_value_t = 16)]
    pub terms: usize,
    /// Highest index per branch in the verification window.
    #[arg(long, default_value_t = 50)]
    pub window: usize,
}

#[derive(Args)]
pub struct SimilarityArgs {
    #[command(flatten)]
    pub common: Common,
    /// Levels scanned for the weight-ratio certificate.
    #[arg(long, default_value_t = DEFAULT_RATIO_HORIZON)]
    pub horizon: u64,
    /// Ratio beyond which the scan reports unbounded growth.
    #[arg(long, default_value_t = DEFAULT_BLOWUP, value_parser = parse_positive)]
    pub blowup: f64,
}

#[derive(Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Highest power compared.
    #[arg(long, default_value_t = 4)]
    pub powers: usize,
}

fn parse_levels(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got {s:?}"))?;
    let a: i64 = a.trim().parse().map_err(|e| format!("level {a:?}: {e}"))?;
    let b: i64 = b.trim().parse().map_err(|e| format!("level {b:?}: {e}"))?;
    if a > b {
        return Err(format!("empty level range {a}:{b}"));
    }
    Ok((a, b))
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{s} is not a positive number"))
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] treeshift::Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Usage(String),
    /// Dense comparison disagreed; the report is still printed.
    #[error("matrix-free operations disagree with the dense window matrix")]
    Oracle(Box<report::Report>),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use treeshift::Error as E;
        match self {
            CliError::Lib(e) => match e {
                E::EmptyTree
                | E::UnlistedVertex(_)
                | E::DisconnectedGraph { .. }
                | E::MultipleParents(_)
                | E::CircuitFound(_)
                | E::RootMismatch { .. }
                | E::StructuralViolation { .. }
                | E::FamilyParams(_) => 2,
                E::NotAContraction { .. } => 3,
                E::StableSubtreeEmpty | E::AdjointStable => 4,
                E::DimensionCap { .. } | E::WindowTooLarge { .. } => 5,
                E::ShapeMismatch(_) => 6,
                _ => 1,
            },
            _ => 1,
        }
    }

    fn hint(&self) -> Option<String> {
        match self {
            CliError::Lib(treeshift::Error::NotAContraction { norm }) => {
                Some(format!("rescale the weights by 1/{norm} (or any factor below it) to obtain a contraction"))
            }
            CliError::Lib(treeshift::Error::DimensionCap { .. } | treeshift::Error::WindowTooLarge { .. }) => {
                Some("shrink the window or raise --cap".into())
            }
            _ => None,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // keep exit code 2 for structural violations
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (result, json) = match &cli.command {
        Command::Validate(a) => (commands::validate(&a.tree), a.json),
        Command::Analyze(c) => (commands::analyze(c), c.json),
        Command::Asymptote(c) => (commands::asymptote(c), c.json),
        Command::AdjointAsymptote(c) => (commands::adjoint_asymptote(c), c.json),
        Command::Cyclic(a) => (commands::cyclic(a), a.common.json),
        Command::Similarity(a) => (commands::similarity(a), a.common.json),
        Command::Oracle(a) => (commands::oracle(a), a.common.json),
    };
    match result {
        Ok(report) => {
            if let Err(e) = report.emit(json, &mut io::stdout().lock()) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let CliError::Oracle(report) = &e {
                let _ = report.emit(json, &mut io::stdout().lock());
            }
            eprintln!("error: {e}");
            if let Some(h) = e.hint() {
                eprintln!("hint: {h}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
