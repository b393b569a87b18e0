//! `countdiag` command-line front end.

mod commands;
mod report;
mod svg;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use countdiag::{Error, DEFAULT_SEED};

#[derive(Parser, Debug)]
#[command(name = "countdiag", version, about = "Count regression fits, rootograms and residual diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model and print coefficients, standard errors and information criteria.
    Fit(FitArgs),
    /// Observed vs expected frequencies as a rootogram.
    Rootogram(RootogramArgs),
    /// Normal Q-Q plot of randomized quantile residuals with a 5%/95% envelope.
    Qq(QqArgs),
    /// Pearson residuals against fitted means.
    Pearson(ModelArgs),
    /// Hanging rootogram with ±1 warning limits and a parametric bootstrap band.
    Bootstrap(BootstrapArgs),
    /// Fit several families and rank them by BIC.
    Compare(CompareArgs),
    /// Draw synthetic counts.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// CSV file with a header row; `<stem>.schema.json` next to it is read if present.
    #[arg(long)]
    pub data: PathBuf,
    /// Column-type hints overriding the sidecar schema.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Model formula, e.g. `y ~ x1 + x2^2 | z`.
    #[arg(long)]
    pub formula: String,
    /// Observation weights: a numeric column, or `posterior:k` for mixture component k.
    #[arg(long)]
    pub weights: Option<String>,
    /// Mixture components.
    #[arg(long = "K", default_value_t = 2)]
    pub k: usize,
    /// EM restarts for mixtures.
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Svg,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "negbin")]
    pub family: String,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug, Clone)]
pub struct RootogramArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "hanging")]
    pub style: String,
    #[arg(long, default_value = "sqrt")]
    pub scale: String,
    /// Largest count shown; defaults to the largest observed count.
    #[arg(long)]
    pub max_count: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct QqArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Re-randomizations behind the envelope.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
}

#[derive(Args, Debug, Clone)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "B", default_value_t = 10_000)]
    pub b: usize,
    #[arg(long, default_value = "sqrt")]
    pub scale: String,
    #[arg(long)]
    pub max_count: Option<u64>,
    /// Refit the model on every simulated response instead of holding it fixed.
    #[arg(long)]
    pub refit: bool,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Two or more families, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub family: Vec<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    /// `poisson` or `negbin`.
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub mu: f64,
    /// NB shape (negbin only).
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Io(_) | Error::Data { .. } | Error::Parse { .. } => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Rootogram(a) => commands::rootogram(&a),
        Command::Qq(a) => commands::qq(&a),
        Command::Pearson(a) => commands::pearson(&a),
        Command::Bootstrap(a) => commands::bootstrap(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Simulate(a) => commands::simulate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "{}: {e}", e.code());
            ExitCode::from(exit_code(&e))
        }
    }
}
