use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dyadnet::array::ArrayStructure;
use dyadnet::estimators::SeKind;
use dyadnet::exec::{configure_threads, Execution};
use dyadnet_cli::commands::{run_fit, run_fixture, run_simulate, FitOptions, OutputFormat};
use dyadnet_cli::{exit, CliError};

#[derive(Parser)]
#[command(name = "dyadnet", version, about = "Dependence-aware regression on relational arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a linear model to a long-format relational CSV.
    Fit(FitArgs),
    /// Run a coverage study or a large-sample check from a TOML config.
    Simulate(SimulateArgs),
    /// Write a synthetic gravity-style trade panel CSV.
    Fixture(FixtureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SeArg {
    Hc,
    Dc,
    Exch,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArrayArg {
    FullExch,
    Stationary,
    Unrestricted,
    Independent,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct FitArgs {
    /// Columns: [layer,] sender, receiver, y, covariates...
    input: PathBuf,
    #[arg(long, value_enum, default_value = "exch")]
    se: SeArg,
    /// Estimate by GEE with an exchangeable working covariance.
    #[arg(long)]
    gee: bool,
    /// Iteration cap for --gee.
    #[arg(long, default_value_t = 100)]
    gee_max_iter: usize,
    #[arg(long, conflicts_with = "undirected")]
    directed: bool,
    #[arg(long)]
    undirected: bool,
    /// Covariance structure across layers for exchangeable fits.
    #[arg(long, value_enum, default_value = "full-exch")]
    array: ArrayArg,
    #[arg(long, default_value_t = 0.95)]
    ci: f64,
    /// Do not prepend an intercept column.
    #[arg(long)]
    no_intercept: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct SimulateArgs {
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn threads_from_env() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("DYADNET_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| CliError::new(exit::CONFIG, format!("DYADNET_THREADS must be a positive integer, got `{raw}`")))?;
    configure_threads(threads);
    Ok(())
}

fn run(cli: Cli) -> Result<u8, CliError> {
    threads_from_env()?;
    match cli.command {
        Command::Fit(a) => run_fit(&FitOptions {
            input: a.input,
            se: match a.se {
                SeArg::Hc => SeKind::Hc,
                SeArg::Dc => SeKind::Dc,
                SeArg::Exch => SeKind::Exch,
            },
            gee: a.gee,
            gee_max_iter: a.gee_max_iter,
            directed: !a.undirected,
            structure: match a.array {
                ArrayArg::FullExch => ArrayStructure::FullExch,
                ArrayArg::Stationary => ArrayStructure::Stationary,
                ArrayArg::Unrestricted => ArrayStructure::Unrestricted,
                ArrayArg::Independent => ArrayStructure::LayerIndependent,
            },
            ci: a.ci,
            intercept: !a.no_intercept,
            out: a.out,
            format: match a.format {
                FormatArg::Json => OutputFormat::Json,
                FormatArg::Csv => OutputFormat::Csv,
            },
        }),
        Command::Simulate(a) => run_simulate(&a.config, &a.out, Execution::Parallel),
        Command::Fixture(a) => run_fixture(a.n, a.layers, a.seed, &a.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => {
            if code == exit::GEE_NOT_CONVERGED {
                eprintln!("warning: GEE did not converge; outputs are flagged");
            } else if code == exit::ACCEPTANCE_FAILED {
                eprintln!("acceptance check failed; see report.json");
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
