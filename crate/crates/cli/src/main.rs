mod commands;
mod config;
mod suite;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use subgauss::inverse::AlphaRule;
use subgauss::{Family, SpectrumSpec};

use config::{
    BoundsEvalConfig, CompareConfig, ExperimentConfig, Grid, InverseConfig, RegularizerName,
    SuiteConfig, VerifyBound, VerifyConfig,
};

const BUILD_ID: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("SUBGAUSS_BUILD"), ")");
const OUT_ENV: &str = "SUBGAUSS_OUT_DIR";
const DEFAULT_OUT: &str = "reports";

#[derive(Parser)]
#[command(name = "subgauss", version = BUILD_ID, about = "Norm concentration bounds for subgaussian vectors")]
struct Cli {
    /// Worker threads for sampling; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Print the resolved config as JSON and exit without running.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo check of a tail bound.
    Verify(VerifyArgs),
    /// Closed-form bound evaluation.
    Bounds {
        #[command(subcommand)]
        action: BoundsAction,
    },
    /// Bernstein against Chen–Yang tails on an ε grid.
    Compare(CompareArgs),
    /// Regularized inverse problem with a noise schedule.
    Inverse(InverseArgs),
    /// Randomized checks of the operator inequalities.
    PropertySuite(SuiteArgs),
    /// Run a JSON experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Subcommand)]
enum BoundsAction {
    /// Evaluate a bound over a grid read from a JSON file.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args)]
struct OutArg {
    /// Output directory [default: $SUBGAUSS_OUT_DIR, else `reports`].
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "gaussian")]
    law: Family,
    #[arg(long, default_value = "poly:2")]
    spectrum: SpectrumSpec,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum, default_value = "sqnorm")]
    bound: VerifyBound,
    #[arg(long, default_value_t = 1)]
    mean_of: usize,
    #[arg(long, default_value = "0.5,1,2,3")]
    t_grid: Grid,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.99)]
    confidence: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, default_value = "poly:2")]
    spectrum: SpectrumSpec,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value = "log:0.1..10")]
    eps_grid: Grid,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct InverseArgs {
    #[arg(long, value_enum, default_value = "tikhonov")]
    kind: RegularizerName,
    /// Landweber step.
    #[arg(long)]
    eta: Option<f64>,
    /// Fixed regularization parameter.
    #[arg(long, conflicts_with = "alpha_rule")]
    alpha: Option<f64>,
    /// `fixed:<α>` or `power:<e>` for `α(n) = n^{-e}`.
    #[arg(long, default_value = "power:0.25")]
    alpha_rule: AlphaRule,
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value = "poly:2")]
    noise_spectrum: SpectrumSpec,
    #[arg(long, default_value = "gaussian")]
    family: Family,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    min_dim: usize,
    #[arg(long, default_value_t = 20)]
    max_dim: usize,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    #[command(flatten)]
    out: OutArg,
}

enum Failure {
    Config(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Io(_) => 3,
        }
    }
}

impl From<subgauss::Error> for Failure {
    fn from(e: subgauss::Error) -> Self {
        match &e {
            subgauss::Error::Io(_) => Self::Io(e.to_string()),
            subgauss::Error::Csv(c) if c.is_io_error() => Self::Io(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

fn resolve(command: Command) -> Result<(ExperimentConfig, Option<PathBuf>), Failure> {
    Ok(match command {
        Command::Verify(a) => (
            ExperimentConfig::Verify(VerifyConfig {
                law: a.law,
                spectrum: a.spectrum,
                dim: a.dim,
                bound: a.bound,
                mean_of: a.mean_of,
                t_grid: a.t_grid,
                n: a.n,
                seed: a.seed,
                confidence: a.confidence,
                out: None,
            }),
            a.out.out,
        ),
        Command::Bounds {
            action: BoundsAction::Eval { input, out },
        } => {
            let text = fs::read_to_string(&input)
                .map_err(|e| Failure::Io(format!("{}: {e}", input.display())))?;
            let cfg: BoundsEvalConfig = serde_json::from_str(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?;
            (ExperimentConfig::BoundsEval(cfg), out.out)
        }
        Command::Compare(a) => (
            ExperimentConfig::Compare(CompareConfig {
                spectrum: a.spectrum,
                dim: a.dim,
                eps_grid: a.eps_grid,
                out: None,
            }),
            a.out.out,
        ),
        Command::Inverse(a) => (
            ExperimentConfig::Inverse(InverseConfig {
                kind: a.kind,
                eta: a.eta,
                alpha_rule: match a.alpha {
                    Some(alpha) => format!("fixed:{alpha}")
                        .parse()
                        .map_err(|e: subgauss::Error| Failure::Config(e.to_string()))?,
                    None => a.alpha_rule,
                },
                s: a.s,
                sigma2: a.sigma2,
                n_grid: a.n_grid,
                delta: a.delta,
                trials: a.trials,
                seed: a.seed,
                dim: a.dim,
                noise_spectrum: a.noise_spectrum,
                family: a.family,
                out: None,
            }),
            a.out.out,
        ),
        Command::PropertySuite(a) => (
            ExperimentConfig::PropertySuite(SuiteConfig {
                instances: a.instances,
                seed: a.seed,
                min_dim: a.min_dim,
                max_dim: a.max_dim,
                tolerance: a.tolerance,
                out: None,
            }),
            a.out.out,
        ),
        Command::Run { config, out } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| Failure::Io(format!("{}: {e}", config.display())))?;
            let cfg: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", config.display())))?;
            (cfg, out.out)
        }
    })
}

fn write_summary(
    out: &Path,
    config: &ExperimentConfig,
    outcome: &commands::Outcome,
) -> Result<PathBuf, Failure> {
    let summary = json!({
        "version": BUILD_ID,
        "command": config.name(),
        "config": config,
        "seed": config.seed(),
        "pass": outcome.pass,
        "outputs": outcome.outputs,
        "report": outcome.report,
    });
    let path = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Failure::Config(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn main_inner(cli: Cli) -> Result<bool, Failure> {
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(Failure::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let (mut config, flag_out) = resolve(cli.command)?;
    // --out or the environment beats the config file, which beats the default
    let out = flag_out
        .or_else(|| config.out_mut().clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    *config.out_mut() = Some(out.clone());
    if cli.print_config {
        println!(
            "{}",
            serde_json::to_string_pretty(&config).map_err(|e| Failure::Config(e.to_string()))?
        );
        return Ok(true);
    }
    let outcome = commands::run(&config, &out)?;
    let summary = write_summary(&out, &config, &outcome)?;
    for path in &outcome.outputs {
        println!("wrote {}", path.display());
    }
    println!("wrote {}", summary.display());
    println!("{}: {}", config.name(), if outcome.pass { "pass" } else { "FAIL" });
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(failure) => {
            let (Failure::Config(msg) | Failure::Io(msg)) = &failure;
            eprintln!("error: {msg}");
            ExitCode::from(failure.code())
        }
    }
}
