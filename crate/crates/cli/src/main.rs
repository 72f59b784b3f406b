//! `crr`: prediction intervals, Monte Carlo checks and limiting-variance
//! curves for Bayesian and conformalized ridge regression.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
mod predict;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use conformal_ridge::asymptotics::{curve_table, full_range_grid, small_epsilon_grid};
use conformal_ridge::{
    coverage_experiment, endpoint_diff_experiment, ExperimentConfig, GenerativeSpec, ObjectLaw, RidgeConfig, WeightLaw,
};

use crate::error::{CliError, CliResult};
use crate::predict::{predict_rows, read_input, write_rows, GridSpec};

#[derive(Debug, Parser)]
#[command(
    name = "crr",
    version,
    about = "Bayesian and conformalized ridge regression intervals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// BRR and CRR intervals for the rows of a CSV file with an empty `y`.
    Predict(PredictArgs),
    /// Empirical coverage of CRR, smoothed CRR and BRR.
    Coverage(SimulationArgs),
    /// Distribution of the scaled BRR/CRR endpoint differences.
    Theorem1(SimulationArgs),
    /// Limiting standard deviation curves as CSV.
    Curves(CurvesArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Seed; a random one is drawn and printed to stderr when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long = "grid-min", allow_hyphen_values = true)]
    grid_min: Option<f64>,
    #[arg(long = "grid-max", allow_hyphen_values = true)]
    grid_max: Option<f64>,
    #[arg(long = "grid-steps")]
    grid_steps: Option<usize>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// CSV with header `x1,...,xp,y`.
    #[arg(long)]
    input: PathBuf,
    /// Ridge parameter.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Noise standard deviation assumed by BRR.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LawArg {
    StandardGaussian,
    UniformCube,
    ConstantOne,
    GaussianWithMean,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct SimulationArgs {
    /// Observations per trial including the test observation.
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Object dimension.
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long = "object-law", value_enum, default_value_t = LawArg::StandardGaussian)]
    object_law: LawArg,
    /// Comma-separated mean for `gaussian-with-mean`.
    #[arg(long = "object-mean", value_delimiter = ',', allow_hyphen_values = true)]
    object_mean: Vec<f64>,
    /// Comma-separated fixed weight vector; weights are drawn from the prior otherwise.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    weights: Vec<f64>,
    /// Prior precision ratio for drawn weights; defaults to `--a`.
    #[arg(long = "prior-a")]
    prior_a: Option<f64>,
    /// Also evaluate the smoothed conformal predictor.
    #[arg(long)]
    smoothed: bool,
    /// Relative tolerance on the empirical standard deviation (theorem1).
    #[arg(long = "std-tolerance", default_value_t = 0.10)]
    std_tolerance: f64,
    /// Include per-trial records in the JSON report.
    #[arg(long = "include-trials")]
    include_trials: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Panel {
    /// `ε ∈ [0.01, 0.99]`.
    Full,
    /// `ε ∈ (0, 0.05]`.
    Small,
}

#[derive(Debug, Args)]
struct CurvesArgs {
    #[arg(long, value_enum, default_value_t = Panel::Full)]
    panel: Panel,
    /// Explicit grid: `grid-steps` equal steps from `grid-min` to `grid-max`.
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    common: CommonArgs,
}

fn resolve_seed(common: &CommonArgs) -> u64 {
    common.seed.unwrap_or_else(|| {
        let seed = rand::random::<u64>();
        eprintln!("seed: {seed}");
        seed
    })
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    let where_ = path.unwrap_or(Path::new("<stdout>"));
    let mut out = open_output(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(where_, e))
}

fn run_predict(args: &PredictArgs) -> CliResult<()> {
    resolve_seed(&args.common);
    let cfg = RidgeConfig::new(args.a, args.sigma, args.epsilon)?;
    let input = read_input(&args.input)?;
    let grid = GridSpec {
        min: args.grid.grid_min,
        max: args.grid.grid_max,
        steps: args.grid.grid_steps,
    };
    let rows = predict_rows(&input, &cfg, grid)?;
    let path = args.common.output.as_deref();
    let where_ = path.unwrap_or(Path::new("<stdout>")).to_path_buf();
    write_rows(open_output(path)?, input.dim, &rows).map_err(|e| CliError::io(&where_, e.into()))
}

fn generative_spec(args: &SimulationArgs, seed: u64) -> CliResult<GenerativeSpec> {
    let object_law = match args.object_law {
        LawArg::StandardGaussian => ObjectLaw::StandardGaussian,
        LawArg::UniformCube => ObjectLaw::UniformCube,
        LawArg::ConstantOne => ObjectLaw::ConstantOne,
        LawArg::GaussianWithMean => {
            if args.object_mean.is_empty() {
                return Err(CliError::Config("gaussian-with-mean needs --object-mean".into()));
            }
            ObjectLaw::GaussianWithMean(args.object_mean.clone())
        }
    };
    let weight_law = if args.weights.is_empty() {
        WeightLaw::GaussianPrior {
            a: args.prior_a.unwrap_or(args.a),
        }
    } else {
        WeightLaw::Fixed(args.weights.clone())
    };
    let spec = GenerativeSpec {
        p: args.p,
        object_law,
        weight_law,
        sigma: args.sigma,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

fn run_simulation(args: &SimulationArgs, theorem1: bool) -> CliResult<()> {
    let seed = resolve_seed(&args.common);
    let spec = generative_spec(args, seed)?;
    let mut cfg = ExperimentConfig::new(args.n, args.a, args.epsilon, args.trials);
    cfg.smoothed = args.smoothed;
    cfg.std_tolerance = args.std_tolerance;
    cfg.validate()?;
    let report = if theorem1 {
        endpoint_diff_experiment(&spec, &cfg)?
    } else {
        coverage_experiment(&spec, &cfg)?
    };
    let text = match args.format {
        ReportFormat::Json => report.to_json(args.include_trials) + "\n",
        ReportFormat::Csv => format!("{}\n{}\n", report.csv_header(), report.csv_line()),
    };
    write_text(args.common.output.as_deref(), &text)
}

fn run_curves(args: &CurvesArgs) -> CliResult<()> {
    resolve_seed(&args.common);
    let g = &args.grid;
    let grid = if g.grid_min.is_some() || g.grid_max.is_some() || g.grid_steps.is_some() {
        let (min, max, steps) = match (g.grid_min, g.grid_max, g.grid_steps) {
            (Some(min), Some(max), Some(steps)) => (min, max, steps),
            _ => {
                return Err(CliError::Config(
                    "--grid-min, --grid-max and --grid-steps go together".into(),
                ))
            }
        };
        if !(min < max) || steps == 0 {
            return Err(CliError::Config(format!(
                "grid needs min < max and at least one step (got {min}..{max}, {steps} steps)"
            )));
        }
        (0..=steps)
            .map(|i| min + (max - min) * i as f64 / steps as f64)
            .collect()
    } else {
        match args.panel {
            Panel::Full => full_range_grid(),
            Panel::Small => small_epsilon_grid(),
        }
    };
    let table = curve_table(&grid)?;
    write_text(args.common.output.as_deref(), &table.to_csv())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Predict(args) => run_predict(args),
        Command::Coverage(args) => run_simulation(args, false),
        Command::Theorem1(args) => run_simulation(args, true),
        Command::Curves(args) => run_curves(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
