//! Batch command-line surface over the forecasting library.
//!
//! One subcommand per workflow: `expand` (increment algebra), `forecast`
//! (optimal linear prediction), `lf` (least-favorable densities), `validate`
//! (Monte Carlo validation). Reports are machine readable, identical inputs
//! and seed produce identical bytes, and the exit code is zero exactly when
//! every requested check passes.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gmseas_core::blocking::{block, FunctionalWeights, ScalarSeries};
use gmseas_core::forecast::{
    apply_predictor, lift_functional, solve_classical, solve_factorized, Horizon, SolveConfig,
};
use gmseas_core::fractional::{classify_stationarity, gi_coefficients, GiSign};
use gmseas_core::increment::{expand_inverse, expand_operator, IncrementSpec};
use gmseas_core::io::{class_from_json, model_from_json, read_scalar_csv, SolutionDoc};
use gmseas_core::minimax::{class_membership, lf_residual, saddle_check, solve_lf_scalar, LfConfig};
use gmseas_core::simulate::{monte_carlo_mse, ModelRecipe};
use gmseas_core::spectral::QuadConfig;

#[derive(Parser)]
#[command(name = "gmseas", version, about = "Forecasting of periodically stationary seasonal-increment sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Print operator expansions and the stationarity report of a spec.
    Expand(ExpandArgs),
    /// Solve a forecasting problem; optionally apply it to observed history.
    Forecast(ForecastArgs),
    /// Solve/verify a least-favorable density in an admissible class.
    Lf(LfArgs),
    /// Monte Carlo validation of a solved predictor against its recipe.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ExpandArgs {
    /// Increment spec document (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Truncation length of the inverse and fractional expansions.
    #[arg(long, default_value_t = 32)]
    lags: usize,
}

#[derive(Args)]
struct ForecastArgs {
    /// Model document (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Functional weights document (JSON).
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Factorized)]
    method: MethodArg,
    /// Finite horizon; geometric weight families default to infinite.
    #[arg(long)]
    horizon: Option<usize>,
    /// Operator-equation truncation (classical route).
    #[arg(long, default_value_t = gmseas_core::config::DEFAULT_LAGS)]
    lags: usize,
    /// Quadrature grid size.
    #[arg(long, default_value_t = gmseas_core::config::DEFAULT_GRID)]
    grid: usize,
    /// Observed history CSV; when given, the numeric forecast is emitted.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum MethodArg {
    Classical,
    Factorized,
}

#[derive(Args)]
struct LfArgs {
    /// Density-class document (JSON).
    #[arg(long)]
    class: PathBuf,
    /// Increment spec document (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Functional weights document (JSON), dimension one.
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value_t = 1 << 12)]
    grid: usize,
    /// Saddle-point samples.
    #[arg(long, default_value_t = 50)]
    saddle: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ValidateArgs {
    /// Simulation recipe document (JSON).
    #[arg(long)]
    recipe: PathBuf,
    /// Model document (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Functional weights document (JSON).
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report, pass) = match run(&cli.command) {
        Ok((report, pass)) => (report, pass),
        Err(e) => (json!({ "error": e.to_string() }), false),
    };
    let rendered = match cli.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("report serialization");
            s.push('\n');
            s
        }
        Format::Csv => render_csv(&report),
    };
    let write_result = match &cli.out {
        Some(path) => fs::write(path, rendered.as_bytes()),
        None => {
            print!("{rendered}");
            Ok(())
        }
    };
    if write_result.is_err() {
        return ExitCode::from(2);
    }
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn run(cmd: &Command) -> gmseas_core::Result<(Value, bool)> {
    match cmd {
        Command::Expand(args) => cmd_expand(args),
        Command::Forecast(args) => cmd_forecast(args),
        Command::Lf(args) => cmd_lf(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> gmseas_core::Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(gmseas_core::Error::from)
}

fn cmd_expand(args: &ExpandArgs) -> gmseas_core::Result<(Value, bool)> {
    let spec: IncrementSpec = read_json(&args.spec)?;
    let ispec = spec.integer_part();
    let e = expand_operator(&ispec)?;
    let d = expand_inverse(&ispec, args.lags)?;
    let g_plus = gi_coefficients(&spec, GiSign::Plus, args.lags);
    let g_minus = gi_coefficients(&spec, GiSign::Minus, args.lags);
    let report = classify_stationarity(&spec);
    let tail = if g_plus.tail_bound.is_finite() {
        json!(g_plus.tail_bound)
    } else {
        json!("unbounded")
    };
    let doc = json!({
        "degree": ispec.degree(),
        "operator": e.values,
        "inverse": d.values,
        "g_plus": g_plus.values,
        "g_minus": g_minus.values,
        "g_tail_bound": tail,
        "stationarity": serde_json::to_value(&report).map_err(gmseas_core::Error::from)?,
    });
    Ok((doc, true))
}

fn cmd_forecast(args: &ForecastArgs) -> gmseas_core::Result<(Value, bool)> {
    let model = model_from_json(&fs::read_to_string(&args.model)?)?;
    let weights: FunctionalWeights = read_json(&args.weights)?;
    let horizon = match (args.horizon, &weights) {
        (Some(h), _) => Horizon::Finite(h),
        (None, FunctionalWeights::Geometric { .. }) => Horizon::Infinite,
        (None, FunctionalWeights::Scalar { values }) => Horizon::Finite((values.len() - 1) / model.dim),
        (None, FunctionalWeights::Blocked { rows }) => Horizon::Finite(rows.len().saturating_sub(1)),
    };
    let lifted = lift_functional(&model.spec, &weights, model.dim, horizon)?;
    let cfg = SolveConfig {
        lags: args.lags,
        quad: QuadConfig::with_grid(args.grid),
        ..Default::default()
    };
    let solution = match args.method {
        MethodArg::Classical => solve_classical(&model, &lifted, &cfg)?,
        MethodArg::Factorized => solve_factorized(&model, &lifted, &cfg)?,
    };
    let mut doc = serde_json::to_value(SolutionDoc::from(&solution)).map_err(gmseas_core::Error::from)?;
    if let Some(data) = &args.data {
        let values = read_scalar_csv(std::io::BufReader::new(fs::File::open(data)?))?;
        let series = ScalarSeries::new(values, 0, model.dim as u32);
        let blocked = block(&series, model.dim as u32, true)?.shifted_to_end(-1);
        let forecast = apply_predictor(&solution, &blocked)?;
        doc["forecast"] = json!(forecast);
    }
    Ok((doc, true))
}

fn cmd_lf(args: &LfArgs) -> gmseas_core::Result<(Value, bool)> {
    let spec: IncrementSpec = read_json(&args.spec)?;
    let cls = class_from_json(&fs::read_to_string(&args.class)?, args.grid)?;
    let weights: FunctionalWeights = read_json(&args.weights)?;
    let horizon = match &weights {
        FunctionalWeights::Geometric { .. } => Horizon::Infinite,
        FunctionalWeights::Scalar { values } => Horizon::Finite(values.len() - 1),
        FunctionalWeights::Blocked { rows } => Horizon::Finite(rows.len() - 1),
    };
    let lifted = lift_functional(&spec, &weights, 1, horizon)?;
    let cfg = LfConfig { grid: args.grid, ..Default::default() };
    let sol = solve_lf_scalar(&cls, &lifted, &cfg)?;
    let residual = lf_residual(&cls, &sol, &spec.integer_part())?;
    let membership = class_membership(&sol.f0, &cls, &spec.integer_part(), 1e-8)?;
    let saddle = saddle_check(&sol, &cls, &spec.integer_part(), args.saddle, args.seed, 1e-8)?;
    let f0: Vec<f64> = sol.f0.iter().map(|m| m[(0, 0)].re).collect();
    let pass = residual.sup < 1e-6 && membership.member && saddle.violations == 0;
    let doc = json!({
        "family": cls.family_name(),
        "mse": sol.mse,
        "residual_sup": residual.sup,
        "sweeps": sol.sweeps,
        "alpha_sq": sol.multipliers.alpha_sq,
        "member": membership.member,
        "slacks": membership.slacks.iter().map(|s| json!({"name": s.name, "value": s.value})).collect::<Vec<_>>(),
        "saddle": {
            "checked": saddle.checked,
            "violations": saddle.violations,
            "max_excess": saddle.max_excess,
            "vacuous": saddle.vacuous,
        },
        "f0": f0,
    });
    Ok((doc, pass))
}

fn cmd_validate(args: &ValidateArgs) -> gmseas_core::Result<(Value, bool)> {
    let recipe: ModelRecipe = read_json(&args.recipe)?;
    let model = model_from_json(&fs::read_to_string(&args.model)?)?;
    let weights: FunctionalWeights = read_json(&args.weights)?;
    let horizon = match &weights {
        FunctionalWeights::Geometric { .. } => Horizon::Infinite,
        FunctionalWeights::Scalar { values } => Horizon::Finite((values.len() - 1) / model.dim),
        FunctionalWeights::Blocked { rows } => Horizon::Finite(rows.len() - 1),
    };
    let lifted = lift_functional(&model.spec, &weights, model.dim, horizon)?;
    let solution = solve_factorized(&model, &lifted, &SolveConfig::default())?;
    let mc = monte_carlo_mse(&recipe, &solution, args.reps, args.seed)?;
    let within = (mc.mse - solution.mse).abs() <= 3.0 * mc.standard_error;
    let doc = json!({
        "theoretical_mse": solution.mse,
        "empirical_mse": mc.mse,
        "standard_error": mc.standard_error,
        "replications": mc.replications,
        "within_three_se": within,
    });
    Ok((doc, within))
}

/// Flatten a JSON document into `key,value` CSV rows (arrays indexed).
fn render_csv(value: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", value, &mut rows);
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

fn flatten(prefix: &str, value: &Value, rows: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, rows);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, rows);
            }
        }
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}
