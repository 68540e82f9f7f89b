//! `rulab` command line.

use std::ffi::OsString;
use std::io;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ConfigTree, OperatorKind, RunConfig};
use crate::error::Error;
use crate::lambda::{estimate_lambda_p, LambdaEstimate};
use crate::model::StatePoint;
use crate::output::{format_number, with_output, write_json, write_sweep_csv, Format};
use crate::rng::RngStream;
use crate::solver::{
    apply_a, apply_b, classify_stability, classify_value, solve_fixed_point, FramingSpec, ShockSpec, SolveReport,
    Stability,
};
use crate::sweep::sweep_stability_map;

const TRUNCATION_CAVEAT: &str = "solution computed on a truncated grid; convergence there does not certify a \
                                 fixed point on the unbounded state space";

#[derive(Debug, Parser)]
#[command(name = "rulab", version, about = "Stability analysis for recursive-utility models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo estimate of the stability coefficient.
    Lambda(LambdaArgs),
    /// Spectral radius of the discretized valuation operator.
    Spectral(SpectralArgs),
    /// Fixed-point iteration for the normalized utility.
    Solve(CommonArgs),
    /// Stability map over two parameters.
    Sweep(CommonArgs),
    /// Simulated log consumption growth paths.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set estimation.n=200`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker thread cap.
    #[arg(long, env = "RULAB_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct LambdaArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Average h rather than h^p before the root.
    #[arg(long)]
    literal_ssy_formula: bool,
    /// Draw the level coordinate of the initial states uniformly on LO,HI.
    #[arg(
        long,
        value_delimiter = ',',
        num_args = 2,
        value_name = "LO,HI",
        allow_hyphen_values = true
    )]
    init_uniform: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct SpectralArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also report the Gelfand sequence a_1..a_N.
    #[arg(long, value_name = "N")]
    gelfand: Option<usize>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Path length; defaults to `estimation.n`.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    paths: usize,
    /// Initial state; defaults to a stationary draw per path.
    #[arg(long, value_delimiter = ',', value_name = "X", allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Numerical(#[from] Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(Error::NoConvergence { .. } | Error::Overflow(_)) => 2,
            _ => 1,
        }
    }
}

impl CommonArgs {
    /// Loads, overrides and validates; nothing numerical runs before this.
    fn load(&self, extra: &[String]) -> Result<(ConfigTree, RunConfig), CliError> {
        let mut tree = ConfigTree::load(&self.config)?;
        for spec in self.set.iter().chain(extra) {
            tree.apply_override(spec)?;
        }
        if let Some(seed) = self.seed {
            tree.apply_override(&format!("estimation.seed={seed}"))?;
        }
        let cfg = tree.validated()?;
        Ok((tree, cfg))
    }

    fn format(&self, default: Format) -> Format {
        match self.format {
            Some(FormatArg::Json) => Format::Json,
            Some(FormatArg::Csv) => Format::Csv,
            None => default,
        }
    }

    fn json_only(&self) -> Result<(), CliError> {
        if self.format == Some(FormatArg::Csv) {
            return Err(CliError::Usage(
                "csv output is only available for sweep and simulate".into(),
            ));
        }
        Ok(())
    }

    fn emit<T: Serialize>(&self, value: &T) -> Result<(), CliError> {
        with_output(self.out.as_deref(), |w| write_json(value, w))?;
        Ok(())
    }
}

#[derive(Serialize)]
struct LambdaOutput {
    model: &'static str,
    #[serde(flatten)]
    estimate: LambdaEstimate,
    stability: Stability,
    literal_formula: bool,
}

#[derive(Serialize)]
struct SpectralOutput {
    model: &'static str,
    nodes: usize,
    rho: f64,
    lambda: f64,
    theta: f64,
    stability: Stability,
    iterations: usize,
    residual: f64,
    hs_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gelfand: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct SolveOutput {
    model: &'static str,
    operator: OperatorKind,
    #[serde(flatten)]
    report: SolveReport,
    /// Spectral stability coefficient of the discretized operator.
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    caveat: Option<&'static str>,
}

#[derive(Serialize)]
struct SimulatedPath {
    path: usize,
    log_growth: f64,
    x_final: Vec<f64>,
}

fn lambda_cmd(args: &LambdaArgs) -> Result<(), CliError> {
    args.common.json_only()?;
    let mut extra = Vec::new();
    if args.literal_ssy_formula {
        extra.push("estimation.literal_formula=true".to_string());
    }
    if let Some(range) = &args.init_uniform {
        extra.push(format!(
            "estimation.init_law={{ kind = \"uniform\", lo = {:?}, hi = {:?} }}",
            range[0], range[1]
        ));
    }
    let (_, cfg) = args.common.load(&extra)?;
    let model = cfg.build_model()?;
    let estimate = estimate_lambda_p(&model, &cfg.preferences, &cfg.estimation)?;
    let output = LambdaOutput {
        model: cfg.model_name(),
        estimate,
        stability: classify_stability(&estimate, None)?,
        literal_formula: cfg.estimation.literal_formula,
    };
    args.common.emit(&output)
}

fn spectral_cmd(args: &SpectralArgs) -> Result<(), CliError> {
    args.common.json_only()?;
    let (_, cfg) = args.common.load(&[])?;
    let op = cfg.build_operator()?;
    let spec = op.spectral_radius_power(cfg.grid.tol, cfg.grid.max_iter)?;
    let lambda = cfg.preferences.stability_coefficient(spec.rho);
    let gelfand = match args.gelfand {
        Some(n) => Some(op.gelfand_sequence(n, cfg.estimation.p)?),
        None => None,
    };
    let output = SpectralOutput {
        model: cfg.model_name(),
        nodes: op.len(),
        rho: spec.rho,
        lambda,
        theta: cfg.preferences.theta(),
        stability: classify_value(lambda, 0.0),
        iterations: spec.iterations,
        residual: spec.residual,
        hs_norm: op.hs_norm(),
        gelfand,
    };
    args.common.emit(&output)
}

fn solve_cmd(args: &CommonArgs) -> Result<(), CliError> {
    args.json_only()?;
    let (_, cfg) = args.load(&[])?;
    let op = cfg.build_operator()?;
    let prefs = &cfg.preferences;
    let s = &cfg.solve;
    let g0 = vec![s.initial; op.len()];
    let report = match s.operator {
        OperatorKind::A => {
            let shock = ShockSpec::from_function(&s.lambda_fn, &op)?;
            solve_fixed_point(|g| apply_a(&op, prefs, &shock, g), &g0, s.tol, s.max_iter)?
        }
        OperatorKind::B => {
            let framing = FramingSpec::from_function(&s.b_fn, &op)?;
            solve_fixed_point(|g| apply_b(&op, prefs, &framing, g), &g0, s.tol, s.max_iter)?
        }
    };
    let lambda = op
        .spectral_radius_power(cfg.grid.tol, cfg.grid.max_iter)
        .ok()
        .map(|r| prefs.stability_coefficient(r.rho));
    let output = SolveOutput {
        model: cfg.model_name(),
        operator: s.operator,
        report,
        lambda,
        caveat: (!op.model().is_finite_chain()).then_some(TRUNCATION_CAVEAT),
    };
    args.emit(&output)
}

fn sweep_cmd(args: &CommonArgs) -> Result<(), CliError> {
    let (tree, _) = args.load(&[])?;
    let cells = sweep_stability_map(&tree)?;
    match args.format(Format::Csv) {
        Format::Csv => with_output(args.out.as_deref(), |w| {
            write_sweep_csv(&cells, w).map_err(|e| io::Error::other(e.to_string()))
        })?,
        Format::Json => args.emit(&cells)?,
    }
    Ok(())
}

fn simulate_cmd(args: &SimulateArgs) -> Result<(), CliError> {
    let (_, cfg) = args.common.load(&[])?;
    let model = cfg.build_model()?;
    let x0 = match &args.x0 {
        Some(coords) => {
            let x = StatePoint::new(coords)?;
            model.check_state(&x)?;
            Some(x)
        }
        None => None,
    };
    let steps = args.steps.unwrap_or(cfg.estimation.n);
    let seed = cfg.estimation.seed;
    let paths: Vec<SimulatedPath> = (0..args.paths)
        .map(|i| {
            let start = x0.unwrap_or_else(|| {
                let mut rng = RngStream::for_initial_state(seed, i as u64).generator();
                model.sample_stationary(&mut rng)
            });
            let mut rng = RngStream::new(seed, i as u64).generator();
            let (log_growth, x) = model.simulate_growth(&start, steps, &mut rng);
            SimulatedPath {
                path: i,
                log_growth,
                x_final: x.coords().to_vec(),
            }
        })
        .collect();
    match args.common.format(Format::Json) {
        Format::Json => args.common.emit(&paths)?,
        Format::Csv => with_output(args.common.out.as_deref(), |w| {
            writeln!(w, "path,log_growth,x_final")?;
            for p in &paths {
                let x: Vec<String> = p.x_final.iter().map(|v| format_number(*v)).collect();
                writeln!(w, "{},{},{}", p.path, format_number(p.log_growth), x.join(";"))?;
            }
            Ok(())
        })?,
    }
    Ok(())
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    let threads = match command {
        Command::Lambda(a) => a.common.threads,
        Command::Spectral(a) => a.common.threads,
        Command::Solve(a) | Command::Sweep(a) => a.threads,
        Command::Simulate(a) => a.common.threads,
    };
    let run = || match command {
        Command::Lambda(a) => lambda_cmd(a),
        Command::Spectral(a) => spectral_cmd(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
    };
    match threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(run),
        None => run(),
    }
}

/// Runs the CLI and returns the process exit code: 0 on success, 1 on
/// configuration or I/O errors, 2 on numerical failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rulab: {e}");
            e.exit_code()
        }
    }
}
