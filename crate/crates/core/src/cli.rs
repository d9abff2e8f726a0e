//! Command-line front end.
//!
//! Exit codes: 0 success, 1 audit found violations or a replicate failed
//! for a reason other than slack exhaustion, 2 configuration error,
//! 3 slack exhausted in some replicate (outputs are still written),
//! 4 I/O error.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::config::{ConfigError, RunConfig};
use crate::oracle::{audit_rows, LedgerRow, ProblemSpec};
use crate::problems::{self, check_constants};
use crate::report::{write_run, ReplicateOutcome, RunReport};
use crate::solver::{self, SolverError};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SLACK: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SAFEZO_OUT";
const DEFAULT_OUT: &str = "safezo-out";

#[derive(Debug, Parser)]
#[command(
    name = "safezo",
    version,
    about = "Safe zeroth-order log-barrier optimization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Eta,
    Sigma,
    D,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run seeded replicates of a configured problem.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOptions,
    },
    /// Repeat a run over a list of values of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        opts: RunOptions,
    },
    /// Check a ledger CSV against a problem's ground-truth constraints.
    Audit {
        ledger: PathBuf,
        /// Built-in problem name.
        #[arg(long, conflicts_with = "config")]
        problem: Option<String>,
        /// Take the problem from a run configuration instead.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunOptions {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory; defaults to `run.out`, then $SAFEZO_OUT, then ./safezo-out.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs `config.replicates` seeded solves, `config.jobs` at a time. Seeds
/// are `solver.seed + r`; results come back in replicate order.
pub fn run_replicates(problem: &ProblemSpec, config: &RunConfig) -> Vec<ReplicateOutcome> {
    let one = |r: usize| {
        let seed = config.solver.seed.wrapping_add(r as u64);
        let mut solver_config = config.solver.clone();
        solver_config.seed = seed;
        ReplicateOutcome::from_result(r, seed, solver::solve(problem, &solver_config))
    };
    if config.jobs <= 1 || config.replicates <= 1 {
        return (0..config.replicates).map(one).collect();
    }
    match rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
    {
        Ok(pool) => pool.install(|| (0..config.replicates).into_par_iter().map(one).collect()),
        Err(_) => (0..config.replicates).map(one).collect(),
    }
}

fn load(path: &Path, opts: &RunOptions) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::from_file(path)?;
    if let Some(seed) = opts.seed {
        config.solver.seed = seed;
    }
    if let Some(r) = opts.replicates {
        config.replicates = r;
    }
    if let Some(j) = opts.jobs {
        config.jobs = j;
    }
    config.validate()?;
    Ok(config)
}

fn output_dir(config: &RunConfig, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| config.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_IO,
        Error::Config(ConfigError::Read { .. }) => EXIT_CONFIG,
        Error::Solver(SolverError::SlackExhausted { .. }) => EXIT_SLACK,
        Error::Solver(SolverError::NonFiniteMeasurement { .. }) => EXIT_FAILURE,
        _ => EXIT_CONFIG,
    }
}

fn warnings_for(problem: &ProblemSpec, config: &RunConfig) -> Vec<String> {
    if !config.check_constants || problem.bounds.is_none() {
        return Vec::new();
    }
    check_constants(problem, 500, 0)
        .map(|c| c.warnings())
        .unwrap_or_default()
}

fn outcome_code(outcomes: &[ReplicateOutcome]) -> i32 {
    if outcomes.iter().any(|o| o.exhausted_round.is_some()) {
        EXIT_SLACK
    } else if outcomes.iter().any(|o| o.error.is_some()) {
        EXIT_FAILURE
    } else {
        EXIT_OK
    }
}

fn run(config_path: &Path, opts: &RunOptions) -> Result<i32, Error> {
    let config = load(config_path, opts)?;
    let problem = config.problem.build()?;
    let warnings = warnings_for(&problem, &config);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let outcomes = run_replicates(&problem, &config);
    let report = RunReport::new(&config, &problem, &outcomes, warnings);
    let dir = output_dir(&config, opts);
    write_run(&dir, &problem, &outcomes, &report, config.write_ledger)?;

    let a = &report.aggregate;
    println!(
        "{}: {} replicate(s), {} completed, {} safe, {} violation(s)",
        report.problem, a.replicates, a.completed, a.safe_runs, a.total_violations
    );
    for r in &report.replicates {
        match (&r.selected_x, r.selected_objective) {
            (Some(x), Some(f)) => println!(
                "  replicate {:>3} seed {:>4}: x = {:?}, f0 = {:.6}, N = {}, kkt = {}",
                r.replicate,
                r.seed,
                x,
                f,
                r.measurements,
                r.kkt
                    .as_ref()
                    .map_or("n/a", |k| if k.passed { "pass" } else { "fail" })
            ),
            _ => println!(
                "  replicate {:>3}: {}",
                r.replicate,
                r.error.as_deref().unwrap_or("no iterate")
            ),
        }
        if let Some(e) = &r.error {
            eprintln!("replicate {}: {e}", r.replicate);
        }
    }
    println!("outputs written to {}", dir.display());
    Ok(outcome_code(&outcomes))
}

fn sweep(config_path: &Path, axis: Axis, values: &[f64], opts: &RunOptions) -> Result<i32, Error> {
    let base = load(config_path, opts)?;
    if values
        .iter()
        .any(|v| !(*v > 0.0) && !(axis == Axis::Sigma && *v == 0.0))
    {
        return Err(ConfigError::Invalid("sweep values must be positive".into()).into());
    }
    let dir = output_dir(&base, opts);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
    w.write_record([
        "axis",
        "value",
        "replicate",
        "seed",
        "iterations",
        "measurements",
        "min_slack",
        "kkt_residual",
        "kkt_passed",
        "violations",
        "status",
    ])?;
    let axis_name = match axis {
        Axis::Eta => "eta",
        Axis::Sigma => "sigma",
        Axis::D => "d",
    };
    let mut code = EXIT_OK;
    for &value in values {
        let mut config = base.clone();
        match axis {
            Axis::Eta => config.solver.eta0 = value,
            Axis::Sigma => config.solver.sigma = value,
            Axis::D => {
                if value.fract() != 0.0 {
                    return Err(ConfigError::Invalid(format!(
                        "dimension must be an integer, got {value}"
                    ))
                    .into());
                }
                config.problem.name = "random".into();
                config.problem.dimension = value as usize;
                config.problem.start = None;
            }
        }
        config.validate()?;
        let problem = config.problem.build()?;
        let outcomes = run_replicates(&problem, &config);
        code = code.max(outcome_code(&outcomes));
        for o in &outcomes {
            let (iterations, measurements, min_slack, residual, passed, violations) =
                match &o.report {
                    Some(r) => (
                        r.rounds
                            .iter()
                            .map(|x| x.trajectory.len())
                            .sum::<usize>()
                            .to_string(),
                        r.measurements.to_string(),
                        r.min_slack.to_string(),
                        r.kkt
                            .as_ref()
                            .map_or(String::new(), |k| k.stationarity.to_string()),
                        r.kkt
                            .as_ref()
                            .map_or(String::new(), |k| (k.passed as u8).to_string()),
                        r.violations.len().to_string(),
                    ),
                    None => Default::default(),
                };
            w.write_record([
                axis_name.to_string(),
                value.to_string(),
                o.replicate.to_string(),
                o.seed.to_string(),
                iterations,
                measurements,
                min_slack,
                residual,
                passed,
                violations,
                o.error.clone().unwrap_or_else(|| "ok".into()),
            ])?;
        }
    }
    w.flush()?;
    println!("sweep over {axis_name} written to {}", path.display());
    Ok(code)
}

fn audit(ledger: &Path, problem: Option<&str>, config: Option<&Path>) -> Result<i32, Error> {
    let problem = match (problem, config) {
        (Some(name), _) => problems::by_name(name)
            .ok_or_else(|| problems::DomainError::UnknownProblem(name.into()))?,
        (None, Some(path)) => RunConfig::from_file(path)?.problem.build()?,
        (None, None) => {
            return Err(ConfigError::Invalid("audit needs --problem or --config".into()).into())
        }
    };
    let rows = LedgerRow::read_csv(File::open(ledger)?)?;
    let violations = audit_rows(&rows, &problem);
    println!("{} row(s), {} violation(s)", rows.len(), violations.len());
    if !violations.is_empty() {
        let mut w = csv::Writer::from_writer(std::io::stdout());
        w.write_record(["row", "t", "l", "constraint", "magnitude"])?;
        for v in &violations {
            w.write_record([
                v.entry.to_string(),
                v.t.to_string(),
                v.l.to_string(),
                v.constraint.to_string(),
                v.magnitude.to_string(),
            ])?;
        }
        w.flush()?;
        return Ok(EXIT_FAILURE);
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run { config, opts } => run(config, opts),
        Command::Sweep {
            config,
            axis,
            values,
            opts,
        } => sweep(config, *axis, values, opts),
        Command::Audit {
            ledger,
            problem,
            config,
        } => audit(ledger, problem.as_deref(), config.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
