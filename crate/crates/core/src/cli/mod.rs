//! Command-line front end: scenario runs, the initial-point × mode sweep,
//! KKT error of a point, and the invariant suites.

pub mod scenario;
pub mod table;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::algorithms::AlgorithmId;
use crate::error::{Result, ScfoError};
use crate::harness::{run_many, RunConfig, RunError, Trajectory};
use crate::kkt::kkt_error;
use crate::problem::{ProblemSpec, EX4_INITIAL_POINTS};
use crate::scfo::Mode;
use crate::verify;

pub use scenario::ScenarioFile;
pub use table::{read_trajectory_csv, write_trajectory_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SAFETY: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "scfo",
    version,
    about = "Feasibility- and optimality-enforcing filter for real-time optimization loops",
    after_help = "Exit status: 0 on success, 1 on a validation error, 2 on a safety violation.\n\
                  SCFO_SEED overrides the seed of every run started by `run` and `sweep`."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every [[run]] entry of a scenario file and write one CSV per run.
    Run(RunArgs),
    /// Run algorithms × modes × initial points on one plant.
    Sweep(SweepArgs),
    /// Print the KKT error and multipliers of a point.
    Kkt(KktArgs),
    /// Run the invariant suites; exit 0 iff all pass.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory; defaults to the scenario's `output_dir`, then `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Maximum number of concurrent runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Seed for every run, replacing the scenario's seeds.
    #[arg(long, env = "SCFO_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value = "ex4")]
    pub plant: String,
    /// Comma-separated modes: none, feas (feasibility_only), full.
    #[arg(long, default_value = "none,feas,full")]
    pub modes: String,
    /// Comma-separated algorithm ids, or `all`.
    #[arg(long, default_value = "all")]
    pub algorithms: String,
    /// Initial point `x,y`; repeat for several. Defaults to (-0.5,0.05) and (0,0.4).
    #[arg(long = "u0", allow_hyphen_values = true)]
    pub u0: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value = "sweep")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, env = "SCFO_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct KktArgs {
    #[arg(long)]
    pub plant: String,
    /// Comma-separated input vector, e.g. `0.35,0.32`.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only the named suite.
    #[arg(long)]
    pub suite: Option<String>,
}

/// Parses `args` (program name first) and executes the command, writing
/// reports to `out`. Returns the process exit status.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Kkt(a) => cmd_kkt(a, out),
        Command::Verify(a) => cmd_verify(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &ScfoError) -> i32 {
    if e.is_safety() {
        EXIT_SAFETY
    } else {
        EXIT_VALIDATION
    }
}

pub fn parse_point(text: &str, field: &str) -> Result<DVector<f64>> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ScfoError::config(field, format!("`{text}` is not a comma-separated list of reals: {e}")))?;
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(ScfoError::config(field, format!("`{text}` must hold finite reals")));
    }
    Ok(DVector::from_vec(values))
}

pub fn parse_modes(text: &str) -> Result<Vec<Mode>> {
    text.split(',').map(str::parse).collect()
}

pub fn parse_algorithms(text: &str) -> Result<Vec<AlgorithmId>> {
    if text.trim() == "all" {
        return Ok(AlgorithmId::ALL.to_vec());
    }
    text.split(',').map(str::parse).collect()
}

/// One config per algorithm × mode × initial point, in that nesting order.
pub fn sweep_configs(args: &SweepArgs) -> Result<Vec<RunConfig>> {
    let modes = parse_modes(&args.modes)?;
    let algorithms = parse_algorithms(&args.algorithms)?;
    let points: Vec<DVector<f64>> = if args.u0.is_empty() {
        EX4_INITIAL_POINTS.iter().map(|p| DVector::from_row_slice(p)).collect()
    } else {
        args.u0.iter().map(|t| parse_point(t, "u0")).collect::<Result<_>>()?
    };
    let mut configs = Vec::new();
    for &alg in &algorithms {
        for &mode in &modes {
            for (i, u0) in points.iter().enumerate() {
                let mut cfg =
                    RunConfig::new(&args.plant, alg, mode, u0.as_slice(), args.iterations).with_seed(args.seed);
                cfg.name = format!("{}_{}_{}_{}", args.plant, alg, mode, (b'a' + i as u8) as char);
                cfg.prepare()?;
                configs.push(cfg);
            }
        }
    }
    Ok(configs)
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<i32> {
    let scenario = ScenarioFile::load(&args.scenario)?;
    let configs = scenario.configs(args.seed)?;
    let dir = args
        .out
        .clone()
        .or(scenario.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    execute(&configs, &dir, args.jobs, out)
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<i32> {
    let configs = sweep_configs(args)?;
    execute(&configs, &args.out, args.jobs, out)
}

/// Runs the configs, writes `<name>.csv` per run plus `summary.csv`, and
/// reports one line per run.
pub fn execute(configs: &[RunConfig], dir: &Path, jobs: usize, out: &mut dyn Write) -> Result<i32> {
    std::fs::create_dir_all(dir).map_err(|source| ScfoError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let results = run_many(configs, jobs);
    let mut code = EXIT_OK;
    let mut finished = Vec::new();
    for (cfg, res) in configs.iter().zip(results) {
        let traj = match res {
            Ok(t) => t,
            Err(RunError { error, partial }) => {
                eprintln!("error: run `{}`: {error}", cfg.name);
                code = code.max(exit_code(&error));
                match partial {
                    Some(t) => *t,
                    None => continue,
                }
            }
        };
        write_trajectory_csv(&traj, &dir.join(format!("{}.csv", cfg.name)))?;
        report_line(&traj, out);
        finished.push(traj);
    }
    write_summary(&finished, &dir.join("summary.csv"))?;
    Ok(code)
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn report_line(t: &Trajectory, out: &mut dyn Write) {
    let s = &t.summary;
    let end = match (s.converged_at, s.stalled_at) {
        (Some(k), _) => format!("converged at {k}"),
        (None, Some(k)) => format!("stalled from {k}"),
        (None, None) => format!("{} steps", t.n_steps()),
    };
    let _ = writeln!(
        out,
        "{:<28} {:<18} u = {}  cost = {:.6}  kkt = {:.2e}  feasible = {}  monotone = {}",
        t.config.name,
        end,
        fmt_vec(&s.final_u),
        s.final_cost,
        s.final_kkt_error,
        s.feasible_all,
        s.monotone_cost
    );
}

fn write_summary(trajs: &[Trajectory], path: &Path) -> Result<()> {
    let csv_err = |source| ScfoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record([
        "name",
        "plant",
        "algorithm",
        "mode",
        "seed",
        "steps",
        "converged_at",
        "stalled_at",
        "feasible_all",
        "monotone_cost",
        "final_cost",
        "final_kkt_error",
        "min_gain",
        "distance_to_reference",
        "final_u",
    ])
    .map_err(csv_err)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for t in trajs {
        let s = &t.summary;
        let u: Vec<String> = s.final_u.iter().map(|v| v.to_string()).collect();
        w.write_record([
            t.config.name.clone(),
            t.config.plant_id.clone(),
            t.config.algorithm.to_string(),
            t.config.mode.to_string(),
            t.config.seed.to_string(),
            t.n_steps().to_string(),
            opt(s.converged_at.map(|k| k.to_string())),
            opt(s.stalled_at.map(|k| k.to_string())),
            s.feasible_all.to_string(),
            s.monotone_cost.to_string(),
            s.final_cost.to_string(),
            s.final_kkt_error.to_string(),
            opt(s.min_gain.map(|g| g.to_string())),
            opt(s.distance_to_reference.map(|d| d.to_string())),
            u.join(" "),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| ScfoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_kkt(args: &KktArgs, out: &mut dyn Write) -> Result<i32> {
    let problem = ProblemSpec::by_id(&args.plant)?;
    let u = parse_point(&args.point, "point")?;
    if u.len() != problem.n_u {
        return Err(ScfoError::config(
            "point",
            format!(
                "has {} components, plant `{}` has {} inputs",
                u.len(),
                problem.id,
                problem.n_u
            ),
        ));
    }
    problem
        .check_in_box(&u)
        .map_err(|e| ScfoError::config("point", e.to_string()))?;
    let rep = kkt_error(&problem, &u)?;
    let g = problem.constraint_values(&u);
    let (n, m) = (problem.n_u, problem.n_g);
    let _ = writeln!(out, "plant        {}", problem.id);
    let _ = writeln!(out, "point        {}", fmt_vec(&u));
    let _ = writeln!(out, "g            {}", fmt_vec(&g));
    let _ = writeln!(out, "kkt_error    {:e}", rep.error);
    let _ = writeln!(out, "stationarity {:e}", rep.stationarity_norm_sq);
    let _ = writeln!(out, "slackness    {:e}", rep.slackness_sq);
    let _ = writeln!(out, "mu           {}", fmt_vec(&rep.mu(m)));
    let _ = writeln!(
        out,
        "zeta_lower   {}",
        fmt_vec(&rep.multipliers.rows(m, n).into_owned())
    );
    let _ = writeln!(
        out,
        "zeta_upper   {}",
        fmt_vec(&rep.multipliers.rows(m + n, n).into_owned())
    );
    if let Some(j) = g.iter().position(|&v| v > 0.0) {
        let _ = writeln!(out, "note         point is infeasible: g_{} > 0", j + 1);
    }
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let suites = verify::suites();
    let selected: Vec<_> = match &args.suite {
        Some(name) => {
            let found: Vec<_> = suites.into_iter().filter(|s| s.name == name.as_str()).collect();
            if found.is_empty() {
                return Err(ScfoError::config(
                    "suite",
                    format!("unknown suite `{name}` (known: {})", verify::suite_names().join(", ")),
                ));
            }
            found
        }
        None => suites,
    };
    let mut all = true;
    for suite in selected {
        let report = (suite.run)();
        let _ = writeln!(
            out,
            "{} {:<12} {} checks{}",
            if report.passed() { "PASS" } else { "FAIL" },
            suite.name,
            report.checks,
            if report.passed() {
                String::new()
            } else {
                format!(", {} failed", report.failures.len())
            }
        );
        for f in report.failures.iter().take(5) {
            let _ = writeln!(out, "     {f}");
        }
        all &= report.passed();
    }
    Ok(if all { EXIT_OK } else { EXIT_VALIDATION })
}
