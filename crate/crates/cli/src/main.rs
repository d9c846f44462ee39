//! `refresh-sched` command-line front end.
//!
//! Exit codes: 0 ok, 2 input error, 3 numerical stall (output still written).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use refresh_sched::baselines::DEFAULT_CLASSIFY_TOL;
use refresh_sched::dag::CandidateGrid;
use refresh_sched::efficacy::trajectory;
use refresh_sched::experiments::{
    compare, frontier_export, frontier_on_grid, monte_carlo, MonteCarloSpec, Policy,
};
use refresh_sched::oracle::brute_force_best;
use refresh_sched::output;
use refresh_sched::pareto::ParetoConfig;
use refresh_sched::shortterm::{g_curve, optimal_wait, MyopicProblem, DEFAULT_ROOT_TOL};
use refresh_sched::solvers::{solve, solve_on_grid};
use refresh_sched::{
    sample_environment, DinkelbachConfig, EnvType, Environment, GridConfig, ScenarioSpec,
    SolverKind,
};

#[derive(Parser)]
#[command(name = "refresh-sched", version, about = "Refresh scheduling for decaying knowledge assets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random environment and print it as JSON.
    Sample(SampleArgs),
    /// Solve one environment with Delta-P or Delta-L.
    Solve(SolveArgs),
    /// Run solvers and baselines side by side on one environment.
    Compare(CompareArgs),
    /// Seeded Monte-Carlo study over sampled environments.
    Montecarlo(MonteCarloArgs),
    /// Single-update decision for a freshly refreshed asset.
    Shortterm(ShortTermArgs),
    /// Brute-force optimum over a small candidate set, checked against Delta-P.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// JSON file with `type`, `num_segments`, `t_end`, `seed`; flags override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long = "type", value_parser = parse_env_type)]
    env_type: Option<EnvType>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct GridArgs {
    /// Coarse grid step (minutes).
    #[arg(long)]
    coarse: Option<f64>,
    /// Fine grid step near boundaries (minutes).
    #[arg(long)]
    fine: Option<f64>,
    /// Fine window after each boundary (minutes).
    #[arg(long)]
    fine_window: Option<f64>,
    /// Longest allowed gap between completions (minutes).
    #[arg(long)]
    max_span: Option<f64>,
    #[arg(long)]
    refine_window: Option<f64>,
    #[arg(long)]
    refine_step: Option<f64>,
    /// Skip the refine-and-resolve pass.
    #[arg(long)]
    no_refine: bool,
}

#[derive(Args, Default)]
struct SolverArgs {
    /// JSON config with optional `grid` and `solver` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    inner_max: Option<usize>,
    /// Epsilon-dominance pruning of frontiers (0 keeps them exact).
    #[arg(long)]
    eps: Option<f64>,
    /// Per-vertex frontier cap (voids exactness).
    #[arg(long)]
    max_labels: Option<usize>,
    /// Keep every frontier label instead of pruning by bound.
    #[arg(long)]
    no_bound_pruning: bool,
    /// Start Dinkelbach from the best static baseline.
    #[arg(long)]
    warm_start: bool,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct SolveArgs {
    /// Environment JSON file.
    env: PathBuf,
    #[arg(long, default_value = "delta-p", value_parser = parse_solver)]
    solver: SolverKind,
    /// Explicit candidate times (comma separated) instead of the generated grid.
    #[arg(long, value_delimiter = ',')]
    grid_times: Option<Vec<f64>>,
    #[command(flatten)]
    opts: SolverArgs,
    /// Result JSON path (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trajectory CSV of f(t).
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Trajectory sampling step (minutes).
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// Outer-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Sink Pareto frontier CSV (unrefined grid, full frontier DP).
    #[arg(long)]
    frontier: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    env: PathBuf,
    /// Policies: delta-p, delta-l, zero-wait, fixed-<minutes>.
    #[arg(long, value_delimiter = ',', default_value = "delta-p,delta-l,fixed-10,fixed-25,zero-wait")]
    policies: Vec<String>,
    #[command(flatten)]
    opts: SolverArgs,
    #[arg(long, default_value_t = DEFAULT_CLASSIFY_TOL)]
    classify_tol: f64,
    /// Comparison table CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Per-policy schedules and action classes CSV.
    #[arg(long)]
    schedules: Option<PathBuf>,
    /// Full rows as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Drop the compute_seconds column from the CSV.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct MonteCarloArgs {
    /// JSON file with `type`, `num_segments`, `t_end`, `n_cases`, `seed`.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long = "type", value_parser = parse_env_type)]
    env_type: Option<EnvType>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long = "n-cases")]
    n_cases: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', default_value = "delta-l,fixed-10,fixed-25,zero-wait")]
    policies: Vec<String>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    opts: SolverArgs,
    #[arg(long, default_value_t = DEFAULT_CLASSIFY_TOL)]
    classify_tol: f64,
    /// Summary JSON path (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-case CSV.
    #[arg(long)]
    cases_csv: Option<PathBuf>,
}

#[derive(Args)]
struct ShortTermArgs {
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    t_half: f64,
    /// Update cost.
    #[arg(long = "C")]
    cost: f64,
    /// Update downtime (minutes).
    #[arg(long = "D")]
    downtime: f64,
    /// Root search cap (default 20 half-lives).
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ROOT_TOL)]
    root_tol: f64,
    /// CSV of (t, g, g') samples.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    env: PathBuf,
    /// Candidate completion times (comma separated); boundaries and t_end are added.
    #[arg(long, value_delimiter = ',', required = true)]
    grid_times: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_env_type(s: &str) -> Result<EnvType, String> {
    s.parse().map_err(|e: refresh_sched::environment::EnvError| e.to_string())
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    match s {
        "delta-p" => Ok(SolverKind::DeltaP),
        "delta-l" => Ok(SolverKind::DeltaL),
        other => Err(format!("unknown solver '{other}' (expected delta-p or delta-l)")),
    }
}

/// Exit-code classes.
enum Outcome {
    Ok,
    Stalled,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
        Command::Shortterm(a) => cmd_shortterm(a),
        Command::OracleCheck(a) => cmd_oracle(a),
    };
    match res {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Stalled) => {
            eprintln!("warning: solver stalled before meeting the tolerance");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_env(path: &Path) -> Result<Environment> {
    read_json(path)
}

/// Opens `path` for writing, or stdout when absent.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    grid: Option<GridConfig>,
    solver: Option<DinkelbachConfig>,
}

/// Defaults, then the config file, then flags.
fn resolve_config(opts: &SolverArgs) -> Result<(GridConfig, DinkelbachConfig)> {
    let file: ConfigFile = match &opts.config {
        Some(p) => read_json(p)?,
        None => ConfigFile::default(),
    };
    let mut grid = file.grid.unwrap_or_default();
    let mut cfg = file.solver.unwrap_or_default();
    let g = &opts.grid;
    if let Some(x) = g.coarse {
        grid.coarse_step = x;
    }
    if let Some(x) = g.fine {
        grid.fine_step = x;
    }
    if let Some(x) = g.fine_window {
        grid.fine_window = x;
    }
    if let Some(x) = g.max_span {
        grid.max_span = x;
    }
    if g.refine_window.is_some() || g.refine_step.is_some() {
        let mut r = grid.refine.unwrap_or_default();
        if let Some(x) = g.refine_window {
            r.window = x;
        }
        if let Some(x) = g.refine_step {
            r.step = x;
        }
        grid.refine = Some(r);
    }
    if g.no_refine {
        grid.refine = None;
    }
    if let Some(x) = opts.tol {
        cfg.tol = x;
    }
    if let Some(x) = opts.max_iter {
        cfg.max_iter = x;
    }
    if let Some(x) = opts.inner_tol {
        cfg.inner_tol = x;
    }
    if let Some(x) = opts.inner_max {
        cfg.inner_max = x;
    }
    if let Some(x) = opts.eps {
        cfg.eps_dominance = x;
    }
    if let Some(x) = opts.max_labels {
        cfg.max_labels = Some(x);
    }
    if opts.no_bound_pruning {
        cfg.bound_pruning = false;
    }
    if opts.warm_start {
        cfg.warm_start = true;
    }
    cfg.validate()?;
    Ok((grid, cfg))
}

fn parse_policies(names: &[String]) -> Result<Vec<Policy>> {
    if names.is_empty() {
        bail!("at least one policy is required");
    }
    names.iter().map(|n| n.parse::<Policy>().map_err(anyhow::Error::msg)).collect()
}

fn cmd_sample(a: SampleArgs) -> Result<Outcome> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct SpecDoc {
        #[serde(rename = "type")]
        env_type: Option<EnvType>,
        num_segments: Option<usize>,
        t_end: Option<f64>,
        seed: Option<u64>,
    }
    let doc: Option<SpecDoc> = a.spec.as_deref().map(read_json).transpose()?;
    let spec = ScenarioSpec {
        env_type: a
            .env_type
            .or(doc.as_ref().and_then(|d| d.env_type))
            .context("environment type missing (use --type or --spec)")?,
        num_segments: a.segments.or(doc.as_ref().and_then(|d| d.num_segments)).unwrap_or(6),
        t_end: a.t_end.or(doc.as_ref().and_then(|d| d.t_end)).unwrap_or(300.0),
        seed: a.seed.or(doc.as_ref().and_then(|d| d.seed)).unwrap_or(0),
    };
    let env = sample_environment(&spec)?;
    write_json(a.out.as_deref(), &env)?;
    Ok(Outcome::Ok)
}

fn cmd_solve(a: SolveArgs) -> Result<Outcome> {
    let env = read_env(&a.env)?;
    let (grid_cfg, cfg) = resolve_config(&a.opts)?;
    let result = match &a.grid_times {
        Some(times) => {
            let grid = CandidateGrid::from_times(&env, times)?;
            solve_on_grid(&env, grid, grid_cfg.max_span, grid_cfg.refine, &cfg, a.solver)?
        }
        None => solve(&env, &grid_cfg, &cfg, a.solver)?,
    };
    write_json(a.out.as_deref(), &result)?;
    if let Some(p) = &a.trajectory {
        let points = trajectory(&env, &result.schedule, a.step)?;
        output::write_trajectory_csv(create(p)?, &points)?;
    }
    if let Some(p) = &a.trace {
        output::write_trace_csv(create(p)?, &result.trace)?;
    }
    if let Some(p) = &a.frontier {
        let pareto = ParetoConfig { eps: cfg.eps_dominance, max_labels: cfg.max_labels };
        let points = match &a.grid_times {
            Some(times) => {
                let grid = CandidateGrid::from_times(&env, times)?;
                frontier_on_grid(&env, &grid, grid_cfg.max_span, &pareto)?
            }
            None => frontier_export(&env, &grid_cfg, &pareto)?,
        };
        output::write_frontier_csv(create(p)?, &points)?;
    }
    Ok(if result.stalled { Outcome::Stalled } else { Outcome::Ok })
}

fn cmd_compare(a: CompareArgs) -> Result<Outcome> {
    let env = read_env(&a.env)?;
    let (grid_cfg, cfg) = resolve_config(&a.opts)?;
    let policies = parse_policies(&a.policies)?;
    let rows = compare(&env, &grid_cfg, &cfg, &policies, a.classify_tol)?;
    print!("{}", output::comparison_table(&rows));
    if let Some(p) = &a.csv {
        output::write_comparison_csv(create(p)?, &rows, !a.no_timing)?;
    }
    if let Some(p) = &a.schedules {
        output::write_schedules_csv(create(p)?, &rows)?;
    }
    if let Some(p) = &a.json {
        write_json(Some(p), &rows)?;
    }
    let stalled = rows.iter().any(|r| r.stalled == Some(true));
    Ok(if stalled { Outcome::Stalled } else { Outcome::Ok })
}

fn cmd_montecarlo(a: MonteCarloArgs) -> Result<Outcome> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct SpecDoc {
        #[serde(rename = "type")]
        env_type: Option<EnvType>,
        num_segments: Option<usize>,
        t_end: Option<f64>,
        n_cases: Option<usize>,
        seed: Option<u64>,
    }
    let doc: Option<SpecDoc> = a.spec.as_deref().map(read_json).transpose()?;
    let spec = MonteCarloSpec {
        env_type: a
            .env_type
            .or(doc.as_ref().and_then(|d| d.env_type))
            .context("environment type missing (use --type or --spec)")?,
        num_segments: a.segments.or(doc.as_ref().and_then(|d| d.num_segments)).unwrap_or(6),
        t_end: a.t_end.or(doc.as_ref().and_then(|d| d.t_end)).unwrap_or(300.0),
        n_cases: a.n_cases.or(doc.as_ref().and_then(|d| d.n_cases)).unwrap_or(100),
        seed: a.seed.or(doc.as_ref().and_then(|d| d.seed)).unwrap_or(0),
    };
    let (grid_cfg, cfg) = resolve_config(&a.opts)?;
    let policies = parse_policies(&a.policies)?;
    let summary = monte_carlo(&spec, &grid_cfg, &cfg, &policies, a.jobs, a.classify_tol)?;
    write_json(a.out.as_deref(), &summary)?;
    if let Some(p) = &a.cases_csv {
        let names: Vec<String> = policies.iter().map(|p| p.to_string()).collect();
        output::write_cases_csv(create(p)?, &names, &summary.cases)?;
    }
    Ok(Outcome::Ok)
}

fn cmd_shortterm(a: ShortTermArgs) -> Result<Outcome> {
    let p = MyopicProblem::new(a.eta, a.t_half, a.downtime, a.cost, a.horizon)?;
    if !(a.root_tol > 0.0) {
        bail!("root tolerance must be positive");
    }
    let decision = optimal_wait(&p, a.root_tol)?;
    write_json(a.out.as_deref(), &decision)?;
    if let Some(path) = &a.curve {
        output::write_g_curve_csv(create(path)?, &g_curve(&p, a.samples))?;
    }
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct OracleReport {
    candidates: Vec<f64>,
    feasible_schedules: usize,
    oracle_schedule: Vec<f64>,
    #[serde(rename = "oracle_J")]
    oracle_objective: f64,
    delta_p_schedule: Vec<f64>,
    #[serde(rename = "delta_p_J")]
    delta_p_objective: f64,
    agree: bool,
}

/// Objectives closer than this count as equal.
const ORACLE_AGREEMENT_TOL: f64 = 1e-9;

fn cmd_oracle(a: OracleArgs) -> Result<Outcome> {
    let env = read_env(&a.env)?;
    let grid = CandidateGrid::from_times(&env, &a.grid_times)?;
    let candidates: Vec<f64> = grid.times().iter().copied().filter(|&t| t > 0.0).collect();
    let best = brute_force_best(&env, &candidates)?;
    let span = env.t_end();
    let dp = solve_on_grid(&env, grid, span, None, &DinkelbachConfig::default(), SolverKind::DeltaP)?;
    let report = OracleReport {
        candidates,
        feasible_schedules: best.feasible_count,
        oracle_schedule: best.schedule.completions().to_vec(),
        oracle_objective: best.objective,
        delta_p_schedule: dp.schedule.completions().to_vec(),
        delta_p_objective: dp.objective,
        agree: (best.objective - dp.objective).abs() <= ORACLE_AGREEMENT_TOL,
    };
    write_json(a.out.as_deref(), &report)?;
    if !report.agree {
        bail!("Delta-P objective {} differs from the oracle's {}", dp.objective, best.objective);
    }
    Ok(Outcome::Ok)
}
