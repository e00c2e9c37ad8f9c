//! `labandit` — loss-averse bandit values, densities, and simulations.
//!
//! Every subcommand is a pure function of its flags (plus the seed), so
//! repeated invocations produce byte-identical artifacts. JSON is the
//! canonical result format; tabular dumps are CSV. Exit codes: 0 success,
//! 2 invalid input or configuration, 1 internal error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use labandit_core::dp::{self, DpOptions};
use labandit_core::mc::{self, Scaling, SimOptions, TruthAssignment};
use labandit_core::obm::{self, ObmParams};
use labandit_core::value::{self, ValueMethod};
use labandit_core::{Environment, Error as CoreError, Strategy, UtilityIndex};

#[derive(Parser)]
#[command(
    name = "labandit",
    version,
    about = "Loss-averse multi-armed bandits: exact values, oscillating-BM densities, Monte Carlo"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Limiting value V for given (c, sigma_low, sigma_high).
    Value(ValueArgs),
    /// Time-1 density of the oscillating Brownian motion as CSV (y, q).
    Density(DensityArgs),
    /// One Euler-Maruyama path as CSV (t, w).
    ObmSample(ObmSampleArgs),
    /// Exact finite-horizon value by backward induction.
    Dp(DpArgs),
    /// Monte Carlo simulation of a strategy under its induced law.
    Simulate(SimulateArgs),
    /// Posterior convergence fractions in the two-armed learning model.
    Posterior(PosteriorArgs),
    /// V_n over a geometric horizon grid with the limit and a fitted slope.
    Converge(ConvergeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Quadrature,
    ClosedForm,
}

#[derive(Args)]
struct ValueArgs {
    #[arg(long, allow_negative_numbers = true)]
    c: f64,
    #[arg(long)]
    sigma_low: f64,
    #[arg(long)]
    sigma_high: f64,
    /// Gain-domain index; only the built-in exponential is available
    /// from the command line.
    #[arg(long, default_value = "exponential")]
    phi1: String,
    #[arg(long, value_enum, default_value = "closed-form")]
    method: MethodArg,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    sigma_low: f64,
    #[arg(long)]
    sigma_high: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c: f64,
    #[arg(long, allow_negative_numbers = true)]
    y_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    y_max: Option<f64>,
    #[arg(long, default_value_t = 601)]
    points: u32,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ObmSampleArgs {
    #[arg(long)]
    sigma_low: f64,
    #[arg(long)]
    sigma_high: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    start: f64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, default_value_t = 2048)]
    steps: u32,
    /// Overridden by the BANDIT_SEED environment variable.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DpArgs {
    /// Environment JSON file.
    #[arg(long)]
    env: PathBuf,
    /// Utility JSON file. Required unless --indicator-c is given.
    #[arg(long)]
    utility: Option<PathBuf>,
    #[arg(long)]
    n: u64,
    /// Compute the upper indicator probability sup_s P^s(sum/sqrt(n) >= c)
    /// instead of a utility value.
    #[arg(long, allow_negative_numbers = true)]
    indicator_c: Option<f64>,
    /// Evaluate this strategy instead of optimizing. Selectors: s_star,
    /// s_star_horizon, s_star_learning, `single:<arm>`, `custom:<file>`.
    #[arg(long)]
    strategy: Option<String>,
    /// Dump the full state table as CSV (stage, sum, d1, d2, value, argmax).
    #[arg(long)]
    dump_table: Option<PathBuf>,
    /// Cap on the largest stage layer.
    #[arg(long, default_value_t = 100_000_000)]
    cap: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    Sqrt,
    Linear,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long, default_value = "s_star")]
    strategy: String,
    /// Utility JSON file; default is the exponential index with c = 0 and
    /// theta = sigma_low/sigma_high of the environment.
    #[arg(long)]
    utility: Option<PathBuf>,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    /// Overridden by the BANDIT_SEED environment variable.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "sqrt")]
    scaling: ScalingArg,
    /// Start of the persistence window [N, n].
    #[arg(long = "persistence-N", default_value_t = 10)]
    persistence_n: u64,
    /// Write per-replication utility draws as CSV (rep, value).
    #[arg(long)]
    per_rep: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TruthArg {
    /// Arm a truly has the low outcome probability.
    Low,
    /// Arm a truly has the high outcome probability.
    High,
}

#[derive(Args)]
struct PosteriorArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long, value_enum)]
    truth: TruthArg,
    #[arg(long, default_value = "s_star_learning")]
    strategy: String,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 10_000)]
    reps: u64,
    /// Overridden by the BANDIT_SEED environment variable.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    utility: PathBuf,
    /// Geometric grid "lo..hi", doubling from lo to hi (e.g. 16..16384).
    #[arg(long, default_value = "16..16384")]
    n_grid: String,
    /// Additionally write the rows as CSV (n, v_n, gap, v).
    #[arg(long)]
    rows_csv: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            std::process::exit(2);
        }
    }
    let result = match cli.command {
        Command::Value(a) => run_value(a),
        Command::Density(a) => run_density(a),
        Command::ObmSample(a) => run_obm_sample(a),
        Command::Dp(a) => run_dp(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Posterior(a) => run_posterior(a),
        Command::Converge(a) => run_converge(a),
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

enum CliError {
    Input(String),
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Internal(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if e.is_validation() {
            CliError::Input(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("io error: {e}"))
    }
}

type CliResult = Result<(), CliError>;

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            if !content.ends_with('\n') {
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn read_env(path: &Path) -> Result<Environment, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read env file {}: {e}", path.display())))?;
    Ok(Environment::from_json(&text)?)
}

fn read_utility(path: &Path) -> Result<UtilityIndex, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Input(format!("cannot read utility file {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("bad utility JSON: {e}")))
}

fn parse_strategy(selector: &str, n: u64, c: f64) -> Result<Strategy, CliError> {
    if let Some(arm) = selector.strip_prefix("single:") {
        return Ok(Strategy::SingleArm(arm.to_string()));
    }
    if let Some(file) = selector.strip_prefix("custom:") {
        let text = fs::read_to_string(file).map_err(|e| {
            CliError::Input(format!("cannot read decision table {file}: {e}"))
        })?;
        return Ok(Strategy::custom_from_json(&text)?);
    }
    match selector {
        "s_star" => Ok(Strategy::SStarNoLearn),
        "s_star_horizon" => Ok(Strategy::SStarHorizon { horizon: n, c }),
        "s_star_learning" => Ok(Strategy::SStarLearning),
        other => Err(CliError::Input(format!(
            "unknown strategy selector '{other}' (want s_star, s_star_horizon, s_star_learning, single:<arm>, custom:<file>)"
        ))),
    }
}

fn seed_override(flag: u64) -> Result<u64, CliError> {
    match std::env::var("BANDIT_SEED") {
        Ok(s) => s
            .parse::<u64>()
            .map_err(|_| CliError::Input(format!("BANDIT_SEED must be a u64, got '{s}'"))),
        Err(_) => Ok(flag),
    }
}

fn run_value(a: ValueArgs) -> CliResult {
    if a.phi1 != "exponential" {
        return Err(CliError::Input(format!(
            "phi1 '{}' is not available from the command line; only 'exponential' is",
            a.phi1
        )));
    }
    let result = match a.method {
        MethodArg::ClosedForm => {
            value::value_exponential_closed_form(a.c, a.sigma_low, a.sigma_high)?
        }
        MethodArg::Quadrature => {
            let params = ObmParams::new(a.sigma_low, a.sigma_high, a.c)?;
            let u = UtilityIndex::exponential(a.c, params.theta())?;
            value::value_by_quadrature(&u, &params)?
        }
    };
    let out = json!({
        "v": result.v,
        "method": match result.method {
            ValueMethod::Quadrature => "quadrature",
            ValueMethod::ClosedFormExponential => "closed-form",
        },
        "error_estimate": result.error_estimate,
    });
    write_output(a.output.as_deref(), &serde_json::to_string_pretty(&out).unwrap())
}

fn run_density(a: DensityArgs) -> CliResult {
    let params = ObmParams::new(a.sigma_low, a.sigma_high, a.c)?;
    if a.points < 2 {
        return Err(CliError::Input("need at least 2 points".into()));
    }
    let y_min = a.y_min.unwrap_or(params.c.min(0.0) - 6.0 * params.sigma_high);
    let y_max = a.y_max.unwrap_or(params.c.max(0.0) + 6.0 * params.sigma_high);
    if !(y_max > y_min) {
        return Err(CliError::Input(format!(
            "need y_max > y_min, got {y_min}..{y_max}"
        )));
    }
    let mut csv = String::from("y,q\n");
    let step = (y_max - y_min) / (a.points - 1) as f64;
    for i in 0..a.points {
        let y = y_min + i as f64 * step;
        csv.push_str(&format!("{y},{}\n", obm::time1_pdf(&params, y)));
    }
    write_output(a.output.as_deref(), &csv)
}

fn run_obm_sample(a: ObmSampleArgs) -> CliResult {
    let params = ObmParams::new(a.sigma_low, a.sigma_high, a.c)?;
    let seed = seed_override(a.seed)?;
    let path = obm::sample_path(&params, a.start, a.t_end, a.steps, seed)?;
    let mut csv = String::from("t,w\n");
    for (t, w) in path.times.iter().zip(&path.values) {
        csv.push_str(&format!("{t},{w}\n"));
    }
    write_output(a.output.as_deref(), &csv)
}

fn run_dp(a: DpArgs) -> CliResult {
    let env = read_env(&a.env)?;
    let opts = DpOptions {
        keep_table: a.dump_table.is_some(),
        layer_cap: a.cap,
    };
    let started = Instant::now();
    let run = match a.indicator_c {
        Some(c) => {
            if a.strategy.is_some() {
                return Err(CliError::Input(
                    "--indicator-c computes the optimal upper probability; drop --strategy".into(),
                ));
            }
            dp::upper_indicator_prob_n(&env, c, a.n, &opts)?
        }
        None => {
            let upath = a.utility.as_deref().ok_or_else(|| {
                CliError::Input("--utility is required unless --indicator-c is given".into())
            })?;
            let u = read_utility(upath)?;
            // the horizon rule switches at the utility's reference point
            match a.strategy.as_deref() {
                Some(sel) => {
                    let s = parse_strategy(sel, a.n, u.c())?;
                    dp::strategy_value_n(&env, &s, &u, a.n, &opts)?
                }
                None => dp::value_n(&env, &u, a.n, &opts)?,
            }
        }
    };
    let runtime_ms = started.elapsed().as_millis() as u64;
    if let Some(path) = &a.dump_table {
        let table = run.table.as_ref().expect("table kept when dumping");
        let mut csv = String::from("stage,sum,d1,d2,value,argmax\n");
        for row in table.rows() {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.stage,
                row.sum,
                row.d1.map_or(String::new(), |v| v.to_string()),
                row.d2.map_or(String::new(), |v| v.to_string()),
                row.value,
                row.argmax.unwrap_or_default()
            ));
        }
        fs::write(path, csv)?;
    }
    let out = json!({
        "n": a.n,
        "value": run.value,
        "atoms_at_boundary": run.boundary_atoms,
        "max_layer_states": run.max_layer_states,
        "runtime_ms": runtime_ms,
    });
    write_output(a.output.as_deref(), &serde_json::to_string_pretty(&out).unwrap())
}

fn default_utility(env: &Environment) -> Result<UtilityIndex, CliError> {
    Ok(UtilityIndex::exponential(
        0.0,
        env.sigma_low() / env.sigma_high(),
    )?)
}

fn run_simulate(a: SimulateArgs) -> CliResult {
    let env = read_env(&a.env)?;
    let u = match &a.utility {
        Some(p) => read_utility(p)?,
        None => default_utility(&env)?,
    };
    let strategy = parse_strategy(&a.strategy, a.n, u.c())?;
    let opts = SimOptions {
        reps: a.reps,
        seed: seed_override(a.seed)?,
        scaling: match a.scaling {
            ScalingArg::Sqrt => Scaling::Sqrt,
            ScalingArg::Linear => Scaling::Linear,
        },
        persistence_start: a.persistence_n,
    };
    let (report, values) = mc::simulate_paths_with_values(&env, &strategy, &u, a.n, &opts)?;
    if let Some(path) = &a.per_rep {
        let mut csv = String::from("rep,value\n");
        for (i, v) in values.iter().enumerate() {
            csv.push_str(&format!("{i},{v}\n"));
        }
        fs::write(path, csv)?;
    }
    write_output(
        a.output.as_deref(),
        &serde_json::to_string_pretty(&report).unwrap(),
    )
}

fn run_posterior(a: PosteriorArgs) -> CliResult {
    let env = match read_env(&a.env)? {
        Environment::TwoArmed(e) => e,
        Environment::NoLearning(_) => {
            return Err(CliError::Input(
                "posterior analysis needs a two_armed environment".into(),
            ))
        }
    };
    let strategy = parse_strategy(&a.strategy, a.n, 0.0)?;
    let truth = match a.truth {
        TruthArg::Low => TruthAssignment::ALow,
        TruthArg::High => TruthAssignment::AHigh,
    };
    let report = mc::posterior_consistency(
        &env,
        truth,
        &strategy,
        a.n,
        a.reps,
        seed_override(a.seed)?,
    )?;
    write_output(
        a.output.as_deref(),
        &serde_json::to_string_pretty(&report).unwrap(),
    )
}

fn parse_grid(spec: &str) -> Result<Vec<u64>, CliError> {
    let (lo, hi) = spec
        .split_once("..")
        .ok_or_else(|| CliError::Input(format!("n-grid must look like 16..16384, got '{spec}'")))?;
    let lo: u64 = lo
        .parse()
        .map_err(|_| CliError::Input(format!("bad grid start '{lo}'")))?;
    let hi: u64 = hi
        .parse()
        .map_err(|_| CliError::Input(format!("bad grid end '{hi}'")))?;
    if lo < 1 || hi < lo {
        return Err(CliError::Input(format!("need 1 <= lo <= hi, got {lo}..{hi}")));
    }
    let mut grid = Vec::new();
    let mut n = lo;
    loop {
        grid.push(n);
        match n.checked_mul(2) {
            Some(next) if next <= hi => n = next,
            _ => break,
        }
    }
    Ok(grid)
}

fn run_converge(a: ConvergeArgs) -> CliResult {
    let env = read_env(&a.env)?;
    let u = read_utility(&a.utility)?;
    let params = ObmParams::new(env.sigma_low(), env.sigma_high(), u.c())?;
    let v_limit = value::value_by_quadrature(&u, &params)?.v;
    let grid = parse_grid(&a.n_grid)?;
    let opts = DpOptions::default();
    let mut rows = Vec::with_capacity(grid.len());
    for &n in &grid {
        let run = dp::value_n(&env, &u, n, &opts)?;
        rows.push((n, run.value, run.value - v_limit));
    }
    // least-squares slope of log|gap| against log n, skipping zero gaps
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, _, gap)| gap.abs() > 0.0)
        .map(|(n, _, gap)| ((*n as f64).ln(), gap.abs().ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some(num / den)
    } else {
        None
    };
    if let Some(path) = &a.rows_csv {
        let mut csv = String::from("n,v_n,gap,v\n");
        for (n, v, gap) in &rows {
            csv.push_str(&format!("{n},{v},{gap},{v_limit}\n"));
        }
        fs::write(path, csv)?;
    }
    let out = json!({
        "v": v_limit,
        "slope": slope,
        "rows": rows
            .iter()
            .map(|(n, v, gap)| json!({"n": n, "v_n": v, "gap": gap}))
            .collect::<Vec<_>>(),
    });
    write_output(a.output.as_deref(), &serde_json::to_string_pretty(&out).unwrap())
}
