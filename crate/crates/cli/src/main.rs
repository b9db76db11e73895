//! `cpx`: run, sweep and verify consensus-optimisation experiments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cpx_core::algorithms::{AlgoConfig, InexactInit, LambdaUpdate, Method};
use cpx_core::checks;
use cpx_core::runtime::{
    run_experiment, write_summary_json, write_trace_csv, DatasetName, ProblemSpec, RoundTrace,
    RunConfig,
};

#[derive(Parser)]
#[command(name = "cpx", version, about = "Deterministic simulator for consensus optimisation over a server-client network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configured run and write trace.csv + summary.json.
    Run(RunArgs),
    /// Cross-product over --method and --K lists; one trace per cell plus a
    /// merged comparison CSV.
    Sweep(RunArgs),
    /// Run the hermetic verification suite (no dataset files needed).
    Verify,
}

#[derive(Args, Debug, Default, Clone)]
struct RunArgs {
    /// Optional config file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// fedave | pdmm_exact | fedsplit | fedsplit_inexact | gpdmm | agpdmm |
    /// agpdmm_variant | scaffold (comma list for sweep)
    #[arg(long)]
    method: Option<String>,

    /// synth-ls | mnist | fashion-mnist
    #[arg(long)]
    problem: Option<String>,

    #[arg(long)]
    clients: Option<usize>,

    /// Rows per client for synth-ls.
    #[arg(long)]
    rows: Option<usize>,

    /// Columns (parameter dimension) for synth-ls.
    #[arg(long)]
    dim: Option<usize>,

    /// Inner gradient steps per round (comma list for sweep).
    #[arg(long = "K")]
    k: Option<String>,

    #[arg(long)]
    eta: Option<f64>,

    #[arg(long = "eta-g")]
    eta_g: Option<f64>,

    #[arg(long)]
    rho: Option<f64>,

    #[arg(long)]
    gamma: Option<f64>,

    #[arg(long)]
    rounds: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    /// Inner-loop start for fedsplit_inexact: z | xs
    #[arg(long)]
    init: Option<String>,

    /// Dual update aggregate for gpdmm: average | recent
    #[arg(long = "lambda-update")]
    lambda_update: Option<String>,

    /// Mini-batch size for dataset problems.
    #[arg(long)]
    batch: Option<usize>,

    /// Dataset directory (falls back to $CPX_DATA_DIR).
    #[arg(long = "data-dir")]
    data_dir: Option<PathBuf>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Record metrics every this many rounds.
    #[arg(long = "metrics-every")]
    metrics_every: Option<usize>,

    /// Attach Lyapunov values and assert the contraction online.
    #[arg(long = "theory-checks")]
    theory_checks: bool,

    #[arg(long)]
    theta: Option<f64>,

    #[arg(long)]
    phi: Option<f64>,

    /// Gradient-descent budget for the dataset optimum oracle.
    #[arg(long = "oracle-steps")]
    oracle_steps: Option<usize>,

    /// Noise standard deviation for synth-ls generation.
    #[arg(long = "noise-std")]
    noise_std: Option<f64>,
}

/// A usage problem: reported on one line, exit status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

const FILE_KEYS: &[&str] = &[
    "method",
    "problem",
    "clients",
    "rows",
    "dim",
    "K",
    "eta",
    "eta-g",
    "rho",
    "gamma",
    "rounds",
    "seed",
    "init",
    "lambda-update",
    "batch",
    "data-dir",
    "out",
    "metrics-every",
    "theory-checks",
    "theta",
    "phi",
    "oracle-steps",
    "noise-std",
];

/// Parses a `key = value` config file; blank lines and `#` comments are
/// skipped. Unknown keys are rejected before any computation.
fn parse_config_file(path: &Path) -> anyhow::Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(usage(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                path.display(),
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        if !FILE_KEYS.contains(&key.as_str()) {
            return Err(usage(format!(
                "{}:{}: unknown config key `{key}`",
                path.display(),
                lineno + 1
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn parse_from_map<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
) -> anyhow::Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|e| usage(format!("config key `{key}`: {e}"))),
    }
}

/// RunArgs after merging the config file underneath the flags.
fn merged_args(mut args: RunArgs) -> anyhow::Result<RunArgs> {
    let Some(path) = args.config.clone() else {
        return Ok(args);
    };
    let map = parse_config_file(&path)?;
    macro_rules! fill {
        ($field:ident, $key:expr) => {
            if args.$field.is_none() {
                args.$field = parse_from_map(&map, $key)?;
            }
        };
    }
    fill!(method, "method");
    fill!(problem, "problem");
    fill!(clients, "clients");
    fill!(rows, "rows");
    fill!(dim, "dim");
    fill!(k, "K");
    fill!(eta, "eta");
    fill!(eta_g, "eta-g");
    fill!(rho, "rho");
    fill!(gamma, "gamma");
    fill!(rounds, "rounds");
    fill!(seed, "seed");
    fill!(init, "init");
    fill!(lambda_update, "lambda-update");
    fill!(batch, "batch");
    fill!(metrics_every, "metrics-every");
    fill!(theta, "theta");
    fill!(phi, "phi");
    fill!(oracle_steps, "oracle-steps");
    fill!(noise_std, "noise-std");
    if args.data_dir.is_none() {
        args.data_dir = map.get("data-dir").map(PathBuf::from);
    }
    if args.out.is_none() {
        args.out = map.get("out").map(PathBuf::from);
    }
    if !args.theory_checks {
        if let Some(v) = parse_from_map::<bool>(&map, "theory-checks")? {
            args.theory_checks = v;
        }
    }
    Ok(args)
}

fn parse_method(raw: &str) -> anyhow::Result<Method> {
    raw.parse::<Method>()
        .map_err(|_| usage(format!("unknown method '{raw}'")))
}

fn parse_problem(args: &RunArgs) -> anyhow::Result<ProblemSpec> {
    let name = args.problem.as_deref().unwrap_or("synth-ls");
    match name {
        "synth-ls" => Ok(ProblemSpec::SynthLs {
            clients: args.clients.unwrap_or(25),
            rows: args.rows.unwrap_or(200),
            dim: args.dim.unwrap_or(20),
            noise_std: args.noise_std.unwrap_or(0.5),
        }),
        "mnist" | "fashion-mnist" => {
            let dataset = if name == "mnist" {
                DatasetName::Mnist
            } else {
                DatasetName::FashionMnist
            };
            Ok(ProblemSpec::Dataset {
                name: dataset,
                data_dir: args.data_dir.clone(),
                batch: args.batch.unwrap_or(300),
            })
        }
        other => Err(usage(format!("unknown problem '{other}'"))),
    }
}

fn build_algo(args: &RunArgs, method: Method, k: usize) -> anyhow::Result<AlgoConfig> {
    let mut algo = AlgoConfig::new(method, args.eta.unwrap_or(0.05)).with_k(k);
    if let Some(rho) = args.rho {
        algo = algo.with_rho(rho);
    }
    if let Some(gamma) = args.gamma {
        algo = algo.with_gamma(gamma);
    }
    algo = algo.with_eta_g(args.eta_g.unwrap_or(1.0));
    if let Some(init) = &args.init {
        algo = algo.with_inexact_init(match init.as_str() {
            "z" => InexactInit::Z,
            "xs" => InexactInit::Xs,
            other => return Err(usage(format!("unknown init '{other}' (expected z or xs)"))),
        });
    }
    if let Some(update) = &args.lambda_update {
        algo = algo.with_lambda_update(match update.as_str() {
            "average" => LambdaUpdate::Average,
            "recent" => LambdaUpdate::Recent,
            other => {
                return Err(usage(format!(
                    "unknown lambda-update '{other}' (expected average or recent)"
                )))
            }
        });
    }
    Ok(algo)
}

fn build_run_config(args: &RunArgs, method: Method, k: usize) -> anyhow::Result<RunConfig> {
    let algo = build_algo(args, method, k)?;
    let mut config = RunConfig::new(
        algo,
        parse_problem(args)?,
        args.rounds.unwrap_or(500),
        args.seed.unwrap_or(0),
    );
    config.metrics_every = args.metrics_every.unwrap_or(1);
    config.theory_checks = args.theory_checks;
    config.theta = args.theta;
    config.phi = args.phi;
    config.oracle_steps = args.oracle_steps;
    Ok(config)
}

fn parse_k_list(args: &RunArgs) -> anyhow::Result<Vec<usize>> {
    let raw = args.k.as_deref().unwrap_or("1");
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("invalid K value '{s}'")))
        })
        .collect()
}

fn parse_method_list(args: &RunArgs) -> anyhow::Result<Vec<Method>> {
    let raw = args
        .method
        .as_deref()
        .ok_or_else(|| usage("--method is required"))?;
    raw.split(',').map(|s| parse_method(s.trim())).collect()
}

fn out_dir(args: &RunArgs) -> anyhow::Result<PathBuf> {
    args.out.clone().ok_or_else(|| usage("--out is required"))
}

fn execute_cell(config: &RunConfig, dir: &Path) -> anyhow::Result<Vec<RoundTrace>> {
    std::fs::create_dir_all(dir)?;
    let output = run_experiment(config)?;
    for w in &output.summary.warnings {
        eprintln!("warning: {w}");
    }
    write_trace_csv(&dir.join("trace.csv"), &output.traces)?;
    write_summary_json(&dir.join("summary.json"), &output.summary)?;
    println!(
        "{} K={} rounds={}: final gap {:.6e}{} -> {}",
        config.algo.method,
        config.algo.k,
        config.rounds,
        output.summary.final_gap,
        output
            .summary
            .final_accuracy
            .map(|a| format!(", accuracy {:.2}%", 100.0 * a))
            .unwrap_or_default(),
        dir.display()
    );
    Ok(output.traces)
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let args = merged_args(args)?;
    let methods = parse_method_list(&args)?;
    let ks = parse_k_list(&args)?;
    if methods.len() != 1 || ks.len() != 1 {
        return Err(usage(
            "run takes exactly one --method and one --K; use sweep for lists",
        ));
    }
    let config = build_run_config(&args, methods[0], ks[0])?;
    execute_cell(&config, &out_dir(&args)?)?;
    Ok(())
}

fn cmd_sweep(args: RunArgs) -> anyhow::Result<()> {
    let args = merged_args(args)?;
    let methods = parse_method_list(&args)?;
    let ks = parse_k_list(&args)?;
    let root = out_dir(&args)?;
    std::fs::create_dir_all(&root)?;

    let mut columns: Vec<(String, Vec<RoundTrace>)> = Vec::new();
    for &method in &methods {
        for &k in &ks {
            let label = format!("{}_K{}", method, k);
            let config = build_run_config(&args, method, k)?;
            let traces = execute_cell(&config, &root.join(&label))?;
            columns.push((label, traces));
        }
    }

    // Merged comparison: gap per recorded round per cell. All cells share the
    // same metrics stride, so the row sets line up.
    let mut out = String::from("round");
    for (label, _) in &columns {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    let rows = columns[0].1.len();
    for r in 0..rows {
        out.push_str(&columns[0].1[r].round.to_string());
        for (_, traces) in &columns {
            out.push(',');
            if let Some(t) = traces.get(r) {
                out.push_str(&t.gap.to_string());
            }
        }
        out.push('\n');
    }
    let path = root.join("comparison.csv");
    std::fs::write(&path, out)?;
    println!("comparison -> {}", path.display());
    Ok(())
}

fn cmd_verify() -> anyhow::Result<ExitCode> {
    let reports = checks::run_all()?;
    let mut failed = Vec::new();
    for r in &reports {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status} {} — {}", r.name, r.detail);
        if !r.passed {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        println!("all {} checks passed", reports.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!(
            "{} of {} checks failed: {}",
            failed.len(),
            reports.len(),
            failed.join(", ")
        );
        Ok(ExitCode::FAILURE)
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => cmd_run(args).map(|_| ExitCode::SUCCESS),
        Command::Sweep(args) => cmd_sweep(args).map(|_| ExitCode::SUCCESS),
        Command::Verify => cmd_verify(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            if err.is::<UsageError>() {
                eprintln!("error: {err}");
                ExitCode::from(2)
            } else if let Some(cpx_core::Error::Config(msg)) = err.downcast_ref::<cpx_core::Error>()
            {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {err}");
                ExitCode::FAILURE
            }
        }
    }
}
