//! `gaugeopt`: run the feasibility and trust-region experiments, certify the
//! structure constants of a set, and run the oracle suites.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use gaugeopt::experiment::{
    generate_feasibility, generate_trust_region, rng, run_experiment, ExperimentConfig, MethodConfig, ProblemSpec, Summary,
};
use gaugeopt::gauge::{certified_structure, estimate_constants_by_sampling, global_structure, tabulated_structure};
use gaugeopt::solvers::{RunStatus, StepSchedule};
use gaugeopt::verify::run_all_suites;
use gaugeopt::{Oracle, Set};

/// Exit code when the iterates diverge.
const EXIT_DIVERGED: u8 = 2;
/// Exit code when the level target lies below the optimal value.
const EXIT_INFEASIBLE_TARGET: u8 = 3;

#[derive(Parser)]
#[command(name = "gaugeopt", version, about = "Projection-free first-order methods via squared gauges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find a point in the intersection of two p-norm ellipsoids.
    Feasibility(FeasibilityArgs),
    /// Maximize a concave quadratic over a p-norm ellipsoid via its radial dual.
    TrustRegion(TrustRegionArgs),
    /// Report structure constants for a set given as JSON (inline or a file path).
    Certify(CertifyArgs),
    /// Run every oracle-agreement and containment suite.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Subgrad,
    Gengrad,
    Accel,
    Level,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Constant,
    InverseSqrt,
    Inverse,
}

#[derive(Args)]
struct MethodArgs {
    #[arg(long, value_enum, default_value = "accel")]
    method: MethodArg,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Stepsize rule for the subgradient and generalized gradient methods.
    #[arg(long, value_enum, default_value = "constant")]
    schedule: ScheduleArg,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Smoothness used by the accelerated method (defaults to the certified value).
    #[arg(long = "L")]
    l: Option<f64>,
    /// Strong convexity used by the accelerated method (defaults to the certified value).
    #[arg(long)]
    mu: Option<f64>,
    /// Target level for the level method (feasibility default: 1).
    #[arg(long)]
    f_bar: Option<f64>,
    /// Trace CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeasibilityArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    p1: f64,
    #[arg(long, default_value_t = 2.0)]
    p2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the paper's dimension n = 1600.
    #[arg(long)]
    paper_scale: bool,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Args)]
struct TrustRegionArgs {
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 25)]
    m: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the paper's size (n, m) = (1600, 800).
    #[arg(long)]
    paper_scale: bool,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    set: String,
    /// Interior center as a JSON array (defaults to the origin).
    #[arg(long)]
    center: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Cases per suite.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn method_config(args: &MethodArgs, certified: (f64, f64), default_f_bar: Option<f64>) -> Result<MethodConfig> {
    let schedule = match args.schedule {
        ScheduleArg::Constant => StepSchedule::Constant { eta: args.eta },
        ScheduleArg::InverseSqrt => StepSchedule::InverseSqrt { eta: args.eta },
        ScheduleArg::Inverse => StepSchedule::Inverse { eta: args.eta },
    };
    Ok(match args.method {
        MethodArg::Subgrad => MethodConfig::Subgrad { schedule },
        MethodArg::Gengrad => MethodConfig::Gengrad { schedule },
        MethodArg::Accel => {
            let l = args.l.unwrap_or(certified.1);
            if !l.is_finite() {
                bail!("the certified smoothness is infinite for this instance; pass --L");
            }
            MethodConfig::Accel { l, mu: args.mu.unwrap_or(certified.0).min(l) }
        }
        MethodArg::Level => MethodConfig::Level {
            f_bar: args.f_bar.or(default_f_bar).context("the level method needs --f-bar")?,
        },
    })
}

fn run(config: ExperimentConfig) -> Result<ExitCode> {
    let (summary, _) = run_experiment(&config)?;
    println!("{}", serde_json::to_string_pretty(&summary_json(&config, &summary))?);
    Ok(match summary.status {
        RunStatus::Completed => ExitCode::SUCCESS,
        RunStatus::Diverged | RunStatus::Stalled => ExitCode::from(EXIT_DIVERGED),
        RunStatus::InfeasibleTarget => ExitCode::from(EXIT_INFEASIBLE_TARGET),
    })
}

fn summary_json(config: &ExperimentConfig, summary: &Summary) -> serde_json::Value {
    json!({ "config": config, "summary": summary })
}

fn feasibility(args: FeasibilityArgs) -> Result<ExitCode> {
    let n = if args.paper_scale { 1600 } else { args.n };
    let inst = generate_feasibility(n, args.p1, args.p2, args.seed)?;
    let problem = inst.problem()?;
    let method = method_config(&args.method, (problem.mu, problem.l), Some(1.0))?;
    run(ExperimentConfig {
        problem: ProblemSpec::Feasibility { n, p1: args.p1, p2: args.p2, seed: args.seed },
        method,
        iters: args.method.iters,
        out_path: args.method.out.clone(),
    })
}

fn trust_region(args: TrustRegionArgs) -> Result<ExitCode> {
    let (n, m) = if args.paper_scale { (1600, 800) } else { (args.n, args.m) };
    let inst = generate_trust_region(n, m, args.p, args.seed)?;
    let problem = inst.problem()?;
    let method = method_config(&args.method, (problem.mu, problem.l), None)?;
    run(ExperimentConfig {
        problem: ProblemSpec::TrustRegion { n, m, p: args.p, seed: args.seed },
        method,
        iters: args.method.iters,
        out_path: args.method.out.clone(),
    })
}

fn read_json_arg(arg: &str) -> Result<String> {
    if arg.trim_start().starts_with(['{', '[']) {
        Ok(arg.to_string())
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading {arg}"))
    }
}

fn certify(args: CertifyArgs) -> Result<ExitCode> {
    let set: Set = serde_json::from_str(&read_json_arg(&args.set)?).context("parsing the set")?;
    let center: Vec<f64> = match &args.center {
        Some(c) => serde_json::from_str(&read_json_arg(c)?).context("parsing the center")?,
        None => vec![0.0; set.dim()],
    };
    let consts = set.structure_constants();
    let oracle = Oracle::new(set, center)?;
    let (mu_est, l_est) = estimate_constants_by_sampling(&oracle, args.samples, &mut rng(args.seed, 0))?;
    let report = json!({
        "kind": oracle.set().kind(),
        "alpha": finite(consts.alpha),
        "beta": finite(consts.beta),
        "inner_radius": oracle.inner_radius(),
        "outer_radius": finite(oracle.outer_radius()),
        "lipschitz": finite(oracle.lipschitz()),
        "global": structure_json(global_structure(&oracle)),
        "tabulated": tabulated_structure(&oracle).map(structure_json),
        "certified": structure_json(certified_structure(&oracle)),
        "sampled": { "samples": args.samples, "mu_est": mu_est, "L_est": finite(l_est) },
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

/// JSON has no infinity; unbounded constants are reported as null.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn structure_json(g: gaugeopt::gauge::GlobalStructure<f64>) -> serde_json::Value {
    json!({ "mu": g.mu, "L": finite(g.l) })
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let reports = run_all_suites(args.count, args.seed)?;
    let mut ok = true;
    for r in &reports {
        println!("{}", r.to_json());
        ok &= r.passed();
    }
    eprintln!("{} suites, {}", reports.len(), if ok { "all passed" } else { "FAILURES" });
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Feasibility(a) => feasibility(a),
        Command::TrustRegion(a) => trust_region(a),
        Command::Certify(a) => certify(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
