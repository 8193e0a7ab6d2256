use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trsqp_cli::check::{run_check, CheckConfig};
use trsqp_cli::output::{summarize, write_results};
use trsqp_cli::plan::{Beta, ExperimentPlan, NoiseSpec, SolverSpec};
use trsqp_cli::report::write_report;
use trsqp_cli::{run_plan, CliError, Result};
use trsqp_core::{BetaSchedule, HessianKind};

#[derive(Parser)]
#[command(name = "trsqp", version, about = "Stochastic trust-region SQP experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one problem with one configuration.
    Solve(SolveArgs),
    /// Run the cartesian product of problems, solvers, noise levels and schedules.
    Sweep(SweepArgs),
    /// Build the case-proportion table and boxplot data of a sweep directory.
    Report {
        /// Sweep output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suite on the built-in problems.
    Check {
        #[arg(long, default_value_t = 2000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// List the built-in problems.
    Problems,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverFlag {
    Tr,
    L1,
}

#[derive(Args)]
struct GridArgs {
    /// Built-in problem name, `all`, or libsvm:<path>; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    problem: Vec<String>,
    #[arg(long, value_enum, value_delimiter = ',')]
    solver: Vec<SolverFlag>,
    /// id, sr1, esth or aveh (trust-region solver only).
    #[arg(long, value_delimiter = ',')]
    hessian: Vec<HessianKind>,
    /// σ², `none` or `subsample`.
    #[arg(long, value_delimiter = ',')]
    noise: Vec<NoiseSpec>,
    /// const:<β> or pow:<s>.
    #[arg(long, value_delimiter = ',')]
    beta: Vec<BetaSchedule>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    kkt_tol: Option<f64>,
    /// Iteration budget in passes over the data for LIBSVM problems.
    #[arg(long)]
    epochs: Option<usize>,
    /// Include per-iteration wall time in traces.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the trace and summary here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// JSON plan; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn solvers(flags: &[SolverFlag], kinds: &[HessianKind]) -> Vec<SolverSpec> {
    let kinds = if kinds.is_empty() { vec![HessianKind::Id] } else { kinds.to_vec() };
    let mut out = Vec::new();
    for f in flags {
        match f {
            SolverFlag::Tr => out.extend(kinds.iter().map(|&k| SolverSpec::Tr(k))),
            SolverFlag::L1 => out.push(SolverSpec::L1),
        }
    }
    out
}

fn apply_grid(plan: &mut ExperimentPlan, g: &GridArgs) {
    if !g.problem.is_empty() {
        plan.problems = g.problem.clone();
    }
    if !g.solver.is_empty() {
        plan.solvers = solvers(&g.solver, &g.hessian);
    } else if !g.hessian.is_empty() {
        plan.solvers = g.hessian.iter().map(|&k| SolverSpec::Tr(k)).collect();
    }
    if !g.noise.is_empty() {
        plan.noise = g.noise.clone();
    }
    if !g.beta.is_empty() {
        plan.betas = g.beta.iter().map(|&b| Beta(b)).collect();
    }
    if let Some(v) = g.max_iter {
        plan.max_iter = v;
    }
    if let Some(v) = g.kkt_tol {
        plan.kkt_tol = v;
    }
    if g.epochs.is_some() {
        plan.epochs = g.epochs;
    }
    plan.timing |= g.timing;
}

fn solve(args: SolveArgs) -> Result<ExitCode> {
    let mut plan = ExperimentPlan {
        seeds: 1,
        base_seed: args.seed,
        ..Default::default()
    };
    apply_grid(&mut plan, &args.grid);
    if plan.cells().len() != 1 {
        return Err(CliError::Config("solve takes exactly one problem, solver, noise level and schedule".into()));
    }
    let results = trsqp_cli::execute(&plan)?;
    let s = summarize(&results[0]);
    if let Some(dir) = &args.out {
        write_results(dir, &plan, &results)?;
    }
    let r = &s.runs[0];
    println!(
        "{} seed={} status={} iterations={} final_kkt={:e} feas={:e} objective={} merit_increases={}",
        s.key, r.seed, r.status, r.iterations, r.final_kkt, r.final_feasibility, r.final_objective, r.merit_increases
    );
    if let Some(d) = &r.detail {
        eprintln!("{d}");
    }
    Ok(if r.status == "failed" { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let mut plan = match &args.config {
        Some(path) => ExperimentPlan::from_json(&std::fs::read_to_string(path)?)?,
        None => ExperimentPlan::default(),
    };
    apply_grid(&mut plan, &args.grid);
    if let Some(v) = args.seeds {
        plan.seeds = v;
    }
    if let Some(v) = args.base_seed {
        plan.base_seed = v;
    }
    if args.out.is_some() {
        plan.out = args.out.clone();
    }
    let dir = plan
        .out
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs --out or an `out` field in the config".into()))?;
    let (results, any_full_failure) = run_plan(&plan, &dir)?;
    let runs: usize = results.iter().map(|r| r.outcomes.len()).sum();
    let failed: usize = results.iter().flat_map(|r| &r.outcomes).filter(|o| o.failed()).count();
    println!("{} cells, {runs} runs, {failed} failed; results in {}", results.len(), dir.display());
    for r in results.iter().filter(|r| r.fully_failed()) {
        eprintln!("cell {} failed on every seed", r.cell.key());
    }
    Ok(if any_full_failure { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn check(max_iter: usize, seeds: u64) -> Result<ExitCode> {
    let started = std::time::Instant::now();
    let rep = run_check(&CheckConfig {
        max_iter,
        seeds,
        ..Default::default()
    })?;
    println!(
        "{} runs, {} iterations, {} invariant violations ({:.1} s)",
        rep.runs.len(),
        rep.iterations(),
        rep.violations(),
        started.elapsed().as_secs_f64()
    );
    for (name, n) in rep.violations_by_name() {
        println!("  {name}: {n}");
    }
    for r in rep.runs.iter().filter(|r| !r.bounds_hold) {
        println!("  control-parameter bounds violated: {}", r.label);
    }
    let failed: Vec<_> = rep.failed_runs().collect();
    if !failed.is_empty() {
        println!("{} runs stopped with a failure status:", failed.len());
        for r in failed {
            println!("  {}: {}", r.label, r.detail.as_deref().unwrap_or(""));
        }
    }
    println!("{}", if rep.passed() { "PASS" } else { "FAIL" });
    Ok(if rep.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Report { out } => write_report(&out).map(|t| {
            print!("{t}");
            ExitCode::SUCCESS
        }),
        Command::Check { max_iter, seeds } => check(max_iter, seeds),
        Command::Problems => {
            for n in trsqp_core::builtin_names() {
                println!("{n}");
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    res.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
