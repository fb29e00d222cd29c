//! `entfix` command-line driver: generate weekly LAP instances, train the
//! stability forest, solve one instance under a policy, run the benchmark
//! and rebuild its report.
//!
//! Exit codes: 0 when the run ends with a feasible outcome, 1 on runtime
//! errors, 2 when no solution was found, 3 when the fixes made the restricted
//! problem infeasible, 64 on usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use entfix::bnb::{Clock, RunStatus, SolverConfig};
use entfix::forest::OnlineForest;
use entfix::harness::{benchmark_lap_params, log_path, report_from_dir, run_bench, run_policy, train, BenchConfig};
use entfix::lapgen::generate_weekly_series;
use entfix::mps::{load_instance, write_run_log};
use entfix::policy::{PolicyConfig, PolicyKind};

const EXIT_NO_SOLUTION: u8 = 2;
const EXIT_RESTRICTED_INFEASIBLE: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "entfix", version, about = "Entropy-guided variable fixing for recurrent MIPs")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "ENTFIX_OUT", default_value = "out")]
    out: PathBuf,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a series of weekly LAP instances.
    Gen(GenArgs),
    /// Solve an instance with the baseline and fit the forest on its solutions.
    Train(TrainArgs),
    /// Solve one instance under a policy and write its run log.
    Solve(SolveArgs),
    /// Generate, train, run every policy on every week and report.
    Bench(BenchArgs),
    /// Recompute report.csv, quartiles.csv and plots from a benchmark directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    trains: Option<usize>,
    #[arg(long, default_value_t = 10)]
    weeks: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stations: Option<usize>,
    #[arg(long)]
    periods: Option<usize>,
    /// Fraction of trains perturbed from one week to the next.
    #[arg(long)]
    perturbation: Option<f64>,
    /// Leave deadheading variables out of the model.
    #[arg(long)]
    no_deadhead: bool,
}

#[derive(Args)]
struct SolverArgs {
    /// Node budget.
    #[arg(long)]
    nodes: Option<u64>,
    /// Solver seed recorded in the logs.
    #[arg(long)]
    solver_seed: Option<u64>,
    /// Measure time in seconds instead of nodes.
    #[arg(long)]
    wall_clock: bool,
}

impl SolverArgs {
    fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(n) = self.nodes {
            cfg.node_limit = n;
        }
        if let Some(s) = self.solver_seed {
            cfg.seed = s;
        }
        if self.wall_clock {
            cfg.clock = Clock::Wall;
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Instance path (`.mps` file, or the stem shared with its sidecars).
    instance: PathBuf,
    /// Where to save the forest; defaults to `<out>/forest.json`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// `baseline`, `sp:n=<n>` or `tp:tau=<tau>`.
    #[arg(long, default_value = "baseline")]
    policy: PolicyKind,
    /// Trained forest; required by the threshold policy.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Run-log path; defaults to `<out>/<instance>.<policy>.jsonl`.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Disable online forest updates during the run.
    #[arg(long)]
    frozen: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    weeks: Option<usize>,
    #[arg(long)]
    trains: Option<usize>,
    /// Generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated policies; the baseline is always run.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<PolicyKind>>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Benchmark directory; defaults to the output directory.
    dir: Option<PathBuf>,
}

/// An error caused by the invocation rather than the run.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn cmd_gen(args: &GenArgs, out: &Path) -> Result<u8> {
    if args.weeks == 0 {
        return Err(usage("--weeks must be at least 1"));
    }
    let mut p = benchmark_lap_params();
    if let Some(t) = args.trains {
        p.trains = t;
    }
    if let Some(s) = args.seed {
        p.seed = s;
    }
    if let Some(s) = args.stations {
        p.stations = s;
    }
    if let Some(n) = args.periods {
        p.periods = n;
    }
    if let Some(r) = args.perturbation {
        p.perturbation_rate = r;
    }
    if args.no_deadhead {
        p.deadhead_cost = None;
    }
    p.check().map_err(|e| usage(e.to_string()))?;
    std::fs::create_dir_all(out)?;
    for inst in generate_weekly_series(&p, args.weeks)? {
        let [mps, ..] = inst.write_files(out)?;
        println!(
            "{}  {} trains, {} variables, witness cost {:.2}",
            mps.display(),
            inst.meta.arcs.len(),
            inst.model.num_vars(),
            inst.meta.witness_objective
        );
    }
    Ok(0)
}

fn cmd_train(args: &TrainArgs, out: &Path) -> Result<u8> {
    let model = load_instance(&args.instance)?;
    let mut solver = SolverConfig::default();
    args.solver.apply(&mut solver);
    let training = train(&model, &solver, &Default::default())?;
    std::fs::create_dir_all(out)?;
    let [forest, dataset, _] = training.write(out)?;
    if let Some(path) = &args.model {
        training.forest.save(path)?;
    }
    let s = training.summary();
    println!("trained on {}: {} solutions, {} samples", s.instance, s.solutions, s.samples);
    println!("training accuracy {:.3}", s.training_accuracy);
    println!("training time {:.3} s", s.wall_s);
    println!("forest {}", args.model.as_deref().unwrap_or(&forest).display());
    println!("dataset {}", dataset.display());
    Ok(0)
}

fn cmd_solve(args: &SolveArgs, out: &Path) -> Result<u8> {
    if args.policy.needs_forest() && args.model.is_none() {
        return Err(usage(format!("policy {} requires --model", args.policy)));
    }
    let model = load_instance(&args.instance)?;
    let forest = match &args.model {
        Some(p) => Some(OnlineForest::load(p).with_context(|| format!("loading {}", p.display()))?),
        None => None,
    };
    let mut solver = SolverConfig::default();
    args.solver.apply(&mut solver);
    let policy = PolicyConfig {
        online_update: !args.frozen,
        ..PolicyConfig::default()
    };
    let (record, _) = run_policy(&model, args.policy, forest, &policy, &solver)?;
    let log = match &args.log {
        Some(p) => p.clone(),
        None => {
            std::fs::create_dir_all(out)?;
            log_path(out, &model.name, args.policy)
        }
    };
    let file = std::fs::File::create(&log).with_context(|| format!("creating {}", log.display()))?;
    write_run_log(&record, solver.clock, std::io::BufWriter::new(file))?;
    println!(
        "{} {}: {} after {} nodes, {} incumbents, {} fixes, best {}",
        model.name,
        args.policy,
        record.status.as_str(),
        record.nodes,
        record.incumbents.len(),
        record.fixes.len(),
        record.best_objective.map_or("none".into(), |c| format!("{c:.4}"))
    );
    println!("log {}", log.display());
    Ok(match record.status {
        RunStatus::NoSolution => EXIT_NO_SOLUTION,
        RunStatus::RestrictedInfeasible => EXIT_RESTRICTED_INFEASIBLE,
        RunStatus::Optimal | RunStatus::BudgetExhausted => 0,
    })
}

fn bench_config(args: &BenchArgs) -> Result<BenchConfig> {
    let mut cfg: BenchConfig = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => BenchConfig::default(),
    };
    if let Some(w) = args.weeks {
        cfg.weeks = w;
    }
    if let Some(t) = args.trains {
        cfg.lap.trains = t;
    }
    if let Some(s) = args.seed {
        cfg.lap.seed = s;
    }
    if let Some(p) = &args.policies {
        cfg.policies = p.clone();
    }
    args.solver.apply(&mut cfg.solver);
    cfg.check().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn print_quartiles(report: &entfix::harness::Report) {
    println!("{:<12} {:<16} {:>5} {:>10} {:>10} {:>10}", "policy", "metric", "n", "q1", "median", "q3");
    for q in &report.quartiles {
        println!(
            "{:<12} {:<16} {:>5} {:>10.4} {:>10.4} {:>10.4}",
            q.policy, q.metric, q.count, q.q1, q.median, q.q3
        );
    }
}

fn cmd_bench(args: &BenchArgs, out: &Path) -> Result<u8> {
    let cfg = bench_config(args)?;
    let bench = run_bench(&cfg, out)?;
    let s = bench.training.summary();
    println!(
        "trained on {} in {:.3} s ({} samples, accuracy {:.3})",
        s.instance, s.wall_s, s.samples, s.training_accuracy
    );
    println!("{} runs written to {}", bench.records.iter().map(Vec::len).sum::<usize>(), out.join("logs").display());
    print_quartiles(&bench.report);
    println!("report {}", out.join("report.csv").display());
    Ok(0)
}

fn cmd_report(args: &ReportArgs, out: &Path) -> Result<u8> {
    let dir = args.dir.as_deref().unwrap_or(out);
    let report = report_from_dir(dir).with_context(|| format!("reading benchmark in {}", dir.display()))?;
    print_quartiles(&report);
    println!("report {}", dir.join("report.csv").display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a, &cli.out),
        Command::Train(a) => cmd_train(a, &cli.out),
        Command::Solve(a) => cmd_solve(a, &cli.out),
        Command::Bench(a) => cmd_bench(a, &cli.out),
        Command::Report(a) => cmd_report(a, &cli.out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<UsageError>() { EXIT_USAGE } else { 1 })
        }
    }
}
