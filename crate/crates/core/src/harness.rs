//! Weekly benchmark: generate a series, train the forest on the first week,
//! run every policy on every week under the same budget, and report.
//!
//! Output layout under the output directory:
//!
//! ```text
//! bench.json                       resolved configuration
//! instances/<name>.{mps,groups.json,meta.json}
//! forest.json, train_dataset.csv, training.json
//! logs/<name>.<policy>.jsonl       one run log per (instance, policy)
//! plots/<name>.<policy>.tsv        (t, gap) step points
//! report.csv, quartiles.csv
//! ```
//!
//! Everything except `training.json` (which records wall-clock time) is a
//! pure function of the configuration when the node clock is used.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnb::{solve, Clock, RunRecord, SolveError, SolverConfig};
use crate::forest::{write_dataset_csv, ForestConfig, ForestError, OnlineForest, Sample};
use crate::lapgen::{generate_weekly_series, LapError, LapInstance, LapParams};
use crate::metrics::{
    action_accuracy, best_speed_up, pir, primal_integral, quartiles, relative_final_gap, Trajectory,
};
use crate::model::{ClassLabel, Model};
use crate::mps::{read_run_log, write_run_log, MpsError, RunLog};
use crate::policy::{PolicyConfig, PolicyError, PolicyKind, PolicyObserver};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Lap(#[from] LapError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Mps(#[from] MpsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub lap: LapParams,
    pub weeks: usize,
    pub policies: Vec<PolicyKind>,
    pub solver: SolverConfig,
    pub forest: ForestConfig,
    pub policy: PolicyConfig,
}

/// Generator parameters of the desk-scale benchmark: the library defaults
/// plus deadheading, which lets rounded configurations be rebalanced.
pub fn benchmark_lap_params() -> LapParams {
    LapParams {
        deadhead_cost: Some(0.5),
        ..LapParams::default()
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            lap: benchmark_lap_params(),
            weeks: 10,
            policies: PolicyKind::benchmark_set(),
            solver: SolverConfig::default(),
            forest: ForestConfig::default(),
            policy: PolicyConfig::default(),
        }
    }
}

impl BenchConfig {
    /// Policies in run order with the baseline first (added if missing).
    pub fn run_policies(&self) -> Vec<PolicyKind> {
        let mut out = vec![PolicyKind::Baseline];
        for &p in &self.policies {
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    pub fn check(&self) -> Result<(), BenchError> {
        if self.weeks == 0 {
            return Err(BenchError::Config("weeks must be at least 1".into()));
        }
        if self.solver.node_limit == 0 {
            return Err(BenchError::Config("node_limit must be at least 1".into()));
        }
        if self.solver.rel_gap_tol < 0.0 {
            return Err(BenchError::Config("rel_gap_tol must be non-negative".into()));
        }
        self.lap.check()?;
        Ok(())
    }

    /// Length of the primal-integral horizon.
    pub fn horizon(&self, logs: &[RunLog]) -> f64 {
        match self.solver.clock {
            Clock::Node => self.solver.node_limit as f64,
            Clock::Wall => self.solver.wall_limit_s.unwrap_or_else(|| {
                logs.iter()
                    .filter_map(|l| l.summary.wall_s)
                    .fold(0.0, f64::max)
            }),
        }
    }
}

/// Runs `kind` on `model` and labels the record with the policy name.
pub fn run_policy(
    model: &Model,
    kind: PolicyKind,
    forest: Option<OnlineForest>,
    policy: &PolicyConfig,
    solver: &SolverConfig,
) -> Result<(RunRecord, PolicyObserver), BenchError> {
    let mut obs = PolicyObserver::new(kind, policy.clone(), model, forest)?;
    let mut record = solve(model, solver, &mut obs)?;
    record.policy = kind.to_string();
    Ok((record, obs))
}

pub struct Training {
    pub forest: OnlineForest,
    pub data: Vec<Sample>,
    pub record: RunRecord,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub instance: String,
    pub solutions: usize,
    pub samples: usize,
    pub training_accuracy: f64,
    pub wall_s: f64,
}

impl Training {
    pub fn summary(&self) -> TrainingSummary {
        TrainingSummary {
            instance: self.record.instance.clone(),
            solutions: self.record.solutions.len(),
            samples: self.data.len(),
            training_accuracy: self.forest.accuracy(&self.data),
            wall_s: self.wall_s,
        }
    }

    /// Writes the forest, the dataset CSV and a timing summary into `dir`.
    pub fn write(&self, dir: &Path) -> Result<[PathBuf; 3], BenchError> {
        let forest = dir.join("forest.json");
        self.forest.save(&forest)?;
        let dataset = dir.join("train_dataset.csv");
        write_dataset_csv(&self.data, std::fs::File::create(&dataset)?)?;
        let summary = dir.join("training.json");
        std::fs::write(&summary, serde_json::to_string_pretty(&self.summary()).expect("serializes") + "\n")?;
        Ok([forest, dataset, summary])
    }
}

/// Baseline solve with recording, then a forest fit on its solution history.
pub fn train(model: &Model, solver: &SolverConfig, forest: &ForestConfig) -> Result<Training, BenchError> {
    let start = Instant::now();
    let record = solve(model, solver, &mut ())?;
    let classes: Vec<Vec<ClassLabel>> = record.solutions.iter().map(|s| s.classes.clone()).collect();
    let mut f = OnlineForest::new(forest.clone())?;
    let data = f.fit_training_run(&classes)?;
    Ok(Training {
        forest: f,
        data,
        record,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

pub fn log_path(dir: &Path, instance: &str, kind: PolicyKind) -> PathBuf {
    dir.join(format!("{instance}.{}.jsonl", kind.slug()))
}

pub struct BenchOutput {
    pub instances: Vec<LapInstance>,
    pub training: Training,
    /// `records[week][policy]` in [`BenchConfig::run_policies`] order.
    pub records: Vec<Vec<RunRecord>>,
    pub report: Report,
}

pub fn run_bench(cfg: &BenchConfig, out: &Path) -> Result<BenchOutput, BenchError> {
    cfg.check()?;
    let inst_dir = out.join("instances");
    let log_dir = out.join("logs");
    std::fs::create_dir_all(&inst_dir)?;
    std::fs::create_dir_all(&log_dir)?;
    std::fs::write(
        out.join("bench.json"),
        serde_json::to_string_pretty(cfg).expect("config serializes") + "\n",
    )?;

    let instances = generate_weekly_series(&cfg.lap, cfg.weeks)?;
    for inst in &instances {
        inst.write_files(&inst_dir)?;
    }

    let training = train(&instances[0].model, &cfg.solver, &cfg.forest)?;
    training.write(out)?;
    info!(
        "trained on {} ({} samples) in {:.2}s",
        training.record.instance,
        training.data.len(),
        training.wall_s
    );

    let mut records = Vec::with_capacity(instances.len());
    for inst in &instances {
        let mut week = Vec::new();
        for kind in cfg.run_policies() {
            let forest = (kind != PolicyKind::Baseline).then(|| training.forest.clone());
            let (record, _) = run_policy(&inst.model, kind, forest, &cfg.policy, &cfg.solver)?;
            info!(
                "{} {}: {} after {} nodes, best {:?}",
                inst.model.name,
                kind,
                record.status.as_str(),
                record.nodes,
                record.best_objective
            );
            let file = std::fs::File::create(log_path(&log_dir, &inst.model.name, kind))?;
            write_run_log(&record, cfg.solver.clock, std::io::BufWriter::new(file))?;
            week.push(record);
        }
        records.push(week);
    }

    let report = report_from_dir(out)?;
    Ok(BenchOutput {
        instances,
        training,
        records,
        report,
    })
}

/// One row of `report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    pub policy: String,
    pub seed: u64,
    pub pi: f64,
    pub pir: Option<f64>,
    pub best_speed_up: Option<f64>,
    pub gap_at_best: Option<f64>,
    pub final_rel_gap: Option<f64>,
    pub action_accuracy: Option<f64>,
    pub nodes: u64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileRow {
    pub size: usize,
    pub policy: String,
    pub metric: String,
    pub count: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub quartiles: Vec<QuartileRow>,
    /// `(instance, policy, [(t, gap)])` step points.
    pub plots: Vec<(String, String, Vec<(f64, f64)>)>,
}

impl Report {
    pub fn rows_for(&self, policy: &str) -> impl Iterator<Item = &ReportRow> {
        let policy = policy.to_string();
        self.rows.iter().filter(move |r| r.policy == policy)
    }
}

fn trajectory(log: &RunLog, clock: Clock, horizon: f64, reference: f64) -> Trajectory {
    let points = log
        .incumbents()
        .map(|(t, w, obj)| {
            let x = match clock {
                Clock::Node => t as f64,
                Clock::Wall => w.unwrap_or(t as f64),
            };
            (x, obj)
        })
        .collect();
    Trajectory::new(points, horizon, reference)
}

/// Computes the report for the logs of one or more instances. `test_weeks`
/// selects the instances that enter the quartiles.
pub fn build_report(cfg: &BenchConfig, logs: &[RunLog], quartile_instances: &[String]) -> Report {
    let horizon = cfg.horizon(logs);
    let clock = cfg.solver.clock;
    let order = cfg.run_policies();
    let mut by_instance: BTreeMap<&str, Vec<&RunLog>> = BTreeMap::new();
    for l in logs {
        by_instance.entry(&l.summary.instance).or_default().push(l);
    }

    let mut rows = Vec::new();
    let mut plots = Vec::new();
    let mut metric_values: BTreeMap<(usize, String, &'static str), Vec<f64>> = BTreeMap::new();
    for (instance, mut runs) in by_instance {
        let rank = |l: &RunLog| {
            let kind = l.summary.policy.parse::<PolicyKind>().ok();
            order.iter().position(|&p| Some(p) == kind).unwrap_or(usize::MAX)
        };
        runs.sort_by_key(|l| (rank(l), l.summary.policy.clone()));

        // Best-known solution across every run of the instance.
        let mut best: Option<&RunLog> = None;
        for l in &runs {
            if let Some(c) = l.summary.best_objective {
                if best.is_none_or(|b| c < b.summary.best_objective.unwrap()) {
                    best = Some(l);
                }
            }
        }
        let reference = best.and_then(|b| b.summary.best_objective).unwrap_or(f64::NAN);
        let ref_classes = best.and_then(|b| b.summary.best_classes.clone());
        let baseline = runs.iter().find(|l| l.summary.policy == "baseline");
        let base_traj = baseline.map(|b| trajectory(b, clock, horizon, reference));
        let base_pi = base_traj.as_ref().map(primal_integral);

        for l in &runs {
            let traj = trajectory(l, clock, horizon, reference);
            let pi = primal_integral(&traj);
            let (speed, gap_at) = match base_traj.as_ref().map(|b| best_speed_up(&traj, b)) {
                Some(Ok((s, g))) => (Some(s), Some(g)),
                _ => (None, None),
            };
            let fixes: Vec<_> = l.fixes().collect();
            let row = ReportRow {
                instance: instance.to_string(),
                policy: l.summary.policy.clone(),
                seed: l.summary.seed,
                pi,
                pir: base_pi.and_then(|b| pir(pi, b).ok()),
                best_speed_up: speed,
                gap_at_best: gap_at,
                final_rel_gap: match (l.summary.best_objective, baseline.and_then(|b| b.summary.best_objective)) {
                    (Some(c), Some(cb)) => Some(relative_final_gap(c, cb)),
                    _ => None,
                },
                action_accuracy: ref_classes.as_ref().map(|r| action_accuracy(&fixes, r)),
                nodes: l.summary.nodes,
                status: l.summary.status.as_str().to_string(),
            };
            if quartile_instances.iter().any(|q| q == instance) {
                let size = l.summary.best_classes.as_ref().map_or(cfg.lap.trains, Vec::len);
                for (name, v) in [
                    ("pir", row.pir),
                    ("best_speed_up", row.best_speed_up),
                    ("final_rel_gap", row.final_rel_gap),
                    ("action_accuracy", row.action_accuracy),
                ] {
                    if let Some(v) = v {
                        metric_values.entry((size, row.policy.clone(), name)).or_default().push(v);
                    }
                }
            }
            let mut pts = vec![(0.0, 1.0)];
            pts.extend(traj.gaps());
            plots.push((instance.to_string(), l.summary.policy.clone(), pts));
            rows.push(row);
        }
    }

    let quartiles = metric_values
        .into_iter()
        .filter_map(|((size, policy, metric), vals)| {
            let [q1, median, q3] = quartiles(&vals)?;
            Some(QuartileRow {
                size,
                policy,
                metric: metric.to_string(),
                count: vals.len(),
                q1,
                median,
                q3,
            })
        })
        .collect();
    Report {
        rows,
        quartiles,
        plots,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Writes `report.csv`, `quartiles.csv` and `plots/*.tsv` into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<(), BenchError> {
    let csv_err = |e: csv::Error| BenchError::Io(e.into());
    let mut w = csv::Writer::from_path(dir.join("report.csv")).map_err(csv_err)?;
    w.write_record([
        "instance",
        "policy",
        "seed",
        "PI",
        "PIR",
        "best_speed_up",
        "gap_at_best",
        "final_rel_gap",
        "action_accuracy",
        "nodes",
        "status",
    ])
    .map_err(csv_err)?;
    for r in &report.rows {
        w.write_record([
            r.instance.clone(),
            r.policy.clone(),
            r.seed.to_string(),
            r.pi.to_string(),
            opt(r.pir),
            opt(r.best_speed_up),
            opt(r.gap_at_best),
            opt(r.final_rel_gap),
            opt(r.action_accuracy),
            r.nodes.to_string(),
            r.status.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("quartiles.csv")).map_err(csv_err)?;
    w.write_record(["size", "policy", "metric", "count", "q1", "median", "q3"])
        .map_err(csv_err)?;
    for q in &report.quartiles {
        w.write_record([
            q.size.to_string(),
            q.policy.clone(),
            q.metric.clone(),
            q.count.to_string(),
            q.q1.to_string(),
            q.median.to_string(),
            q.q3.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let plot_dir = dir.join("plots");
    std::fs::create_dir_all(&plot_dir)?;
    for (instance, policy, pts) in &report.plots {
        let slug = policy.parse::<PolicyKind>().map_or_else(|_| policy.replace(':', "_"), |p| p.slug());
        let mut text = String::from("t\tgap\n");
        for (t, g) in pts {
            text.push_str(&format!("{t}\t{g}\n"));
        }
        std::fs::write(plot_dir.join(format!("{instance}.{slug}.tsv")), text)?;
    }
    Ok(())
}

/// Rebuilds the report of a benchmark directory from `bench.json` and the
/// run logs, and writes it next to them.
pub fn report_from_dir(dir: &Path) -> Result<Report, BenchError> {
    let cfg: BenchConfig = serde_json::from_str(&std::fs::read_to_string(dir.join("bench.json"))?)
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.join("logs"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    let mut logs = Vec::with_capacity(paths.len());
    for p in &paths {
        logs.push(read_run_log(&std::fs::read_to_string(p)?)?);
    }
    // The first week trains the forest; the remaining weeks are the test set.
    let mut names: Vec<String> = logs.iter().map(|l| l.summary.instance.clone()).collect();
    names.sort();
    names.dedup();
    let test: Vec<String> = if names.len() > 1 { names[1..].to_vec() } else { names };
    let report = build_report(&cfg, &logs, &test);
    write_report(&report, dir)?;
    Ok(report)
}
