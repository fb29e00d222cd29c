//! Best-first branch-and-bound with an observer that sees every integer
//! solution and may answer incumbents with global class fixes.
//!
//! A fix `x[v][k] = 1` is applied as bound tightening on the relaxation shared
//! by all open nodes. Under the one-hot row this is the same feasible set as
//! adding the equality as a cut.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    apply_class_fix, Assignment, ClassLabel, Model, ObjectId, VarId, Violation, FEAS_TOL,
};
use crate::simplex::{solve_lp_with, Basis, LinearProgram, LpOptions, LpStatus};

const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    Node,
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub node_limit: u64,
    /// Wall-clock budget in seconds; unlimited when absent.
    pub wall_limit_s: Option<f64>,
    pub rel_gap_tol: f64,
    pub seed: u64,
    pub rounding_heuristic: bool,
    /// Rounding runs at fractional nodes up to this depth.
    pub rounding_max_depth: usize,
    /// When plain rounding fails, keep the rounded group classes and
    /// re-solve the LP over the remaining variables.
    pub rounding_lp_repair: bool,
    pub clock: Clock,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            node_limit: 20_000,
            wall_limit_s: None,
            rel_gap_tol: 0.0,
            seed: 0,
            rounding_heuristic: true,
            rounding_max_depth: 20,
            rounding_lp_repair: true,
            clock: Clock::Node,
        }
    }
}

/// A class fix requested by an observer: object `v` takes class `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fix {
    pub v: ObjectId,
    pub k: ClassLabel,
}

pub trait Observer {
    /// Every integer-feasible point found (node LPs and rounding).
    fn on_integer_solution(&mut self, _model: &Model, _x: &Assignment, _t: u64) {}

    /// A strictly improving solution; the returned fixes are applied globally.
    fn on_incumbent(&mut self, _model: &Model, _x: &Assignment, _t: u64) -> Vec<Fix> {
        Vec::new()
    }
}

impl Observer for () {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionSource {
    Lp,
    Rounding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionEvent {
    pub node: u64,
    pub wall_s: f64,
    pub objective: f64,
    pub source: SolutionSource,
    pub classes: Vec<ClassLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncumbentEvent {
    pub node: u64,
    pub wall_s: f64,
    pub objective: f64,
    /// Index into [`RunRecord::solutions`].
    pub solution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixEvent {
    pub node: u64,
    pub wall_s: f64,
    pub v: ObjectId,
    pub k: ClassLabel,
    /// Class of `v` in the incumbent that triggered the fix.
    pub incumbent_k: ClassLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Optimal,
    BudgetExhausted,
    RestrictedInfeasible,
    NoSolution,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Optimal => "optimal",
            RunStatus::BudgetExhausted => "budget_exhausted",
            RunStatus::RestrictedInfeasible => "restricted_infeasible",
            RunStatus::NoSolution => "no_solution",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub policy: String,
    pub seed: u64,
    pub solutions: Vec<SolutionEvent>,
    pub incumbents: Vec<IncumbentEvent>,
    pub fixes: Vec<FixEvent>,
    pub skipped_fixes: usize,
    pub nodes: u64,
    pub lp_iterations: u64,
    pub status: RunStatus,
    pub best: Option<Assignment>,
    pub best_objective: Option<f64>,
    /// Lower bound for the original problem; only set while no fix was applied.
    pub dual_bound: Option<f64>,
    /// Lower bound for the problem restricted by the applied fixes.
    pub restricted_bound: Option<f64>,
    pub wall_s: f64,
}

impl RunRecord {
    /// Class of every object in the best assignment.
    pub fn best_classes(&self) -> Option<&[ClassLabel]> {
        let last = self.incumbents.last()?;
        Some(&self.solutions[last.solution].classes)
    }

    /// `(t, objective)` of each incumbent under `clock`.
    pub fn incumbent_points(&self, clock: Clock) -> Vec<(f64, f64)> {
        self.incumbents
            .iter()
            .map(|e| (clock_value(clock, e.node, e.wall_s), e.objective))
            .collect()
    }

    pub fn best_or_err(&self) -> Result<&Assignment, SolveError> {
        self.best.as_ref().ok_or(SolveError::NoSolution)
    }
}

pub fn clock_value(clock: Clock, node: u64, wall_s: f64) -> f64 {
    match clock {
        Clock::Node => node as f64,
        Clock::Wall => wall_s,
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("no feasible solution found within the budget")]
    NoSolution,
}

/// `|best - bound| / max(|best|, 1e-10)`.
pub fn relative_gap(best: f64, bound: f64) -> f64 {
    (best - bound).abs() / best.abs().max(1e-10)
}

/// Rounds each group to its largest member (ties to the smallest label) and
/// every other integer variable to the nearest integer. Returns the point
/// only if it is feasible for `model`.
pub fn round_and_repair(x: &[f64], model: &Model) -> Option<Assignment> {
    let mut y = x.to_vec();
    let mut in_group = vec![false; model.num_vars()];
    for g in &model.groups {
        let mut best: Option<(ClassLabel, VarId, f64)> = None;
        for &(k, j) in &g.members {
            in_group[j] = true;
            let better = match best {
                None => true,
                Some((bk, _, bv)) => x[j] > bv || (x[j] == bv && k < bk),
            };
            if better {
                best = Some((k, j, x[j]));
            }
        }
        let chosen = best?.1;
        for &(_, j) in &g.members {
            y[j] = if j == chosen { 1.0 } else { 0.0 };
        }
    }
    for v in &model.variables {
        if v.kind.is_integral() && !in_group[v.id] {
            y[v.id] = x[v.id].round();
        }
    }
    let y = Assignment(y);
    model.evaluate(&y, FEAS_TOL).1.then_some(y)
}

#[derive(Debug, Clone)]
struct Node {
    id: u64,
    depth: usize,
    changes: Vec<(VarId, f64, f64)>,
    bound: f64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap order: the lowest bound, then the lowest id, is greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Search<'m, 'o, O: Observer + ?Sized> {
    model: &'m Model,
    config: &'m SolverConfig,
    observer: &'o mut O,
    lp: LinearProgram,
    global_lo: Vec<f64>,
    global_hi: Vec<f64>,
    group_index: Vec<Option<usize>>,
    fixed: Vec<Option<ClassLabel>>,
    record: RunRecord,
    cutoff: f64,
    start: Instant,
    open: BinaryHeap<Node>,
}

/// Runs branch-and-bound on `model`.
pub fn solve<O: Observer + ?Sized>(
    model: &Model,
    config: &SolverConfig,
    observer: &mut O,
) -> Result<RunRecord, SolveError> {
    let violations = model.validate();
    if !violations.is_empty() {
        return Err(SolveError::Invalid(violations));
    }
    let lp = LinearProgram::from_model(model);
    let mut group_index = vec![None; model.groups.len()];
    for (i, g) in model.groups.iter().enumerate() {
        if g.object < group_index.len() {
            group_index[g.object] = Some(i);
        }
    }
    let mut s = Search {
        model,
        config,
        observer,
        global_lo: lp.lower.clone(),
        global_hi: lp.upper.clone(),
        lp,
        group_index,
        fixed: vec![None; model.groups.len()],
        record: RunRecord {
            instance: model.name.clone(),
            policy: String::new(),
            seed: config.seed,
            solutions: Vec::new(),
            incumbents: Vec::new(),
            fixes: Vec::new(),
            skipped_fixes: 0,
            nodes: 0,
            lp_iterations: 0,
            status: RunStatus::NoSolution,
            best: None,
            best_objective: None,
            dual_bound: None,
            restricted_bound: None,
            wall_s: 0.0,
        },
        cutoff: f64::INFINITY,
        start: Instant::now(),
        open: BinaryHeap::new(),
    };
    s.run()?;
    Ok(s.record)
}

impl<O: Observer + ?Sized> Search<'_, '_, O> {
    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    /// Nodes with a bound at or above this value cannot improve the incumbent.
    fn prune_level(&self) -> f64 {
        if self.cutoff.is_finite() {
            self.cutoff - 1e-9 * self.cutoff.abs().max(1.0)
        } else {
            f64::INFINITY
        }
    }

    fn run(&mut self) -> Result<(), SolveError> {
        let int_vars: Vec<VarId> = self
            .model
            .variables
            .iter()
            .filter(|v| v.kind.is_integral())
            .map(|v| v.id)
            .collect();
        self.open.push(Node {
            id: 0,
            depth: 0,
            changes: Vec::new(),
            bound: f64::NEG_INFINITY,
        });
        let mut next_id = 1u64;
        let mut basis: Option<Basis> = None;
        let mut exhausted = true;

        while let Some(node) = self.open.pop() {
            if self.record.nodes >= self.config.node_limit
                || self.config.wall_limit_s.is_some_and(|w| self.elapsed() >= w)
            {
                self.open.push(node);
                exhausted = false;
                break;
            }
            if node.bound >= self.prune_level() {
                continue;
            }
            if !self.load_bounds(&node) {
                continue;
            }
            self.record.nodes += 1;
            let t = self.record.nodes;

            let mut res = solve_lp_with(&self.lp, basis.take(), &LpOptions::default());
            self.record.lp_iterations += res.iterations as u64;
            if res.status == LpStatus::IterationLimit {
                warn!("node {}: LP iteration limit, re-solving with Bland's rule", node.id);
                let opts = LpOptions {
                    iteration_limit: Some(500 * (self.lp.num_rows() + self.lp.num_cols())),
                    bland: true,
                };
                res = solve_lp_with(&self.lp, None, &opts);
                self.record.lp_iterations += res.iterations as u64;
            }
            let status = res.status;
            let obj = res.objective;
            let x = std::mem::take(&mut res.x);
            basis = Some(res.basis);
            match status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => return Err(SolveError::Unbounded),
                LpStatus::IterationLimit => {
                    // Unresolved: never prune, split the first open integer domain.
                    warn!("node {}: LP unresolved after Bland re-solve", node.id);
                    if let Some(&j) = int_vars
                        .iter()
                        .find(|&&j| self.lp.upper[j] - self.lp.lower[j] >= 1.0)
                    {
                        let (lo, hi) = (self.lp.lower[j], self.lp.upper[j]);
                        let mid = ((lo + hi) / 2.0).floor();
                        self.push_children(&node, j, lo, mid, hi, node.bound, &mut next_id);
                    }
                    continue;
                }
                LpStatus::Optimal => {}
            }
            if obj >= self.prune_level() {
                continue;
            }

            match most_fractional(&x, &int_vars) {
                None => {
                    let mut y = x;
                    for &j in &int_vars {
                        y[j] = y[j].round();
                    }
                    let y = Assignment(y);
                    if self.model.evaluate(&y, FEAS_TOL).1 {
                        self.handle_solution(y, SolutionSource::Lp, t);
                    } else {
                        debug!("node {}: integral LP point fails the feasibility check", node.id);
                    }
                }
                Some(j) => {
                    if self.config.rounding_heuristic && node.depth <= self.config.rounding_max_depth
                    {
                        let found = round_and_repair(&x, self.model).or_else(|| {
                            if self.config.rounding_lp_repair {
                                self.repair_with_lp(&x, basis.as_ref(), &int_vars)
                            } else {
                                None
                            }
                        });
                        if let Some(y) = found {
                            self.handle_solution(y, SolutionSource::Rounding, t);
                        }
                    }
                    if obj < self.prune_level() {
                        let (lo, hi) = (self.lp.lower[j], self.lp.upper[j]);
                        let f = x[j].floor();
                        self.push_children(&node, j, lo, f, hi, obj, &mut next_id);
                    }
                }
            }

            if let Some(best) = self.record.best_objective {
                let lb = self.open.peek().map_or(best, |n| n.bound.min(best));
                if relative_gap(best, lb) <= self.config.rel_gap_tol {
                    self.open.clear();
                }
            }
        }
        self.finalize(exhausted);
        Ok(())
    }

    /// Pins every group to its largest member and re-optimizes the other
    /// variables; succeeds if the result is integral and feasible.
    fn repair_with_lp(&mut self, x: &[f64], warm: Option<&Basis>, int_vars: &[VarId]) -> Option<Assignment> {
        if self.model.groups.is_empty() {
            return None;
        }
        let saved = (self.lp.lower.clone(), self.lp.upper.clone());
        for g in &self.model.groups {
            let mut chosen = g.members[0];
            for &m in &g.members[1..] {
                if x[m.1] > x[chosen.1] {
                    chosen = m;
                }
            }
            for &(_, j) in &g.members {
                let v = if j == chosen.1 { 1.0 } else { 0.0 };
                self.lp.lower[j] = v;
                self.lp.upper[j] = v;
            }
        }
        let res = solve_lp_with(&self.lp, warm.cloned(), &LpOptions::default());
        self.record.lp_iterations += res.iterations as u64;
        (self.lp.lower, self.lp.upper) = saved;
        if res.status != LpStatus::Optimal {
            return None;
        }
        let mut y = res.x;
        for &j in int_vars {
            if (y[j] - y[j].round()).abs() > INT_TOL {
                return None;
            }
            y[j] = y[j].round();
        }
        let y = Assignment(y);
        self.model.evaluate(&y, FEAS_TOL).1.then_some(y)
    }

    /// Loads global bounds plus the node's local changes into the LP.
    /// Returns false if a fix contradicts the node.
    fn load_bounds(&mut self, node: &Node) -> bool {
        self.lp.lower.copy_from_slice(&self.global_lo);
        self.lp.upper.copy_from_slice(&self.global_hi);
        for &(j, lo, hi) in &node.changes {
            self.lp.lower[j] = self.lp.lower[j].max(lo);
            self.lp.upper[j] = self.lp.upper[j].min(hi);
            if self.lp.lower[j] > self.lp.upper[j] + 1e-9 {
                return false;
            }
        }
        true
    }

    #[allow(clippy::too_many_arguments)]
    fn push_children(
        &mut self,
        parent: &Node,
        j: VarId,
        lo: f64,
        floor: f64,
        hi: f64,
        bound: f64,
        next_id: &mut u64,
    ) {
        for (clo, chi) in [(lo, floor), (floor + 1.0, hi)] {
            let mut changes = parent.changes.clone();
            changes.push((j, clo, chi));
            self.open.push(Node {
                id: *next_id,
                depth: parent.depth + 1,
                changes,
                bound,
            });
            *next_id += 1;
        }
    }

    fn handle_solution(&mut self, y: Assignment, source: SolutionSource, t: u64) {
        let (obj, _) = self.model.evaluate(&y, FEAS_TOL);
        let classes = match self.model.classes(y.values(), FEAS_TOL) {
            Ok(c) => c,
            Err(e) => {
                warn!("feasible point is not one-hot: {e}");
                return;
            }
        };
        let wall_s = self.elapsed();
        self.record.solutions.push(SolutionEvent {
            node: t,
            wall_s,
            objective: obj,
            source,
            classes,
        });
        self.observer.on_integer_solution(self.model, &y, t);

        let improves = self
            .record
            .best_objective
            .is_none_or(|b| obj < b - 1e-9 * b.abs().max(1.0));
        if !improves {
            return;
        }
        self.record.incumbents.push(IncumbentEvent {
            node: t,
            wall_s,
            objective: obj,
            solution: self.record.solutions.len() - 1,
        });
        self.record.best_objective = Some(obj);
        self.cutoff = obj;
        let fixes = self.observer.on_incumbent(self.model, &y, t);
        self.record.best = Some(y);
        if !fixes.is_empty() {
            self.apply_fixes(&fixes, t, wall_s);
        }
    }

    fn apply_fixes(&mut self, fixes: &[Fix], t: u64, wall_s: f64) {
        let incumbent_classes = self.record.solutions
            [self.record.incumbents.last().expect("fixes follow an incumbent").solution]
            .classes
            .clone();
        let mut applied = false;
        for fix in fixes {
            let Some(gi) = self.group_index.get(fix.v).copied().flatten() else {
                warn!("fix for unknown object {} skipped", fix.v);
                self.record.skipped_fixes += 1;
                continue;
            };
            if self.fixed[gi].is_some() {
                warn!("object {} is already fixed; fix skipped", fix.v);
                self.record.skipped_fixes += 1;
                continue;
            }
            let group = &self.model.groups[gi];
            match apply_class_fix(&mut self.global_lo, &mut self.global_hi, group, fix.k) {
                Ok(_) => {
                    self.fixed[gi] = Some(fix.k);
                    applied = true;
                    self.record.fixes.push(FixEvent {
                        node: t,
                        wall_s,
                        v: fix.v,
                        k: fix.k,
                        incumbent_k: incumbent_classes[gi],
                    });
                }
                Err(e) => {
                    warn!("fix ({}, {}) skipped: {e}", fix.v, fix.k);
                    self.record.skipped_fixes += 1;
                }
            }
        }
        if applied {
            let (lo, hi) = (&self.global_lo, &self.global_hi);
            let before = self.open.len();
            let kept: Vec<Node> = std::mem::take(&mut self.open)
                .into_vec()
                .into_iter()
                .filter(|n| {
                    n.changes
                        .iter()
                        .all(|&(j, clo, chi)| clo.max(lo[j]) <= chi.min(hi[j]) + 1e-9)
                })
                .collect();
            debug!("fixes pruned {} open nodes", before - kept.len());
            self.open = BinaryHeap::from(kept);
        }
    }

    fn satisfies_fixes(&self, classes: &[ClassLabel]) -> bool {
        self.fixed
            .iter()
            .zip(classes)
            .all(|(f, &k)| f.is_none_or(|fk| fk == k))
    }

    fn finalize(&mut self, exhausted: bool) {
        let any_fix = !self.record.fixes.is_empty();
        let open_bound = self.open.iter().map(|n| n.bound).min_by(f64::total_cmp);
        let bound = match (open_bound, self.record.best_objective) {
            (Some(b), Some(best)) => Some(b.min(best)),
            (Some(b), None) => Some(b),
            (None, best) => best,
        };
        if any_fix {
            self.record.restricted_bound = bound;
        } else {
            self.record.dual_bound = bound;
        }
        self.record.status = if self.record.best.is_none() {
            RunStatus::NoSolution
        } else if !exhausted {
            RunStatus::BudgetExhausted
        } else if !any_fix
            || self
                .record
                .solutions
                .iter()
                .any(|s| self.satisfies_fixes(&s.classes))
        {
            RunStatus::Optimal
        } else {
            RunStatus::RestrictedInfeasible
        };
        self.record.wall_s = self.elapsed();
    }
}

/// Integer variable whose LP value is closest to .5 (ties to the lowest id).
fn most_fractional(x: &[f64], int_vars: &[VarId]) -> Option<VarId> {
    let mut best: Option<(VarId, f64)> = None;
    for &j in int_vars {
        let f = x[j] - x[j].floor();
        if f <= INT_TOL || f >= 1.0 - INT_TOL {
            continue;
        }
        let score = (f - 0.5).abs();
        if best.is_none_or(|b| score < b.1) {
            best = Some((j, score));
        }
    }
    best.map(|b| b.0)
}
