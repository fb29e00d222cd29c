//! Brute-force oracles shared by the integration and acceptance suites.
//! None of these go through the solver code they check.

#![allow(dead_code)]

use std::collections::HashMap;

use entfix::model::{
    Assignment, ClassLabel, LinearConstraint, Model, OneHotGroup, RowSense, VarKind, Variable,
};
use entfix::mps::{LogEvent, RunLog};
use entfix::simplex::LinearProgram;
use rand::Rng;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-9 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    for k in c..n {
                        a[r][k] -= f * a[c][k];
                    }
                    b[r] -= f * b[c];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum of a box-bounded LP by enumerating every basic solution.
/// `None` means infeasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_cols();
    let m = lp.num_rows();
    let mut dense = vec![vec![0.0; n]; m];
    for (j, col) in lp.columns.iter().enumerate() {
        for &(i, a) in col {
            dense[i][j] = a;
        }
    }
    // Candidate active constraints: every row plus both bounds of every column.
    let mut hyper: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..m {
        hyper.push((dense[i].clone(), lp.rhs[i]));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        hyper.push((e.clone(), lp.lower[j]));
        hyper.push((e, lp.upper[j]));
    }
    let feasible = |x: &[f64]| {
        let tol = 1e-9;
        (0..n).all(|j| x[j] >= lp.lower[j] - tol && x[j] <= lp.upper[j] + tol)
            && (0..m).all(|i| {
                let a: f64 = (0..n).map(|j| dense[i][j] * x[j]).sum();
                match lp.senses[i] {
                    RowSense::Le => a <= lp.rhs[i] + tol,
                    RowSense::Ge => a >= lp.rhs[i] - tol,
                    RowSense::Eq => (a - lp.rhs[i]).abs() <= tol,
                }
            })
    };
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(n);
    fn rec(
        start: usize,
        n: usize,
        hyper: &[(Vec<f64>, f64)],
        pick: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if pick.len() == n {
            visit(pick);
            return;
        }
        for h in start..hyper.len() {
            pick.push(h);
            rec(h + 1, n, hyper, pick, visit);
            pick.pop();
        }
    }
    let mut visit = |p: &[usize]| {
        let a = p.iter().map(|&h| hyper[h].0.clone()).collect();
        let b = p.iter().map(|&h| hyper[h].1).collect();
        if let Some(x) = solve_dense(a, b) {
            if feasible(&x) {
                let obj: f64 = (0..n).map(|j| lp.objective[j] * x[j]).sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
    };
    rec(0, n, &hyper, &mut pick, &mut visit);
    best
}

/// Random LP with at most `max_vars` columns and `max_rows` rows inside a box.
pub fn random_box_lp(rng: &mut impl Rng, max_vars: usize, max_rows: usize) -> LinearProgram {
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(0..=max_rows);
    let mut columns = vec![Vec::new(); n];
    let mut senses = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..m {
        for col in columns.iter_mut() {
            if rng.gen_bool(0.7) {
                let a = rng.gen_range(-5..=5) as f64;
                if a != 0.0 {
                    col.push((i, a));
                }
            }
        }
        senses.push(match rng.gen_range(0..10) {
            0 => RowSense::Eq,
            1..=3 => RowSense::Ge,
            _ => RowSense::Le,
        });
        rhs.push(rng.gen_range(-6..=10) as f64);
    }
    let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=0) as f64).collect();
    let upper = lower.iter().map(|l| l + rng.gen_range(1..=5) as f64).collect();
    LinearProgram {
        objective: (0..n).map(|_| rng.gen_range(-6..=6) as f64).collect(),
        columns,
        senses,
        rhs,
        lower,
        upper,
    }
}

/// Random pure-binary model: `groups` one-hot groups of 2-3 classes, extra
/// free binaries up to `max_bin` total, and up to `max_rows` side rows.
pub fn random_group_mip(rng: &mut impl Rng, max_bin: usize, groups: usize, max_rows: usize) -> Model {
    let mut variables = Vec::new();
    let mut constraints = Vec::new();
    let mut gs = Vec::new();
    let binary = |id: usize| Variable {
        id,
        name: format!("x{id}"),
        lower: 0.0,
        upper: 1.0,
        kind: VarKind::Binary,
    };
    for v in 0..groups {
        let size = rng.gen_range(2..=3);
        let mut members = Vec::new();
        for k in 0..size {
            let id = variables.len();
            variables.push(binary(id));
            members.push((k as ClassLabel, id));
        }
        constraints.push(LinearConstraint {
            name: format!("onehot{v}"),
            terms: members.iter().map(|m| (m.1, 1.0)).collect(),
            sense: RowSense::Eq,
            rhs: 1.0,
        });
        gs.push(OneHotGroup {
            object: v,
            name: format!("v{v}"),
            members,
        });
    }
    while variables.len() < max_bin && rng.gen_bool(0.6) {
        let id = variables.len();
        variables.push(binary(id));
    }
    let n = variables.len();
    let rows = rng.gen_range(0..=max_rows.saturating_sub(groups));
    for i in 0..rows {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.5) {
                let a = rng.gen_range(-4..=6) as f64;
                if a != 0.0 {
                    terms.push((j, a));
                }
            }
        }
        if terms.is_empty() {
            continue;
        }
        let sense = if rng.gen_bool(0.75) { RowSense::Le } else { RowSense::Ge };
        let rhs = match sense {
            RowSense::Ge => rng.gen_range(-3..=3) as f64,
            _ => rng.gen_range(0..=8) as f64,
        };
        constraints.push(LinearConstraint {
            name: format!("side{i}"),
            terms,
            sense,
            rhs,
        });
    }
    Model {
        name: "random".into(),
        objective: (0..n).map(|j| (j, rng.gen_range(-10..=10) as f64)).collect(),
        variables,
        constraints,
        groups: gs,
    }
}

/// Best objective over all 0/1 points of a pure-binary model.
pub fn enumerate_binary(model: &Model) -> Option<f64> {
    let n = model.num_vars();
    assert!(n <= 20);
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n)
            .map(|j| {
                let v = &model.variables[j];
                let bit: f64 = if mask >> j & 1 == 1 { 1.0 } else { 0.0 };
                bit.clamp(v.lower, v.upper)
            })
            .collect();
        if (0..n).any(|j| (x[j] == 1.0) != (mask >> j & 1 == 1)) {
            continue;
        }
        let (obj, ok) = model.evaluate(&Assignment(x), 1e-9);
        if ok {
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    best
}

/// Statistics of a raw class sequence, recomputed from scratch.
pub struct RawStats {
    pub mean: f64,
    pub var: f64,
    pub max: f64,
    pub min: f64,
    pub entropy: f64,
}

pub fn raw_stats(seq: &[u32]) -> RawStats {
    let t = seq.len() as f64;
    let mean = seq.iter().map(|&k| k as f64).sum::<f64>() / t;
    let var = seq.iter().map(|&k| (k as f64 - mean).powi(2)).sum::<f64>() / t;
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &k in seq {
        *counts.entry(k).or_default() += 1;
    }
    let entropy = -counts
        .values()
        .map(|&c| {
            let p = c as f64 / t;
            p * p.ln()
        })
        .sum::<f64>();
    RawStats {
        mean,
        var,
        max: *seq.iter().max().unwrap() as f64,
        min: *seq.iter().min().unwrap() as f64,
        entropy,
    }
}

/// Replays a run log and checks the fixing contract: no fix before the first
/// incumbent, at most `per_incumbent` fixes after each incumbent, and every
/// fix naming the majority class of the solutions logged so far (ties to the
/// smallest label). Returns the number of fixes checked.
pub fn check_fix_contract(log: &RunLog, per_incumbent: Option<usize>) -> Result<usize, String> {
    let mut counts: Vec<HashMap<ClassLabel, usize>> = Vec::new();
    let mut seen_incumbent = false;
    let mut since_incumbent = 0;
    let mut fixes = 0;
    for (i, e) in log.events.iter().enumerate() {
        match e {
            LogEvent::Solution { classes, .. } => {
                counts.resize_with(classes.len(), HashMap::new);
                for (c, &k) in counts.iter_mut().zip(classes) {
                    *c.entry(k).or_default() += 1;
                }
            }
            LogEvent::Incumbent { .. } => {
                seen_incumbent = true;
                since_incumbent = 0;
            }
            LogEvent::Fix { v, k, .. } => {
                if !seen_incumbent {
                    return Err(format!("event {i}: fix of object {v} before any incumbent"));
                }
                since_incumbent += 1;
                if per_incumbent.is_some_and(|n| since_incumbent > n) {
                    return Err(format!("event {i}: {since_incumbent} fixes after one incumbent"));
                }
                let majority = counts
                    .get(*v)
                    .and_then(|c| c.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))))
                    .map(|(&k, _)| k);
                if majority != Some(*k) {
                    return Err(format!("event {i}: object {v} fixed to {k}, replayed majority {majority:?}"));
                }
                fixes += 1;
            }
            LogEvent::Summary(_) => {}
        }
    }
    Ok(fixes)
}
