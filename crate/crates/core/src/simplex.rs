//! Bounded-variable primal simplex for LP relaxations.
//!
//! Rows are handled through logical variables `s_i = a_i x` whose bounds
//! encode the row sense, so every LP has the form
//!
//! ```text
//! min c'x   s.t.  A x - s = 0,  l <= x <= u,  lr <= s <= ur
//! ```
//!
//! The logicals form the starting basis. Phase one minimizes the sum of
//! bound violations of the basic variables; phase two the true objective.
//! A warm start reuses a [`Basis`] (including its dense inverse) from an
//! earlier solve of an LP with the same matrix and possibly different
//! column bounds.

use log::trace;

use crate::model::{Model, RowSense};

pub const PIVOT_TOL: f64 = 1e-9;
pub const PRIMAL_FEAS_TOL: f64 = 1e-7;
pub const DUAL_FEAS_TOL: f64 = 1e-9;
pub const DROP_TOL: f64 = 1e-11;
pub const REFACTOR_INTERVAL: usize = 100;

/// LP relaxation in sparse column form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub columns: Vec<Vec<(usize, f64)>>,
    pub senses: Vec<RowSense>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }

    /// Continuous relaxation of `model`.
    pub fn from_model(model: &Model) -> Self {
        let n = model.num_vars();
        let mut columns = vec![Vec::new(); n];
        for (i, row) in model.constraints.iter().enumerate() {
            for &(j, a) in &row.terms {
                if a != 0.0 {
                    columns[j].push((i, a));
                }
            }
        }
        LinearProgram {
            objective: model.cost_vector(),
            columns,
            senses: model.constraints.iter().map(|r| r.sense).collect(),
            rhs: model.constraints.iter().map(|r| r.rhs).collect(),
            lower: model.variables.iter().map(|v| v.lower).collect(),
            upper: model.variables.iter().map(|v| v.upper).collect(),
        }
    }

    fn row_bounds(&self, i: usize) -> (f64, f64) {
        let b = self.rhs[i];
        match self.senses[i] {
            RowSense::Le => (f64::NEG_INFINITY, b),
            RowSense::Ge => (b, f64::INFINITY),
            RowSense::Eq => (b, b),
        }
    }

    /// Largest violation of a row or column bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut act = vec![0.0; self.num_rows()];
        let mut worst: f64 = 0.0;
        for (j, col) in self.columns.iter().enumerate() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
            for &(i, a) in col {
                act[i] += a * x[j];
            }
        }
        for (i, &a) in act.iter().enumerate() {
            let (lo, hi) = self.row_bounds(i);
            worst = worst.max(lo - a).max(a - hi);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarStatus {
    Basic(usize),
    AtLower,
    AtUpper,
}

/// A simplex basis together with its dense inverse.
#[derive(Debug, Clone)]
pub struct Basis {
    head: Vec<usize>,
    status: Vec<VarStatus>,
    inverse: Option<Vec<f64>>,
    pivots_since_refactor: usize,
}

impl Basis {
    fn fits(&self, m: usize, n: usize) -> bool {
        self.head.len() == m && self.status.len() == n + m
    }

    /// Drops the cached inverse; the next solve refactorizes.
    pub fn forget_factorization(&mut self) {
        self.inverse = None;
    }

    /// Indices of the basic columns (logicals are numbered after structurals).
    pub fn basic_columns(&self) -> &[usize] {
        &self.head
    }
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub basis: Basis,
}

#[derive(Debug, Clone, Default)]
pub struct LpOptions {
    /// Defaults to `50 * (rows + cols)`.
    pub iteration_limit: Option<usize>,
    /// Use Bland's rule from the first pivot.
    pub bland: bool,
}

pub fn solve_lp(lp: &LinearProgram, warm: Option<Basis>) -> LpResult {
    solve_lp_with(lp, warm, &LpOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, warm: Option<Basis>, opts: &LpOptions) -> LpResult {
    let mut s = Simplex::new(lp, warm, opts);
    let status = s.run();
    s.finish(status)
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    m: usize,
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    head: Vec<usize>,
    status: Vec<VarStatus>,
    inv: Vec<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    limit: usize,
    bland: bool,
    stall: usize,
    best_phase_obj: f64,
    phase_one: bool,
    // scratch
    y: Vec<f64>,
    alpha: Vec<f64>,
    cb: Vec<f64>,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram, warm: Option<Basis>, opts: &LpOptions) -> Self {
        let m = lp.num_rows();
        let n = lp.num_cols();
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        for i in 0..m {
            let (lo, hi) = lp.row_bounds(i);
            lower.push(lo);
            upper.push(hi);
        }
        let mut cost = lp.objective.clone();
        cost.resize(n + m, 0.0);

        let mut s = Simplex {
            lp,
            m,
            n,
            lower,
            upper,
            cost,
            head: Vec::new(),
            status: Vec::new(),
            inv: Vec::new(),
            xb: vec![0.0; m],
            since_refactor: 0,
            iterations: 0,
            limit: opts.iteration_limit.unwrap_or(50 * (m + n)),
            bland: opts.bland,
            stall: 0,
            best_phase_obj: f64::INFINITY,
            phase_one: true,
            y: vec![0.0; m],
            alpha: vec![0.0; m],
            cb: vec![0.0; m],
        };
        match warm {
            Some(b) if b.fits(m, n) => {
                s.head = b.head;
                s.status = b.status;
                s.since_refactor = b.pivots_since_refactor;
                for j in 0..n + m {
                    s.normalize_nonbasic(j);
                }
                match b.inverse {
                    Some(inv) if inv.len() == m * m => s.inv = inv,
                    _ => s.refactor(),
                }
            }
            _ => s.slack_basis(),
        }
        s.compute_xb();
        s
    }

    fn slack_basis(&mut self) {
        let (m, n) = (self.m, self.n);
        self.head = (n..n + m).collect();
        self.status = (0..n + m)
            .map(|j| if j >= n { VarStatus::Basic(j - n) } else { VarStatus::AtLower })
            .collect();
        for j in 0..n {
            self.normalize_nonbasic(j);
        }
        // Basis matrix is -I.
        self.inv = vec![0.0; m * m];
        for i in 0..m {
            self.inv[i * m + i] = -1.0;
        }
        self.since_refactor = 0;
    }

    /// Puts a nonbasic variable on a finite bound.
    fn normalize_nonbasic(&mut self, j: usize) {
        match self.status[j] {
            VarStatus::Basic(_) => {}
            VarStatus::AtUpper if !self.upper[j].is_finite() => {
                self.status[j] = VarStatus::AtLower
            }
            VarStatus::AtLower if !self.lower[j].is_finite() && self.upper[j].is_finite() => {
                self.status[j] = VarStatus::AtUpper
            }
            _ => {}
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtUpper => self.upper[j],
            VarStatus::AtLower if self.lower[j].is_finite() => self.lower[j],
            _ => 0.0,
        }
    }

    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for &(i, a) in &self.lp.columns[j] {
                f(i, a);
            }
        } else {
            f(j - self.n, -1.0);
        }
    }

    /// x_B = -B^{-1} (sum over nonbasic j of a_j x_j).
    fn compute_xb(&mut self) {
        let m = self.m;
        let mut w = vec![0.0; m];
        for j in 0..self.n + m {
            if matches!(self.status[j], VarStatus::Basic(_)) {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                self.for_column(j, |i, a| w[i] += a * v);
            }
        }
        for r in 0..m {
            let row = &self.inv[r * m..(r + 1) * m];
            let mut acc = 0.0;
            for (i, &wi) in w.iter().enumerate() {
                if wi != 0.0 {
                    acc += row[i] * wi;
                }
            }
            self.xb[r] = -acc;
        }
    }

    /// Dense Gauss-Jordan inversion of the basis matrix. Falls back to the
    /// slack basis if the current head is numerically singular.
    fn refactor(&mut self) {
        let m = self.m;
        let mut mat = vec![0.0; m * m];
        for (c, &j) in self.head.iter().enumerate() {
            let n = self.n;
            if j < n {
                for &(i, a) in &self.lp.columns[j] {
                    mat[i * m + c] = a;
                }
            } else {
                mat[(j - n) * m + c] = -1.0;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        let mut perm: Vec<usize> = (0..m).collect();
        for c in 0..m {
            let mut p = c;
            let mut best = 0.0;
            for r in c..m {
                let v = mat[perm[r] * m + c].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-10 {
                trace!("singular basis at column {c}; restarting from slack basis");
                let vals: Vec<f64> = (0..self.n).map(|j| self.value_of(j)).collect();
                self.slack_basis();
                for (j, v) in vals.into_iter().enumerate() {
                    let to_upper = self.upper[j].is_finite()
                        && (self.upper[j] - v).abs() < (v - self.lower[j]).abs();
                    self.status[j] = if to_upper { VarStatus::AtUpper } else { VarStatus::AtLower };
                }
                return;
            }
            perm.swap(c, p);
            let pr = perm[c];
            let piv = mat[pr * m + c];
            for k in 0..m {
                mat[pr * m + k] /= piv;
                inv[pr * m + k] /= piv;
            }
            for r in 0..m {
                if r == pr {
                    continue;
                }
                let f = mat[r * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in c..m {
                    mat[r * m + k] -= f * mat[pr * m + k];
                }
                for k in 0..m {
                    let v = inv[r * m + k] - f * inv[pr * m + k];
                    inv[r * m + k] = if v.abs() < DROP_TOL { 0.0 } else { v };
                }
            }
        }
        // Row perm[c] of `inv` now belongs to basis position c.
        let mut out = vec![0.0; m * m];
        for c in 0..m {
            out[c * m..(c + 1) * m].copy_from_slice(&inv[perm[c] * m..(perm[c] + 1) * m]);
        }
        self.inv = out;
        self.since_refactor = 0;
    }

    fn value_of(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::Basic(r) => self.xb[r],
            _ => self.nonbasic_value(j),
        }
    }

    /// Phase-one cost of a basic variable (sign of its bound violation).
    fn infeasibility_cost(&self, r: usize) -> f64 {
        let j = self.head[r];
        let x = self.xb[r];
        if x < self.lower[j] - PRIMAL_FEAS_TOL {
            -1.0
        } else if x > self.upper[j] + PRIMAL_FEAS_TOL {
            1.0
        } else {
            0.0
        }
    }

    fn phase_objective(&self) -> f64 {
        if self.phase_one {
            (0..self.m)
                .map(|r| {
                    let j = self.head[r];
                    (self.lower[j] - self.xb[r]).max(0.0) + (self.xb[r] - self.upper[j]).max(0.0)
                })
                .sum()
        } else {
            (0..self.n + self.m).map(|j| self.cost[j] * self.value_of(j)).sum()
        }
    }

    fn compute_duals(&mut self) {
        let m = self.m;
        for r in 0..m {
            self.cb[r] = if self.phase_one {
                self.infeasibility_cost(r)
            } else {
                self.cost[self.head[r]]
            };
        }
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..m {
            let c = self.cb[r];
            if c == 0.0 {
                continue;
            }
            let row = &self.inv[r * m..(r + 1) * m];
            for (yi, &b) in self.y.iter_mut().zip(row) {
                *yi += c * b;
            }
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let c = if self.phase_one { 0.0 } else { self.cost[j] };
        let mut ya = 0.0;
        self.for_column(j, |i, a| ya += self.y[i] * a);
        c - ya
    }

    /// Entering variable and its direction (+1 increase, -1 decrease).
    fn price(&self, rejected: &[usize]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n + self.m {
            let dir = match self.status[j] {
                VarStatus::Basic(_) => continue,
                VarStatus::AtLower => 1.0,
                VarStatus::AtUpper => -1.0,
            };
            if self.upper[j] - self.lower[j] <= 0.0 || rejected.contains(&j) {
                continue;
            }
            let d = self.reduced_cost(j);
            if d * dir >= -DUAL_FEAS_TOL {
                continue;
            }
            if self.bland {
                return Some((j, dir));
            }
            if best.is_none_or(|b| d.abs() > b.2) {
                best = Some((j, dir, d.abs()));
            }
        }
        best.map(|b| (b.0, b.1))
    }

    fn ftran(&mut self, q: usize) {
        let m = self.m;
        self.alpha.iter_mut().for_each(|v| *v = 0.0);
        let mut col: Vec<(usize, f64)> = Vec::new();
        self.for_column(q, |i, a| col.push((i, a)));
        for r in 0..m {
            let row = &self.inv[r * m..(r + 1) * m];
            let mut acc = 0.0;
            for &(i, a) in &col {
                acc += row[i] * a;
            }
            self.alpha[r] = if acc.abs() < DROP_TOL { 0.0 } else { acc };
        }
    }

    /// Step limit contributed by basic position `r` for a move with rate
    /// `rate` (change of x_B[r] per unit step), with `slack` tolerance.
    fn row_limit(&self, r: usize, rate: f64, slack: f64) -> Option<(f64, VarStatus)> {
        let j = self.head[r];
        let x = self.xb[r];
        let (l, u) = (self.lower[j], self.upper[j]);
        if self.phase_one && x < l - PRIMAL_FEAS_TOL {
            (rate > 0.0).then(|| ((l - x + slack) / rate, VarStatus::AtLower))
        } else if self.phase_one && x > u + PRIMAL_FEAS_TOL {
            (rate < 0.0).then(|| ((x - u + slack) / -rate, VarStatus::AtUpper))
        } else if rate < 0.0 && l.is_finite() {
            Some((((x - l).max(0.0) + slack) / -rate, VarStatus::AtLower))
        } else if rate > 0.0 && u.is_finite() {
            Some((((u - x).max(0.0) + slack) / rate, VarStatus::AtUpper))
        } else {
            None
        }
    }

    /// Returns (step, leaving position or None for a bound flip, leaving status).
    fn ratio_test(&self, q: usize, dir: f64) -> Option<(f64, Option<(usize, VarStatus)>)> {
        let flip = self.upper[q] - self.lower[q];
        if self.bland {
            let mut best: Option<(f64, usize, VarStatus)> = None;
            for r in 0..self.m {
                let a = self.alpha[r];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                if let Some((t, st)) = self.row_limit(r, -dir * a, 0.0) {
                    let better = match best {
                        None => true,
                        Some((bt, br, _)) => {
                            t < bt - 1e-12 || (t <= bt + 1e-12 && self.head[r] < self.head[br])
                        }
                    };
                    if better {
                        best = Some((t, r, st));
                    }
                }
            }
            return match best {
                Some((t, _, _)) if flip <= t => Some((flip, None)),
                Some((t, r, st)) => Some((t, Some((r, st)))),
                None if flip.is_finite() => Some((flip, None)),
                None => None,
            };
        }

        // Harris two-pass: bound the step with tolerances, then take the
        // largest pivot among rows that block within that bound.
        let mut tmax = f64::INFINITY;
        for r in 0..self.m {
            let a = self.alpha[r];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            if let Some((t, _)) = self.row_limit(r, -dir * a, PRIMAL_FEAS_TOL) {
                tmax = tmax.min(t);
            }
        }
        if flip <= tmax {
            return flip.is_finite().then_some((flip, None));
        }
        let mut best: Option<(usize, VarStatus, f64)> = None;
        for r in 0..self.m {
            let a = self.alpha[r];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            if let Some((t, st)) = self.row_limit(r, -dir * a, 0.0) {
                if t <= tmax && best.is_none_or(|b| a.abs() > b.2) {
                    best = Some((r, st, a.abs()));
                }
            }
        }
        let (r, st, _) = best?;
        let t = self.row_limit(r, -dir * self.alpha[r], 0.0).unwrap().0.max(0.0);
        Some((t, Some((r, st))))
    }

    fn pivot(&mut self, q: usize, dir: f64, step: f64, leave: Option<(usize, VarStatus)>) {
        let m = self.m;
        let xq = self.nonbasic_value(q) + dir * step;
        if step != 0.0 {
            for r in 0..m {
                if self.alpha[r] != 0.0 {
                    self.xb[r] -= dir * step * self.alpha[r];
                }
            }
        }
        let Some((r, st)) = leave else {
            self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
            return;
        };
        let j = self.head[r];
        self.status[j] = st;
        self.normalize_nonbasic(j);
        self.head[r] = q;
        self.status[q] = VarStatus::Basic(r);
        self.xb[r] = xq;

        let piv = self.alpha[r];
        let (before, rest) = self.inv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        let update = |row: &mut [f64], f: f64| {
            for (v, &p) in row.iter_mut().zip(prow.iter()) {
                if p != 0.0 {
                    let nv = *v - f * p;
                    *v = if nv.abs() < DROP_TOL { 0.0 } else { nv };
                }
            }
        };
        for (k, row) in before.chunks_mut(m).enumerate() {
            let f = self.alpha[k];
            if f != 0.0 {
                update(row, f);
            }
        }
        for (k, row) in after.chunks_mut(m).enumerate() {
            let f = self.alpha[r + 1 + k];
            if f != 0.0 {
                update(row, f);
            }
        }
        self.since_refactor += 1;
    }

    fn any_infeasible(&self) -> bool {
        (0..self.m).any(|r| self.infeasibility_cost(r) != 0.0)
    }

    fn run(&mut self) -> LpStatus {
        let stall_limit = 2 * (self.n + self.m);
        let mut rejected: Vec<usize> = Vec::new();
        let mut verified = 0;
        loop {
            if self.iterations >= self.limit {
                return LpStatus::IterationLimit;
            }
            if self.since_refactor >= REFACTOR_INTERVAL {
                self.refactor();
                self.compute_xb();
            }
            let was_phase_one = self.phase_one;
            self.phase_one = self.any_infeasible();
            if was_phase_one != self.phase_one {
                self.best_phase_obj = f64::INFINITY;
                self.stall = 0;
            }
            self.compute_duals();
            let Some((q, dir)) = self.price(&rejected) else {
                if !rejected.is_empty() && verified < 3 {
                    verified += 1;
                    rejected.clear();
                    self.refactor();
                    self.compute_xb();
                    continue;
                }
                // Confirm with recomputed basic values before declaring a result.
                self.compute_xb();
                let infeasible = self.any_infeasible();
                if infeasible != self.phase_one && verified < 3 {
                    verified += 1;
                    if verified > 1 {
                        self.refactor();
                        self.compute_xb();
                    }
                    continue;
                }
                return if infeasible {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };
            self.ftran(q);
            let Some((step, leave)) = self.ratio_test(q, dir) else {
                if self.phase_one {
                    // A descent direction of the infeasibility sum must hit a
                    // breakpoint; no blocking row means tiny pivots.
                    rejected.push(q);
                    continue;
                }
                return LpStatus::Unbounded;
            };
            if let Some((r, _)) = leave {
                if self.alpha[r].abs() < 1e-7 && self.since_refactor > 0 {
                    self.refactor();
                    self.compute_xb();
                    continue;
                }
            }
            self.pivot(q, dir, step, leave);
            rejected.clear();
            self.iterations += 1;

            let obj = self.phase_objective();
            if obj < self.best_phase_obj - 1e-12 * (1.0 + obj.abs()) {
                self.best_phase_obj = obj;
                self.stall = 0;
            } else {
                self.stall += 1;
                if self.stall >= stall_limit && !self.bland {
                    trace!("no progress for {stall_limit} pivots; switching to Bland's rule");
                    self.bland = true;
                }
            }
        }
    }

    fn finish(self, status: LpStatus) -> LpResult {
        let x: Vec<f64> = (0..self.n).map(|j| self.value_of(j)).collect();
        let objective = x
            .iter()
            .zip(&self.lp.objective)
            .map(|(a, b)| a * b)
            .sum();
        LpResult {
            status,
            x,
            objective,
            iterations: self.iterations,
            basis: Basis {
                head: self.head,
                status: self.status,
                inverse: Some(self.inv),
                pivots_since_refactor: self.since_refactor,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(obj: Vec<f64>, rows: Vec<(Vec<f64>, RowSense, f64)>, lo: Vec<f64>, hi: Vec<f64>) -> LinearProgram {
        let n = obj.len();
        let mut columns = vec![Vec::new(); n];
        for (i, (a, _, _)) in rows.iter().enumerate() {
            for (j, &v) in a.iter().enumerate() {
                if v != 0.0 {
                    columns[j].push((i, v));
                }
            }
        }
        LinearProgram {
            objective: obj,
            columns,
            senses: rows.iter().map(|r| r.1).collect(),
            rhs: rows.iter().map(|r| r.2).collect(),
            lower: lo,
            upper: hi,
        }
    }

    #[test]
    fn bound_attained_optimum() {
        let p = lp(vec![-1.0], vec![], vec![0.0], vec![1.0]);
        let r = solve_lp(&p, None);
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.x, vec![1.0]);
        assert_eq!(r.objective, -1.0);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let p = lp(
            vec![0.0],
            vec![(vec![1.0], RowSense::Ge, 2.0), (vec![1.0], RowSense::Le, 1.0)],
            vec![0.0],
            vec![f64::INFINITY],
        );
        assert_eq!(solve_lp(&p, None).status, LpStatus::Infeasible);
    }

    #[test]
    fn square_cut_by_diagonal() {
        let p = lp(
            vec![-1.0, -1.0],
            vec![(vec![1.0, 1.0], RowSense::Le, 1.5)],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        );
        let r = solve_lp(&p, None);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 1.5).abs() < 1e-9);
    }

    #[test]
    fn unbounded_ray() {
        let p = lp(
            vec![-1.0, 0.0],
            vec![(vec![1.0, -1.0], RowSense::Le, 1.0)],
            vec![0.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        );
        assert_eq!(solve_lp(&p, None).status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_and_warm_start() {
        // min x + 2y + 3z, x + y + z = 2, x - y >= -0.5, bounds [0, 1]
        let mut p = lp(
            vec![1.0, 2.0, 3.0],
            vec![
                (vec![1.0, 1.0, 1.0], RowSense::Eq, 2.0),
                (vec![1.0, -1.0, 0.0], RowSense::Ge, -0.5),
            ],
            vec![0.0; 3],
            vec![1.0; 3],
        );
        let r = solve_lp(&p, None);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-9, "{}", r.objective);
        p.upper[0] = 0.5;
        let warm = solve_lp(&p, Some(r.basis));
        let cold = solve_lp(&p, None);
        assert_eq!(warm.status, LpStatus::Optimal);
        assert!((warm.objective - cold.objective).abs() < 1e-8);
        assert!(p.max_violation(&warm.x) < 1e-7);
    }

    #[test]
    fn iteration_limit_reported() {
        let p = lp(
            vec![-1.0, -1.0],
            vec![(vec![1.0, 2.0], RowSense::Le, 3.0), (vec![2.0, 1.0], RowSense::Le, 3.0)],
            vec![0.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        );
        let opts = LpOptions {
            iteration_limit: Some(0),
            bland: false,
        };
        assert_eq!(solve_lp_with(&p, None, &opts).status, LpStatus::IterationLimit);
        let bland = LpOptions {
            iteration_limit: None,
            bland: true,
        };
        let r = solve_lp_with(&p, None, &bland);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 2.0).abs() < 1e-9);
    }
}
