//! Primal gap, primal integral, PIR, time-to-gap, best speed-up and action
//! accuracy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClassLabel, ObjectId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("baseline primal integral is zero")]
    DivisionByZero,
    #[error("no gap level is reached by both runs")]
    NoComparablePoint,
}

/// Incumbent objectives over time, with the horizon and reference objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `(t_i, objective_i)` in increasing `t`.
    pub points: Vec<(f64, f64)>,
    pub horizon: f64,
    pub reference: f64,
}

/// Objectives closer than this (relative) are the same solution value;
/// summation order alone moves the last bits.
pub const SAME_VALUE_TOL: f64 = 1e-9;

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= SAME_VALUE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// `|c - c_ref| / max(|c|, |c_ref|)`, 0 when both are (numerically) equal and
/// 1 when the signs differ or either value is undefined.
pub fn primal_gap(c: f64, c_ref: f64) -> f64 {
    if !c.is_finite() || !c_ref.is_finite() {
        return 1.0;
    }
    if same_value(c, c_ref) {
        return 0.0;
    }
    if c * c_ref < 0.0 {
        return 1.0;
    }
    ((c - c_ref).abs() / c.abs().max(c_ref.abs())).min(1.0)
}

impl Trajectory {
    pub fn new(points: Vec<(f64, f64)>, horizon: f64, reference: f64) -> Self {
        Trajectory {
            points,
            horizon,
            reference,
        }
    }

    /// `(t_i, p(t_i))` for every incumbent.
    pub fn gaps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .map(|&(t, c)| (t, primal_gap(c, self.reference)))
    }

    /// Smallest gap reached (1 if no incumbent).
    pub fn min_gap(&self) -> f64 {
        self.gaps().map(|g| g.1).fold(1.0, f64::min)
    }

    /// Gap after the last incumbent, 1 if there is none.
    pub fn final_gap(&self) -> f64 {
        self.gaps().last().map_or(1.0, |g| g.1)
    }
}

/// Step-function integral of the primal gap over `[0, horizon]`.
pub fn primal_integral(traj: &Trajectory) -> f64 {
    let mut pi = 0.0;
    let (mut prev_t, mut prev_p) = (0.0, 1.0);
    for (t, p) in traj.gaps() {
        pi += prev_p * (t - prev_t);
        prev_t = t;
        prev_p = p;
    }
    pi + prev_p * (traj.horizon - prev_t)
}

pub fn pir(heuristic_pi: f64, baseline_pi: f64) -> Result<f64, MetricsError> {
    if baseline_pi == 0.0 {
        return Err(MetricsError::DivisionByZero);
    }
    Ok(heuristic_pi / baseline_pi)
}

/// Earliest time at which the linear interpolation through `(0, 1)` and the
/// incumbent gaps reaches `g`; `None` if it never does.
pub fn time_to_gap(traj: &Trajectory, g: f64) -> Option<f64> {
    if g >= 1.0 {
        return Some(0.0);
    }
    let (mut ta, mut pa) = (0.0, 1.0);
    for (tb, pb) in traj.gaps() {
        if pb <= g {
            if pa - pb <= 0.0 {
                return Some(tb);
            }
            return Some(ta + (pa - g) / (pa - pb) * (tb - ta));
        }
        ta = tb;
        pa = pb;
    }
    None
}

/// Largest baseline/heuristic time-to-gap ratio over 100 gap levels spanning
/// `[max(min gaps), 1]`, and the smallest gap attaining it.
pub fn best_speed_up(heuristic: &Trajectory, baseline: &Trajectory) -> Result<(f64, f64), MetricsError> {
    const GRID: usize = 100;
    let lo = heuristic.min_gap().max(baseline.min_gap());
    let mut best: Option<(f64, f64)> = None;
    for i in 0..GRID {
        let g = if i + 1 == GRID {
            1.0
        } else {
            lo + (1.0 - lo) * i as f64 / (GRID - 1) as f64
        };
        let (Some(th), Some(tb)) = (time_to_gap(heuristic, g), time_to_gap(baseline, g)) else {
            continue;
        };
        if th <= 0.0 {
            continue;
        }
        let ratio = tb / th;
        // Relative slack keeps interpolation noise from moving the attaining g.
        if best.is_none_or(|(r, _)| ratio > r * (1.0 + 1e-12)) {
            best = Some((ratio, g));
        }
    }
    best.ok_or(MetricsError::NoComparablePoint)
}

/// Fraction of fixes that agree with the reference classes; 1 without fixes.
pub fn action_accuracy(fixes: &[(ObjectId, ClassLabel)], reference: &[ClassLabel]) -> f64 {
    if fixes.is_empty() {
        return 1.0;
    }
    let hits = fixes.iter().filter(|&&(v, k)| reference.get(v) == Some(&k)).count();
    hits as f64 / fixes.len() as f64
}

/// `(c - c_base) / max(|c_base|, 1e-10)`; negative when `c` beats the baseline.
pub fn relative_final_gap(c: f64, c_base: f64) -> f64 {
    if same_value(c, c_base) {
        return 0.0;
    }
    (c - c_base) / c_base.abs().max(1e-10)
}

/// First quartile, median and third quartile (linear interpolation between
/// order statistics).
pub fn quartiles(values: &[f64]) -> Option<[f64; 3]> {
    if values.is_empty() {
        return None;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (s.len() - 1) as f64 * p;
        let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    };
    Some([q(0.25), q(0.5), q(0.75)])
}
