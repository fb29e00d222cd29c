//! Fixing policies run as branch-and-bound observers: the unassisted
//! baseline, the scoring policy SP(n) and the threshold policy TP(τ).

use std::fmt;
use std::str::FromStr;

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnb::{Fix, Observer};
use crate::forest::OnlineForest;
use crate::model::{Assignment, Model, ObjectId};
use crate::stats::Tracker;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("unknown policy {0:?} (expected baseline, sp:n=<int>, tp:tau=<real>)")]
    Unknown(String),
    #[error("invalid policy parameter: {0}")]
    Parameter(String),
    #[error("policy {0} needs a forest model")]
    MissingForest(PolicyKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum PolicyKind {
    Baseline,
    Sp { n: usize },
    Tp { tau: f64 },
}

impl PolicyKind {
    /// File-name-safe spelling, e.g. `sp_n5`.
    pub fn slug(&self) -> String {
        match self {
            PolicyKind::Baseline => "baseline".into(),
            PolicyKind::Sp { n } => format!("sp_n{n}"),
            PolicyKind::Tp { tau } => format!("tp_tau{tau}"),
        }
    }

    pub fn needs_forest(&self) -> bool {
        matches!(self, PolicyKind::Tp { .. })
    }

    /// The four policies of the weekly benchmark.
    pub fn benchmark_set() -> Vec<PolicyKind> {
        vec![
            PolicyKind::Baseline,
            PolicyKind::Sp { n: 1 },
            PolicyKind::Sp { n: 5 },
            PolicyKind::Tp { tau: 0.5 },
        ]
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Baseline => write!(f, "baseline"),
            PolicyKind::Sp { n } => write!(f, "sp:n={n}"),
            PolicyKind::Tp { tau } => write!(f, "tp:tau={tau}"),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "baseline" {
            return Ok(PolicyKind::Baseline);
        }
        if let Some(v) = s.strip_prefix("sp:n=") {
            let n: usize = v.parse().map_err(|_| PolicyError::Parameter(format!("n={v}")))?;
            if n == 0 {
                return Err(PolicyError::Parameter("n must be at least 1".into()));
            }
            return Ok(PolicyKind::Sp { n });
        }
        if let Some(v) = s.strip_prefix("tp:tau=") {
            let tau: f64 = v.parse().map_err(|_| PolicyError::Parameter(format!("tau={v}")))?;
            if !(0.0..1.0).contains(&tau) {
                return Err(PolicyError::Parameter("tau must lie in [0, 1)".into()));
            }
            return Ok(PolicyKind::Tp { tau });
        }
        Err(PolicyError::Unknown(s.to_string()))
    }
}

impl From<PolicyKind> for String {
    fn from(p: PolicyKind) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for PolicyKind {
    type Error = PolicyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Which solutions feed the class histories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    AllSolutions,
    IncumbentsOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// Solutions an object needs in its history before it may be fixed.
    pub t_min: u64,
    /// Keep training the forest during the run with current median-split labels.
    pub online_update: bool,
    /// Evaluate TP only at the first incumbent.
    pub tp_one_shot: bool,
    pub record: RecordMode,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            t_min: 3,
            online_update: true,
            tp_one_shot: false,
            record: RecordMode::AllSolutions,
        }
    }
}

/// Counts of stable predictions made for one object.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionHistory {
    pub ones: u64,
    pub total: u64,
}

impl PredictionHistory {
    pub fn push(&mut self, s: u8) {
        self.ones += u64::from(s);
        self.total += 1;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.total > 0).then(|| self.ones as f64 / self.total as f64)
    }
}

/// Top `n` unfixed objects by `-H` (ties to the lowest id) among those with
/// at least `t_min` samples, each fixed to its majority class.
pub fn sp_select(tracker: &Tracker, n: usize, fixed: &[bool], t_min: u64) -> Vec<Fix> {
    let mut scored: Vec<(f64, ObjectId)> = (0..tracker.num_objects())
        .filter(|&v| !fixed[v] && tracker.history(v).len() >= t_min.max(1))
        .map(|v| (tracker.entropy_score(v).expect("non-empty history"), v))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored
        .into_iter()
        .take(n)
        .map(|(_, v)| Fix {
            v,
            k: tracker.majority_class(v).expect("non-empty history"),
        })
        .collect()
}

/// Every unfixed object whose mean prediction exceeds `tau`, in id order.
pub fn tp_select(preds: &[PredictionHistory], tau: f64, fixed: &[bool], tracker: &Tracker) -> Vec<Fix> {
    (0..preds.len())
        .filter(|&v| !fixed[v] && preds[v].mean().is_some_and(|m| m > tau))
        .filter_map(|v| tracker.majority_class(v).ok().map(|k| Fix { v, k }))
        .collect()
}

/// Observer state for one run of one policy.
pub struct PolicyObserver {
    kind: PolicyKind,
    config: PolicyConfig,
    tracker: Tracker,
    forest: Option<OnlineForest>,
    predictions: Vec<PredictionHistory>,
    fixed: Vec<bool>,
    tp_evaluated: bool,
}

impl PolicyObserver {
    pub fn new(
        kind: PolicyKind,
        config: PolicyConfig,
        model: &Model,
        forest: Option<OnlineForest>,
    ) -> Result<Self, PolicyError> {
        if kind.needs_forest() && forest.is_none() {
            return Err(PolicyError::MissingForest(kind));
        }
        let objects = model.groups.len();
        Ok(PolicyObserver {
            kind,
            config,
            tracker: Tracker::for_model(model),
            forest: if kind == PolicyKind::Baseline { None } else { forest },
            predictions: vec![PredictionHistory::default(); objects],
            fixed: vec![false; objects],
            tp_evaluated: false,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn predictions(&self) -> &[PredictionHistory] {
        &self.predictions
    }

    pub fn forest(&self) -> Option<&OnlineForest> {
        self.forest.as_ref()
    }

    fn record(&mut self, model: &Model, x: &Assignment) {
        if let Err(e) = self.tracker.record(model, x.values()) {
            debug!("solution not recorded: {e}");
            return;
        }
        let Some(forest) = self.forest.as_mut() else {
            return;
        };
        let t = self.tracker.t();
        if self.config.online_update && t >= self.config.t_min {
            let labels = self.tracker.stability_labels().expect("recorded histories");
            for (v, &y) in labels.iter().enumerate() {
                let phi = self.tracker.features(v).expect("recorded history");
                forest.update(&phi, y);
            }
        }
        for v in 0..self.predictions.len() {
            if !self.fixed[v] {
                let phi = self.tracker.features(v).expect("recorded history");
                self.predictions[v].push(forest.predict(&phi));
            }
        }
    }
}

impl Observer for PolicyObserver {
    fn on_integer_solution(&mut self, model: &Model, x: &Assignment, _t: u64) {
        if self.config.record == RecordMode::AllSolutions {
            self.record(model, x);
        }
    }

    fn on_incumbent(&mut self, model: &Model, x: &Assignment, _t: u64) -> Vec<Fix> {
        if self.config.record == RecordMode::IncumbentsOnly {
            self.record(model, x);
        }
        if self.tracker.t() == 0 {
            return Vec::new();
        }
        let fixes = match self.kind {
            PolicyKind::Baseline => Vec::new(),
            PolicyKind::Sp { n } => sp_select(&self.tracker, n, &self.fixed, self.config.t_min),
            PolicyKind::Tp { tau } => {
                if self.config.tp_one_shot && self.tp_evaluated {
                    Vec::new()
                } else {
                    self.tp_evaluated = true;
                    tp_select(&self.predictions, tau, &self.fixed, &self.tracker)
                }
            }
        };
        for f in &fixes {
            self.fixed[f.v] = true;
        }
        fixes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClassLabel;

    fn tracker(seqs: &[&[ClassLabel]]) -> Tracker {
        let mut t = Tracker::new(seqs.len());
        for i in 0..seqs[0].len() {
            let row: Vec<ClassLabel> = seqs.iter().map(|s| s[i]).collect();
            t.record_classes(&row);
        }
        t
    }

    #[test]
    fn parse_and_print() {
        for s in ["baseline", "sp:n=1", "sp:n=5", "tp:tau=0.5"] {
            assert_eq!(s.parse::<PolicyKind>().unwrap().to_string(), s);
        }
        assert_eq!("tp:tau=0.5".parse::<PolicyKind>().unwrap().slug(), "tp_tau0.5");
        assert!("sp:n=0".parse::<PolicyKind>().is_err());
        assert!("tp:tau=1".parse::<PolicyKind>().is_err());
        assert!("greedy".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn sp_ranks_by_entropy() {
        // Entropies 0, ln 2, 0.562335 with majority classes 2, 0, 1.
        let t = tracker(&[&[2, 2, 2, 2], &[0, 1, 0, 1], &[1, 1, 2, 1]]);
        let none = [false; 3];
        assert_eq!(sp_select(&t, 1, &none, 3), vec![Fix { v: 0, k: 2 }]);
        assert_eq!(sp_select(&t, 2, &none, 3), vec![Fix { v: 0, k: 2 }, Fix { v: 2, k: 1 }]);
        assert_eq!(sp_select(&t, 5, &[true, false, true], 3).len(), 1);
        assert!(sp_select(&t, 5, &none, 5).is_empty());
    }

    #[test]
    fn tp_threshold_is_strict() {
        let t = tracker(&[&[0, 0], &[1, 1], &[0, 0]]);
        let preds = [
            PredictionHistory { ones: 3, total: 4 },
            PredictionHistory { ones: 1, total: 2 },
            PredictionHistory::default(),
        ];
        assert_eq!(tp_select(&preds, 0.5, &[false; 3], &t), vec![Fix { v: 0, k: 0 }]);
        assert!(tp_select(&preds, 0.5, &[true, false, false], &t).is_empty());
    }
}
