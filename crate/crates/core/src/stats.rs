//! Per-object class histories with constant-time updates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{class_of, ClassLabel, Model, ModelError, ObjectId, FEAS_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty class history")]
    EmptyHistory,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Streaming summary of the classes an object took over the recorded
/// solutions. Memory is bounded by the number of distinct classes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassHistory {
    t: u64,
    histogram: BTreeMap<ClassLabel, u64>,
    mean: f64,
    m2: f64,
    min: ClassLabel,
    max: ClassLabel,
}

/// `[mean, variance, max, min]` of the class labels seen so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; 4]);

impl FeatureVector {
    pub fn mean(&self) -> f64 {
        self.0[0]
    }
    pub fn var(&self) -> f64 {
        self.0[1]
    }
    pub fn max(&self) -> f64 {
        self.0[2]
    }
    pub fn min(&self) -> f64 {
        self.0[3]
    }
}

impl ClassHistory {
    pub fn push(&mut self, k: ClassLabel) {
        self.t += 1;
        *self.histogram.entry(k).or_insert(0) += 1;
        let x = k as f64;
        let delta = x - self.mean;
        self.mean += delta / self.t as f64;
        self.m2 += delta * (x - self.mean);
        if self.t == 1 {
            self.min = k;
            self.max = k;
        } else {
            self.min = self.min.min(k);
            self.max = self.max.max(k);
        }
    }

    pub fn len(&self) -> u64 {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    pub fn count(&self, k: ClassLabel) -> u64 {
        self.histogram.get(&k).copied().unwrap_or(0)
    }

    pub fn histogram(&self) -> &BTreeMap<ClassLabel, u64> {
        &self.histogram
    }

    pub fn features(&self) -> Result<FeatureVector, StatsError> {
        if self.t == 0 {
            return Err(StatsError::EmptyHistory);
        }
        Ok(FeatureVector([
            self.mean,
            (self.m2 / self.t as f64).max(0.0),
            self.max as f64,
            self.min as f64,
        ]))
    }

    /// Natural-log Shannon entropy of the empirical class distribution.
    pub fn entropy(&self) -> Result<f64, StatsError> {
        if self.t == 0 {
            return Err(StatsError::EmptyHistory);
        }
        // Summing over sorted counts makes the value independent of labels.
        let mut counts: Vec<u64> = self.histogram.values().copied().collect();
        counts.sort_unstable();
        let t = self.t as f64;
        let h: f64 = counts
            .iter()
            .map(|&c| {
                let p = c as f64 / t;
                -p * p.ln()
            })
            .sum();
        Ok(h.max(0.0))
    }

    /// Most frequent class; ties go to the smallest label.
    pub fn majority(&self) -> Result<ClassLabel, StatsError> {
        let mut best: Option<(ClassLabel, u64)> = None;
        for (&k, &c) in &self.histogram {
            if best.is_none_or(|b| c > b.1) {
                best = Some((k, c));
            }
        }
        best.map(|b| b.0).ok_or(StatsError::EmptyHistory)
    }
}

/// One [`ClassHistory`] per object, all advanced together.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tracker {
    histories: Vec<ClassHistory>,
    t: u64,
}

impl Tracker {
    pub fn new(objects: usize) -> Self {
        Tracker {
            histories: vec![ClassHistory::default(); objects],
            t: 0,
        }
    }

    pub fn for_model(model: &Model) -> Self {
        Self::new(model.groups.len())
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn num_objects(&self) -> usize {
        self.histories.len()
    }

    pub fn history(&self, v: ObjectId) -> &ClassHistory {
        &self.histories[v]
    }

    /// Records the classes of an integer-feasible assignment, one per group.
    pub fn record(&mut self, model: &Model, values: &[f64]) -> Result<Vec<ClassLabel>, StatsError> {
        let classes = model
            .groups
            .iter()
            .map(|g| class_of(values, g, FEAS_TOL))
            .collect::<Result<Vec<_>, _>>()?;
        self.record_classes(&classes);
        Ok(classes)
    }

    /// Records one class per object, in object order.
    pub fn record_classes(&mut self, classes: &[ClassLabel]) {
        assert_eq!(classes.len(), self.histories.len(), "one class per object");
        for (h, &k) in self.histories.iter_mut().zip(classes) {
            h.push(k);
        }
        self.t += 1;
    }

    pub fn features(&self, v: ObjectId) -> Result<FeatureVector, StatsError> {
        self.histories[v].features()
    }

    pub fn entropy(&self, v: ObjectId) -> Result<f64, StatsError> {
        self.histories[v].entropy()
    }

    /// Score to maximize: the negated entropy.
    pub fn entropy_score(&self, v: ObjectId) -> Result<f64, StatsError> {
        Ok(-self.entropy(v)?)
    }

    pub fn majority_class(&self, v: ObjectId) -> Result<ClassLabel, StatsError> {
        self.histories[v].majority()
    }

    /// Median split of the entropies: 1 (stable) unless strictly above the median.
    pub fn stability_labels(&self) -> Result<Vec<u8>, StatsError> {
        let h = self
            .histories
            .iter()
            .map(|x| x.entropy())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(median_split(&h))
    }
}

/// Median of `values` (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    })
}

/// Labels each entropy 0 if it is strictly above the median, else 1.
pub fn median_split(entropies: &[f64]) -> Vec<u8> {
    let Some(m) = median(entropies) else {
        return Vec::new();
    };
    entropies.iter().map(|&h| u8::from(h <= m)).collect()
}

#[cfg(test)]
#[allow(clippy::approx_constant)] // hand-rounded example values
mod tests {
    use super::*;

    fn tracker_from(seq: &[ClassLabel]) -> Tracker {
        let mut t = Tracker::new(1);
        for &k in seq {
            t.record_classes(&[k]);
        }
        t
    }

    #[test]
    fn record_counts() {
        let t = tracker_from(&[1, 2]);
        assert_eq!(t.t(), 2);
        let h = t.history(0).histogram();
        assert_eq!(h.get(&1), Some(&1));
        assert_eq!(h.get(&2), Some(&1));
        let c = tracker_from(&[3, 3, 3, 3]).features(0).unwrap();
        assert_eq!(c.mean(), 3.0);
        assert_eq!(c.var(), 0.0);
    }

    #[test]
    fn feature_examples() {
        assert_eq!(tracker_from(&[1, 2, 2, 3]).features(0).unwrap().0, [2.0, 0.5, 3.0, 1.0]);
        assert_eq!(tracker_from(&[5]).features(0).unwrap().0, [5.0, 0.0, 5.0, 5.0]);
        assert_eq!(tracker_from(&[0, 4]).features(0).unwrap().0, [2.0, 4.0, 4.0, 0.0]);
        assert_eq!(Tracker::new(1).features(0), Err(StatsError::EmptyHistory));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(tracker_from(&[2, 2, 2]).entropy(0).unwrap(), 0.0);
        let h = tracker_from(&[0, 1]).entropy(0).unwrap();
        assert!((h - std::f64::consts::LN_2).abs() < 1e-12);
        // -(0.75 ln 0.75 + 0.25 ln 0.25)
        let oracle = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        let h = tracker_from(&[1, 1, 2, 1]).entropy(0).unwrap();
        assert!((h - oracle).abs() < 1e-12);
        assert!((h - 0.562335).abs() < 1e-6);
        assert_eq!(Tracker::new(1).entropy(0), Err(StatsError::EmptyHistory));
    }

    #[test]
    fn median_split_examples() {
        let h = [0.0, 0.693147, 0.562335, 0.693147];
        assert!((median(&h).unwrap() - 0.627741).abs() < 1e-12);
        assert_eq!(median_split(&h), vec![1, 0, 1, 0]);
        assert_eq!(median_split(&[0.3; 5]), vec![1; 5]);
        let distinct = [0.1, 0.9, 0.5, 0.3, 0.7, 0.2];
        assert_eq!(median_split(&distinct).iter().filter(|&&s| s == 1).count(), 3);
    }

    #[test]
    fn majority_examples() {
        assert_eq!(tracker_from(&[1, 1, 2, 1]).majority_class(0), Ok(1));
        assert_eq!(tracker_from(&[2, 1, 2, 1]).majority_class(0), Ok(1));
        assert_eq!(tracker_from(&[5]).majority_class(0), Ok(5));
    }

    #[test]
    fn score_is_negated_entropy() {
        assert_eq!(tracker_from(&[4, 4]).entropy_score(0).unwrap(), 0.0);
        let s = tracker_from(&[0, 1]).entropy_score(0).unwrap();
        assert!((s + 0.693147).abs() < 1e-6);
        let s = tracker_from(&[1, 1, 1, 2]).entropy_score(0).unwrap();
        assert!((s + 0.562335).abs() < 1e-6);
    }

    #[test]
    fn entropy_invariant_under_relabeling_features_are_not() {
        let a = tracker_from(&[1, 1, 2, 3, 3, 3]);
        let b = tracker_from(&[7, 7, 0, 4, 4, 4]);
        assert_eq!(a.entropy(0).unwrap(), b.entropy(0).unwrap());
        assert_ne!(a.features(0).unwrap(), b.features(0).unwrap());
    }
}
