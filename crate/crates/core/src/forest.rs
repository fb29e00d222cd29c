//! Online random forest predicting whether an object's class is stable.
//!
//! Each tree sees two of the four feature dimensions. Leaves keep class
//! counts and a small reservoir of recent samples; once a leaf has seen
//! `n_split` samples and is impure it splits on the reservoir threshold with
//! the largest entropy reduction. An update only walks one root-to-leaf path
//! per tree.

use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ClassLabel;
use crate::stats::{FeatureVector, StatsError, Tracker};

const FORMAT: &str = "entfix-forest";
const VERSION: u32 = 1;
const DIMS: usize = 4;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("forest file is not a version {VERSION} {FORMAT} document")]
    FormatVersionMismatch,
    #[error("invalid forest configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub n_split: u64,
    pub features_per_tree: usize,
    pub reservoir: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 10,
            max_depth: 6,
            n_split: 20,
            features_per_tree: 2,
            reservoir: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Split {
    feature: usize,
    threshold: f64,
    left: usize,
    right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TreeNode {
    depth: usize,
    /// `[unstable, stable]` sample counts.
    counts: [u64; 2],
    seen: u64,
    split: Option<Split>,
    reservoir: Vec<([f64; DIMS], u8)>,
}

impl TreeNode {
    fn leaf(depth: usize) -> Self {
        TreeNode {
            depth,
            counts: [0, 0],
            seen: 0,
            split: None,
            reservoir: Vec::new(),
        }
    }

    fn prob(&self) -> f64 {
        let n = self.counts[0] + self.counts[1];
        if n == 0 {
            0.5
        } else {
            self.counts[1] as f64 / n as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OnlineTree {
    features: Vec<usize>,
    nodes: Vec<TreeNode>,
    rng: ChaCha8Rng,
}

fn label_entropy(c: [u64; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    c.iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.ln()
        })
        .sum()
}

impl OnlineTree {
    fn leaf_of(&self, x: &[f64; DIMS]) -> usize {
        let mut i = 0;
        while let Some(s) = &self.nodes[i].split {
            i = if x[s.feature] <= s.threshold { s.left } else { s.right };
        }
        i
    }

    /// Routes one sample; returns the number of nodes visited.
    fn update(&mut self, x: &[f64; DIMS], y: u8, cfg: &ForestConfig) -> usize {
        let mut i = 0;
        let mut touched = 1;
        while let Some(s) = &self.nodes[i].split {
            i = if x[s.feature] <= s.threshold { s.left } else { s.right };
            touched += 1;
        }
        let node = &mut self.nodes[i];
        node.counts[y as usize] += 1;
        node.seen += 1;
        if node.reservoir.len() < cfg.reservoir {
            node.reservoir.push((*x, y));
        } else {
            let r = self.rng.gen_range(0..node.seen);
            if (r as usize) < cfg.reservoir {
                node.reservoir[r as usize] = (*x, y);
            }
        }
        let ready = node.seen >= cfg.n_split && node.seen.is_multiple_of(cfg.n_split);
        if ready && node.depth < cfg.max_depth && node.counts[0] > 0 && node.counts[1] > 0 {
            self.try_split(i);
        }
        touched
    }

    fn try_split(&mut self, i: usize) {
        let node = &self.nodes[i];
        let res = &node.reservoir;
        let mut total = [0u64; 2];
        for &(_, y) in res {
            total[y as usize] += 1;
        }
        let base = label_entropy(total);
        let n = res.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &self.features {
            let mut thresholds: Vec<f64> = res.iter().map(|s| s.0[f]).collect();
            thresholds.sort_by(f64::total_cmp);
            thresholds.dedup();
            for &thr in &thresholds {
                let mut left = [0u64; 2];
                for &(x, y) in res {
                    if x[f] <= thr {
                        left[y as usize] += 1;
                    }
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let (nl, nr) = ((left[0] + left[1]) as f64, (right[0] + right[1]) as f64);
                if nl == 0.0 || nr == 0.0 {
                    continue;
                }
                let gain = base - (nl / n) * label_entropy(left) - (nr / n) * label_entropy(right);
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, thr));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return;
        };
        let depth = node.depth + 1;
        let (mut l, mut r) = (TreeNode::leaf(depth), TreeNode::leaf(depth));
        for &(x, y) in &node.reservoir {
            let child = if x[feature] <= threshold { &mut l } else { &mut r };
            child.counts[y as usize] += 1;
            child.seen += 1;
            child.reservoir.push((x, y));
        }
        let (left, right) = (self.nodes.len(), self.nodes.len() + 1);
        self.nodes.push(l);
        self.nodes.push(r);
        let node = &mut self.nodes[i];
        node.reservoir.clear();
        node.split = Some(Split {
            feature,
            threshold,
            left,
            right,
        });
    }
}

/// Ensemble of [`OnlineTree`]s; deterministic given its seed and the order
/// of updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineForest {
    config: ForestConfig,
    trees: Vec<OnlineTree>,
}

#[derive(Serialize, Deserialize)]
struct ForestFile {
    format: String,
    version: u32,
    forest: OnlineForest,
}

/// One training pair: features of object `v` after the `t`-th solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: u64,
    pub v: usize,
    pub x: FeatureVector,
    pub y: u8,
}

impl OnlineForest {
    pub fn new(config: ForestConfig) -> Result<Self, ForestError> {
        if config.trees == 0 {
            return Err(ForestError::InvalidConfig("at least one tree is required".into()));
        }
        if config.features_per_tree == 0 || config.features_per_tree > DIMS {
            return Err(ForestError::InvalidConfig(format!(
                "features_per_tree must be in 1..={DIMS}"
            )));
        }
        if config.n_split == 0 || config.reservoir < 2 {
            return Err(ForestError::InvalidConfig("n_split and reservoir must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let trees = (0..config.trees)
            .map(|_| {
                let mut features = sample(&mut rng, DIMS, config.features_per_tree).into_vec();
                features.sort_unstable();
                OnlineTree {
                    features,
                    nodes: vec![TreeNode::leaf(0)],
                    rng: ChaCha8Rng::seed_from_u64(rng.gen()),
                }
            })
            .collect();
        Ok(OnlineForest { config, trees })
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    /// Adds one labelled sample; returns the number of tree nodes visited
    /// (at most `trees * (max_depth + 1)`).
    pub fn update(&mut self, x: &FeatureVector, y: u8) -> usize {
        assert!(y <= 1, "labels are 0 or 1");
        let cfg = self.config.clone();
        self.trees.iter_mut().map(|t| t.update(&x.0, y, &cfg)).sum()
    }

    /// Mean over trees of the stable fraction at the reached leaf.
    pub fn predict_prob(&self, x: &FeatureVector) -> f64 {
        let sum: f64 = self
            .trees
            .iter()
            .map(|t| t.nodes[t.leaf_of(&x.0)].prob())
            .sum();
        sum / self.trees.len() as f64
    }

    pub fn predict(&self, x: &FeatureVector) -> u8 {
        u8::from(self.predict_prob(x) > 0.5)
    }

    /// Number of trees whose root has split.
    pub fn split_trees(&self) -> usize {
        self.trees.iter().filter(|t| t.nodes[0].split.is_some()).count()
    }

    pub fn root_counts(&self) -> Vec<[u64; 2]> {
        self.trees.iter().map(|t| t.nodes[0].counts).collect()
    }

    pub fn to_json(&self) -> String {
        let file = ForestFile {
            format: FORMAT.into(),
            version: VERSION,
            forest: self.clone(),
        };
        serde_json::to_string(&file).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ForestError> {
        let file: ForestFile = serde_json::from_str(text).map_err(|_| ForestError::FormatVersionMismatch)?;
        if file.format != FORMAT || file.version != VERSION || file.forest.trees.is_empty() {
            return Err(ForestError::FormatVersionMismatch);
        }
        Ok(file.forest)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), ForestError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ForestError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Replays the class vectors of a training run into a fresh tracker,
    /// labels every `(t, v)` with the final-history median split, and
    /// streams the samples through [`update`](Self::update) in order.
    pub fn fit_training_run(&mut self, solutions: &[Vec<ClassLabel>]) -> Result<Vec<Sample>, ForestError> {
        let Some(first) = solutions.first() else {
            return Err(StatsError::EmptyHistory.into());
        };
        let mut tracker = Tracker::new(first.len());
        let mut features = Vec::with_capacity(solutions.len() * first.len());
        for classes in solutions {
            tracker.record_classes(classes);
            for v in 0..tracker.num_objects() {
                features.push((tracker.t(), v, tracker.features(v)?));
            }
        }
        let labels = tracker.stability_labels()?;
        let data: Vec<Sample> = features
            .into_iter()
            .map(|(t, v, x)| Sample { t, v, x, y: labels[v] })
            .collect();
        for s in &data {
            self.update(&s.x, s.y);
        }
        Ok(data)
    }

    /// Fraction of samples whose prediction matches the label.
    pub fn accuracy(&self, data: &[Sample]) -> f64 {
        if data.is_empty() {
            return 1.0;
        }
        let hits = data.iter().filter(|s| self.predict(&s.x) == s.y).count();
        hits as f64 / data.len() as f64
    }
}

/// Writes samples as CSV with columns `mean,var,max,min,label`.
pub fn write_dataset_csv<W: Write>(data: &[Sample], out: W) -> Result<(), ForestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mean", "var", "max", "min", "label"])
        .map_err(|e| ForestError::Io(e.into()))?;
    for s in data {
        let row = [s.x.0[0], s.x.0[1], s.x.0[2], s.x.0[3]].map(|v| v.to_string());
        w.write_record(row.iter().map(String::as_str).chain([s.y.to_string().as_str()]))
            .map_err(|e| ForestError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}
