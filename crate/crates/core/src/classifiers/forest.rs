use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, Dataset};

/// Gini impurity of a node holding `machine` positives out of `total`.
pub fn gini(machine: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = machine as f64 / total as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// floor(sqrt(d)) features per node, at least one.
    Sqrt,
    All,
}

impl MaxFeatures {
    fn count(self, dim: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((dim as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl RfConfig {
    pub fn new(n_trees: usize, max_depth: usize, seed: u64) -> Self {
        Self {
            n_trees,
            max_depth,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed,
        }
    }
}

/// Nodes are stored flat; children always have larger indices than their
/// parent and the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        /// Fraction of `Machine` samples that reached this leaf.
        fraction: f64,
    },
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { fraction } => return fraction,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn validate(&self, dim: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("empty tree".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                TreeNode::Leaf { fraction } => {
                    if !(0.0..=1.0).contains(&fraction) {
                        return Err(format!("leaf fraction {fraction} outside [0, 1]"));
                    }
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= dim || !threshold.is_finite() {
                        return Err("invalid split".into());
                    }
                    let n = self.nodes.len();
                    if left <= i || right <= i || left >= n || right >= n || left == right {
                        return Err("invalid child index".into());
                    }
                }
            }
        }
        Ok(())
    }
}

struct Grower<'a> {
    data: &'a Dataset,
    max_depth: usize,
    n_features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Grower<'_> {
    fn machine_count(&self, idx: &[usize]) -> usize {
        idx.iter().filter(|&&i| self.data.labels()[i].is_machine()).count()
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let at = self.nodes.len();
        let machine = self.machine_count(idx);
        let fraction = machine as f64 / idx.len() as f64;
        self.nodes.push(TreeNode::Leaf { fraction });
        if machine == 0 || machine == idx.len() || depth >= self.max_depth {
            return at;
        }
        let Some(split) = self.best_split(idx) else {
            return at;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.data.row(i)[split.feature] <= split.threshold);
        let left = self.grow(&left_idx, depth + 1);
        let right = self.grow(&right_idx, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }

    /// Best split over `n_features` randomly drawn features. If none of
    /// them can split the node, further features are tried in the same
    /// random order until one can.
    fn best_split(&mut self, idx: &[usize]) -> Option<Split> {
        let mut features: Vec<usize> = (0..self.data.dim()).collect();
        features.shuffle(&mut self.rng);
        let mut best: Option<Split> = None;
        for (k, &f) in features.iter().enumerate() {
            if k >= self.n_features && best.is_some() {
                break;
            }
            if let Some(s) = self.best_split_on(idx, f) {
                if best.as_ref().is_none_or(|b| s.impurity < b.impurity) {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn best_split_on(&self, idx: &[usize], feature: usize) -> Option<Split> {
        let mut sorted: Vec<(f64, bool)> = idx
            .iter()
            .map(|&i| (self.data.row(i)[feature], self.data.labels()[i].is_machine()))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = sorted.len();
        let total_machine = sorted.iter().filter(|s| s.1).count();
        let mut left_machine = 0;
        let mut best: Option<Split> = None;
        for k in 1..n {
            if sorted[k - 1].1 {
                left_machine += 1;
            }
            let (a, b) = (sorted[k - 1].0, sorted[k].0);
            if a == b {
                continue;
            }
            let right_machine = total_machine - left_machine;
            let impurity = (k as f64 * gini(left_machine, k)
                + (n - k) as f64 * gini(right_machine, n - k))
                / n as f64;
            if best.as_ref().is_none_or(|s| impurity < s.impurity) {
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(Split {
                    feature,
                    threshold,
                    impurity,
                });
            }
        }
        best
    }
}

fn grow_tree(data: &Dataset, config: &RfConfig, tree_seed: u64) -> DecisionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
    let n = data.len();
    let idx: Vec<usize> = if config.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut grower = Grower {
        data,
        max_depth: config.max_depth,
        n_features: config.max_features.count(data.dim()),
        rng,
        nodes: Vec::new(),
    };
    grower.grow(&idx, 0);
    DecisionTree {
        nodes: grower.nodes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub trees: Vec<DecisionTree>,
    pub n_trees: usize,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
    pub dim: usize,
}

impl RfModel {
    /// Mean leaf `Machine` fraction across trees.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.score(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.trees.is_empty() || self.trees.len() != self.n_trees {
            return Err("tree count disagrees with n_trees".into());
        }
        self.trees.iter().try_for_each(|t| t.validate(self.dim))
    }
}

pub fn train_random_forest(
    data: &Dataset,
    n_trees: usize,
    max_depth: usize,
    seed: u64,
) -> Result<RfModel, ClassifierError> {
    train_random_forest_with(data, &RfConfig::new(n_trees, max_depth, seed))
}

/// Trees are grown in parallel; tree `k` uses seed `seed + k`, so the
/// result equals sequential construction.
pub fn train_random_forest_with(
    data: &Dataset,
    config: &RfConfig,
) -> Result<RfModel, ClassifierError> {
    if config.n_trees == 0 {
        return Err(ClassifierError::InvalidParameter("n_trees must be >= 1".into()));
    }
    if config.max_depth == 0 {
        return Err(ClassifierError::InvalidParameter("max_depth must be >= 1".into()));
    }
    data.require_both_classes()?;
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|k| grow_tree(data, config, config.seed.wrapping_add(k as u64)))
        .collect();
    Ok(RfModel {
        trees,
        n_trees: config.n_trees,
        max_depth: config.max_depth,
        max_features: config.max_features,
        bootstrap: config.bootstrap,
        seed: config.seed,
        dim: data.dim(),
    })
}
