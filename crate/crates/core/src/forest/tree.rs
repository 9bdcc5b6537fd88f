use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One node of a fitted tree. Children are indices into the tree's node list.
///
/// Leaves hold class counts in classification mode and a single mean in
/// regression mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    /// Leaf payload reached by `x`; samples with `x[f] <= threshold` go left.
    pub fn leaf_value(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum TargetRef<'a> {
    Classes { labels: &'a [usize], n_classes: usize },
    Values(&'a [f64]),
}

pub(crate) struct TreeBuilder<'a> {
    pub x: &'a [Vec<f64>],
    pub target: TargetRef<'a>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl TreeBuilder<'_> {
    pub fn build<R: Rng + ?Sized>(&self, mut samples: Vec<usize>, rng: &mut R) -> Tree {
        let mut nodes = Vec::new();
        self.grow(&mut samples, 0, rng, &mut nodes);
        Tree { nodes }
    }

    fn grow<R: Rng + ?Sized>(
        &self,
        samples: &mut [usize],
        depth: usize,
        rng: &mut R,
        nodes: &mut Vec<Node>,
    ) -> usize {
        let id = nodes.len();
        nodes.push(Node::Leaf { value: self.leaf_value(samples) });

        let depth_exhausted = self.max_depth.is_some_and(|d| depth >= d);
        if depth_exhausted || samples.len() < 2 * self.min_samples_leaf || self.is_pure(samples) {
            return id;
        }
        let Some(best) = self.find_split(samples, rng) else {
            return id;
        };

        let mut boundary = 0;
        for i in 0..samples.len() {
            if self.x[samples[i]][best.feature] <= best.threshold {
                samples.swap(i, boundary);
                boundary += 1;
            }
        }
        let (lo, hi) = samples.split_at_mut(boundary);
        let left = self.grow(lo, depth + 1, rng, nodes);
        let right = self.grow(hi, depth + 1, rng, nodes);
        nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn leaf_value(&self, samples: &[usize]) -> Vec<f64> {
        match self.target {
            TargetRef::Classes { labels, n_classes } => {
                let mut counts = vec![0.0; n_classes];
                for &s in samples {
                    counts[labels[s]] += 1.0;
                }
                counts
            }
            TargetRef::Values(values) => {
                let sum: f64 = samples.iter().map(|&s| values[s]).sum();
                vec![sum / samples.len() as f64]
            }
        }
    }

    fn is_pure(&self, samples: &[usize]) -> bool {
        match self.target {
            TargetRef::Classes { labels, .. } => {
                let first = labels[samples[0]];
                samples.iter().all(|&s| labels[s] == first)
            }
            TargetRef::Values(values) => {
                let first = values[samples[0]];
                samples.iter().all(|&s| values[s] == first)
            }
        }
    }

    /// Examines features in random order until `max_features` non-constant
    /// ones have been scored. Constant features do not count toward the quota.
    fn find_split<R: Rng + ?Sized>(&self, samples: &[usize], rng: &mut R) -> Option<BestSplit> {
        let n_features = self.x[0].len();
        let mut order: Vec<usize> = (0..n_features).collect();
        order.shuffle(rng);

        let mut best: Option<BestSplit> = None;
        let mut scored = 0;
        let mut column: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
        for feature in order {
            if scored >= self.max_features {
                break;
            }
            column.clear();
            column.extend(samples.iter().map(|&s| (self.x[s][feature], s)));
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            if column[0].0 == column[column.len() - 1].0 {
                continue;
            }
            scored += 1;
            if let Some((threshold, score)) = self.best_threshold(&column) {
                if best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }

    /// Best cut of a sorted column. The score is the quantity whose
    /// maximisation minimises weighted child impurity: `Σ_child Σ_k c_k² / n`
    /// for Gini and `Σ_child sum² / n` for squared error.
    fn best_threshold(&self, column: &[(f64, usize)]) -> Option<(f64, f64)> {
        let n = column.len();
        let min_leaf = self.min_samples_leaf.max(1);
        let mut best: Option<(f64, f64)> = None;
        match self.target {
            TargetRef::Classes { labels, n_classes } => {
                let mut right = vec![0.0f64; n_classes];
                for &(_, s) in column {
                    right[labels[s]] += 1.0;
                }
                let mut left = vec![0.0f64; n_classes];
                let mut left_sq = 0.0;
                let mut right_sq: f64 = right.iter().map(|c| c * c).sum();
                for i in 1..n {
                    let k = labels[column[i - 1].1];
                    left_sq += 2.0 * left[k] + 1.0;
                    right_sq -= 2.0 * right[k] - 1.0;
                    left[k] += 1.0;
                    right[k] -= 1.0;
                    if i < min_leaf || n - i < min_leaf || column[i - 1].0 == column[i].0 {
                        continue;
                    }
                    let score = left_sq / i as f64 + right_sq / (n - i) as f64;
                    if best.is_none_or(|(_, b)| score > b) {
                        best = Some((midpoint(column[i - 1].0, column[i].0), score));
                    }
                }
            }
            TargetRef::Values(values) => {
                let total: f64 = column.iter().map(|&(_, s)| values[s]).sum();
                let mut left_sum = 0.0;
                for i in 1..n {
                    left_sum += values[column[i - 1].1];
                    if i < min_leaf || n - i < min_leaf || column[i - 1].0 == column[i].0 {
                        continue;
                    }
                    let right_sum = total - left_sum;
                    let score = left_sum * left_sum / i as f64 + right_sum * right_sum / (n - i) as f64;
                    if best.is_none_or(|(_, b)| score > b) {
                        best = Some((midpoint(column[i - 1].0, column[i].0), score));
                    }
                }
            }
        }
        best
    }
}

/// Midpoint of two distinct sorted values, guaranteed to separate them.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}
