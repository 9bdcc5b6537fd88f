//! Bagged decision-tree ensembles.
//!
//! Each tree is grown on a bootstrap resample of the training rows, choosing
//! the best axis-aligned cut among `ceil(sqrt(f))` randomly drawn features at
//! every node (Gini impurity for classification, squared error for
//! regression). Tree `t` draws from its own RNG stream derived from the master
//! seed and `t`, so the fitted ensemble does not depend on the order in which
//! trees are trained.
//!
//! ```
//! use moodsig::forest::{ForestParams, Targets, TreeEnsemble};
//!
//! let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
//! let y = [0, 0, 1, 1];
//! let model = TreeEnsemble::fit(&x, Targets::Classes { labels: &y, n_classes: 2 },
//!                               &ForestParams::default(), 7).unwrap();
//! assert_eq!(model.predict_class(&[2.5]).unwrap(), 1);
//! ```

mod tree;

use rayon::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use tree::{Node, Tree};
use tree::{TargetRef, TreeBuilder};

use crate::error::{Error, Result};
use crate::seed;

pub const FOREST_FORMAT: &str = "moodsig-forest";
pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Split candidates per node; `None` means `ceil(sqrt(feature_count))`.
    pub max_features: Option<usize>,
    /// Train each tree on a bootstrap resample (otherwise on all rows).
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("forest needs at least one tree"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be positive"));
        }
        if self.max_features == Some(0) {
            return Err(Error::invalid("max_features must be positive"));
        }
        Ok(())
    }

    pub fn features_per_split(&self, feature_count: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (feature_count as f64).sqrt().ceil() as usize)
            .clamp(1, feature_count.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Classify { n_classes: usize },
    Regress,
}

/// Training targets for [`TreeEnsemble::fit`].
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Classes { labels: &'a [usize], n_classes: usize },
    Values(&'a [f64]),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Values(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Prediction {
    Class(usize),
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    mode: Mode,
    feature_count: usize,
    params: ForestParams,
    seed: u64,
    trees: Vec<Tree>,
}

#[derive(Serialize, Deserialize)]
struct ForestFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    ensemble: TreeEnsemble,
}

impl TreeEnsemble {
    pub fn fit(x: &[Vec<f64>], targets: Targets<'_>, params: &ForestParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let m = x.len();
        if m < 2 {
            return Err(Error::invalid(format!("need at least 2 training rows, got {m}")));
        }
        if targets.len() != m {
            return Err(Error::invalid(format!(
                "{m} feature rows but {} targets",
                targets.len()
            )));
        }
        let feature_count = x[0].len();
        if feature_count == 0 {
            return Err(Error::invalid("feature rows are empty"));
        }
        for (i, row) in x.iter().enumerate() {
            if row.len() != feature_count {
                return Err(Error::invalid(format!("row {i} has {} features, expected {feature_count}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("row {i} has non-finite features")));
            }
        }
        let (mode, target) = match targets {
            Targets::Classes { labels, n_classes } => {
                if n_classes == 0 {
                    return Err(Error::invalid("n_classes must be positive"));
                }
                if let Some(bad) = labels.iter().find(|&&l| l >= n_classes) {
                    return Err(Error::invalid(format!("label {bad} outside 0..{n_classes}")));
                }
                (Mode::Classify { n_classes }, TargetRef::Classes { labels, n_classes })
            }
            Targets::Values(values) => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("regression targets must be finite"));
                }
                (Mode::Regress, TargetRef::Values(values))
            }
        };

        let builder = TreeBuilder {
            x,
            target,
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            max_features: params.features_per_split(feature_count),
        };
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed, "forest-tree", t as u64);
                let samples: Vec<usize> = if params.bootstrap {
                    (0..m).map(|_| rng.random_range(0..m)).collect()
                } else {
                    (0..m).collect()
                };
                builder.build(samples, &mut rng)
            })
            .collect();

        Ok(Self {
            mode,
            feature_count,
            params: params.clone(),
            seed,
            trees,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_count {
            return Err(Error::invalid(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.feature_count
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("input has non-finite features"));
        }
        Ok(())
    }

    /// Mean over trees of the leaf class frequencies.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let Mode::Classify { n_classes } = self.mode else {
            return Err(Error::invalid("predict_proba called on a regression forest"));
        };
        self.check_input(x)?;
        let mut probs = vec![0.0; n_classes];
        for tree in &self.trees {
            let counts = tree.leaf_value(x);
            let total: f64 = counts.iter().sum();
            for (p, c) in probs.iter_mut().zip(counts) {
                *p += c / total;
            }
        }
        let n = self.trees.len() as f64;
        probs.iter_mut().for_each(|p| *p /= n);
        Ok(probs)
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    pub fn predict_value(&self, x: &[f64]) -> Result<f64> {
        if self.mode != Mode::Regress {
            return Err(Error::invalid("predict_value called on a classification forest"));
        }
        self.check_input(x)?;
        let sum: f64 = self.trees.iter().map(|t| t.leaf_value(x)[0]).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        match self.mode {
            Mode::Classify { .. } => self.predict_class(x).map(Prediction::Class),
            Mode::Regress => self.predict_value(x).map(Prediction::Value),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ForestFile {
            format: FOREST_FORMAT.to_string(),
            version: FOREST_FORMAT_VERSION,
            ensemble: self.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ForestFile = serde_json::from_str(text)?;
        if file.format != FOREST_FORMAT {
            return Err(Error::Format(format!("expected {FOREST_FORMAT:?}, found {:?}", file.format)));
        }
        if file.version != FOREST_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported forest version {}", file.version)));
        }
        file.ensemble.validate()?;
        Ok(file.ensemble)
    }

    fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Format("forest has no trees".into()));
        }
        let leaf_len = match self.mode {
            Mode::Classify { n_classes } => n_classes,
            Mode::Regress => 1,
        };
        for tree in &self.trees {
            let n = tree.nodes.len();
            if n == 0 {
                return Err(Error::Format("tree has no nodes".into()));
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                match node {
                    Node::Leaf { value } => {
                        if value.len() != leaf_len || value.iter().any(|v| !v.is_finite()) {
                            return Err(Error::Format("malformed leaf".into()));
                        }
                        if leaf_len > 1 && (value.iter().any(|&c| c < 0.0) || value.iter().sum::<f64>() <= 0.0) {
                            return Err(Error::Format("leaf class counts must be nonnegative with a positive total".into()));
                        }
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        if *feature >= self.feature_count || !threshold.is_finite() {
                            return Err(Error::Format("split references an unknown feature".into()));
                        }
                        if *left <= i || *right <= i || *left >= n || *right >= n {
                            return Err(Error::Format("split children out of order".into()));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Index of the largest entry, ties going to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Vec<f64>>, Vec<usize>) {
        let x = (0..20).map(|i| vec![i as f64]).collect();
        let y = (0..20).map(|i| usize::from(i >= 10)).collect();
        (x, y)
    }

    #[test]
    fn separable_training_accuracy() {
        let (x, y) = separable();
        let f = TreeEnsemble::fit(&x, Targets::Classes { labels: &y, n_classes: 2 }, &ForestParams::default(), 1).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(f.predict_class(xi).unwrap(), yi);
        }
    }

    #[test]
    fn constant_regression() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * 7 % 3) as f64]).collect();
        let y = vec![4.25; 10];
        let f = TreeEnsemble::fit(&x, Targets::Values(&y), &ForestParams::default(), 3).unwrap();
        for v in [[0.0, 0.0], [100.0, -5.0], [3.5, 1.0]] {
            assert_eq!(f.predict_value(&v).unwrap(), 4.25);
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = separable();
        let t = Targets::Classes { labels: &y, n_classes: 2 };
        let a = TreeEnsemble::fit(&x, t, &ForestParams::default(), 11).unwrap();
        let b = TreeEnsemble::fit(&x, t, &ForestParams::default(), 11).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn pure_single_tree_is_one_hot() {
        let (x, y) = separable();
        let params = ForestParams {
            n_trees: 1,
            ..ForestParams::default()
        };
        let f = TreeEnsemble::fit(&x, Targets::Classes { labels: &y, n_classes: 2 }, &params, 5).unwrap();
        let p = f.predict_proba(&[0.0]).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.0]), 0);
        assert_eq!(argmax(&[0.0, 0.4, 0.4]), 1);
    }

    #[test]
    fn regression_averages_trees() {
        let leaf = |v: f64| Tree {
            nodes: vec![Node::Leaf { value: vec![v] }],
        };
        let f = TreeEnsemble {
            mode: Mode::Regress,
            feature_count: 1,
            params: ForestParams::default(),
            seed: 0,
            trees: vec![leaf(4.0), leaf(6.0)],
        };
        assert_eq!(f.predict(&[0.0]).unwrap(), Prediction::Value(5.0));
    }

    #[test]
    fn errors() {
        let (x, y) = separable();
        let p = ForestParams::default();
        assert!(TreeEnsemble::fit(&x[..1], Targets::Classes { labels: &y[..1], n_classes: 2 }, &p, 0).is_err());
        let mut bad = x.clone();
        bad[3][0] = f64::NAN;
        assert!(matches!(
            TreeEnsemble::fit(&bad, Targets::Classes { labels: &y, n_classes: 2 }, &p, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(TreeEnsemble::fit(&x, Targets::Classes { labels: &y, n_classes: 1 }, &p, 0).is_err());

        let reg = TreeEnsemble::fit(&x, Targets::Values(&vec![1.0; 20]), &p, 0).unwrap();
        assert!(reg.predict_proba(&[1.0]).is_err());
        let clf = TreeEnsemble::fit(&x, Targets::Classes { labels: &y, n_classes: 2 }, &p, 0).unwrap();
        assert!(clf.predict_value(&[1.0]).is_err());
        assert!(clf.predict_proba(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let (x, y) = separable();
        let f = TreeEnsemble::fit(&x, Targets::Classes { labels: &y, n_classes: 2 }, &ForestParams::default(), 9).unwrap();
        let text = f.to_json().unwrap();
        assert_eq!(TreeEnsemble::from_json(&text).unwrap(), f);
        let wrong = text.replacen("\"version\":1", "\"version\":99", 1);
        assert!(matches!(TreeEnsemble::from_json(&wrong), Err(Error::Format(_))));
    }
}
