//! Random forest of CART trees with Gini impurity, used as the meta-learner.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::par::map_indexed;
use crate::prep::check_binary_labels;
use crate::rng::task_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows every tree until its leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    /// `None` uses ⌈√d⌉.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: None, features_per_split: None, seed: 0 }
    }
}

/// `1 − Σ (nₖ/n)²` over the two classes.
pub fn gini(counts: [u32; 2]) -> Result<f64> {
    let n = f64::from(counts[0]) + f64::from(counts[1]);
    if n == 0.0 {
        return Err(Error::Empty("tree node"));
    }
    Ok(gini_unchecked(f64::from(counts[0]), f64::from(counts[1])))
}

fn gini_unchecked(n0: f64, n1: f64) -> f64 {
    let n = n0 + n1;
    let (p0, p1) = (n0 / n, n1 / n);
    1.0 - p0 * p0 - p1 * p1
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Node {
    Leaf {
        counts: [u32; 2],
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

impl Node {
    fn leaf_label(counts: [u32; 2]) -> u8 {
        u8::from(counts[1] >= counts[0])
    }

    fn attack_fraction(counts: [u32; 2]) -> f64 {
        f64::from(counts[1]) / (f64::from(counts[0]) + f64::from(counts[1]))
    }
}

/// Nodes stored flat; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

impl DecisionTree {
    fn leaf_counts(&self, x: &[f64]) -> [u32; 2] {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Majority class of the leaf reached by `x`, ties to attack.
    pub fn predict(&self, x: &[f64]) -> u8 {
        Node::leaf_label(self.leaf_counts(x))
    }

    /// Attack fraction of the leaf reached by `x`.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        Node::attack_fraction(self.leaf_counts(x))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves_are_pure(&self) -> bool {
        self.nodes.iter().all(|n| match n {
            Node::Leaf { counts } => counts[0] == 0 || counts[1] == 0,
            Node::Split { .. } => true,
        })
    }
}

struct Grower<'a, R> {
    x: &'a Matrix,
    y: &'a [u8],
    max_depth: Option<usize>,
    mtry: usize,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

struct Candidate {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl<R: Rng> Grower<'_, R> {
    fn counts(&self, idx: &[usize]) -> [u32; 2] {
        let n1 = idx.iter().filter(|&&i| self.y[i] == 1).count() as u32;
        [idx.len() as u32 - n1, n1]
    }

    // Best threshold on one feature, or None if the feature is constant here.
    fn best_on_feature(&self, idx: &[usize], feature: usize, total: [u32; 2]) -> Option<Candidate> {
        let mut vals: Vec<(f64, u8)> = idx.iter().map(|&i| (self.x.get(i, feature), self.y[i])).collect();
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        if vals[0].0 == vals[vals.len() - 1].0 {
            return None;
        }
        let n = vals.len() as f64;
        let mut left = [0u32; 2];
        let mut best: Option<Candidate> = None;
        for w in 0..vals.len() - 1 {
            left[usize::from(vals[w].1)] += 1;
            let (a, b) = (vals[w].0, vals[w + 1].0);
            if a == b {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let nl = f64::from(left[0] + left[1]);
            let nr = f64::from(right[0] + right[1]);
            let impurity = nl / n * gini_unchecked(f64::from(left[0]), f64::from(left[1]))
                + nr / n * gini_unchecked(f64::from(right[0]), f64::from(right[1]));
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            if best.as_ref().map_or(true, |c| impurity < c.impurity) {
                best = Some(Candidate { impurity, feature, threshold });
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        if counts[0] == 0 || counts[1] == 0 || self.max_depth.is_some_and(|d| depth >= d) {
            return at;
        }
        let d = self.x.n_cols();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(self.rng);
        // keep drawing past `mtry` while the drawn features are constant
        let mut best: Option<Candidate> = None;
        let mut usable = 0;
        for &f in &order {
            if usable >= self.mtry {
                break;
            }
            if let Some(c) = self.best_on_feature(&idx, f, counts) {
                usable += 1;
                let better = match &best {
                    None => true,
                    Some(b) => {
                        c.impurity < b.impurity
                            || (c.impurity == b.impurity
                                && (c.feature, c.threshold).partial_cmp(&(b.feature, b.threshold))
                                    == Some(core::cmp::Ordering::Less))
                    }
                };
                if better {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else {
            return at;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x.get(i, split.feature) <= split.threshold);
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[at] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        at
    }
}

/// Grows one tree on the rows listed in `idx` (duplicates allowed).
pub fn fit_tree<R: Rng>(
    x: &Matrix,
    y: &[u8],
    idx: Vec<usize>,
    max_depth: Option<usize>,
    mtry: usize,
    rng: &mut R,
) -> Result<DecisionTree> {
    if idx.is_empty() {
        return Err(Error::Empty("tree sample"));
    }
    let mut g = Grower { x, y, max_depth, mtry: mtry.max(1), rng, nodes: Vec::new() };
    g.grow(idx, 0);
    Ok(DecisionTree { nodes: g.nodes, n_features: x.n_cols() })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Forest {
    pub config: ForestConfig,
    pub trees: Vec<DecisionTree>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestPrediction {
    pub labels: Vec<u8>,
    pub probs: Vec<f64>,
}

fn mtry_for(config: &ForestConfig, d: usize) -> usize {
    config.features_per_split.unwrap_or_else(|| libm::ceil(libm::sqrt(d as f64)) as usize).clamp(1, d)
}

/// Bootstrap-aggregated trees. Tree `t` draws its bootstrap sample and
/// feature subsets from stream `t` of the configured seed.
pub fn fit_forest(x: &Matrix, y: &[u8], config: &ForestConfig) -> Result<Forest> {
    let m = x.n_rows();
    if m != y.len() {
        return Err(Error::DimensionMismatch { expected: m, actual: y.len() });
    }
    if m < 2 {
        return Err(Error::TooFewSamples { class: 0, count: m, needed: 2 });
    }
    if x.n_cols() == 0 {
        return Err(Error::Empty("meta-feature columns"));
    }
    if config.n_trees == 0 {
        return Err(Error::InvalidArgument("forest needs at least one tree".into()));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("forest input"));
    }
    check_binary_labels(y)?;
    if y.iter().all(|&v| v == y[0]) {
        log::warn!("forest trained on a single class; predictions are constant");
    }
    let mtry = mtry_for(config, x.n_cols());
    let trees = map_indexed(config.n_trees, |t| {
        let mut rng = task_rng(config.seed, t as u64);
        let sample: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
        fit_tree(x, y, sample, config.max_depth, mtry, &mut rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Forest { config: *config, trees })
}

impl Forest {
    pub fn n_features(&self) -> usize {
        self.trees.first().map_or(0, |t| t.n_features)
    }

    /// Majority vote (ties to attack) and mean leaf attack fraction.
    pub fn predict(&self, x: &Matrix) -> Result<ForestPrediction> {
        if x.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), actual: x.n_cols() });
        }
        let n_trees = self.trees.len();
        let per_row = map_indexed(x.n_rows(), |i| {
            let r = x.row(i);
            let votes = self.trees.iter().filter(|t| t.predict(r) == 1).count();
            let prob = self.trees.iter().map(|t| t.predict_proba(r)).sum::<f64>() / n_trees as f64;
            (u8::from(2 * votes >= n_trees), prob)
        });
        let (labels, probs) = per_row.into_iter().unzip();
        Ok(ForestPrediction { labels, probs })
    }
}

pub fn forest_predict(forest: &Forest, x: &Matrix) -> Result<ForestPrediction> {
    forest.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gini_values() {
        assert_eq!(gini([10, 0]).unwrap(), 0.0);
        assert_eq!(gini([2, 2]).unwrap(), 0.5);
        assert!((gini([3, 1]).unwrap() - 0.375).abs() < 1e-15);
        assert!(gini([0, 0]).is_err());
    }

    #[test]
    fn aligned_feature_is_fit_exactly() {
        let rows: Vec<[f64; 1]> = (0..40).map(|i| [i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i >= 17)).collect();
        let f = fit_forest(&x, &y, &ForestConfig { n_trees: 25, ..ForestConfig::default() }).unwrap();
        assert_eq!(f.predict(&x).unwrap().labels, y);
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = xor_set(100, 1);
        let cfg = ForestConfig { n_trees: 10, seed: 5, ..ForestConfig::default() };
        assert_eq!(fit_forest(&x, &y, &cfg).unwrap(), fit_forest(&x, &y, &cfg).unwrap());
        let other = ForestConfig { seed: 6, ..cfg };
        assert_ne!(fit_forest(&x, &y, &cfg).unwrap(), fit_forest(&x, &y, &other).unwrap());
    }

    fn xor_set(m: usize, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<[f64; 2]> = (0..m).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let y = rows.iter().map(|r| u8::from((r[0] > 0.0) != (r[1] > 0.0))).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn learns_xor() {
        let (x, y) = xor_set(200, 2);
        let (xt, yt) = xor_set(500, 3);
        let f = fit_forest(&x, &y, &ForestConfig::default()).unwrap();
        let pred = f.predict(&xt).unwrap();
        let acc = pred.labels.iter().zip(&yt).filter(|(a, b)| a == b).count() as f64 / 500.0;
        assert!(acc >= 0.95, "xor accuracy {acc}");
    }

    #[test]
    fn unrestricted_tree_has_zero_training_error() {
        let (x, y) = xor_set(150, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree = fit_tree(&x, &y, (0..150).collect(), None, 1, &mut rng).unwrap();
        assert!(tree.leaves_are_pure());
        for (r, &t) in x.rows().zip(&y) {
            assert_eq!(tree.predict(r), t);
        }
        let shallow = fit_tree(&x, &y, (0..150).collect(), Some(1), 2, &mut rng).unwrap();
        assert!(shallow.depth() <= 1);
    }

    #[test]
    fn even_split_ties_to_attack() {
        let leaf0 = DecisionTree { nodes: vec![Node::Leaf { counts: [3, 0] }], n_features: 1 };
        let leaf1 = DecisionTree { nodes: vec![Node::Leaf { counts: [0, 4] }], n_features: 1 };
        let mut trees = vec![leaf0; 50];
        trees.extend(vec![leaf1; 50]);
        let f = Forest { config: ForestConfig::default(), trees };
        let p = f.predict(&Matrix::from_rows(&[[0.0]]).unwrap()).unwrap();
        assert_eq!(p.labels, vec![1]);
        assert_eq!(p.probs, vec![0.5]);
    }

    #[test]
    fn unanimous_attack_vote() {
        let leaf = DecisionTree { nodes: vec![Node::Leaf { counts: [0, 2] }], n_features: 2 };
        let f = Forest { config: ForestConfig::default(), trees: vec![leaf; 7] };
        let p = f.predict(&Matrix::from_rows(&[[0.0, 1.0]]).unwrap()).unwrap();
        assert_eq!((p.labels[0], p.probs[0]), (1, 1.0));
        assert!(f.predict(&Matrix::from_rows(&[[0.0]]).unwrap()).is_err());
    }

    #[test]
    fn vote_matches_probability_with_pure_leaves() {
        let (x, y) = xor_set(120, 8);
        let (xt, _) = xor_set(300, 9);
        for n_trees in [10, 11, 40] {
            let f = fit_forest(&x, &y, &ForestConfig { n_trees, seed: 3, ..ForestConfig::default() }).unwrap();
            assert!(f.trees.iter().all(DecisionTree::leaves_are_pure));
            let p = f.predict(&xt).unwrap();
            for (l, pr) in p.labels.iter().zip(&p.probs) {
                assert!((0.0..=1.0).contains(pr));
                assert_eq!(*l, u8::from(*pr >= 0.5));
            }
        }
    }

    #[test]
    fn single_class_gives_constant_predictor() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let f = fit_forest(&x, &[0, 0, 0], &ForestConfig { n_trees: 3, ..ForestConfig::default() }).unwrap();
        let p = f.predict(&x).unwrap();
        assert_eq!(p.labels, vec![0, 0, 0]);
        assert_eq!(p.probs, vec![0.0; 3]);
    }

    #[test]
    fn constant_features_make_a_leaf() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = fit_tree(&x, &[0, 1, 1], vec![0, 1, 2], None, 1, &mut rng).unwrap();
        assert_eq!(tree.nodes, vec![Node::Leaf { counts: [1, 2] }]);
    }
}
