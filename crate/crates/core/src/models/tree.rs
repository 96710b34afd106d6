//! CART trees stored as a flat node array.
//!
//! Classification trees minimise weighted Gini impurity and store the
//! weighted positive fraction in each leaf. Regression trees (boosting stages)
//! minimise weighted squared error. Candidate thresholds are midpoints between
//! consecutive distinct sorted values; equal-cost candidates resolve to the
//! lowest feature index, then the lowest threshold.

use crate::error::{Error, Result};
use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One node. Leaves have no feature and no children; every node records the
/// training weight (`coverage`) that reached it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature_index: Option<usize>,
    pub threshold: f64,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub leaf_value: f64,
    #[serde(default)]
    pub coverage: f64,
    #[serde(default)]
    pub n_samples: usize,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.left.is_none()
    }

    fn leaf(value: f64, coverage: f64, n_samples: usize) -> Self {
        Node {
            feature_index: None,
            threshold: 0.0,
            left: None,
            right: None,
            leaf_value: value,
            coverage,
            n_samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    All,
    /// `ceil(sqrt(d))` features per split.
    SqrtD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub feature_subsample: FeatureSubsample,
    pub rng_seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            feature_subsample: FeatureSubsample::All,
            rng_seed: 0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::Config(format!(
                "min_samples_split must be at least 2, got {}",
                self.min_samples_split
            )));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Config("max_depth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// A single-leaf tree.
    pub fn constant(n_features: usize, value: f64, coverage: f64) -> Self {
        Self {
            n_features,
            nodes: vec![Node::leaf(value, coverage, coverage as usize)],
        }
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match (node.feature_index, node.left, node.right) {
                (Some(f), Some(l), Some(r)) => i = if x[f] <= node.threshold { l } else { r },
                _ => return i,
            }
        }
    }

    /// Leaf value reached by `x`. Callers check the dimensionality.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_index(x)].leaf_value
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, i: usize) -> usize {
            match (t.nodes[i].left, t.nodes[i].right) {
                (Some(l), Some(r)) => 1 + walk(t, l).max(walk(t, r)),
                _ => 0,
            }
        }
        walk(self, 0)
    }

    /// Coverage-weighted mean leaf value: the output expected with no
    /// feature known.
    pub fn expected_value(&self) -> f64 {
        fn walk(t: &DecisionTree, i: usize) -> f64 {
            let n = &t.nodes[i];
            match (n.left, n.right) {
                (Some(l), Some(r)) => {
                    (t.nodes[l].coverage * walk(t, l) + t.nodes[r].coverage * walk(t, r)) / n.coverage
                }
                _ => n.leaf_value,
            }
        }
        walk(self, 0)
    }

    /// Structural checks used when loading persisted trees.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("invalid tree: {msg}")));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match (n.feature_index, n.left, n.right) {
                (None, None, None) => {
                    if !n.leaf_value.is_finite() {
                        return bad(format!("node {i} has non-finite value"));
                    }
                }
                (Some(f), Some(l), Some(r)) => {
                    if f >= self.n_features {
                        return bad(format!("node {i} splits on feature {f} >= {}", self.n_features));
                    }
                    if l <= i || r <= i || l >= self.nodes.len() || r >= self.nodes.len() || l == r {
                        return bad(format!("node {i} has invalid children ({l}, {r})"));
                    }
                    if !n.threshold.is_finite() {
                        return bad(format!("node {i} has non-finite threshold"));
                    }
                }
                _ => return bad(format!("node {i} is neither a leaf nor a complete split")),
            }
        }
        Ok(())
    }

    /// Recomputes internal-node values as coverage-weighted means of their
    /// children.
    pub(crate) fn refresh_internal_values(&mut self) {
        for i in (0..self.nodes.len()).rev() {
            if let (Some(l), Some(r)) = (self.nodes[i].left, self.nodes[i].right) {
                let (cl, cr) = (self.nodes[l].coverage, self.nodes[r].coverage);
                let total = cl + cr;
                if total > 0.0 {
                    self.nodes[i].leaf_value =
                        (cl * self.nodes[l].leaf_value + cr * self.nodes[r].leaf_value) / total;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Criterion {
    Gini,
    SquaredError,
}

/// Weighted sufficient statistics of a sample set.
#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    w: f64,
    /// Σ w·t
    wt: f64,
    /// Weight of samples with target 0 (classification only).
    w_zero: f64,
    n: usize,
}

impl Stats {
    fn add(&mut self, w: f64, t: f64) {
        self.w += w;
        self.wt += w * t;
        if t == 0.0 {
            self.w_zero += w;
        }
        self.n += 1;
    }

    fn sub(self, other: Stats) -> Stats {
        Stats {
            w: self.w - other.w,
            wt: self.wt - other.wt,
            w_zero: self.w_zero - other.w_zero,
            n: self.n - other.n,
        }
    }

    /// Child cost whose sum over children is minimised; proportional to the
    /// weighted impurity up to a constant that does not depend on the split.
    fn cost(&self, criterion: Criterion) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match criterion {
            Criterion::Gini => 2.0 * self.wt.max(0.0) * self.w_zero.max(0.0) / self.w,
            Criterion::SquaredError => -(self.wt * self.wt) / self.w,
        }
    }
}

/// Gini impurity `1 - Σ p_k²` of a binary node with the given class weights.
pub fn gini_impurity(w_pos: f64, w_neg: f64) -> f64 {
    let w = w_pos + w_neg;
    if w <= 0.0 {
        return 0.0;
    }
    let p = w_pos / w;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

struct Split {
    feature: usize,
    threshold: f64,
    cost: f64,
}

pub(crate) struct TreeBuilder<'a> {
    x: ArrayView2<'a, f64>,
    targets: &'a [f64],
    weights: &'a [f64],
    params: TreeParams,
    criterion: Criterion,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    pub(crate) fn new(
        x: ArrayView2<'a, f64>,
        targets: &'a [f64],
        weights: &'a [f64],
        params: TreeParams,
        criterion: Criterion,
    ) -> Self {
        Self {
            x,
            targets,
            weights,
            params,
            criterion,
            nodes: Vec::new(),
        }
    }

    /// Grows a tree over `indices` (duplicates allowed, e.g. a bootstrap).
    pub(crate) fn build(mut self, indices: &mut [usize], rng: &mut ChaCha8Rng) -> DecisionTree {
        self.grow(indices, 0, rng);
        DecisionTree {
            n_features: self.x.ncols(),
            nodes: self.nodes,
        }
    }

    fn stats(&self, indices: &[usize]) -> Stats {
        let mut s = Stats::default();
        for &i in indices {
            s.add(self.weights[i], self.targets[i]);
        }
        s
    }

    fn is_pure(&self, indices: &[usize], stats: &Stats) -> bool {
        match self.criterion {
            Criterion::Gini => stats.w_zero <= 0.0 || stats.w_zero >= stats.w,
            Criterion::SquaredError => {
                let first = self.targets[indices[0]];
                indices.iter().all(|&i| self.targets[i] == first)
            }
        }
    }

    fn grow(&mut self, indices: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let stats = self.stats(indices);
        let value = if stats.w > 0.0 { stats.wt / stats.w } else { 0.0 };
        self.nodes.push(Node::leaf(value, stats.w, indices.len()));

        let p = &self.params;
        let can_split = p.max_depth.is_none_or(|m| depth < m)
            && indices.len() >= p.min_samples_split
            && indices.len() >= 2 * p.min_samples_leaf
            && !self.is_pure(indices, &stats);
        if !can_split {
            return id;
        }
        let Some(split) = self.best_split(indices, &stats, rng) else {
            return id;
        };

        let x = self.x;
        let mut left: Vec<usize> = Vec::with_capacity(indices.len());
        let mut right: Vec<usize> = Vec::with_capacity(indices.len());
        for &i in indices.iter() {
            if x[[i, split.feature]] <= split.threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        let l = self.grow(&mut left, depth + 1, rng);
        let r = self.grow(&mut right, depth + 1, rng);
        let coverage = self.nodes[l].coverage + self.nodes[r].coverage;
        let node = &mut self.nodes[id];
        node.feature_index = Some(split.feature);
        node.threshold = split.threshold;
        node.left = Some(l);
        node.right = Some(r);
        node.coverage = coverage;
        id
    }

    fn candidate_features(&self, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
        let d = self.x.ncols();
        match self.params.feature_subsample {
            FeatureSubsample::All => ((0..d).collect(), Vec::new()),
            FeatureSubsample::SqrtD => {
                let m = ((d as f64).sqrt().ceil() as usize).clamp(1, d);
                let mut order: Vec<usize> = (0..d).collect();
                order.shuffle(rng);
                let rest = order.split_off(m);
                order.sort_unstable();
                (order, rest)
            }
        }
    }

    /// Best split over the sampled features; when none of them admits a
    /// valid split, the remaining features are tried in sampled order.
    fn best_split(&self, indices: &mut [usize], parent: &Stats, rng: &mut ChaCha8Rng) -> Option<Split> {
        let (primary, fallback) = self.candidate_features(rng);
        let mut best: Option<Split> = None;
        for &f in &primary {
            self.scan_feature(indices, parent, f, &mut best);
        }
        for &f in &fallback {
            if best.is_some() {
                break;
            }
            self.scan_feature(indices, parent, f, &mut best);
        }
        best
    }

    fn scan_feature(&self, indices: &mut [usize], parent: &Stats, f: usize, best: &mut Option<Split>) {
        let x = self.x;
        indices.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
        let msl = self.params.min_samples_leaf;
        let mut left = Stats::default();
        for k in 0..indices.len() - 1 {
            let i = indices[k];
            left.add(self.weights[i], self.targets[i]);
            let (a, b) = (x[[i, f]], x[[indices[k + 1], f]]);
            if a >= b || left.n < msl || parent.n - left.n < msl {
                continue;
            }
            let right = parent.sub(left);
            let cost = left.cost(self.criterion) + right.cost(self.criterion);
            if best.as_ref().is_none_or(|s| cost < s.cost) {
                let mid = a + (b - a) * 0.5;
                let threshold = if mid < b { mid } else { a };
                *best = Some(Split {
                    feature: f,
                    threshold,
                    cost,
                });
            }
        }
    }
}

pub(crate) fn check_shape(x: &ArrayView2<'_, f64>, n_targets: usize) -> Result<()> {
    if x.nrows() != n_targets {
        return Err(Error::Shape {
            expected: x.nrows(),
            actual: n_targets,
        });
    }
    if x.nrows() == 0 {
        return Err(Error::Size("cannot fit on zero rows".into()));
    }
    Ok(())
}

/// Fits a Gini classification tree. `sample_weights` defaults to all ones;
/// zero-weight samples are ignored.
pub fn fit_tree(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    sample_weights: Option<&[f64]>,
    params: &TreeParams,
) -> Result<DecisionTree> {
    check_shape(&x, y.len())?;
    params.validate()?;
    let ones;
    let weights = match sample_weights {
        Some(w) => {
            if w.len() != y.len() {
                return Err(Error::Shape {
                    expected: y.len(),
                    actual: w.len(),
                });
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().all(|&v| v == 0.0) {
                return Err(Error::Config("sample weights must be non-negative and not all zero".into()));
            }
            w
        }
        None => {
            ones = vec![1.0; y.len()];
            &ones
        }
    };
    let targets: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let mut indices: Vec<usize> = (0..y.len()).filter(|&i| weights[i] > 0.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    Ok(TreeBuilder::new(x, &targets, weights, *params, Criterion::Gini).build(&mut indices, &mut rng))
}

/// Fits a squared-error regression tree with unit weights.
pub(crate) fn fit_regression_tree(x: ArrayView2<'_, f64>, targets: &[f64], params: &TreeParams) -> Result<DecisionTree> {
    check_shape(&x, targets.len())?;
    params.validate()?;
    let weights = vec![1.0; targets.len()];
    let mut indices: Vec<usize> = (0..targets.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    Ok(TreeBuilder::new(x, targets, &weights, *params, Criterion::SquaredError).build(&mut indices, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    #[test]
    fn gini_hand_value() {
        assert_abs_diff_eq!(gini_impurity(3.0, 1.0), 0.375, epsilon = 1e-15);
        assert_eq!(gini_impurity(4.0, 0.0), 0.0);
    }

    #[test]
    fn pure_input_gives_single_leaf() {
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 0.0]];
        let t = fit_tree(x.view(), &[1, 1, 1], None, &TreeParams::default()).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.nodes[0].leaf_value, 1.0);
    }

    #[test]
    fn xor_depth_two_is_exact() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [0u8, 1, 1, 0];
        let params = TreeParams {
            max_depth: Some(2),
            ..Default::default()
        };
        let t = fit_tree(x.view(), &y, None, &params).unwrap();
        for (i, row) in x.outer_iter().enumerate() {
            assert_eq!(t.predict(row.as_slice().unwrap()), f64::from(y[i]));
        }
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn midpoint_thresholds_and_tie_break() {
        // Both features separate perfectly; feature 0 must win.
        let x = array![[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0]];
        let t = fit_tree(x.view(), &[0, 0, 1, 1], None, &TreeParams::default()).unwrap();
        assert_eq!(t.nodes[0].feature_index, Some(0));
        assert_eq!(t.nodes[0].threshold, 2.5);
    }

    #[test]
    fn weights_shift_the_leaf_value() {
        let x = array![[0.0], [0.0], [0.0]];
        let t = fit_tree(x.view(), &[1, 0, 0], Some(&[2.0, 1.0, 1.0]), &TreeParams::default()).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_abs_diff_eq!(t.nodes[0].leaf_value, 0.5);
        assert_eq!(t.nodes[0].coverage, 4.0);
    }

    #[test]
    fn bad_inputs() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(fit_tree(x.view(), &[0], None, &TreeParams::default()), Err(Error::Shape { .. })));
        assert!(fit_tree(x.view(), &[0, 1], Some(&[0.0, 0.0]), &TreeParams::default()).is_err());
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(matches!(fit_tree(empty.view(), &[], None, &TreeParams::default()), Err(Error::Size(_))));
    }

    #[test]
    fn min_samples_leaf_respected() {
        let x = Array2::from_shape_fn((20, 1), |(i, _)| i as f64);
        let y: Vec<u8> = (0..20).map(|i| u8::from(i % 3 == 0)).collect();
        let params = TreeParams {
            min_samples_leaf: 4,
            ..Default::default()
        };
        let t = fit_tree(x.view(), &y, None, &params).unwrap();
        assert!(t.nodes.iter().filter(|n| n.is_leaf()).all(|n| n.n_samples >= 4));
    }

    proptest! {
        #[test]
        fn coverage_sums_and_leaf_bounds(
            rows in prop::collection::vec((0u8..5, 0u8..5, 0u8..2), 2..60),
            depth in 1usize..6,
        ) {
            let n = rows.len();
            let x = Array2::from_shape_fn((n, 2), |(i, j)| f64::from(if j == 0 { rows[i].0 } else { rows[i].1 }));
            let y: Vec<u8> = rows.iter().map(|r| r.2).collect();
            let params = TreeParams { max_depth: Some(depth), ..Default::default() };
            let t = fit_tree(x.view(), &y, None, &params).unwrap();
            t.validate().unwrap();
            prop_assert!(t.depth() <= depth);
            for node in &t.nodes {
                prop_assert!((0.0..=1.0).contains(&node.leaf_value));
                if let (Some(l), Some(r)) = (node.left, node.right) {
                    prop_assert_eq!(node.coverage, t.nodes[l].coverage + t.nodes[r].coverage);
                }
            }
            prop_assert_eq!(t.nodes[0].coverage, n as f64);
        }
    }
}
