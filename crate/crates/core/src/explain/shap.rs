//! Path-dependent Tree SHAP.
//!
//! A feature absent from the coalition sends the walk down both children in
//! proportion to their training coverage. The recursion below tracks, for
//! every feature on the current root-to-node path, the fraction of coverage
//! that flows when the feature is absent (`zero`) or present (`one`), and the
//! permutation weights of all coalition sizes, so each leaf contributes its
//! Shapley share in time quadratic in the depth.

use crate::error::{Error, Result};
use crate::models::{BoostedModel, DecisionTree, ForestModel, Model};

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

const EMPTY: PathElement = PathElement {
    feature: None,
    zero: 0.0,
    one: 0.0,
    weight: 0.0,
};

fn extend(path: &mut [PathElement], depth: usize, zero: f64, one: f64, feature: Option<usize>) {
    path[depth] = PathElement {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    };
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind(path: &mut [PathElement], depth: usize, index: usize) {
    let PathElement { zero, one, .. } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
}

/// Total permutation weight the path would have with element `index` removed.
fn unwound_sum(path: &[PathElement], depth: usize, index: usize) -> f64 {
    let PathElement { zero, one, .. } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (depth - i) as f64 / d1;
        } else {
            total += path[i].weight / zero / ((depth - i) as f64 / d1);
        }
    }
    total
}

struct Walker<'a> {
    tree: &'a DecisionTree,
    x: &'a [f64],
    phi: &'a mut [f64],
    scale: f64,
}

impl Walker<'_> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(&mut self, node: usize, parent: &[PathElement], depth: usize, zero: f64, one: f64, feature: Option<usize>) {
        let mut path = parent.to_vec();
        path.resize(depth + 1, EMPTY);
        extend(&mut path, depth, zero, one, feature);
        let n = &self.tree.nodes[node];
        let (Some(f), Some(left), Some(right)) = (n.feature_index, n.left, n.right) else {
            for i in 1..=depth {
                let w = unwound_sum(&path, depth, i);
                let el = path[i];
                let j = el.feature.expect("only the root slot has no feature");
                self.phi[j] += w * (el.one - el.zero) * n.leaf_value * self.scale;
            }
            return;
        };
        let (hot, cold) = if self.x[f] <= n.threshold { (left, right) } else { (right, left) };
        let cover = n.coverage;
        let hot_zero = self.tree.nodes[hot].coverage / cover;
        let cold_zero = self.tree.nodes[cold].coverage / cover;
        let (mut in_zero, mut in_one) = (1.0, 1.0);
        let mut depth = depth;
        if let Some(k) = (1..=depth).find(|&k| path[k].feature == Some(f)) {
            in_zero = path[k].zero;
            in_one = path[k].one;
            unwind(&mut path, depth, k);
            depth -= 1;
            path.truncate(depth + 1);
        }
        self.recurse(hot, &path, depth + 1, hot_zero * in_zero, in_one, Some(f));
        self.recurse(cold, &path, depth + 1, cold_zero * in_zero, 0.0, Some(f));
    }
}

/// Rejects trees whose nodes lack usable coverage.
pub(crate) fn check_coverage(tree: &DecisionTree) -> Result<()> {
    for (i, n) in tree.nodes.iter().enumerate() {
        if !(n.coverage > 0.0 && n.coverage.is_finite()) {
            return Err(Error::Explanation(format!(
                "node {i} has no training coverage; the model cannot be explained"
            )));
        }
    }
    Ok(())
}

/// Adds `scale ·` the attributions of one tree at `x` into `phi`.
pub(crate) fn tree_shap_into(tree: &DecisionTree, x: &[f64], scale: f64, phi: &mut [f64]) {
    let mut walker = Walker { tree, x, phi, scale };
    walker.recurse(0, &[], 0, 1.0, 1.0, None);
}

/// A tree model viewed as a sum of scaled trees plus an offset.
#[derive(Debug, Clone, Copy)]
pub enum TreeEnsemble<'a> {
    Tree(&'a DecisionTree),
    Forest(&'a ForestModel),
    Boosted(&'a BoostedModel),
}

impl<'a> TreeEnsemble<'a> {
    pub fn from_model(model: &'a Model) -> Result<Self> {
        match model {
            Model::Tree(t) => Ok(TreeEnsemble::Tree(t)),
            Model::Forest(f) => Ok(TreeEnsemble::Forest(f)),
            Model::Boosted(b) => Ok(TreeEnsemble::Boosted(b)),
            _ => Err(Error::Explanation(
                "Shapley attributions are available for decision tree, random forest and gradient boosting models".into(),
            )),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TreeEnsemble::Tree(t) => t.n_features,
            TreeEnsemble::Forest(f) => f.n_features(),
            TreeEnsemble::Boosted(b) => b.n_features,
        }
    }

    /// `(tree, weight)` pairs and the constant offset such that the raw score
    /// is `offset + Σ weight · tree(x)`.
    pub fn components(&self) -> (Vec<(&'a DecisionTree, f64)>, f64) {
        match *self {
            TreeEnsemble::Tree(t) => (vec![(t, 1.0)], 0.0),
            TreeEnsemble::Forest(f) => {
                let w = 1.0 / f.trees.len() as f64;
                (f.trees.iter().map(|t| (t, w)).collect(), 0.0)
            }
            TreeEnsemble::Boosted(b) => (b.stages.iter().map(|t| (t, 1.0)).collect(), b.initial_score),
        }
    }

    /// Forest: mean leaf value. Boosted: margin before the logistic link.
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        let (trees, offset) = self.components();
        match self {
            // Same summation order as ForestModel::score.
            TreeEnsemble::Forest(f) => f.score(x),
            _ => offset + trees.iter().map(|(t, w)| w * t.predict(x)).sum::<f64>(),
        }
    }

    pub fn expected_value(&self) -> f64 {
        let (trees, offset) = self.components();
        offset + trees.iter().map(|(t, w)| w * t.expected_value()).sum::<f64>()
    }

    pub fn check(&self) -> Result<()> {
        let (trees, _) = self.components();
        trees.iter().try_for_each(|(t, _)| check_coverage(t))
    }
}
