//! Shapley values by enumerating every coalition. Exponential in the number
//! of features; used to check the polynomial algorithm.

use super::shap::TreeEnsemble;
use super::ShapExplanation;
use crate::error::{Error, Result};
use crate::models::DecisionTree;

pub const MAX_ORACLE_FEATURES: usize = 15;

/// Expected tree output when only the features in `coalition` (bit mask) are
/// known: unknown splits average their children by coverage.
pub fn conditional_expectation(tree: &DecisionTree, x: &[f64], coalition: u32) -> f64 {
    fn walk(tree: &DecisionTree, node: usize, x: &[f64], s: u32) -> f64 {
        let n = &tree.nodes[node];
        match (n.feature_index, n.left, n.right) {
            (Some(f), Some(l), Some(r)) => {
                if s & (1 << f) != 0 {
                    walk(tree, if x[f] <= n.threshold { l } else { r }, x, s)
                } else {
                    let (cl, cr) = (tree.nodes[l].coverage, tree.nodes[r].coverage);
                    (cl * walk(tree, l, x, s) + cr * walk(tree, r, x, s)) / n.coverage
                }
            }
            _ => n.leaf_value,
        }
    }
    walk(tree, 0, x, coalition)
}

/// Value of every coalition of the ensemble's raw score.
fn coalition_values(model: &TreeEnsemble<'_>, x: &[f64], d: usize) -> Vec<f64> {
    let (trees, offset) = model.components();
    (0..1u32 << d)
        .map(|s| offset + trees.iter().map(|(t, w)| w * conditional_expectation(t, x, s)).sum::<f64>())
        .collect()
}

pub fn brute_force_shapley(model: &TreeEnsemble<'_>, x: &[f64]) -> Result<ShapExplanation> {
    let d = model.n_features();
    if d > MAX_ORACLE_FEATURES {
        return Err(Error::Size(format!(
            "brute-force Shapley values enumerate 2^d coalitions; d = {d} exceeds {MAX_ORACLE_FEATURES}"
        )));
    }
    if x.len() != d {
        return Err(Error::Shape {
            expected: d,
            actual: x.len(),
        });
    }
    model.check()?;
    let v = coalition_values(model, x, d);
    // |S|! (d - |S| - 1)! / d!
    let mut fact = vec![1.0f64; d + 1];
    for i in 1..=d {
        fact[i] = fact[i - 1] * i as f64;
    }
    let weight: Vec<f64> = (0..d).map(|s| fact[s] * fact[d - s - 1] / fact[d]).collect();
    let mut phi = vec![0.0; d];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << j;
        for s in 0..1u32 << d {
            if s & bit == 0 {
                *p += weight[s.count_ones() as usize] * (v[(s | bit) as usize] - v[s as usize]);
            }
        }
    }
    Ok(ShapExplanation {
        base_value: v[0],
        model_output: v[(1usize << d) - 1],
        phi,
    })
}
