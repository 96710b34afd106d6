//! Gradient boosting on binary cross-entropy.
//!
//! Each stage fits a squared-error regression tree to the pseudo-residuals
//! `y - sigmoid(F)`, then replaces every leaf value by its Newton estimate
//! `Σr / Σp(1-p)` scaled by the learning rate. A leaf step that would raise
//! that leaf's training loss is halved until it does not, so the training
//! loss never increases from one stage to the next.

use super::tree::{check_shape, fit_regression_tree, DecisionTree, TreeParams};
use crate::error::{Error, Result};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

const RATE_CLAMP: f64 = 1e-6;
const MAX_HALVINGS: usize = 60;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary cross-entropy of margin `f` against label `y`.
pub fn log_loss(y: f64, f: f64) -> f64 {
    softplus(f) - y * f
}

pub fn mean_log_loss(y: &[u8], margins: &[f64]) -> f64 {
    y.iter()
        .zip(margins)
        .map(|(&y, &f)| log_loss(f64::from(y), f))
        .sum::<f64>()
        / y.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub tree: TreeParams,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self {
            n_stages: 100,
            learning_rate: 0.1,
            tree: TreeParams {
                max_depth: Some(3),
                ..TreeParams::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    /// Log-odds of the (clamped) training positive rate.
    pub initial_score: f64,
    pub learning_rate: f64,
    /// Stage trees with leaf values already multiplied by the learning rate.
    pub stages: Vec<DecisionTree>,
    pub n_features: usize,
    /// Mean training log-loss before the first stage and after each stage.
    pub loss_trace: Vec<f64>,
}

impl BoostedModel {
    /// Raw margin `f_0 + Σ stage(x)`.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.initial_score + self.stages.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

pub fn fit_gradient_boosting(x: ArrayView2<'_, f64>, y: &[u8], params: &BoostingParams) -> Result<BoostedModel> {
    check_shape(&x, y.len())?;
    let nu = params.learning_rate;
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Config(format!("learning rate must lie in (0, 1], got {nu}")));
    }
    params.tree.validate()?;
    let n = y.len();
    let positives = y.iter().filter(|&&v| v == 1).count();
    let rate = (positives as f64 / n as f64).clamp(RATE_CLAMP, 1.0 - RATE_CLAMP);
    let initial_score = (rate / (1.0 - rate)).ln();
    let mut margins = vec![initial_score; n];
    let mut model = BoostedModel {
        initial_score,
        learning_rate: nu,
        stages: Vec::with_capacity(params.n_stages),
        n_features: x.ncols(),
        loss_trace: vec![mean_log_loss(y, &margins)],
    };
    if positives == 0 || positives == n {
        log::warn!("gradient boosting on single-class labels; model predicts the constant class");
        return Ok(model);
    }

    let targets: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    for stage in 0..params.n_stages {
        let residuals: Vec<f64> = targets.iter().zip(&margins).map(|(t, &f)| t - sigmoid(f)).collect();
        let tree_params = TreeParams {
            rng_seed: params.tree.rng_seed.wrapping_add(stage as u64),
            ..params.tree
        };
        let mut tree = fit_regression_tree(x, &residuals, &tree_params)?;

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
        for (i, row) in x.outer_iter().enumerate() {
            let row = row.to_vec();
            members[tree.leaf_index(&row)].push(i);
        }
        for (leaf, rows) in members.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let (mut g, mut h) = (0.0, 0.0);
            for &i in rows {
                let p = sigmoid(margins[i]);
                g += targets[i] - p;
                h += p * (1.0 - p);
            }
            let leaf_loss = |step: f64| rows.iter().map(|&i| log_loss(targets[i], margins[i] + step)).sum::<f64>();
            let base = leaf_loss(0.0);
            let mut step = nu * g / h.max(1e-12);
            let mut halvings = 0;
            while leaf_loss(step) > base && halvings < MAX_HALVINGS {
                step *= 0.5;
                halvings += 1;
            }
            if leaf_loss(step) > base {
                step = 0.0;
            }
            tree.nodes[leaf].leaf_value = step;
            for &i in rows {
                margins[i] += step;
            }
        }
        tree.refresh_internal_values();
        model.stages.push(tree);
        model.loss_trace.push(mean_log_loss(y, &margins));
    }
    Ok(model)
}
