//! Bagged CART ensemble. The score is the mean leaf value over trees, so
//! thresholding it at 0.5 reproduces a majority vote of pure-leaf trees.

use super::tree::{check_shape, Criterion, DecisionTree, TreeBuilder, TreeParams};
use crate::error::{Error, Result};
use crate::seed::indexed_rng;
use ndarray::ArrayView2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub params: ForestParams,
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.trees[0].n_features
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Fits `params.n_trees` trees in parallel. Tree `t` draws its bootstrap and
/// feature subsets from stream `t` of `seed`, so the result does not depend
/// on the thread count.
pub fn fit_random_forest(x: ArrayView2<'_, f64>, y: &[u8], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    check_shape(&x, y.len())?;
    params.tree.validate()?;
    if params.n_trees == 0 {
        return Err(Error::Config("a forest needs at least one tree".into()));
    }
    let n = y.len();
    let targets: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let weights = vec![1.0; n];
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = indexed_rng(seed, t as u64);
            let mut indices: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            TreeBuilder::new(x, &targets, &weights, params.tree, Criterion::Gini).build(&mut indices, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        params: *params,
    })
}
