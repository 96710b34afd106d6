//! Classifiers with probability scores.
//!
//! Tree models consume raw features. Logistic regression, the linear SVM,
//! naive Bayes and KNN are fitted on standardized features; the standardizer
//! travels with the fitted model in [`TrainedModel`].

pub mod adaboost;
pub mod baseline;
pub mod boosting;
pub mod forest;
pub mod tree;

pub use adaboost::{fit_adaboost, AdaBoostModel, Stump};
pub use baseline::{
    fit_gaussian_nb, fit_knn, fit_linear_svm, fit_logistic, fit_majority, ConstantModel, GaussianNb, KnnModel,
    LinearModel,
};
pub use boosting::{fit_gradient_boosting, sigmoid, BoostedModel, BoostingParams};
pub use forest::{fit_random_forest, ForestModel, ForestParams};
pub use tree::{fit_tree, DecisionTree, FeatureSubsample, Node, TreeParams};

use crate::dataset::Standardizer;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, STREAM_BOOTSTRAP};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dt,
    Rf,
    Logreg,
    Ada,
    Gb,
    Svm,
    Nb,
    Knn,
    Majority,
}

impl ModelKind {
    /// Comparison-table order.
    pub const TABLE: [ModelKind; 8] = [
        ModelKind::Dt,
        ModelKind::Rf,
        ModelKind::Logreg,
        ModelKind::Ada,
        ModelKind::Gb,
        ModelKind::Svm,
        ModelKind::Nb,
        ModelKind::Knn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dt => "dt",
            ModelKind::Rf => "rf",
            ModelKind::Logreg => "logreg",
            ModelKind::Ada => "ada",
            ModelKind::Gb => "gb",
            ModelKind::Svm => "svm",
            ModelKind::Nb => "nb",
            ModelKind::Knn => "knn",
            ModelKind::Majority => "majority",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Dt => "Decision Tree",
            ModelKind::Rf => "Random Forest",
            ModelKind::Logreg => "Logistic Regression",
            ModelKind::Ada => "AdaBoost",
            ModelKind::Gb => "Gradient Boosting",
            ModelKind::Svm => "SVM",
            ModelKind::Nb => "Naive Bayes",
            ModelKind::Knn => "KNN",
            ModelKind::Majority => "Majority Class",
        }
    }

    pub fn is_tree_family(self) -> bool {
        matches!(self, ModelKind::Dt | ModelKind::Rf | ModelKind::Gb)
    }

    pub fn uses_standardized_input(self) -> bool {
        matches!(self, ModelKind::Logreg | ModelKind::Svm | ModelKind::Nb | ModelKind::Knn)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            ModelKind::Dt,
            ModelKind::Rf,
            ModelKind::Logreg,
            ModelKind::Ada,
            ModelKind::Gb,
            ModelKind::Svm,
            ModelKind::Nb,
            ModelKind::Knn,
            ModelKind::Majority,
        ];
        all.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown model `{s}`; expected one of {}",
                all.map(ModelKind::as_str).join(", ")
            ))
        })
    }
}

/// Hyperparameters for every model kind; each kind reads its own fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub feature_subsample: FeatureSubsample,
    /// Depth limit for the decision tree and forest trees; `None` is unlimited.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub gb_stages: usize,
    pub learning_rate: f64,
    pub gb_max_depth: usize,
    pub ada_rounds: usize,
    pub k_neighbors: usize,
    pub l2: f64,
    pub logreg_max_iter: usize,
    pub svm_iterations: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            bootstrap: true,
            feature_subsample: FeatureSubsample::SqrtD,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            gb_stages: 100,
            learning_rate: 0.1,
            gb_max_depth: 3,
            ada_rounds: 50,
            k_neighbors: 5,
            l2: 1e-2,
            logreg_max_iter: 20_000,
            svm_iterations: 2_000,
        }
    }
}

impl Hyperparams {
    fn tree_params(&self, rng_seed: u64) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            feature_subsample: FeatureSubsample::All,
            rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Tree(DecisionTree),
    Forest(ForestModel),
    Boosted(BoostedModel),
    AdaBoost(AdaBoostModel),
    Logistic(LinearModel),
    Svm(LinearModel),
    NaiveBayes(GaussianNb),
    Knn(KnnModel),
    Constant(ConstantModel),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Tree(t) => t.n_features,
            Model::Forest(f) => f.n_features(),
            Model::Boosted(b) => b.n_features,
            Model::AdaBoost(a) => a.n_features,
            Model::Logistic(m) | Model::Svm(m) => m.weights.len(),
            Model::NaiveBayes(nb) => nb.means[0].len(),
            Model::Knn(k) => k.n_features,
            Model::Constant(c) => c.n_features,
        }
    }

    /// Probability-like score in [0, 1] for an already-prepared row.
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            Model::Tree(t) => t.predict(x),
            Model::Forest(f) => f.score(x),
            Model::Boosted(b) => b.score(x),
            Model::AdaBoost(a) => a.score(x),
            Model::Logistic(m) | Model::Svm(m) => m.score(x),
            Model::NaiveBayes(nb) => nb.score(x),
            Model::Knn(k) => k.score(x),
            Model::Constant(c) => c.value,
        }
    }

    /// The output Shapley attributions add up to: the probability for trees
    /// and forests, the pre-logistic margin for boosted models.
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        match self {
            Model::Boosted(b) => b.margin(x),
            _ => self.score(x),
        }
    }
}

/// A fitted model plus the preprocessing it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub hyperparams: Hyperparams,
    pub model: Model,
    pub standardizer: Option<Standardizer>,
}

/// Hard label from a score: 1 iff the score is strictly above 0.5.
pub fn label_from_score(p: f64) -> u8 {
    u8::from(p > 0.5)
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        self.model.n_features()
    }

    fn prepare(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features() {
            return Err(Error::Shape {
                expected: self.n_features(),
                actual: row.len(),
            });
        }
        Ok(match &self.standardizer {
            Some(s) => row.iter().zip(s.mean.iter().zip(&s.scale)).map(|(v, (m, sc))| (v - m) / sc).collect(),
            None => row.to_vec(),
        })
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<f64> {
        Ok(self.model.score(&self.prepare(row)?))
    }

    pub fn predict_proba_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::Shape {
                expected: self.n_features(),
                actual: x.ncols(),
            });
        }
        x.outer_iter().map(|row| self.predict_proba(&row.to_vec())).collect()
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
        Ok(self.predict_proba_batch(x)?.into_iter().map(label_from_score).collect())
    }
}

/// Fits `kind` on raw training features. `seed` is the pipeline root seed;
/// bagging and feature subsampling draw from its bootstrap stream.
pub fn fit_model(kind: ModelKind, hyper: &Hyperparams, x: ArrayView2<'_, f64>, y: &[u8], seed: u64) -> Result<TrainedModel> {
    tree::check_shape(&x, y.len())?;
    let stream = derive_seed(seed, STREAM_BOOTSTRAP);
    let standardizer = if kind.uses_standardized_input() {
        Some(Standardizer::fit(x)?)
    } else {
        None
    };
    let scaled = match &standardizer {
        Some(s) => Some(s.transform(x)?),
        None => None,
    };
    let xs = scaled.as_ref().map_or(x, |a| a.view());
    let model = match kind {
        ModelKind::Dt => Model::Tree(fit_tree(x, y, None, &hyper.tree_params(stream))?),
        ModelKind::Rf => {
            let params = ForestParams {
                n_trees: hyper.n_trees,
                bootstrap: hyper.bootstrap,
                tree: TreeParams {
                    feature_subsample: hyper.feature_subsample,
                    ..hyper.tree_params(stream)
                },
            };
            Model::Forest(fit_random_forest(x, y, &params, stream)?)
        }
        ModelKind::Gb => {
            let params = BoostingParams {
                n_stages: hyper.gb_stages,
                learning_rate: hyper.learning_rate,
                tree: TreeParams {
                    max_depth: Some(hyper.gb_max_depth),
                    ..hyper.tree_params(stream)
                },
            };
            Model::Boosted(fit_gradient_boosting(x, y, &params)?)
        }
        ModelKind::Ada => Model::AdaBoost(fit_adaboost(x, y, hyper.ada_rounds)?),
        ModelKind::Logreg => Model::Logistic(fit_logistic(xs, y, hyper.l2, hyper.logreg_max_iter)?.model),
        ModelKind::Svm => Model::Svm(fit_linear_svm(xs, y, hyper.l2, hyper.svm_iterations)?),
        ModelKind::Nb => Model::NaiveBayes(fit_gaussian_nb(xs, y)?),
        ModelKind::Knn => Model::Knn(fit_knn(xs, y, hyper.k_neighbors)?),
        ModelKind::Majority => Model::Constant(fit_majority(x, y)?),
    };
    Ok(TrainedModel {
        kind,
        hyperparams: *hyper,
        model,
        standardizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn data() -> (Array2<f64>, Vec<u8>) {
        let x = Array2::from_shape_fn((60, 3), |(i, j)| ((i * 11 + j * 7) % 19) as f64 * (j + 1) as f64);
        let y = (0..60).map(|i| u8::from((i * 11) % 19 > 12)).collect();
        (x, y)
    }

    #[test]
    fn every_kind_scores_in_unit_interval() {
        let (x, y) = data();
        let hyper = Hyperparams {
            n_trees: 10,
            gb_stages: 10,
            ..Default::default()
        };
        for kind in ModelKind::TABLE.into_iter().chain([ModelKind::Majority]) {
            let m = fit_model(kind, &hyper, x.view(), &y, 3).unwrap();
            let batch = m.predict_proba_batch(x.view()).unwrap();
            for (row, &p) in x.outer_iter().zip(&batch) {
                assert!((0.0..=1.0).contains(&p), "{kind}: {p}");
                assert_eq!(m.predict_proba(row.as_slice().unwrap()).unwrap().to_bits(), p.to_bits());
            }
        }
    }

    #[test]
    fn hard_label_ties_go_to_zero() {
        assert_eq!(label_from_score(0.74), 1);
        assert_eq!(label_from_score(0.5), 0);
    }

    #[test]
    fn wrong_width_is_shape_error() {
        let (x, y) = data();
        let m = fit_model(ModelKind::Dt, &Hyperparams::default(), x.view(), &y, 0).unwrap();
        assert!(matches!(m.predict_proba(&[1.0]), Err(Error::Shape { expected: 3, actual: 1 })));
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ModelKind::TABLE {
            assert_eq!(kind.as_str().parse::<ModelKind>().unwrap(), kind);
        }
        assert!("rbf".parse::<ModelKind>().unwrap_err().is_config());
    }
}
