//! Versioned JSON persistence for trained models.
//!
//! Floats are written in shortest round-trip form and parsed back exactly, so
//! a reloaded model scores bit-identically to the one that was saved.

use crate::dataset::Standardizer;
use crate::error::{Error, Result};
use crate::models::{Hyperparams, Model, ModelKind, TrainedModel};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FORMAT_VERSION: u64 = 1;
pub const SUPPORTED_VERSIONS: &[u64] = &[FORMAT_VERSION];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub format_version: u64,
    pub model_kind: ModelKind,
    pub hyperparameters: Hyperparams,
    pub feature_schema: Vec<String>,
    pub standardizer: Option<Standardizer>,
    pub model: Model,
}

impl ModelArchive {
    pub fn new(model: &TrainedModel, feature_schema: &[String]) -> Result<Self> {
        if feature_schema.len() != model.n_features() {
            return Err(Error::Shape {
                expected: model.n_features(),
                actual: feature_schema.len(),
            });
        }
        Ok(Self {
            format_version: FORMAT_VERSION,
            model_kind: model.kind,
            hyperparameters: model.hyperparams,
            feature_schema: feature_schema.to_vec(),
            standardizer: model.standardizer.clone(),
            model: model.model.clone(),
        })
    }

    pub fn trained(&self) -> TrainedModel {
        TrainedModel {
            kind: self.model_kind,
            hyperparams: self.hyperparameters,
            model: self.model.clone(),
            standardizer: self.standardizer.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable archive")
    }

    /// Parses and validates an archive. `path` is only used in messages.
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::format(path, format!("not a model archive: {e}")))?;
        match value.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if SUPPORTED_VERSIONS.contains(&v) => {}
            Some(v) => {
                return Err(Error::Version {
                    found: v,
                    supported: SUPPORTED_VERSIONS.to_vec(),
                })
            }
            None => return Err(Error::format(path, "missing integer field `format_version`")),
        }
        // Parse from text rather than the Value so floats take the exact path.
        let archive: ModelArchive =
            serde_json::from_str(text).map_err(|e| Error::format(path, format!("malformed model archive: {e}")))?;
        archive.validate().map_err(|e| Error::format(path, e.to_string()))?;
        Ok(archive)
    }

    fn validate(&self) -> Result<()> {
        let d = self.model.n_features();
        if self.feature_schema.len() != d {
            return Err(Error::Config(format!(
                "feature schema has {} names but the model expects {d}",
                self.feature_schema.len()
            )));
        }
        if let Some(s) = &self.standardizer {
            if s.n_features() != d || s.scale.len() != d {
                return Err(Error::Config("standardizer width does not match the model".into()));
            }
        }
        let kind_matches = matches!(
            (self.model_kind, &self.model),
            (ModelKind::Dt, Model::Tree(_))
                | (ModelKind::Rf, Model::Forest(_))
                | (ModelKind::Gb, Model::Boosted(_))
                | (ModelKind::Ada, Model::AdaBoost(_))
                | (ModelKind::Logreg, Model::Logistic(_))
                | (ModelKind::Svm, Model::Svm(_))
                | (ModelKind::Nb, Model::NaiveBayes(_))
                | (ModelKind::Knn, Model::Knn(_))
                | (ModelKind::Majority, Model::Constant(_))
        );
        if !kind_matches {
            return Err(Error::Config(format!("model_kind `{}` does not match the stored model", self.model_kind)));
        }
        match &self.model {
            Model::Tree(t) => t.validate()?,
            Model::Forest(f) => {
                if f.trees.is_empty() {
                    return Err(Error::Config("forest has no trees".into()));
                }
                for t in &f.trees {
                    if t.n_features != d {
                        return Err(Error::Config("forest trees disagree on feature count".into()));
                    }
                    t.validate()?;
                }
            }
            Model::Boosted(b) => {
                for t in &b.stages {
                    if t.n_features != d {
                        return Err(Error::Config("boosting stages disagree on feature count".into()));
                    }
                    t.validate()?;
                }
            }
            Model::AdaBoost(a) => {
                if a.stumps.len() != a.alphas.len() || a.stumps.iter().any(|s| s.feature >= d) {
                    return Err(Error::Config("inconsistent AdaBoost stumps".into()));
                }
            }
            Model::Knn(k) => {
                if k.k == 0 || k.points.len() != k.labels.len() * d {
                    return Err(Error::Config("inconsistent KNN training matrix".into()));
                }
            }
            Model::NaiveBayes(nb) => {
                if nb.means.iter().chain(&nb.variances).any(|v| v.len() != d) {
                    return Err(Error::Config("inconsistent naive Bayes moments".into()));
                }
            }
            Model::Logistic(_) | Model::Svm(_) | Model::Constant(_) => {}
        }
        Ok(())
    }
}

pub fn save_model(model: &TrainedModel, feature_schema: &[String], path: &Path) -> Result<()> {
    let archive = ModelArchive::new(model, feature_schema)?;
    std::fs::write(path, archive.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelArchive> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelArchive::from_json(&text, path)
}
