//! ROC/AUC with confidence intervals, accuracy, cross-validation and the
//! model comparison table.

mod ci;
mod roc;

pub use ci::{auc_ci, hanley_mcneil_se, AucEstimate, CiMethod, BOOTSTRAP_RESAMPLES};
pub use roc::{auc, roc_curve, RocCurve, RocPoint, ROC_CSV_HEADER};

use crate::dataset::{stratified_kfold, LabeledDataset, SplitTag};
use crate::error::{Error, Result};
use crate::models::{fit_model, label_from_score, Hyperparams, ModelKind, TrainedModel};
use crate::seed::{derive_seed, STREAM_FOLDS};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

pub const DEFAULT_LEVEL: f64 = 0.95;

pub const COMPARISON_HEADER: [&str; 10] = [
    "Model",
    "Train_Accuracy",
    "Val_Accuracy",
    "Test_Accuracy",
    "Train_AUC",
    "Train_AUC_CI",
    "Val_AUC",
    "Val_AUC_CI",
    "Test_AUC",
    "Test_AUC_CI",
];

/// Fraction of matching labels.
pub fn accuracy(predicted: &[u8], truth: &[u8]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::Shape {
            expected: truth.len().max(1),
            actual: predicted.len(),
        });
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Six decimals with trailing zeros removed: `0.898571`, `0.9`, `1`.
pub fn format_metric(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// `[low-high]` at three decimals.
pub fn format_ci(low: f64, high: f64) -> String {
    format!("[{:.3}-{:.3}]", low + 0.0, high + 0.0)
}

const MISSING: &str = "NA";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub model: String,
    /// Train, val, test; `None` for an empty split.
    pub accuracy: [Option<f64>; 3],
    /// `None` for an empty or single-class split.
    pub auc: [Option<AucEstimate>; 3],
}

impl ComparisonRow {
    pub fn cells(&self) -> [String; 10] {
        let acc = |i: usize| self.accuracy[i].map_or(MISSING.to_string(), format_metric);
        let auc = |i: usize| self.auc[i].map_or(MISSING.to_string(), |e| format_metric(e.value));
        let ci = |i: usize| self.auc[i].map_or(MISSING.to_string(), |e| format_ci(e.ci_low, e.ci_high));
        [
            self.model.clone(),
            acc(0),
            acc(1),
            acc(2),
            auc(0),
            ci(0),
            auc(1),
            ci(1),
            auc(2),
            ci(2),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    #[serde(rename = "Model")]
    model: &'a str,
    #[serde(rename = "Train_Accuracy")]
    train_accuracy: Option<f64>,
    #[serde(rename = "Val_Accuracy")]
    val_accuracy: Option<f64>,
    #[serde(rename = "Test_Accuracy")]
    test_accuracy: Option<f64>,
    #[serde(rename = "Train_AUC")]
    train_auc: Option<f64>,
    #[serde(rename = "Train_AUC_CI")]
    train_auc_ci: Option<[f64; 2]>,
    #[serde(rename = "Val_AUC")]
    val_auc: Option<f64>,
    #[serde(rename = "Val_AUC_CI")]
    val_auc_ci: Option<[f64; 2]>,
    #[serde(rename = "Test_AUC")]
    test_auc: Option<f64>,
    #[serde(rename = "Test_AUC_CI")]
    test_auc_ci: Option<[f64; 2]>,
}

impl ComparisonTable {
    pub fn header() -> String {
        COMPARISON_HEADER.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::header())?;
        for row in &self.rows {
            writeln!(w, "{}", row.cells().join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    /// JSON array with one object per row, keyed by the CSV column names.
    pub fn to_json(&self) -> String {
        let rows: Vec<JsonRow<'_>> = self
            .rows
            .iter()
            .map(|r| {
                let v = |i: usize| r.auc[i].map(|e| e.value);
                let c = |i: usize| r.auc[i].map(|e| [e.ci_low, e.ci_high]);
                JsonRow {
                    model: &r.model,
                    train_accuracy: r.accuracy[0],
                    val_accuracy: r.accuracy[1],
                    test_accuracy: r.accuracy[2],
                    train_auc: v(0),
                    train_auc_ci: c(0),
                    val_auc: v(1),
                    val_auc_ci: c(1),
                    test_auc: v(2),
                    test_auc_ci: c(2),
                }
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("serializable table")
    }
}

/// Scores of one model on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitScores {
    pub split: SplitTag,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub roc: Option<RocCurve>,
}

/// Output of [`evaluate_all`]: the table plus everything needed to emit
/// ROC files and explanations.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub table: ComparisonTable,
    pub models: Vec<TrainedModel>,
    /// Per model (table order): train, val and test scores.
    pub scores: Vec<[SplitScores; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub ci_method: CiMethod,
    pub level: f64,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            ci_method: CiMethod::HanleyMcneil,
            level: DEFAULT_LEVEL,
            seed: 0,
        }
    }
}

/// Evaluates an already fitted model on one split.
pub fn score_split(model: &TrainedModel, data: &LabeledDataset, split: SplitTag) -> Result<SplitScores> {
    let (x, labels) = data.split(split);
    let scores = model.predict_proba_batch(x.view())?;
    let roc = if labels.is_empty() {
        None
    } else {
        match roc_curve(&scores, &labels) {
            Ok(r) => Some(r),
            Err(Error::Evaluation(_)) => None,
            Err(e) => return Err(e),
        }
    };
    Ok(SplitScores {
        split,
        scores,
        labels,
        roc,
    })
}

fn table_row(model: &TrainedModel, scores: &[SplitScores; 3], options: &EvalOptions) -> Result<ComparisonRow> {
    let mut row = ComparisonRow {
        model: model.kind.display_name().to_string(),
        accuracy: [None; 3],
        auc: [None; 3],
    };
    for (i, s) in scores.iter().enumerate() {
        if s.labels.is_empty() {
            continue;
        }
        let predicted: Vec<u8> = s.scores.iter().map(|&p| label_from_score(p)).collect();
        row.accuracy[i] = Some(accuracy(&predicted, &s.labels)?);
        if s.roc.is_some() {
            row.auc[i] = Some(auc_ci(&s.scores, &s.labels, options.level, options.ci_method, options.seed)?);
        } else {
            log::warn!("{} split of {} has a single class; AUC reported as NA", s.split, model.kind);
        }
    }
    Ok(row)
}

/// Trains every spec on the train split and scores train, val and test.
/// Models are fitted in parallel; rows follow the order of `specs`.
pub fn evaluate_all(specs: &[(ModelKind, Hyperparams)], data: &LabeledDataset, options: &EvalOptions) -> Result<Evaluation> {
    let (x_train, y_train) = data.split(SplitTag::Train);
    if y_train.is_empty() {
        return Err(Error::Size("the train split is empty".into()));
    }
    let models = specs
        .par_iter()
        .map(|(kind, hyper)| fit_model(*kind, hyper, x_train.view(), &y_train, options.seed))
        .collect::<Result<Vec<_>>>()?;
    evaluate_models(models, data, options)
}

/// Scores fitted models on every split and builds the table.
pub fn evaluate_models(models: Vec<TrainedModel>, data: &LabeledDataset, options: &EvalOptions) -> Result<Evaluation> {
    let mut table = ComparisonTable::default();
    let mut all_scores = Vec::with_capacity(models.len());
    for model in &models {
        let [a, b, c] = SplitTag::EVALUATED;
        let scores = [
            score_split(model, data, a)?,
            score_split(model, data, b)?,
            score_split(model, data, c)?,
        ];
        table.rows.push(table_row(model, &scores, options)?);
        all_scores.push(scores);
    }
    Ok(Evaluation {
        table,
        models,
        scores: all_scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvSummary {
    pub fold_auc: Vec<f64>,
    pub fold_accuracy: Vec<f64>,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

/// Stratified k-fold over every row of `data`: fold `f` is scored by a model
/// trained on the other folds.
pub fn cross_validate(kind: ModelKind, hyper: &Hyperparams, data: &LabeledDataset, k: usize, seed: u64) -> Result<CvSummary> {
    let folds = stratified_kfold(data, k, derive_seed(seed, STREAM_FOLDS))?;
    let results = (0..k)
        .into_par_iter()
        .map(|f| {
            let (x_tr, y_tr) = data.select(&folds.train_indices(f));
            let (x_te, y_te) = data.select(&folds.test_indices(f));
            let model = fit_model(kind, hyper, x_tr.view(), &y_tr, seed)?;
            let scores = model.predict_proba_batch(x_te.view())?;
            let predicted: Vec<u8> = scores.iter().map(|&p| label_from_score(p)).collect();
            Ok((auc(&scores, &y_te)?, accuracy(&predicted, &y_te)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (fold_auc, fold_accuracy): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    let (mean_auc, std_auc) = mean_std(&fold_auc);
    let (mean_accuracy, std_accuracy) = mean_std(&fold_accuracy);
    Ok(CvSummary {
        fold_auc,
        fold_accuracy,
        mean_auc,
        std_auc,
        mean_accuracy,
        std_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_accuracy_rendering() {
        assert_eq!(format_metric(629.0 / 700.0), "0.898571");
        assert_eq!(format_metric(262.0 / 300.0), "0.873333");
        assert_eq!(format_metric(0.9), "0.9");
        assert_eq!(format_metric(1.0), "1");
        assert_eq!(format_metric(0.0), "0");
        assert_eq!(format_metric(0.547160), "0.54716");
    }

    #[test]
    fn ci_rendering() {
        assert_eq!(format_ci(1.0, 1.0), "[1.000-1.000]");
        assert_eq!(format_ci(0.5404, 0.6951), "[0.540-0.695]");
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&[1, 1, 0], &[1, 1, 0]).unwrap(), 1.0);
        assert!(matches!(accuracy(&[], &[]), Err(Error::Shape { .. })));
        assert!(matches!(accuracy(&[1], &[1, 0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn header_is_exact() {
        assert_eq!(
            ComparisonTable::header(),
            "Model,Train_Accuracy,Val_Accuracy,Test_Accuracy,Train_AUC,Train_AUC_CI,Val_AUC,Val_AUC_CI,Test_AUC,Test_AUC_CI"
        );
    }
}
