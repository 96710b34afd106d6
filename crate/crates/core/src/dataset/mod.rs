//! Labeled feature data, splits and folds, standardization, and the synthetic
//! flow generator.

mod flow;
mod split;
mod standardize;
pub mod synthetic;

pub use flow::{
    load_flows_csv, read_flows_csv, save_flows_csv, write_flows_csv, FlowRecord, Protocol, TcpFlags,
    FLOW_CSV_HEADER,
};
pub use split::{split_train_val_test, stratified_kfold, FoldAssignment, SplitCounts};
pub use standardize::Standardizer;
pub use synthetic::{
    generate_flows, load_intervals_csv, save_intervals_csv, AnomalyInterval, Difficulty, GeneratedTraffic, RegimeMix,
    SyntheticConfig,
};

use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView1, Axis};
use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitTag {
    Train,
    Val,
    Test,
    Unassigned,
}

impl SplitTag {
    pub const EVALUATED: [SplitTag; 3] = [SplitTag::Train, SplitTag::Val, SplitTag::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
            SplitTag::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(SplitTag::Train),
            "val" => Ok(SplitTag::Val),
            "test" => Ok(SplitTag::Test),
            "unassigned" => Ok(SplitTag::Unassigned),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// Feature matrix with binary labels (1 = anomaly) and per-row split tags.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    splits: Vec<SplitTag>,
}

impl LabeledDataset {
    /// Builds a dataset with every row unassigned.
    pub fn new(features: Array2<f64>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let n = features.nrows();
        Self::with_splits(features, labels, feature_names, vec![SplitTag::Unassigned; n])
    }

    pub fn with_splits(
        features: Array2<f64>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        splits: Vec<SplitTag>,
    ) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::Shape {
                expected: features.nrows(),
                actual: labels.len(),
            });
        }
        if splits.len() != features.nrows() {
            return Err(Error::Shape {
                expected: features.nrows(),
                actual: splits.len(),
            });
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::Shape {
                expected: features.ncols(),
                actual: feature_names.len(),
            });
        }
        let mut seen = HashSet::new();
        if let Some(dup) = feature_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Config(format!("duplicate feature name `{dup}`")));
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::Data {
                index: i,
                message: format!("label {} is not 0 or 1", labels[i]),
            });
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            splits,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn splits(&self) -> &[SplitTag] {
        &self.splits
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownFeature {
                name: name.to_string(),
                valid: self.feature_names.clone(),
            })
    }

    pub(crate) fn set_splits(&mut self, splits: Vec<SplitTag>) {
        debug_assert_eq!(splits.len(), self.len());
        self.splits = splits;
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Row indices carrying `tag`, ascending.
    pub fn indices_of(&self, tag: SplitTag) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == tag).collect()
    }

    /// Features and labels of the given rows.
    pub fn select(&self, rows: &[usize]) -> (Array2<f64>, Vec<u8>) {
        (
            self.features.select(Axis(0), rows),
            rows.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn split(&self, tag: SplitTag) -> (Array2<f64>, Vec<u8>) {
        self.select(&self.indices_of(tag))
    }

    /// Same rows and tags with a transformed feature matrix.
    pub fn map_features(&self, features: Array2<f64>) -> Result<Self> {
        Self::with_splits(
            features,
            self.labels.clone(),
            self.feature_names.clone(),
            self.splits.clone(),
        )
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{},label,split", self.feature_names.join(","))?;
        for i in 0..self.len() {
            let mut line = String::new();
            for v in self.features.row(i) {
                line.push_str(&v.to_string());
                line.push(',');
            }
            writeln!(w, "{line}{},{}", self.labels[i], self.splits[i])?;
        }
        w.flush()
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    /// Parses a labeled-dataset CSV. When `expected_names` is given the header
    /// must list exactly those feature columns, in order.
    pub fn read_csv<R: BufRead>(reader: R, path: &Path, expected_names: Option<&[String]>) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::io(path, e))?
            .ok_or_else(|| Error::format(path, "empty file, expected dataset header"))?;
        let columns: Vec<String> = header.trim_end().split(',').map(str::to_string).collect();
        if columns.len() < 3 || columns[columns.len() - 2] != "label" || columns[columns.len() - 1] != "split" {
            return Err(Error::format(
                path,
                "header must end with columns `label,split`",
            ));
        }
        let names: Vec<String> = columns[..columns.len() - 2].to_vec();
        if let Some(expected) = expected_names {
            if let Some((i, (got, want))) = names
                .iter()
                .zip(expected)
                .enumerate()
                .find(|(_, (g, w))| g != w)
            {
                return Err(Error::format(
                    path,
                    format!("column {i} is `{got}`, expected `{want}`"),
                ));
            }
            if names.len() != expected.len() {
                return Err(Error::format(
                    path,
                    format!("expected {} feature columns, found {}", expected.len(), names.len()),
                ));
            }
        }
        let d = names.len();
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut splits = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row = i + 2;
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != d + 2 {
                return Err(Error::format(
                    path,
                    format!("line {row}: expected {} columns, found {}", d + 2, fields.len()),
                ));
            }
            for (j, f) in fields[..d].iter().enumerate() {
                let v: f64 = f.parse().map_err(|_| {
                    Error::format(path, format!("line {row}, column `{}`: not a number: `{f}`", names[j]))
                })?;
                if !v.is_finite() {
                    return Err(Error::format(
                        path,
                        format!("line {row}, column `{}`: non-finite value", names[j]),
                    ));
                }
                values.push(v);
            }
            let label = match fields[d] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::format(
                        path,
                        format!("line {row}, column `label`: expected 0 or 1, found `{other}`"),
                    ))
                }
            };
            labels.push(label);
            splits.push(
                fields[d + 1]
                    .parse()
                    .map_err(|e: String| Error::format(path, format!("line {row}, column `split`: {e}")))?,
            );
        }
        let n = labels.len();
        let features = Array2::from_shape_vec((n, d), values).expect("row lengths checked");
        Self::with_splits(features, labels, names, splits)
    }

    pub fn load_csv(path: &Path, expected_names: Option<&[String]>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file), path, expected_names)
    }
}
