//! Shapley attributions for tree models and the products built on them:
//! global importance, dependence series and waterfall decompositions.
//!
//! Attributions explain the raw score: the mean leaf value for trees and
//! forests, the margin before the logistic link for boosted models. The base
//! value is the coverage-weighted expectation of that score, so
//! `base_value + Σ phi = model_output` for every instance.

mod oracle;
mod shap;

pub use oracle::{brute_force_shapley, conditional_expectation, MAX_ORACLE_FEATURES};
pub use shap::TreeEnsemble;

use crate::error::{Error, Result};
use crate::models::sigmoid;
use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};
use std::io::Write;

/// Attributions below this magnitude are dropped from waterfalls.
pub const WATERFALL_EPSILON: f64 = 1e-12;
/// Reference line always present in waterfalls.
pub const MEDIAN_THRESHOLD: f64 = 0.5;
/// Bins used to remove the main effect before picking a colour feature.
const DEPENDENCE_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapExplanation {
    pub base_value: f64,
    pub model_output: f64,
    pub phi: Vec<f64>,
}

impl ShapExplanation {
    /// `|base + Σφ − output|`.
    pub fn additivity_error(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.model_output).abs()
    }

    pub fn named<'a>(&'a self, names: &'a [String]) -> NamedExplanation<'a> {
        NamedExplanation { explanation: self, names }
    }
}

/// JSON view `{base_value, model_output, phi: {name: value}}` with `phi` in
/// schema order.
pub struct NamedExplanation<'a> {
    explanation: &'a ShapExplanation,
    names: &'a [String],
}

struct PhiMap<'a>(&'a [String], &'a [f64]);

impl Serialize for PhiMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.1.len()))?;
        for (n, v) in self.0.iter().zip(self.1) {
            m.serialize_entry(n, v)?;
        }
        m.end()
    }
}

impl Serialize for NamedExplanation<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ShapExplanation", 3)?;
        st.serialize_field("base_value", &self.explanation.base_value)?;
        st.serialize_field("model_output", &self.explanation.model_output)?;
        st.serialize_field("phi", &PhiMap(self.names, &self.explanation.phi))?;
        st.end()
    }
}

/// Exact path-dependent Tree SHAP for one instance.
pub fn tree_shap(model: &TreeEnsemble<'_>, x: &[f64]) -> Result<ShapExplanation> {
    let d = model.n_features();
    if x.len() != d {
        return Err(Error::Shape {
            expected: d,
            actual: x.len(),
        });
    }
    model.check()?;
    let (trees, _) = model.components();
    let mut phi = vec![0.0; d];
    for (t, w) in trees {
        shap::tree_shap_into(t, x, w, &mut phi);
    }
    Ok(ShapExplanation {
        base_value: model.expected_value(),
        model_output: model.raw_score(x),
        phi,
    })
}

/// Explains every row of `x` in parallel; output order follows the rows.
pub fn explain_rows(model: &TreeEnsemble<'_>, x: ArrayView2<'_, f64>) -> Result<Vec<ShapExplanation>> {
    model.check()?;
    let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
    rows.par_iter().map(|r| tree_shap(model, r)).collect()
}

fn check_width(explanations: &[ShapExplanation], d: usize) -> Result<()> {
    for e in explanations {
        if e.phi.len() != d {
            return Err(Error::Shape {
                expected: d,
                actual: e.phi.len(),
            });
        }
    }
    Ok(())
}

fn lookup(names: &[String], name: &str) -> Result<usize> {
    names.iter().position(|n| n == name).ok_or_else(|| Error::UnknownFeature {
        name: name.to_string(),
        valid: names.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalImportance {
    pub names: Vec<String>,
    pub mean_abs: Vec<f64>,
    /// Feature indices, most important first; ties keep schema order.
    pub ranking: Vec<usize>,
}

pub const IMPORTANCE_CSV_HEADER: &str = "feature,mean_abs_shap,rank";

impl GlobalImportance {
    /// 1-based rank of feature `j`.
    pub fn rank_of(&self, j: usize) -> usize {
        self.ranking.iter().position(|&r| r == j).expect("ranking covers every feature") + 1
    }

    pub fn top(&self) -> &str {
        &self.names[self.ranking[0]]
    }

    /// Rows in rank order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{IMPORTANCE_CSV_HEADER}")?;
        for (r, &j) in self.ranking.iter().enumerate() {
            writeln!(w, "{},{},{}", self.names[j], self.mean_abs[j], r + 1)?;
        }
        Ok(())
    }

    /// `name value` lines for the top `n` features, values at 3 decimals.
    pub fn summary(&self, n: usize) -> Vec<String> {
        self.ranking
            .iter()
            .take(n)
            .map(|&j| format!("{} {:.3}", self.names[j], self.mean_abs[j]))
            .collect()
    }
}

pub fn global_importance(explanations: &[ShapExplanation], names: &[String]) -> Result<GlobalImportance> {
    if explanations.is_empty() {
        return Err(Error::Size("global importance needs at least one explanation".into()));
    }
    let d = names.len();
    check_width(explanations, d)?;
    let mut mean_abs = vec![0.0; d];
    for e in explanations {
        for (m, p) in mean_abs.iter_mut().zip(&e.phi) {
            *m += p.abs();
        }
    }
    mean_abs.iter_mut().for_each(|m| *m /= explanations.len() as f64);
    let mut ranking: Vec<usize> = (0..d).collect();
    ranking.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]).then(a.cmp(&b)));
    Ok(GlobalImportance {
        names: names.to_vec(),
        mean_abs,
        ranking,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DependencePoint {
    pub feature_value: f64,
    pub phi: f64,
    pub color_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceSeries {
    pub feature: String,
    pub color_feature: String,
    pub points: Vec<DependencePoint>,
}

pub const DEPENDENCE_CSV_HEADER: &str = "feature_value,phi,color_value";

impl DependenceSeries {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{DEPENDENCE_CSV_HEADER}")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.feature_value, p.phi, p.color_value)?;
        }
        Ok(())
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    let r = sab / (saa * sbb).sqrt();
    if r.is_finite() {
        r
    } else {
        0.0
    }
}

/// Colour feature for a dependence plot of `target`: the feature whose
/// values correlate most (in absolute value) with what is left of the
/// target's φ after subtracting its mean within equal-count bins of the
/// target's values. Ties keep schema order.
pub fn pick_color_feature(x: ArrayView2<'_, f64>, explanations: &[ShapExplanation], target: usize) -> usize {
    let n = explanations.len();
    let d = x.ncols();
    if d < 2 || n == 0 {
        return target;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[[a, target]].total_cmp(&x[[b, target]]).then(a.cmp(&b)));
    let mut residual = vec![0.0; n];
    let bins = DEPENDENCE_BINS.min(n);
    for b in 0..bins {
        let members = &order[b * n / bins..(b + 1) * n / bins];
        let mean = members.iter().map(|&i| explanations[i].phi[target]).sum::<f64>() / members.len() as f64;
        for &i in members {
            residual[i] = explanations[i].phi[target] - mean;
        }
    }
    let mut best = None;
    let mut best_r = -1.0;
    for k in (0..d).filter(|&k| k != target) {
        let col: Vec<f64> = x.column(k).to_vec();
        let r = pearson(&residual, &col).abs();
        if r > best_r {
            best_r = r;
            best = Some(k);
        }
    }
    best.unwrap_or(target)
}

/// One `(value, φ, colour)` tuple per explained row of `x`.
pub fn dependence_data(
    x: ArrayView2<'_, f64>,
    explanations: &[ShapExplanation],
    names: &[String],
    feature: &str,
    color_feature: Option<&str>,
) -> Result<DependenceSeries> {
    if x.ncols() != names.len() {
        return Err(Error::Shape {
            expected: names.len(),
            actual: x.ncols(),
        });
    }
    if x.nrows() != explanations.len() {
        return Err(Error::Shape {
            expected: explanations.len(),
            actual: x.nrows(),
        });
    }
    check_width(explanations, names.len())?;
    let j = lookup(names, feature)?;
    let c = match color_feature {
        Some(name) => lookup(names, name)?,
        None => pick_color_feature(x, explanations, j),
    };
    let points = explanations
        .iter()
        .enumerate()
        .map(|(i, e)| DependencePoint {
            feature_value: x[[i, j]],
            phi: e.phi[j],
            color_value: x[[i, c]],
        })
        .collect();
    Ok(DependenceSeries {
        feature: names[j].clone(),
        color_feature: names[c].clone(),
        points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfallStep {
    pub feature: String,
    pub phi: f64,
}

/// Additive path from the base value to the model output.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfallDecomposition {
    pub base: f64,
    pub steps: Vec<WaterfallStep>,
    pub final_value: f64,
    pub thresholds: Vec<f64>,
    /// True when values are margins; the logistic images are then reported
    /// next to them.
    pub margin_space: bool,
}

impl WaterfallDecomposition {
    pub fn steps_sum(&self) -> f64 {
        self.steps.iter().map(|s| s.phi).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable waterfall")
    }
}

impl Serialize for WaterfallDecomposition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Step<'a> {
            feature: &'a str,
            phi: f64,
            cumulative: f64,
        }
        let mut acc = self.base;
        let steps: Vec<Step<'_>> = self
            .steps
            .iter()
            .map(|st| {
                acc += st.phi;
                Step {
                    feature: &st.feature,
                    phi: st.phi,
                    cumulative: acc,
                }
            })
            .collect();
        let fields = if self.margin_space { 7 } else { 5 };
        let mut st = s.serialize_struct("Waterfall", fields)?;
        st.serialize_field("output_space", if self.margin_space { "margin" } else { "probability" })?;
        st.serialize_field("base", &self.base)?;
        st.serialize_field("steps", &steps)?;
        st.serialize_field("final", &self.final_value)?;
        if self.margin_space {
            st.serialize_field("base_probability", &sigmoid(self.base))?;
            st.serialize_field("final_probability", &sigmoid(self.final_value))?;
        }
        st.serialize_field("thresholds", &self.thresholds)?;
        st.end()
    }
}

/// Reference thresholds: 0.5 first, then the user values in order without
/// duplicates.
pub fn waterfall_thresholds(user: &[f64]) -> Vec<f64> {
    let mut out = vec![MEDIAN_THRESHOLD];
    for &t in user {
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

pub fn waterfall(explanation: &ShapExplanation, names: &[String], thresholds: &[f64], margin_space: bool) -> Result<WaterfallDecomposition> {
    check_width(std::slice::from_ref(explanation), names.len())?;
    let mut order: Vec<usize> = (0..names.len())
        .filter(|&j| explanation.phi[j].abs() >= WATERFALL_EPSILON)
        .collect();
    order.sort_by(|&a, &b| explanation.phi[b].abs().total_cmp(&explanation.phi[a].abs()).then(a.cmp(&b)));
    Ok(WaterfallDecomposition {
        base: explanation.base_value,
        steps: order
            .into_iter()
            .map(|j| WaterfallStep {
                feature: names[j].clone(),
                phi: explanation.phi[j],
            })
            .collect(),
        final_value: explanation.model_output,
        thresholds: waterfall_thresholds(thresholds),
        margin_space,
    })
}
