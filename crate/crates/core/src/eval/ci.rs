use super::roc::{auc, class_counts};
use crate::error::{Error, Result};
use crate::seed::{rng_for, STREAM_CI_BOOTSTRAP};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::fmt;
use std::str::FromStr;

pub const BOOTSTRAP_RESAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    HanleyMcneil,
    Bootstrap,
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CiMethod::HanleyMcneil => "hm",
            CiMethod::Bootstrap => "boot",
        })
    }
}

impl FromStr for CiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hm" | "hanley_mcneil" => Ok(CiMethod::HanleyMcneil),
            "boot" | "bootstrap" => Ok(CiMethod::Bootstrap),
            _ => Err(Error::Config(format!("unknown CI method `{s}`; expected hm or boot"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucEstimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub method: CiMethod,
}

impl AucEstimate {
    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

fn unit(v: f64) -> f64 {
    // `+ 0.0` turns a negative zero into a positive one.
    v.clamp(0.0, 1.0) + 0.0
}

/// Hanley–McNeil standard error of an AUC with `n_pos` positives and `n_neg`
/// negatives.
pub fn hanley_mcneil_se(a: f64, n_pos: usize, n_neg: usize) -> f64 {
    let q1 = a / (2.0 - a);
    let q2 = 2.0 * a * a / (1.0 + a);
    let var = (a * (1.0 - a) + (n_pos as f64 - 1.0) * (q1 - a * a) + (n_neg as f64 - 1.0) * (q2 - a * a))
        / (n_pos as f64 * n_neg as f64);
    var.max(0.0).sqrt()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// AUC with a two-sided confidence interval at `level`. The bootstrap draws
/// positives and negatives separately (stratified) from the CI stream of
/// `seed`; its percentile interval is widened to contain the point value.
pub fn auc_ci(scores: &[f64], labels: &[u8], level: f64, method: CiMethod, seed: u64) -> Result<AucEstimate> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let (n_pos, n_neg) = class_counts(scores, labels)?;
    let value = auc(scores, labels)?;
    let alpha = 1.0 - level;
    let (ci_low, ci_high) = match method {
        CiMethod::HanleyMcneil => {
            let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
            let se = hanley_mcneil_se(value, n_pos, n_neg);
            (value - z * se, value + z * se)
        }
        CiMethod::Bootstrap => {
            let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &y)| y == 1).map(|(&s, _)| s).collect();
            let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &y)| y != 1).map(|(&s, _)| s).collect();
            let mut resampled_labels = vec![1u8; n_pos];
            resampled_labels.resize(n_pos + n_neg, 0);
            let mut rng = rng_for(seed, STREAM_CI_BOOTSTRAP);
            let mut buf = vec![0.0; n_pos + n_neg];
            let mut stats = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
            for _ in 0..BOOTSTRAP_RESAMPLES {
                for slot in buf.iter_mut().take(n_pos) {
                    *slot = pos[rng.gen_range(0..n_pos)];
                }
                for slot in buf.iter_mut().skip(n_pos) {
                    *slot = neg[rng.gen_range(0..n_neg)];
                }
                stats.push(auc(&buf, &resampled_labels)?);
            }
            stats.sort_by(f64::total_cmp);
            let lo = percentile(&stats, alpha / 2.0).min(value);
            let hi = percentile(&stats, 1.0 - alpha / 2.0).max(value);
            (lo, hi)
        }
    };
    Ok(AucEstimate {
        value,
        ci_low: unit(ci_low),
        ci_high: unit(ci_high),
        level,
        method,
    })
}
