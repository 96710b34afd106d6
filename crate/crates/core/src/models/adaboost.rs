//! AdaBoost over decision stumps.
//!
//! Round `m` picks the stump with the lowest weighted error `ε_m`, weighs it
//! by `α_m = ½ ln((1 - ε_m) / ε_m)`, multiplies the weight of every
//! misclassified sample by `exp(α_m)` and renormalises the weights to sum 1.
//! A round with `ε_m ≥ 0.5` is discarded and ends training; a round with
//! `ε_m = 0` is kept and ends training.

use super::tree::check_shape;
use crate::error::{Error, Result};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

/// Error used in place of an exact zero when computing α.
const MIN_ERROR: f64 = 1e-10;

/// Depth-1 classifier voting -1 or +1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: i8,
    pub right: i8,
}

impl Stump {
    pub fn vote(&self, x: &[f64]) -> f64 {
        f64::from(if x[self.feature] <= self.threshold { self.left } else { self.right })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub stumps: Vec<Stump>,
    pub alphas: Vec<f64>,
    /// Weighted error of each accepted round.
    pub errors: Vec<f64>,
    pub n_features: usize,
    /// Sum and minimum of the sample weights after each accepted round's
    /// update.
    #[serde(default)]
    pub weight_trace: Vec<(f64, f64)>,
}

impl AdaBoostModel {
    /// `Σ α_m h_m(x)`.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.stumps.iter().zip(&self.alphas).map(|(s, a)| a * s.vote(x)).sum()
    }

    /// Normalised margin mapped from [-1, 1] to [0, 1]; 0.5 with no rounds.
    pub fn score(&self, x: &[f64]) -> f64 {
        let total: f64 = self.alphas.iter().sum();
        if total <= 0.0 {
            return 0.5;
        }
        ((self.margin(x) / total + 1.0) * 0.5).clamp(0.0, 1.0)
    }
}

pub fn learner_weight(error: f64) -> f64 {
    let e = error.max(MIN_ERROR);
    0.5 * ((1.0 - e) / e).ln()
}

/// Lowest weighted-error stump. Ties go to the lowest feature, then the
/// lowest threshold, then the (-1, +1) orientation.
fn best_stump(x: ArrayView2<'_, f64>, signs: &[f64], w: &[f64]) -> (Stump, f64) {
    let n = signs.len();
    let total: f64 = w.iter().sum();
    let pos_total: f64 = (0..n).filter(|&i| signs[i] > 0.0).map(|i| w[i]).sum();
    // Constant stump predicting the heavier class.
    let (mut best, mut best_err) = if pos_total >= total - pos_total {
        (Stump { feature: 0, threshold: 0.0, left: 1, right: 1 }, total - pos_total)
    } else {
        (Stump { feature: 0, threshold: 0.0, left: -1, right: -1 }, pos_total)
    };
    if n > 0 {
        best.threshold = x[[0, 0]];
    }
    let mut order: Vec<usize> = (0..n).collect();
    for f in 0..x.ncols() {
        order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
        let (mut left_pos, mut left_neg) = (0.0, 0.0);
        for k in 0..n.saturating_sub(1) {
            let i = order[k];
            if signs[i] > 0.0 {
                left_pos += w[i];
            } else {
                left_neg += w[i];
            }
            let (a, b) = (x[[i, f]], x[[order[k + 1], f]]);
            if a >= b {
                continue;
            }
            let right_pos = pos_total - left_pos;
            let right_neg = (total - pos_total) - left_neg;
            // left = -1, right = +1 misclassifies left positives and right negatives.
            let err_lr = left_pos + right_neg;
            let err_rl = left_neg + right_pos;
            let mid = a + (b - a) * 0.5;
            let threshold = if mid < b { mid } else { a };
            if err_lr < best_err {
                best_err = err_lr;
                best = Stump { feature: f, threshold, left: -1, right: 1 };
            }
            if err_rl < best_err {
                best_err = err_rl;
                best = Stump { feature: f, threshold, left: 1, right: -1 };
            }
        }
    }
    // Recount from the chosen stump: the running sums above can leave
    // rounding residue where the true error is exactly zero.
    let missed: f64 = (0..n)
        .filter(|&i| stump_vote(x, i, &best) != signs[i])
        .map(|i| w[i])
        .sum();
    (best, missed / total)
}

fn stump_vote(x: ArrayView2<'_, f64>, row: usize, s: &Stump) -> f64 {
    f64::from(if x[[row, s.feature]] <= s.threshold { s.left } else { s.right })
}

pub fn fit_adaboost(x: ArrayView2<'_, f64>, y: &[u8], rounds: usize) -> Result<AdaBoostModel> {
    check_shape(&x, y.len())?;
    if rounds == 0 {
        return Err(Error::Config("AdaBoost needs at least one round".into()));
    }
    let n = y.len();
    let signs: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    let mut w = vec![1.0 / n as f64; n];
    let mut model = AdaBoostModel {
        stumps: Vec::new(),
        alphas: Vec::new(),
        errors: Vec::new(),
        n_features: x.ncols(),
        weight_trace: Vec::new(),
    };
    for _ in 0..rounds {
        let (stump, err) = best_stump(x, &signs, &w);
        if err >= 0.5 {
            break;
        }
        let alpha = learner_weight(err);
        model.stumps.push(stump);
        model.alphas.push(alpha);
        model.errors.push(err);
        if err <= 0.0 {
            break;
        }
        let boost = alpha.exp();
        for (i, wi) in w.iter_mut().enumerate() {
            if stump_vote(x, i, &stump) != signs[i] {
                *wi *= boost;
            }
        }
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= sum);
        let min = w.iter().copied().fold(f64::INFINITY, f64::min);
        model.weight_trace.push((w.iter().sum(), min));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn alpha_for_quarter_error() {
        // ½ ln 3
        assert!((learner_weight(0.25) - 0.549_306_144_334_054_8).abs() < 1e-15);
    }

    #[test]
    fn separable_stops_after_one_round() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [0u8, 0, 1, 1];
        let m = fit_adaboost(x.view(), &y, 10).unwrap();
        assert_eq!(m.stumps.len(), 1);
        assert_eq!(m.errors[0], 0.0);
        assert_eq!(m.stumps[0].threshold, 1.5);
        for (i, row) in x.outer_iter().enumerate() {
            let p = m.score(row.as_slice().unwrap());
            assert_eq!(u8::from(p > 0.5), y[i]);
        }
    }

    #[test]
    fn single_stump_proba_is_one() {
        let m = AdaBoostModel {
            stumps: vec![Stump { feature: 0, threshold: 0.0, left: -1, right: 1 }],
            alphas: vec![0.5493],
            errors: vec![0.25],
            n_features: 1,
            weight_trace: vec![],
        };
        assert_eq!(m.score(&[1.0]), 1.0);
        assert_eq!(m.score(&[-1.0]), 0.0);
    }

    #[test]
    fn weights_stay_normalised() {
        let x = Array2::from_shape_fn((80, 2), |(i, j)| ((i * 13 + j * 5) % 29) as f64);
        let y: Vec<u8> = (0..80).map(|i| u8::from((i * 13) % 29 > 14 || i % 5 == 0)).collect();
        let m = fit_adaboost(x.view(), &y, 30).unwrap();
        assert!(!m.errors.is_empty());
        assert!(m.errors.iter().all(|&e| e < 0.5));
        for &(sum, min) in &m.weight_trace {
            assert!((sum - 1.0).abs() <= 1e-12);
            assert!(min > 0.0);
        }
    }
}
