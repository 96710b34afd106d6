//! Table-comparison baselines: logistic regression, linear SVM, Gaussian naive
//! Bayes and k-nearest neighbours. All of them expect standardized inputs.

use super::boosting::sigmoid;
use super::tree::check_shape;
use crate::error::{Error, Result};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

/// Gradient-norm stopping tolerance for logistic regression.
pub const LOGISTIC_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

/// Outcome of a logistic fit, kept for convergence checks.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub model: LinearModel,
    pub iterations: usize,
    pub gradient_norm: f64,
}

fn single_class(y: &[u8]) -> Option<u8> {
    let first = *y.first()?;
    y.iter().all(|&v| v == first).then_some(first)
}

/// Full-batch gradient descent on mean cross-entropy plus `λ/2 ‖w‖²`. The step
/// is the inverse of a bound on the Hessian's largest eigenvalue, so every
/// step decreases the objective.
pub fn fit_logistic(x: ArrayView2<'_, f64>, y: &[u8], lambda: f64, max_iter: usize) -> Result<LogisticFit> {
    check_shape(&x, y.len())?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Config(format!("L2 strength must be non-negative, got {lambda}")));
    }
    let (n, d) = x.dim();
    let mut model = LinearModel {
        weights: vec![0.0; d],
        bias: 0.0,
    };
    if let Some(class) = single_class(y) {
        log::warn!("logistic regression on single-class labels; model predicts the constant class");
        model.bias = if class == 1 { 30.0 } else { -30.0 };
        return Ok(LogisticFit {
            model,
            iterations: 0,
            gradient_norm: 0.0,
        });
    }
    let mean_sq = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let step = 1.0 / (0.25 * (mean_sq + 1.0) + lambda);
    let mut grad = vec![0.0; d];
    let mut gradient_norm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (row, &label) in x.outer_iter().zip(y) {
            let p = sigmoid(model.bias + row.iter().zip(&model.weights).map(|(a, w)| a * w).sum::<f64>());
            let r = p - f64::from(label);
            grad_b += r;
            for (g, v) in grad.iter_mut().zip(row.iter()) {
                *g += r * v;
            }
        }
        grad_b /= n as f64;
        for (g, w) in grad.iter_mut().zip(&model.weights) {
            *g = *g / n as f64 + lambda * w;
        }
        gradient_norm = (grad.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b).sqrt();
        if gradient_norm <= LOGISTIC_TOLERANCE {
            break;
        }
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= step * g;
        }
        model.bias -= step * grad_b;
        iterations += 1;
    }
    Ok(LogisticFit {
        model,
        iterations,
        gradient_norm,
    })
}

fn svm_objective(model: &LinearModel, x: ArrayView2<'_, f64>, signs: &[f64], lambda: f64) -> f64 {
    let hinge: f64 = x
        .outer_iter()
        .zip(signs)
        .map(|(row, s)| (1.0 - s * model.margin(row.as_slice().expect("standard layout"))).max(0.0))
        .sum();
    0.5 * lambda * model.weights.iter().map(|w| w * w).sum::<f64>() + hinge / signs.len() as f64
}

/// Full-batch subgradient descent on `λ/2 ‖w‖² + mean hinge`, step `1/(λt)`.
/// Each iterate is projected onto `‖w‖ ≤ 1/√λ`, which contains the optimum,
/// and the bias onto `|b| ≤ 1 + max‖x‖/√λ`. Returns the iterate with the
/// lowest objective seen.
pub fn fit_linear_svm(x: ArrayView2<'_, f64>, y: &[u8], lambda: f64, iterations: usize) -> Result<LinearModel> {
    check_shape(&x, y.len())?;
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::Config(format!("SVM regularisation must be positive, got {lambda}")));
    }
    let x = x.as_standard_layout();
    let (n, d) = x.dim();
    let mut model = LinearModel {
        weights: vec![0.0; d],
        bias: 0.0,
    };
    if let Some(class) = single_class(y) {
        log::warn!("linear SVM on single-class labels; model predicts the constant class");
        model.bias = if class == 1 { 30.0 } else { -30.0 };
        return Ok(model);
    }
    let signs: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    let mut best = model.clone();
    let mut best_obj = svm_objective(&model, x.view(), &signs, lambda);
    let radius = 1.0 / lambda.sqrt();
    let max_norm = x.outer_iter().map(|r| r.dot(&r).sqrt()).fold(0.0, f64::max);
    let bias_bound = 1.0 + max_norm * radius;
    let mut grad = vec![0.0; d];
    for t in 1..=iterations {
        let mut grad_b = 0.0;
        for (g, w) in grad.iter_mut().zip(&model.weights) {
            *g = lambda * w;
        }
        for (row, &s) in x.outer_iter().zip(&signs) {
            let row = row.as_slice().expect("standard layout");
            if s * model.margin(row) < 1.0 {
                for (g, v) in grad.iter_mut().zip(row) {
                    *g -= s * v / n as f64;
                }
                grad_b -= s / n as f64;
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= eta * g;
        }
        model.bias = (model.bias - eta * grad_b).clamp(-bias_bound, bias_bound);
        let norm = model.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        if norm > radius {
            model.weights.iter_mut().for_each(|w| *w *= radius / norm);
        }
        let obj = svm_objective(&model, x.view(), &signs, lambda);
        if obj < best_obj {
            best_obj = obj;
            best = model.clone();
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Per class (0, 1): feature means.
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
    pub log_priors: [f64; 2],
}

impl GaussianNb {
    fn log_likelihood(&self, class: usize, x: &[f64]) -> f64 {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.log_priors[class]
            + self.means[class]
                .iter()
                .zip(&self.variances[class])
                .zip(x)
                .map(|((m, v), xi)| -0.5 * (ln_2pi + v.ln() + (xi - m) * (xi - m) / v))
                .sum::<f64>()
    }

    /// Posterior of class 1.
    pub fn score(&self, x: &[f64]) -> f64 {
        match (self.log_priors[0].is_finite(), self.log_priors[1].is_finite()) {
            (true, false) => 0.0,
            (false, true) => 1.0,
            _ => sigmoid(self.log_likelihood(1, x) - self.log_likelihood(0, x)),
        }
    }
}

/// Per-class moments with variance floor `1e-9 · max variance` (at least
/// `1e-12`), so constant features do not produce infinite densities.
pub fn fit_gaussian_nb(x: ArrayView2<'_, f64>, y: &[u8]) -> Result<GaussianNb> {
    check_shape(&x, y.len())?;
    let (n, d) = x.dim();
    let mut means = [vec![0.0; d], vec![0.0; d]];
    let mut variances = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for (row, &label) in x.outer_iter().zip(y) {
        let c = usize::from(label == 1);
        counts[c] += 1;
        for (m, v) in means[c].iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for c in 0..2 {
        if counts[c] > 0 {
            means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
    }
    for (row, &label) in x.outer_iter().zip(y) {
        let c = usize::from(label == 1);
        for ((v, m), xi) in variances[c].iter_mut().zip(&means[c]).zip(row.iter()) {
            *v += (xi - m) * (xi - m);
        }
    }
    let max_var = (0..2)
        .flat_map(|c| variances[c].iter().map(move |v| if counts[c] > 0 { v / counts[c] as f64 } else { 0.0 }))
        .fold(0.0, f64::max);
    let floor = (1e-9 * max_var).max(1e-12);
    for c in 0..2 {
        let denom = counts[c].max(1) as f64;
        variances[c].iter_mut().for_each(|v| *v = *v / denom + floor);
    }
    if counts[0] == 0 || counts[1] == 0 {
        log::warn!("naive Bayes on single-class labels; model predicts the constant class");
    }
    let log_priors = [
        (counts[0] as f64 / n as f64).ln(),
        (counts[1] as f64 / n as f64).ln(),
    ];
    Ok(GaussianNb {
        means,
        variances,
        log_priors,
    })
}

/// Stored training set scored by distance-weighted vote of the `k` nearest
/// rows. Neighbours at distance zero, if any, vote alone with equal weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub n_features: usize,
    /// Row-major training matrix.
    pub points: Vec<f64>,
    pub labels: Vec<u8>,
}

impl KnnModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        let d = self.n_features;
        let mut dist: Vec<(f64, usize)> = self
            .points
            .chunks_exact(d)
            .enumerate()
            .map(|(i, p)| (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
            .collect();
        let k = self.k.min(dist.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
            dist.truncate(k);
        }
        dist.sort_by(cmp);
        let exact: Vec<usize> = dist.iter().filter(|(d, _)| *d == 0.0).map(|&(_, i)| i).collect();
        if !exact.is_empty() {
            let pos = exact.iter().filter(|&&i| self.labels[i] == 1).count();
            return pos as f64 / exact.len() as f64;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(d, i) in &dist {
            let w = 1.0 / d;
            den += w;
            if self.labels[i] == 1 {
                num += w;
            }
        }
        if den > 0.0 && den.is_finite() {
            (num / den).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }
}

pub fn fit_knn(x: ArrayView2<'_, f64>, y: &[u8], k: usize) -> Result<KnnModel> {
    check_shape(&x, y.len())?;
    if k == 0 {
        return Err(Error::Config("KNN needs k >= 1".into()));
    }
    Ok(KnnModel {
        k,
        n_features: x.ncols(),
        points: x.iter().copied().collect(),
        labels: y.to_vec(),
    })
}

/// Fixed score regardless of input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantModel {
    pub value: f64,
    pub n_features: usize,
}

/// Predicts the training majority (ties go to class 0) with score 1 or 0.
pub fn fit_majority(x: ArrayView2<'_, f64>, y: &[u8]) -> Result<ConstantModel> {
    check_shape(&x, y.len())?;
    let pos = y.iter().filter(|&&v| v == 1).count();
    Ok(ConstantModel {
        value: if 2 * pos > y.len() { 1.0 } else { 0.0 },
        n_features: x.ncols(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn nb_boundary_at_zero_for_symmetric_classes() {
        // Class means exactly ±1 with population variance 1 and equal priors.
        let x = array![[-2.0], [0.0], [0.0], [2.0]];
        let y = [0u8, 0, 1, 1];
        let nb = fit_gaussian_nb(x.view(), &y).unwrap();
        assert_eq!(nb.means, [vec![-1.0], vec![1.0]]);
        assert!((nb.score(&[0.0]) - 0.5).abs() < 1e-12);
        assert!(nb.score(&[1e-3]) > 0.5);
        assert!(nb.score(&[-1e-3]) < 0.5);
    }

    #[test]
    fn knn_self_neighbour() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]];
        let y = [0u8, 1, 0, 1];
        let m = fit_knn(x.view(), &y, 1).unwrap();
        for (row, &label) in x.outer_iter().zip(&y) {
            assert_eq!(m.score(row.as_slice().unwrap()), f64::from(label));
        }
    }

    #[test]
    fn knn_inverse_distance_vote() {
        let x = array![[1.0], [3.0]];
        let y = [1u8, 0];
        let m = fit_knn(x.view(), &y, 2).unwrap();
        // weights 1/1 and 1/3
        assert!((m.score(&[0.0]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn logistic_separates_two_points() {
        let x = array![[-1.0], [1.0]];
        let y = [0u8, 1];
        let fit = fit_logistic(x.view(), &y, 1e-2, 20_000).unwrap();
        assert!(fit.gradient_norm <= LOGISTIC_TOLERANCE);
        assert!(fit.model.score(&[-1.0]) < 0.5 && fit.model.score(&[1.0]) > 0.5);
    }

    #[test]
    fn logistic_converges_on_overlapping_data() {
        let x = Array2::from_shape_fn((50, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let y: Vec<u8> = (0..50).map(|i| u8::from((i * 7) % 11 > 4 || i % 9 == 0)).collect();
        let fit = fit_logistic(x.view(), &y, 1e-2, 20_000).unwrap();
        assert!(fit.gradient_norm <= LOGISTIC_TOLERANCE, "{}", fit.gradient_norm);
    }

    #[test]
    fn svm_separates_margin_data() {
        let x = array![[-2.0, 0.0], [-1.5, 1.0], [1.5, -1.0], [2.0, 0.0]];
        let y = [0u8, 0, 1, 1];
        let m = fit_linear_svm(x.view(), &y, 1e-2, 2000).unwrap();
        for (row, &label) in x.outer_iter().zip(&y) {
            assert_eq!(u8::from(m.score(row.as_slice().unwrap()) > 0.5), label);
        }
    }

    #[test]
    fn single_class_baselines_are_constant() {
        let x = array![[0.0], [1.0]];
        let y = [1u8, 1];
        assert!(fit_logistic(x.view(), &y, 1e-2, 10).unwrap().model.score(&[5.0]) > 0.99);
        assert!(fit_linear_svm(x.view(), &y, 1e-2, 10).unwrap().score(&[-5.0]) > 0.99);
        assert_eq!(fit_gaussian_nb(x.view(), &y).unwrap().score(&[3.0]), 1.0);
    }

    #[test]
    fn majority_ties_to_zero() {
        let x = array![[0.0], [1.0]];
        assert_eq!(fit_majority(x.view(), &[0, 1]).unwrap().value, 0.0);
        assert_eq!(fit_majority(x.view(), &[1, 1]).unwrap().value, 1.0);
    }
}
