use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

/// Per-feature affine scaling fitted on training rows: `(x - mean) / scale`,
/// where `scale` is the population standard deviation (1 for constant columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: ArrayView2<'_, f64>) -> Result<Self> {
        let n = train.nrows();
        if n == 0 {
            return Err(Error::Size("cannot fit a standardizer on an empty train split".into()));
        }
        let mut mean = Vec::with_capacity(train.ncols());
        let mut scale = Vec::with_capacity(train.ncols());
        for col in train.axis_iter(Axis(1)) {
            let m = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            let s = var.sqrt();
            mean.push(m);
            scale.push(if s > 0.0 && s.is_finite() { s } else { 1.0 });
        }
        Ok(Self { mean, scale })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: ArrayView1<'_, f64>) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::Shape {
                expected: self.n_features(),
                actual: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        for (mut col, (m, s)) in out.axis_iter_mut(Axis(1)).zip(self.mean.iter().zip(&self.scale)) {
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.n_features() {
            return Err(Error::Shape {
                expected: self.n_features(),
                actual: z.ncols(),
            });
        }
        let mut out = z.to_owned();
        for (mut col, (m, s)) in out.axis_iter_mut(Axis(1)).zip(self.mean.iter().zip(&self.scale)) {
            col.mapv_inplace(|v| v * s + m);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let x = array![[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]];
        let s = Standardizer::fit(x.view()).unwrap();
        assert_abs_diff_eq!(s.mean[0], 4.0);
        // sqrt(8/3)
        assert_abs_diff_eq!(s.scale[0], 1.632_993_161_855_452, epsilon = 1e-12);
        assert_eq!(s.scale[1], 1.0);
        let z = s.transform(x.view()).unwrap();
        assert_abs_diff_eq!(z[[0, 0]], -1.224_744_871_391_589, epsilon = 1e-12);
        assert_abs_diff_eq!(z[[1, 0]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[[2, 0]], 1.224_744_871_391_589, epsilon = 1e-12);
        assert_eq!(z.column(1).to_vec(), vec![0.0; 3]);
    }

    #[test]
    fn empty_train_rejected() {
        let x = Array2::<f64>::zeros((0, 3));
        assert!(matches!(Standardizer::fit(x.view()), Err(Error::Size(_))));
    }

    proptest! {
        #[test]
        fn train_moments_and_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 2..60)) {
            let n = rows.len();
            let x = Array2::from_shape_fn((n, 4), |(i, j)| rows[i][j]);
            let s = Standardizer::fit(x.view()).unwrap();
            let z = s.transform(x.view()).unwrap();
            for (j, col) in z.axis_iter(Axis(1)).enumerate() {
                let m = col.sum() / n as f64;
                prop_assert!(m.abs() <= 1e-9);
                let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
                if s.scale[j] != 1.0 || sd > 0.0 {
                    prop_assert!((sd - 1.0).abs() <= 1e-9 || sd == 0.0);
                }
            }
            let back = s.inverse_transform(z.view()).unwrap();
            for (a, b) in x.iter().zip(back.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
