//! Ordinary least squares with an unpenalised intercept.
//!
//! The design is centred, then solved through a thin SVD with singular values
//! below `max(n, p) * eps * sigma_max` discarded, which gives the
//! minimum-norm coefficient vector when columns are collinear.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusedDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl LinearModel {
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        predict_linear(self, row)
    }

    pub fn predict_dataset(&self, data: &FusedDataset) -> Result<Vec<f64>> {
        data.rows().map(|r| predict_linear(self, r)).collect()
    }
}

pub fn fit_linear(data: &FusedDataset) -> Result<LinearModel> {
    let n = data.n_rows();
    let p = data.n_features();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let y = data.targets();
    let names = data.feature_names().to_vec();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if y.iter().all(|&v| v == y[0]) {
        return Ok(LinearModel {
            intercept: y[0],
            coefficients: vec![0.0; p],
            feature_names: names,
        });
    }

    let mut x_mean = vec![0.0; p];
    for row in data.rows() {
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut x_mean {
        *m /= n as f64;
    }
    let centred = DMatrix::from_fn(n, p, |i, j| data.row(i)[j] - x_mean[j]);
    let rhs = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let coefficients = if p == 0 {
        Vec::new()
    } else {
        let svd = centred.svd(true, true);
        let sigma_max = svd.singular_values.max();
        if sigma_max == 0.0 {
            vec![0.0; p]
        } else {
            let eps = sigma_max * n.max(p) as f64 * f64::EPSILON;
            let beta = svd
                .solve(&rhs, eps)
                .map_err(|e| Error::InvalidConfig(format!("least-squares solve failed: {e}")))?;
            beta.iter().copied().collect()
        }
    };
    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&x_mean)
            .map(|(b, m)| b * m)
            .sum::<f64>();
    Ok(LinearModel {
        intercept,
        coefficients,
        feature_names: names,
    })
}

pub fn predict_linear(model: &LinearModel, row: &[f64]) -> Result<f64> {
    if row.len() != model.coefficients.len() {
        return Err(Error::DimensionMismatch {
            expected: model.coefficients.len(),
            actual: row.len(),
        });
    }
    Ok(model.intercept + model.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::Timestamp;

    fn dataset(rows: &[&[f64]], targets: &[f64]) -> FusedDataset {
        let p = rows[0].len();
        FusedDataset::new(
            (0..p).map(|j| format!("x{j}")).collect(),
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
            targets.to_vec(),
            (0..targets.len()).map(|i| Timestamp::from_minutes(i as i64 * 180)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn exact_line() {
        let m = fit_linear(&dataset(&[&[1.0], &[2.0], &[3.0]], &[2.0, 4.0, 6.0])).unwrap();
        assert!(m.intercept.abs() < 1e-9);
        assert!((m.coefficients[0] - 2.0).abs() < 1e-9);
        assert!((m.predict(&[10.0]).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn constant_target() {
        let m = fit_linear(&dataset(&[&[1.0, 5.0], &[2.0, -1.0], &[7.0, 0.0]], &[0.3; 3])).unwrap();
        assert_eq!(m.intercept, 0.3);
        assert_eq!(m.coefficients, vec![0.0, 0.0]);
    }

    #[test]
    fn duplicated_column_gets_split_evenly() {
        // Minimum norm spreads the slope over identical columns.
        let m = fit_linear(&dataset(&[&[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]], &[2.0, 4.0, 6.0])).unwrap();
        assert!((m.coefficients[0] - 1.0).abs() < 1e-9);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-9);
        assert!(m.intercept.abs() < 1e-9);
    }

    #[test]
    fn single_row() {
        let m = fit_linear(&dataset(&[&[4.0, 2.0]], &[3.0])).unwrap();
        assert_eq!(m.predict(&[4.0, 2.0]).unwrap(), 3.0);
    }

    #[test]
    fn predict_examples() {
        let m = LinearModel {
            intercept: 0.0,
            coefficients: vec![2.0],
            feature_names: vec!["x".into()],
        };
        assert_eq!(predict_linear(&m, &[3.0]).unwrap(), 6.0);
        let z = LinearModel {
            intercept: 1.5,
            coefficients: vec![0.0, 0.0],
            feature_names: vec!["a".into(), "b".into()],
        };
        assert_eq!(predict_linear(&z, &[8.0, -3.0]).unwrap(), 1.5);
        assert_eq!(
            predict_linear(&z, &[1.0]),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        );
    }
}
