//! Principal component analysis from the sample covariance matrix.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusedDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Per-feature divisor applied after centring, when standardised.
    pub scale: Option<Vec<f64>>,
    /// Unit-length principal directions, one per row, by decreasing eigenvalue.
    pub directions: Vec<Vec<f64>>,
    /// Covariance eigenvalues for the kept directions.
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.directions.len()
    }

    pub fn project_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: row.len(),
            });
        }
        let centred: Vec<f64> = match &self.scale {
            Some(scale) => row
                .iter()
                .zip(&self.mean)
                .zip(scale)
                .map(|((x, m), s)| (x - m) / s)
                .collect(),
            None => row.iter().zip(&self.mean).map(|(x, m)| x - m).collect(),
        };
        Ok(self
            .directions
            .iter()
            .map(|d| d.iter().zip(&centred).map(|(a, b)| a * b).sum())
            .collect())
    }
}

pub fn fit_pca(data: &FusedDataset, k: usize, standardize: bool) -> Result<PcaModel> {
    fit_pca_rows(data.values(), data.n_features(), k, standardize)
}

/// Fits on a row-major matrix with `n_features` columns.
pub fn fit_pca_rows(values: &[f64], n_features: usize, k: usize, standardize: bool) -> Result<PcaModel> {
    if n_features == 0 || values.len() % n_features != 0 {
        return Err(Error::DimensionMismatch {
            expected: n_features,
            actual: values.len(),
        });
    }
    let n = values.len() / n_features;
    let p = n_features;
    if n < 2 {
        return Err(Error::DegenerateData);
    }
    if k == 0 || k > n.min(p) {
        return Err(Error::KOutOfRange { k, max: n.min(p) });
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(v.to_string()));
    }

    let mut mean = vec![0.0; p];
    for row in values.chunks_exact(p) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut centred = DMatrix::from_fn(n, p, |i, j| values[i * p + j] - mean[j]);
    let scale = standardize.then(|| {
        (0..p)
            .map(|j| {
                let ss: f64 = centred.column(j).iter().map(|v| v * v).sum();
                let sd = (ss / (n - 1) as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect::<Vec<f64>>()
    });
    if let Some(scale) = &scale {
        for (j, s) in scale.iter().enumerate() {
            centred.column_mut(j).unscale_mut(*s);
        }
    }

    let cov = centred.tr_mul(&centred) / (n - 1) as f64;
    let trace = cov.trace();
    if trace <= 0.0 {
        return Err(Error::DegenerateData);
    }
    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .total_cmp(&eigen.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut directions = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    let mut explained_variance_ratio = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut d: Vec<f64> = eigen.eigenvectors.column(idx).iter().copied().collect();
        orient(&mut d);
        directions.push(d);
        let lambda = eigen.eigenvalues[idx].max(0.0);
        explained_variance.push(lambda);
        explained_variance_ratio.push((lambda / trace).clamp(0.0, 1.0));
    }
    Ok(PcaModel {
        mean,
        scale,
        directions,
        explained_variance,
        explained_variance_ratio,
    })
}

/// Flips `d` so its largest-magnitude entry (first on ties) is positive.
pub fn orient(d: &mut [f64]) {
    let mut pivot = 0;
    for (i, v) in d.iter().enumerate() {
        if v.abs() > d[pivot].abs() {
            pivot = i;
        }
    }
    if d.get(pivot).is_some_and(|&v| v < 0.0) {
        for v in d.iter_mut() {
            *v = -*v;
        }
    }
}

pub fn project(model: &PcaModel, data: &FusedDataset) -> Result<Vec<Vec<f64>>> {
    data.rows().map(|r| model.project_row(r)).collect()
}

/// Nearest integer, halves rounded up.
pub fn kp_label(kp: f64) -> i64 {
    (kp + 0.5).floor() as i64
}

/// Plot-ready CSV: `pc1,..,pck,kp_label`, one line per dataset row.
pub fn projection_csv(model: &PcaModel, data: &FusedDataset) -> Result<String> {
    let coords = project(model, data)?;
    let mut out = String::new();
    for i in 1..=model.k() {
        write!(out, "pc{i},").unwrap();
    }
    out.push_str("kp_label\n");
    for (row, kp) in coords.iter().zip(data.targets()) {
        for c in row {
            write!(out, "{c},").unwrap();
        }
        writeln!(out, "{}", kp_label(*kp)).unwrap();
    }
    Ok(out)
}
