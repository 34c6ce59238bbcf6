use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;
use crate::{Error, Result};

/// Per-dimension z-scoring with population standard deviation. Dimensions
/// with zero variance map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(m: &FeatureMatrix) -> Result<Self> {
        if m.rows() < 2 {
            return Err(Error::Invalid(format!(
                "standardizer needs at least 2 rows, got {}",
                m.rows()
            )));
        }
        let n = m.rows() as f64;
        let mut mean = vec![0.0; m.cols()];
        for r in m.iter_rows() {
            mean.iter_mut().zip(r).for_each(|(a, x)| *a += x);
        }
        mean.iter_mut().for_each(|a| *a /= n);
        let mut var = vec![0.0; m.cols()];
        for r in m.iter_rows() {
            for ((v, x), mu) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - mu).powi(2);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for ((x, mu), sd) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *x = if *sd > 0.0 { (*x - mu) / sd } else { 0.0 };
        }
    }

    pub fn transform(&self, m: &FeatureMatrix) -> FeatureMatrix {
        let mut out = m.clone();
        for i in 0..out.rows() {
            self.transform_row(out.row_mut(i));
        }
        out
    }
}
