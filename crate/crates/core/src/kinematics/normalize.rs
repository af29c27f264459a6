use serde::{Deserialize, Serialize};

use super::FeatureVector;
use crate::error::{Error, Result};

/// Floor applied to every standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature population mean and (floored) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormParams {
    /// Fits column statistics over row vectors of equal length.
    pub fn fit_rows(names: Vec<String>, rows: &[&[f64]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let dim = names.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::LengthMismatch { expected: dim, got: bad.len() });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { names, mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_values(&self, values: &[f64]) -> Vec<f64> {
        values.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| (v - m) / s).collect()
    }
}

pub fn fit_zscore(train: &[FeatureVector]) -> Result<NormParams> {
    let first = train.first().ok_or(Error::EmptyTrainingSet)?;
    let rows: Vec<&[f64]> = train.iter().map(|fv| fv.values()).collect();
    if train.iter().any(|fv| fv.names() != first.names()) {
        return Err(Error::NameOrderMismatch);
    }
    NormParams::fit_rows(first.names().to_vec(), &rows)
}

pub fn apply_zscore(params: &NormParams, fv: &FeatureVector) -> Result<FeatureVector> {
    if fv.names() != params.names.as_slice() {
        return Err(Error::NameOrderMismatch);
    }
    Ok(fv.with_values(params.apply_values(fv.values())))
}
