//! From-scratch multilayer perceptron, Adam and grid-search training.
//!
//! Quality predictors take standardized feature values concatenated with the
//! acquisition mask, so a single network serves both full and partial inputs.

pub mod adam;
pub mod checkpoint;
pub mod mlp;
pub mod train;

use ndarray::Array2;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{Checkpoint, NetworkBlob};
pub use mlp::{sigmoid, Gradients, MlpModel, OutputHead};
pub use train::{fit_model, full_hidden_grid, predict_batch, stratified_split, train, GridCell, GridReport, TrainConfig};

use crate::error::{Error, Result};
use crate::kinematics::FeatureVector;

/// `values` with unacquired entries zeroed, followed by the mask as 0/1.
pub fn encode_masked(values: &[f64], mask: &[bool]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() * 2);
    out.extend(values.iter().zip(mask).map(|(&v, &m)| if m { v } else { 0.0 }));
    out.extend(mask.iter().map(|&m| if m { 1.0 } else { 0.0 }));
    out
}

/// Encodes every row with a full mask.
pub fn encode_full(rows: &[&[f64]]) -> Array2<f64> {
    let dim = rows.first().map_or(0, |r| r.len());
    let mask = vec![true; dim];
    let mut x = Array2::zeros((rows.len(), 2 * dim));
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in encode_masked(r, &mask).into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    x
}

/// Label (probability ≥ 0.5 gives 1) and probability for a standardized vector.
pub fn predict(model: &MlpModel, fv: &FeatureVector) -> Result<(u8, f64)> {
    if model.input_dim() != 2 * fv.dim() {
        return Err(Error::DimensionMismatch { expected: model.input_dim(), got: 2 * fv.dim() });
    }
    let p = model.forward(&encode_masked(fv.values(), &fv.effective_mask()))?[0];
    Ok((u8::from(p >= 0.5), p))
}
