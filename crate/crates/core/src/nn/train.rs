use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::mlp::{MlpModel, OutputHead};
use crate::error::{Error, Result};
use crate::metrics::Confusion;
use crate::seeding::{derive_seed, rng_from};

pub const GRID_LEARNING_RATES: [f64; 5] = [0.0001, 0.005, 0.001, 0.01, 0.1];
pub const GRID_WIDTHS: [usize; 5] = [32, 64, 128, 256, 512];

/// Every depth in 1..=3 combined with every width, layers of equal width.
pub fn full_hidden_grid() -> Vec<Vec<usize>> {
    (1..=3).flat_map(|depth| GRID_WIDTHS.iter().map(move |&w| vec![w; depth])).collect()
}

fn default_tol() -> f64 {
    1e-4
}
fn default_max_iter() -> usize {
    200
}
fn default_val_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lrs")]
    pub learning_rates: Vec<f64>,
    #[serde(default = "full_hidden_grid")]
    pub hidden_grid: Vec<Vec<usize>>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_lrs() -> Vec<f64> {
    GRID_LEARNING_RATES.to_vec()
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rates: default_lrs(),
            hidden_grid: full_hidden_grid(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            val_fraction: default_val_fraction(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// A single-cell configuration.
    pub fn single(hidden: Vec<usize>, lr: f64, seed: u64) -> Self {
        Self { learning_rates: vec![lr], hidden_grid: vec![hidden], seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rates.is_empty() || self.hidden_grid.is_empty() {
            return Err(Error::Config("training grid is empty".into()));
        }
        if self.learning_rates.iter().any(|lr| !(*lr > 0.0 && lr.is_finite())) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.hidden_grid.iter().any(|h| !(1..=3).contains(&h.len()) || h.contains(&0)) {
            return Err(Error::Config("hidden layouts need 1 to 3 non-empty layers".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config("val_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn cells(&self) -> Vec<(Vec<usize>, f64)> {
        self.hidden_grid.iter().flat_map(|h| self.learning_rates.iter().map(move |&lr| (h.clone(), lr))).collect()
    }
}

/// Loss history of one full-batch run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// Training loss before each update.
    pub losses: Vec<f64>,
}

impl FitTrace {
    pub fn iterations(&self) -> usize {
        self.losses.len()
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().unwrap_or(&f64::NAN)
    }
}

/// Full-batch Adam until the loss changes by less than `tol` or `max_iter` updates.
pub fn fit_model(
    x: ArrayView2<f64>,
    y: &[f64],
    hidden: &[usize],
    lr: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<(MlpModel, FitTrace)> {
    let mut model = MlpModel::new(x.ncols(), hidden, 1, OutputHead::SigmoidBinary, seed)?;
    let mut state = AdamState::new(&model);
    let mut losses = Vec::with_capacity(max_iter);
    for _ in 0..max_iter {
        let (loss, grads) = model.loss_and_grad(x, y)?;
        if !loss.is_finite() {
            return Err(Error::Domain(format!("training loss diverged (lr {lr})")));
        }
        let converged = losses.last().is_some_and(|prev: &f64| (prev - loss).abs() < tol);
        losses.push(loss);
        if converged {
            break;
        }
        adam_step(&mut model, &grads, &mut state, lr)?;
    }
    Ok((model, FitTrace { losses }))
}

/// Seeded split holding out `val_fraction` of each class (at least one when the
/// class has two or more members).
pub fn stratified_split(labels: &[u8], val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng_from(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let k = if idx.len() >= 2 { ((idx.len() as f64 * val_fraction).round() as usize).clamp(1, idx.len() - 1) } else { 0 };
        val.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

pub fn check_labels(labels: &[u8]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::DegenerateLabels);
    }
    Ok(())
}

pub fn labels_to_targets(labels: &[u8]) -> Vec<f64> {
    labels.iter().map(|&l| f64::from(l.min(1))).collect()
}

/// Hard labels (probability ≥ 0.5) for every row.
pub fn predict_batch(model: &MlpModel, x: ArrayView2<f64>) -> Result<Vec<u8>> {
    Ok(model.forward_batch(x)?.column(0).iter().map(|&p| u8::from(p >= 0.5)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub val_f1: f64,
    pub val_loss: f64,
    pub iterations: usize,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub cells: Vec<GridCell>,
    /// Index of the selected cell.
    pub best: usize,
}

impl GridReport {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }
}

/// Index of the best cell: highest validation F1, then lowest validation loss,
/// then earliest in grid order.
pub(crate) fn best_index(cells: &[GridCell]) -> usize {
    let mut best = 0;
    for (i, c) in cells.iter().enumerate().skip(1) {
        let b = &cells[best];
        if c.val_f1 > b.val_f1 || (c.val_f1 == b.val_f1 && c.val_loss < b.val_loss) {
            best = i;
        }
    }
    best
}

fn select_rows(x: ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

/// Grid search over architectures and learning rates. Every cell is scored on a
/// stratified validation split; the winning cell is refitted on all rows.
pub fn train(x: ArrayView2<f64>, labels: &[u8], cfg: &TrainConfig) -> Result<(MlpModel, GridReport)> {
    cfg.validate()?;
    if x.nrows() != labels.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: labels.len() });
    }
    check_labels(labels)?;
    let (tr, va) = stratified_split(labels, cfg.val_fraction, derive_seed(cfg.seed, &[0]));
    let x_tr = select_rows(x, &tr);
    let x_va = select_rows(x, &va);
    let y_tr: Vec<f64> = tr.iter().map(|&i| f64::from(labels[i])).collect();
    let l_va: Vec<u8> = va.iter().map(|&i| labels[i]).collect();
    let y_va = labels_to_targets(&l_va);

    let cells: Vec<(Vec<usize>, f64)> = cfg.cells();
    let results: Vec<Result<GridCell>> = cells
        .par_iter()
        .enumerate()
        .map(|(k, (hidden, lr))| {
            let seed = derive_seed(cfg.seed, &[1, k as u64]);
            let (model, trace) = fit_model(x_tr.view(), &y_tr, hidden, *lr, cfg.tol, cfg.max_iter, seed)?;
            let (val_f1, val_loss) = if va.is_empty() {
                (0.0, f64::INFINITY)
            } else {
                let pred = predict_batch(&model, x_va.view())?;
                (Confusion::from_labels(&pred, &l_va)?.f1(), model.loss(x_va.view(), &y_va)?)
            };
            Ok(GridCell {
                hidden: hidden.clone(),
                lr: *lr,
                val_f1,
                val_loss: if val_loss.is_finite() { val_loss } else { f64::MAX },
                iterations: trace.iterations(),
                final_loss: trace.final_loss(),
            })
        })
        .collect();
    let cells = results.into_iter().collect::<Result<Vec<_>>>()?;
    let best = best_index(&cells);
    let y_all = labels_to_targets(labels);
    let cell = &cells[best];
    let seed = derive_seed(cfg.seed, &[2]);
    let (model, _) = fit_model(x, &y_all, &cell.hidden, cell.lr, cfg.tol, cfg.max_iter, seed)?;
    Ok((model, GridReport { cells, best }))
}
