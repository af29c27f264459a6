//! Recursive feature elimination: one fixed feature subset for every instance.

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Confusion;
use crate::nn::train::{check_labels, fit_model, labels_to_targets, predict_batch, stratified_split};
use crate::seeding::derive_seed;

fn default_hidden() -> Vec<usize> {
    vec![32]
}
fn default_lr() -> f64 {
    0.01
}
fn default_drop() -> f64 {
    0.1
}
fn default_tol() -> f64 {
    1e-4
}
fn default_max_iter() -> usize {
    200
}
fn default_val() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfeConfig {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Share of the remaining features removed per round (at least one).
    #[serde(default = "default_drop")]
    pub drop_fraction: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_val")]
    pub val_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RfeConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl RfeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.drop_fraction > 0.0 && self.drop_fraction < 1.0) {
            return Err(Error::Config("drop_fraction must lie in (0, 1)".into()));
        }
        if !(self.lr > 0.0 && self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config("lr, tol and max_iter must be positive".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config("val_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    /// Feature indices, most important first.
    pub ranking: Vec<usize>,
    pub subset_size: usize,
    /// Validation F1 for every subset size visited, largest first.
    pub val_f1_by_size: Vec<(usize, f64)>,
}

impl RfeResult {
    /// The top `k` ranked features in ascending index order.
    pub fn subset(&self, k: usize) -> Vec<usize> {
        let mut s: Vec<usize> = self.ranking.iter().take(k).copied().collect();
        s.sort_unstable();
        s
    }

    pub fn selected(&self) -> Vec<usize> {
        self.subset(self.subset_size)
    }
}

/// Ranks the columns of standardized `x` by repeatedly training a network and
/// dropping the inputs with the smallest mean absolute first-layer weight.
pub fn rfe_select(x: ArrayView2<f64>, labels: &[u8], cfg: &RfeConfig) -> Result<RfeResult> {
    cfg.validate()?;
    if x.nrows() != labels.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: labels.len() });
    }
    if x.ncols() == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    check_labels(labels)?;
    let (tr, va) = stratified_split(labels, cfg.val_fraction, derive_seed(cfg.seed, &[0]));
    let x_tr = x.select(Axis(0), &tr);
    let x_va = x.select(Axis(0), &va);
    let l_tr: Vec<u8> = tr.iter().map(|&i| labels[i]).collect();
    let y_tr = labels_to_targets(&l_tr);
    let l_va: Vec<u8> = va.iter().map(|&i| labels[i]).collect();

    let mut active: Vec<usize> = (0..x.ncols()).collect();
    let mut eliminated: Vec<usize> = Vec::new();
    let mut scores = Vec::new();
    let mut round = 0u64;
    loop {
        let xt = x_tr.select(Axis(1), &active);
        let (model, _) = fit_model(xt.view(), &y_tr, &cfg.hidden, cfg.lr, cfg.tol, cfg.max_iter, derive_seed(cfg.seed, &[1, round]))?;
        let f1 = if va.is_empty() {
            0.0
        } else {
            let pred = predict_batch(&model, x_va.select(Axis(1), &active).view())?;
            Confusion::from_labels(&pred, &l_va)?.f1()
        };
        scores.push((active.len(), f1));
        if active.len() == 1 {
            eliminated.push(active[0]);
            break;
        }
        let importance = model.input_importance();
        let mut order: Vec<usize> = (0..active.len()).collect();
        order.sort_by(|&a, &b| importance[a].total_cmp(&importance[b]).then(a.cmp(&b)));
        let k = ((active.len() as f64 * cfg.drop_fraction).floor() as usize).max(1);
        let mut drop: Vec<usize> = order[..k].to_vec();
        // Within a round the weakest feature is eliminated first.
        eliminated.extend(drop.iter().map(|&j| active[j]));
        drop.sort_unstable();
        for j in drop.into_iter().rev() {
            active.remove(j);
        }
        round += 1;
    }
    eliminated.reverse();
    let mut best = scores[0];
    for &(size, f1) in &scores {
        if f1 >= best.1 {
            best = (size, f1);
        }
    }
    Ok(RfeResult { ranking: eliminated, subset_size: best.0, val_f1_by_size: scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from;
    use ndarray::Array2;
    use rand::Rng;

    fn informative_first(n: usize, f: usize, seed: u64) -> (Array2<f64>, Vec<u8>) {
        let mut rng = rng_from(seed);
        let mut x = Array2::from_shape_fn((n, f), |_| rng.gen_range(-1.0..1.0));
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        for (i, &l) in labels.iter().enumerate() {
            x[(i, 0)] = if l == 1 { 1.5 } else { -1.5 } + rng.gen_range(-0.3..0.3);
        }
        (x, labels)
    }

    #[test]
    fn informative_feature_ranked_first() {
        let (x, y) = informative_first(120, 5, 3);
        let r = rfe_select(x.view(), &y, &RfeConfig::default()).unwrap();
        assert_eq!(r.ranking[0], 0);
        let mut sorted = r.ranking.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        assert_eq!(r.subset(5), vec![0, 1, 2, 3, 4]);
        assert_eq!(r.val_f1_by_size.first().unwrap().0, 5);
        assert_eq!(r.val_f1_by_size.last().unwrap().0, 1);
    }

    #[test]
    fn drop_schedule_removes_ten_percent() {
        let (x, y) = informative_first(60, 25, 1);
        let r = rfe_select(x.view(), &y, &RfeConfig::default()).unwrap();
        let sizes: Vec<usize> = r.val_f1_by_size.iter().map(|s| s.0).collect();
        assert_eq!(&sizes[..4], &[25, 23, 21, 19]);
        assert!(sizes.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn degenerate_labels() {
        let (x, _) = informative_first(10, 3, 1);
        assert!(matches!(rfe_select(x.view(), &[0; 10], &RfeConfig::default()), Err(Error::DegenerateLabels)));
    }
}
