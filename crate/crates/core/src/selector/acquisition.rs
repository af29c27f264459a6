use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dqn::{argmax_legal, train_dqn, Environment, QNetworks, Step};
use super::{legal_mask, transition, AcquisitionState, RlConfig, SelectorAction};
use crate::error::{Error, Result};
use crate::kinematics::FeatureVector;
use crate::nn::train::{check_labels, stratified_split};
use crate::nn::MlpModel;
use crate::seeding::derive_seed;

/// Feature acquisition over a fixed set of standardized, labelled instances.
pub struct AcquisitionEnv<'a> {
    rows: Vec<&'a [f64]>,
    labels: Vec<u8>,
    cfg: &'a RlConfig,
    current: usize,
    state: AcquisitionState,
}

impl<'a> AcquisitionEnv<'a> {
    pub fn new(rows: Vec<&'a [f64]>, labels: Vec<u8>, cfg: &'a RlConfig) -> Result<Self> {
        let dim = rows.first().ok_or(Error::EmptyTrainingSet)?.len();
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch { expected: rows.len(), got: labels.len() });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
        }
        Ok(Self { rows, labels, cfg, current: 0, state: AcquisitionState::empty(dim) })
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }
}

impl Environment for AcquisitionEnv<'_> {
    fn state_dim(&self) -> usize {
        2 * self.dim()
    }

    fn n_actions(&self) -> usize {
        self.dim() + 2
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.current = rng.gen_range(0..self.rows.len());
        self.state = AcquisitionState::empty(self.dim());
        self.state.encode()
    }

    fn legal(&self) -> Vec<bool> {
        legal_mask(&self.state)
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        let dim = self.dim();
        let a = SelectorAction::from_index(action, dim).ok_or_else(|| Error::IllegalAction(format!("index {action}")))?;
        let (next, reward, done) = transition(&self.state, a, self.rows[self.current], self.labels[self.current], self.cfg)?;
        self.state = next;
        Ok(Step { state: self.state.encode(), reward, done })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorCell {
    pub hidden: Vec<usize>,
    pub lr: f64,
    /// Mean greedy episode reward on the inner validation split.
    pub val_reward: f64,
}

/// Trained Q-networks bound to a feature order.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorModel {
    pub qnets: QNetworks,
    pub feature_names: Vec<String>,
    pub cells: Vec<SelectorCell>,
    pub best: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub state: AcquisitionState,
    pub action: SelectorAction,
    pub reward: f64,
}

/// One greedy episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
    pub prediction: u8,
    /// Without a known label the terminal reward is recorded as 0.
    pub truth: Option<u8>,
}

impl EpisodeTrace {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn acquisitions(&self) -> usize {
        self.steps.iter().filter(|s| !s.action.is_terminal()).count()
    }

    pub fn record(&self, names: &[String], mask: &[bool]) -> TraceRecord {
        TraceRecord {
            mask: mask.iter().map(|&m| u8::from(m)).collect(),
            actions: self
                .steps
                .iter()
                .map(|s| match s.action {
                    SelectorAction::Acquire(i) => format!("acquire:{}", names[i]),
                    SelectorAction::Classify0 => "classify:0".to_string(),
                    SelectorAction::Classify1 => "classify:1".to_string(),
                })
                .collect(),
            rewards: self.steps.iter().map(|s| s.reward).collect(),
            prediction: self.prediction,
            truth: self.truth,
        }
    }
}

/// Serialized form of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub mask: Vec<u8>,
    pub actions: Vec<String>,
    pub rewards: Vec<f64>,
    pub prediction: u8,
    pub truth: Option<u8>,
}

fn rollout(online: &MlpModel, values: &[f64], truth: Option<u8>, cfg: &RlConfig) -> Result<(Vec<bool>, u8, EpisodeTrace)> {
    let dim = values.len();
    if online.input_dim() != 2 * dim {
        return Err(Error::DimensionMismatch { expected: online.input_dim() / 2, got: dim });
    }
    let mut state = AcquisitionState::empty(dim);
    let mut steps = Vec::new();
    // Every acquisition consumes a feature, so at most `dim` acquisitions precede the
    // forced classification.
    loop {
        let q = online.forward(&state.encode())?;
        let mut legal = legal_mask(&state);
        if state.budget_used >= dim {
            legal[..dim].iter_mut().for_each(|l| *l = false);
        }
        let idx = argmax_legal(&q, &legal).expect("classification is always legal");
        let action = SelectorAction::from_index(idx, dim).expect("index in range");
        let (next, reward, done) = transition(&state, action, values, truth.unwrap_or(0), cfg)?;
        if done {
            let prediction = u8::from(action == SelectorAction::Classify1);
            let reward = if truth.is_some() { reward } else { 0.0 };
            steps.push(TraceStep { state: state.clone(), action, reward });
            return Ok((state.mask, prediction, EpisodeTrace { steps, prediction, truth }));
        }
        steps.push(TraceStep { state, action, reward });
        state = next;
    }
}

/// Greedy rollout for one standardized instance. Returns the acquired mask, the
/// predicted label and the trace.
pub fn select_and_classify(
    model: &SelectorModel,
    fv: &FeatureVector,
    truth: Option<u8>,
    cfg: &RlConfig,
) -> Result<(Vec<bool>, u8, EpisodeTrace)> {
    if fv.names() != model.feature_names.as_slice() {
        return Err(Error::NameOrderMismatch);
    }
    rollout(&model.qnets.online, fv.values(), truth, cfg)
}

fn mean_reward(online: &MlpModel, rows: &[&[f64]], labels: &[u8], cfg: &RlConfig) -> Result<f64> {
    let rewards = rows
        .par_iter()
        .zip(labels)
        .map(|(r, &l)| rollout(online, r, Some(l), cfg).map(|(_, _, t)| t.total_reward()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(rewards.iter().sum::<f64>() / rewards.len().max(1) as f64)
}

/// Trains the acquisition agent. With several (architecture, learning rate)
/// candidates, each is scored by greedy validation reward on a stratified inner
/// split and the winner is retrained on every instance.
pub fn train_selector(train: &[FeatureVector], labels: &[u8], cfg: &RlConfig) -> Result<SelectorModel> {
    cfg.validate()?;
    let first = train.first().ok_or(Error::EmptyTrainingSet)?;
    if train.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: train.len(), got: labels.len() });
    }
    if train.iter().any(|fv| fv.names() != first.names()) {
        return Err(Error::NameOrderMismatch);
    }
    check_labels(labels)?;
    let rows: Vec<&[f64]> = train.iter().map(|fv| fv.values()).collect();
    let cells: Vec<(Vec<usize>, f64)> =
        cfg.hidden_grid.iter().flat_map(|h| cfg.learning_rates.iter().map(move |&lr| (h.clone(), lr))).collect();
    let final_seed = derive_seed(cfg.seed, &[2]);

    let (scored, best) = if cells.len() == 1 {
        (vec![SelectorCell { hidden: cells[0].0.clone(), lr: cells[0].1, val_reward: f64::NAN }], 0)
    } else {
        let (tr, va) = stratified_split(labels, cfg.val_fraction, derive_seed(cfg.seed, &[0]));
        let tr_rows: Vec<&[f64]> = tr.iter().map(|&i| rows[i]).collect();
        let tr_labels: Vec<u8> = tr.iter().map(|&i| labels[i]).collect();
        let va_rows: Vec<&[f64]> = va.iter().map(|&i| rows[i]).collect();
        let va_labels: Vec<u8> = va.iter().map(|&i| labels[i]).collect();
        let scored = cells
            .par_iter()
            .enumerate()
            .map(|(k, (hidden, lr))| {
                let mut env = AcquisitionEnv::new(tr_rows.clone(), tr_labels.clone(), cfg)?;
                let q = train_dqn(&mut env, cfg, hidden, *lr, derive_seed(cfg.seed, &[1, k as u64]))?;
                let val_reward = mean_reward(&q.online, &va_rows, &va_labels, cfg)?;
                Ok(SelectorCell { hidden: hidden.clone(), lr: *lr, val_reward })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut best = 0;
        for (i, c) in scored.iter().enumerate() {
            if c.val_reward > scored[best].val_reward {
                best = i;
            }
        }
        (scored, best)
    };
    let mut env = AcquisitionEnv::new(rows, labels.to_vec(), cfg)?;
    let qnets = train_dqn(&mut env, cfg, &scored[best].hidden, scored[best].lr, final_seed)?;
    Ok(SelectorModel { qnets, feature_names: first.names().to_vec(), cells: scored, best })
}
