//! Cost-sensitive sequential feature acquisition.
//!
//! An episode starts with nothing observed. The agent either pays to reveal one
//! more standardized feature or ends the episode by classifying the repetition.
//! Q-networks are trained with Double Q-learning over a uniform replay buffer.
//! The recursive-feature-elimination baseline lives in [`rfe`].

pub mod acquisition;
pub mod chain;
pub mod dqn;
pub mod rfe;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use acquisition::{select_and_classify, train_selector, AcquisitionEnv, EpisodeTrace, SelectorModel, TraceRecord};
pub use dqn::{double_q_target, train_dqn, Environment, QNetworks, Step};
pub use rfe::{rfe_select, RfeConfig, RfeResult};

/// What the agent has seen so far for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionState {
    pub observed: Vec<f64>,
    pub mask: Vec<bool>,
    pub budget_used: usize,
}

impl AcquisitionState {
    pub fn empty(dim: usize) -> Self {
        Self { observed: vec![0.0; dim], mask: vec![false; dim], budget_used: 0 }
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    /// Network input: observed values followed by the mask bits.
    pub fn encode(&self) -> Vec<f64> {
        let mut v = self.observed.clone();
        v.extend(self.mask.iter().map(|&m| f64::from(u8::from(m))));
        v
    }

    pub fn is_consistent(&self) -> bool {
        self.budget_used == self.mask.iter().filter(|&&m| m).count() && self.observed.iter().zip(&self.mask).all(|(&v, &m)| m || v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectorAction {
    Acquire(usize),
    Classify0,
    Classify1,
}

impl SelectorAction {
    /// Position in the Q-network output: acquisitions first, then the two labels.
    pub fn index(self, dim: usize) -> usize {
        match self {
            Self::Acquire(i) => i,
            Self::Classify0 => dim,
            Self::Classify1 => dim + 1,
        }
    }

    pub fn from_index(index: usize, dim: usize) -> Option<Self> {
        match index {
            i if i < dim => Some(Self::Acquire(i)),
            i if i == dim => Some(Self::Classify0),
            i if i == dim + 1 => Some(Self::Classify1),
            _ => None,
        }
    }

    pub fn classify(label: u8) -> Self {
        if label == 0 {
            Self::Classify0
        } else {
            Self::Classify1
        }
    }

    pub fn is_terminal(self) -> bool {
        !matches!(self, Self::Acquire(_))
    }
}

impl fmt::Display for SelectorAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Acquire(i) => write!(f, "acquire({i})"),
            Self::Classify0 => f.write_str("classify(0)"),
            Self::Classify1 => f.write_str("classify(1)"),
        }
    }
}

pub fn legal_actions(s: &AcquisitionState) -> Vec<SelectorAction> {
    let mut out: Vec<SelectorAction> = s.mask.iter().enumerate().filter(|(_, &m)| !m).map(|(i, _)| SelectorAction::Acquire(i)).collect();
    out.push(SelectorAction::Classify0);
    out.push(SelectorAction::Classify1);
    out
}

/// Legal flags over the full action index range.
pub fn legal_mask(s: &AcquisitionState) -> Vec<bool> {
    let mut out: Vec<bool> = s.mask.iter().map(|&m| !m).collect();
    out.extend([true, true]);
    out
}

fn default_cost() -> f64 {
    0.05
}
fn one() -> f64 {
    1.0
}
fn default_eps_end() -> f64 {
    0.05
}
fn half() -> f64 {
    0.5
}
fn default_capacity() -> usize {
    10_000
}
fn default_batch() -> usize {
    64
}
fn default_sync() -> usize {
    500
}
fn default_episodes() -> usize {
    4000
}
fn default_hidden_grid() -> Vec<Vec<usize>> {
    vec![vec![64]]
}
fn default_lrs() -> Vec<f64> {
    vec![0.001]
}
fn default_val_fraction() -> f64 {
    0.2
}
fn default_train_every() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlConfig {
    #[serde(default = "default_cost")]
    pub feature_cost: f64,
    #[serde(default = "one")]
    pub misclassification_penalty: f64,
    #[serde(default = "one")]
    pub correct_reward: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub epsilon_start: f64,
    #[serde(default = "default_eps_end")]
    pub epsilon_end: f64,
    /// Share of episodes over which epsilon decays linearly.
    #[serde(default = "half")]
    pub epsilon_decay_fraction: f64,
    #[serde(default = "default_capacity")]
    pub replay_capacity: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Gradient updates between target-network copies.
    #[serde(default = "default_sync")]
    pub target_sync: usize,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    /// Environment steps per gradient update.
    #[serde(default = "default_train_every")]
    pub train_every: usize,
    #[serde(default = "default_hidden_grid")]
    pub hidden_grid: Vec<Vec<usize>>,
    #[serde(default = "default_lrs")]
    pub learning_rates: Vec<f64>,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RlConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.feature_cost > 0.0) {
            return bad("feature_cost must be positive");
        }
        if !(self.misclassification_penalty > 0.0 && self.correct_reward > 0.0) {
            return bad("rewards must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return bad("epsilon_decay_fraction must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("replay buffer must hold at least one minibatch");
        }
        if self.target_sync == 0 || self.episodes == 0 || self.train_every == 0 {
            return bad("target_sync, episodes and train_every must be positive");
        }
        if self.hidden_grid.is_empty() || self.learning_rates.is_empty() {
            return bad("Q-network grid is empty");
        }
        if self.hidden_grid.iter().any(|h| !(1..=3).contains(&h.len()) || h.contains(&0)) {
            return bad("hidden layouts need 1 to 3 non-empty layers");
        }
        if self.learning_rates.iter().any(|lr| !(*lr > 0.0)) {
            return bad("learning rates must be positive");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie in (0, 1)");
        }
        Ok(())
    }

    /// Exploration rate for episode `ep`.
    pub fn epsilon(&self, ep: usize) -> f64 {
        let span = self.epsilon_decay_fraction * self.episodes as f64;
        if (ep as f64) >= span || span == 0.0 {
            self.epsilon_end
        } else {
            self.epsilon_start + (self.epsilon_end - self.epsilon_start) * ep as f64 / span
        }
    }

    pub fn terminal_reward(&self, predicted: u8, truth: u8) -> f64 {
        if predicted == truth {
            self.correct_reward
        } else {
            -self.misclassification_penalty
        }
    }
}

/// Applies `action` to `state` for an instance with standardized `values` and label `truth`.
pub fn transition(
    state: &AcquisitionState,
    action: SelectorAction,
    values: &[f64],
    truth: u8,
    cfg: &RlConfig,
) -> Result<(AcquisitionState, f64, bool)> {
    if values.len() != state.dim() {
        return Err(Error::DimensionMismatch { expected: state.dim(), got: values.len() });
    }
    match action {
        SelectorAction::Acquire(i) => {
            if i >= state.dim() || state.mask[i] {
                return Err(Error::IllegalAction(action.to_string()));
            }
            let mut next = state.clone();
            next.mask[i] = true;
            next.observed[i] = values[i];
            next.budget_used += 1;
            Ok((next, -cfg.feature_cost, false))
        }
        SelectorAction::Classify0 => Ok((state.clone(), cfg.terminal_reward(0, truth), true)),
        SelectorAction::Classify1 => Ok((state.clone(), cfg.terminal_reward(1, truth), true)),
    }
}
