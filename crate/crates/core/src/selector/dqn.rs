//! Generic Double Q-learning with uniform experience replay.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::RlConfig;
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamState, MlpModel, OutputHead};
use crate::seeding::rng_from;

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment with a fixed-width state encoding and a finite action set.
pub trait Environment {
    fn state_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Starts a new episode and returns the initial encoded state.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// Legal flags for the current state, indexed by action.
    fn legal(&self) -> Vec<bool>;
    fn step(&mut self, action: usize) -> Result<Step>;
}

/// Online network plus the frozen target copy.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetworks {
    pub online: MlpModel,
    pub target: MlpModel,
}

/// `r` when `done`, otherwise `r + γ·Q_target(s′, argmax_legal Q_online(s′))`.
pub fn double_q_target(reward: f64, done: bool, q_online: &[f64], q_target: &[f64], legal: &[bool], gamma: f64) -> f64 {
    if done {
        return reward;
    }
    match argmax_legal(q_online, legal) {
        Some(a) => reward + gamma * q_target[a],
        None => reward,
    }
}

/// First index of the largest legal value.
pub fn argmax_legal(q: &[f64], legal: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (&v, &ok)) in q.iter().zip(legal).enumerate() {
        if ok && best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best
}

struct Transition {
    state: Vec<f64>,
    action: usize,
    reward: f64,
    next: Vec<f64>,
    next_legal: Vec<bool>,
    done: bool,
}

struct Replay {
    items: Vec<Transition>,
    capacity: usize,
    pos: usize,
}

impl Replay {
    fn new(capacity: usize) -> Self {
        Self { items: Vec::with_capacity(capacity.min(4096)), capacity, pos: 0 }
    }

    fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.pos] = t;
        }
        self.pos = (self.pos + 1) % self.capacity;
    }
}

/// Temporal-difference errors are clipped to this magnitude (Huber loss).
const TD_CLIP: f64 = 1.0;

fn update(
    online: &mut MlpModel,
    target: &MlpModel,
    adam: &mut AdamState,
    replay: &Replay,
    cfg: &RlConfig,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let b = cfg.batch_size;
    let d = online.input_dim();
    let batch: Vec<&Transition> = (0..b).map(|_| &replay.items[rng.gen_range(0..replay.items.len())]).collect();
    let mut s = Array2::zeros((b, d));
    let mut s2 = Array2::zeros((b, d));
    for (i, t) in batch.iter().enumerate() {
        s.row_mut(i).iter_mut().zip(&t.state).for_each(|(a, v)| *a = *v);
        s2.row_mut(i).iter_mut().zip(&t.next).for_each(|(a, v)| *a = *v);
    }
    let q_next_online = online.forward_batch(s2.view())?;
    let q_next_target = target.forward_batch(s2.view())?;
    let cache = online.forward_cached(s.view())?;
    let mut d_logits = Array2::zeros(cache.logits.raw_dim());
    for (i, t) in batch.iter().enumerate() {
        let y = double_q_target(
            t.reward,
            t.done,
            q_next_online.row(i).as_slice().expect("contiguous"),
            q_next_target.row(i).as_slice().expect("contiguous"),
            &t.next_legal,
            cfg.gamma,
        );
        let td = (cache.logits[(i, t.action)] - y).clamp(-TD_CLIP, TD_CLIP);
        d_logits[(i, t.action)] = td / b as f64;
    }
    let grads = online.backward(&cache, d_logits);
    adam_step(online, &grads, adam, lr)
}

/// Trains a Q-network pair on `env` for `cfg.episodes` episodes.
pub fn train_dqn<E: Environment>(env: &mut E, cfg: &RlConfig, hidden: &[usize], lr: f64, seed: u64) -> Result<QNetworks> {
    cfg.validate()?;
    let mut rng = rng_from(seed);
    let mut online = MlpModel::new(env.state_dim(), hidden, env.n_actions(), OutputHead::LinearQ, rng.gen())?;
    let mut target = online.clone();
    let mut adam = AdamState::new(&online);
    let mut replay = Replay::new(cfg.replay_capacity);
    let mut steps = 0usize;
    let mut updates = 0usize;
    for ep in 0..cfg.episodes {
        let eps = cfg.epsilon(ep);
        let mut state = env.reset(&mut rng);
        // Episodes are finite by construction; the cap only guards faulty environments.
        for _ in 0..=env.n_actions() * 4 + 16 {
            let legal = env.legal();
            let action = if rng.gen::<f64>() < eps {
                let choices: Vec<usize> = (0..legal.len()).filter(|&i| legal[i]).collect();
                if choices.is_empty() {
                    return Err(Error::IllegalAction("no legal action".into()));
                }
                choices[rng.gen_range(0..choices.len())]
            } else {
                let q = online.forward(&state)?;
                argmax_legal(&q, &legal).ok_or_else(|| Error::IllegalAction("no legal action".into()))?
            };
            let step = env.step(action)?;
            let next_legal = if step.done { vec![false; legal.len()] } else { env.legal() };
            replay.push(Transition {
                state: std::mem::take(&mut state),
                action,
                reward: step.reward,
                next: step.state.clone(),
                next_legal,
                done: step.done,
            });
            steps += 1;
            if replay.items.len() >= cfg.batch_size && steps % cfg.train_every == 0 {
                update(&mut online, &target, &mut adam, &replay, cfg, lr, &mut rng)?;
                updates += 1;
                if updates % cfg.target_sync == 0 {
                    target = online.clone();
                }
            }
            if step.done {
                break;
            }
            state = step.state;
        }
    }
    log::debug!("dqn: {} episodes, {} steps, {} updates", cfg.episodes, steps, updates);
    Ok(QNetworks { online, target })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terminal_target_is_reward() {
        assert_eq!(double_q_target(1.0, true, &[5.0], &[7.0], &[true], 1.0), 1.0);
    }

    #[test]
    fn decoupled_selection_and_evaluation() {
        let y = double_q_target(-0.05, false, &[0.2, 0.9, 0.1], &[0.5, 0.3, 0.8], &[true; 3], 1.0);
        assert!((y - 0.25).abs() < 1e-12);
    }

    #[test]
    fn equal_networks_give_q_learning_target() {
        let q = [0.2, 0.9, 0.1];
        let y = double_q_target(-0.05, false, &q, &q, &[true; 3], 0.9);
        assert!((y - (-0.05 + 0.9 * 0.9)).abs() < 1e-12);
    }

    #[test]
    fn illegal_actions_are_skipped() {
        let y = double_q_target(0.0, false, &[0.2, 0.9, 0.1], &[0.5, 0.3, 0.8], &[true, false, true], 1.0);
        assert_eq!(y, 0.5);
        assert_eq!(argmax_legal(&[1.0, 1.0], &[true, true]), Some(0));
        assert_eq!(argmax_legal(&[1.0], &[false]), None);
    }
}
