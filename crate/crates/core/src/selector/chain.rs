//! Deterministic five-state chain with known optimal values, used to check the
//! Q-learning machinery against value iteration.
//!
//! Moving left from the first state ends the episode with `left_exit`; moving
//! right from the last state ends it with `right_exit`; every other move costs
//! `step_cost`. States are one-hot encoded and episodes start uniformly at random.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::dqn::{Environment, Step};
use crate::error::{Error, Result};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainMdp {
    pub n_states: usize,
    pub left_exit: f64,
    pub right_exit: f64,
    pub step_cost: f64,
    pub gamma: f64,
    current: usize,
}

impl Default for ChainMdp {
    fn default() -> Self {
        Self { n_states: 5, left_exit: 0.5, right_exit: 1.0, step_cost: -0.2, gamma: 1.0, current: 0 }
    }
}

impl ChainMdp {
    pub fn one_hot(&self, s: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_states];
        v[s] = 1.0;
        v
    }

    /// Next state (`None` when terminal) and reward.
    pub fn dynamics(&self, s: usize, a: usize) -> (Option<usize>, f64) {
        match a {
            LEFT if s == 0 => (None, self.left_exit),
            RIGHT if s + 1 == self.n_states => (None, self.right_exit),
            LEFT => (Some(s - 1), self.step_cost),
            _ => (Some(s + 1), self.step_cost),
        }
    }

    /// Optimal action values by value iteration, indexed `[state][action]`.
    pub fn optimal_q(&self) -> Vec<[f64; 2]> {
        let mut v = vec![0.0; self.n_states];
        let q_of = |v: &[f64], s: usize, a: usize| {
            let (next, r) = self.dynamics(s, a);
            r + next.map_or(0.0, |n| self.gamma * v[n])
        };
        for _ in 0..10_000 {
            let next: Vec<f64> = (0..self.n_states).map(|s| q_of(&v, s, LEFT).max(q_of(&v, s, RIGHT))).collect();
            let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if delta < 1e-14 {
                break;
            }
        }
        (0..self.n_states).map(|s| [q_of(&v, s, LEFT), q_of(&v, s, RIGHT)]).collect()
    }

    pub fn optimal_policy(&self) -> Vec<usize> {
        self.optimal_q().iter().map(|q| if q[RIGHT] > q[LEFT] { RIGHT } else { LEFT }).collect()
    }
}

impl Environment for ChainMdp {
    fn state_dim(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.current = rng.gen_range(0..self.n_states);
        self.one_hot(self.current)
    }

    fn legal(&self) -> Vec<bool> {
        vec![true, true]
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if action > RIGHT {
            return Err(Error::IllegalAction(format!("chain action {action}")));
        }
        let (next, reward) = self.dynamics(self.current, action);
        match next {
            Some(n) => {
                self.current = n;
                Ok(Step { state: self.one_hot(n), reward, done: false })
            }
            None => Ok(Step { state: vec![0.0; self.n_states], reward, done: true }),
        }
    }
}
