use ndarray::Zip;

use super::mlp::{Gradients, MlpModel};
use crate::error::Result;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    step: u64,
}

impl AdamState {
    pub fn new(model: &MlpModel) -> Self {
        Self { m: Gradients::zeros_like(model), v: Gradients::zeros_like(model), step: 0 }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(model: &mut MlpModel, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    model.check_grad_shape(grads)?;
    model.check_grad_shape(&state.m)?;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    };
    for (l, (w, b)) in model.params_mut().enumerate() {
        Zip::from(w).and(&grads.weights[l]).and(&mut state.m.weights[l]).and(&mut state.v.weights[l]).for_each(update);
        Zip::from(b).and(&grads.biases[l]).and(&mut state.m.biases[l]).and(&mut state.v.biases[l]).for_each(update);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::nn::mlp::OutputHead;

    fn grads_filled(m: &MlpModel, g: f64) -> Gradients {
        let mut gr = Gradients::zeros_like(m);
        gr.weights.iter_mut().for_each(|w| w.fill(g));
        gr.biases.iter_mut().for_each(|b| b.fill(g));
        gr
    }

    #[test]
    fn first_step_closed_form() {
        let mut m = MlpModel::new(3, &[2], 1, OutputHead::SigmoidBinary, 0).unwrap();
        let before = m.flatten();
        let mut st = AdamState::new(&m);
        let g = grads_filled(&m, 0.5);
        adam_step(&mut m, &g, &mut st, 0.01).unwrap();
        // Δθ = -lr·ĝ/(|ĝ|+ε) with ĝ = g on step one
        let expected = -0.01 * 0.5 / (0.5 + EPSILON);
        for (a, b) in m.flatten().iter().zip(&before) {
            assert!(((a - b) - expected).abs() < 1e-15);
            assert!(((a - b) + 0.01).abs() < 1e-9);
        }
        assert_eq!(st.step(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut m = MlpModel::new(3, &[2], 1, OutputHead::SigmoidBinary, 0).unwrap();
        let before = m.clone();
        let mut st = AdamState::new(&m);
        adam_step(&mut m, &Gradients::zeros_like(&before), &mut st, 0.1).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn shape_mismatch() {
        let mut m = MlpModel::new(3, &[2], 1, OutputHead::SigmoidBinary, 0).unwrap();
        let other = MlpModel::new(4, &[2], 1, OutputHead::SigmoidBinary, 0).unwrap();
        let mut st = AdamState::new(&m);
        assert!(matches!(adam_step(&mut m, &Gradients::zeros_like(&other), &mut st, 0.1), Err(Error::ShapeMismatch(_))));
    }
}
