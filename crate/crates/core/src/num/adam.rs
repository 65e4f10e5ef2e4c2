//! Trainable parameters and the Adam update rule.

use super::scalar::Scalar;
use super::tensor::Tensor2;
use crate::error::{Error, Result};

/// A trainable tensor with an accumulated gradient.
#[derive(Debug, Clone)]
pub struct Parameter<T> {
    pub value: Tensor2<T>,
    pub gradient: Tensor2<T>,
    pub trainable: bool,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(value: Tensor2<T>) -> Self {
        let gradient = Tensor2::zeros(value.rows(), value.cols());
        Self {
            value,
            gradient,
            trainable: true,
        }
    }

    pub fn frozen(value: Tensor2<T>) -> Self {
        let mut p = Self::new(value);
        p.trainable = false;
        p
    }

    pub fn zero_grad(&mut self) {
        self.gradient.fill(T::zero());
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }
}

/// Per-parameter Adam state: first/second moment estimates plus the
/// hyperparameters of the update rule.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub first_moment: Tensor2<T>,
    pub second_moment: Tensor2<T>,
    pub step_count: u64,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state with the usual defaults (beta1=0.9, beta2=0.999, eps=1e-8).
    pub fn new(rows: usize, cols: usize, learning_rate: T) -> Self {
        Self {
            first_moment: Tensor2::zeros(rows, cols),
            second_moment: Tensor2::zeros(rows, cols),
            step_count: 0,
            learning_rate,
            beta1: T::from_f64_lossy(0.9),
            beta2: T::from_f64_lossy(0.999),
            epsilon: T::from_f64_lossy(1e-8),
        }
    }

    pub fn for_param(param: &Parameter<T>, learning_rate: T) -> Self {
        let (r, c) = param.shape();
        Self::new(r, c, learning_rate)
    }
}

/// One bias-corrected Adam update. The gradient is consumed as-is and left
/// intact; callers zero it at the start of the next step.
pub fn adam_step<T: Scalar>(param: &mut Parameter<T>, state: &mut AdamState<T>) -> Result<()> {
    if !param.trainable {
        return Ok(());
    }
    if param.gradient.shape() != param.value.shape() {
        return Err(Error::Config(format!(
            "gradient shape {:?} does not match value shape {:?}",
            param.gradient.shape(),
            param.value.shape()
        )));
    }
    if state.first_moment.shape() != param.value.shape() {
        return Err(Error::Config(format!(
            "adam state shape {:?} does not match parameter shape {:?}",
            state.first_moment.shape(),
            param.value.shape()
        )));
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let b1 = state.beta1;
    let b2 = state.beta2;
    let bias1 = T::one() - b1.powi(t);
    let bias2 = T::one() - b2.powi(t);

    let n = param.value.len();
    for i in 0..n {
        let g = param.gradient.values()[i];
        let m = b1 * state.first_moment.values()[i] + (T::one() - b1) * g;
        let v = b2 * state.second_moment.values()[i] + (T::one() - b2) * g * g;
        state.first_moment.values_mut()[i] = m;
        state.second_moment.values_mut()[i] = v;
        let m_hat = m / bias1;
        let v_hat = v / bias2;
        param.value.values_mut()[i] =
            param.value.values()[i] - state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// Adam applied uniformly over an ordered parameter list.
pub struct Optimizer<T> {
    states: Vec<AdamState<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(params: &[&Parameter<T>], learning_rate: T) -> Self {
        Self {
            states: params
                .iter()
                .map(|p| AdamState::for_param(p, learning_rate))
                .collect(),
        }
    }

    /// Updates each parameter from its accumulated gradient, then zeroes
    /// the gradients.
    pub fn step(&mut self, params: &mut [&mut Parameter<T>]) -> Result<()> {
        assert_eq!(params.len(), self.states.len(), "parameter count changed");
        for (p, s) in params.iter_mut().zip(&mut self.states) {
            adam_step(p, s)?;
            p.zero_grad();
        }
        Ok(())
    }
}
