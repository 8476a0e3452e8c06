use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{ModelParams, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::InvalidConfig(format!("invalid optimizer settings {self:?}")));
        }
        Ok(())
    }
}

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub first_moment: ModelParams<T>,
    pub second_moment: ModelParams<T>,
    pub step: u64,
    pub config: AdamConfig,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &ModelParams<T>, config: AdamConfig) -> Self {
        Self {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update on flat slices. `step` is the 1-based
/// index of this update.
pub fn adam_update<T: Scalar>(theta: &mut [T], grad: &[T], m: &mut [T], v: &mut [T], step: u64, cfg: &AdamConfig) {
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let c1 = T::from_f64(1.0 / (1.0 - cfg.beta1.powf(step as f64)));
    let c2 = 1.0 / (1.0 - cfg.beta2.powf(step as f64));
    let lr = T::from_f64(cfg.learning_rate);
    let eps = cfg.epsilon;
    for (((t, &g), m), v) in theta.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = b1 * *m + (T::ONE - b1) * g;
        *v = b2 * *v + (T::ONE - b2) * g * g;
        let denom = T::from_f64((v.to_f64() * c2).sqrt() + eps);
        *t -= lr * (*m * c1) / denom;
    }
}

/// Applies one Adam step to every parameter tensor.
pub fn adam_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut OptimizerState<T>,
) -> Result<()> {
    grads.check_same_shape(params)?;
    state.first_moment.check_same_shape(params)?;
    state.second_moment.check_same_shape(params)?;
    state.step += 1;
    let step = state.step;
    let cfg = state.config;
    let moments = state.first_moment.tensors_mut().zip(state.second_moment.tensors_mut());
    for ((p, g), (m, v)) in params.tensors_mut().zip(grads.tensors()).zip(moments) {
        adam_update(p.data_mut(), g.data(), m.data_mut(), v.data_mut(), step, &cfg);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, NetworkSpec};

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let spec = NetworkSpec::standard(8);
        let mut params = init_params::<f32>(&spec, 1).unwrap();
        let before = params.clone();
        let mut state = OptimizerState::new(&params, AdamConfig::default());
        state.first_moment.tensors_mut().for_each(|t| t.fill(1.0));
        state.second_moment.tensors_mut().for_each(|t| t.fill(1.0));
        let zeros = params.zeros_like();
        adam_step(&mut params, &zeros, &mut state).unwrap();
        assert_eq!(state.step, 1);
        assert!(state
            .first_moment
            .tensors()
            .all(|t| t.data().iter().all(|&m| (m - 0.9).abs() < 1e-7)));
        assert!(state
            .second_moment
            .tensors()
            .all(|t| t.data().iter().all(|&v| (v - 0.999).abs() < 1e-7)));
        // nonzero moments still move the parameters; reset and check the pure zero case
        let mut params = before.clone();
        let mut state = OptimizerState::new(&params, AdamConfig::default());
        adam_step(&mut params, &zeros, &mut state).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_is_bounded_by_learning_rate() {
        let cfg = AdamConfig {
            learning_rate: 0.01,
            ..AdamConfig::default()
        };
        let grad = [1e-6, -3.0, 250.0, 0.0, -1e4];
        let mut theta = [0.0f64; 5];
        let (mut m, mut v) = ([0.0; 5], [0.0; 5]);
        adam_update(&mut theta, &grad, &mut m, &mut v, 1, &cfg);
        for (t, g) in theta.iter().zip(grad) {
            assert!(t.abs() <= cfg.learning_rate * (1.0 + 1e-6));
            assert!(*t == 0.0 || t.signum() == -g.signum());
        }
    }

    #[test]
    fn step_counter_increases() {
        let spec = NetworkSpec::standard(8);
        let mut params = init_params::<f32>(&spec, 1).unwrap();
        let mut state = OptimizerState::new(&params, AdamConfig::default());
        let g = params.zeros_like();
        for expected in 1..=3 {
            adam_step(&mut params, &g, &mut state).unwrap();
            assert_eq!(state.step, expected);
        }
    }

    #[test]
    fn rejects_mismatched_gradients() {
        let mut params = init_params::<f32>(&NetworkSpec::standard(8), 1).unwrap();
        let other = init_params::<f32>(&NetworkSpec::standard(16), 1).unwrap();
        let mut state = OptimizerState::new(&params, AdamConfig::default());
        assert!(matches!(
            adam_step(&mut params, &other, &mut state),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
