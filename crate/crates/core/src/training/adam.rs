//! Adam with L2 weight decay folded into the gradient.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            weight_decay: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<Matrix>,
    pub second_moment: Vec<Matrix>,
    pub step: u64,
}

impl AdamState {
    pub fn for_shapes(shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let first_moment: Vec<Matrix> = shapes
            .into_iter()
            .map(|(r, c)| Matrix::zeros(r, c))
            .collect();
        Self {
            second_moment: first_moment.clone(),
            first_moment,
            step: 0,
        }
    }

    pub fn for_params(params: &ModelParams) -> Self {
        Self::for_shapes(params.tensors().iter().map(|m| m.shape()))
    }
}

/// One Adam update over parallel lists of parameters and gradients:
/// `g ← g + wd·θ`, then the bias-corrected moment step.
pub fn adam_update(
    params: &mut [&mut Matrix],
    grads: &[Matrix],
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::Contract(format!(
            "adam: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::Shape {
                op: "adam_step",
                left: p.shape(),
                right: g.shape(),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let AdamConfig {
        learning_rate,
        weight_decay,
        beta1,
        beta2,
        epsilon,
    } = *config;
    let correction1 = 1.0 - beta1.powi(t);
    let correction2 = 1.0 - beta2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.first_moment[i].as_mut_slice();
        let v = state.second_moment[i].as_mut_slice();
        for (k, (theta, &grad)) in p.as_mut_slice().iter_mut().zip(g.as_slice()).enumerate() {
            let grad = grad + weight_decay * *theta;
            m[k] = beta1 * m[k] + (1.0 - beta1) * grad;
            v[k] = beta2 * v[k] + (1.0 - beta2) * grad * grad;
            let m_hat = m[k] / correction1;
            let v_hat = v[k] / correction2;
            *theta -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

/// [`adam_update`] over a model's parameters in canonical order.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[Matrix],
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    let mut tensors = params.tensors_mut();
    adam_update(&mut tensors, grads, state, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_gradient_without_decay_is_a_fixed_point() {
        let mut p = Matrix::from_rows(&[[0.3, -1.2], [2.0, 0.0]]);
        let before = p.clone();
        let mut state = AdamState::for_shapes([(2, 2)]);
        let config = AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        for _ in 0..5 {
            adam_update(&mut [&mut p], &[Matrix::zeros(2, 2)], &mut state, &config).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Matrix::scalar(0.0);
        let mut state = AdamState::for_shapes([(1, 1)]);
        let config = AdamConfig {
            learning_rate: 0.1,
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        adam_update(&mut [&mut p], &[Matrix::scalar(1.0)], &mut state, &config).unwrap();
        // m̂ = 1, v̂ = 1
        let oracle = -0.1 * (1.0 / (1.0 + 1e-8));
        assert_relative_eq!(p.item().unwrap(), oracle, epsilon = 1e-15);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn weight_decay_enters_the_gradient() {
        let mut p = Matrix::scalar(2.0);
        let mut state = AdamState::for_shapes([(1, 1)]);
        let config = AdamConfig {
            learning_rate: 0.1,
            weight_decay: 0.5,
            ..AdamConfig::default()
        };
        // g = 0 + 0.5 * 2 = 1 > 0, so the parameter shrinks by ~lr.
        adam_update(&mut [&mut p], &[Matrix::scalar(0.0)], &mut state, &config).unwrap();
        assert_relative_eq!(p.item().unwrap(), 1.9, epsilon = 1e-7);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = Matrix::zeros(2, 2);
        let mut state = AdamState::for_shapes([(2, 2)]);
        let err = adam_update(
            &mut [&mut p],
            &[Matrix::zeros(2, 1)],
            &mut state,
            &AdamConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }
}
