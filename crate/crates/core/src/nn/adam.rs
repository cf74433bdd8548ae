use serde::{Deserialize, Serialize};

use super::layer::{GradientBundle, LayerParams};
use crate::error::{shape_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.epsilon > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "bad Adam hyperparameters {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// First/second moment estimates for one parameter array pair.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: LayerParams,
    v: LayerParams,
    t: u64,
    config: AdamConfig,
}

impl AdamState {
    pub fn new(shape_of: &LayerParams, config: AdamConfig) -> Self {
        let zeros = LayerParams {
            weights: vec![0.0; shape_of.weights.len()],
            biases: vec![0.0; shape_of.biases.len()],
        };
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            config,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn first_moment(&self) -> &LayerParams {
        &self.m
    }

    pub fn second_moment(&self) -> &LayerParams {
        &self.v
    }
}

/// One bias-corrected Adam update. Entries whose gradient is exactly zero
/// keep their parameter and moments untouched.
pub fn adam_step(
    params: &mut LayerParams,
    grads: &GradientBundle,
    state: &mut AdamState,
    direction: Direction,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) {
        return Err(shape_err(
            "adam_step",
            format!("{}+{}", params.weights.len(), params.biases.len()),
            format!(
                "grads {}+{}, state {}+{}",
                grads.weights.len(),
                grads.biases.len(),
                state.m.weights.len(),
                state.m.biases.len()
            ),
        ));
    }
    state.t += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.t as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let sign = match direction {
        Direction::Minimize => -1.0,
        Direction::Maximize => 1.0,
    };
    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..p.len() {
            let gi = g[i];
            if gi == 0.0 {
                continue;
            }
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] += sign * lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    };
    update(
        &mut params.weights,
        &grads.weights,
        &mut state.m.weights,
        &mut state.v.weights,
    );
    update(
        &mut params.biases,
        &grads.biases,
        &mut state.m.biases,
        &mut state.v.biases,
    );
    Ok(())
}
