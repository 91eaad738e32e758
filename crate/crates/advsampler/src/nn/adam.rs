//! Adam optimizer with bias correction.

use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use super::mlp::{Gradient, MlpNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates mirroring one network's parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    cfg: AdamConfig,
    step_count: u64,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl AdamState {
    pub fn new(net: &MlpNetwork, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            step_count: 0,
            m_w: net.weights().iter().map(|w| Array2::zeros(w.dim())).collect(),
            v_w: net.weights().iter().map(|w| Array2::zeros(w.dim())).collect(),
            m_b: net.biases().iter().map(|b| Array1::zeros(b.len())).collect(),
            v_b: net.biases().iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    /// One descent step: `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, net: &mut MlpNetwork, grad: &Gradient) -> Result<()> {
        if grad.weights.len() != self.m_w.len() {
            return Err(Error::Dimension {
                context: "adam gradient layer count",
                expected: self.m_w.len(),
                got: grad.weights.len(),
            });
        }
        if !grad.is_finite() {
            return Err(Error::Numeric("non-finite gradient passed to Adam".into()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let (weights, biases) = net.params_mut();
        for l in 0..weights.len() {
            Zip::from(&mut weights[l])
                .and(&mut self.m_w[l])
                .and(&mut self.v_w[l])
                .and(&grad.weights[l])
                .for_each(|p, m, v, &g| {
                    *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                    *p -= c.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + c.epsilon);
                });
            Zip::from(&mut biases[l])
                .and(&mut self.m_b[l])
                .and(&mut self.v_b[l])
                .and(&grad.biases[l])
                .for_each(|p, m, v, &g| {
                    *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                    *p -= c.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + c.epsilon);
                });
        }
        Ok(())
    }
}
