//! First-order optimizers. They only *propose* parameter deltas; the parameter
//! store decides how a delta is realized.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self { kind: OptimizerKind::Sgd, learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self { kind: OptimizerKind::Adam, ..Self::sgd(learning_rate) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(config!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(config!("Adam betas must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(config!("Adam eps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    m: Vec<f32>,
    v: Vec<f32>,
    t: u32,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, n_params: usize) -> Result<Self> {
        cfg.validate()?;
        let (m, v) = match cfg.kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => (vec![0.0; n_params], vec![0.0; n_params]),
        };
        Ok(Self { cfg, m, v, t: 0 })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    /// Writes the proposed update `delta` for gradient `grad`.
    pub fn delta(&mut self, grad: &[f32], delta: &mut [f32]) {
        assert_eq!(grad.len(), delta.len());
        let lr = self.cfg.learning_rate;
        match self.cfg.kind {
            OptimizerKind::Sgd => {
                let lr = lr as f32;
                for (d, g) in delta.iter_mut().zip(grad) {
                    *d = -lr * g;
                }
            }
            OptimizerKind::Adam => {
                assert_eq!(grad.len(), self.m.len());
                self.t += 1;
                let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
                let t = self.t as f64;
                let c1 = 1.0 - libm::pow(b1, t);
                let c2 = 1.0 - libm::pow(b2, t);
                // Folded bias correction: lr * sqrt(c2)/c1 * m / (sqrt(v) + eps * sqrt(c2)).
                let step = (lr * libm::sqrt(c2) / c1) as f32;
                let eps = (self.cfg.eps * libm::sqrt(c2)) as f32;
                let (b1, b2) = (b1 as f32, b2 as f32);
                for i in 0..grad.len() {
                    let g = grad[i];
                    let m = b1 * self.m[i] + (1.0 - b1) * g;
                    let v = b2 * self.v[i] + (1.0 - b2) * g * g;
                    self.m[i] = m;
                    self.v[i] = v;
                    delta[i] = -step * m / (libm::sqrtf(v) + eps);
                }
            }
        }
    }
}
