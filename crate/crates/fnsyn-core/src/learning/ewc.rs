//! Elastic weight consolidation: a quadratic pull toward past-task parameters,
//! weighted by the diagonal Fisher information.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, Workspace};
use crate::error::{config, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EwcConfig {
    /// One anchor and Fisher per past task.
    Standard { lambda: f64 },
    /// A single running anchor; the Fisher decays by `gamma` at each boundary.
    Online { lambda: f64, gamma: f64 },
}

impl EwcConfig {
    pub fn standard() -> Self {
        Self::Standard { lambda: 5000.0 }
    }

    pub fn online() -> Self {
        Self::Online { lambda: 100.0, gamma: 0.9 }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            Self::Standard { lambda } | Self::Online { lambda, .. } => lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda() >= 0.0 && self.lambda().is_finite()) {
            return Err(config!("EWC lambda must be non-negative"));
        }
        if let Self::Online { gamma, .. } = *self {
            if !(0.0..=1.0).contains(&gamma) {
                return Err(config!("online EWC decay must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ewc {
    cfg: EwcConfig,
    anchors: Vec<Vec<f32>>,
    fishers: Vec<Vec<f32>>,
}

impl Ewc {
    pub fn new(cfg: EwcConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, anchors: Vec::new(), fishers: Vec::new() })
    }

    pub fn config(&self) -> &EwcConfig {
        &self.cfg
    }

    pub fn n_anchors(&self) -> usize {
        self.anchors.len()
    }

    /// Records a task boundary.
    pub fn consolidate(&mut self, params: &[f32], fisher: Vec<f32>) {
        assert_eq!(params.len(), fisher.len());
        match self.cfg {
            EwcConfig::Standard { .. } => {
                self.anchors.push(params.to_vec());
                self.fishers.push(fisher);
            }
            EwcConfig::Online { gamma, .. } => {
                let g = gamma as f32;
                match self.fishers.first_mut() {
                    Some(f) => {
                        for (a, b) in f.iter_mut().zip(&fisher) {
                            *a = g * *a + b;
                        }
                        self.anchors[0].copy_from_slice(params);
                    }
                    None => {
                        self.anchors.push(params.to_vec());
                        self.fishers.push(fisher);
                    }
                }
            }
        }
    }

    /// `lambda/2 * sum_k F_k (theta - theta*_k)^2`.
    pub fn penalty(&self, params: &[f32]) -> f64 {
        let lambda = self.cfg.lambda();
        let mut total = 0.0;
        for (anchor, fisher) in self.anchors.iter().zip(&self.fishers) {
            for ((p, a), f) in params.iter().zip(anchor).zip(fisher) {
                let d = (*p - *a) as f64;
                total += *f as f64 * d * d;
            }
        }
        0.5 * lambda * total
    }

    /// Adds `lambda * F_k (theta - theta*_k)` to `grad`.
    pub fn add_penalty_grad(&self, params: &[f32], grad: &mut [f32]) {
        let lambda = self.cfg.lambda() as f32;
        if lambda == 0.0 {
            return;
        }
        for (anchor, fisher) in self.anchors.iter().zip(&self.fishers) {
            for i in 0..grad.len() {
                grad[i] += lambda * fisher[i] * (params[i] - anchor[i]);
            }
        }
    }
}

/// Diagonal Fisher `E_x sum_c p(c|x) (d log p(c|x) / d theta)^2`, with the
/// expectation over classes taken exactly under the model.
pub fn diagonal_fisher(net: &Mlp<f32>, x: &[f32]) -> Result<Vec<f32>> {
    let d = net.input_dim();
    let k = net.output_dim();
    let n = x.len() / d;
    let mut fisher = vec![0.0f64; net.n_params()];
    let mut ws: Workspace<f32> = net.workspace(1);
    let mut grad = vec![0.0f32; net.n_params()];
    for sample in x.chunks_exact(d) {
        let probs: Vec<f32> = net.forward(sample, &mut ws)?.to_vec();
        for c in 0..k {
            let pc = probs[c] as f64;
            if pc < 1e-12 {
                continue;
            }
            // Gradient of -log p(c|x); its square is what the Fisher needs.
            net.loss_and_grad(sample, &[c as u8], &mut ws, &mut grad)?;
            for (f, g) in fisher.iter_mut().zip(&grad) {
                *f += pc * (*g as f64) * (*g as f64);
            }
        }
    }
    let inv = 1.0 / n.max(1) as f64;
    Ok(fisher.into_iter().map(|f| (f * inv) as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_anchor_and_zero_lambda() {
        let mut e = Ewc::new(EwcConfig::Standard { lambda: 3.0 }).unwrap();
        e.consolidate(&[1.0, 2.0], vec![0.5, 4.0]);
        let mut g = [0.0f32; 2];
        e.add_penalty_grad(&[1.0, 2.0], &mut g);
        assert_eq!(g, [0.0, 0.0]);
        assert_eq!(e.penalty(&[1.0, 2.0]), 0.0);

        let mut z = Ewc::new(EwcConfig::Standard { lambda: 0.0 }).unwrap();
        z.consolidate(&[0.0, 0.0], vec![1.0, 1.0]);
        let mut g = [0.25f32, -1.0];
        z.add_penalty_grad(&[5.0, 5.0], &mut g);
        assert_eq!(g, [0.25, -1.0]);
    }

    #[test]
    fn online_keeps_single_decayed_set() {
        let mut e = Ewc::new(EwcConfig::Online { lambda: 1.0, gamma: 0.5 }).unwrap();
        e.consolidate(&[0.0], vec![2.0]);
        e.consolidate(&[1.0], vec![1.0]);
        assert_eq!(e.n_anchors(), 1);
        // F = 0.5 * 2 + 1 = 2, anchor 1.
        assert!((e.penalty(&[2.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_gradient_matches_finite_difference() {
        let mut e = Ewc::new(EwcConfig::Standard { lambda: 7.0 }).unwrap();
        e.consolidate(&[0.5, -1.0, 2.0], vec![0.3, 1.2, 0.05]);
        e.consolidate(&[0.0, 0.25, 1.0], vec![0.9, 0.1, 2.0]);
        let p = [0.75f32, -0.5, 1.5];
        let mut g = [0.0f32; 3];
        e.add_penalty_grad(&p, &mut g);
        let h = 1e-2f32;
        for i in 0..3 {
            let (mut up, mut dn) = (p, p);
            up[i] += h;
            dn[i] -= h;
            // The penalty is quadratic, so the central difference is exact up to rounding.
            let fd = (e.penalty(&up) - e.penalty(&dn)) / (up[i] - dn[i]) as f64;
            assert!((fd - g[i] as f64).abs() < 1e-6 * (1.0 + fd.abs()), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(EwcConfig::Online { lambda: 1.0, gamma: 1.5 }.validate().is_err());
        assert!(EwcConfig::Standard { lambda: -1.0 }.validate().is_err());
    }
}
