//! Where parameters live. The conventional store adds optimizer deltas
//! directly; the FN store realizes each delta as a programming pulse on a
//! differential FN synapse, so how much a requested delta actually moves the
//! weight depends on that synapse's usage history.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::error::{config, Result};
use crate::synapse::{coupling_shift, reduced_step, Polarity, SynapseState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnStoreConfig {
    /// Junction constants; `wc0` is the usage every synapse starts from.
    pub device: DeviceParams,
    /// Volts of `w_d` per unit weight.
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Programming pulse amplitude, V.
    #[serde(default = "default_magnitude")]
    pub magnitude: f64,
    /// Usage at which pulse width is calibrated: there, a width of
    /// `|delta| * scale / rate` realizes `delta` exactly.
    #[serde(default = "default_reference_wc")]
    pub reference_wc: f64,
    /// Longest pulse, s; larger requests are clamped.
    #[serde(default = "default_max_width")]
    pub max_width: f64,
    /// Relative uniform jitter of per-synapse k1 and k2.
    #[serde(default)]
    pub mismatch: f64,
}

fn default_scale() -> f64 {
    0.05
}
fn default_magnitude() -> f64 {
    4.0
}
fn default_reference_wc() -> f64 {
    4.5
}
fn default_max_width() -> f64 {
    1.0
}

impl Default for FnStoreConfig {
    fn default() -> Self {
        Self {
            device: DeviceParams::default(),
            scale: default_scale(),
            magnitude: default_magnitude(),
            reference_wc: default_reference_wc(),
            max_width: default_max_width(),
            mismatch: 0.0,
        }
    }
}

impl FnStoreConfig {
    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        for (name, v) in [
            ("scale", self.scale),
            ("magnitude", self.magnitude),
            ("reference_wc", self.reference_wc),
            ("max_width", self.max_width),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..0.5).contains(&self.mismatch) {
            return Err(config!("mismatch must be in [0, 0.5), got {}", self.mismatch));
        }
        Ok(())
    }

    /// Differential write rate at the reference usage, V/s.
    pub fn reference_rate(&self) -> f64 {
        let p = &self.device;
        let s = coupling_shift(p, self.magnitude);
        0.5 * (p.rate(self.reference_wc + s) - p.rate(self.reference_wc - s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnWeightStore {
    cfg: FnStoreConfig,
    states: Vec<SynapseState>,
    /// Per-synapse `(k1, k2)` when mismatch is enabled.
    constants: Option<Vec<(f64, f64)>>,
    seconds_per_volt: f64,
    pulses: u64,
    clamped: u64,
    seconds: f64,
}

impl FnWeightStore {
    /// One synapse per parameter, programmed to `w_d = scale * weight` at `w_c = wc0`.
    pub fn new<R: Rng + ?Sized>(cfg: FnStoreConfig, weights: &[f32], rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let wc0 = cfg.device.wc0;
        let states =
            weights.iter().map(|&w| SynapseState::from_parts(cfg.scale * w as f64, wc0)).collect();
        let constants = (cfg.mismatch > 0.0).then(|| {
            let j = cfg.mismatch;
            weights
                .iter()
                .map(|_| {
                    let k1 = cfg.device.k1 * (1.0 + j * (2.0 * rng.random::<f64>() - 1.0));
                    let k2 = cfg.device.k2 * (1.0 + j * (2.0 * rng.random::<f64>() - 1.0));
                    (k1, k2)
                })
                .collect()
        });
        Ok(Self {
            seconds_per_volt: 1.0 / cfg.reference_rate(),
            cfg,
            states,
            constants,
            pulses: 0,
            clamped: 0,
            seconds: 0.0,
        })
    }

    pub fn config(&self) -> &FnStoreConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[SynapseState] {
        &self.states
    }

    /// Weight as seen by the network.
    pub fn read(&self, i: usize) -> f32 {
        (self.states[i].w_d() / self.cfg.scale) as f32
    }

    pub fn usage(&self, i: usize) -> f64 {
        self.states[i].w_c()
    }

    /// Pulses applied so far.
    pub fn pulses(&self) -> u64 {
        self.pulses
    }

    /// Pulses whose requested width exceeded `max_width`.
    pub fn clamped(&self) -> u64 {
        self.clamped
    }

    /// Total programming time over all synapses, s.
    pub fn pulse_seconds(&self) -> f64 {
        self.seconds
    }

    /// Pulse width requested for a weight change `delta`.
    pub fn width_for(&self, delta: f32) -> f64 {
        (delta as f64).abs() * self.cfg.scale * self.seconds_per_volt
    }

    /// Turns each requested change into a pulse, advances the synapse and
    /// writes the realized weight back into `params`. Returns the number of
    /// pulses clamped in this call.
    pub fn apply(&mut self, params: &mut [f32], delta: &[f32]) -> u64 {
        assert_eq!(params.len(), self.states.len());
        assert_eq!(delta.len(), self.states.len());
        let mut clamped = 0;
        let mut seconds = 0.0;
        let mut p = self.cfg.device;
        for i in 0..self.states.len() {
            let d = delta[i];
            if d == 0.0 {
                continue;
            }
            let mut width = self.width_for(d);
            if width > self.cfg.max_width {
                width = self.cfg.max_width;
                clamped += 1;
            }
            seconds += width;
            if let Some(c) = &self.constants {
                (p.k1, p.k2) = c[i];
            }
            let s = self.states[i];
            let step = reduced_step(s.w_c(), self.cfg.magnitude, width, &p);
            let pol = if d > 0.0 { Polarity::Potentiation } else { Polarity::Depression };
            let w_d = step.alpha * s.w_d() + pol.sign() * step.write;
            self.states[i] = SynapseState::from_parts(w_d, step.wc_next);
            params[i] = (w_d / self.cfg.scale) as f32;
        }
        self.pulses += delta.iter().filter(|d| **d != 0.0).count() as u64;
        self.clamped += clamped;
        self.seconds += seconds;
        clamped
    }
}

/// Parameter storage strategy.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamStore {
    Conventional,
    Fn(FnWeightStore),
}

impl ParamStore {
    /// Applies proposed deltas; returns the number of clamped pulses.
    pub fn apply(&mut self, params: &mut [f32], delta: &[f32]) -> u64 {
        match self {
            Self::Conventional => {
                for (p, d) in params.iter_mut().zip(delta) {
                    *p += d;
                }
                0
            }
            Self::Fn(s) => s.apply(params, delta),
        }
    }

    pub fn as_fn(&self) -> Option<&FnWeightStore> {
        match self {
            Self::Fn(s) => Some(s),
            Self::Conventional => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn store(weights: &[f32]) -> FnWeightStore {
        FnWeightStore::new(FnStoreConfig::default(), weights, &mut rng::stream(0, 0)).unwrap()
    }

    #[test]
    fn reads_back_initial_weights() {
        let w = [0.3f32, -0.7, 0.0];
        let s = store(&w);
        for i in 0..3 {
            assert!((s.read(i) - w[i]).abs() < 1e-6);
            assert_eq!(s.usage(i), 4.5);
        }
    }

    #[test]
    fn zero_delta_is_non_volatile() {
        let w = [0.3f32, -0.7];
        let mut s = store(&w);
        let mut p = [s.read(0), s.read(1)];
        let before = s.states().to_vec();
        s.apply(&mut p, &[0.0, 0.0]);
        assert_eq!(s.states(), &before[..]);
        assert_eq!(p, [s.read(0), s.read(1)]);
        assert_eq!(s.pulses(), 0);
    }

    #[test]
    fn small_delta_is_realized_at_reference_usage() {
        let mut s = store(&[0.0]);
        let mut p = [0.0f32];
        s.apply(&mut p, &[1e-4]);
        assert!((p[0] / 1e-4 - 1.0).abs() < 0.02, "{}", p[0]);
        let mut s = store(&[0.0]);
        let mut p = [0.0f32];
        s.apply(&mut p, &[-1e-4]);
        assert!((p[0] / -1e-4 - 1.0).abs() < 0.02);
    }

    #[test]
    fn repeated_use_makes_weights_rigid() {
        let mut s = store(&[0.0]);
        let mut p = [0.0f32];
        let mut steps = Vec::new();
        for _ in 0..200 {
            let before = p[0];
            s.apply(&mut p, &[1e-3]);
            steps.push(p[0] - before);
        }
        assert!(steps.windows(2).all(|w| w[1] < w[0]));
        assert!(s.usage(0) < 4.5);
    }

    #[test]
    fn lower_usage_is_less_plastic() {
        let lo = FnStoreConfig { device: DeviceParams::default().with_wc0(4.0), ..Default::default() };
        let mut a = FnWeightStore::new(lo, &[0.0], &mut rng::stream(0, 0)).unwrap();
        let mut b = store(&[0.0]);
        let (mut pa, mut pb) = ([0.0f32], [0.0f32]);
        a.apply(&mut pa, &[1e-3]);
        b.apply(&mut pb, &[1e-3]);
        assert!(pa[0] < 0.05 * pb[0]);
    }

    #[test]
    fn oversized_requests_are_clamped() {
        let mut s = store(&[0.0]);
        let mut p = [0.0f32];
        assert!(s.width_for(1.0) > 1.0);
        assert_eq!(s.apply(&mut p, &[1.0]), 1);
        assert_eq!(s.clamped(), 1);
    }

    #[test]
    fn conventional_adds_delta() {
        let mut p = [1.0f32, 2.0];
        ParamStore::Conventional.apply(&mut p, &[0.5, -1.0]);
        assert_eq!(p, [1.5, 1.0]);
    }

    #[test]
    fn mismatch_spreads_plasticity() {
        let cfg = FnStoreConfig { mismatch: 0.05, ..Default::default() };
        let mut s = FnWeightStore::new(cfg, &[0.0; 64], &mut rng::stream(4, 0)).unwrap();
        let mut p = [0.0f32; 64];
        s.apply(&mut p, &[1e-4; 64]);
        let min = p.iter().cloned().fold(f32::INFINITY, f32::min);
        let max = p.iter().cloned().fold(0.0, f32::max);
        assert!(max > 2.0 * min);
    }
}
