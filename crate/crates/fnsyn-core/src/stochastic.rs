//! Single-electron FN synapse: tunneling events are Poisson distributed and
//! each one lowers its node by `q / C_T`.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, ELECTRON_CHARGE};
use crate::error::{config, domain, Result};
use crate::math::{exp, floor, sqrt};
use crate::synapse::{coupled_potentials, coupling_shift, Pulse, SynapseState};

/// Below this mean the sampler inverts the CDF directly.
pub const INVERSION_LIMIT: f64 = 10.0;
/// Above this mean a continuity-corrected normal draw replaces the exact sampler.
pub const NORMAL_LIMIT: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticConfig {
    pub seed: u64,
    /// Node potential below which single-electron effects must be modeled, V.
    pub regime_threshold: f64,
}

impl Default for StochasticConfig {
    fn default() -> Self {
        Self { seed: 0, regime_threshold: 6.0 }
    }
}

impl StochasticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.regime_threshold > 0.0) {
            return Err(config!("regime_threshold must be positive"));
        }
        Ok(())
    }

    pub fn requires_poisson(&self, v: f64) -> bool {
        v < self.regime_threshold
    }
}

/// Instantaneous expected electron count `C_T J(v) dt / q` (equivalently
/// `A J_phys dt / q`). Accurate while the node moves little during the pulse.
pub fn electron_rate(v: f64, p: &DeviceParams, pulse_width: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(domain!("potential must be positive, got {v} V"));
    }
    Ok(p.c_total * p.rate(v) * pulse_width / ELECTRON_CHARGE)
}

/// Physical current density implied by the voltage-rate law, A/m^2.
pub fn current_density(v: f64, p: &DeviceParams) -> f64 {
    p.c_total * p.rate(v) / p.area
}

/// Expected count over a pulse, integrating the node's own discharge. This is
/// what the sampler uses, so the ensemble mean equals the deterministic drop.
pub fn expected_electrons(v: f64, p: &DeviceParams, pulse_width: f64) -> f64 {
    p.discharge(v, pulse_width) / p.volts_per_electron()
}

/// Poisson draw; see [`INVERSION_LIMIT`] and [`NORMAL_LIMIT`].
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if !(lambda > 0.0) {
        return 0;
    }
    if lambda < INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut pk = exp(-lambda);
        let mut cdf = pk;
        while u > cdf && k < 1000 {
            k += 1;
            pk *= lambda / k as f64;
            cdf += pk;
        }
        return k;
    }
    if lambda <= NORMAL_LIMIT {
        let d = Poisson::new(lambda).expect("finite positive mean");
        return d.sample(rng) as u64;
    }
    let z: f64 = StandardNormal.sample(rng);
    floor(lambda + sqrt(lambda) * z + 0.5).max(0.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticOutcome {
    pub state: SynapseState,
    pub e_plus: u64,
    pub e_minus: u64,
}

/// One pulse with sampled electron counts on each junction.
pub fn stochastic_pulse<R: Rng + ?Sized>(
    s: SynapseState,
    pulse: &Pulse,
    p: &DeviceParams,
    rng: &mut R,
) -> StochasticOutcome {
    let (vp, vm) = coupled_potentials(&s, pulse, p);
    let e_plus = sample_poisson(expected_electrons(vp, p, pulse.width), rng);
    let e_minus = sample_poisson(expected_electrons(vm, p, pulse.width), rng);
    let q = p.volts_per_electron();
    StochasticOutcome {
        state: SynapseState {
            w_plus: s.w_plus - q * e_plus as f64,
            w_minus: s.w_minus - q * e_minus as f64,
        },
        e_plus,
        e_minus,
    }
}

/// Mean differential electron count per pulse at a balanced usage `w_c`.
pub fn electrons_per_update(w_c: f64, pulse: &Pulse, p: &DeviceParams) -> (f64, f64) {
    let shift = coupling_shift(p, pulse.magnitude);
    (
        expected_electrons(w_c + shift, p, pulse.width),
        expected_electrons(w_c - shift, p, pulse.width),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::synapse::{apply_pulse_exact, Polarity};

    #[test]
    fn volts_per_electron_at_default_capacitance() {
        let p = DeviceParams::default();
        assert!((p.volts_per_electron() - 1.001_360_396_25e-7).abs() < 1e-16);
    }

    #[test]
    fn zero_rate_leaves_state() {
        let p = DeviceParams::default();
        let s = SynapseState::symmetric(0.2);
        let out = stochastic_pulse(s, &Pulse::default(), &p, &mut rng::stream(1, 0));
        assert_eq!(out.state, s);
        assert_eq!(electron_rate(0.2, &p, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn rate_is_linear_in_width() {
        let p = DeviceParams::default();
        let a = electron_rate(4.5, &p, 0.1).unwrap();
        let b = electron_rate(4.5, &p, 0.3).unwrap();
        assert!((b / a - 3.0).abs() < 1e-12);
        assert!(electron_rate(0.0, &p, 0.1).is_err());
    }

    #[test]
    fn poisson_moments() {
        let mut r = rng::stream(3, 9);
        for &lam in &[0.3, 4.0, 60.0, 5e4] {
            let n = 40_000;
            let xs: alloc::vec::Vec<f64> = (0..n).map(|_| sample_poisson(lam, &mut r) as f64).collect();
            let m = crate::stats::mean(&xs);
            let v = crate::stats::variance(&xs);
            let se = sqrt(lam / n as f64);
            assert!((m - lam).abs() < 5.0 * se, "lambda {lam}: mean {m}");
            assert!((v / lam - 1.0).abs() < 0.05, "lambda {lam}: var {v}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let p = DeviceParams::default();
        let pulse = Pulse::default();
        let run = |seed| {
            let mut r = rng::stream(seed, 0);
            let mut s = SynapseState::symmetric(4.6);
            for k in 0..50 {
                let pol = if k % 3 == 0 { Polarity::Depression } else { Polarity::Potentiation };
                s = stochastic_pulse(s, &pulse.with_polarity(pol), &p, &mut r).state;
            }
            s
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn mean_count_matches_exact_drop() {
        let p = DeviceParams::default();
        let s = SynapseState::symmetric(4.6);
        let pulse = Pulse::default();
        let det = apply_pulse_exact(s, &pulse, &p);
        let (lp, lm) = electrons_per_update(4.6, &pulse, &p);
        let q = p.volts_per_electron();
        assert!(((s.w_minus - det.w_minus) / q - lp).abs() < 1e-6 * lp);
        assert!(((s.w_plus - det.w_plus) / q - lm).abs() < 1e-6 * lm.max(1.0));
    }
}
