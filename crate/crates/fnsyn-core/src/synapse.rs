//! The differential FN synapse: two-node ODE oracle, the reduced discrete
//! update, and single-pulse characterization.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::error::{domain, Result};
use crate::math::{exp, ln1p};
use crate::ode::{self, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Potentiation,
    Depression,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Potentiation => 1.0,
            Polarity::Depression => -1.0,
        }
    }

    pub fn from_sign(x: f64) -> Self {
        if x >= 0.0 {
            Polarity::Potentiation
        } else {
            Polarity::Depression
        }
    }
}

/// Rectangular input stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pulse {
    pub polarity: Polarity,
    /// Amplitude, V.
    pub magnitude: f64,
    /// Duration, s.
    pub width: f64,
}

impl Default for Pulse {
    fn default() -> Self {
        Self { polarity: Polarity::Potentiation, magnitude: 4.0, width: 0.1 }
    }
}

impl Pulse {
    pub fn new(polarity: Polarity, magnitude: f64, width: f64) -> Result<Self> {
        let p = Self { polarity, magnitude, width };
        p.validate()?;
        Ok(p)
    }

    pub fn with_polarity(self, polarity: Polarity) -> Self {
        Self { polarity, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return Err(domain!("pulse magnitude must be >= 0, got {}", self.magnitude));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(domain!("pulse width must be > 0, got {}", self.width));
        }
        Ok(())
    }
}

/// Floating-gate potentials of the two tunneling nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynapseState {
    pub w_plus: f64,
    pub w_minus: f64,
}

impl SynapseState {
    /// Balanced state at common mode `w_c`.
    pub fn symmetric(w_c: f64) -> Self {
        Self { w_plus: w_c, w_minus: w_c }
    }

    pub fn from_parts(w_d: f64, w_c: f64) -> Self {
        Self { w_plus: w_c + w_d, w_minus: w_c - w_d }
    }

    /// Stored weight `(W+ - W-)/2`.
    #[inline]
    pub fn w_d(&self) -> f64 {
        0.5 * (self.w_plus - self.w_minus)
    }

    /// Usage `(W+ + W-)/2`.
    #[inline]
    pub fn w_c(&self) -> f64 {
        0.5 * (self.w_plus + self.w_minus)
    }

    /// `|w_d| / w_c`; the reduced model assumes this is small.
    pub fn taylor_ratio(&self) -> f64 {
        self.w_d().abs() / self.w_c()
    }

    pub fn is_valid(&self) -> bool {
        self.w_plus > 0.0 && self.w_minus > 0.0
    }

    /// Adds the same potential to both nodes; `w_d` is untouched.
    #[inline]
    pub fn lift(&mut self, v: f64) {
        self.w_plus += v;
        self.w_minus += v;
    }
}

/// Edge shift `(C_c/C_T) * X / 2` applied to each node by a step of `magnitude`.
pub fn coupling_shift(p: &DeviceParams, magnitude: f64) -> f64 {
    0.5 * p.coupling() * magnitude
}

/// Potentials seen by (W+, W-) while the pulse is held. Potentiation lifts W-
/// so that it tunnels faster and the difference W+ - W- grows.
pub fn coupled_potentials(s: &SynapseState, pulse: &Pulse, p: &DeviceParams) -> (f64, f64) {
    let shift = coupling_shift(p, pulse.magnitude) * pulse.polarity.sign();
    (s.w_plus - shift, s.w_minus + shift)
}

/// Ground-truth pulse response: integrates both node ODEs at the coupled
/// potentials. The state is integrated as a deviation from the pulse start so
/// that micro-volt updates keep full precision on top of multi-volt nodes.
pub fn apply_pulse_ode(s: SynapseState, pulse: &Pulse, p: &DeviceParams) -> Result<SynapseState> {
    apply_pulse_ode_with(s, pulse, p, &Tolerance::default())
}

pub fn apply_pulse_ode_with(
    s: SynapseState,
    pulse: &Pulse,
    p: &DeviceParams,
    tol: &Tolerance,
) -> Result<SynapseState> {
    pulse.validate()?;
    let (vp, vm) = coupled_potentials(&s, pulse, p);
    let rhs = |y: &[f64; 2]| [-p.rate(vp + y[0]), -p.rate(vm + y[1])];
    let (dy, _) = ode::integrate(rhs, [0.0, 0.0], pulse.width, tol)?;
    Ok(SynapseState { w_plus: s.w_plus + dy[0], w_minus: s.w_minus + dy[1] })
}

/// Same physics as [`apply_pulse_ode`] using the exact per-node closed form.
pub fn apply_pulse_exact(s: SynapseState, pulse: &Pulse, p: &DeviceParams) -> SynapseState {
    let (vp, vm) = coupled_potentials(&s, pulse, p);
    SynapseState {
        w_plus: s.w_plus - p.discharge(vp, pulse.width),
        w_minus: s.w_minus - p.discharge(vm, pulse.width),
    }
}

/// Weight decay factor of the `n`-th pulse:
/// `1 - (1 + 2/ln(k1 dt n + k0)) / (n + gamma)`.
pub fn alpha(n: u64, gamma_val: f64, p: &DeviceParams, pulse_width: f64) -> f64 {
    let n = n.max(1) as f64;
    let l0 = p.k2 / p.wc0;
    let log_term = l0 + ln1p(p.k1 * pulse_width * n * exp(-l0));
    1.0 - (1.0 + 2.0 / log_term) / (n + gamma_val)
}

/// `alpha(n) * w_d + input_delta`.
pub fn discrete_update(
    w_d: f64,
    n: u64,
    input_delta: f64,
    gamma_val: f64,
    p: &DeviceParams,
    pulse_width: f64,
) -> f64 {
    alpha(n, gamma_val, p, pulse_width) * w_d + input_delta
}

/// Effective coupled input step: the change of `w_d` a pulse produces on a
/// balanced synapse at usage `w_c` (signed by polarity).
pub fn write_step(w_c: f64, pulse: &Pulse, p: &DeviceParams) -> f64 {
    let shift = coupling_shift(p, pulse.magnitude);
    let dw = 0.5 * (p.discharge(w_c + shift, pulse.width) - p.discharge(w_c - shift, pulse.width));
    pulse.polarity.sign() * dw
}

/// Coefficients of one reduced pulse applied at usage `w_c` for `width` s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedStep {
    /// Multiplicative decay of the existing weight.
    pub alpha: f64,
    /// Unsigned write magnitude.
    pub write: f64,
    /// Usage after the pulse.
    pub wc_next: f64,
}

/// State-based form of the discrete update. With `w_c` on the closed-form
/// trajectory this reproduces [`alpha`] exactly; it also covers synapses whose
/// usage was shifted externally or driven by variable pulse widths.
#[inline]
pub fn reduced_step(w_c: f64, magnitude: f64, width: f64, p: &DeviceParams) -> ReducedStep {
    if width <= 0.0 {
        return ReducedStep { alpha: 1.0, write: 0.0, wc_next: w_c };
    }
    let l0 = p.k2 / w_c;
    let r = p.k1 * width * exp(-l0);
    let dl = ln1p(r);
    let l1 = l0 + dl;
    let alpha = 1.0 - (1.0 + 2.0 / l1) * (r / (1.0 + r));
    let shift = coupling_shift(p, magnitude);
    let write = 0.5 * (p.discharge(w_c + shift, width) - p.discharge(w_c - shift, width));
    ReducedStep { alpha, write, wc_next: p.k2 / l1 }
}

/// Closed-form replay of the discrete update driven by input *levels*
/// `x(1..=n)` (steps `x(i) - x(i-1)`, `x(0) = 0`), obtained by summation by parts:
/// `W(n) = sum_{i<n} x(i) (alpha(i+1) - 1) prod_{j=i+2..n} alpha(j) + x(n)`.
pub fn replay_weighted_sum(
    levels: &[f64],
    gamma_val: f64,
    p: &DeviceParams,
    pulse_width: f64,
) -> Result<f64> {
    let n = levels.len();
    if n == 0 {
        return Err(domain!("replay needs at least one input"));
    }
    let mut acc = levels[n - 1];
    // tail = prod_{j=i+2..n} alpha(j), grown backwards.
    let mut tail = 1.0;
    for i in (1..n).rev() {
        let a_next = alpha(i as u64 + 1, gamma_val, p, pulse_width);
        acc += levels[i - 1] * (a_next - 1.0) * tail;
        tail *= a_next;
    }
    Ok(acc)
}

/// Stimulus sweep for [`characterize`].
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Pulse widths in seconds at the base magnitude.
    Widths(Vec<f64>),
    /// Magnitudes in volts at the base width.
    Magnitudes(Vec<f64>),
}

/// Single-pulse response table `(stimulus, delta_w_d)`; the state is reset to
/// `s0` before every point so usage is held fixed.
pub fn characterize(
    s0: SynapseState,
    sweep: &Sweep,
    base: &Pulse,
    p: &DeviceParams,
) -> Result<Vec<(f64, f64)>> {
    let run = |pulse: Pulse| -> Result<f64> {
        Ok(apply_pulse_ode(s0, &pulse, p)?.w_d() - s0.w_d())
    };
    match sweep {
        Sweep::Widths(ws) => ws
            .iter()
            .map(|&w| Ok((w, run(Pulse { width: w, ..*base })?)))
            .collect(),
        Sweep::Magnitudes(ms) => ms
            .iter()
            .map(|&m| Ok((m, run(Pulse { magnitude: m, ..*base })?)))
            .collect(),
    }
}

/// Hardware tunneling regimes by coupled node potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Negligible,
    Transitional,
    Active,
}

pub const NEGLIGIBLE_BELOW_V: f64 = 5.0;
pub const ACTIVE_ABOVE_V: f64 = 7.5;

/// Diagnostic only: the simulation never gates dynamics on this.
pub fn classify_regime(v: f64) -> Regime {
    if v < NEGLIGIBLE_BELOW_V {
        Regime::Negligible
    } else if v > ACTIVE_ABOVE_V {
        Regime::Active
    } else {
        Regime::Transitional
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{gamma, wc_closed_form};

    fn pot() -> Pulse {
        Pulse::default()
    }

    #[test]
    fn alpha_first_pulse_reference() {
        // 40-digit reference for gamma = 1e4 and the default k0.
        let p = DeviceParams::default();
        let a = alpha(1, 1e4, &p, 0.1);
        assert!((a - 0.999_895_432_644_873).abs() < 1e-15);
    }

    #[test]
    fn alpha_limits_and_monotonicity() {
        let p = DeviceParams::default();
        let g = gamma(&p, 0.1).unwrap();
        let mut prev = 0.0;
        let mut n = 1u64;
        while n <= 1_000_000 {
            let a = alpha(n, g, &p, 0.1);
            assert!(a > prev && a < 1.0 && a > 0.0);
            prev = a;
            n = n * 3 / 2 + 1;
        }
        assert!(1.0 - alpha(u64::MAX / 4, g, &p, 0.1) < 1e-12);
    }

    #[test]
    fn reduced_step_reproduces_reference_alpha() {
        let p = DeviceParams::default();
        let g = gamma(&p, 0.1).unwrap();
        for n in [1u64, 7, 100, 5000, 40000] {
            let wc = wc_closed_form(0.1 * (n - 1) as f64, &p).unwrap();
            let step = reduced_step(wc, 4.0, 0.1, &p);
            assert!((step.alpha - alpha(n, g, &p, 0.1)).abs() < 1e-13, "n={n}");
            let wc_n = wc_closed_form(0.1 * n as f64, &p).unwrap();
            assert!((step.wc_next - wc_n).abs() < 1e-12);
        }
    }

    #[test]
    fn first_write_from_empty() {
        let p = DeviceParams::default();
        assert_eq!(discrete_update(0.0, 1, 3e-6, 1e4, &p, 0.1), 3e-6);
    }

    #[test]
    fn write_step_sign_and_size() {
        let p = DeviceParams::default();
        let up = write_step(4.5, &pot(), &p);
        let down = write_step(4.5, &pot().with_polarity(Polarity::Depression), &p);
        assert!(up > 0.0);
        assert_eq!(up, -down);
        // Small-shift limit: shift * J'(wc) * dt.
        let small = Pulse { magnitude: 0.4, ..pot() };
        let lin = coupling_shift(&p, 0.4) * p.rate_slope(4.5) * 0.1;
        assert!(((write_step(4.5, &small, &p) - lin) / lin).abs() < 2e-3);
    }

    #[test]
    fn ode_matches_exact_pulse() {
        let p = DeviceParams::default();
        let s = SynapseState::from_parts(1e-3, 4.5);
        let a = apply_pulse_ode(s, &pot(), &p).unwrap();
        let b = apply_pulse_exact(s, &pot(), &p);
        assert!((a.w_plus - b.w_plus).abs() < 1e-12);
        assert!((a.w_minus - b.w_minus).abs() < 1e-12);
    }

    #[test]
    fn potentiation_then_depression() {
        let p = DeviceParams::default();
        let s0 = SynapseState::symmetric(4.5);
        let s1 = apply_pulse_ode(s0, &pot(), &p).unwrap();
        let s2 = apply_pulse_ode(s1, &pot().with_polarity(Polarity::Depression), &p).unwrap();
        assert!(s1.w_d() > 0.0);
        assert!(s2.w_d().abs() < s1.w_d().abs());
        assert!(s1.w_c() < s0.w_c() && s2.w_c() < s1.w_c());
    }

    #[test]
    fn zero_magnitude_is_quiet_below_threshold() {
        let p = DeviceParams::default();
        let s = SynapseState::symmetric(3.5);
        let pulse = Pulse { magnitude: 0.0, ..pot() };
        let out = apply_pulse_ode(s, &pulse, &p).unwrap();
        assert!((out.w_plus - s.w_plus).abs() < 1e-9);
        assert!((out.w_minus - s.w_minus).abs() < 1e-9);
    }

    #[test]
    fn replay_degenerate_cases() {
        let p = DeviceParams::default();
        assert_eq!(replay_weighted_sum(&[2e-6], 1e4, &p, 0.1).unwrap(), 2e-6);
        assert_eq!(replay_weighted_sum(&[0.0; 10], 1e4, &p, 0.1).unwrap(), 0.0);
        assert!(replay_weighted_sum(&[], 1e4, &p, 0.1).is_err());
    }

    #[test]
    fn characterize_empty_sweep() {
        let p = DeviceParams::default();
        let t = characterize(SynapseState::symmetric(4.5), &Sweep::Widths(Vec::new()), &pot(), &p);
        assert!(t.unwrap().is_empty());
    }

    #[test]
    fn lift_preserves_weight() {
        let mut s = SynapseState::from_parts(0.012_345, 4.5);
        let w = s.w_d();
        s.lift(0.37);
        assert!((s.w_d() - w).abs() < 1e-15);
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(4.0), Regime::Negligible);
        assert_eq!(classify_regime(6.0), Regime::Transitional);
        assert_eq!(classify_regime(8.0), Regime::Active);
    }
}
