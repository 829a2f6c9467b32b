//! Closed-form physics of one FN tunneling junction.
//!
//! Everything is in voltage-rate form: `dW/dt = -J(W)` with
//! `J(W) = (k1/k2) W^2 exp(-k2/W)` in V/s. The physical current, when needed,
//! is `c_total * J`.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::math::{exp, ln, ln1p};

/// Elementary charge, coulombs.
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;

/// Junction constants and node capacitances. `k0` is derived from `wc0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    /// Rate constant, 1/s.
    pub k1: f64,
    /// Barrier constant, V.
    pub k2: f64,
    /// Initial common-mode potential, V.
    pub wc0: f64,
    /// Total floating-gate capacitance, F.
    pub c_total: f64,
    /// Input coupling capacitance, F.
    pub c_couple: f64,
    /// Junction area, m^2. Cancels out of every voltage-rate quantity.
    pub area: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            k1: 1e16,
            k2: 196.6,
            wc0: 4.5,
            c_total: 1.6e-12,
            c_couple: 50e-15,
            area: 1e-12,
        }
    }
}

impl DeviceParams {
    pub fn new(k1: f64, k2: f64, wc0: f64) -> Result<Self> {
        let p = Self { k1, k2, wc0, ..Self::default() };
        p.validate()?;
        Ok(p)
    }

    /// Same device programmed to a different initial usage.
    pub fn with_wc0(self, wc0: f64) -> Self {
        Self { wc0, ..self }
    }

    /// Initial common-mode potential that realizes a given `gamma` at `pulse_width`.
    pub fn wc0_for_gamma(&self, gamma_val: f64, pulse_width: f64) -> f64 {
        self.k2 / ln(gamma_val * self.k1 * pulse_width)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.k1, self.k2, self.wc0, self.c_total, self.c_couple, self.area]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(config!("device parameters must be finite"));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.wc0 > 0.0 && self.area > 0.0) {
            return Err(config!("k1, k2, wc0 and area must be positive"));
        }
        if !(self.c_couple > 0.0 && self.c_total >= self.c_couple) {
            return Err(config!("need c_total >= c_couple > 0"));
        }
        Ok(())
    }

    /// `k0 = exp(k2 / wc0)`.
    pub fn k0(&self) -> f64 {
        exp(self.k2 / self.wc0)
    }

    /// Coupling ratio `C_c / C_T`.
    pub fn coupling(&self) -> f64 {
        self.c_couple / self.c_total
    }

    /// Node voltage step produced by one tunneling electron.
    pub fn volts_per_electron(&self) -> f64 {
        ELECTRON_CHARGE / self.c_total
    }

    /// Tunneling rate without domain checks; zero for non-positive `v`.
    #[inline]
    pub fn rate(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        self.k1 / self.k2 * v * v * exp(-self.k2 / v)
    }

    /// `dJ/dV`.
    #[inline]
    pub fn rate_slope(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        self.rate(v) * (2.0 / v + self.k2 / (v * v))
    }

    /// Exact potential drop of an isolated node starting at `v` and tunneling
    /// for `width` seconds. Written with `ln1p` so tiny drops keep full precision.
    #[inline]
    pub fn discharge(&self, v: f64, width: f64) -> f64 {
        if v <= 0.0 || width <= 0.0 {
            return 0.0;
        }
        let l0 = self.k2 / v;
        let r = self.k1 * width * exp(-l0);
        let dl = ln1p(r);
        self.k2 * dl / (l0 * (l0 + dl))
    }
}

/// Tunneling rate `J(v)` in V/s.
pub fn fn_rate(v: f64, p: &DeviceParams) -> Result<f64> {
    if !(v > 0.0) {
        return Err(domain!("potential must be positive, got {v} V"));
    }
    Ok(p.rate(v))
}

/// Usage trajectory `Wc(t) = k2 / ln(k1 t + k0)`.
pub fn wc_closed_form(t: f64, p: &DeviceParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(domain!("time must be non-negative, got {t} s"));
    }
    // ln(k1 t + k0) = k2/wc0 + ln1p(k1 t / k0), which avoids forming k0.
    let l0 = p.k2 / p.wc0;
    let l = l0 + ln1p(p.k1 * t * exp(-l0));
    if !(l > 0.0) {
        return Err(domain!("log argument must exceed 1"));
    }
    Ok(p.k2 / l)
}

/// `gamma = k0 / (k1 * pulse_width)`.
pub fn gamma(p: &DeviceParams, pulse_width: f64) -> Result<f64> {
    if !(pulse_width > 0.0) {
        return Err(domain!("pulse width must be positive, got {pulse_width} s"));
    }
    Ok(p.k0() / (p.k1 * pulse_width))
}

/// Energy drawn through the coupling capacitor by one input step.
pub fn pulse_energy(p: &DeviceParams, delta_v: f64) -> f64 {
    0.5 * p.c_couple * delta_v * delta_v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn rate_at_default_operating_point() {
        // Reference from 40-digit evaluation of the closed form.
        let r = fn_rate(4.5, &DeviceParams::default()).unwrap();
        assert!(rel(r, 1.093_951_704_063_971e-4) < 1e-12);
    }

    #[test]
    fn rate_at_barrier_voltage() {
        let p = DeviceParams::default();
        let r = fn_rate(p.k2, &p).unwrap();
        assert!(rel(r, p.k1 * p.k2 / core::f64::consts::E) < 1e-14);
    }

    #[test]
    fn rate_rejects_non_positive() {
        let p = DeviceParams::default();
        assert!(fn_rate(0.0, &p).is_err());
        assert!(fn_rate(-1.0, &p).is_err());
        assert!(fn_rate(1e-3, &p).unwrap() == 0.0);
    }

    #[test]
    fn k0_and_gamma() {
        let p = DeviceParams::default();
        assert!(rel(p.k0(), 9.415_499_506_180_647e18) < 1e-12);
        assert!(rel(gamma(&p, 0.1).unwrap(), 9_415.499_506_180_647) < 1e-12);
        let g1 = gamma(&p, 0.1).unwrap();
        let g2 = gamma(&p, 0.2).unwrap();
        assert!(rel(g2, g1 / 2.0) < 1e-14);
        assert!(gamma(&p.with_wc0(4.6), 0.1).unwrap() < g1);
        assert!(gamma(&p, 0.0).is_err());
    }

    #[test]
    fn wc_round_trip() {
        let p = DeviceParams::default();
        assert_eq!(wc_closed_form(0.0, &p).unwrap(), p.wc0);
        assert!(wc_closed_form(-1.0, &p).is_err());
        let g = p.wc0_for_gamma(50.0, 0.1);
        assert!(rel(gamma(&p.with_wc0(g), 0.1).unwrap(), 50.0) < 1e-9);
    }

    #[test]
    fn energy_matches_half_cv2() {
        let p = DeviceParams::default();
        assert!(rel(pulse_energy(&p, 4.5), 5.0625e-13) < 1e-14);
        assert_eq!(pulse_energy(&p, 0.0), 0.0);
    }

    #[test]
    fn discharge_matches_closed_form_difference() {
        let p = DeviceParams::default();
        for &v in &[3.5, 4.0, 4.5, 5.2] {
            let w = p.with_wc0(v);
            let direct = v - wc_closed_form(0.3, &w).unwrap();
            assert!((p.discharge(v, 0.3) - direct).abs() < 1e-14 + 1e-9 * direct);
        }
    }

    #[test]
    fn validate_rejects_bad_capacitances() {
        let mut p = DeviceParams::default();
        p.c_total = p.c_couple / 2.0;
        assert!(p.validate().is_err());
    }
}
