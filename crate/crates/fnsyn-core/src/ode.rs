//! Adaptive Dormand–Prince 5(4) integrator for small autonomous systems.

use crate::error::{Error, Result};
use crate::math::powf;

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step before giving up, as a fraction of the span.
    pub min_step_fraction: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, min_step_fraction: 1e-14, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth- minus fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `dy/dt = f(y)` from `0` to `span`.
pub fn integrate<const N: usize, F>(
    f: F,
    y0: [f64; N],
    span: f64,
    tol: &Tolerance,
) -> Result<([f64; N], Stats)>
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let mut stats = Stats::default();
    if span <= 0.0 {
        return Ok((y0, stats));
    }
    let lin = |y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64| {
        let mut out = *y;
        for i in 0..N {
            let mut acc = 0.0;
            for &(c, k) in terms {
                acc += c * k[i];
            }
            out[i] += h * acc;
        }
        out
    };

    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = f(&y);
    stats.evals += 1;
    let mut h = initial_step(&y, &k1, span, tol);
    let h_min = span * tol.min_step_fraction;

    while t < span {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(Error::Numeric(alloc::format!(
                "step budget exhausted at t={t:e} of {span:e}"
            )));
        }
        let last = t + h >= span;
        if last {
            h = span - t;
        }
        let k2 = f(&lin(&y, &[(A21, &k1)], h));
        let k3 = f(&lin(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(&lin(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(&lin(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = f(&lin(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let y5 = lin(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(&y5);
        stats.evals += 6;

        let mut err = 0.0f64;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((e / scale).abs());
        }
        if !err.is_finite() {
            return Err(Error::Numeric(alloc::format!("non-finite state at t={t:e}")));
        }
        if err <= 1.0 {
            t = if last { span } else { t + h };
            y = y5;
            k1 = k7;
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * powf(err, -0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if err > 1.0 && h < h_min {
            return Err(Error::Numeric(alloc::format!(
                "step size underflow ({h:e} s) at t={t:e}"
            )));
        }
    }
    Ok((y, stats))
}

fn initial_step<const N: usize>(y: &[f64; N], dy: &[f64; N], span: f64, tol: &Tolerance) -> f64 {
    // Hairer–Nørsett–Wanner starting guess from scaled RMS norms.
    let (mut d0, mut d1) = (0.0f64, 0.0f64);
    for i in 0..N {
        let scale = tol.atol + tol.rtol * y[i].abs();
        d0 += (y[i] / scale) * (y[i] / scale);
        d1 += (dy[i] / scale) * (dy[i] / scale);
    }
    let (d0, d1) = (crate::math::sqrt(d0 / N as f64), crate::math::sqrt(d1 / N as f64));
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
    h.min(span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::exp;

    #[test]
    fn exponential_decay() {
        let (y, _) = integrate(|y: &[f64; 1]| [-y[0]], [1.0], 5.0, &Tolerance::default()).unwrap();
        assert!((y[0] - exp(-5.0)).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let (y, stats) =
            integrate(|y: &[f64; 2]| [y[1], -y[0]], [1.0, 0.0], 10.0, &Tolerance::default())
                .unwrap();
        assert!((y[0] - libm::cos(10.0)).abs() < 1e-8);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn zero_span_is_identity() {
        let (y, s) = integrate(|_: &[f64; 1]| [1.0], [3.0], 0.0, &Tolerance::default()).unwrap();
        assert_eq!(y, [3.0]);
        assert_eq!(s.accepted, 0);
    }

    #[test]
    fn blow_up_is_reported() {
        let tol = Tolerance { max_steps: 10_000, ..Tolerance::default() };
        let r = integrate(|y: &[f64; 1]| [y[0] * y[0]], [1.0], 2.0, &tol);
        assert!(matches!(r, Err(Error::Numeric(_))));
    }
}
