//! Closed-form signal, noise and SNR of an FN-synapse network.

use crate::math::sqrt;

/// `S(n) = 1 / (n + gamma)`.
pub fn analytic_signal(n: f64, gamma_val: f64) -> f64 {
    1.0 / (n + gamma_val)
}

/// `nu(n) = sqrt(n) / (sqrt(N) (n + gamma))`. Includes the tracked pattern's own
/// contribution, so it slightly overestimates the noise.
pub fn analytic_noise(n: f64, gamma_val: f64, net_size: usize) -> f64 {
    sqrt(n) / (sqrt(net_size as f64) * (n + gamma_val))
}

/// `SNR(n) = sqrt(N / n)`, independent of `gamma`.
pub fn analytic_snr(n: f64, net_size: usize) -> f64 {
    sqrt(net_size as f64 / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_points() {
        assert_eq!(analytic_snr(1.0, 100), 10.0);
        assert_eq!(analytic_snr(100.0, 100), 1.0);
        assert_eq!(analytic_signal(1.0, 1.0), 0.5);
    }

    #[test]
    fn snr_is_signal_over_noise() {
        for &g in &[3.0, 50.0, 1e4] {
            for &n in &[1.0, 10.0, 1e3] {
                let r = analytic_signal(n, g) / analytic_noise(n, g, 100);
                assert!((r - analytic_snr(n, 100)).abs() < 1e-9 * r);
            }
        }
    }

    #[test]
    fn noise_peaks_at_gamma() {
        let g = 50.0;
        let best = (1..=1000)
            .map(|n| (n, analytic_noise(n as f64, g, 10)))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        assert_eq!(best.0, 50);
    }

    #[test]
    fn signal_regimes() {
        let g = 1e4;
        assert!((analytic_signal(1.0, g) / analytic_signal(10.0, g) - 1.0).abs() < 1e-3);
        let far = analytic_signal(1e7, g) / analytic_signal(2e7, g);
        assert!((far - 2.0).abs() < 2e-3);
    }
}
