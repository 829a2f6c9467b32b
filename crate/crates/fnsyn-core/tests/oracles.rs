//! Reduced models checked against the ODE oracle and closed forms.

use fnsyn_core::device::{gamma, pulse_energy, wc_closed_form};
use fnsyn_core::ode::{integrate, Tolerance};
use fnsyn_core::rng;
use fnsyn_core::synapse::{
    alpha, apply_pulse_exact, apply_pulse_ode, discrete_update, reduced_step, write_step,
};
use fnsyn_core::{DeviceParams, Polarity, Pulse, SynapseState};
use rand::Rng;

fn random_train(n: usize, seed: u64) -> Vec<Polarity> {
    let mut r = rng::stream(seed, 0);
    (0..n)
        .map(|_| if r.random::<bool>() { Polarity::Potentiation } else { Polarity::Depression })
        .collect()
}

#[test]
fn reduced_step_tracks_ode_over_random_train() {
    let p = DeviceParams::default();
    let pulse = Pulse::default();
    let mut ode = SynapseState::symmetric(p.wc0);
    let mut red = ode;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for pol in random_train(100, 1) {
        ode = apply_pulse_ode(ode, &pulse.with_polarity(pol), &p).unwrap();
        let st = reduced_step(red.w_c(), pulse.magnitude, pulse.width, &p);
        red = SynapseState::from_parts(st.alpha * red.w_d() + pol.sign() * st.write, st.wc_next);
        assert!(ode.taylor_ratio() < 0.01);
        worst = worst.max((red.w_d() - ode.w_d()).abs());
        scale = scale.max(ode.w_d().abs());
    }
    assert!(worst < 0.01 * scale, "max error {worst:e} vs max |w_d| {scale:e}");
}

#[test]
fn pulse_count_update_tracks_ode() {
    // Pulse-count form: usage follows the closed-form trajectory.
    let p = DeviceParams::default();
    let pulse = Pulse::default();
    let g = gamma(&p, pulse.width).unwrap();
    let mut ode = SynapseState::symmetric(p.wc0);
    let mut w_d = 0.0;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (k, pol) in random_train(100, 2).into_iter().enumerate() {
        let n = k as u64 + 1;
        let wc = wc_closed_form(pulse.width * k as f64, &p).unwrap();
        let input = write_step(wc, &pulse.with_polarity(pol), &p);
        w_d = discrete_update(w_d, n, input, g, &p, pulse.width);
        ode = apply_pulse_ode(ode, &pulse.with_polarity(pol), &p).unwrap();
        worst = worst.max((w_d - ode.w_d()).abs());
        scale = scale.max(ode.w_d().abs());
    }
    assert!(worst < 0.01 * scale, "max error {worst:e} vs max |w_d| {scale:e}");
}

#[test]
fn closed_form_usage_matches_integration() {
    let p = DeviceParams::default();
    let tol = Tolerance { rtol: 1e-12, atol: 1e-14, ..Tolerance::default() };
    let mut t = 0.0;
    let mut w = [p.wc0];
    for &next in &[1e-3, 1.0, 10.0, 100.0, 1e3, 5e3, 1e4] {
        let (y, _) = integrate(|y: &[f64; 1]| [-p.rate(y[0])], w, next - t, &tol).unwrap();
        w = y;
        t = next;
        let exact = wc_closed_form(t, &p).unwrap();
        assert!((w[0] - exact).abs() < 1e-6, "t={t}: {} vs {exact}", w[0]);
    }
}

#[test]
fn repeated_potentiation_weakens() {
    let p = DeviceParams::default();
    let pulse = Pulse::default();
    let mut s = SynapseState::symmetric(p.wc0);
    let mut steps = Vec::new();
    for _ in 0..50 {
        let next = apply_pulse_ode(s, &pulse, &p).unwrap();
        steps.push((next.w_d() - s.w_d()).abs());
        s = next;
    }
    assert!(steps.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn common_mode_always_falls() {
    let p = DeviceParams::default();
    let mut s = SynapseState::symmetric(p.wc0);
    for pol in random_train(200, 3) {
        let next = apply_pulse_ode(s, &Pulse::default().with_polarity(pol), &p).unwrap();
        assert!(next.w_c() < s.w_c());
        s = next;
    }
}

#[test]
fn exact_pulse_agrees_with_ode() {
    let p = DeviceParams::default();
    let s = SynapseState::from_parts(1e-3, 4.7);
    for pulse in [Pulse::default(), Pulse { magnitude: 9.0, width: 3.0, polarity: Polarity::Depression }] {
        let a = apply_pulse_ode(s, &pulse, &p).unwrap();
        let b = apply_pulse_exact(s, &pulse, &p);
        assert!((a.w_plus - b.w_plus).abs() < 1e-12);
        assert!((a.w_minus - b.w_minus).abs() < 1e-12);
    }
}

#[test]
fn reduced_alpha_matches_pulse_count_alpha() {
    let p = DeviceParams::default();
    let w = 0.1;
    let g = gamma(&p, w).unwrap();
    for n in [1u64, 10, 1000, 100_000] {
        let wc = wc_closed_form(w * (n - 1) as f64, &p).unwrap();
        let a = reduced_step(wc, 4.0, w, &p).alpha;
        assert!((a - alpha(n, g, &p, w)).abs() < 1e-9, "n={n}");
    }
}

#[test]
fn energy_per_update() {
    let p = DeviceParams::default();
    let e = pulse_energy(&p, 4.5);
    assert!((e / 5.06e-13 - 1.0).abs() < 0.02, "{e:e}");
    assert!((e / 500e-15 - 1.0).abs() < 0.02);
}
