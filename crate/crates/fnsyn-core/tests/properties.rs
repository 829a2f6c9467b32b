use fnsyn_core::consolidation::cascade::{cascade_step, CascadeSynapse, MAX_LEVELS};
use fnsyn_core::learning::mlp::{cross_entropy, softmax_in_place};
use fnsyn_core::stochastic::stochastic_pulse;
use fnsyn_core::synapse::{apply_pulse_exact, reduced_step};
use fnsyn_core::{rng, DeviceParams, Polarity, Pulse, SynapseState};
use proptest::prelude::*;

fn polarity() -> impl Strategy<Value = Polarity> {
    prop_oneof![Just(Polarity::Potentiation), Just(Polarity::Depression)]
}

proptest! {
    #[test]
    fn softmax_is_stable(logits in prop::collection::vec(-1e6f64..1e6, 2..8)) {
        let mut p = logits.clone();
        softmax_in_place(&mut p);
        prop_assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for k in 0..logits.len() {
            let ce = cross_entropy(&logits, k);
            prop_assert!(ce.is_finite() && ce >= 0.0);
        }
    }

    #[test]
    fn reduced_step_is_a_contraction(wc in 3.0f64..6.0, mag in 0.0f64..12.0, width in 1e-4f64..10.0) {
        let p = DeviceParams::default();
        // Linearized decay is only meaningful while a pulse is short next to
        // the usage time scale.
        prop_assume!(p.k1 * width * (-p.k2 / wc).exp() < 0.1);
        let s = reduced_step(wc, mag, width, &p);
        prop_assert!(s.alpha > 0.0 && s.alpha <= 1.0);
        prop_assert!(s.write >= 0.0);
        prop_assert!(s.wc_next < wc);
    }

    #[test]
    fn exact_pulse_moves_weight_with_polarity(
        wd in -1e-3f64..1e-3, wc in 4.0f64..6.0, mag in 0.5f64..10.0, pol in polarity()
    ) {
        let p = DeviceParams::default();
        let s = SynapseState::from_parts(wd, wc);
        let n = apply_pulse_exact(s, &Pulse { polarity: pol, magnitude: mag, width: 0.1 }, &p);
        let idle = apply_pulse_exact(s, &Pulse { polarity: pol, magnitude: 0.0, width: 0.1 }, &p);
        prop_assert!(n.w_c() < s.w_c());
        prop_assert!(pol.sign() * (n.w_d() - idle.w_d()) > 0.0);
    }

    #[test]
    fn stochastic_usage_never_rises(seed in any::<u64>(), wc in 2.5f64..6.0, mag in 0.0f64..60.0, pol in polarity()) {
        let p = DeviceParams::default();
        let mut r = rng::stream(seed, 0);
        let mut s = SynapseState::symmetric(wc);
        for _ in 0..20 {
            let o = stochastic_pulse(s, &Pulse { polarity: pol, magnitude: mag, width: 0.1 }, &p, &mut r);
            prop_assert!(o.state.w_c() <= s.w_c());
            s = o.state;
        }
    }

    #[test]
    fn cascade_stays_in_bounds(seed in any::<u64>(), m in 1u8..=MAX_LEVELS, inputs in prop::collection::vec(prop::bool::ANY, 1..200)) {
        let mut r = rng::stream(seed, 0);
        let mut s = CascadeSynapse::new(1);
        for up in inputs {
            let x = if up { 1 } else { -1 };
            let next = cascade_step(s, x, m, &mut r);
            prop_assert!((1..=m).contains(&next.level));
            prop_assert!(next.efficacy == 1 || next.efficacy == -1);
            if next.efficacy != s.efficacy {
                prop_assert_eq!(next.level, 1);
                prop_assert_eq!(next.efficacy, x);
            }
            s = next;
        }
    }
}
