//! Binary cascade synapse with geometric metaplastic transitions.
//!
//! State `(efficacy, level)`: an input opposing the efficacy flips it with
//! probability `2^-(level-1)` and resets to level 1; a matching input moves one
//! level deeper with probability `2^-level` (up to `m`).

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

pub const MAX_LEVELS: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CascadeSynapse {
    pub efficacy: i8,
    pub level: u8,
}

impl CascadeSynapse {
    pub fn new(efficacy: i8) -> Self {
        Self { efficacy: if efficacy >= 0 { 1 } else { -1 }, level: 1 }
    }
}

fn pow2_neg(k: u8) -> f64 {
    1.0 / (1u64 << k) as f64
}

pub fn flip_probability(level: u8) -> f64 {
    pow2_neg(level - 1)
}

pub fn deepen_probability(level: u8) -> f64 {
    pow2_neg(level)
}

pub fn cascade_step<R: Rng + ?Sized>(
    s: CascadeSynapse,
    input: i8,
    m: u8,
    rng: &mut R,
) -> CascadeSynapse {
    debug_assert!((1..=MAX_LEVELS).contains(&m));
    if input == s.efficacy {
        if s.level < m && rng.random::<f64>() < deepen_probability(s.level) {
            return CascadeSynapse { level: s.level + 1, ..s };
        }
        s
    } else if s.level == 1 || rng.random::<f64>() < flip_probability(s.level) {
        CascadeSynapse { efficacy: input, level: 1 }
    } else {
        s
    }
}

/// Index of a state in the `2m` chain: depressed levels first.
pub fn state_index(s: CascadeSynapse, m: u8) -> usize {
    let base = if s.efficacy > 0 { m as usize } else { 0 };
    base + s.level as usize - 1
}

/// Row-stochastic transition matrix under balanced random input.
pub fn transition_matrix(m: u8) -> Vec<Vec<f64>> {
    let size = 2 * m as usize;
    let mut t = vec![vec![0.0; size]; size];
    for eff in [-1i8, 1] {
        for level in 1..=m {
            let s = CascadeSynapse { efficacy: eff, level };
            let i = state_index(s, m);
            // Matching input.
            let pd = if level < m { deepen_probability(level) } else { 0.0 };
            t[i][state_index(CascadeSynapse { level: level + (level < m) as u8, ..s }, m)] +=
                0.5 * pd;
            t[i][i] += 0.5 * (1.0 - pd);
            // Opposing input.
            let pf = flip_probability(level);
            t[i][state_index(CascadeSynapse { efficacy: -eff, level: 1 }, m)] += 0.5 * pf;
            t[i][i] += 0.5 * (1.0 - pf);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn single_level_is_plain_switch() {
        let mut r = rng::stream(1, 0);
        let s = CascadeSynapse::new(1);
        for _ in 0..100 {
            assert_eq!(cascade_step(s, -1, 1, &mut r), CascadeSynapse::new(-1));
            assert_eq!(cascade_step(s, 1, 1, &mut r), s);
        }
    }

    #[test]
    fn rows_are_stochastic() {
        for m in 1..=MAX_LEVELS {
            for row in transition_matrix(m) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn empirical_flip_rate_matches_level() {
        let mut r = rng::stream(2, 0);
        let s = CascadeSynapse { efficacy: 1, level: 3 };
        let n = 200_000;
        let flips = (0..n).filter(|_| cascade_step(s, -1, 5, &mut r).efficacy < 0).count();
        assert!((flips as f64 / n as f64 - 0.25).abs() < 0.005);
    }
}
