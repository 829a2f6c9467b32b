//! Random-pattern memory lifetime experiments.
//!
//! Each Monte-Carlo iteration starts from an empty network, stores `T` random
//! ±1 patterns one after another and, after every pattern, measures how well
//! earlier patterns can still be read out. Iterations are grouped into fixed
//! chunks so that results are bit-identical however chunks are scheduled.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::cascade::{cascade_step, transition_matrix, CascadeSynapse, MAX_LEVELS};
use crate::device::{gamma, wc_closed_form, DeviceParams};
use crate::error::{config, Error, Result};
use crate::math::{dot_f32, sqrt};
use crate::rng::{self, Stream};
use crate::stochastic::stochastic_pulse;
use crate::synapse::{
    alpha, apply_pulse_exact, reduced_step, write_step, Polarity, Pulse, SynapseState,
};

/// Iterations per chunk; the unit of parallel work and of deterministic merging.
pub const CHUNK_ITERS: usize = 4;
/// Electron-count histogram bins (the last bin collects overflow).
pub const ELECTRON_BINS: usize = 1025;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynapseModelKind {
    /// Reduced discrete FN update with shared usage.
    Fn,
    /// FN plus the global common-mode lift after every pattern.
    Cfn,
    /// Binary cascade with `m` levels.
    Cascade(u8),
    /// Per-node Poisson electron counts.
    StochasticFn,
    /// Per-node exact closed-form discharge (deterministic twin of `StochasticFn`).
    ExactFn,
}

impl fmt::Display for SynapseModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fn => f.write_str("fn"),
            Self::Cfn => f.write_str("cfn"),
            Self::Cascade(m) => write!(f, "cascade-{m}"),
            Self::StochasticFn => f.write_str("stochastic-fn"),
            Self::ExactFn => f.write_str("fn-exact"),
        }
    }
}

impl FromStr for SynapseModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fn" => Ok(Self::Fn),
            "cfn" => Ok(Self::Cfn),
            "stochastic-fn" => Ok(Self::StochasticFn),
            "fn-exact" => Ok(Self::ExactFn),
            _ => {
                let m = s
                    .strip_prefix("cascade-")
                    .or_else(|| s.strip_prefix("cascade"))
                    .and_then(|m| m.parse::<u8>().ok())
                    .ok_or_else(|| config!("unknown model '{s}'"))?;
                if !(1..=MAX_LEVELS).contains(&m) {
                    return Err(config!("cascade level must be in 1..={MAX_LEVELS}, got {m}"));
                }
                Ok(Self::Cascade(m))
            }
        }
    }
}

impl Serialize for SynapseModelKind {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SynapseModelKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternMode {
    /// Independent Rademacher entries.
    #[default]
    Iid,
    /// Every synapse sees exactly as many potentiating as depressing inputs.
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifetimeConfig {
    pub n_synapses: usize,
    pub n_patterns: usize,
    pub model: SynapseModelKind,
    pub device: DeviceParams,
    pub pulse: Pulse,
    pub mc_iters: usize,
    pub seed: u64,
    #[serde(default)]
    pub pattern_mode: PatternMode,
    /// Track every pattern's retrieval (needed for `frac_retained`; costs N T^2 / 2).
    #[serde(default = "default_true")]
    pub track_all: bool,
    /// Evaluate `frac_retained` every `track_stride` patterns (and at `T`).
    #[serde(default = "default_stride")]
    pub track_stride: usize,
    /// Relative uniform jitter of per-synapse k1 and k2 (`fn` model only).
    #[serde(default)]
    pub mismatch: f64,
}

fn default_true() -> bool {
    true
}

fn default_stride() -> usize {
    1
}

impl Default for LifetimeConfig {
    fn default() -> Self {
        Self {
            n_synapses: 100,
            n_patterns: 100,
            model: SynapseModelKind::Fn,
            device: DeviceParams::default(),
            pulse: Pulse::default(),
            mc_iters: 100,
            seed: 0,
            pattern_mode: PatternMode::Iid,
            track_all: true,
            track_stride: 1,
            mismatch: 0.0,
        }
    }
}

impl LifetimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_synapses == 0 || self.n_patterns == 0 || self.mc_iters == 0 || self.track_stride == 0 {
            return Err(config!("N, T and mc_iters must all be at least 1"));
        }
        self.device.validate()?;
        self.pulse.validate()?;
        if !(0.0..0.5).contains(&self.mismatch) {
            return Err(config!("mismatch must be in [0, 0.5), got {}", self.mismatch));
        }
        if self.mismatch > 0.0 && self.model != SynapseModelKind::Fn {
            return Err(config!("mismatch is only modeled for the fn model"));
        }
        Ok(())
    }
}

/// Signal, noise and retention curves indexed by pattern count `n = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeCurves {
    pub n_axis: Vec<u64>,
    /// Mean retrieval of pattern 1, in units of [`LifetimeCurves::unit`].
    pub signal: Vec<f64>,
    /// Std of the overlap with a random probe: `sqrt(E[w^2] / N)`.
    pub noise: Vec<f64>,
    pub snr: Vec<f64>,
    /// Pattern counts at which `frac_retained` was evaluated.
    pub frac_n: Vec<u64>,
    /// Fraction of stored patterns with SNR > 1 at each `frac_n` (empty when not tracked).
    pub frac_retained: Vec<f64>,
    /// Ensemble std of the tracked retrieval across iterations.
    pub tracked_noise: Vec<f64>,
    /// Monte-Carlo standard error of `snr`.
    pub snr_se: Vec<f64>,
    /// Largest |w| seen in any iteration.
    pub max_abs_weight: Vec<f64>,
    /// Mean usage (NaN for cascades).
    pub mean_wc: Vec<f64>,
    /// Histogram of electrons per synapse update (stochastic model only).
    pub electron_histogram: Option<Vec<u64>>,
    /// Weight units per unit of `signal`/`noise`.
    pub unit: f64,
    /// `gamma` of the nominal device (NaN for cascades).
    pub gamma: f64,
    pub iterations: usize,
}

/// Partial sums over a set of iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    iters: usize,
    o1: Vec<f64>,
    o1_sq: Vec<f64>,
    w2: Vec<f64>,
    max_abs: Vec<f64>,
    wc: Vec<f64>,
    tri: Vec<f64>,
    electrons: Vec<u64>,
}

/// Pattern indices (0-based) whose full retrieval profile is tracked, and the
/// offset of each row in the packed triangular store.
fn tracked_rows(t: usize, stride: usize) -> (Vec<usize>, Vec<usize>) {
    let rows: Vec<usize> = (0..t).filter(|k| (k + 1) % stride == 0 || *k + 1 == t).collect();
    let mut offsets = Vec::with_capacity(rows.len());
    let mut off = 0;
    for &k in &rows {
        offsets.push(off);
        off += k + 1;
    }
    (rows, offsets)
}

impl Accumulator {
    pub fn new(t: usize, track_all: bool, stride: usize) -> Self {
        let tri_len = if track_all {
            tracked_rows(t, stride).0.iter().map(|k| k + 1).sum()
        } else {
            0
        };
        Self {
            iters: 0,
            o1: vec![0.0; t],
            o1_sq: vec![0.0; t],
            w2: vec![0.0; t],
            max_abs: vec![0.0; t],
            wc: vec![0.0; t],
            tri: vec![0.0; tri_len],
            electrons: vec![0; ELECTRON_BINS],
        }
    }

    pub fn iterations(&self) -> usize {
        self.iters
    }

    /// Adds `other` into `self`; callers merge in chunk order.
    pub fn merge(&mut self, other: &Accumulator) {
        self.iters += other.iters;
        let add = |a: &mut Vec<f64>, b: &Vec<f64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.o1, &other.o1);
        add(&mut self.o1_sq, &other.o1_sq);
        add(&mut self.w2, &other.w2);
        add(&mut self.wc, &other.wc);
        add(&mut self.tri, &other.tri);
        for (x, y) in self.max_abs.iter_mut().zip(&other.max_abs) {
            *x = x.max(*y);
        }
        for (x, y) in self.electrons.iter_mut().zip(&other.electrons) {
            *x += y;
        }
    }
}

/// Network state of one iteration.
enum Network {
    Weights(Vec<f64>),
    Cfn { states: Vec<SynapseState>, deltas: Vec<f64>, wc: f64 },
    Cascade(Vec<CascadeSynapse>),
    Nodes(Vec<SynapseState>),
}

/// Precomputed, iteration-independent pieces of a lifetime run.
pub struct LifetimePlan {
    cfg: LifetimeConfig,
    /// (alpha, write, usage before the pulse) per pattern for the nominal fn model.
    shared: Vec<(f64, f64, f64)>,
    /// Per-synapse (alpha, write) tables, pattern-major, when mismatch > 0.
    per_synapse: Vec<(f64, f64)>,
    /// Stationary cascade distribution over the 2m states.
    stationary: Vec<f64>,
    /// Tracked row offset by pattern index (`usize::MAX` when untracked).
    row_offset: Vec<usize>,
    unit: f64,
    gamma: f64,
}

impl LifetimePlan {
    pub fn new(cfg: &LifetimeConfig) -> Result<Self> {
        cfg.validate()?;
        let (t, n) = (cfg.n_patterns, cfg.n_synapses);
        let p = &cfg.device;
        let width = cfg.pulse.width;
        let mut plan = Self {
            cfg: cfg.clone(),
            shared: Vec::new(),
            per_synapse: Vec::new(),
            stationary: Vec::new(),
            row_offset: vec![usize::MAX; t],
            unit: 1.0,
            gamma: f64::NAN,
        };
        if cfg.track_all {
            let (rows, offsets) = tracked_rows(t, cfg.track_stride);
            for (k, o) in rows.into_iter().zip(offsets) {
                plan.row_offset[k] = o;
            }
        }
        if let SynapseModelKind::Cascade(m) = cfg.model {
            plan.stationary = stationary_distribution(m);
            return Ok(plan);
        }
        let g = gamma(p, width)?;
        let first = write_step(p.wc0, &cfg.pulse.with_polarity(Polarity::Potentiation), p);
        if !(first > 0.0) {
            return Err(Error::Numeric(alloc::format!(
                "pulse produces no weight change at wc0 = {} V",
                p.wc0
            )));
        }
        plan.gamma = g;
        plan.unit = first * (1.0 + g);
        if cfg.model == SynapseModelKind::Fn {
            let pot = cfg.pulse.with_polarity(Polarity::Potentiation);
            plan.shared = (1..=t)
                .map(|k| {
                    let wc = wc_closed_form(width * (k - 1) as f64, p)?;
                    Ok((alpha(k as u64, g, p, width), write_step(wc, &pot, p), wc))
                })
                .collect::<Result<_>>()?;
            if cfg.mismatch > 0.0 {
                plan.per_synapse = mismatch_tables(cfg, n, t);
            }
        }
        Ok(plan)
    }

    pub fn config(&self) -> &LifetimeConfig {
        &self.cfg
    }

    pub fn n_chunks(&self) -> usize {
        self.cfg.mc_iters.div_ceil(CHUNK_ITERS)
    }

    pub fn empty(&self) -> Accumulator {
        Accumulator::new(self.cfg.n_patterns, self.cfg.track_all, self.cfg.track_stride)
    }

    pub fn run_chunk(&self, chunk: usize) -> Accumulator {
        let mut acc = self.empty();
        let start = chunk * CHUNK_ITERS;
        let end = (start + CHUNK_ITERS).min(self.cfg.mc_iters);
        for it in start..end {
            self.run_iteration(it as u64, &mut acc);
        }
        acc
    }

    fn patterns(&self, rng: &mut Stream) -> Vec<f32> {
        let (t, n) = (self.cfg.n_patterns, self.cfg.n_synapses);
        let mut x = vec![0.0f32; t * n];
        match self.cfg.pattern_mode {
            PatternMode::Iid => {
                for v in x.iter_mut() {
                    *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            PatternMode::Balanced => {
                let mut col: Vec<f32> = (0..t).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
                for a in 0..n {
                    if t % 2 == 1 {
                        col[t - 1] = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    }
                    col.shuffle(rng);
                    for (k, v) in col.iter().enumerate() {
                        x[k * n + a] = *v;
                    }
                }
            }
        }
        x
    }

    fn init_network(&self, rng: &mut Stream) -> Network {
        let n = self.cfg.n_synapses;
        let wc0 = self.cfg.device.wc0;
        match self.cfg.model {
            SynapseModelKind::Fn => Network::Weights(vec![0.0; n]),
            SynapseModelKind::Cfn => Network::Cfn {
                states: vec![SynapseState::symmetric(wc0); n],
                deltas: vec![0.0; n],
                wc: wc0,
            },
            SynapseModelKind::Cascade(m) => Network::Cascade(
                (0..n).map(|_| sample_cascade(&self.stationary, m, rng)).collect(),
            ),
            SynapseModelKind::StochasticFn | SynapseModelKind::ExactFn => {
                Network::Nodes(vec![SynapseState::symmetric(wc0); n])
            }
        }
    }

    fn run_iteration(&self, it: u64, acc: &mut Accumulator) {
        let cfg = &self.cfg;
        let (t, n) = (cfg.n_patterns, cfg.n_synapses);
        let inv_n = 1.0 / n as f64;
        let mut rng = rng::stream(cfg.seed, it);
        let x = self.patterns(&mut rng);
        let mut net = self.init_network(&mut rng);
        let mut w = vec![0.0f64; n];
        let mut wf = vec![0.0f32; n];

        for k in 0..t {
            let row = &x[k * n..(k + 1) * n];
            let wc = self.store(k, row, &mut net, &mut rng, acc);
            read_weights(&net, &mut w);

            let mut o1 = 0.0;
            let mut w2 = 0.0;
            let mut mx = 0.0f64;
            for a in 0..n {
                o1 += w[a] * x[a] as f64;
                w2 += w[a] * w[a];
                mx = mx.max(w[a].abs());
            }
            o1 *= inv_n;
            acc.o1[k] += o1;
            acc.o1_sq[k] += o1 * o1;
            acc.w2[k] += w2 * inv_n;
            acc.max_abs[k] = acc.max_abs[k].max(mx);
            acc.wc[k] += wc;

            let base = self.row_offset[k];
            if base != usize::MAX {
                for (d, s) in wf.iter_mut().zip(&w) {
                    *d = *s as f32;
                }
                for i in 0..=k {
                    let xi = &x[i * n..(i + 1) * n];
                    acc.tri[base + i] += dot_f32(&wf, xi) as f64 * inv_n;
                }
            }
        }
        acc.iters += 1;
    }

    /// Stores pattern `k`; returns the mean usage afterwards.
    fn store(
        &self,
        k: usize,
        row: &[f32],
        net: &mut Network,
        rng: &mut Stream,
        acc: &mut Accumulator,
    ) -> f64 {
        let cfg = &self.cfg;
        let p = &cfg.device;
        match net {
            Network::Weights(w) => {
                if self.per_synapse.is_empty() {
                    let (a, d, _) = self.shared[k];
                    for (wi, xi) in w.iter_mut().zip(row) {
                        *wi = a * *wi + d * *xi as f64;
                    }
                } else {
                    let tab = &self.per_synapse[k * w.len()..(k + 1) * w.len()];
                    for ((wi, xi), (a, d)) in w.iter_mut().zip(row).zip(tab) {
                        *wi = a * *wi + d * *xi as f64;
                    }
                }
                self.shared.get(k + 1).map_or_else(
                    || wc_closed_form(cfg.pulse.width * (k + 1) as f64, p).unwrap_or(f64::NAN),
                    |s| s.2,
                )
            }
            Network::Cfn { states, deltas, wc } => {
                let step = reduced_step(*wc, cfg.pulse.magnitude, cfg.pulse.width, p);
                for ((s, d), xi) in states.iter_mut().zip(deltas.iter_mut()).zip(row) {
                    let old = s.w_d();
                    let new = step.alpha * old + step.write * *xi as f64;
                    *d = (new - old).abs();
                    *s = SynapseState::from_parts(new, step.wc_next);
                }
                *wc = step.wc_next + cfn_modulate(states, deltas);
                *wc
            }
            Network::Cascade(syn) => {
                let SynapseModelKind::Cascade(m) = cfg.model else { unreachable!() };
                for (s, xi) in syn.iter_mut().zip(row) {
                    *s = cascade_step(*s, if *xi > 0.0 { 1 } else { -1 }, m, rng);
                }
                f64::NAN
            }
            Network::Nodes(states) => {
                let stochastic = cfg.model == SynapseModelKind::StochasticFn;
                let mut wc_sum = 0.0;
                for (s, xi) in states.iter_mut().zip(row) {
                    let pulse = cfg.pulse.with_polarity(Polarity::from_sign(*xi as f64));
                    *s = if stochastic {
                        let out = stochastic_pulse(*s, &pulse, p, rng);
                        let e = (out.e_plus + out.e_minus) as usize;
                        acc.electrons[e.min(ELECTRON_BINS - 1)] += 1;
                        out.state
                    } else {
                        apply_pulse_exact(*s, &pulse, p)
                    };
                    wc_sum += s.w_c();
                }
                wc_sum / states.len() as f64
            }
        }
    }

    pub fn finish(&self, acc: &Accumulator) -> LifetimeCurves {
        let t = self.cfg.n_patterns;
        let m = acc.iters.max(1) as f64;
        let n_syn = self.cfg.n_synapses as f64;
        let u = self.unit;
        let mut curves = LifetimeCurves {
            n_axis: (1..=t as u64).collect(),
            signal: Vec::with_capacity(t),
            noise: Vec::with_capacity(t),
            snr: Vec::with_capacity(t),
            frac_n: Vec::new(),
            frac_retained: Vec::new(),
            tracked_noise: Vec::with_capacity(t),
            snr_se: Vec::with_capacity(t),
            max_abs_weight: acc.max_abs.iter().map(|v| v / u).collect(),
            mean_wc: acc.wc.iter().map(|v| v / m).collect(),
            electron_histogram: (self.cfg.model == SynapseModelKind::StochasticFn)
                .then(|| acc.electrons.clone()),
            unit: u,
            gamma: self.gamma,
            iterations: acc.iters,
        };
        let mut raw_noise = Vec::with_capacity(t);
        for k in 0..t {
            let mean = acc.o1[k] / m;
            let var = if acc.iters > 1 {
                ((acc.o1_sq[k] - m * mean * mean) / (m - 1.0)).max(0.0)
            } else {
                0.0
            };
            let nu = sqrt(acc.w2[k] / m / n_syn);
            raw_noise.push(nu);
            let snr = if nu > 0.0 { mean / nu } else { 0.0 };
            curves.signal.push(mean / u);
            curves.noise.push(nu / u);
            curves.snr.push(snr);
            curves.tracked_noise.push(sqrt(var) / u);
            curves.snr_se.push(if nu > 0.0 { sqrt(var / m) / nu } else { 0.0 });
        }
        for k in 0..t {
            let base = self.row_offset[k];
            if base == usize::MAX {
                continue;
            }
            let nu = raw_noise[k];
            let kept = if nu > 0.0 {
                acc.tri[base..=base + k].iter().filter(|s| **s / m > nu).count()
            } else {
                0
            };
            curves.frac_n.push(k as u64 + 1);
            curves.frac_retained.push(kept as f64 / (k + 1) as f64);
        }
        curves
    }
}

fn read_weights(net: &Network, w: &mut [f64]) {
    match net {
        Network::Weights(v) => w.copy_from_slice(v),
        Network::Cfn { states, .. } | Network::Nodes(states) => {
            for (d, s) in w.iter_mut().zip(states) {
                *d = s.w_d();
            }
        }
        Network::Cascade(syn) => {
            for (d, s) in w.iter_mut().zip(syn) {
                *d = s.efficacy as f64;
            }
        }
    }
}

fn mismatch_tables(cfg: &LifetimeConfig, n: usize, t: usize) -> Vec<(f64, f64)> {
    let mut rng = rng::stream(rng::mix(cfg.seed, 0x6d69_736d), 0);
    let j = cfg.mismatch;
    let mut tab = vec![(0.0, 0.0); n * t];
    for a in 0..n {
        let mut p = cfg.device;
        p.k1 *= 1.0 + j * (2.0 * rng.random::<f64>() - 1.0);
        p.k2 *= 1.0 + j * (2.0 * rng.random::<f64>() - 1.0);
        let mut wc = p.wc0;
        for k in 0..t {
            let s = reduced_step(wc, cfg.pulse.magnitude, cfg.pulse.width, &p);
            tab[k * n + a] = (s.alpha, s.write);
            wc = s.wc_next;
        }
    }
    tab
}

fn stationary_distribution(m: u8) -> Vec<f64> {
    let tm = transition_matrix(m);
    let size = tm.len();
    let mut pi = vec![1.0 / size as f64; size];
    for _ in 0..100_000 {
        let mut next = vec![0.0; size];
        for (i, row) in tm.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                next[j] += pi[i] * v;
            }
        }
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-15 {
            break;
        }
    }
    pi
}

fn sample_cascade(pi: &[f64], m: u8, rng: &mut Stream) -> CascadeSynapse {
    let u: f64 = rng.random();
    let mut c = 0.0;
    for (i, p) in pi.iter().enumerate() {
        c += p;
        if u < c {
            let m = m as usize;
            return CascadeSynapse {
                efficacy: if i >= m { 1 } else { -1 },
                level: (i % m) as u8 + 1,
            };
        }
    }
    CascadeSynapse { efficacy: 1, level: m }
}

/// Global common-mode lift: raises both nodes of every synapse by half the mean
/// |Δw_d| of the latest update. Returns the applied lift.
pub fn cfn_modulate(states: &mut [SynapseState], last_deltas: &[f64]) -> f64 {
    if states.is_empty() || last_deltas.is_empty() {
        return 0.0;
    }
    let v_mod = 0.5 * last_deltas.iter().map(|d| d.abs()).sum::<f64>() / last_deltas.len() as f64;
    if v_mod != 0.0 {
        states.iter_mut().for_each(|s| s.lift(v_mod));
    }
    v_mod
}

/// Sequential driver; see [`LifetimePlan`] for chunked/parallel use.
pub fn run_lifetime(cfg: &LifetimeConfig) -> Result<LifetimeCurves> {
    run_lifetime_with_progress(cfg, &mut |_| {})
}

pub fn run_lifetime_with_progress(
    cfg: &LifetimeConfig,
    progress: &mut dyn FnMut(f64),
) -> Result<LifetimeCurves> {
    let plan = LifetimePlan::new(cfg)?;
    let mut acc = plan.empty();
    let chunks = plan.n_chunks();
    for c in 0..chunks {
        acc.merge(&plan.run_chunk(c));
        progress((c + 1) as f64 / chunks as f64);
    }
    Ok(plan.finish(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(model: SynapseModelKind) -> LifetimeConfig {
        LifetimeConfig { n_synapses: 40, n_patterns: 30, mc_iters: 6, model, ..Default::default() }
    }

    #[test]
    fn model_tags_round_trip() {
        for m in [
            SynapseModelKind::Fn,
            SynapseModelKind::Cfn,
            SynapseModelKind::Cascade(3),
            SynapseModelKind::StochasticFn,
            SynapseModelKind::ExactFn,
        ] {
            assert_eq!(m.to_string().parse::<SynapseModelKind>().unwrap(), m);
        }
        assert!("cascade-6".parse::<SynapseModelKind>().is_err());
        assert!("hebb".parse::<SynapseModelKind>().is_err());
    }

    #[test]
    fn single_pattern_signal() {
        let cfg = LifetimeConfig { n_patterns: 1, ..small(SynapseModelKind::Fn) };
        let c = run_lifetime(&cfg).unwrap();
        assert!((c.signal[0] * (1.0 + c.gamma) - 1.0).abs() < 1e-6);
        assert!((c.snr[0] - sqrt(40.0)).abs() < 1e-3);
        assert_eq!(c.frac_retained, vec![1.0]);
    }

    #[test]
    fn chunking_does_not_change_results() {
        let cfg = small(SynapseModelKind::Cfn);
        let plan = LifetimePlan::new(&cfg).unwrap();
        let mut fwd = plan.empty();
        for c in 0..plan.n_chunks() {
            fwd.merge(&plan.run_chunk(c));
        }
        assert_eq!(plan.finish(&fwd), run_lifetime(&cfg).unwrap());
    }

    #[test]
    fn stride_subsamples_frac() {
        let full = run_lifetime(&small(SynapseModelKind::Fn)).unwrap();
        let cfg = LifetimeConfig { track_stride: 7, ..small(SynapseModelKind::Fn) };
        let sparse = run_lifetime(&cfg).unwrap();
        assert_eq!(sparse.frac_n, vec![7, 14, 21, 28, 30]);
        for (n, f) in sparse.frac_n.iter().zip(&sparse.frac_retained) {
            assert_eq!(*f, full.frac_retained[*n as usize - 1]);
        }
        assert_eq!(sparse.snr, full.snr);
    }

    #[test]
    fn balanced_mode_balances_each_synapse() {
        let cfg = LifetimeConfig { pattern_mode: PatternMode::Balanced, ..small(SynapseModelKind::Fn) };
        let plan = LifetimePlan::new(&cfg).unwrap();
        let x = plan.patterns(&mut rng::stream(1, 1));
        for a in 0..40 {
            let s: f32 = (0..30).map(|k| x[k * 40 + a]).sum();
            assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn cfn_lift_keeps_weights() {
        let mut s = vec![SynapseState::from_parts(0.01, 4.5), SynapseState::from_parts(-0.02, 4.5)];
        let before: Vec<f64> = s.iter().map(|x| x.w_d()).collect();
        let v = cfn_modulate(&mut s, &[0.004, 0.002]);
        assert!((v - 0.0015).abs() < 1e-15);
        for (x, b) in s.iter().zip(before) {
            assert!((x.w_d() - b).abs() < 1e-15);
        }
        let snapshot = s.clone();
        assert_eq!(cfn_modulate(&mut s, &[0.0, 0.0]), 0.0);
        assert_eq!(s, snapshot);
    }

    #[test]
    fn every_model_runs() {
        for m in [
            SynapseModelKind::Fn,
            SynapseModelKind::Cfn,
            SynapseModelKind::Cascade(1),
            SynapseModelKind::Cascade(5),
            SynapseModelKind::StochasticFn,
            SynapseModelKind::ExactFn,
        ] {
            let c = run_lifetime(&small(m)).unwrap();
            assert_eq!(c.snr.len(), 30);
            assert_eq!(c.frac_retained.len(), 30);
            assert!(c.frac_retained.iter().all(|f| (0.0..=1.0).contains(f)));
        }
    }

    #[test]
    fn stationary_cascade_is_balanced() {
        for m in 1..=MAX_LEVELS {
            let pi = stationary_distribution(m);
            let up: f64 = pi[m as usize..].iter().sum();
            assert!((up - 0.5).abs() < 1e-12);
        }
    }
}
