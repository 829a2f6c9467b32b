//! Experiment configuration file (TOML) and the resolved settings each
//! subcommand runs with.
//!
//! Every field in the file is optional; anything absent keeps the flag value
//! or the built-in default. The file wins over flags unless `--strict-flags`
//! is given, in which case explicit flags win.

use std::path::{Path, PathBuf};

use fnsyn_core::consolidation::{LifetimeConfig, PatternMode, SynapseModelKind};
use fnsyn_core::learning::{ContinualConfig, EwcConfig, FnStoreConfig, Method, MlpConfig};
use fnsyn_core::{DeviceParams, Pulse};
use serde::{Deserialize, Serialize};

use crate::data::NormScope;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub device: Option<DeviceSection>,
    pub pulse: Option<PulseSection>,
    pub characterize: Option<CharacterizeSection>,
    pub lifetime: Option<LifetimeSection>,
    pub stochastic: Option<StochasticSection>,
    pub continual: Option<ContinualSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub wc0: Option<f64>,
    /// Sets `wc0` so that the pulse width realizes this gamma; ignored if `wc0` is set.
    pub gamma: Option<f64>,
    pub c_total: Option<f64>,
    pub c_couple: Option<f64>,
    pub area: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub magnitude: Option<f64>,
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterizeSection {
    pub widths: Option<Vec<f64>>,
    pub magnitudes: Option<Vec<f64>>,
    pub pulses: Option<usize>,
    pub repeats: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifetimeSection {
    pub n_synapses: Option<usize>,
    pub n_patterns: Option<usize>,
    pub model: Option<SynapseModelKind>,
    pub mc_iters: Option<usize>,
    pub pattern_mode: Option<PatternMode>,
    pub track_stride: Option<usize>,
    pub mismatch: Option<f64>,
    pub analytic: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticSection {
    pub wc0s: Option<Vec<f64>>,
    pub n_synapses: Option<usize>,
    pub n_patterns: Option<usize>,
    pub mc_iters: Option<usize>,
    pub track_stride: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinualSection {
    pub methods: Option<Vec<Method>>,
    pub hidden: Option<Vec<usize>>,
    pub seeds: Option<Vec<u64>>,
    pub data: Option<PathBuf>,
    pub normalization: Option<NormScope>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub fisher_samples: Option<usize>,
    pub usage_bins: Option<usize>,
    pub ewc: Option<EwcConfig>,
    pub fn_store: Option<FnStoreSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnStoreSection {
    pub scale: Option<f64>,
    pub magnitude: Option<f64>,
    pub reference_wc: Option<f64>,
    pub max_width: Option<f64>,
    pub mismatch: Option<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config schema: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::missing(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
    if let Some(v) = src {
        *dst = v.clone();
    }
}

/// Applies `overlay` then, depending on precedence, either before or after
/// the flag overlay. Keeps the ordering rule in one place.
pub fn layered<T>(
    base: T,
    strict_flags: bool,
    file: impl FnOnce(&mut T),
    flags: impl FnOnce(&mut T),
) -> T {
    let mut v = base;
    if strict_flags {
        file(&mut v);
        flags(&mut v);
    } else {
        flags(&mut v);
        file(&mut v);
    }
    v
}

impl DeviceSection {
    /// `gamma` is resolved against `width` after every other field.
    pub fn apply(&self, p: &mut DeviceParams, width: f64) {
        set(&mut p.k1, &self.k1);
        set(&mut p.k2, &self.k2);
        set(&mut p.c_total, &self.c_total);
        set(&mut p.c_couple, &self.c_couple);
        set(&mut p.area, &self.area);
        match (self.wc0, self.gamma) {
            (Some(w), _) => p.wc0 = w,
            (None, Some(g)) => p.wc0 = p.wc0_for_gamma(g, width),
            _ => {}
        }
    }
}

impl PulseSection {
    pub fn apply(&self, p: &mut Pulse) {
        set(&mut p.magnitude, &self.magnitude);
        set(&mut p.width, &self.width);
    }
}

/// Fully resolved `characterize` settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizeSettings {
    pub seed: u64,
    pub device: DeviceParams,
    /// Base pulse; sweeps vary one of its fields.
    pub pulse: Pulse,
    pub widths: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Random-walk length.
    pub pulses: usize,
    /// Identical potentiation pulses in the repeated-pulse series.
    pub repeats: usize,
}

impl Default for CharacterizeSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            device: DeviceParams::default(),
            pulse: Pulse::default(),
            widths: (1..=10).map(|k| 0.1 * k as f64).collect(),
            magnitudes: (1..=10).map(|k| 2.0 * k as f64).collect(),
            pulses: 200,
            repeats: 50,
        }
    }
}

impl CharacterizeSettings {
    pub fn apply_file(&mut self, cfg: &ExperimentConfig) {
        set(&mut self.seed, &cfg.seed);
        if let Some(p) = &cfg.pulse {
            p.apply(&mut self.pulse);
        }
        if let Some(d) = &cfg.device {
            d.apply(&mut self.device, self.pulse.width);
        }
        if let Some(c) = &cfg.characterize {
            set(&mut self.widths, &c.widths);
            set(&mut self.magnitudes, &c.magnitudes);
            set(&mut self.pulses, &c.pulses);
            set(&mut self.repeats, &c.repeats);
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.device.validate()?;
        self.pulse.validate()?;
        if self.widths.iter().chain(&self.magnitudes).any(|v| !v.is_finite()) {
            return Err(CliError::Config("sweep values must be finite".into()));
        }
        Ok(())
    }
}

/// Fully resolved `lifetime` settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeSettings {
    pub run: LifetimeConfig,
    /// Add analytic signal/noise/SNR columns.
    pub analytic: bool,
}

impl Default for LifetimeSettings {
    fn default() -> Self {
        Self { run: LifetimeConfig::default(), analytic: true }
    }
}

impl LifetimeSettings {
    pub fn apply_file(&mut self, cfg: &ExperimentConfig) {
        let r = &mut self.run;
        set(&mut r.seed, &cfg.seed);
        if let Some(p) = &cfg.pulse {
            p.apply(&mut r.pulse);
        }
        if let Some(d) = &cfg.device {
            d.apply(&mut r.device, r.pulse.width);
        }
        if let Some(l) = &cfg.lifetime {
            set(&mut r.n_synapses, &l.n_synapses);
            set(&mut r.n_patterns, &l.n_patterns);
            set(&mut r.model, &l.model);
            set(&mut r.mc_iters, &l.mc_iters);
            set(&mut r.pattern_mode, &l.pattern_mode);
            set(&mut r.track_stride, &l.track_stride);
            set(&mut r.mismatch, &l.mismatch);
            set(&mut self.analytic, &l.analytic);
        }
    }
}

/// Fully resolved `stochastic` settings: one stochastic run and its
/// deterministic twin per initial usage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticSettings {
    pub wc0s: Vec<f64>,
    /// Template; `model` and `device.wc0` are set per run.
    pub run: LifetimeConfig,
}

impl Default for StochasticSettings {
    fn default() -> Self {
        Self {
            wc0s: vec![3.4, 3.1, 2.8],
            run: LifetimeConfig {
                n_synapses: 100,
                n_patterns: 100,
                mc_iters: 200,
                model: SynapseModelKind::StochasticFn,
                // Large enough that the lowest usage still moves electrons.
                pulse: Pulse { magnitude: 70.0, ..Pulse::default() },
                ..LifetimeConfig::default()
            },
        }
    }
}

impl StochasticSettings {
    pub fn apply_file(&mut self, cfg: &ExperimentConfig) {
        let r = &mut self.run;
        set(&mut r.seed, &cfg.seed);
        if let Some(p) = &cfg.pulse {
            p.apply(&mut r.pulse);
        }
        if let Some(d) = &cfg.device {
            d.apply(&mut r.device, r.pulse.width);
        }
        if let Some(s) = &cfg.stochastic {
            set(&mut self.wc0s, &s.wc0s);
            set(&mut r.n_synapses, &s.n_synapses);
            set(&mut r.n_patterns, &s.n_patterns);
            set(&mut r.mc_iters, &s.mc_iters);
            set(&mut r.track_stride, &s.track_stride);
        }
        if let Some(w) = cfg.device.as_ref().and_then(|d| d.wc0) {
            self.wc0s = vec![w];
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.wc0s.is_empty() {
            return Err(CliError::Config("at least one wc0 is required".into()));
        }
        for &w in &self.wc0s {
            self.config_for(w, SynapseModelKind::StochasticFn).validate()?;
        }
        Ok(())
    }

    pub fn config_for(&self, wc0: f64, model: SynapseModelKind) -> LifetimeConfig {
        LifetimeConfig { model, device: self.run.device.with_wc0(wc0), ..self.run.clone() }
    }
}

/// Fully resolved `continual` settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinualSettings {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// MNIST directory; `None` searches the default locations.
    pub data: Option<PathBuf>,
    pub normalization: NormScope,
    /// Template; `method` and `seed` are set per run.
    pub run: ContinualConfig,
}

impl Default for ContinualSettings {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            seeds: vec![0],
            data: None,
            normalization: NormScope::Global,
            run: ContinualConfig::new(Method::Sgd),
        }
    }
}

impl ContinualSettings {
    pub fn apply_file(&mut self, cfg: &ExperimentConfig) -> CliResult<()> {
        let r = &mut self.run;
        if let Some(s) = cfg.seed {
            self.seeds = vec![s];
        }
        if let Some(d) = &cfg.device {
            d.apply(&mut r.fn_store.device, 0.1);
        }
        if let Some(c) = &cfg.continual {
            set(&mut self.methods, &c.methods);
            set(&mut self.seeds, &c.seeds);
            if c.data.is_some() {
                self.data = c.data.clone();
            }
            set(&mut self.normalization, &c.normalization);
            if let Some(h) = &c.hidden {
                r.mlp = MlpConfig::with_hidden(h);
            }
            set(&mut r.learning_rate, &c.learning_rate);
            set(&mut r.epochs, &c.epochs);
            set(&mut r.batch_size, &c.batch_size);
            set(&mut r.fisher_samples, &c.fisher_samples);
            set(&mut r.usage_bins, &c.usage_bins);
            if c.ewc.is_some() {
                r.ewc = c.ewc;
            }
            if let Some(f) = &c.fn_store {
                apply_store(&mut r.fn_store, f);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.methods.is_empty() || self.seeds.is_empty() {
            return Err(CliError::Config("need at least one method and one seed".into()));
        }
        for &m in &self.methods {
            self.config_for(m, self.seeds[0]).validate()?;
        }
        Ok(())
    }

    pub fn config_for(&self, method: Method, seed: u64) -> ContinualConfig {
        ContinualConfig { method, seed, ..self.run.clone() }
    }
}

fn apply_store(s: &mut FnStoreConfig, f: &FnStoreSection) {
    set(&mut s.scale, &f.scale);
    set(&mut s.magnitude, &f.magnitude);
    set(&mut s.reference_wc, &f.reference_wc);
    set(&mut s.max_width, &f.max_width);
    set(&mut s.mismatch, &f.mismatch);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_valid() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let e = ExperimentConfig::parse("[lifetime]\nn_synapse = 10\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("n_synapse"));
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
    }

    #[test]
    fn model_tags_parse() {
        let c = ExperimentConfig::parse("[lifetime]\nmodel = \"cascade-3\"\n").unwrap();
        assert_eq!(c.lifetime.unwrap().model, Some(SynapseModelKind::Cascade(3)));
        assert!(ExperimentConfig::parse("[lifetime]\nmodel = \"hebb\"\n").is_err());
    }

    #[test]
    fn precedence_follows_strict_flag() {
        let cfg = ExperimentConfig::parse("seed = 7\n[lifetime]\nn_synapses = 11\n").unwrap();
        let run = |strict| {
            layered(LifetimeSettings::default(), strict, |s| s.apply_file(&cfg), |s| s.run.n_synapses = 99)
        };
        assert_eq!(run(false).run.n_synapses, 11);
        assert_eq!(run(true).run.n_synapses, 99);
        assert_eq!(run(true).run.seed, 7);
    }

    #[test]
    fn gamma_sets_wc0() {
        let cfg = ExperimentConfig::parse("[device]\ngamma = 50.0\n").unwrap();
        let mut s = LifetimeSettings::default();
        s.apply_file(&cfg);
        let g = fnsyn_core::device::gamma(&s.run.device, s.run.pulse.width).unwrap();
        assert!((g / 50.0 - 1.0).abs() < 1e-9, "{g}");
    }

    #[test]
    fn continual_section() {
        let cfg = ExperimentConfig::parse(
            "[continual]\nmethods = [\"fn-sgd\", \"sgd\"]\nhidden = [400, 400]\nseeds = [1, 2]\n\
             [continual.fn_store]\nmismatch = 0.05\n[device]\nwc0 = 4.0\n",
        )
        .unwrap();
        let mut s = ContinualSettings::default();
        s.apply_file(&cfg).unwrap();
        assert_eq!(s.methods, vec![Method::FnSgd, Method::Sgd]);
        assert_eq!(s.seeds, vec![1, 2]);
        assert_eq!(s.run.mlp.layer_sizes, vec![1024, 400, 400, 2]);
        assert_eq!(s.run.fn_store.mismatch, 0.05);
        assert_eq!(s.run.fn_store.device.wc0, 4.0);
        s.validate().unwrap();
    }
}
