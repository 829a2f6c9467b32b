//! Sequential-task training: each task is trained once, in order, and never
//! revisited; after each one the network is scored on every task seen so far.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ewc::{diagonal_fisher, Ewc, EwcConfig};
use super::mlp::{Mlp, MlpConfig};
use super::optim::{Optimizer, OptimizerConfig};
use super::store::{FnStoreConfig, FnWeightStore, ParamStore};
use crate::error::{config, Error, Result};
use crate::rng;

/// Row-major samples with labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskData {
    pub dim: usize,
    pub x: Vec<f32>,
    pub y: Vec<u8>,
}

impl TaskData {
    pub fn new(dim: usize, x: Vec<f32>, y: Vec<u8>) -> Result<Self> {
        if dim == 0 || x.len() != dim * y.len() {
            return Err(Error::Shape(alloc::format!(
                "{} features do not form {} samples of width {dim}",
                x.len(),
                y.len()
            )));
        }
        Ok(Self { dim, x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Task {
    pub name: String,
    pub train: TaskData,
    pub test: TaskData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Sgd,
    Adam,
    Ewc,
    OnlineEwc,
    FnSgd,
    FnAdam,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Self::Sgd, Self::Adam, Self::Ewc, Self::OnlineEwc, Self::FnSgd, Self::FnAdam];

    pub fn uses_fn_store(self) -> bool {
        matches!(self, Self::FnSgd | Self::FnAdam)
    }

    /// EWC variants run on Adam.
    pub fn optimizer(self, learning_rate: f64) -> OptimizerConfig {
        match self {
            Self::Sgd | Self::FnSgd => OptimizerConfig::sgd(learning_rate),
            _ => OptimizerConfig::adam(learning_rate),
        }
    }

    pub fn default_ewc(self) -> Option<EwcConfig> {
        match self {
            Self::Ewc => Some(EwcConfig::standard()),
            Self::OnlineEwc => Some(EwcConfig::online()),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
            Self::Ewc => "ewc",
            Self::OnlineEwc => "online-ewc",
            Self::FnSgd => "fn-sgd",
            Self::FnAdam => "fn-adam",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| config!("unknown method '{s}' (expected sgd, adam, ewc, online-ewc, fn-sgd or fn-adam)"))
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinualConfig {
    pub method: Method,
    #[serde(default)]
    pub mlp: MlpConfig,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fn_store: FnStoreConfig,
    /// Overrides the method's default EWC settings.
    #[serde(default)]
    pub ewc: Option<EwcConfig>,
    /// Training samples used to estimate the Fisher after each task.
    #[serde(default = "default_fisher_samples")]
    pub fisher_samples: usize,
    #[serde(default = "default_usage_bins")]
    pub usage_bins: usize,
}

fn default_lr() -> f64 {
    1e-3
}
fn default_epochs() -> usize {
    4
}
fn default_batch() -> usize {
    128
}
fn default_fisher_samples() -> usize {
    1000
}
fn default_usage_bins() -> usize {
    40
}

impl ContinualConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            mlp: MlpConfig::default(),
            learning_rate: default_lr(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            seed: 0,
            fn_store: FnStoreConfig::default(),
            ewc: None,
            fisher_samples: default_fisher_samples(),
            usage_bins: default_usage_bins(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mlp.validate_shape()?;
        self.method.optimizer(self.learning_rate).validate()?;
        if self.epochs == 0 || self.batch_size == 0 || self.usage_bins == 0 {
            return Err(config!("epochs, batch_size and usage_bins must be positive"));
        }
        if self.method.uses_fn_store() {
            self.fn_store.validate()?;
        }
        if let Some(e) = self.ewc_config() {
            e.validate()?;
        }
        Ok(())
    }

    pub fn ewc_config(&self) -> Option<EwcConfig> {
        self.method.default_ewc().map(|d| self.ewc.unwrap_or(d))
    }
}

/// `acc[i][j]`: accuracy on task `j` after training through task `i` (NaN for `j > i`).
#[derive(Debug, Clone)]
pub struct TaskAccuracyMatrix {
    n: usize,
    acc: Vec<f64>,
}

/// Bitwise, so untrained (NaN) cells compare equal.
impl PartialEq for TaskAccuracyMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.acc.iter().zip(&other.acc).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl TaskAccuracyMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, acc: vec![f64::NAN; n * n] }
    }

    pub fn n_tasks(&self) -> usize {
        self.n
    }

    pub fn get(&self, trained: usize, evaluated: usize) -> f64 {
        self.acc[trained * self.n + evaluated]
    }

    pub fn set(&mut self, trained: usize, evaluated: usize, v: f64) {
        self.acc[trained * self.n + evaluated] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Mean accuracy over all tasks after the last one.
    pub fn overall_average(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        (0..self.n).map(|j| self.get(self.n - 1, j)).sum::<f64>() / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    /// Values outside `[lo, hi]` are counted in the end bins.
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerUsage {
    pub layer: usize,
    pub mean: f64,
    pub variance: f64,
    pub histogram: Histogram,
}

/// Distribution of `w_c` over one layer's weights (biases excluded).
pub fn usage_histogram(
    store: &FnWeightStore,
    net: &Mlp<f32>,
    layer: usize,
    bins: usize,
    lo: f64,
    hi: f64,
) -> Result<LayerUsage> {
    let span = *net
        .layers()
        .get(layer)
        .ok_or_else(|| config!("layer {layer} out of range"))?;
    if bins == 0 || !(hi > lo) {
        return Err(config!("histogram needs bins > 0 and hi > lo"));
    }
    let wc: Vec<f64> = span.weight_range().map(|i| store.usage(i)).collect();
    let mean = crate::stats::mean(&wc);
    let variance = wc.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / wc.len() as f64;
    let mut counts = vec![0u64; bins];
    for w in &wc {
        let b = crate::math::floor((w - lo) / (hi - lo) * bins as f64);
        counts[(b.max(0.0) as usize).min(bins - 1)] += 1;
    }
    Ok(LayerUsage { layer, mean, variance, histogram: Histogram { lo, hi, counts } })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub task: usize,
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinualResult {
    pub method: Method,
    pub seed: u64,
    pub matrix: TaskAccuracyMatrix,
    /// Per task, per layer `w_c` distribution (FN methods only).
    pub usage: Vec<Vec<LayerUsage>>,
    pub log: Vec<EpochLog>,
    pub pulses: u64,
    pub clamped: u64,
    /// Total programming time over all synapses, s.
    pub pulse_seconds: f64,
    /// Final parameters.
    pub params: Vec<f32>,
}

/// Fraction of correct predictions.
pub fn evaluate(net: &Mlp<f32>, data: &TaskData) -> Result<f64> {
    if data.is_empty() {
        return Ok(f64::NAN);
    }
    let chunk = 1000;
    let mut ws = net.workspace(chunk);
    let mut correct = 0usize;
    for (xs, ys) in data.x.chunks(chunk * data.dim).zip(data.y.chunks(chunk)) {
        let pred = net.predict(xs, &mut ws)?;
        correct += pred.iter().zip(ys).filter(|(p, y)| p == y).count();
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Trains one task for `epochs` passes, reshuffling each epoch. Returns the
/// number of clamped pulses.
#[allow(clippy::too_many_arguments)]
pub fn train_task(
    net: &mut Mlp<f32>,
    store: &mut ParamStore,
    opt: &mut Optimizer,
    ewc: Option<&Ewc>,
    data: &TaskData,
    epochs: usize,
    batch_size: usize,
    rng: &mut rng::Stream,
    task_index: usize,
    log: &mut Vec<EpochLog>,
) -> Result<u64> {
    if data.dim != net.input_dim() {
        return Err(Error::Shape(alloc::format!(
            "task width {} does not match network input {}",
            data.dim,
            net.input_dim()
        )));
    }
    let n_params = net.n_params();
    let mut grad = vec![0.0f32; n_params];
    let mut delta = vec![0.0f32; n_params];
    let mut ws = net.workspace(batch_size);
    let mut xb = Vec::with_capacity(batch_size * data.dim);
    let mut yb = Vec::with_capacity(batch_size);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut clamped = 0;
    for epoch in 0..epochs {
        order.shuffle(rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for idx in order.chunks(batch_size) {
            xb.clear();
            yb.clear();
            for &i in idx {
                xb.extend_from_slice(data.sample(i));
                yb.push(data.y[i]);
            }
            let loss = net.loss_and_grad(&xb, &yb, &mut ws, &mut grad)?;
            let k = net.output_dim();
            correct += ws
                .output(yb.len(), k)
                .chunks_exact(k)
                .zip(&yb)
                .filter(|(p, y)| argmax(p) == **y as usize)
                .count();
            loss_sum += loss * yb.len() as f64;
            if let Some(e) = ewc {
                e.add_penalty_grad(&net.params, &mut grad);
            }
            opt.delta(&grad, &mut delta);
            clamped += store.apply(&mut net.params, &delta);
        }
        let n = data.len().max(1) as f64;
        log.push(EpochLog { task: task_index, epoch, loss: loss_sum / n, accuracy: correct as f64 / n });
    }
    Ok(clamped)
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Runs the full protocol over `tasks` in order.
pub fn run_continual(cfg: &ContinualConfig, tasks: &[Task]) -> Result<ContinualResult> {
    run_continual_with_progress(cfg, tasks, &mut |_| {})
}

pub fn run_continual_with_progress(
    cfg: &ContinualConfig,
    tasks: &[Task],
    progress: &mut dyn FnMut(f64),
) -> Result<ContinualResult> {
    cfg.validate()?;
    let mut net = Mlp::<f32>::glorot(cfg.mlp.clone(), &mut rng::stream(cfg.seed, 0))?;
    let mut store = if cfg.method.uses_fn_store() {
        let s = FnWeightStore::new(cfg.fn_store, &net.params, &mut rng::stream(cfg.seed, 1))?;
        // Realized weights are what the store holds, not the f32 request.
        for (i, p) in net.params.iter_mut().enumerate() {
            *p = s.read(i);
        }
        ParamStore::Fn(s)
    } else {
        ParamStore::Conventional
    };
    let mut ewc = cfg.ewc_config().map(Ewc::new).transpose()?;

    let n = tasks.len();
    let mut matrix = TaskAccuracyMatrix::new(n);
    let mut usage = Vec::new();
    let mut log = Vec::new();
    let mut clamped = 0;
    let wc0 = cfg.fn_store.device.wc0;
    for (t, task) in tasks.iter().enumerate() {
        let mut opt = Optimizer::new(cfg.method.optimizer(cfg.learning_rate), net.n_params())?;
        let mut shuffle = rng::stream(cfg.seed, 2 + t as u64);
        clamped += train_task(
            &mut net,
            &mut store,
            &mut opt,
            ewc.as_ref(),
            &task.train,
            cfg.epochs,
            cfg.batch_size,
            &mut shuffle,
            t,
            &mut log,
        )?;
        for (j, seen) in tasks[..=t].iter().enumerate() {
            matrix.set(t, j, evaluate(&net, &seen.test)?);
        }
        if let Some(e) = ewc.as_mut() {
            let mut idx: Vec<usize> = (0..task.train.len()).collect();
            idx.shuffle(&mut rng::stream(cfg.seed, 1000 + t as u64));
            idx.truncate(cfg.fisher_samples);
            let mut xs = Vec::with_capacity(idx.len() * task.train.dim);
            for &i in &idx {
                xs.extend_from_slice(task.train.sample(i));
            }
            e.consolidate(&net.params, diagonal_fisher(&net, &xs)?);
        }
        if let Some(s) = store.as_fn() {
            let layers = (0..net.layers().len())
                .map(|l| usage_histogram(s, &net, l, cfg.usage_bins, wc0 - 0.4, wc0))
                .collect::<Result<Vec<_>>>()?;
            usage.push(layers);
        }
        progress((t + 1) as f64 / n as f64);
    }
    let (pulses, clamped_total, pulse_seconds) = match store.as_fn() {
        Some(s) => (s.pulses(), s.clamped(), s.pulse_seconds()),
        None => (0, clamped, 0.0),
    };
    Ok(ContinualResult {
        method: cfg.method,
        seed: cfg.seed,
        matrix,
        usage,
        log,
        pulses,
        clamped: clamped_total,
        pulse_seconds,
        params: net.params,
    })
}
