//! Fully connected ReLU network with a softmax output.
//!
//! Parameters live in one flat buffer (per layer: weights row-major
//! `out x in`, then biases) so stores and optimizers can treat them uniformly.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// Float type the network can run in: `f32` for training, `f64` for gradient checks.
pub trait Scalar:
    Copy
    + Debug
    + Default
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;

    /// `C = alpha A B + beta C` on strided views; see `matrixmultiply`.
    ///
    /// # Safety
    /// Every index reachable through the shapes and strides must be in bounds.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn exp(self) -> Self {
        libm::expf(self)
    }
    fn ln(self) -> Self {
        libm::logf(self)
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        libm::exp(self)
    }
    fn ln(self) -> Self {
        libm::log(self)
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Strided matrix view: `(slice, rows, cols, row_stride, col_stride)`.
type View<'a, T> = (&'a [T], usize, usize, usize, usize);

fn extent(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

/// Bounds-checked `C (+)= A B` with `C` dense row-major.
fn matmul<T: Scalar>(a: View<T>, b: View<T>, c: &mut [T], accumulate: bool) {
    let (sa, m, k, rsa, csa) = a;
    let (sb, kb, n, rsb, csb) = b;
    assert_eq!(k, kb, "inner dimensions differ");
    assert!(extent(m, k, rsa, csa) <= sa.len(), "A view out of bounds");
    assert!(extent(k, n, rsb, csb) <= sb.len(), "B view out of bounds");
    assert!(m * n <= c.len(), "C out of bounds");
    let beta = if accumulate { T::ONE } else { T::ZERO };
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::ONE,
            sa.as_ptr(),
            rsa as isize,
            csa as isize,
            sb.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { layer_sizes: vec![1024, 80, 60, 2], activation: Activation::Relu }
    }
}

impl MlpConfig {
    pub fn with_hidden(hidden: &[usize]) -> Self {
        let mut layer_sizes = vec![1024];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(2);
        Self { layer_sizes, activation: Activation::Relu }
    }

    /// Checks the split-MNIST shape contract (1024 in, 2 out, >= 1 hidden).
    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        let s = &self.layer_sizes;
        if s[0] != 1024 || s[s.len() - 1] != 2 {
            return Err(config!("network must map 1024 inputs to 2 outputs, got {s:?}"));
        }
        Ok(())
    }

    /// Shape checks only; toy networks of any width pass.
    pub fn validate_shape(&self) -> Result<()> {
        let s = &self.layer_sizes;
        if s.len() < 3 {
            return Err(config!("need at least one hidden layer, got {s:?}"));
        }
        if s.contains(&0) {
            return Err(config!("layer sizes must be positive, got {s:?}"));
        }
        Ok(())
    }
}

/// Offsets of one layer in the flat parameter buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpan {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub biases: usize,
}

impl LayerSpan {
    pub fn weight_range(&self) -> core::ops::Range<usize> {
        self.weights..self.weights + self.fan_in * self.fan_out
    }

    pub fn bias_range(&self) -> core::ops::Range<usize> {
        self.biases..self.biases + self.fan_out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T: Scalar> {
    config: MlpConfig,
    layers: Vec<LayerSpan>,
    pub params: Vec<T>,
}

/// Reusable buffers for a batch of a given size.
#[derive(Debug, Clone)]
pub struct Workspace<T> {
    batch: usize,
    /// Post-activation outputs per layer (the last holds probabilities).
    acts: Vec<Vec<T>>,
    delta: Vec<T>,
    delta_prev: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    /// Probabilities from the most recent forward pass over `n` samples.
    pub fn output(&self, n: usize, classes: usize) -> &[T] {
        &self.acts[self.acts.len() - 1][..n * classes]
    }
}

impl<T: Scalar> Mlp<T> {
    /// All-zero parameters.
    pub fn zeros(config: MlpConfig) -> Result<Self> {
        config.validate_shape()?;
        let mut layers = Vec::new();
        let mut off = 0;
        for w in config.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            layers.push(LayerSpan { fan_in, fan_out, weights: off, biases: off + fan_in * fan_out });
            off += fan_in * fan_out + fan_out;
        }
        Ok(Self { config, layers, params: vec![T::ZERO; off] })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(config: MlpConfig, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        for l in net.layers.clone() {
            let limit = libm::sqrt(6.0 / (l.fan_in + l.fan_out) as f64);
            for w in &mut net.params[l.weight_range()] {
                *w = T::from_f64(limit * (2.0 * rng.random::<f64>() - 1.0));
            }
        }
        Ok(net)
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerSpan] {
        &self.layers
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.config.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.config.layer_sizes.last().expect("validated")
    }

    pub fn workspace(&self, batch: usize) -> Workspace<T> {
        Workspace {
            batch,
            acts: self.config.layer_sizes[1..].iter().map(|&n| vec![T::ZERO; batch * n]).collect(),
            delta: Vec::new(),
            delta_prev: Vec::new(),
        }
    }

    fn check_batch(&self, x: &[T], ws: &Workspace<T>) -> Result<usize> {
        let d = self.input_dim();
        if !x.len().is_multiple_of(d) {
            return Err(Error::Shape(alloc::format!(
                "input length {} is not a multiple of {d}",
                x.len()
            )));
        }
        let n = x.len() / d;
        if n > ws.batch {
            return Err(Error::Shape(alloc::format!(
                "batch of {n} exceeds workspace capacity {}",
                ws.batch
            )));
        }
        Ok(n)
    }

    /// Class probabilities for a row-major batch `x` (`n x input_dim`).
    pub fn forward<'w>(&self, x: &[T], ws: &'w mut Workspace<T>) -> Result<&'w [T]> {
        let n = self.check_batch(x, ws)?;
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let (before, rest) = ws.acts.split_at_mut(li);
            let input: &[T] = if li == 0 { x } else { &before[li - 1][..n * l.fan_in] };
            let out = &mut rest[0][..n * l.fan_out];
            let b = &self.params[l.bias_range()];
            for row in out.chunks_exact_mut(l.fan_out) {
                row.copy_from_slice(b);
            }
            let w = &self.params[l.weight_range()];
            // out = input (n x in) * W^T (in x out)
            matmul((input, n, l.fan_in, l.fan_in, 1), (w, l.fan_in, l.fan_out, 1, l.fan_in), out, true);
            if li < last {
                for v in out.iter_mut() {
                    if *v < T::ZERO {
                        *v = T::ZERO;
                    }
                }
            } else {
                for row in out.chunks_exact_mut(l.fan_out) {
                    softmax_in_place(row);
                }
            }
        }
        Ok(&ws.acts[last][..n * self.output_dim()])
    }

    /// Mean cross-entropy over the batch and its gradient (written into `grad`).
    pub fn loss_and_grad(
        &self,
        x: &[T],
        labels: &[u8],
        ws: &mut Workspace<T>,
        grad: &mut [T],
    ) -> Result<f64> {
        if grad.len() != self.params.len() {
            return Err(Error::Shape(alloc::format!(
                "gradient buffer has {} entries, network has {}",
                grad.len(),
                self.params.len()
            )));
        }
        let n = self.check_batch(x, ws)?;
        if labels.len() != n {
            return Err(Error::Shape(alloc::format!("{} labels for {n} samples", labels.len())));
        }
        let k = self.output_dim();
        if let Some(&bad) = labels.iter().find(|&&y| y as usize >= k) {
            return Err(Error::Shape(alloc::format!("label {bad} outside {k} classes")));
        }
        if n == 0 {
            grad.iter_mut().for_each(|g| *g = T::ZERO);
            return Ok(0.0);
        }
        self.forward(x, ws)?;

        let last = self.layers.len() - 1;
        let inv_n = T::from_f64(1.0 / n as f64);
        let probs = &ws.acts[last][..n * k];
        let mut loss = 0.0;
        ws.delta.clear();
        ws.delta.extend_from_slice(probs);
        for (i, &y) in labels.iter().enumerate() {
            let p = probs[i * k + y as usize].to_f64();
            loss -= libm::log(p.max(f64::MIN_POSITIVE));
            ws.delta[i * k + y as usize] = ws.delta[i * k + y as usize] - T::ONE;
        }
        ws.delta.iter_mut().for_each(|d| *d = *d * inv_n);

        for li in (0..=last).rev() {
            let l = self.layers[li];
            let input: &[T] = if li == 0 { x } else { &ws.acts[li - 1][..n * l.fan_in] };
            let delta = &ws.delta[..n * l.fan_out];
            // dW = delta^T (out x n) * input (n x in)
            matmul(
                (delta, l.fan_out, n, 1, l.fan_out),
                (input, n, l.fan_in, l.fan_in, 1),
                &mut grad[l.weight_range()],
                false,
            );
            let gb = &mut grad[l.bias_range()];
            gb.iter_mut().for_each(|g| *g = T::ZERO);
            for row in delta.chunks_exact(l.fan_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += *d;
                }
            }
            if li > 0 {
                // delta_prev = delta (n x out) * W (out x in), masked by ReLU'.
                ws.delta_prev.clear();
                ws.delta_prev.resize(n * l.fan_in, T::ZERO);
                let w = &self.params[l.weight_range()];
                matmul((delta, n, l.fan_out, l.fan_out, 1), (w, l.fan_out, l.fan_in, l.fan_in, 1), &mut ws.delta_prev, false);
                for (d, a) in ws.delta_prev.iter_mut().zip(input) {
                    if !(*a > T::ZERO) {
                        *d = T::ZERO;
                    }
                }
                core::mem::swap(&mut ws.delta, &mut ws.delta_prev);
            }
        }
        Ok(loss / n as f64)
    }

    /// Mean cross-entropy without gradients.
    pub fn loss(&self, x: &[T], labels: &[u8], ws: &mut Workspace<T>) -> Result<f64> {
        let k = self.output_dim();
        let probs = self.forward(x, ws)?;
        let n = labels.len();
        let total: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| -libm::log(probs[i * k + y as usize].to_f64().max(f64::MIN_POSITIVE)))
            .sum();
        Ok(total / n.max(1) as f64)
    }

    /// Predicted class per sample.
    pub fn predict(&self, x: &[T], ws: &mut Workspace<T>) -> Result<Vec<u8>> {
        let k = self.output_dim();
        let probs = self.forward(x, ws)?;
        Ok(probs.chunks_exact(k).map(argmax).collect())
    }
}

fn argmax<T: Scalar>(row: &[T]) -> u8 {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best as u8
}

/// Numerically stable softmax; finite for any finite logits.
pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let mut max = row[0];
    for v in row.iter() {
        if *v > max {
            max = *v;
        }
    }
    let mut sum = T::ZERO;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

/// `-log softmax(logits)[label]` via log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse: f64 = logits.iter().map(|z| libm::exp(z - max)).sum();
    max + libm::log(lse) - logits[label]
}
