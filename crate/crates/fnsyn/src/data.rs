//! MNIST in IDX format, preprocessing and the five even/odd split tasks.

use std::fs;
use std::path::{Path, PathBuf};

use fnsyn_core::learning::{Task, TaskData};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
/// Side of the padded image; features per sample are `SIDE * SIDE`.
pub const SIDE: usize = 32;
pub const FEATURES: usize = SIDE * SIDE;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("IDX parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

fn parse_err(offset: usize, message: impl Into<String>) -> ParseError {
    ParseError { offset, message: message.into() }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32, ParseError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| parse_err(offset, "truncated header"))
}

/// Raw images: `count` row-major `rows x cols` u8 bitmaps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl RawImages {
    pub fn len(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn check_body(bytes: &[u8], header: usize, expected: usize) -> Result<(), ParseError> {
    let have = bytes.len() - header;
    if have < expected {
        return Err(parse_err(bytes.len(), format!("truncated body: expected {expected} bytes, found {have}")));
    }
    if have > expected {
        return Err(parse_err(
            header + expected,
            format!("dimension mismatch: {} trailing bytes after {expected}", have - expected),
        ));
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<RawImages, ParseError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(parse_err(0, format!("bad image magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let len = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| parse_err(4, "dimensions overflow"))?;
    check_body(bytes, 16, len)?;
    Ok(RawImages { rows, cols, pixels: bytes[16..].to_vec() })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, ParseError> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(parse_err(0, format!("bad label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    check_body(bytes, 8, n)?;
    Ok(bytes[8..].to_vec())
}

/// Either IDX flavor, read from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Idx {
    Images(RawImages),
    Labels(Vec<u8>),
}

pub fn load_idx(path: &Path) -> CliResult<Idx> {
    let bytes = fs::read(path).map_err(|e| CliError::missing(path, e))?;
    let parsed = match be_u32(&bytes, 0) {
        Ok(LABEL_MAGIC) => parse_idx_labels(&bytes).map(Idx::Labels),
        _ => parse_idx_images(&bytes).map(Idx::Images),
    };
    parsed.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_images(path: &Path) -> CliResult<RawImages> {
    match load_idx(path)? {
        Idx::Images(i) => Ok(i),
        Idx::Labels(_) => Err(CliError::Input(format!("{}: expected images, found labels", path.display()))),
    }
}

fn load_labels(path: &Path) -> CliResult<Vec<u8>> {
    match load_idx(path)? {
        Idx::Labels(l) => Ok(l),
        Idx::Images(_) => Err(CliError::Input(format!("{}: expected labels, found images", path.display()))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum NormScope {
    /// One mean and std over every train pixel.
    #[default]
    Global,
    /// Mean and std per pixel position.
    PerPixel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Standardization statistics (length 1 for global, `FEATURES` per pixel).
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    /// Fits on padded train pixels.
    pub fn fit(padded: &[u8], scope: NormScope) -> Self {
        let n = padded.len() / FEATURES;
        match scope {
            NormScope::Global => {
                let mut hist = [0u64; 256];
                for &p in padded {
                    hist[p as usize] += 1;
                }
                let total = padded.len() as f64;
                let mean = hist.iter().enumerate().map(|(v, c)| v as f64 * *c as f64).sum::<f64>() / total;
                let var = hist
                    .iter()
                    .enumerate()
                    .map(|(v, c)| (v as f64 - mean).powi(2) * *c as f64)
                    .sum::<f64>()
                    / total;
                Self { mean: vec![mean], std: vec![var.sqrt()] }
            }
            NormScope::PerPixel => {
                let mut sum = vec![0.0f64; FEATURES];
                for img in padded.chunks_exact(FEATURES) {
                    for (s, &p) in sum.iter_mut().zip(img) {
                        *s += p as f64;
                    }
                }
                let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
                let mut var = vec![0.0f64; FEATURES];
                for img in padded.chunks_exact(FEATURES) {
                    for ((v, &p), m) in var.iter_mut().zip(img).zip(&mean) {
                        *v += (p as f64 - m).powi(2);
                    }
                }
                // Constant pixels (the padding, corners) keep unit scale.
                let std = var
                    .iter()
                    .map(|v| {
                        let s = (v / n as f64).sqrt();
                        if s > 0.0 { s } else { 1.0 }
                    })
                    .collect();
                Self { mean, std }
            }
        }
    }

    #[inline]
    pub fn apply(&self, feature: usize, pixel: u8) -> f64 {
        let k = if self.mean.len() == 1 { 0 } else { feature };
        (pixel as f64 - self.mean[k]) / self.std[k]
    }
}

/// Padded, standardized images. Features are computed on demand from the
/// stored pixels so they are exact in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub split: Split,
    /// `n x FEATURES` padded pixels.
    pub padded: Vec<u8>,
    pub labels: Vec<u8>,
    pub norm: Normalization,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature(&self, i: usize, j: usize) -> f64 {
        self.norm.apply(j, self.padded[i * FEATURES + j])
    }

    pub fn features_f32(&self, i: usize, out: &mut Vec<f32>) {
        let img = &self.padded[i * FEATURES..(i + 1) * FEATURES];
        out.extend(img.iter().enumerate().map(|(j, &p)| self.norm.apply(j, p) as f32));
    }
}

/// Zero-pads each image symmetrically to `SIDE x SIDE`.
pub fn pad(raw: &RawImages) -> CliResult<Vec<u8>> {
    if raw.rows > SIDE || raw.cols > SIDE {
        return Err(CliError::Input(format!(
            "images of {}x{} do not fit in {SIDE}x{SIDE}",
            raw.rows, raw.cols
        )));
    }
    let (top, left) = ((SIDE - raw.rows) / 2, (SIDE - raw.cols) / 2);
    let mut out = vec![0u8; raw.len() * FEATURES];
    for (i, dst) in out.chunks_exact_mut(FEATURES).enumerate() {
        let img = raw.image(i);
        for r in 0..raw.rows {
            let row = &img[r * raw.cols..(r + 1) * raw.cols];
            dst[(top + r) * SIDE + left..(top + r) * SIDE + left + raw.cols].copy_from_slice(row);
        }
    }
    Ok(out)
}

/// Pads both splits and standardizes them with train statistics.
pub fn preprocess(
    train: (&RawImages, &[u8]),
    test: (&RawImages, &[u8]),
    scope: NormScope,
) -> CliResult<(Dataset, Dataset)> {
    for (imgs, labels) in [train, test] {
        if imgs.len() != labels.len() {
            return Err(CliError::Input(format!(
                "{} images but {} labels",
                imgs.len(),
                labels.len()
            )));
        }
    }
    let tr = pad(train.0)?;
    let te = pad(test.0)?;
    let norm = Normalization::fit(&tr, scope);
    Ok((
        Dataset { split: Split::Train, padded: tr, labels: train.1.to_vec(), norm: norm.clone() },
        Dataset { split: Split::Test, padded: te, labels: test.1.to_vec(), norm },
    ))
}

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Loads the four standard MNIST files from `dir`.
pub fn load_mnist(dir: &Path, scope: NormScope) -> CliResult<(Dataset, Dataset)> {
    let path = |name: &str| -> PathBuf { dir.join(name) };
    for name in [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS] {
        if !path(name).exists() {
            return Err(CliError::MissingInput(format!(
                "{} not found. Place the uncompressed MNIST IDX files ({TRAIN_IMAGES}, {TRAIN_LABELS}, \
                 {TEST_IMAGES}, {TEST_LABELS}) in {} or pass --data <dir>",
                path(name).display(),
                dir.display()
            )));
        }
    }
    let tri = load_images(&path(TRAIN_IMAGES))?;
    let trl = load_labels(&path(TRAIN_LABELS))?;
    let tei = load_images(&path(TEST_IMAGES))?;
    let tel = load_labels(&path(TEST_LABELS))?;
    preprocess((&tri, &trl), (&tei, &tel), scope)
}

/// Number of tasks in the split protocol.
pub const N_TASKS: usize = 5;

fn task_data(ds: &Dataset, digits: [u8; 2]) -> TaskData {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, &label) in ds.labels.iter().enumerate() {
        if digits.contains(&label) {
            ds.features_f32(i, &mut x);
            y.push(label % 2);
        }
    }
    TaskData { dim: FEATURES, x, y }
}

/// Task `i` holds digits `{2i, 2i+1}` relabelled even -> 0, odd -> 1.
pub fn split_tasks(train: &Dataset, test: &Dataset) -> Vec<Task> {
    (0..N_TASKS as u8)
        .map(|t| {
            let digits = [2 * t, 2 * t + 1];
            Task {
                name: format!("t{}", t + 1),
                train: task_data(train, digits),
                test: task_data(test, digits),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_file(n: u32, rows: u32, cols: u32, body: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IMAGE_MAGIC, n, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(body);
        b
    }

    #[test]
    fn parses_small_fixture() {
        let body: Vec<u8> = (0..4 * 784).map(|i| (i % 251) as u8).collect();
        let imgs = parse_idx_images(&image_file(4, 28, 28, &body)).unwrap();
        assert_eq!(imgs.len(), 4);
        assert_eq!(imgs.image(3).len(), 784);
        assert_eq!(imgs.image(1)[0], body[784]);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut b = image_file(1, 2, 2, &[0; 4]);
        b[3] = 0x02;
        assert_eq!(parse_idx_images(&b).unwrap_err().offset, 0);
        let short = image_file(2, 2, 2, &[0; 5]);
        let e = parse_idx_images(&short).unwrap_err();
        assert!(e.message.contains("truncated"), "{e}");
        let long = image_file(1, 2, 2, &[0; 6]);
        assert_eq!(parse_idx_images(&long).unwrap_err().offset, 20);
        assert!(parse_idx_labels(&[0, 0, 8, 1, 0, 0]).is_err());
    }

    #[test]
    fn labels_round_trip() {
        let mut b = LABEL_MAGIC.to_be_bytes().to_vec();
        b.extend_from_slice(&3u32.to_be_bytes());
        b.extend_from_slice(&[7, 0, 9]);
        assert_eq!(parse_idx_labels(&b).unwrap(), vec![7, 0, 9]);
    }

    #[test]
    fn padding_centres_image() {
        let raw = RawImages { rows: 28, cols: 28, pixels: vec![255; 784] };
        let p = pad(&raw).unwrap();
        assert_eq!(p.len(), FEATURES);
        for r in 0..SIDE {
            for c in 0..SIDE {
                let inside = (2..30).contains(&r) && (2..30).contains(&c);
                assert_eq!(p[r * SIDE + c], if inside { 255 } else { 0 });
            }
        }
    }

    #[test]
    fn zero_image_maps_to_constant() {
        let raw = RawImages { rows: 28, cols: 28, pixels: (0..2 * 784).map(|i| (i % 7) as u8).collect() };
        let zero = RawImages { rows: 28, cols: 28, pixels: vec![0; 784] };
        let (_, test) = preprocess((&raw, &[0, 1]), (&zero, &[0]), NormScope::Global).unwrap();
        let c = -test.norm.mean[0] / test.norm.std[0];
        for j in 0..FEATURES {
            assert_eq!(test.feature(0, j), c);
        }
    }
}
