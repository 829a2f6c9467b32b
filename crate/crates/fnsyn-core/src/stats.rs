//! Small regression and summary helpers shared by tests and experiments.

use alloc::vec::Vec;

use crate::math::{exp, ln, sqrt};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit { slope, intercept, r2 }
}

/// Least-squares slope of `ln y` against `ln x`, skipping non-positive `y`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (ln(*a), ln(*b)))
        .unzip();
    linear_fit(&lx, &ly)
}

/// Root-mean-square of `ln(measured / reference)`.
pub fn rms_log_ratio(measured: &[f64], reference: &[f64]) -> f64 {
    let v: Vec<f64> = measured
        .iter()
        .zip(reference)
        .map(|(m, r)| {
            let d = ln(m / r);
            d * d
        })
        .collect();
    sqrt(mean(&v))
}

/// `y = sign * exp(a x + b) + d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub a: f64,
    pub b: f64,
    pub sign: f64,
    pub d: f64,
    pub r2: f64,
}

impl ExpFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.sign * exp(self.a * x + self.b) + self.d
    }
}

/// Fits `c exp(a x) + d`: for fixed `a` the model is linear in `(c, d)`, so
/// the rate is found by a bracketing golden-section search on the residual.
pub fn exp_fit(x: &[f64], y: &[f64]) -> ExpFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 3, "exponential fit needs three points");
    let inner = |a: f64| {
        let e: Vec<f64> = x.iter().map(|&xi| exp(a * xi)).collect();
        let f = linear_fit(&e, y);
        let sse: f64 = e
            .iter()
            .zip(y)
            .map(|(ei, yi)| {
                let r = yi - (f.slope * ei + f.intercept);
                r * r
            })
            .sum();
        (sse, f.slope, f.intercept)
    };
    let span = x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
    let limit = 50.0 / span.max(f64::MIN_POSITIVE);
    // Coarse scan in both signs, then refine around the best grid cell.
    let grid = 400;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=grid {
        let a = -limit + 2.0 * limit * k as f64 / grid as f64;
        if a == 0.0 {
            continue;
        }
        let (sse, _, _) = inner(a);
        if sse < best.0 {
            best = (sse, a);
        }
    }
    let step = 2.0 * limit / grid as f64;
    let (mut lo, mut hi) = (best.1 - step, best.1 + step);
    let g = 0.618_033_988_749_895;
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if inner(m1).0 < inner(m2).0 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let a = 0.5 * (lo + hi);
    let (sse, c, d) = inner(a);
    let my = mean(y);
    let sst: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let r2 = if sst == 0.0 { 1.0 } else { 1.0 - sse / sst };
    ExpFit { a, b: ln(c.abs()), sign: if c < 0.0 { -1.0 } else { 1.0 }, d, r2 }
}
