//! Output heads and class-weighted losses.

use crate::outcome::{
    Category, CategoryDistribution, ClassWeights, ThresholdProfile, N_CATEGORIES, N_THRESHOLDS,
};

/// Floor inside loss logarithms.
pub const LOG_EPS: f64 = 1e-12;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log σ(x) without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn multinomial_head(z: &[f64; N_CATEGORIES]) -> CategoryDistribution {
    let p = softmax(z);
    let mut out = [0.0; N_CATEGORIES];
    out.copy_from_slice(&p);
    CategoryDistribution { p: out }
}

/// Cumulative pre-activations: c_1 = raw_1, c_t = c_{t-1} + min(raw_t, 0).
pub fn ordinal_cumulative(raw: &[f64]) -> Vec<f64> {
    let mut c = Vec::with_capacity(raw.len());
    for (t, &r) in raw.iter().enumerate() {
        c.push(if t == 0 { r } else { c[t - 1] + r.min(0.0) });
    }
    c
}

pub fn ordinal_head(raw: &[f64; N_THRESHOLDS]) -> ThresholdProfile {
    let c = ordinal_cumulative(raw);
    let mut q = [0.0; N_THRESHOLDS];
    for (qt, ct) in q.iter_mut().zip(c) {
        *qt = sigmoid(ct);
    }
    ThresholdProfile { q }
}

/// Backpropagates dL/dc through the cumulative construction to dL/draw.
pub fn ordinal_cumulative_backward(raw: &[f64], dc: &[f64]) -> Vec<f64> {
    let n = raw.len();
    let mut draw = vec![0.0; n];
    let mut tail = 0.0;
    for t in (0..n).rev() {
        tail += dc[t];
        draw[t] = if t == 0 || raw[t] < 0.0 { tail } else { 0.0 };
    }
    draw
}

pub fn weighted_ce_loss(p: &CategoryDistribution, y: Category, w: &ClassWeights) -> f64 {
    -w.get(y) * (p.p[y.index()] + LOG_EPS).ln()
}

pub fn weighted_bce_loss(q: &ThresholdProfile, y: Category, w: &ClassWeights) -> f64 {
    let mut s = 0.0;
    for (t, &qt) in q.q.iter().enumerate() {
        s += if y.index() > t { (qt + LOG_EPS).ln() } else { (1.0 - qt + LOG_EPS).ln() };
    }
    -w.get(y) * s
}
