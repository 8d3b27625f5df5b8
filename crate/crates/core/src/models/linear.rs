//! Multinomial (MNLR) and proportional-odds (POLR) logistic regression
//! fitted by maximum likelihood with BFGS, plus the likelihood-ratio and
//! multiple-imputation p-value utilities used with POLR.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::heads::{log_sigmoid, sigmoid, softmax};
use super::optim::{bfgs, numerical_hessian, BfgsOptions};
use crate::error::{Error, Result};
use crate::outcome::{
    category_counts, Category, CategoryDistribution, ThresholdProfile, CATEGORY_LABELS, N_CATEGORIES,
    N_THRESHOLDS,
};

/// Ridge penalty on slopes (never intercepts). The objective is the mean
/// negative log-likelihood plus `penalty/2 · ‖β‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearOptions {
    pub penalty: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions { penalty: 1e-4, grad_tol: 1e-6, max_iter: 500 }
    }
}

impl LinearOptions {
    pub fn unpenalized() -> Self {
        LinearOptions { penalty: 0.0, ..Default::default() }
    }

    fn bfgs(&self) -> BfgsOptions {
        BfgsOptions { grad_tol: self.grad_tol, max_iter: self.max_iter }
    }
}

/// Coefficients above this magnitude without a penalty are reported as
/// separation rather than returned.
const SEPARATION_BOUND: f64 = 25.0;

fn check_inputs(x: &[Vec<f64>], y: &[Category]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let d = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: r.len() });
    }
    if let Some(k) = category_counts(y).iter().position(|&n| n == 0) {
        return Err(Error::EmptyCategory(CATEGORY_LABELS[k].to_string()));
    }
    Ok(d)
}

/// Rank check on [1 | X]; collinear designs have no unique MLE.
fn check_rank(x: &[Vec<f64>]) -> Result<()> {
    let d = x[0].len();
    let mut m = DMatrix::<f64>::zeros(d + 1, d + 1);
    for r in x {
        let row: Vec<f64> = std::iter::once(1.0).chain(r.iter().copied()).collect();
        for i in 0..=d {
            for j in 0..=d {
                m[(i, j)] += row[i] * row[j];
            }
        }
    }
    let ev = m.symmetric_eigenvalues();
    let max = ev.iter().cloned().fold(0.0f64, f64::max);
    let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    if max <= 0.0 || min <= max * 1e-12 {
        return Err(Error::Singular);
    }
    Ok(())
}

fn invert(h: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = h.len();
    let m = DMatrix::from_fn(n, n, |i, j| h[i][j]);
    let inv = m.try_inverse().ok_or(Error::Singular)?;
    Ok((0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub penalty: f64,
}

// ---------------------------------------------------------------- MNLR

/// One logit row per non-reference category (reference: category "1"),
/// each `[intercept, slopes...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnlrModel {
    pub weights: Vec<Vec<f64>>,
    pub info: FitInfo,
}

fn mnlr_logits(w: &[f64], d: usize, x: &[f64]) -> [f64; N_CATEGORIES] {
    let mut z = [0.0; N_CATEGORIES];
    for k in 1..N_CATEGORIES {
        let row = &w[(k - 1) * (d + 1)..k * (d + 1)];
        z[k] = row[0] + row[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
    z
}

/// Total log-likelihood and its gradient over the flat weights.
fn mnlr_loglik(w: &[f64], x: &[Vec<f64>], y: &[Category]) -> (f64, Vec<f64>) {
    let d = x[0].len();
    let mut ll = 0.0;
    let mut g = vec![0.0; w.len()];
    for (xi, yi) in x.iter().zip(y) {
        let z = mnlr_logits(w, d, xi);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        ll += z[yi.index()] - lse;
        for k in 1..N_CATEGORIES {
            let r = (if yi.index() == k { 1.0 } else { 0.0 }) - (z[k] - lse).exp();
            let off = (k - 1) * (d + 1);
            g[off] += r;
            for (j, xj) in xi.iter().enumerate() {
                g[off + 1 + j] += r * xj;
            }
        }
    }
    (ll, g)
}

pub fn train_mnlr(x: &[Vec<f64>], y: &[Category], opts: LinearOptions) -> Result<MnlrModel> {
    let d = check_inputs(x, y)?;
    if opts.penalty == 0.0 {
        check_rank(x)?;
    }
    let n = x.len() as f64;
    let counts = category_counts(y);
    let mut w0 = vec![0.0; (N_CATEGORIES - 1) * (d + 1)];
    for k in 1..N_CATEGORIES {
        w0[(k - 1) * (d + 1)] = (counts[k] as f64 / counts[0] as f64).ln();
    }
    let is_slope = |i: usize| i % (d + 1) != 0;
    let res = bfgs(
        |w| {
            let (ll, g) = mnlr_loglik(w, x, y);
            let mut f = -ll / n;
            let mut grad: Vec<f64> = g.iter().map(|v| -v / n).collect();
            for i in (0..w.len()).filter(|&i| is_slope(i)) {
                f += 0.5 * opts.penalty * w[i] * w[i];
                grad[i] += opts.penalty * w[i];
            }
            (f, grad)
        },
        w0,
        opts.bfgs(),
    );
    if opts.penalty == 0.0 && res.x.iter().any(|v| v.abs() > SEPARATION_BOUND || !v.is_finite()) {
        return Err(Error::Separation);
    }
    let (ll, _) = mnlr_loglik(&res.x, x, y);
    let weights = res.x.chunks(d + 1).map(<[f64]>::to_vec).collect();
    Ok(MnlrModel {
        weights,
        info: FitInfo { log_likelihood: ll, iterations: res.iterations, converged: res.converged, penalty: opts.penalty },
    })
}

impl MnlrModel {
    pub fn dim(&self) -> usize {
        self.weights[0].len() - 1
    }

    fn flat(&self) -> Vec<f64> {
        self.weights.concat()
    }

    pub fn distribution(&self, x: &[f64]) -> Result<CategoryDistribution> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let z = mnlr_logits(&self.flat(), self.dim(), x);
        let p = softmax(&z);
        let mut out = [0.0; N_CATEGORIES];
        out.copy_from_slice(&p);
        Ok(CategoryDistribution { p: out })
    }

    /// Asymptotic standard errors from the inverse observed information,
    /// shaped like `weights`.
    pub fn standard_errors(&self, x: &[Vec<f64>], y: &[Category]) -> Result<Vec<Vec<f64>>> {
        let hess = numerical_hessian(
            |w| mnlr_loglik(w, x, y).1.into_iter().map(|v| -v).collect(),
            &self.flat(),
            1e-5,
        );
        let cov = invert(&hess)?;
        let se: Vec<f64> = (0..cov.len()).map(|i| cov[i][i].max(0.0).sqrt()).collect();
        Ok(se.chunks(self.dim() + 1).map(<[f64]>::to_vec).collect())
    }
}

// ---------------------------------------------------------------- POLR

/// Pr(y ≤ t | x) = σ(θ_t − x·β), so Pr(y > t | x) = σ(x·β − θ_t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolrModel {
    pub beta: Vec<f64>,
    pub thresholds: [f64; N_THRESHOLDS],
    pub info: FitInfo,
}

/// θ_1 = a_1, θ_t = θ_{t−1} + exp(a_t): ordered by construction.
fn thresholds_from_raw(a: &[f64]) -> [f64; N_THRESHOLDS] {
    let mut th = [0.0; N_THRESHOLDS];
    th[0] = a[0];
    for t in 1..N_THRESHOLDS {
        th[t] = th[t - 1] + a[t].exp();
    }
    th
}

fn raw_from_thresholds(th: &[f64; N_THRESHOLDS]) -> [f64; N_THRESHOLDS] {
    let mut a = [0.0; N_THRESHOLDS];
    a[0] = th[0];
    for t in 1..N_THRESHOLDS {
        a[t] = (th[t] - th[t - 1]).max(1e-8).ln();
    }
    a
}

/// Total log-likelihood with gradients in natural (β, θ) coordinates.
fn polr_loglik(beta: &[f64], th: &[f64; N_THRESHOLDS], x: &[Vec<f64>], y: &[Category]) -> (f64, Vec<f64>, [f64; N_THRESHOLDS]) {
    let mut ll = 0.0;
    let mut gb = vec![0.0; beta.len()];
    let mut gt = [0.0; N_THRESHOLDS];
    for (xi, yi) in x.iter().zip(y) {
        let eta: f64 = beta.iter().zip(xi).map(|(b, v)| b * v).sum();
        let k = yi.index();
        let (lp, d_eta) = if k == 0 {
            let b = th[0] - eta;
            gt[0] += sigmoid(-b);
            (log_sigmoid(b), -sigmoid(-b))
        } else if k == N_CATEGORIES - 1 {
            let a = th[N_THRESHOLDS - 1] - eta;
            gt[N_THRESHOLDS - 1] -= sigmoid(a);
            (log_sigmoid(-a), sigmoid(a))
        } else {
            let (b, a) = (th[k] - eta, th[k - 1] - eta);
            let gap = (b - a).max(1e-300);
            let inv = 1.0 / gap.exp_m1();
            let db = sigmoid(-b) + inv;
            let da = -sigmoid(a) - inv;
            gt[k] += db;
            gt[k - 1] += da;
            (log_sigmoid(b) + log_sigmoid(-a) + (-(-gap).exp_m1()).ln(), -(db + da))
        };
        ll += lp;
        for (g, v) in gb.iter_mut().zip(xi) {
            *g += d_eta * v;
        }
    }
    (ll, gb, gt)
}

pub fn train_polr(x: &[Vec<f64>], y: &[Category], opts: LinearOptions) -> Result<PolrModel> {
    let d = check_inputs(x, y)?;
    if opts.penalty == 0.0 {
        check_rank(x)?;
    }
    let n = x.len() as f64;
    let counts = category_counts(y);
    let mut th0 = [0.0; N_THRESHOLDS];
    let mut cum = 0usize;
    for t in 0..N_THRESHOLDS {
        cum += counts[t];
        let p = cum as f64 / n;
        th0[t] = (p / (1.0 - p)).ln();
    }
    let mut p0 = vec![0.0; d];
    p0.extend_from_slice(&raw_from_thresholds(&th0));

    let res = bfgs(
        |p| {
            let (beta, a) = p.split_at(d);
            let th = thresholds_from_raw(a);
            let (ll, gb, gt) = polr_loglik(beta, &th, x, y);
            let mut f = -ll / n;
            let mut grad: Vec<f64> = gb.iter().map(|v| -v / n).collect();
            for (i, b) in beta.iter().enumerate() {
                f += 0.5 * opts.penalty * b * b;
                grad[i] += opts.penalty * b;
            }
            // chain rule: θ_j depends on a_1 for all j, on a_m (m ≥ 2) for j ≥ m
            let mut tail = 0.0;
            let mut ga = [0.0; N_THRESHOLDS];
            for t in (0..N_THRESHOLDS).rev() {
                tail += -gt[t] / n;
                ga[t] = if t == 0 { tail } else { tail * a[t].exp() };
            }
            grad.extend_from_slice(&ga);
            (if f.is_finite() { f } else { f64::INFINITY }, grad)
        },
        p0,
        opts.bfgs(),
    );
    let (beta, a) = res.x.split_at(d);
    if opts.penalty == 0.0 && beta.iter().any(|v| v.abs() > SEPARATION_BOUND || !v.is_finite()) {
        return Err(Error::Separation);
    }
    let thresholds = thresholds_from_raw(a);
    let (ll, _, _) = polr_loglik(beta, &thresholds, x, y);
    Ok(PolrModel {
        beta: beta.to_vec(),
        thresholds,
        info: FitInfo { log_likelihood: ll, iterations: res.iterations, converged: res.converged, penalty: opts.penalty },
    })
}

impl PolrModel {
    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn profile(&self, x: &[f64]) -> Result<ThresholdProfile> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let eta: f64 = self.beta.iter().zip(x).map(|(b, v)| b * v).sum();
        let mut q = self.thresholds.map(|t| sigmoid(eta - t));
        // ordered thresholds already imply this; guard against round-off
        for t in 1..N_THRESHOLDS {
            q[t] = q[t].min(q[t - 1]);
        }
        Ok(ThresholdProfile { q })
    }

    /// Standard errors of (β, θ) from the inverse observed information.
    pub fn standard_errors(&self, x: &[Vec<f64>], y: &[Category]) -> Result<(Vec<f64>, [f64; N_THRESHOLDS])> {
        let d = self.dim();
        let mut p: Vec<f64> = self.beta.clone();
        p.extend_from_slice(&self.thresholds);
        let hess = numerical_hessian(
            |p| {
                let mut th = [0.0; N_THRESHOLDS];
                th.copy_from_slice(&p[d..]);
                let (_, gb, gt) = polr_loglik(&p[..d], &th, x, y);
                gb.iter().chain(gt.iter()).map(|v| -v).collect()
            },
            &p,
            1e-5,
        );
        let cov = invert(&hess)?;
        let se: Vec<f64> = (0..cov.len()).map(|i| cov[i][i].max(0.0).sqrt()).collect();
        let mut th = [0.0; N_THRESHOLDS];
        th.copy_from_slice(&se[d..]);
        Ok((se[..d].to_vec(), th))
    }
}

/// Likelihood-ratio test of nested POLR fits; `df` is k−1 for a k-level
/// categorical predictor.
pub fn lr_test(full: &PolrModel, reduced: &PolrModel, df: usize) -> Result<f64> {
    let (lf, lr) = (full.info.log_likelihood, reduced.info.log_likelihood);
    let tol = 1e-6 * lf.abs().max(1.0);
    if lf < lr - tol {
        return Err(Error::NotNested);
    }
    let stat = (2.0 * (lf - lr)).max(0.0);
    if stat == 0.0 {
        return Ok(1.0);
    }
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(chi.sf(stat))
}

/// Pools p-values from m imputations on the z scale: the mean z is
/// deflated by the total variance 1 + (1 + 1/m)·B, with B the
/// between-imputation variance of the z scores.
pub fn combine_pvalues_z(pvals: &[f64]) -> Result<f64> {
    if pvals.is_empty() {
        return Err(Error::Invalid("no p-values to combine".into()));
    }
    if let Some(p) = pvals.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::Invalid(format!("p-value {p} outside (0,1)")));
    }
    if pvals.iter().all(|&p| p == pvals[0]) {
        return Ok(pvals[0]);
    }
    let std_normal = Normal::standard();
    let z: Vec<f64> = pvals.iter().map(|&p| std_normal.inverse_cdf(1.0 - p)).collect();
    let m = z.len() as f64;
    let mean = z.iter().sum::<f64>() / m;
    let between = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let total = 1.0 + (1.0 + 1.0 / m) * between;
    Ok(1.0 - std_normal.cdf(mean / total.sqrt()))
}
