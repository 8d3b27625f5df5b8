//! Ordinal discrimination and calibration metrics over pooled predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::heads::sigmoid;
use crate::models::Prediction;
use crate::outcome::{category_counts, Category, Threshold, ThresholdProfile, CATEGORY_LABELS, N_CATEGORIES};

/// Logit clipping bound for recalibration.
pub const LOGIT_CLIP: f64 = 1e-6;
pub const DEFAULT_SPAN: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub profiles: Vec<ThresholdProfile>,
    pub labels: Vec<Category>,
    pub ids: Option<Vec<String>>,
}

impl PredictionSet {
    pub fn new(profiles: Vec<ThresholdProfile>, labels: Vec<Category>) -> Result<Self> {
        if profiles.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: profiles.len(), got: labels.len() });
        }
        Ok(PredictionSet { profiles, labels, ids: None })
    }

    pub fn from_predictions(preds: &[Prediction], labels: Vec<Category>) -> Result<Self> {
        Self::new(preds.iter().map(|p| p.profile).collect(), labels)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.labels.len() {
            return Err(Error::DimensionMismatch { expected: self.labels.len(), got: ids.len() });
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.profiles.iter().map(ranking_score).collect()
    }

    pub fn threshold_values(&self, t: Threshold) -> Vec<f64> {
        self.profiles.iter().map(|q| q.at(t)).collect()
    }

    pub fn exceeds(&self, t: Threshold) -> Vec<bool> {
        self.labels.iter().map(|c| c.exceeds(t)).collect()
    }
}

pub fn ranking_score(q: &ThresholdProfile) -> f64 {
    q.ranking_score()
}

/// Twice the concordance count (ties count one half), and N1·N0.
fn concordance2(scores: &[f64], labels: &[bool]) -> (u128, u128) {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut neg_below, mut twice) = (0u128, 0u128);
    let (mut n1, mut n0) = (0u128, 0u128);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        n1 += pos;
        n0 += neg;
        i = j;
    }
    (twice, n1 * n0)
}

/// Probability that a positive outranks a negative, ties counting ½.
pub fn dichotomous_c(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), got: labels.len() });
    }
    let (twice, pairs) = concordance2(scores, labels);
    if pairs == 0 {
        return Err(Error::OneClassOnly);
    }
    Ok(twice as f64 / (2 * pairs) as f64)
}

/// Twice the concordance count and the number of comparable pairs for
/// every category pair (i < j, j the positive class), in one sorted sweep.
fn pairwise_concordance(scores: &[f64], labels: &[Category]) -> [[(u128, u128); N_CATEGORIES]; N_CATEGORIES] {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut below = [0u128; N_CATEGORIES];
    let mut out = [[(0u128, 0u128); N_CATEGORIES]; N_CATEGORIES];
    let mut i = 0;
    while i < idx.len() {
        let mut group = [0u128; N_CATEGORIES];
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            group[labels[idx[j]].index()] += 1;
            j += 1;
        }
        for hi in 1..N_CATEGORIES {
            if group[hi] == 0 {
                continue;
            }
            for lo in 0..hi {
                out[lo][hi].0 += 2 * group[hi] * below[lo] + group[hi] * group[lo];
            }
        }
        for k in 0..N_CATEGORIES {
            below[k] += group[k];
        }
        i = j;
    }
    for lo in 0..N_CATEGORIES {
        for hi in lo + 1..N_CATEGORIES {
            out[lo][hi].1 = below[lo] * below[hi];
        }
    }
    out
}

/// Pairwise c-indices with their comparable-pair counts, skipping pairs
/// with an empty category.
fn pairwise_c(preds: &PredictionSet) -> Vec<(f64, u128)> {
    let pc = pairwise_concordance(&preds.scores(), &preds.labels);
    category_pairs()
        .filter_map(|(i, j)| {
            let (twice, pairs) = pc[i][j];
            (pairs > 0).then(|| (twice as f64 / (2 * pairs) as f64, pairs))
        })
        .collect()
}

fn category_pairs() -> impl Iterator<Item = (usize, usize)> {
    (0..N_CATEGORIES).flat_map(|i| (i + 1..N_CATEGORIES).map(move |j| (i, j)))
}

/// Mean of the 21 pairwise c-indices. Errors if any category is empty.
pub fn orc(preds: &PredictionSet) -> Result<f64> {
    if let Some(k) = category_counts(&preds.labels).iter().position(|&n| n == 0) {
        return Err(Error::EmptyCategory(CATEGORY_LABELS[k].to_string()));
    }
    Ok(orc_skip_empty(preds)?.0)
}

/// ORC over the category pairs that are populated; also returns how many
/// of the 21 pairs were used.
pub fn orc_skip_empty(preds: &PredictionSet) -> Result<(f64, usize)> {
    let cs: Vec<f64> = pairwise_c(preds).into_iter().map(|v| v.0).collect();
    if cs.is_empty() {
        return Err(Error::OneClassOnly);
    }
    Ok((cs.iter().sum::<f64>() / cs.len() as f64, cs.len()))
}

/// Prevalence-weighted mean of pairwise c-indices.
pub fn generalized_c(preds: &PredictionSet) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (c, pairs) in pairwise_c(preds) {
        num += c * pairs as f64;
        den += pairs as f64;
    }
    if den == 0.0 {
        return Err(Error::OneClassOnly);
    }
    Ok(num / den)
}

pub fn somers_dxy(preds: &PredictionSet) -> Result<f64> {
    Ok(2.0 * generalized_c(preds)? - 1.0)
}

pub fn threshold_c(preds: &PredictionSet, t: Threshold) -> Result<f64> {
    dichotomous_c(&preds.threshold_values(t), &preds.exceeds(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecalibrationFit {
    pub intercept: f64,
    pub slope: f64,
    pub threshold: Threshold,
}

fn clipped_logit(p: f64) -> f64 {
    let p = p.clamp(LOGIT_CLIP, 1.0 - LOGIT_CLIP);
    (p / (1.0 - p)).ln()
}

/// Logistic regression of 1{y > t} on logit(q_t), fitted by Newton's method.
pub fn calibration_slope(preds: &PredictionSet, t: Threshold) -> Result<RecalibrationFit> {
    let x: Vec<f64> = preds.threshold_values(t).into_iter().map(clipped_logit).collect();
    let y = preds.exceeds(t);
    if !y.iter().any(|&v| v) || y.iter().all(|&v| v) {
        return Err(Error::OneClassOnly);
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::DegenerateInput("all predicted probabilities are equal".into()));
    }
    let (mut b0, mut b1) = (0.0, 1.0);
    for _ in 0..100 {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(&y) {
            let p = sigmoid(b0 + b1 * xi);
            let r = yi as u8 as f64 - p;
            let w = p * (1.0 - p);
            g0 += r;
            g1 += r * xi;
            h00 += w;
            h01 += w * xi;
            h11 += w * xi * xi;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::NonConvergence("singular recalibration Hessian".into()));
        }
        let d0 = (h11 * g0 - h01 * g1) / det;
        let d1 = (h00 * g1 - h01 * g0) / det;
        b0 += d0;
        b1 += d1;
        if !b0.is_finite() || !b1.is_finite() {
            return Err(Error::NonConvergence("recalibration coefficients diverged".into()));
        }
        if d0.abs().max(d1.abs()) < 1e-10 {
            return Ok(RecalibrationFit { intercept: b0, slope: b1, threshold: t });
        }
    }
    Err(Error::NonConvergence("recalibration did not converge in 100 Newton steps".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub threshold: Threshold,
    pub span: f64,
    /// Sorted ascending.
    pub p_pred: Vec<f64>,
    pub p_obs: Vec<f64>,
}

impl CalibrationCurve {
    pub fn to_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["p_pred", "p_obs"])?;
        for (a, b) in self.p_pred.iter().zip(&self.p_obs) {
            out.write_record([a.to_string(), b.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowessOptions {
    pub span: f64,
    pub robustness_iterations: usize,
    /// Points closer than `delta` to the last fitted point are linearly
    /// interpolated, as a fraction of the x range.
    pub delta_fraction: f64,
}

impl Default for LowessOptions {
    fn default() -> Self {
        LowessOptions { span: DEFAULT_SPAN, robustness_iterations: 0, delta_fraction: 0.01 }
    }
}

/// Local linear fit at `xs[i]` using the window `[lo, hi]`.
fn lowess_fit(xs: &[f64], ys: &[f64], rw: &[f64], i: usize, lo: usize, hi: usize, range: f64) -> Option<f64> {
    let x0 = xs[i];
    let h = (x0 - xs[lo]).max(xs[hi] - x0);
    let (h9, h1) = (0.999 * h, 0.001 * h);
    let mut w = vec![0.0; hi - lo + 1];
    let mut sw = 0.0;
    for (k, j) in (lo..=hi).enumerate() {
        let r = (xs[j] - x0).abs();
        let wt = if h == 0.0 || r <= h1 {
            1.0
        } else if r <= h9 {
            let u = r / h;
            (1.0 - u * u * u).powi(3)
        } else {
            0.0
        };
        w[k] = wt * rw[j];
        sw += w[k];
    }
    if sw <= 0.0 {
        return None;
    }
    let mean_x: f64 = (lo..=hi).zip(&w).map(|(j, wt)| wt * xs[j]).sum::<f64>() / sw;
    let var: f64 = (lo..=hi).zip(&w).map(|(j, wt)| wt * (xs[j] - mean_x).powi(2)).sum::<f64>() / sw;
    let mean_y: f64 = (lo..=hi).zip(&w).map(|(j, wt)| wt * ys[j]).sum::<f64>() / sw;
    if var.sqrt() > 0.001 * range {
        let cov: f64 = (lo..=hi).zip(&w).map(|(j, wt)| wt * (xs[j] - mean_x) * (ys[j] - mean_y)).sum::<f64>() / sw;
        Some(mean_y + cov / var * (x0 - mean_x))
    } else {
        Some(mean_y)
    }
}

/// LOWESS smoother on sorted `xs`, returning fitted values at each x.
pub fn lowess(xs: &[f64], ys: &[f64], opts: LowessOptions) -> Vec<f64> {
    let n = xs.len();
    if n == 0 {
        return Vec::new();
    }
    let k = ((opts.span * n as f64).round() as usize).clamp(2.min(n), n);
    let range = xs[n - 1] - xs[0];
    let delta = opts.delta_fraction * range;
    let mut rw = vec![1.0; n];
    let mut fit = vec![0.0; n];

    for iter in 0..=opts.robustness_iterations {
        let (mut lo, mut hi) = (0usize, k - 1);
        let mut last: Option<usize> = None;
        let mut i = 0;
        loop {
            while hi + 1 < n && xs[i] - xs[lo] > xs[hi + 1] - xs[i] {
                lo += 1;
                hi += 1;
            }
            fit[i] = lowess_fit(xs, ys, &rw, i, lo, hi, range).unwrap_or(ys[i]);
            if let Some(l) = last {
                if l + 1 < i {
                    let dx = xs[i] - xs[l];
                    for j in l + 1..i {
                        let a = if dx > 0.0 { (xs[j] - xs[l]) / dx } else { 1.0 };
                        fit[j] = a * fit[i] + (1.0 - a) * fit[l];
                    }
                }
            }
            let mut l = i;
            let cut = xs[l] + delta;
            let mut j = l + 1;
            while j < n && xs[j] <= cut {
                if xs[j] == xs[l] {
                    fit[j] = fit[l];
                    l = j;
                }
                j += 1;
            }
            last = Some(l);
            if l + 1 >= n {
                break;
            }
            i = (l + 1).max(j - 1);
        }
        if iter == opts.robustness_iterations {
            break;
        }
        let mut res: Vec<f64> = ys.iter().zip(&fit).map(|(y, f)| (y - f).abs()).collect();
        let mut sorted = res.clone();
        sorted.sort_by(f64::total_cmp);
        let s = 6.0 * sorted[n / 2];
        if s == 0.0 {
            break;
        }
        for (w, r) in rw.iter_mut().zip(res.iter_mut()) {
            let u = *r / s;
            *w = if u < 1.0 { (1.0 - u * u).powi(2) } else { 0.0 };
        }
    }
    fit
}

pub fn lowess_curve(preds: &PredictionSet, t: Threshold, opts: LowessOptions) -> Result<CalibrationCurve> {
    if preds.len() < 20 {
        return Err(Error::TooFewPoints { needed: 20, got: preds.len() });
    }
    let y = preds.exceeds(t);
    if !y.iter().any(|&v| v) || y.iter().all(|&v| v) {
        return Err(Error::OneClassOnly);
    }
    let q = preds.threshold_values(t);
    let mut idx: Vec<usize> = (0..q.len()).collect();
    idx.sort_by(|&a, &b| q[a].total_cmp(&q[b]));
    let xs: Vec<f64> = idx.iter().map(|&i| q[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| y[i] as u8 as f64).collect();
    let p_obs = lowess(&xs, &ys, opts).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(CalibrationCurve { threshold: t, span: opts.span, p_pred: xs, p_obs })
}

/// Mean absolute distance between the smoothed curve and the diagonal,
/// over the observed predictions.
pub fn ici(curve: &CalibrationCurve) -> f64 {
    if curve.p_pred.is_empty() {
        return 0.0;
    }
    curve.p_pred.iter().zip(&curve.p_obs).map(|(a, b)| (a - b).abs()).sum::<f64>() / curve.p_pred.len() as f64
}

/// ICI of a random-guessing model when a fraction `pi_above` of patients
/// exceed the threshold.
pub fn niv_ici(pi_above: f64) -> f64 {
    pi_above * pi_above - pi_above + 0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<String>,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_resamples: usize,
}

/// One metric value on one prediction set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    pub metric: &'static str,
    pub threshold: Option<Threshold>,
    pub value: f64,
}

/// Every reported metric on a prediction set. Metrics undefined on this set
/// (e.g. an empty threshold side) are reported as NaN.
pub fn evaluate_all(preds: &PredictionSet, skip_empty: bool) -> Vec<MetricValue> {
    let val = |r: Result<f64>| r.unwrap_or(f64::NAN);
    let mut out = vec![
        MetricValue {
            metric: "ORC",
            threshold: None,
            value: val(if skip_empty { orc_skip_empty(preds).map(|v| v.0) } else { orc(preds) }),
        },
        MetricValue { metric: "Somers_D", threshold: None, value: val(somers_dxy(preds)) },
    ];
    for t in Threshold::all() {
        out.push(MetricValue { metric: "threshold_c", threshold: Some(t), value: val(threshold_c(preds, t)) });
    }
    for t in Threshold::all() {
        out.push(MetricValue {
            metric: "calibration_slope",
            threshold: Some(t),
            value: val(calibration_slope(preds, t).map(|f| f.slope)),
        });
    }
    for t in Threshold::all() {
        out.push(MetricValue {
            metric: "ICI",
            threshold: Some(t),
            value: val(lowess_curve(preds, t, LowessOptions::default()).map(|c| ici(&c))),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::{CategoryDistribution, N_THRESHOLDS};
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn cat(i: usize) -> Category {
        Category::new(i).unwrap()
    }

    fn th(i: usize) -> Threshold {
        Threshold::new(i).unwrap()
    }

    fn brute_c(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut s, mut n) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    n += 1.0;
                    if scores[i] > scores[j] {
                        s += 1.0;
                    } else if scores[i] == scores[j] {
                        s += 0.5;
                    }
                }
            }
        }
        s / n
    }

    /// Profiles whose ranking score equals `s` exactly (all mass on q_1).
    fn scored_set(scores: &[f64], labels: &[usize]) -> PredictionSet {
        let profiles = scores
            .iter()
            .map(|&s| {
                let mut q = [0.0; N_THRESHOLDS];
                let mut rest = s;
                for v in q.iter_mut() {
                    *v = rest.min(1.0);
                    rest -= *v;
                }
                ThresholdProfile { q }
            })
            .collect();
        PredictionSet::new(profiles, labels.iter().map(|&i| cat(i)).collect()).unwrap()
    }

    fn random_set(n: usize, seed: u64, discrete: bool) -> PredictionSet {
        let mut r = rng::stream(seed, &[]);
        let profiles = (0..n)
            .map(|_| {
                let mut p = [0.0; 7];
                for v in p.iter_mut() {
                    *v = if discrete { r.random_range(0..3) as f64 + 0.5 } else { r.random::<f64>() + 0.01 };
                }
                let s: f64 = p.iter().sum();
                CategoryDistribution { p: p.map(|v| v / s) }.to_threshold_profile()
            })
            .collect();
        let labels = (0..n).map(|i| cat(if i < 7 { i } else { r.random_range(0..7) })).collect();
        PredictionSet::new(profiles, labels).unwrap()
    }

    #[test]
    fn dichotomous_examples() {
        assert_eq!(dichotomous_c(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(dichotomous_c(&[0.5; 6], &[false, true, false, true, true, false]).unwrap(), 0.5);
        assert!(matches!(dichotomous_c(&[0.1, 0.2], &[true, true]), Err(Error::OneClassOnly)));
        let mut r = rng::stream(5, &[]);
        for _ in 0..20 {
            let s: Vec<f64> = (0..50).map(|_| (r.random_range(0..12) as f64) / 4.0).collect();
            let mut l: Vec<bool> = (0..50).map(|_| r.random()).collect();
            l[0] = true;
            l[1] = false;
            assert_eq!(dichotomous_c(&s, &l).unwrap(), brute_c(&s, &l));
        }
    }

    #[test]
    fn orc_examples() {
        let labels: Vec<usize> = (0..7).collect();
        let ordered: Vec<f64> = (0..7).map(|i| i as f64 * 0.5).collect();
        assert_eq!(orc(&scored_set(&ordered, &labels)).unwrap(), 1.0);
        let reversed: Vec<f64> = ordered.iter().rev().copied().collect();
        assert_eq!(orc(&scored_set(&reversed, &labels)).unwrap(), 0.0);
        // predicted order 1 < 4 < 5 < 2or3 < 6 < 8 < 7
        let rank = [0.0, 3.0, 1.0, 2.0, 4.0, 6.0, 5.0];
        let v = orc(&scored_set(&rank.map(|r| r * 0.5), &labels)).unwrap();
        assert!((v - (1.0 - 3.0 / 21.0)).abs() < 1e-12);
        assert!((v - 0.86).abs() < 0.005);
        assert!(matches!(orc(&scored_set(&[0.0, 1.0], &[0, 1])), Err(Error::EmptyCategory(_))));
        let (v, pairs) = orc_skip_empty(&scored_set(&[0.0, 1.0, 2.0], &[0, 1, 3])).unwrap();
        assert_eq!((v, pairs), (1.0, 3));
    }

    /// Average closeness 1 − S/21 over every set with one patient per category.
    fn orc_by_enumeration(preds: &PredictionSet) -> f64 {
        let scores = preds.scores();
        let groups: Vec<Vec<f64>> =
            (0..7).map(|k| scores.iter().zip(&preds.labels).filter(|(_, c)| c.index() == k).map(|(s, _)| *s).collect()).collect();
        let mut total = 0.0;
        let mut count = 0usize;
        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        let mut pick = [0usize; 7];
        loop {
            let set: Vec<f64> = (0..7).map(|k| groups[k][pick[k]]).collect();
            let mut s = 0.0;
            for i in 0..7 {
                for j in i + 1..7 {
                    if set[i] > set[j] {
                        s += 1.0;
                    } else if set[i] == set[j] {
                        s += 0.5;
                    }
                }
            }
            total += 1.0 - s / 21.0;
            count += 1;
            let mut k = 0;
            loop {
                if k == 7 {
                    return total / count as f64;
                }
                pick[k] += 1;
                if pick[k] < sizes[k] {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn orc_matches_set_enumeration() {
        for seed in 0..15 {
            let mut r = rng::stream(seed, &[1]);
            let mut labels = Vec::new();
            for k in 0..7 {
                for _ in 0..r.random_range(1..=3) {
                    labels.push(k);
                }
            }
            let scores: Vec<f64> = labels.iter().map(|&k| (k as f64 + r.random_range(-3.0..3.0)).round() / 2.0).collect();
            let p = scored_set(&scores.iter().map(|s| s + 1.5).collect::<Vec<_>>(), &labels);
            assert!((orc(&p).unwrap() - orc_by_enumeration(&p)).abs() < 1e-12);
        }
    }

    #[test]
    fn generalized_c_matches_pair_counting() {
        for seed in 0..10 {
            let p = random_set(40, seed, seed % 2 == 0);
            let s = p.scores();
            let (mut conc, mut comp) = (0.0, 0.0);
            for i in 0..p.len() {
                for j in 0..p.len() {
                    if p.labels[i] > p.labels[j] {
                        comp += 1.0;
                        conc += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
                    }
                }
            }
            let g = generalized_c(&p).unwrap();
            assert!((g - conc / comp).abs() < 1e-12);
            assert_eq!(somers_dxy(&p).unwrap(), 2.0 * g - 1.0);
        }
    }

    #[test]
    fn equal_class_sizes_make_generalized_c_equal_orc() {
        let p = random_set(70, 3, false);
        let mut labels = Vec::new();
        for i in 0..70 {
            labels.push(cat(i % 7));
        }
        let p = PredictionSet::new(p.profiles, labels).unwrap();
        assert!((generalized_c(&p).unwrap() - orc(&p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn two_categories_collapse() {
        let base = random_set(60, 8, false);
        let labels: Vec<Category> = (0..60).map(|i| cat(if i % 3 == 0 { 2 } else { 4 })).collect();
        let p = PredictionSet::new(base.profiles, labels).unwrap();
        let (o, pairs) = orc_skip_empty(&p).unwrap();
        assert_eq!(pairs, 1);
        assert!((o - generalized_c(&p).unwrap()).abs() < 1e-12);
        // threshold c collapses when the threshold score orders patients the
        // same way as Σq: use profiles proportional to a single scalar
        let flat: Vec<ThresholdProfile> = p.scores().iter().map(|s| ThresholdProfile { q: [s / 6.0; 6] }).collect();
        let scored = PredictionSet::new(flat, p.labels.clone()).unwrap();
        assert!((threshold_c(&scored, th(2)).unwrap() - orc_skip_empty(&scored).unwrap().0).abs() < 1e-12);
    }

    #[test]
    fn threshold_c_examples() {
        let labels: Vec<Category> = (0..14).map(|i| cat(i % 7)).collect();
        let onehot: Vec<ThresholdProfile> = labels.iter().map(|c| CategoryDistribution::one_hot(*c).to_threshold_profile()).collect();
        let p = PredictionSet::new(onehot, labels.clone()).unwrap();
        for t in Threshold::all() {
            assert_eq!(threshold_c(&p, t).unwrap(), 1.0);
        }
        let flat = PredictionSet::new(vec![ThresholdProfile { q: [0.4; 6] }; 14], labels).unwrap();
        assert_eq!(threshold_c(&flat, th(3)).unwrap(), 0.5);
        let r = random_set(50, 2, true);
        for t in Threshold::all() {
            assert_eq!(threshold_c(&r, t).unwrap(), brute_c(&r.threshold_values(t), &r.exceeds(t)));
        }
    }

    /// Profiles with q_1 = p and the remaining thresholds at 0; outcomes
    /// Bernoulli(true_p) mapped to category 2or3 vs 1.
    fn bernoulli_set(n: usize, seed: u64, pred: impl Fn(f64) -> f64) -> PredictionSet {
        let mut r = rng::stream(seed, &[]);
        let mut profiles = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let z: f64 = r.random_range(-3.0..3.0);
            let p = sigmoid(z);
            let mut q = [0.0; 6];
            q[0] = pred(z);
            profiles.push(ThresholdProfile { q });
            labels.push(cat(if r.random::<f64>() < p { 1 } else { 0 }));
        }
        PredictionSet::new(profiles, labels).unwrap()
    }

    #[test]
    fn calibration_slope_simulations() {
        let good = bernoulli_set(2000, 1, sigmoid);
        let f = calibration_slope(&good, th(0)).unwrap();
        assert!((f.slope - 1.0).abs() < 0.1, "{f:?}");
        let sharp = bernoulli_set(2000, 2, |z| sigmoid(2.0 * z));
        let f = calibration_slope(&sharp, th(0)).unwrap();
        assert!((f.slope - 0.5).abs() < 0.06, "{f:?}");
        let flat = bernoulli_set(100, 3, |_| 0.3);
        assert!(matches!(calibration_slope(&flat, th(0)), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn lowess_curve_examples() {
        // staircase
        let n = 200;
        let profiles: Vec<ThresholdProfile> = (0..n).map(|i| ThresholdProfile { q: [i as f64 / (n - 1) as f64, 0.0, 0.0, 0.0, 0.0, 0.0] }).collect();
        let labels: Vec<Category> = (0..n).map(|i| cat(if i >= n / 2 { 1 } else { 0 })).collect();
        let c = lowess_curve(&PredictionSet::new(profiles.clone(), labels).unwrap(), th(0), LowessOptions::default()).unwrap();
        assert!(c.p_obs[0] < 0.05 && c.p_obs[n - 1] > 0.95, "{} {}", c.p_obs[0], c.p_obs[n - 1]);

        // constant rate: every 5th patient exceeds
        let labels: Vec<Category> = (0..n).map(|i| cat(if i % 5 == 0 { 1 } else { 0 })).collect();
        let c = lowess_curve(&PredictionSet::new(profiles, labels).unwrap(), th(0), LowessOptions::default()).unwrap();
        assert!(c.p_obs.iter().all(|v| (v - 0.2).abs() < 0.03));

        let few = random_set(10, 1, false);
        assert!(matches!(lowess_curve(&few, th(0), LowessOptions::default()), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn lowess_reproduces_a_line() {
        let xs: Vec<f64> = (0..500).map(|i| i as f64 / 499.0).collect();
        for opts in [LowessOptions::default(), LowessOptions { robustness_iterations: 2, ..Default::default() }] {
            let fit = lowess(&xs, &xs, opts);
            for (a, b) in fit.iter().zip(&xs) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lowess_without_delta_matches_direct_fit() {
        let mut r = rng::stream(4, &[]);
        let mut xs: Vec<f64> = (0..300).map(|_| r.random()).collect();
        xs.sort_by(f64::total_cmp);
        let ys: Vec<f64> = xs.iter().map(|x| (x * 5.0).sin() + r.random_range(-0.1..0.1)).collect();
        let exact = lowess(&xs, &ys, LowessOptions { delta_fraction: 0.0, ..Default::default() });
        let fast = lowess(&xs, &ys, LowessOptions::default());
        for (a, b) in exact.iter().zip(&fast) {
            assert!((a - b).abs() < 0.01);
        }
        // direct oracle at one interior point: weighted least squares over
        // the k nearest neighbours
        let k = (0.75f64 * 300.0).round() as usize;
        let i = 150;
        let mut d: Vec<f64> = xs.iter().map(|x| (x - xs[i]).abs()).collect();
        d.sort_by(f64::total_cmp);
        let h = d[k - 1];
        let w: Vec<f64> = xs.iter().map(|x| { let u = (x - xs[i]).abs() / h; if u < 1.0 { (1.0 - u.powi(3)).powi(3) } else { 0.0 } }).collect();
        let sw: f64 = w.iter().sum();
        let mx = w.iter().zip(&xs).map(|(a, b)| a * b).sum::<f64>() / sw;
        let my = w.iter().zip(&ys).map(|(a, b)| a * b).sum::<f64>() / sw;
        let sxy: f64 = w.iter().zip(xs.iter().zip(&ys)).map(|(a, (x, y))| a * (x - mx) * (y - my)).sum();
        let sxx: f64 = w.iter().zip(&xs).map(|(a, x)| a * (x - mx).powi(2)).sum();
        let direct = my + sxy / sxx * (xs[i] - mx);
        assert!((exact[i] - direct).abs() < 1e-3, "{} {}", exact[i], direct);
    }

    #[test]
    fn ici_examples() {
        let diag = CalibrationCurve { threshold: th(0), span: 0.75, p_pred: vec![0.1, 0.5, 0.9], p_obs: vec![0.1, 0.5, 0.9] };
        assert_eq!(ici(&diag), 0.0);
        assert!((niv_ici(0.8) - 0.34).abs() < 1e-12);
        assert_eq!(niv_ici(0.5), 0.25);
        assert_eq!(niv_ici(0.0), 0.5);
        assert_eq!(niv_ici(1.0), 0.5);

        let n = 2001;
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let pi = 0.3;
        let flat = CalibrationCurve { threshold: th(0), span: 0.75, p_pred: grid.clone(), p_obs: vec![pi; n] };
        assert!((ici(&flat) - niv_ici(pi)).abs() < 1e-3);

        // trapezoid oracle for a curved calibration function
        let f = |p: f64| p * p;
        let curve = CalibrationCurve { threshold: th(0), span: 0.75, p_pred: grid.clone(), p_obs: grid.iter().map(|&p| f(p)).collect() };
        let h = 1.0 / (n - 1) as f64;
        let trap: f64 = (0..n - 1).map(|i| 0.5 * h * ((f(grid[i]) - grid[i]).abs() + (f(grid[i + 1]) - grid[i + 1]).abs())).sum();
        assert!((ici(&curve) - trap).abs() < 0.005);
    }

    #[test]
    fn evaluate_all_reports_every_metric() {
        let p = random_set(300, 11, false);
        let all = evaluate_all(&p, false);
        assert_eq!(all.len(), 2 + 3 * 6);
        assert!(all.iter().all(|m| m.value.is_finite()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn metrics_are_rank_statistics(seed in 0u64..10_000) {
            let p = random_set(35, seed, false);
            // strictly increasing transform applied to every score:
            // the scored profiles carry s ↦ s³ + s
            let labels: Vec<usize> = p.labels.iter().map(|c| c.index()).collect();
            let s = p.scores();
            let a = scored_set(&s.iter().map(|v| v / 6.0).collect::<Vec<_>>(), &labels);
            let b = scored_set(&s.iter().map(|v| (v.powi(3) + v) / 222.0).collect::<Vec<_>>(), &labels);
            prop_assert_eq!(orc(&a).unwrap(), orc(&b).unwrap());
            prop_assert_eq!(generalized_c(&a).unwrap(), generalized_c(&b).unwrap());
            prop_assert_eq!(orc(&a).unwrap(), orc(&p).unwrap());
        }

        #[test]
        fn dominance_orders_scores(q in prop::array::uniform6(0.0f64..1.0), d in prop::array::uniform6(0.0f64..1.0)) {
            let mut hi = q;
            hi.sort_by(|a, b| b.total_cmp(a));
            let lo: [f64; 6] = std::array::from_fn(|t| hi[t] * d[t]);
            let (a, b) = (ThresholdProfile { q: hi }, ThresholdProfile { q: lo });
            prop_assert!(ranking_score(&a) >= ranking_score(&b));
        }

        #[test]
        fn orc_in_unit_interval(seed in 0u64..10_000) {
            let p = random_set(30, seed, seed % 3 == 0);
            let v = orc(&p).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
