//! Repeated stratified k-fold partitions, validation splits, pooled
//! out-of-fold predictions, bootstrap confidence intervals with and
//! without bias correction, configuration dropout, and hyperparameter grids.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    calibration_slope, ici, lowess_curve, orc_skip_empty, somers_dxy, threshold_c, LowessOptions, MetricReport,
    PredictionSet,
};
use crate::models::{MlpConfig, OutputEncoding};
use crate::outcome::{Category, Threshold, ThresholdProfile, N_CATEGORIES, N_THRESHOLDS};
use crate::rng;

/// One train/validation/test split. Indices refer to cohort rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub repeat: usize,
    pub fold: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

fn members_by_class(rows: &[usize], labels: &[Category]) -> Vec<Vec<usize>> {
    let mut by = vec![Vec::new(); N_CATEGORIES];
    for &r in rows {
        by[labels[r].index()].push(r);
    }
    by
}

/// `repeats`·`folds` plans; repeats and folds are numbered from 1.
/// Validation sets are left empty (see [`stratified_shuffle_split`]).
pub fn stratified_repeated_kfold(labels: &[Category], repeats: usize, folds: usize, seed: u64) -> Result<Vec<PartitionPlan>> {
    if folds < 2 || repeats == 0 {
        return Err(Error::Invalid(format!("need ≥2 folds and ≥1 repeat, got {folds} folds, {repeats} repeats")));
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let by = members_by_class(&all, labels);
    if let Some(k) = by.iter().position(|m| !m.is_empty() && m.len() < folds) {
        return Err(Error::TooFewPerClass(format!(
            "category {} has {} patients, fewer than {folds} folds",
            Category::new(k)?,
            by[k].len()
        )));
    }
    let mut plans = Vec::with_capacity(repeats * folds);
    for r in 1..=repeats {
        let mut rg = rng::stream(seed, &[rng::label("kfold"), r as u64]);
        let mut fold_of = vec![0usize; labels.len()];
        let mut offset = rg.random_range(0..folds);
        for members in &by {
            let mut m = members.clone();
            m.shuffle(&mut rg);
            for (i, &row) in m.iter().enumerate() {
                fold_of[row] = (offset + i) % folds;
            }
            offset = (offset + m.len()) % folds;
        }
        for f in 0..folds {
            let (test, train): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| fold_of[i] == f);
            plans.push(PartitionPlan { repeat: r, fold: f + 1, train, validation: Vec::new(), test });
        }
    }
    Ok(plans)
}

/// Splits `rows` into (train', validation) with |validation| =
/// round(frac·|rows|), allocated across classes by largest remainder.
pub fn stratified_shuffle_split(rows: &[usize], labels: &[Category], frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&frac) {
        return Err(Error::Invalid(format!("validation fraction {frac} outside [0,1)")));
    }
    let by = members_by_class(rows, labels);
    let present: Vec<usize> = (0..N_CATEGORIES).filter(|&k| !by[k].is_empty()).collect();
    if present.len() < 2 {
        return Err(Error::TooFewPerClass("fewer than two outcome classes to stratify".into()));
    }
    if let Some(&k) = present.iter().find(|&&k| by[k].len() < 2) {
        return Err(Error::TooFewPerClass(format!("category {} has a single patient", Category::new(k)?)));
    }
    let n = rows.len() as f64;
    let n_val = (frac * n).round() as usize;
    let exact: Vec<f64> = (0..N_CATEGORIES).map(|k| n_val as f64 * by[k].len() as f64 / n).collect();
    let mut alloc: Vec<usize> = exact.iter().map(|v| v.floor() as usize).collect();
    let mut order: Vec<usize> = present.clone();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut short = n_val - alloc.iter().sum::<usize>();
    for &k in order.iter().cycle().take(order.len() * 2) {
        if short == 0 {
            break;
        }
        if alloc[k] + 1 < by[k].len() {
            alloc[k] += 1;
            short -= 1;
        }
    }
    let mut rg = rng::stream(seed, &[rng::label("validation")]);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for k in 0..N_CATEGORIES {
        let mut m = by[k].clone();
        m.shuffle(&mut rg);
        let take = alloc[k].min(m.len().saturating_sub(1));
        val.extend_from_slice(&m[..take]);
        train.extend_from_slice(&m[take..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Fills each plan's validation set from its training side.
pub fn assign_validation(plans: &mut [PartitionPlan], labels: &[Category], frac: f64, seed: u64) -> Result<()> {
    for p in plans.iter_mut() {
        let all: Vec<usize> = p.train.iter().chain(&p.validation).copied().collect();
        let (t, v) = stratified_shuffle_split(&all, labels, frac, rng::derive_seed(seed, &[p.repeat as u64, p.fold as u64]))?;
        p.train = t;
        p.validation = v;
    }
    Ok(())
}

// ------------------------------------------------------------ pools

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledEntry {
    pub repeat: usize,
    pub profile: ThresholdProfile,
}

/// Out-of-fold predictions of one configuration, grouped by patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionPool {
    pub ids: Vec<String>,
    pub labels: Vec<Category>,
    pub entries: Vec<Vec<PooledEntry>>,
}

impl PredictionPool {
    pub fn new(ids: Vec<String>, labels: Vec<Category>) -> Self {
        let n = labels.len();
        PredictionPool { ids, labels, entries: vec![Vec::new(); n] }
    }

    pub fn add(&mut self, patient: usize, repeat: usize, profile: ThresholdProfile) {
        self.entries[patient].push(PooledEntry { repeat, profile });
    }

    pub fn n_patients(&self) -> usize {
        self.labels.len()
    }

    pub fn n_predictions(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    /// Patients with at least one prediction.
    pub fn covered(&self) -> Vec<usize> {
        (0..self.n_patients()).filter(|&i| !self.entries[i].is_empty()).collect()
    }

    /// All predictions of the listed patients (with multiplicity).
    pub fn gather(&self, patients: &[usize]) -> PredictionSet {
        let mut profiles = Vec::new();
        let mut labels = Vec::new();
        for &p in patients {
            for e in &self.entries[p] {
                profiles.push(e.profile);
                labels.push(self.labels[p]);
            }
        }
        PredictionSet { profiles, labels, ids: None }
    }

    pub fn prediction_set(&self) -> PredictionSet {
        let all: Vec<usize> = (0..self.n_patients()).collect();
        let mut s = self.gather(&all);
        s.ids = Some(
            (0..self.n_patients()).flat_map(|p| std::iter::repeat_n(self.ids[p].clone(), self.entries[p].len())).collect(),
        );
        s
    }

    /// Rows `config_id, patient_id, repeat, q1..q6, true_category`.
    pub fn write_csv<W: Write>(&self, config_id: &str, w: &mut csv::Writer<W>) -> Result<()> {
        for (p, entries) in self.entries.iter().enumerate() {
            for e in entries {
                let mut rec = vec![config_id.to_string(), self.ids[p].clone(), e.repeat.to_string()];
                rec.extend(e.profile.q.iter().map(|v| v.to_string()));
                rec.push(self.labels[p].label().to_string());
                w.write_record(&rec)?;
            }
        }
        Ok(())
    }

    pub fn csv_header() -> Vec<String> {
        let mut h = vec!["config_id".to_string(), "patient_id".into(), "repeat".into()];
        h.extend((1..=N_THRESHOLDS).map(|t| format!("q{t}")));
        h.push("true_category".into());
        h
    }

    /// Reads pooled-prediction CSV into one pool per config id, in first
    /// appearance order.
    pub fn read_csv<R: Read>(r: R) -> Result<Vec<(String, PredictionPool)>> {
        let mut rd = csv::Reader::from_reader(r);
        let mut out: Vec<(String, PredictionPool)> = Vec::new();
        let mut patient_index: Vec<std::collections::HashMap<String, usize>> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != 4 + N_THRESHOLDS {
                return Err(Error::Invalid(format!("pooled prediction row has {} fields", rec.len())));
            }
            let cfg = rec[0].to_string();
            let ci = match out.iter().position(|(c, _)| *c == cfg) {
                Some(i) => i,
                None => {
                    out.push((cfg, PredictionPool::new(Vec::new(), Vec::new())));
                    patient_index.push(Default::default());
                    out.len() - 1
                }
            };
            let repeat: usize = rec[2].parse().map_err(|_| Error::Invalid(format!("bad repeat '{}'", &rec[2])))?;
            let mut q = [0.0; N_THRESHOLDS];
            for (t, v) in q.iter_mut().enumerate() {
                *v = rec[3 + t].parse().map_err(|_| Error::Invalid(format!("bad probability '{}'", &rec[3 + t])))?;
            }
            let label: Category = rec[3 + N_THRESHOLDS].parse()?;
            let pool = &mut out[ci].1;
            let p = *patient_index[ci].entry(rec[1].to_string()).or_insert_with(|| {
                pool.ids.push(rec[1].to_string());
                pool.labels.push(label);
                pool.entries.push(Vec::new());
                pool.ids.len() - 1
            });
            pool.add(p, repeat, ThresholdProfile::new(q)?);
        }
        Ok(out)
    }
}

// ------------------------------------------------------------ metrics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Orc,
    SomersD,
    ThresholdC(Threshold),
    CalibrationSlope(Threshold),
    Ici(Threshold),
}

impl Metric {
    pub fn all() -> Vec<Metric> {
        let mut v = vec![Metric::Orc, Metric::SomersD];
        v.extend(Threshold::all().map(Metric::ThresholdC));
        v.extend(Threshold::all().map(Metric::CalibrationSlope));
        v.extend(Threshold::all().map(Metric::Ici));
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Orc => "ORC",
            Metric::SomersD => "Somers_D",
            Metric::ThresholdC(_) => "threshold_c",
            Metric::CalibrationSlope(_) => "calibration_slope",
            Metric::Ici(_) => "ICI",
        }
    }

    pub fn threshold(self) -> Option<Threshold> {
        match self {
            Metric::ThresholdC(t) | Metric::CalibrationSlope(t) | Metric::Ici(t) => Some(t),
            _ => None,
        }
    }

    /// ORC uses its skip-empty mode so small resamples stay usable.
    pub fn eval(self, s: &PredictionSet) -> Result<f64> {
        match self {
            Metric::Orc => orc_skip_empty(s).map(|v| v.0),
            Metric::SomersD => somers_dxy(s),
            Metric::ThresholdC(t) => threshold_c(s, t),
            Metric::CalibrationSlope(t) => calibration_slope(s, t).map(|f| f.slope),
            Metric::Ici(t) => lowess_curve(s, t, LowessOptions::default()).map(|c| ici(&c)),
        }
    }

    /// Larger is better after this transform.
    pub fn merit(self, v: f64) -> f64 {
        match self {
            Metric::Ici(_) => -v,
            Metric::CalibrationSlope(_) => -(v - 1.0).abs(),
            _ => v,
        }
    }

    fn report(self, estimate: f64, values: &mut [f64]) -> MetricReport {
        let (ci_low, ci_high) = percentile_interval(values);
        MetricReport {
            metric: self.name().to_string(),
            threshold: self.threshold().map(|t| t.label().to_string()),
            estimate,
            ci_low,
            ci_high,
            n_resamples: values.len(),
        }
    }
}

/// Linear-interpolated percentile of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn percentile_interval(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    (percentile(values, 0.025), percentile(values, 0.975))
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Patient indices (among `patients`) drawn with replacement for resample `b`.
pub fn resample(patients: &[usize], seed: u64, b: usize) -> Vec<usize> {
    let mut r = rng::stream(seed, &[rng::label("bootstrap"), b as u64]);
    (0..patients.len()).map(|_| patients[r.random_range(0..patients.len())]).collect()
}

fn out_of_bag(patients: &[usize], bag: &[usize], n: usize) -> Vec<usize> {
    let mut inb = vec![false; n];
    for &i in bag {
        inb[i] = true;
    }
    patients.iter().copied().filter(|&i| !inb[i]).collect()
}

/// Percentile bootstrap over patients: the metric on each in-bag resample.
pub fn bootstrap_ci(pool: &PredictionPool, metric: Metric, b: usize, seed: u64) -> Result<MetricReport> {
    let patients = pool.covered();
    if patients.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut values: Vec<f64> = (0..b)
        .into_par_iter()
        .filter_map(|i| metric.eval(&pool.gather(&resample(&patients, seed, i))).ok())
        .collect();
    let est = mean(&values);
    Ok(metric.report(est, &mut values))
}

/// Like [`bootstrap_ci`] but evaluates each resample on its out-of-bag
/// patients.
pub fn bootstrap_ci_oob(pool: &PredictionPool, metric: Metric, b: usize, seed: u64) -> Result<MetricReport> {
    Ok(bbc_select(std::slice::from_ref(pool), metric, b, seed)?.report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbcResult {
    pub chosen: usize,
    pub report: MetricReport,
    pub skipped_resamples: usize,
}

/// Bootstrap bias-corrected selection: in each resample the best
/// configuration on the in-bag patients is scored on the out-of-bag ones.
pub fn bbc_select(pools: &[PredictionPool], metric: Metric, b: usize, seed: u64) -> Result<BbcResult> {
    bbc_select_by(pools, metric, metric, b, seed)
}

/// Bootstrap bias-corrected selection: pick the configuration by `select`
/// on each in-bag sample and score it with `eval` on the out-of-bag rest.
pub fn bbc_select_by(pools: &[PredictionPool], select: Metric, eval: Metric, b: usize, seed: u64) -> Result<BbcResult> {
    let metric = select;
    let first = pools.first().ok_or_else(|| Error::Invalid("no configurations to select from".into()))?;
    let n = first.n_patients();
    if pools.iter().any(|p| p.n_patients() != n || p.labels != first.labels) {
        return Err(Error::Invalid("configuration pools are not aligned on patients".into()));
    }
    let patients = first.covered();
    if patients.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let best_on = |set: &[usize]| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (c, p) in pools.iter().enumerate() {
            if let Ok(v) = metric.eval(&p.gather(set)) {
                let m = metric.merit(v);
                if best.is_none_or(|(_, bm)| m > bm) {
                    best = Some((c, m));
                }
            }
        }
        best.map(|b| b.0)
    };
    let chosen = best_on(&patients).ok_or_else(|| Error::Invalid("metric undefined for every configuration".into()))?;
    let outcomes: Vec<Option<f64>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let bag = resample(&patients, seed, i);
            let oob = out_of_bag(&patients, &bag, n);
            if oob.is_empty() {
                return None;
            }
            let c = if pools.len() == 1 { 0 } else { best_on(&bag)? };
            eval.eval(&pools[c].gather(&oob)).ok()
        })
        .collect();
    let skipped = outcomes.iter().filter(|o| o.is_none()).count();
    let mut values: Vec<f64> = outcomes.into_iter().flatten().collect();
    let est = mean(&values);
    Ok(BbcResult { chosen, report: eval.report(est, &mut values), skipped_resamples: skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutResult {
    pub optimum: usize,
    pub survivors: Vec<usize>,
    /// Per configuration: resamples in which it matched or beat the optimum.
    pub wins: Vec<usize>,
}

/// Drops every configuration whose ORC fails to match the pooled optimum
/// in at least `alpha·b` patient resamples.
pub fn bbcd_dropout(pools: &[PredictionPool], alpha: f64, b: usize, seed: u64) -> Result<DropoutResult> {
    let first = pools.first().ok_or_else(|| Error::Invalid("no configurations".into()))?;
    let patients = first.covered();
    let orc = |p: &PredictionPool, set: &[usize]| orc_skip_empty(&p.gather(set)).map(|v| v.0).unwrap_or(f64::NAN);
    let full: Vec<f64> = pools.iter().map(|p| orc(p, &patients)).collect();
    let optimum = (0..pools.len())
        .filter(|&c| full[c].is_finite())
        .max_by(|&a, &c| full[a].total_cmp(&full[c]).then(c.cmp(&a)))
        .ok_or_else(|| Error::Invalid("ORC undefined for every configuration".into()))?;
    let per_resample: Vec<Vec<bool>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let bag = resample(&patients, seed, i);
            let opt = orc(&pools[optimum], &bag);
            pools.iter().map(|p| orc(p, &bag) >= opt).collect()
        })
        .collect();
    let wins: Vec<usize> = (0..pools.len()).map(|c| per_resample.iter().filter(|r| r[c]).count()).collect();
    let need = alpha * b as f64;
    let survivors = (0..pools.len()).filter(|&c| c == optimum || wins[c] as f64 >= need).collect();
    Ok(DropoutResult { optimum, survivors, wins })
}

// ------------------------------------------------------------ grids

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GridProfile {
    Paper,
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub widths: Vec<usize>,
    pub dropout: f64,
}

impl GridPoint {
    pub fn id(&self) -> String {
        let w: Vec<String> = self.widths.iter().map(usize::to_string).collect();
        format!("w{}-d{}", w.join("x"), self.dropout)
    }

    pub fn config(&self, encoding: OutputEncoding, seed: u64) -> MlpConfig {
        MlpConfig::new(self.widths.clone(), self.dropout, encoding).with_seed(seed)
    }
}

/// Every width sequence up to the profile's depth, crossed with dropout 0 / 0.2.
pub fn build_grid(profile: GridProfile) -> Vec<GridPoint> {
    let (widths, depth): (&[usize], usize) = match profile {
        GridProfile::Paper => (&[128, 256, 512], 6),
        GridProfile::Desk => (&[8, 16, 32], 3),
    };
    let mut out = Vec::new();
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..depth {
        layer = layer.iter().flat_map(|p| widths.iter().map(move |&w| [p.as_slice(), &[w]].concat())).collect();
        for w in &layer {
            for d in [0.0, 0.2] {
                out.push(GridPoint { widths: w.clone(), dropout: d });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::category_counts;
    use proptest::prelude::*;
    use rand::Rng;

    fn cat(i: usize) -> Category {
        Category::new(i).unwrap()
    }

    fn labels(n: usize, seed: u64) -> Vec<Category> {
        let mut r = rng::stream(seed, &[]);
        (0..n).map(|i| cat(if i < 35 { i % 7 } else { r.random_range(0..7) })).collect()
    }

    fn check_stratified(plans: &[PartitionPlan], labels: &[Category], repeats: usize) {
        let n = labels.len();
        let global = category_counts(labels);
        for r in 1..=repeats {
            let mut seen = vec![0; n];
            for p in plans.iter().filter(|p| p.repeat == r) {
                for &i in &p.test {
                    seen[i] += 1;
                }
                assert_eq!(p.test.len() + p.train.len() + p.validation.len(), n);
                let fc = category_counts(&p.test.iter().map(|&i| labels[i]).collect::<Vec<_>>());
                let f = p.test.len() as f64;
                for k in 0..7 {
                    let prop = fc[k] as f64 / f;
                    assert!((prop - global[k] as f64 / n as f64).abs() <= 1.0 / f + 1e-12);
                }
            }
            assert!(seen.iter().all(|&s| s == 1));
        }
    }

    #[test]
    fn kfold_examples() {
        let y = labels(300, 1);
        let plans = stratified_repeated_kfold(&y, 20, 5, 7).unwrap();
        assert_eq!(plans.len(), 100);
        check_stratified(&plans, &y, 20);
        assert_eq!(plans, stratified_repeated_kfold(&y, 20, 5, 7).unwrap());
        assert_ne!(plans, stratified_repeated_kfold(&y, 20, 5, 8).unwrap());

        let two: Vec<Category> = (0..10).map(|i| cat(i % 2)).collect();
        for p in stratified_repeated_kfold(&two, 3, 5, 2).unwrap() {
            let mut l: Vec<usize> = p.test.iter().map(|&i| two[i].index()).collect();
            l.sort();
            assert_eq!(l, vec![0, 1]);
        }
        assert!(matches!(stratified_repeated_kfold(&two[..6], 1, 5, 0), Err(Error::TooFewPerClass(_))));
    }

    #[test]
    fn shuffle_split_examples() {
        let y = labels(100, 3);
        let rows: Vec<usize> = (0..100).collect();
        let (t, v) = stratified_shuffle_split(&rows, &y, 0.15, 1).unwrap();
        assert_eq!(v.len(), 15);
        assert_eq!(t.len(), 85);
        assert!(v.iter().all(|i| !t.contains(i)));
        let gc = category_counts(&y);
        let vc = category_counts(&v.iter().map(|&i| y[i]).collect::<Vec<_>>());
        for k in 0..7 {
            assert!((vc[k] as f64 - 15.0 * gc[k] as f64 / 100.0).abs() <= 1.0);
        }
        let one = vec![cat(2); 20];
        assert!(matches!(stratified_shuffle_split(&rows[..20], &one, 0.15, 1), Err(Error::TooFewPerClass(_))));
    }

    #[test]
    fn assigned_validation_stays_on_train_side() {
        let y = labels(200, 4);
        let mut plans = stratified_repeated_kfold(&y, 2, 5, 1).unwrap();
        assign_validation(&mut plans, &y, 0.15, 3).unwrap();
        check_stratified(&plans, &y, 2);
        for p in &plans {
            assert_eq!(p.validation.len(), (0.15f64 * 160.0).round() as usize);
            assert!(p.validation.iter().all(|i| !p.test.contains(i) && !p.train.contains(i)));
        }
    }

    fn pool_from_scores(scores: &[f64], y: &[Category]) -> PredictionPool {
        let mut p = PredictionPool::new((0..y.len()).map(|i| format!("P{i}")).collect(), y.to_vec());
        for (i, &s) in scores.iter().enumerate() {
            p.add(i, 1, ThresholdProfile { q: [s; 6] });
        }
        p
    }

    fn noise_pool(y: &[Category], seed: u64) -> PredictionPool {
        let mut r = rng::stream(seed, &[rng::label("noise")]);
        pool_from_scores(&(0..y.len()).map(|_| r.random::<f64>()).collect::<Vec<_>>(), y)
    }

    fn informative_pool(y: &[Category], noise: f64, seed: u64) -> PredictionPool {
        let mut r = rng::stream(seed, &[rng::label("informative")]);
        pool_from_scores(&y.iter().map(|c| (c.index() as f64 + noise * r.random_range(-3.0..3.0) + 4.0) / 14.0).collect::<Vec<_>>(), y)
    }

    #[test]
    fn bootstrap_ci_examples() {
        let y = labels(120, 5);
        let flat = pool_from_scores(&vec![0.3; 120], &y);
        let r = bootstrap_ci(&flat, Metric::Orc, 200, 1).unwrap();
        assert_eq!((r.estimate, r.ci_low, r.ci_high), (0.5, 0.5, 0.5));

        let p = informative_pool(&y, 1.0, 2);
        let a = bootstrap_ci(&p, Metric::Orc, 300, 9).unwrap();
        assert_eq!(a, bootstrap_ci(&p, Metric::Orc, 300, 9).unwrap());

        // second implementation: sequential loop, explicit sort, same stream
        let patients: Vec<usize> = (0..120).collect();
        let mut vals = Vec::new();
        for b in 0..300 {
            let mut r = rng::stream(9, &[rng::label("bootstrap"), b as u64]);
            let draw: Vec<usize> = (0..120).map(|_| r.random_range(0..120)).collect();
            let set = PredictionSet::new(draw.iter().map(|&i| p.entries[patients[i]][0].profile).collect(), draw.iter().map(|&i| y[i]).collect()).unwrap();
            vals.push(orc_skip_empty(&set).unwrap().0);
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pct = |q: f64| {
            let pos = q * 299.0;
            let i = pos as usize;
            vals[i] + (pos - i as f64) * (vals[(i + 1).min(299)] - vals[i])
        };
        assert_eq!(a.ci_low, pct(0.025));
        assert_eq!(a.ci_high, pct(0.975));

        let one = bootstrap_ci(&p, Metric::Orc, 1, 4).unwrap();
        assert_eq!(one.estimate, one.ci_low);
        assert_eq!(one.n_resamples, 1);
    }

    #[test]
    fn bbc_examples() {
        let y = labels(150, 6);
        let p = informative_pool(&y, 1.0, 1);
        let single = bbc_select(std::slice::from_ref(&p), Metric::Orc, 200, 3).unwrap();
        assert_eq!(single.report, bootstrap_ci_oob(&p, Metric::Orc, 200, 3).unwrap());

        let good = informative_pool(&y, 0.0, 1);
        let res = bbc_select(&[noise_pool(&y, 1), good.clone(), noise_pool(&y, 2)], Metric::Orc, 200, 3).unwrap();
        assert_eq!(res.chosen, 1);
        assert_eq!(res.report, bootstrap_ci_oob(&good, Metric::Orc, 200, 3).unwrap());
    }

    #[test]
    fn bbc_corrects_winners_curse() {
        let y = labels(140, 7);
        let mut worse = 0;
        for seed in 0..20 {
            let pools: Vec<PredictionPool> = (0..15).map(|c| noise_pool(&y, seed * 100 + c)).collect();
            let naive = pools.iter().map(|p| orc_skip_empty(&p.prediction_set()).unwrap().0).fold(0.0, f64::max);
            let bbc = bbc_select(&pools, Metric::Orc, 100, seed).unwrap();
            if bbc.report.estimate <= naive {
                worse += 1;
            }
        }
        assert_eq!(worse, 20);
    }

    #[test]
    fn dropout_examples() {
        let y = labels(150, 8);
        let opt = informative_pool(&y, 0.5, 1);
        let pools = vec![noise_pool(&y, 3), opt.clone(), opt.clone(), informative_pool(&y, 3.0, 4)];
        let d = bbcd_dropout(&pools, 0.05, 200, 1).unwrap();
        assert!(d.optimum == 1 || d.optimum == 2);
        assert!(d.survivors.contains(&1) && d.survivors.contains(&2));
        assert!(!d.survivors.contains(&0));
        assert!(!d.survivors.contains(&3));
    }

    #[test]
    fn grid_cardinalities() {
        let g = build_grid(GridProfile::Paper);
        assert_eq!(g.len(), 2184);
        assert_eq!(g.iter().filter(|p| p.widths.len() == 1).count(), 6);
        assert_eq!(build_grid(GridProfile::Desk).len(), 78);
        let ids: std::collections::HashSet<String> = g.iter().map(GridPoint::id).collect();
        assert_eq!(ids.len(), 2184);
    }

    #[test]
    fn pool_csv_round_trip() {
        let y = labels(40, 2);
        let p = informative_pool(&y, 1.0, 3);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(PredictionPool::csv_header()).unwrap();
        p.write_csv("cfgA", &mut w).unwrap();
        let bytes = w.into_inner().unwrap();
        let back = PredictionPool::read_csv(&bytes[..]).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].0, "cfgA");
        assert_eq!(back[0].1, p);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn every_plan_is_stratified(n in 40usize..260, k in 2usize..6, seed in 0u64..1000) {
            let y = labels(n, seed);
            let plans = stratified_repeated_kfold(&y, 2, k, seed).unwrap();
            prop_assert_eq!(plans.len(), 2 * k);
            check_stratified(&plans, &y, 2);
        }
    }
}
