//! The 7-category ordinal outcome scale (GOSE with 2 and 3 merged), its
//! probability representations, and class weights.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const N_CATEGORIES: usize = 7;
pub const N_THRESHOLDS: usize = 6;

pub const CATEGORY_LABELS: [&str; N_CATEGORIES] = ["1", "2or3", "4", "5", "6", "7", "8"];
pub const THRESHOLD_LABELS: [&str; N_THRESHOLDS] = [">1", ">3", ">4", ">5", ">6", ">7"];

/// Outcome category, stored as index 0..=6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Category(u8);

impl Category {
    pub fn new(index: usize) -> Result<Self> {
        if index < N_CATEGORIES {
            Ok(Category(index as u8))
        } else {
            Err(Error::Invalid(format!("category index {index} out of range")))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> &'static str {
        CATEGORY_LABELS[self.index()]
    }

    /// True when this category lies above threshold `t` (0-based).
    pub fn exceeds(self, t: Threshold) -> bool {
        self.index() > t.index()
    }

    pub fn all() -> impl Iterator<Item = Category> {
        (0..N_CATEGORIES as u8).map(Category)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "2" | "3" => return Ok(Category(1)),
            _ => {}
        }
        CATEGORY_LABELS
            .iter()
            .position(|l| *l == s)
            .map(|i| Category(i as u8))
            .ok_or_else(|| Error::Invalid(format!("unknown outcome label `{s}`")))
    }
}

/// Threshold index 0..=5; threshold t separates category t from t+1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Threshold(u8);

impl Threshold {
    pub fn new(index: usize) -> Result<Self> {
        if index < N_THRESHOLDS {
            Ok(Threshold(index as u8))
        } else {
            Err(Error::Invalid(format!("threshold index {index} out of range")))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> &'static str {
        THRESHOLD_LABELS[self.index()]
    }

    pub fn all() -> impl Iterator<Item = Threshold> {
        (0..N_THRESHOLDS as u8).map(Threshold)
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Threshold {
    type Err = Error;

    /// Accepts ">3", "3" or "GOSE>3".
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches("GOSE").trim_start_matches('>');
        let label = format!(">{s}");
        THRESHOLD_LABELS
            .iter()
            .position(|l| *l == label)
            .map(|i| Threshold(i as u8))
            .ok_or_else(|| Error::Invalid(format!("unknown threshold `{s}`")))
    }
}

/// Probability of each of the 7 categories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryDistribution {
    pub p: [f64; N_CATEGORIES],
}

impl CategoryDistribution {
    pub fn new(p: [f64; N_CATEGORIES]) -> Result<Self> {
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Invalid("category probability outside [0,1]".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("category probabilities sum to {total}")));
        }
        Ok(CategoryDistribution { p })
    }

    pub fn uniform() -> Self {
        CategoryDistribution { p: [1.0 / N_CATEGORIES as f64; N_CATEGORIES] }
    }

    pub fn one_hot(c: Category) -> Self {
        let mut p = [0.0; N_CATEGORIES];
        p[c.index()] = 1.0;
        CategoryDistribution { p }
    }

    pub fn to_threshold_profile(&self) -> ThresholdProfile {
        to_threshold_profile(self)
    }
}

/// Exceedance probabilities Pr(outcome > t) for the 6 thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdProfile {
    pub q: [f64; N_THRESHOLDS],
}

impl ThresholdProfile {
    /// Validates range and monotonicity (a 1e-12 slack absorbs round-off).
    pub fn new(q: [f64; N_THRESHOLDS]) -> Result<Self> {
        if q.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Invalid("exceedance probability outside [0,1]".into()));
        }
        if q.windows(2).any(|w| w[1] > w[0] + 1e-12) {
            return Err(Error::Invalid("threshold profile is not non-increasing".into()));
        }
        Ok(ThresholdProfile { q })
    }

    pub fn at(&self, t: Threshold) -> f64 {
        self.q[t.index()]
    }

    pub fn is_monotone(&self) -> bool {
        self.q.windows(2).all(|w| w[1] <= w[0])
    }

    /// Expected number of thresholds exceeded.
    pub fn ranking_score(&self) -> f64 {
        self.q.iter().sum()
    }
}

pub fn to_threshold_profile(d: &CategoryDistribution) -> ThresholdProfile {
    let mut q = [0.0; N_THRESHOLDS];
    // accumulate from the top so each q_t is a tail sum
    let mut tail = 0.0;
    for t in (0..N_THRESHOLDS).rev() {
        tail += d.p[t + 1];
        q[t] = tail.min(1.0);
    }
    ThresholdProfile { q }
}

/// Pr(outcome > higher | outcome > lower).
pub fn conditional_exceedance(
    q: &ThresholdProfile,
    lower: Threshold,
    higher: Threshold,
) -> Result<f64> {
    if lower > higher {
        return Err(Error::Invalid(format!(
            "lower threshold {lower} is above higher threshold {higher}"
        )));
    }
    let denom = q.at(lower);
    if denom <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    if lower == higher {
        return Ok(1.0);
    }
    Ok((q.at(higher) / denom).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w: [f64; N_CATEGORIES],
}

impl ClassWeights {
    pub fn uniform() -> Self {
        ClassWeights { w: [1.0; N_CATEGORIES] }
    }

    pub fn get(&self, c: Category) -> f64 {
        self.w[c.index()]
    }
}

/// Weights N / (7 n_k): inversely proportional to frequency, mean weight 1.
pub fn class_weights(labels: &[Category]) -> Result<ClassWeights> {
    let counts = category_counts(labels);
    if let Some(k) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyCategory(CATEGORY_LABELS[k].to_string()));
    }
    let n = labels.len() as f64;
    let mut w = [0.0; N_CATEGORIES];
    for (wk, &nk) in w.iter_mut().zip(&counts) {
        *wk = n / (N_CATEGORIES as f64 * nk as f64);
    }
    Ok(ClassWeights { w })
}

pub fn category_counts(labels: &[Category]) -> [usize; N_CATEGORIES] {
    let mut counts = [0usize; N_CATEGORIES];
    for c in labels {
        counts[c.index()] += 1;
    }
    counts
}

/// Unweighted mean of per-threshold values.
pub fn macro_average(values: &[f64; N_THRESHOLDS]) -> f64 {
    values.iter().sum::<f64>() / N_THRESHOLDS as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn th(s: &str) -> Threshold {
        s.parse().unwrap()
    }

    fn cumulative_oracle(p: &[f64; 7]) -> [f64; 6] {
        let mut q = [0.0; 6];
        for (t, qt) in q.iter_mut().enumerate() {
            for (k, pk) in p.iter().enumerate() {
                if k > t {
                    *qt += pk;
                }
            }
        }
        q
    }

    #[test]
    fn uniform_distribution_profile() {
        let q = to_threshold_profile(&CategoryDistribution::uniform());
        for (t, v) in q.q.iter().enumerate() {
            assert!((v - (6 - t) as f64 / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn death_exceeds_nothing() {
        let d = CategoryDistribution::one_hot(Category::new(0).unwrap());
        assert_eq!(to_threshold_profile(&d).q, [0.0; 6]);
    }

    #[test]
    fn fig1b_conditionals() {
        let q = ThresholdProfile::new([
            0.1273615, 0.1228617, 0.0661974, 0.0261596, 0.0216245, 0.0038411,
        ])
        .unwrap();
        let a = conditional_exceedance(&q, th(">1"), th(">3")).unwrap();
        let b = conditional_exceedance(&q, th(">1"), th(">4")).unwrap();
        assert_eq!(format!("{:.1}", a * 100.0), "96.5");
        assert_eq!(format!("{:.1}", b * 100.0), "52.0");
        assert_eq!(conditional_exceedance(&q, th(">4"), th(">4")).unwrap(), 1.0);
    }

    #[test]
    fn zero_denominator() {
        let q = ThresholdProfile::new([0.0; 6]).unwrap();
        assert!(matches!(
            conditional_exceedance(&q, th(">1"), th(">3")),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn class_weight_examples() {
        let balanced: Vec<Category> = Category::all().chain(Category::all()).collect();
        assert_eq!(class_weights(&balanced).unwrap().w, [1.0; 7]);

        let n = [7usize, 1, 1, 1, 1, 1, 2];
        let labels: Vec<Category> = n
            .iter()
            .enumerate()
            .flat_map(|(k, &c)| std::iter::repeat_n(Category::new(k).unwrap(), c))
            .collect();
        let w = class_weights(&labels).unwrap();
        let expected = [2.0 / 7.0, 2.0, 2.0, 2.0, 2.0, 2.0, 1.0];
        for (a, b) in w.w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let total: f64 = w.w.iter().zip(n).map(|(w, n)| w * n as f64).sum();
        assert!((total - 14.0).abs() < 1e-9);

        let missing: Vec<Category> = Category::all().skip(1).collect();
        assert!(matches!(class_weights(&missing), Err(Error::EmptyCategory(_))));
    }

    #[test]
    fn macro_average_examples() {
        assert_eq!(macro_average(&[1.0; 6]), 1.0);
        assert!((macro_average(&[0.83, 0.81, 0.78, 0.76, 0.72, 0.72]) - 0.77).abs() < 1e-12);
        assert_eq!(macro_average(&[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]), 0.5);
    }

    #[test]
    fn labels_round_trip() {
        for c in Category::all() {
            assert_eq!(c.label().parse::<Category>().unwrap(), c);
        }
        assert_eq!("3".parse::<Category>().unwrap().label(), "2or3");
        assert_eq!(th("GOSE>7").index(), 5);
    }

    #[test]
    fn json_shape() {
        let q = ThresholdProfile::new([0.5; 6]).unwrap();
        assert_eq!(serde_json::to_string(&q).unwrap(), r#"{"q":[0.5,0.5,0.5,0.5,0.5,0.5]}"#);
        let d = CategoryDistribution::uniform();
        assert!(serde_json::to_string(&d).unwrap().starts_with(r#"{"p":["#));
    }

    fn simplex() -> impl Strategy<Value = [f64; 7]> {
        prop::array::uniform7(0.0f64..1.0).prop_filter_map("non-zero mass", |raw| {
            let s: f64 = raw.iter().sum();
            (s > 1e-6).then(|| raw.map(|v| v / s))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn profile_is_monotone_and_matches_oracle(p in simplex()) {
            let q = to_threshold_profile(&CategoryDistribution { p });
            prop_assert!(q.is_monotone());
            for (a, b) in q.q.iter().zip(cumulative_oracle(&p)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn conditional_times_denominator(p in simplex(), a in 0usize..6, b in 0usize..6) {
            let (lo, hi) = (a.min(b), a.max(b));
            let q = to_threshold_profile(&CategoryDistribution { p });
            let (lo, hi) = (Threshold::new(lo).unwrap(), Threshold::new(hi).unwrap());
            if q.at(lo) > 0.0 {
                let c = conditional_exceedance(&q, lo, hi).unwrap();
                prop_assert!((0.0..=1.0).contains(&c));
                prop_assert!((c * q.at(lo) - q.at(hi)).abs() <= 1e-12);
            }
        }
    }
}
