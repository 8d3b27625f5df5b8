//! Synthetic cohorts with a known ordered-logit outcome mechanism.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cohort::{CohortTable, PatientRecord, PredictorKind, PredictorSpec, Schema, Tier, Value};
use crate::error::{Error, Result};
use crate::models::heads::sigmoid;
use crate::outcome::{Category, ThresholdProfile, N_CATEGORIES, N_THRESHOLDS};
use crate::rng;

/// Outcome counts used to place the default thresholds.
pub const REFERENCE_COUNTS: [usize; N_CATEGORIES] = [318, 262, 120, 227, 200, 206, 217];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Generator {
    /// Normal draw clipped to [min, max]; contributes slope·(x − mean)/sd.
    Continuous { mean: f64, sd: f64, min: f64, max: f64, slope: f64 },
    /// One of `levels` with probabilities `probs`; contributes the level's
    /// effect, centred so the expected contribution is zero.
    Discrete { levels: Vec<String>, probs: Vec<f64>, effects: Vec<f64> },
}

impl Generator {
    fn validate(&self, name: &str) -> Result<()> {
        match self {
            Generator::Continuous { sd, min, max, .. } if !(*sd > 0.0) || min >= max => {
                Err(Error::InvalidSpec(format!("{name}: continuous generator needs sd > 0 and min < max")))
            }
            Generator::Discrete { levels, probs, effects }
                if levels.is_empty() || probs.len() != levels.len() || effects.len() != levels.len() =>
            {
                Err(Error::InvalidSpec(format!("{name}: levels, probs and effects must align")))
            }
            Generator::Discrete { probs, .. }
                if probs.iter().any(|p| *p < 0.0) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 =>
            {
                Err(Error::InvalidSpec(format!("{name}: level probabilities must sum to 1")))
            }
            _ => Ok(()),
        }
    }

    fn effect_centre(&self) -> f64 {
        match self {
            Generator::Continuous { .. } => 0.0,
            Generator::Discrete { probs, effects, .. } => probs.iter().zip(effects).map(|(p, e)| p * e).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPredictor {
    pub spec: PredictorSpec,
    pub generator: Generator,
}

/// Missing at random on `driver` when set (rate shifted on the logit scale
/// by the standardised driver), otherwise completely at random.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingSpec {
    pub column: String,
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driver: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n: usize,
    pub seed: u64,
    pub predictors: Vec<SyntheticPredictor>,
    /// Multiplies every predictor contribution.
    pub beta_scale: f64,
    pub thresholds: [f64; N_THRESHOLDS],
    pub missing: Vec<MissingSpec>,
}

/// θ_t = logit of the cumulative proportion up to category t.
pub fn thresholds_from_counts(counts: &[usize; N_CATEGORIES]) -> [f64; N_THRESHOLDS] {
    let n: usize = counts.iter().sum();
    let mut th = [0.0; N_THRESHOLDS];
    let mut cum = 0;
    for t in 0..N_THRESHOLDS {
        cum += counts[t];
        let p = cum as f64 / n as f64;
        th[t] = (p / (1.0 - p)).ln();
    }
    th
}

fn discrete(name: &str, tier: Tier, levels: &[&str], probs: &[f64], effects: &[f64]) -> SyntheticPredictor {
    SyntheticPredictor {
        spec: PredictorSpec::new(name, PredictorKind::Categorical).with_levels(levels).with_tier(tier),
        generator: Generator::Discrete {
            levels: levels.iter().map(|s| s.to_string()).collect(),
            probs: probs.to_vec(),
            effects: effects.to_vec(),
        },
    }
}

fn continuous(name: &str, tier: Tier, mean: f64, sd: f64, min: f64, max: f64, slope: f64) -> SyntheticPredictor {
    SyntheticPredictor {
        spec: PredictorSpec::new(name, PredictorKind::Continuous).with_tier(tier),
        generator: Generator::Continuous { mean, sd, min, max, slope },
    }
}

impl CohortSpec {
    /// Ten concise predictors of mixed type, `signal` token-signal
    /// categorical predictors (the first half extended tier, the rest all
    /// tier) with effects ±`signal_effect`, and uninformative extras.
    pub fn desk(n: usize, seed: u64) -> Self {
        Self::with_signal(n, seed, 8, 0.8)
    }

    pub fn with_signal(n: usize, seed: u64, signal: usize, signal_effect: f64) -> Self {
        use Tier::*;
        let mut p = vec![
            continuous("Age", Concise, 50.0, 19.0, 16.0, 95.0, -0.9).category("Demographics"),
            discrete("GCSm", Concise, &["1", "2", "3", "4", "5", "6"], &[0.32, 0.036, 0.042, 0.076, 0.202, 0.324], &[-1.2, -1.0, -0.8, -0.4, 0.0, 0.9])
                .category("Clinical severity"),
            discrete("Pupils", Concise, &["0", "1", "2"], &[0.809, 0.076, 0.115], &[0.0, -0.8, -1.8]).category("Clinical severity"),
            discrete("Hypoxia", Concise, &["0", "1"], &[0.866, 0.134], &[0.0, -0.4]).category("Second insults"),
            discrete("Hypotension", Concise, &["0", "1"], &[0.865, 0.135], &[0.0, -0.6]).category("Second insults"),
            discrete("Marshall", Concise, &["1", "2", "3", "4", "5"], &[0.094, 0.472, 0.086, 0.013, 0.335], &[0.6, 0.4, -0.8, -1.0, -0.6])
                .category("Brain imaging"),
            discrete("tSAH", Concise, &["0", "1"], &[0.237, 0.763], &[0.0, -0.6]).category("Brain imaging"),
            discrete("EDH", Concise, &["0", "1"], &[0.806, 0.194], &[0.0, 0.4]).category("Brain imaging"),
            continuous("Glucose", Concise, 8.0, 2.5, 2.0, 30.0, -0.4).category("Labs"),
            continuous("Hb", Concise, 13.0, 2.0, 5.0, 19.0, 0.3).category("Labs"),
        ];
        let s = signal_effect;
        for i in 0..signal {
            let tier = if i < signal.div_ceil(2) { Extended } else { All };
            p.push(
                discrete(&format!("Sig{}", i + 1), tier, &["a", "b", "c", "d"], &[0.25; 4], &[-s, -s / 3.0, s / 3.0, s])
                    .category("Signal"),
            );
        }
        for i in 0..4 {
            p.push(discrete(&format!("Noise{}", i + 1), All, &["x", "y", "z"], &[0.5, 0.3, 0.2], &[0.0; 3]).category("Noise"));
        }
        p.push(continuous("Lab1", All, 100.0, 15.0, 40.0, 160.0, 0.0).category("Noise"));
        p.push(continuous("Lab2", All, 1.0, 0.3, 0.1, 3.0, 0.0).category("Noise"));
        let mut mech = discrete(
            "Mechanism",
            All,
            &["Road traffic collision", "Fall from height", "Assault", "Other"],
            &[0.4, 0.35, 0.15, 0.1],
            &[0.0, -0.1, 0.0, 0.1],
        )
        .category("Injury");
        mech.spec.kind = PredictorKind::Text;
        mech.spec.levels.clear();
        p.push(mech);

        let mcar = |c: &str, r: f64| MissingSpec { column: c.into(), rate: r, driver: None };
        let mut missing = vec![
            mcar("GCSm", 0.03),
            mcar("Pupils", 0.05),
            mcar("Marshall", 0.19),
            mcar("tSAH", 0.19),
            mcar("EDH", 0.19),
            MissingSpec { column: "Glucose".into(), rate: 0.31, driver: Some("Age".into()) },
            mcar("Hb", 0.26),
        ];
        for i in 0..signal {
            missing.push(mcar(&format!("Sig{}", i + 1), 0.1));
        }
        missing.push(mcar("Lab1", 0.3));
        CohortSpec { n, seed, predictors: p, beta_scale: 1.0, thresholds: thresholds_from_counts(&REFERENCE_COUNTS), missing }
    }

    pub fn validate(&self) -> Result<()> {
        self.schema()?;
        for p in &self.predictors {
            p.generator.validate(&p.spec.name)?;
        }
        if self.thresholds.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidSpec("thresholds must be non-decreasing".into()));
        }
        for m in &self.missing {
            if !(0.0..1.0).contains(&m.rate) {
                return Err(Error::InvalidSpec(format!("missingness rate {} for {} outside [0,1)", m.rate, m.column)));
            }
            for c in std::iter::once(&m.column).chain(&m.driver) {
                if !self.predictors.iter().any(|p| &p.spec.name == c) {
                    return Err(Error::InvalidSpec(format!("missingness refers to unknown column {c}")));
                }
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<Schema> {
        Schema::new(self.predictors.iter().map(|p| p.spec.clone()).collect())
    }

    pub fn without_missingness(mut self) -> Self {
        self.missing.clear();
        self
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

trait WithCategory {
    fn category(self, c: &str) -> Self;
}

impl WithCategory for SyntheticPredictor {
    fn category(mut self, c: &str) -> Self {
        self.spec = self.spec.with_category(c);
        self
    }
}

fn contribution(p: &SyntheticPredictor, value: &Value) -> Result<f64> {
    match &p.generator {
        Generator::Continuous { mean, sd, slope, .. } => {
            let x = value.as_f64().ok_or_else(|| Error::Invalid(format!("{} expects a number", p.spec.name)))?;
            Ok(slope * (x - mean) / sd)
        }
        Generator::Discrete { levels, effects, .. } => {
            let s = value.as_str().ok_or_else(|| Error::Invalid(format!("{} expects a level", p.spec.name)))?;
            let k = levels.iter().position(|l| l == s).ok_or_else(|| Error::UnknownCategory {
                predictor: p.spec.name.clone(),
                value: s.to_string(),
            })?;
            Ok(effects[k] - p.generator.effect_centre())
        }
    }
}

/// Latent score x·β of a complete record.
pub fn linear_predictor(spec: &CohortSpec, record: &PatientRecord) -> Result<f64> {
    if record.values.len() != spec.predictors.len() {
        return Err(Error::DimensionMismatch { expected: spec.predictors.len(), got: record.values.len() });
    }
    let mut eta = 0.0;
    for (p, v) in spec.predictors.iter().zip(&record.values) {
        let v = v.as_ref().ok_or_else(|| Error::Invalid(format!("{} is missing", p.spec.name)))?;
        eta += contribution(p, v)?;
    }
    Ok(spec.beta_scale * eta)
}

/// Pr(y > t | x) = σ(x·β − θ_t) under the generating model.
pub fn oracle_profile(spec: &CohortSpec, record: &PatientRecord) -> Result<ThresholdProfile> {
    let eta = linear_predictor(spec, record)?;
    let mut q = [0.0; N_THRESHOLDS];
    for (qt, th) in q.iter_mut().zip(spec.thresholds) {
        *qt = sigmoid(eta - th);
    }
    Ok(ThresholdProfile { q })
}

pub struct SyntheticCohort {
    /// With missingness applied.
    pub table: CohortTable,
    pub complete: CohortTable,
    pub latent: Vec<f64>,
}

fn draw_value<R: Rng>(p: &SyntheticPredictor, r: &mut R) -> Value {
    match &p.generator {
        Generator::Continuous { mean, sd, min, max, .. } => {
            let x: f64 = Normal::new(*mean, *sd).unwrap().sample(r);
            // two decimals keeps CSV output short and exactly re-readable
            Value::Continuous((x.clamp(*min, *max) * 100.0).round() / 100.0)
        }
        Generator::Discrete { levels, probs, .. } => {
            let u: f64 = r.random();
            let mut acc = 0.0;
            let mut k = levels.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    k = i;
                    break;
                }
            }
            match p.spec.kind {
                PredictorKind::Text => Value::Text(levels[k].clone()),
                _ => Value::Categorical(levels[k].clone()),
            }
        }
    }
}

pub fn generate_cohort(spec: &CohortSpec) -> Result<SyntheticCohort> {
    spec.validate()?;
    let schema = spec.schema()?;
    let width = spec.n.max(1).to_string().len();
    let mut records = Vec::with_capacity(spec.n);
    let mut latent = Vec::with_capacity(spec.n);
    let mut outcomes = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let mut r = rng::stream(spec.seed, &[rng::label("patient"), i as u64]);
        let values: Vec<Option<Value>> = spec.predictors.iter().map(|p| Some(draw_value(p, &mut r))).collect();
        let record = PatientRecord { id: format!("P{:0width$}", i + 1), values };
        let eta = linear_predictor(spec, &record)?;
        let u: f64 = r.random_range(f64::EPSILON..1.0);
        let y = eta + (u / (1.0 - u)).ln();
        let k = spec.thresholds.iter().filter(|&&th| y > th).count();
        records.push(record);
        latent.push(eta);
        outcomes.push(Category::new(k)?);
    }
    let complete = CohortTable::new(schema, records, outcomes)?;
    let mut table = complete.clone();

    for m in &spec.missing {
        let col = table.schema.position(&m.column).unwrap();
        let driver = match &m.driver {
            Some(d) => {
                let j = table.schema.position(d).unwrap();
                let x: Vec<f64> = complete.records.iter().map(|rec| driver_value(&spec.predictors[j], rec.values[j].as_ref())).collect();
                let mean = x.iter().sum::<f64>() / x.len().max(1) as f64;
                let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len().max(1) as f64).sqrt();
                Some(x.into_iter().map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 }).collect::<Vec<_>>())
            }
            None => None,
        };
        if m.rate == 0.0 {
            continue;
        }
        let base = (m.rate / (1.0 - m.rate)).ln();
        for (i, rec) in table.records.iter_mut().enumerate() {
            let mut r = rng::stream(spec.seed, &[rng::label("missing"), rng::label(&m.column), i as u64]);
            let p = match &driver {
                Some(z) => sigmoid(base + z[i]),
                None => m.rate,
            };
            if r.random::<f64>() < p {
                rec.values[col] = None;
            }
        }
    }
    Ok(SyntheticCohort { table, complete, latent })
}

fn driver_value(p: &SyntheticPredictor, v: Option<&Value>) -> f64 {
    match (v, &p.generator) {
        (Some(Value::Continuous(x)), _) => *x,
        (Some(val), Generator::Discrete { levels, .. }) => {
            val.as_str().and_then(|s| levels.iter().position(|l| l == s)).unwrap_or(0) as f64
        }
        _ => 0.0,
    }
}
