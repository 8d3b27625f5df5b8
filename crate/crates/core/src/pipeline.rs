//! End-to-end cross-validated evaluation of model families on a cohort:
//! partition, impute or tokenise, train, pool out-of-fold predictions,
//! drop configurations, select with bias correction, report.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{CohortTable, PredictorKind, PredictorSet, Schema};
use crate::error::{Error, Result};
use crate::metrics::{lowess_curve, CalibrationCurve, LowessOptions, MetricReport};
use crate::models::linear::{train_mnlr, train_polr};
use crate::models::network::{train_apm, train_deep};
use crate::models::{Input, LinearOptions, ModelEnvelope, ModelKind, Prediction, TrainedModel};
use crate::outcome::{Category, Threshold};
use crate::preprocess::{apply_pmm, fit_pmm, FeatureEncoder, ImputationModel, PmmConfig};
use crate::rng;
use crate::tokenizer::{encode_patient, TokenDictionary, Tokenizer, DEFAULT_BINS};
use crate::validation::{
    assign_validation, bbc_select_by, bbcd_dropout, bootstrap_ci, build_grid, stratified_repeated_kfold,
    stratified_shuffle_split, GridPoint, GridProfile, Metric, PartitionPlan, PredictionPool,
};

/// A model kind trained on one predictor set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Family {
    pub kind: ModelKind,
    pub set: PredictorSet,
}

impl Family {
    /// `mnlr`, `cpm_polr`, `ecpm_deep_or`, `apm_mn`, ...
    pub fn parse(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (set, rest) = if let Some(r) = lower.strip_prefix("ecpm_") {
            (Some(PredictorSet::Extended), r)
        } else if let Some(r) = lower.strip_prefix("cpm_") {
            (Some(PredictorSet::Concise), r)
        } else {
            (None, lower.as_str())
        };
        let kind = match rest {
            "mnlr" => ModelKind::Mnlr,
            "polr" => ModelKind::Polr,
            "deep_mn" | "deepmn" => ModelKind::DeepMn,
            "deep_or" | "deepor" => ModelKind::DeepOr,
            "apm_mn" => ModelKind::ApmMn,
            "apm_or" => ModelKind::ApmOr,
            _ => return Err(Error::InvalidSpec(format!("unknown model family '{s}'"))),
        };
        let set = match (kind.is_token_model(), set) {
            (true, None) => PredictorSet::All,
            (true, Some(_)) => return Err(Error::InvalidSpec(format!("'{s}': token models always use every predictor"))),
            (false, s) => s.unwrap_or(PredictorSet::Concise),
        };
        Ok(Family { kind, set })
    }

    pub fn name(&self) -> String {
        match self.set {
            _ if self.kind.is_token_model() => self.kind.name().to_string(),
            PredictorSet::Concise => format!("CPM_{}", self.kind),
            PredictorSet::Extended => format!("eCPM_{}", self.kind),
            PredictorSet::All => format!("ALL_{}", self.kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub repeats: usize,
    pub folds: usize,
    pub val_frac: f64,
    pub boot: usize,
    pub alpha: f64,
    pub grid: GridProfile,
    /// Replaces the profile's grid when set.
    pub configs: Option<Vec<GridPoint>>,
    pub families: Vec<Family>,
    pub jobs: usize,
    /// Repeats after which a dropout round runs.
    pub dropout_after: Vec<usize>,
    pub n_bins: usize,
    pub max_epochs: Option<usize>,
    pub pmm_donors: usize,
    pub pmm_iterations: usize,
    pub final_model: bool,
}

impl RunConfig {
    pub fn new(families: Vec<Family>) -> Self {
        RunConfig {
            seed: 0,
            repeats: 20,
            folds: 5,
            val_frac: 0.15,
            boot: 1000,
            alpha: 0.05,
            grid: GridProfile::Desk,
            configs: None,
            families,
            jobs: 1,
            dropout_after: Vec::new(),
            n_bins: DEFAULT_BINS,
            max_epochs: None,
            pmm_donors: 5,
            pmm_iterations: 10,
            final_model: true,
        }
    }

    /// Dropout after repeats 1, 2, 4, 8, ... below the last repeat.
    pub fn default_schedule(repeats: usize) -> Vec<usize> {
        std::iter::successors(Some(1usize), |r| Some(r * 2)).take_while(|&r| r < repeats).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::InvalidSpec("no model families requested".into()));
        }
        if self.repeats == 0 || self.folds < 2 {
            return Err(Error::InvalidSpec("need ≥1 repeat and ≥2 folds".into()));
        }
        if !(self.val_frac > 0.0 && self.val_frac < 1.0) {
            return Err(Error::InvalidSpec(format!("validation fraction {} outside (0,1)", self.val_frac)));
        }
        if self.boot == 0 {
            return Err(Error::InvalidSpec("need ≥1 bootstrap resample".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidSpec(format!("alpha {} outside [0,1]", self.alpha)));
        }
        if self.jobs == 0 || self.n_bins == 0 {
            return Err(Error::InvalidSpec("jobs and bins must be positive".into()));
        }
        if matches!(&self.configs, Some(c) if c.is_empty()) {
            return Err(Error::InvalidSpec("empty configuration list".into()));
        }
        Ok(())
    }

    fn grid_points(&self) -> Vec<GridPoint> {
        self.configs.clone().unwrap_or_else(|| build_grid(self.grid))
    }

    fn pmm(&self, seed: u64) -> PmmConfig {
        PmmConfig { donors: self.pmm_donors, iterations: self.pmm_iterations, seed }
    }
}

// ------------------------------------------------------------ preprocessing

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Preprocessing {
    Features { set: PredictorSet, imputer: ImputationModel, encoder: FeatureEncoder },
    Tokens { set: PredictorSet, tokenizer: Tokenizer, dictionary: TokenDictionary },
}

enum Design {
    Features(Vec<Vec<f64>>),
    Tokens(Vec<Vec<u32>>, usize),
}

impl Design {
    fn input(&self, row: usize) -> Input<'_> {
        match self {
            Design::Features(x) => Input::Features(&x[row]),
            Design::Tokens(t, _) => Input::Tokens(&t[row]),
        }
    }
}

fn feature_columns(schema: &Schema, set: PredictorSet) -> Vec<usize> {
    schema.columns(set).into_iter().filter(|&c| schema.predictors[c].kind != PredictorKind::Text).collect()
}

/// Fits preprocessing on `fit_rows` and transforms every row of the table.
fn prepare(table: &CohortTable, fit_rows: &[usize], family: Family, cfg: &RunConfig, seed: u64) -> Result<(Preprocessing, Design)> {
    let all: Vec<usize> = (0..table.len()).collect();
    if family.kind.is_token_model() {
        let cols = table.schema.columns(family.set);
        let tokenizer = Tokenizer::fit(table, fit_rows, &cols, cfg.n_bins)?;
        let toks: Vec<Vec<String>> = table.records.iter().map(|r| tokenizer.tokens(&table.schema, r)).collect();
        let dictionary = TokenDictionary::fit(fit_rows.iter().map(|&r| &toks[r]))?;
        let rows = table
            .records
            .iter()
            .zip(&toks)
            .map(|(r, t)| encode_patient(&r.id, t, &dictionary).indices)
            .collect();
        let vocab = dictionary.len();
        Ok((Preprocessing::Tokens { set: family.set, tokenizer, dictionary }, Design::Tokens(rows, vocab)))
    } else {
        let cols = feature_columns(&table.schema, family.set);
        let imputer = fit_pmm(table, fit_rows, &cols, cfg.pmm(rng::derive_seed(seed, &[rng::label("pmm")])))?;
        let mut r = rng::stream(seed, &[rng::label("pmm-apply")]);
        let complete = apply_pmm(&imputer, table, &all, &mut r)?;
        let encoder = FeatureEncoder::fit(&complete, fit_rows, &cols)?;
        let x = encoder.encode_rows(&complete, &all)?;
        Ok((Preprocessing::Features { set: family.set, imputer, encoder }, Design::Features(x)))
    }
}

// ------------------------------------------------------------ training

fn train_one(
    family: Family,
    point: Option<&GridPoint>,
    design: &Design,
    labels: &[Category],
    train: &[usize],
    val: &[usize],
    cfg: &RunConfig,
    seed: u64,
) -> Result<TrainedModel> {
    let y: Vec<Category> = train.iter().map(|&r| labels[r]).collect();
    let y_val: Vec<Category> = val.iter().map(|&r| labels[r]).collect();
    match (family.kind, design) {
        (ModelKind::Mnlr | ModelKind::Polr, Design::Features(x)) => {
            let xs: Vec<Vec<f64>> = train.iter().chain(val).map(|&r| x[r].clone()).collect();
            let ys: Vec<Category> = y.iter().chain(&y_val).copied().collect();
            Ok(if family.kind == ModelKind::Mnlr {
                TrainedModel::Mnlr(train_mnlr(&xs, &ys, LinearOptions::default())?)
            } else {
                TrainedModel::Polr(train_polr(&xs, &ys, LinearOptions::default())?)
            })
        }
        (kind, design) => {
            let point = point.ok_or_else(|| Error::Invalid(format!("{kind} needs a configuration")))?;
            let mut mc = point.config(kind.encoding(), seed);
            if let Some(e) = cfg.max_epochs {
                mc.max_epochs = e;
            }
            match design {
                Design::Features(x) => {
                    let xs: Vec<Vec<f64>> = train.iter().map(|&r| x[r].clone()).collect();
                    let xv: Vec<Vec<f64>> = val.iter().map(|&r| x[r].clone()).collect();
                    Ok(TrainedModel::Neural(train_deep(&xs, &y, &xv, &y_val, &mc)?))
                }
                Design::Tokens(t, vocab) => {
                    let ts: Vec<Vec<u32>> = train.iter().map(|&r| t[r].clone()).collect();
                    let tv: Vec<Vec<u32>> = val.iter().map(|&r| t[r].clone()).collect();
                    Ok(TrainedModel::Neural(train_apm(&ts, &y, &tv, &y_val, *vocab, &mc)?))
                }
            }
        }
    }
}

fn predict_rows(model: &TrainedModel, design: &Design, rows: &[usize]) -> Result<Vec<Prediction>> {
    rows.iter().map(|&r| model.predict(design.input(r))).collect()
}

// ------------------------------------------------------------ results

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub family: String,
    pub repeat: usize,
    pub fold: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutRound {
    pub after_repeat: usize,
    pub before: usize,
    pub optimum: String,
    pub survivors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMetrics {
    pub family: String,
    pub chosen_config: String,
    pub n_configs: usize,
    pub final_configs: Vec<String>,
    pub bias_corrected: bool,
    pub reports: Vec<MetricReport>,
    pub skipped_resamples: usize,
    pub dropout_rounds: Vec<DropoutRound>,
}

impl FamilyMetrics {
    pub fn report(&self, metric: &str, threshold: Option<&str>) -> Option<&MetricReport> {
        self.reports.iter().find(|r| r.metric == metric && r.threshold.as_deref() == threshold)
    }
}

/// Final model plus everything needed to score a raw cohort row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub family: String,
    pub config_id: String,
    pub schema: Schema,
    pub preprocessing: Preprocessing,
    pub model: ModelEnvelope,
}

impl ModelArtifact {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn trained(&self) -> Result<TrainedModel> {
        TrainedModel::from_envelope(&self.model)
    }

    /// Token indices of one row; None for feature models.
    pub fn token_indices(&self, table: &CohortTable, row: usize) -> Option<(Vec<String>, Vec<u32>)> {
        match &self.preprocessing {
            Preprocessing::Tokens { tokenizer, dictionary, .. } => {
                let rec = &table.records[row];
                let mut toks = tokenizer.tokens(&table.schema, rec);
                let idx = encode_patient(&rec.id, &toks, dictionary).indices;
                toks.sort();
                toks.dedup();
                Some((toks, idx))
            }
            Preprocessing::Features { .. } => None,
        }
    }

    /// Imputes (when needed) and predicts one row of `table`.
    pub fn predict_row(&self, table: &CohortTable, row: usize, seed: u64) -> Result<Prediction> {
        if table.schema != self.schema {
            return Err(Error::InvalidSpec("cohort schema differs from the model's".into()));
        }
        let model = self.trained()?;
        match &self.preprocessing {
            Preprocessing::Tokens { .. } => {
                let (_, idx) = self.token_indices(table, row).expect("token preprocessing");
                model.predict(Input::Tokens(&idx))
            }
            Preprocessing::Features { imputer, encoder, .. } => {
                let mut r = rng::stream(seed, &[rng::label("pmm-apply")]);
                let complete = apply_pmm(imputer, table, &[row], &mut r)?;
                let x = encoder.encode(&complete.schema, &complete.records[0])?;
                model.predict(Input::Features(&x))
            }
        }
    }
}

pub struct FamilyOutcome {
    pub family: Family,
    pub metrics: FamilyMetrics,
    pub test_pools: Vec<(String, PredictionPool)>,
    pub val_pools: Vec<(String, PredictionPool)>,
    pub curves: Vec<CalibrationCurve>,
    pub artifact: Option<ModelArtifact>,
}

pub struct RunOutput {
    pub plans: Vec<PartitionPlan>,
    pub families: Vec<FamilyOutcome>,
    pub failures: Vec<Failure>,
}

impl RunOutput {
    pub fn family(&self, name: &str) -> Option<&FamilyOutcome> {
        self.families.iter().find(|f| f.metrics.family == name)
    }
}

// ------------------------------------------------------------ driver

pub fn run(table: &CohortTable, cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(table, cfg))
}

fn run_inner(table: &CohortTable, cfg: &RunConfig) -> Result<RunOutput> {
    let labels = &table.outcomes;
    let mut plans = stratified_repeated_kfold(labels, cfg.repeats, cfg.folds, rng::derive_seed(cfg.seed, &[rng::label("partitions")]))?;
    assign_validation(&mut plans, labels, cfg.val_frac, rng::derive_seed(cfg.seed, &[rng::label("validation")]))?;
    let mut failures = Vec::new();
    let mut families = Vec::new();
    for (fi, &family) in cfg.families.iter().enumerate() {
        let out = run_family(table, cfg, &plans, fi, family, &mut failures)?;
        families.push(out);
    }
    Ok(RunOutput { plans, families, failures })
}

fn run_family(
    table: &CohortTable,
    cfg: &RunConfig,
    plans: &[PartitionPlan],
    fi: usize,
    family: Family,
    failures: &mut Vec<Failure>,
) -> Result<FamilyOutcome> {
    let name = family.name();
    let labels = &table.outcomes;
    let ids: Vec<String> = table.records.iter().map(|r| r.id.clone()).collect();
    let points: Vec<Option<GridPoint>> =
        if family.kind.is_tuned() { cfg.grid_points().into_iter().map(Some).collect() } else { vec![None] };
    let config_ids: Vec<String> = points.iter().map(|p| p.as_ref().map_or_else(|| "default".to_string(), GridPoint::id)).collect();
    let mut test_pools: Vec<PredictionPool> = points.iter().map(|_| PredictionPool::new(ids.clone(), labels.clone())).collect();
    let mut val_pools = test_pools.clone();
    let mut active: Vec<usize> = (0..points.len()).collect();
    let mut rounds = Vec::new();
    let fam_seed = rng::derive_seed(cfg.seed, &[rng::label("family"), fi as u64]);

    for r in 1..=cfg.repeats {
        let rplans: Vec<&PartitionPlan> = plans.iter().filter(|p| p.repeat == r).collect();
        let designs: Vec<Result<Design>> = rplans
            .par_iter()
            .map(|p| {
                let fit: Vec<usize> = p.train.iter().chain(&p.validation).copied().collect();
                let s = rng::derive_seed(cfg.seed, &[rng::label("prep"), p.repeat as u64, p.fold as u64]);
                prepare(table, &fit, family, cfg, s).map(|(_, d)| d)
            })
            .collect();
        let tasks: Vec<(usize, usize)> =
            (0..rplans.len()).filter(|&pi| designs[pi].is_ok()).flat_map(|pi| active.iter().map(move |&c| (pi, c))).collect();
        for (pi, d) in designs.iter().enumerate() {
            if let Err(e) = d {
                failures.push(Failure { family: name.clone(), repeat: r, fold: rplans[pi].fold, config: None, message: e.to_string() });
            }
        }
        let results: Vec<Result<(Vec<Prediction>, Vec<Prediction>)>> = tasks
            .par_iter()
            .map(|&(pi, c)| {
                let p = rplans[pi];
                let design = designs[pi].as_ref().expect("filtered");
                let seed = rng::derive_seed(fam_seed, &[p.repeat as u64, p.fold as u64, c as u64]);
                let m = train_one(family, points[c].as_ref(), design, labels, &p.train, &p.validation, cfg, seed)?;
                let test = predict_rows(&m, design, &p.test)?;
                let val = if family.kind.is_tuned() { predict_rows(&m, design, &p.validation)? } else { Vec::new() };
                Ok((test, val))
            })
            .collect();
        for (&(pi, c), res) in tasks.iter().zip(results) {
            let p = rplans[pi];
            match res {
                Ok((test, val)) => {
                    for (&row, pr) in p.test.iter().zip(test) {
                        test_pools[c].add(row, r, pr.profile);
                    }
                    for (&row, pr) in p.validation.iter().zip(val) {
                        val_pools[c].add(row, r, pr.profile);
                    }
                }
                Err(e) => failures.push(Failure {
                    family: name.clone(),
                    repeat: r,
                    fold: p.fold,
                    config: points[c].as_ref().map(GridPoint::id),
                    message: e.to_string(),
                }),
            }
        }
        if family.kind.is_tuned() && cfg.dropout_after.contains(&r) && active.len() > 1 {
            let pools: Vec<PredictionPool> = active.iter().map(|&c| val_pools[c].clone()).collect();
            let seed = rng::derive_seed(fam_seed, &[rng::label("bbcd"), r as u64]);
            match bbcd_dropout(&pools, cfg.alpha, cfg.boot, seed) {
                Ok(d) => {
                    let before = active.len();
                    let optimum = config_ids[active[d.optimum]].clone();
                    active = d.survivors.iter().map(|&i| active[i]).collect();
                    eprintln!("[{name}] dropout after repeat {r}: {before} -> {} configurations", active.len());
                    rounds.push(DropoutRound {
                        after_repeat: r,
                        before,
                        optimum,
                        survivors: active.iter().map(|&c| config_ids[c].clone()).collect(),
                    });
                }
                Err(e) => eprintln!("[{name}] dropout after repeat {r} skipped: {e}"),
            }
        }
    }

    // Configurations without a complete test pool cannot compete.
    let complete: Vec<usize> = active.iter().copied().filter(|&c| test_pools[c].covered().len() == table.len()).collect();
    let finalists = if complete.is_empty() {
        active.iter().copied().filter(|&c| test_pools[c].n_predictions() > 0).collect()
    } else {
        complete
    };
    if finalists.is_empty() {
        return Err(Error::Invalid(format!("{name}: every training task failed")));
    }
    let pools: Vec<PredictionPool> = finalists.iter().map(|&c| test_pools[c].clone()).collect();
    let bias_corrected = pools.len() > 1;
    let mut reports = Vec::new();
    let mut chosen = 0;
    let mut skipped = 0;
    for (mi, metric) in Metric::all().into_iter().enumerate() {
        let seed = rng::derive_seed(fam_seed, &[rng::label("bbc"), mi as u64]);
        let res = if bias_corrected {
            bbc_select_by(&pools, Metric::Orc, metric, cfg.boot, seed).map(|b| {
                chosen = b.chosen;
                skipped = skipped.max(b.skipped_resamples);
                b.report
            })
        } else {
            bootstrap_ci(&pools[0], metric, cfg.boot, seed)
        };
        match res {
            Ok(rep) => reports.push(rep),
            Err(e) => eprintln!("[{name}] {} undefined: {e}", metric.name()),
        }
    }
    let best = finalists[chosen];
    let curves = Threshold::all()
        .filter_map(|t| lowess_curve(&test_pools[best].prediction_set(), t, LowessOptions::default()).ok())
        .collect();
    let artifact = if cfg.final_model {
        match final_model(table, cfg, family, points[best].as_ref(), &config_ids[best], fam_seed) {
            Ok(a) => Some(a),
            Err(e) => {
                failures.push(Failure { family: name.clone(), repeat: 0, fold: 0, config: points[best].as_ref().map(GridPoint::id), message: e.to_string() });
                None
            }
        }
    } else {
        None
    };
    let keep = |pools: &[PredictionPool]| -> Vec<(String, PredictionPool)> {
        (0..pools.len()).filter(|&c| pools[c].n_predictions() > 0).map(|c| (config_ids[c].clone(), pools[c].clone())).collect()
    };
    let metrics = FamilyMetrics {
        family: name,
        chosen_config: config_ids[best].clone(),
        n_configs: points.len(),
        final_configs: finalists.iter().map(|&c| config_ids[c].clone()).collect(),
        bias_corrected,
        reports,
        skipped_resamples: skipped,
        dropout_rounds: rounds,
    };
    Ok(FamilyOutcome {
        family,
        metrics,
        test_pools: keep(&test_pools),
        val_pools: if family.kind.is_tuned() { keep(&val_pools) } else { Vec::new() },
        curves,
        artifact,
    })
}

/// Refits the chosen configuration on the whole cohort.
fn final_model(
    table: &CohortTable,
    cfg: &RunConfig,
    family: Family,
    point: Option<&GridPoint>,
    config_id: &str,
    seed: u64,
) -> Result<ModelArtifact> {
    let all: Vec<usize> = (0..table.len()).collect();
    let (preprocessing, design) = prepare(table, &all, family, cfg, rng::derive_seed(seed, &[rng::label("final")]))?;
    let (train, val) = if family.kind.is_tuned() {
        stratified_shuffle_split(&all, &table.outcomes, cfg.val_frac, rng::derive_seed(seed, &[rng::label("final-split")]))?
    } else {
        (all, Vec::new())
    };
    let model = train_one(family, point, &design, &table.outcomes, &train, &val, cfg, rng::derive_seed(seed, &[rng::label("final-train")]))?;
    let scale = match family.set {
        PredictorSet::Concise => "concise",
        PredictorSet::Extended => "extended",
        PredictorSet::All => "all",
    };
    Ok(ModelArtifact {
        family: family.name(),
        config_id: config_id.to_string(),
        schema: table.schema.clone(),
        preprocessing,
        model: model.envelope(scale),
    })
}

// ------------------------------------------------------------ files

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub n_patients: usize,
    pub n_partitions: usize,
    pub config: RunConfig,
    pub families: BTreeMap<String, FamilySummary>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilySummary {
    pub chosen_config: String,
    pub n_configs: usize,
    pub survivors_per_round: Vec<usize>,
}

fn threshold_slug(t: Threshold) -> String {
    format!("gt{}", &t.label()[1..])
}

/// Writes the run directory. Layout:
/// `manifest.json`, `plans.json`, `summary.csv`, and per family
/// `pooled_predictions.csv`, `validation_predictions.csv`, `metrics.json`,
/// `calibration_gt{t}.csv`, `model.json`.
pub fn write_outputs(out: &Path, table: &CohortTable, cfg: &RunConfig, res: &RunOutput) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("plans.json"), serde_json::to_string(&res.plans)?)?;
    let mut summary = csv::Writer::from_path(out.join("summary.csv"))?;
    summary.write_record(["family", "config_id", "metric", "threshold", "estimate", "ci_low", "ci_high", "n_resamples"])?;
    let mut fams = BTreeMap::new();
    for f in &res.families {
        let m = &f.metrics;
        let dir = out.join(&m.family);
        fs::create_dir_all(&dir)?;
        for (file, pools) in [("pooled_predictions.csv", &f.test_pools), ("validation_predictions.csv", &f.val_pools)] {
            if pools.is_empty() {
                continue;
            }
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(file))?));
            w.write_record(PredictionPool::csv_header())?;
            for (id, p) in pools {
                p.write_csv(id, &mut w)?;
            }
            w.flush()?;
        }
        fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(m)?)?;
        for c in &f.curves {
            c.to_csv(BufWriter::new(File::create(dir.join(format!("calibration_{}.csv", threshold_slug(c.threshold))))?))?;
        }
        if let Some(a) = &f.artifact {
            a.save(&dir.join("model.json"))?;
        }
        for r in &m.reports {
            summary.write_record([
                m.family.clone(),
                m.chosen_config.clone(),
                r.metric.clone(),
                r.threshold.clone().unwrap_or_default(),
                r.estimate.to_string(),
                r.ci_low.to_string(),
                r.ci_high.to_string(),
                r.n_resamples.to_string(),
            ])?;
        }
        fams.insert(
            m.family.clone(),
            FamilySummary {
                chosen_config: m.chosen_config.clone(),
                n_configs: m.n_configs,
                survivors_per_round: m.dropout_rounds.iter().map(|d| d.survivors.len()).collect(),
            },
        );
    }
    summary.flush()?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        n_patients: table.len(),
        n_partitions: res.plans.len(),
        config: cfg.clone(),
        families: fams,
        failures: res.failures.clone(),
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
