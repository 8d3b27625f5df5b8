//! Concise-predictor pipeline: stochastic predictive mean matching (PMM)
//! imputation by chained equations, one-hot encoding and standardisation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::cohort::{CohortTable, PredictorKind, PredictorSpec, Value};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmmConfig {
    pub donors: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for PmmConfig {
    fn default() -> Self {
        PmmConfig { donors: 5, iterations: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ColumnKind {
    Continuous,
    Categorical(Vec<String>),
}

impl ColumnKind {
    fn width(&self) -> usize {
        match self {
            ColumnKind::Continuous => 1,
            ColumnKind::Categorical(levels) => levels.len(),
        }
    }
}

/// Levels of a categorical predictor: declared levels, or the sorted
/// distinct training values when none are declared.
pub fn resolve_levels(table: &CohortTable, rows: &[usize], col: usize) -> Vec<String> {
    let spec = &table.schema.predictors[col];
    if !spec.levels.is_empty() {
        return spec.levels.clone();
    }
    let mut levels: Vec<String> = rows
        .iter()
        .filter_map(|&r| table.records[r].values[col].as_ref().and_then(|v| v.as_str()))
        .map(str::to_string)
        .collect();
    levels.sort();
    levels.dedup();
    levels
}

/// Fitted chained-equations PMM model for a set of columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationModel {
    columns: Vec<usize>,
    kinds: Vec<ColumnKind>,
    /// Training mean / sd used to scale continuous regressors.
    centre: Vec<(f64, f64)>,
    /// Per target column: coefficient matrix (regressors × outputs), row-major.
    coefficients: Vec<Vec<f64>>,
    /// Per target column: observed training values and their predicted means.
    donor_values: Vec<Vec<f64>>,
    donor_scores: Vec<Vec<Vec<f64>>>,
    pub config: PmmConfig,
}

type Grid = Vec<Vec<Option<f64>>>;

fn encode_cell(kind: &ColumnKind, spec: &PredictorSpec, v: &Value) -> Result<f64> {
    match (kind, v) {
        (ColumnKind::Continuous, Value::Continuous(x)) => Ok(*x),
        (ColumnKind::Categorical(levels), v) => {
            let s = v.as_str().map(str::to_string).unwrap_or_else(|| format!("{}", v.as_f64().unwrap_or_default()));
            levels
                .iter()
                .position(|l| *l == s)
                .map(|i| i as f64)
                .ok_or(Error::UnknownCategory { predictor: spec.name.clone(), value: s })
        }
        _ => Err(Error::Invalid(format!("unexpected value type in `{}`", spec.name))),
    }
}

impl ImputationModel {
    fn grid(&self, table: &CohortTable, rows: &[usize]) -> Result<Grid> {
        rows.iter()
            .map(|&r| {
                self.columns
                    .iter()
                    .zip(&self.kinds)
                    .map(|(&c, kind)| {
                        table.records[r].values[c]
                            .as_ref()
                            .map(|v| encode_cell(kind, &table.schema.predictors[c], v))
                            .transpose()
                    })
                    .collect()
            })
            .collect()
    }

    fn regressors(&self, row: &[f64], target: usize) -> Vec<f64> {
        let mut x = vec![1.0];
        for (j, kind) in self.kinds.iter().enumerate() {
            if j == target {
                continue;
            }
            match kind {
                ColumnKind::Continuous => {
                    let (m, s) = self.centre[j];
                    x.push(if s > 0.0 { (row[j] - m) / s } else { 0.0 });
                }
                ColumnKind::Categorical(levels) => {
                    for l in 1..levels.len() {
                        x.push(if row[j] as usize == l { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        x
    }

    fn n_regressors(&self, target: usize) -> usize {
        1 + self
            .kinds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != target)
            .map(|(_, k)| match k {
                ColumnKind::Continuous => 1,
                ColumnKind::Categorical(l) => l.len().saturating_sub(1),
            })
            .sum::<usize>()
    }

    fn target_vector(&self, target: usize, value: f64) -> Vec<f64> {
        match &self.kinds[target] {
            ColumnKind::Continuous => vec![value],
            ColumnKind::Categorical(levels) => {
                (0..levels.len()).map(|l| if value as usize == l { 1.0 } else { 0.0 }).collect()
            }
        }
    }

    fn predict_score(&self, target: usize, x: &[f64]) -> Vec<f64> {
        let outputs = self.kinds[target].width();
        let beta = &self.coefficients[target];
        (0..outputs)
            .map(|o| x.iter().enumerate().map(|(i, xi)| xi * beta[i * outputs + o]).sum())
            .collect()
    }

    /// Least-squares fit of column `target` on the others over the rows
    /// where it was observed.
    fn fit_column(&mut self, target: usize, filled: &[Vec<f64>], observed: &[bool]) {
        let p = self.n_regressors(target);
        let outputs = self.kinds[target].width();
        let mut xtx = DMatrix::<f64>::zeros(p, p);
        let mut xty = DMatrix::<f64>::zeros(p, outputs);
        for (row, _) in filled.iter().zip(observed).filter(|(_, o)| **o) {
            let x = DVector::from_vec(self.regressors(row, target));
            let y = self.target_vector(target, row[target]);
            xtx += &x * x.transpose();
            for o in 0..outputs {
                for i in 0..p {
                    xty[(i, o)] += x[i] * y[o];
                }
            }
        }
        for i in 0..p {
            xtx[(i, i)] += 1e-6;
        }
        let beta = xtx
            .cholesky()
            .map(|c| c.solve(&xty))
            .unwrap_or_else(|| DMatrix::zeros(p, outputs));
        let mut flat = vec![0.0; p * outputs];
        for i in 0..p {
            for o in 0..outputs {
                flat[i * outputs + o] = beta[(i, o)];
            }
        }
        self.coefficients[target] = flat;
    }

    fn refresh_donors(&mut self, target: usize, filled: &[Vec<f64>], observed: &[bool]) {
        let mut values = Vec::new();
        let mut scores = Vec::new();
        for (row, _) in filled.iter().zip(observed).filter(|(_, o)| **o) {
            values.push(row[target]);
            scores.push(self.predict_score(target, &self.regressors(row, target)));
        }
        self.donor_values[target] = values;
        self.donor_scores[target] = scores;
    }

    /// Draws a donor value for a cell whose predicted score is `score`.
    fn draw<R: Rng>(&self, target: usize, score: &[f64], rng: &mut R) -> f64 {
        let k = self.config.donors.min(self.donor_values[target].len()).max(1);
        let mut dist: Vec<(f64, usize)> = self.donor_scores[target]
            .iter()
            .enumerate()
            .map(|(i, s)| (s.iter().zip(score).map(|(a, b)| (a - b).powi(2)).sum(), i))
            .collect();
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(k);
        }
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let pick = if k == 1 { dist[0].1 } else { dist.choose(rng).unwrap().1 };
        self.donor_values[target][pick]
    }

    fn initial_fill<R: Rng>(&self, grid: &Grid, rng: &mut R) -> Vec<Vec<f64>> {
        grid.iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| v.unwrap_or_else(|| *self.donor_values[j].choose(rng).unwrap()))
                    .collect()
            })
            .collect()
    }

    fn sweep<R: Rng>(&self, grid: &Grid, filled: &mut [Vec<f64>], rng: &mut R) {
        for j in 0..self.columns.len() {
            for (row, cells) in filled.iter_mut().zip(grid) {
                if cells[j].is_none() {
                    let score = self.predict_score(j, &self.regressors(row, j));
                    row[j] = self.draw(j, &score, rng);
                }
            }
        }
    }

    fn write_back(&self, table: &CohortTable, rows: &[usize], filled: &[Vec<f64>]) -> CohortTable {
        let mut out = table.subset(rows);
        for (rec, vals) in out.records.iter_mut().zip(filled) {
            for ((&c, kind), &v) in self.columns.iter().zip(&self.kinds).zip(vals) {
                if rec.values[c].is_none() {
                    rec.values[c] = Some(match kind {
                        ColumnKind::Continuous => Value::Continuous(v),
                        ColumnKind::Categorical(levels) => Value::Categorical(levels[v as usize].clone()),
                    });
                }
            }
        }
        out
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }
}

/// Fits chained-equations PMM on `train_rows` over `columns`.
pub fn fit_pmm(table: &CohortTable, train_rows: &[usize], columns: &[usize], config: PmmConfig) -> Result<ImputationModel> {
    let mut kinds = Vec::new();
    for &c in columns {
        let spec = &table.schema.predictors[c];
        kinds.push(match spec.kind {
            PredictorKind::Continuous => ColumnKind::Continuous,
            PredictorKind::Categorical => ColumnKind::Categorical(resolve_levels(table, train_rows, c)),
            PredictorKind::Text => {
                return Err(Error::Invalid(format!("text predictor `{}` cannot be imputed", spec.name)))
            }
        });
    }
    let mut model = ImputationModel {
        columns: columns.to_vec(),
        centre: vec![(0.0, 1.0); columns.len()],
        coefficients: vec![Vec::new(); columns.len()],
        donor_values: vec![Vec::new(); columns.len()],
        donor_scores: vec![Vec::new(); columns.len()],
        kinds,
        config,
    };
    let grid = model.grid(table, train_rows)?;
    for (j, &c) in columns.iter().enumerate() {
        let observed: Vec<f64> = grid.iter().filter_map(|r| r[j]).collect();
        if observed.len() < config.donors.max(1) {
            return Err(Error::InsufficientDonors(table.schema.predictors[c].name.clone()));
        }
        let n = observed.len() as f64;
        let mean = observed.iter().sum::<f64>() / n;
        let sd = (observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        model.centre[j] = (mean, sd);
        model.donor_values[j] = observed;
    }

    let mut rng = rng::stream(config.seed, &[rng::label("pmm-fit")]);
    let mut filled = model.initial_fill(&grid, &mut rng);
    let masks: Vec<Vec<bool>> = (0..columns.len())
        .map(|j| grid.iter().map(|r| r[j].is_some()).collect())
        .collect();
    let any_missing = masks.iter().any(|m| m.iter().any(|o| !o));
    let sweeps = if any_missing { config.iterations.max(1) } else { 1 };
    for _ in 0..sweeps {
        for j in 0..columns.len() {
            model.fit_column(j, &filled, &masks[j]);
            model.refresh_donors(j, &filled, &masks[j]);
            for (row, cells) in filled.iter_mut().zip(&grid) {
                if cells[j].is_none() {
                    let score = model.predict_score(j, &model.regressors(row, j));
                    row[j] = model.draw(j, &score, &mut rng);
                }
            }
        }
    }
    Ok(model)
}

/// Completes `rows` with donor values; observed cells are untouched.
pub fn apply_pmm<R: Rng>(model: &ImputationModel, table: &CohortTable, rows: &[usize], rng: &mut R) -> Result<CohortTable> {
    let grid = model.grid(table, rows)?;
    let mut filled = model.initial_fill(&grid, rng);
    if grid.iter().any(|r| r.iter().any(Option::is_none)) {
        for _ in 0..model.config.iterations.max(1) {
            model.sweep(&grid, &mut filled, rng);
        }
    }
    Ok(model.write_back(table, rows, &filled))
}

/// `m` independently imputed copies of the whole table, each from its own
/// model fitted on `train_rows`.
pub fn multiply_impute(table: &CohortTable, train_rows: &[usize], columns: &[usize], m: usize, config: PmmConfig) -> Result<Vec<CohortTable>> {
    let all: Vec<usize> = (0..table.len()).collect();
    (0..m)
        .map(|i| {
            let cfg = PmmConfig { seed: rng::derive_seed(config.seed, &[i as u64]), ..config };
            let model = fit_pmm(table, train_rows, columns, cfg)?;
            let mut r = rng::stream(cfg.seed, &[rng::label("pmm-apply")]);
            apply_pmm(&model, table, &all, &mut r)
        })
        .collect()
}

pub fn one_hot(spec: &PredictorSpec, value: &str) -> Result<Vec<f64>> {
    let i = spec.level_index(value).ok_or_else(|| Error::UnknownCategory {
        predictor: spec.name.clone(),
        value: value.to_string(),
    })?;
    let mut v = vec![0.0; spec.levels.len()];
    v[i] = 1.0;
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardScaler {
    /// Population mean and standard deviation of each column.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else { return Err(Error::EmptyTrainingSet) };
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        std.iter_mut().for_each(|s| *s = s.sqrt());
        Ok(StandardScaler { mean, std })
    }

    pub fn standardize(&self, j: usize, x: f64) -> f64 {
        standardize(self.mean[j], self.std[j], x)
    }
}

/// (x − μ)/σ, or 0 for a constant column.
pub fn standardize(mean: f64, std: f64, x: f64) -> f64 {
    if std > 0.0 {
        (x - mean) / std
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Encoded {
    Continuous { col: usize, scaled: usize },
    Categorical { col: usize, levels: Vec<String> },
}

/// Maps complete records to design-matrix rows: continuous columns are
/// standardised on the training rows, categorical columns one-hot encoded
/// with the first level as reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    parts: Vec<Encoded>,
    scaler: StandardScaler,
    names: Vec<String>,
}

impl FeatureEncoder {
    pub fn fit(table: &CohortTable, train_rows: &[usize], columns: &[usize]) -> Result<Self> {
        let mut parts = Vec::new();
        let mut names = Vec::new();
        let mut n_cont = 0;
        for &c in columns {
            let spec = &table.schema.predictors[c];
            match spec.kind {
                PredictorKind::Continuous => {
                    parts.push(Encoded::Continuous { col: c, scaled: n_cont });
                    names.push(spec.name.clone());
                    n_cont += 1;
                }
                PredictorKind::Categorical => {
                    let levels = resolve_levels(table, train_rows, c);
                    for l in levels.iter().skip(1) {
                        names.push(format!("{}={l}", spec.name));
                    }
                    parts.push(Encoded::Categorical { col: c, levels });
                }
                PredictorKind::Text => {
                    return Err(Error::Invalid(format!("text predictor `{}` in design matrix", spec.name)))
                }
            }
        }
        let raw: Vec<Vec<f64>> = train_rows
            .iter()
            .map(|&r| {
                parts
                    .iter()
                    .filter_map(|p| match p {
                        Encoded::Continuous { col, .. } => Some(
                            table.records[r].values[*col].as_ref().and_then(Value::as_f64).ok_or_else(|| {
                                Error::Invalid(format!("missing value in `{}`", table.schema.predictors[*col].name))
                            }),
                        ),
                        _ => None,
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let scaler = if n_cont == 0 {
            StandardScaler { mean: vec![], std: vec![] }
        } else {
            StandardScaler::fit(&raw)?
        };
        Ok(FeatureEncoder { parts, scaler, names })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn encode(&self, schema: &crate::cohort::Schema, record: &crate::cohort::PatientRecord) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(self.dim());
        for p in &self.parts {
            match p {
                Encoded::Continuous { col, scaled } => {
                    let v = record.values[*col].as_ref().and_then(Value::as_f64).ok_or_else(|| {
                        Error::Invalid(format!("missing value in `{}`", schema.predictors[*col].name))
                    })?;
                    x.push(self.scaler.standardize(*scaled, v));
                }
                Encoded::Categorical { col, levels } => {
                    let spec = &schema.predictors[*col];
                    let v = record.values[*col]
                        .as_ref()
                        .and_then(|v| v.as_str())
                        .ok_or_else(|| Error::Invalid(format!("missing value in `{}`", spec.name)))?;
                    let tmp = PredictorSpec { levels: levels.clone(), ..spec.clone() };
                    x.extend(one_hot(&tmp, v)?.into_iter().skip(1));
                }
            }
        }
        Ok(x)
    }

    pub fn encode_rows(&self, table: &CohortTable, rows: &[usize]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|&r| self.encode(&table.schema, &table.records[r])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{PatientRecord, Schema};
    use rand_distr::{Distribution, Normal};

    fn linear_table(n: usize, miss_rate: f64, seed: u64) -> (CohortTable, Vec<f64>) {
        let schema = Schema::new(vec![
            PredictorSpec::new("A", PredictorKind::Continuous),
            PredictorSpec::new("B", PredictorKind::Continuous),
            PredictorSpec::new("C", PredictorKind::Categorical).with_levels(&["x", "y", "z"]),
        ])
        .unwrap();
        let mut r = rng::stream(seed, &[]);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut truth = Vec::new();
        let records = (0..n)
            .map(|i| {
                let a: f64 = normal.sample(&mut r);
                let b = 2.0 + 1.5 * a + 0.5 * normal.sample(&mut r);
                truth.push(b);
                let c = ["x", "y", "z"][r.random_range(0..3)];
                let b_cell = if r.random::<f64>() < miss_rate { None } else { Some(Value::Continuous(b)) };
                PatientRecord {
                    id: format!("p{i}"),
                    values: vec![Some(Value::Continuous(a)), b_cell, Some(Value::Categorical(c.into()))],
                }
            })
            .collect();
        let outcomes = vec![crate::outcome::Category::new(0).unwrap(); n];
        (CohortTable::new(schema, records, outcomes).unwrap(), truth)
    }

    #[test]
    fn complete_data_is_identity() {
        let (t, _) = linear_table(50, 0.0, 1);
        let rows: Vec<usize> = (0..50).collect();
        let m = fit_pmm(&t, &rows, &[0, 1, 2], PmmConfig::default()).unwrap();
        let out = apply_pmm(&m, &t, &rows, &mut rng::stream(3, &[])).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn fully_missing_column_has_no_donors() {
        let (t, _) = linear_table(50, 1.0, 1);
        let rows: Vec<usize> = (0..50).collect();
        assert!(matches!(
            fit_pmm(&t, &rows, &[0, 1, 2], PmmConfig::default()),
            Err(Error::InsufficientDonors(_))
        ));
    }

    #[test]
    fn imputed_values_come_from_observed_support() {
        let (t, _) = linear_table(200, 0.3, 2);
        let train: Vec<usize> = (0..150).collect();
        let all: Vec<usize> = (0..200).collect();
        let m = fit_pmm(&t, &train, &[0, 1, 2], PmmConfig { seed: 5, ..Default::default() }).unwrap();
        let observed: Vec<f64> = train
            .iter()
            .filter_map(|&r| t.records[r].values[1].as_ref().and_then(Value::as_f64))
            .collect();
        for s in 0..5 {
            let out = apply_pmm(&m, &t, &all, &mut rng::stream(s, &[])).unwrap();
            for (orig, done) in t.records.iter().zip(&out.records) {
                let v = done.values[1].as_ref().and_then(Value::as_f64).unwrap();
                match &orig.values[1] {
                    Some(o) => assert_eq!(o.as_f64().unwrap(), v),
                    None => assert!(observed.contains(&v)),
                }
            }
        }
    }

    #[test]
    fn single_donor_is_deterministic() {
        let (t, _) = linear_table(120, 0.2, 4);
        let rows: Vec<usize> = (0..120).collect();
        let m = fit_pmm(&t, &rows, &[0, 1, 2], PmmConfig { donors: 1, iterations: 5, seed: 9 }).unwrap();
        let a = apply_pmm(&m, &t, &rows, &mut rng::stream(1, &[])).unwrap();
        let b = apply_pmm(&m, &t, &rows, &mut rng::stream(2, &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mcar_imputation_is_unbiased() {
        // Mean of imputed B values vs the true mean of the masked cells,
        // over many seeds; bias must stay within 3 standard errors.
        let mut diffs = Vec::new();
        for seed in 0..100 {
            let (t, truth) = linear_table(150, 0.2, 1000 + seed);
            let rows: Vec<usize> = (0..150).collect();
            let m = fit_pmm(&t, &rows, &[0, 1, 2], PmmConfig { seed, ..Default::default() }).unwrap();
            let out = apply_pmm(&m, &t, &rows, &mut rng::stream(seed, &[7])).unwrap();
            let missing: Vec<usize> = rows.iter().copied().filter(|&r| t.records[r].values[1].is_none()).collect();
            if missing.is_empty() {
                continue;
            }
            let imputed: f64 = missing.iter().map(|&r| out.records[r].values[1].as_ref().unwrap().as_f64().unwrap()).sum::<f64>()
                / missing.len() as f64;
            let true_mean: f64 = truth.iter().sum::<f64>() / truth.len() as f64;
            diffs.push(imputed - true_mean);
        }
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 3.0 * sd / n.sqrt() + 1e-9, "bias {mean}, se {}", sd / n.sqrt());
    }

    #[test]
    fn multiple_copies_share_observed_cells() {
        let (t, _) = linear_table(80, 0.25, 11);
        let rows: Vec<usize> = (0..60).collect();
        let copies = multiply_impute(&t, &rows, &[0, 1, 2], 4, PmmConfig { seed: 3, ..Default::default() }).unwrap();
        assert_eq!(copies.len(), 4);
        for copy in &copies {
            for (orig, done) in t.records.iter().zip(&copy.records) {
                for (o, d) in orig.values.iter().zip(&done.values) {
                    if o.is_some() {
                        assert_eq!(o, d);
                    }
                    assert!(d.is_some());
                }
            }
        }
        assert_ne!(copies[0], copies[1]);
    }

    #[test]
    fn one_hot_examples() {
        let gcsm = PredictorSpec::new("GCSm", PredictorKind::Categorical).with_levels(&["1", "2", "3", "4", "5", "6"]);
        assert_eq!(one_hot(&gcsm, "6").unwrap(), vec![0., 0., 0., 0., 0., 1.]);
        let marshall = PredictorSpec::new("MarshallCT", PredictorKind::Categorical).with_levels(&[
            "No visible pathology (I)",
            "Diffuse injury II",
            "Diffuse injury III",
            "Diffuse injury IV",
            "Mass lesion (V & VI)",
            "Non-evacuated mass lesion",
        ]);
        assert_eq!(one_hot(&marshall, "Diffuse injury II").unwrap(), vec![0., 1., 0., 0., 0., 0.]);
        assert!(matches!(one_hot(&gcsm, "7"), Err(Error::UnknownCategory { .. })));
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize(50.0, 10.0, 50.0), 0.0);
        assert_eq!(standardize(50.0, 10.0, 70.0), 2.0);
        assert_eq!(standardize(3.0, 0.0, 8.0), 0.0);
    }

    #[test]
    fn standardized_training_columns() {
        let (t, _) = linear_table(100, 0.0, 21);
        let rows: Vec<usize> = (0..100).collect();
        let enc = FeatureEncoder::fit(&t, &rows, &[0, 1, 2]).unwrap();
        assert_eq!(enc.dim(), 4);
        let x = enc.encode_rows(&t, &rows).unwrap();
        for j in 0..2 {
            let m = x.iter().map(|r| r[j]).sum::<f64>() / 100.0;
            let v = x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / 100.0;
            assert!(m.abs() < 1e-9 && (v - 1.0).abs() < 1e-9);
        }
        let constant = StandardScaler::fit(&[vec![4.0], vec![4.0]]).unwrap();
        assert_eq!(constant.standardize(0, 4.0), 0.0);
    }
}
