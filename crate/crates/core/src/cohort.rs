//! Tabular cohort: predictor schema, typed values with explicit
//! missingness, and the CSV + JSON schema file formats.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::outcome::Category;

pub const ID_COLUMN: &str = "patient_id";
pub const OUTCOME_COLUMN: &str = "gose";
pub const IMPUTATION_COLUMN: &str = "imputation_id";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Categorical,
    Continuous,
    Text,
}

/// Which predictor sets a column belongs to. Concise columns are part of
/// every set, extended columns of the extended and all-predictor sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Concise,
    Extended,
    #[default]
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorSet {
    Concise,
    Extended,
    All,
}

impl PredictorSet {
    pub fn includes(self, tier: Tier) -> bool {
        match self {
            PredictorSet::Concise => tier == Tier::Concise,
            PredictorSet::Extended => tier != Tier::All,
            PredictorSet::All => true,
        }
    }
}

fn default_width() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSpec {
    pub name: String,
    pub kind: PredictorKind,
    /// Predictor category, e.g. "Brain imaging".
    #[serde(default)]
    pub category: String,
    /// Declared levels of a categorical predictor, in encoding order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    /// Zero-padding width for numeric categorical values in tokens.
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default)]
    pub tier: Tier,
}

impl PredictorSpec {
    pub fn new(name: &str, kind: PredictorKind) -> Self {
        PredictorSpec {
            name: name.to_string(),
            kind,
            category: String::new(),
            levels: Vec::new(),
            width: default_width(),
            tier: Tier::All,
        }
    }

    pub fn with_levels<S: AsRef<str>>(mut self, levels: &[S]) -> Self {
        self.levels = levels.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    pub fn with_tier(mut self, tier: Tier) -> Self {
        self.tier = tier;
        self
    }

    pub fn with_category(mut self, category: &str) -> Self {
        self.category = category.to_string();
        self
    }

    pub fn level_index(&self, value: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub predictors: Vec<PredictorSpec>,
}

impl Schema {
    pub fn new(predictors: Vec<PredictorSpec>) -> Result<Self> {
        let schema = Schema { predictors };
        schema.validate()?;
        Ok(schema)
    }

    /// Names must be non-empty, unique and free of `_` so that tokens
    /// split back into (name, value) at the first underscore.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for p in &self.predictors {
            if p.name.is_empty() {
                return Err(Error::InvalidSpec("empty predictor name".into()));
            }
            if p.name.contains('_') {
                return Err(Error::InvalidSpec(format!(
                    "predictor name `{}` contains an underscore",
                    p.name
                )));
            }
            if [ID_COLUMN, OUTCOME_COLUMN, IMPUTATION_COLUMN].contains(&p.name.as_str()) {
                return Err(Error::InvalidSpec(format!("reserved column name `{}`", p.name)));
            }
            if !seen.insert(p.name.as_str()) {
                return Err(Error::InvalidSpec(format!("duplicate predictor `{}`", p.name)));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let schema: Schema = serde_json::from_reader(File::open(path)?)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        serde_json::to_writer_pretty(File::create(path)?, self)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.predictors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictors.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.predictors.iter().position(|p| p.name == name)
    }

    /// Column indices belonging to a predictor set.
    pub fn columns(&self, set: PredictorSet) -> Vec<usize> {
        self.predictors
            .iter()
            .enumerate()
            .filter(|(_, p)| set.includes(p.tier))
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Continuous(f64),
    Categorical(String),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Continuous(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Categorical(s) | Value::Text(s) => Some(s),
            Value::Continuous(_) => None,
        }
    }

    fn parse(spec: &PredictorSpec, cell: &str) -> Result<Option<Value>> {
        if cell.is_empty() {
            return Ok(None);
        }
        Ok(Some(match spec.kind {
            PredictorKind::Continuous => Value::Continuous(cell.trim().parse().map_err(|_| {
                Error::Invalid(format!("`{cell}` is not numeric in column `{}`", spec.name))
            })?),
            PredictorKind::Categorical => Value::Categorical(cell.to_string()),
            PredictorKind::Text => Value::Text(cell.to_string()),
        }))
    }

    fn render(&self) -> String {
        match self {
            Value::Continuous(v) => format!("{v}"),
            Value::Categorical(s) | Value::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub id: String,
    /// One entry per schema column; `None` is missing.
    pub values: Vec<Option<Value>>,
}

impl PatientRecord {
    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortTable {
    pub schema: Schema,
    pub records: Vec<PatientRecord>,
    pub outcomes: Vec<Category>,
}

impl CohortTable {
    pub fn new(schema: Schema, records: Vec<PatientRecord>, outcomes: Vec<Category>) -> Result<Self> {
        if records.len() != outcomes.len() {
            return Err(Error::DimensionMismatch { expected: records.len(), got: outcomes.len() });
        }
        for r in &records {
            if r.values.len() != schema.len() {
                return Err(Error::DimensionMismatch { expected: schema.len(), got: r.values.len() });
            }
        }
        Ok(CohortTable { schema, records, outcomes })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> CohortTable {
        CohortTable {
            schema: self.schema.clone(),
            records: rows.iter().map(|&i| self.records[i].clone()).collect(),
            outcomes: rows.iter().map(|&i| self.outcomes[i]).collect(),
        }
    }

    pub fn find(&self, id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.id == id)
    }

    pub fn read_csv(path: &Path, schema: &Schema) -> Result<CohortTable> {
        Self::from_reader(File::open(path)?, schema)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, schema: &Schema) -> Result<CohortTable> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Invalid(format!("CSV is missing column `{name}`")))
        };
        let id_col = col(ID_COLUMN)?;
        let outcome_col = col(OUTCOME_COLUMN)?;
        let pred_cols = schema
            .predictors
            .iter()
            .map(|p| col(&p.name))
            .collect::<Result<Vec<_>>>()?;

        let mut records = Vec::new();
        let mut outcomes = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let values = schema
                .predictors
                .iter()
                .zip(&pred_cols)
                .map(|(spec, &c)| Value::parse(spec, &row[c]))
                .collect::<Result<Vec<_>>>()?;
            records.push(PatientRecord { id: row[id_col].to_string(), values });
            outcomes.push(row[outcome_col].parse()?);
        }
        CohortTable::new(schema.clone(), records, outcomes)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.to_writer(File::create(path)?, None)
    }

    /// Writes the cohort; `imputation_id` adds the column that tells
    /// completed copies apart.
    pub fn to_writer<W: std::io::Write>(&self, writer: W, imputation_id: Option<usize>) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        write_rows(&mut wtr, std::slice::from_ref(self), imputation_id.map(|i| vec![i]))?;
        wtr.flush()?;
        Ok(())
    }
}

/// Several completed copies into one CSV with an `imputation_id` column.
pub fn write_imputed_csv(path: &Path, copies: &[CohortTable]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(File::create(path)?);
    write_rows(&mut wtr, copies, Some((0..copies.len()).collect()))?;
    wtr.flush()?;
    Ok(())
}

fn write_rows<W: std::io::Write>(
    wtr: &mut csv::Writer<W>,
    tables: &[CohortTable],
    imputation_ids: Option<Vec<usize>>,
) -> Result<()> {
    let Some(first) = tables.first() else { return Ok(()) };
    let mut header = Vec::new();
    if imputation_ids.is_some() {
        header.push(IMPUTATION_COLUMN.to_string());
    }
    header.push(ID_COLUMN.to_string());
    header.extend(first.schema.predictors.iter().map(|p| p.name.clone()));
    header.push(OUTCOME_COLUMN.to_string());
    wtr.write_record(&header)?;
    for (t, table) in tables.iter().enumerate() {
        for (r, y) in table.records.iter().zip(&table.outcomes) {
            let mut row = Vec::with_capacity(header.len());
            if let Some(ids) = &imputation_ids {
                row.push(ids[t].to_string());
            }
            row.push(r.id.clone());
            row.extend(r.values.iter().map(|v| v.as_ref().map(Value::render).unwrap_or_default()));
            row.push(y.label().to_string());
            wtr.write_record(&row)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::new(vec![
            PredictorSpec::new("Age", PredictorKind::Continuous).with_tier(Tier::Concise),
            PredictorSpec::new("GCSm", PredictorKind::Categorical)
                .with_levels(&["1", "2", "3", "4", "5", "6"])
                .with_tier(Tier::Concise),
            PredictorSpec::new("InjuryDescription", PredictorKind::Text),
        ])
        .unwrap()
    }

    #[test]
    fn underscore_names_rejected() {
        let err = Schema::new(vec![PredictorSpec::new("Bad_Name", PredictorKind::Text)]);
        assert!(matches!(err, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn csv_round_trip_keeps_missing_cells() {
        let csv_text = "patient_id,Age,GCSm,InjuryDescription,gose\n\
                        a,34.5,6,Skull fracture,8\n\
                        b,,2,,2or3\n";
        let table = CohortTable::from_reader(csv_text.as_bytes(), &schema()).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.records[1].values[0], None);
        assert_eq!(table.records[1].missing_count(), 2);
        assert_eq!(table.outcomes[1].index(), 1);

        let mut buf = Vec::new();
        table.to_writer(&mut buf, None).unwrap();
        let back = CohortTable::from_reader(buf.as_slice(), &schema()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn predictor_sets_nest() {
        let s = schema();
        assert_eq!(s.columns(PredictorSet::Concise), vec![0, 1]);
        assert_eq!(s.columns(PredictorSet::Extended), vec![0, 1]);
        assert_eq!(s.columns(PredictorSet::All), vec![0, 1, 2]);
    }
}
