//! Tokenisation of heterogeneous records into `Name_Value` strings, the
//! training-set token dictionary, and index encoding.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::cohort::{CohortTable, PatientRecord, PredictorKind, PredictorSpec, Value};
use crate::error::{Error, Result};

pub const UNRECOGNISED: &str = "<unrecognised>";
pub const DEFAULT_BINS: usize = 20;

/// Lowercase and keep only ASCII letters and digits.
pub fn normalize_text(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Linear-interpolation quantile of a sorted slice.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinEdges {
    pub predictor: String,
    /// Interior cut points, non-decreasing; `cuts.len() + 1` bins.
    pub cuts: Vec<f64>,
}

impl BinEdges {
    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }

    /// 1-based bin of `v`. Bin k covers (cut_{k-1}, cut_k]; values at or
    /// below the first cut land in bin 1, values above the last in the
    /// top bin, so a run of tied cuts collapses onto its lowest bin.
    pub fn bin(&self, v: f64) -> usize {
        1 + self.cuts.partition_point(|&c| c < v)
    }
}

pub fn fit_quantile_bins(predictor: &str, values: &[f64], n_bins: usize) -> Result<BinEdges> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.len() < n_bins || n_bins < 1 {
        return Err(Error::TooFewValues { needed: n_bins.max(1), got: sorted.len() });
    }
    sorted.sort_by(f64::total_cmp);
    let cuts = (1..n_bins)
        .map(|j| quantile_sorted(&sorted, j as f64 / n_bins as f64))
        .collect();
    Ok(BinEdges { predictor: predictor.to_string(), cuts })
}

/// One token for one (predictor, value) observation.
pub fn tokenize_value(spec: &PredictorSpec, value: Option<&Value>, bins: Option<&BinEdges>) -> String {
    let name = &spec.name;
    let Some(value) = value else {
        return format!("{name}_NA");
    };
    match (spec.kind, value) {
        (PredictorKind::Continuous, Value::Continuous(v)) => match bins {
            Some(b) => format!("{name}_BIN{}", b.bin(*v)),
            None => format!("{name}_BIN1"),
        },
        (PredictorKind::Text, v) => {
            format!("{name}_{}", normalize_text(v.as_str().unwrap_or_default()))
        }
        (_, Value::Continuous(v)) => format!("{name}_{v}"),
        (_, v) => {
            let s = v.as_str().unwrap_or_default();
            if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
                format!("{name}_{s:0>width$}", width = spec.width)
            } else {
                format!("{name}_{s}")
            }
        }
    }
}

/// Splits a token back into (predictor, value).
pub fn parse_token(token: &str) -> Result<(&str, &str)> {
    match token.split_once('_') {
        Some((name, value)) if !name.is_empty() => Ok((name, value)),
        _ => Err(Error::UnmappableToken(token.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DictionaryFile", into = "DictionaryFile")]
pub struct TokenDictionary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct DictionaryFile {
    tokens: Vec<String>,
}

impl TryFrom<DictionaryFile> for TokenDictionary {
    type Error = Error;

    fn try_from(f: DictionaryFile) -> Result<Self> {
        if f.tokens.first().map(String::as_str) != Some(UNRECOGNISED) {
            return Err(Error::Invalid("dictionary must start with <unrecognised>".into()));
        }
        let index: HashMap<String, u32> =
            f.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        if index.len() != f.tokens.len() {
            return Err(Error::Invalid("duplicate dictionary token".into()));
        }
        Ok(TokenDictionary { tokens: f.tokens, index })
    }
}

impl From<TokenDictionary> for DictionaryFile {
    fn from(d: TokenDictionary) -> Self {
        DictionaryFile { tokens: d.tokens }
    }
}

impl TokenDictionary {
    /// `<unrecognised>` at 0, then every distinct training token in
    /// lexicographic order.
    pub fn fit<I, T, S>(patients: I) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut any = false;
        let mut set = BTreeSet::new();
        for p in patients {
            any = true;
            for t in p {
                set.insert(t.as_ref().to_string());
            }
        }
        if !any {
            return Err(Error::EmptyTrainingSet);
        }
        set.remove(UNRECOGNISED);
        let tokens: Vec<String> = std::iter::once(UNRECOGNISED.to_string()).chain(set).collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Ok(TokenDictionary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn lookup(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn token_at(&self, i: u32) -> Option<&str> {
        self.tokens.get(i as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenisedPatient {
    pub id: String,
    /// Sorted, deduplicated dictionary indices.
    pub indices: Vec<u32>,
}

pub fn encode_patient<S: AsRef<str>>(id: &str, tokens: &[S], dict: &TokenDictionary) -> TokenisedPatient {
    let mut indices: Vec<u32> = tokens.iter().map(|t| dict.lookup(t.as_ref())).collect();
    indices.sort_unstable();
    indices.dedup();
    TokenisedPatient { id: id.to_string(), indices }
}

/// Per-predictor quantile bins learned on a training cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub columns: Vec<usize>,
    pub bins: BTreeMap<String, BinEdges>,
}

impl Tokenizer {
    /// Fits bins for every continuous column in `columns`. Columns with
    /// fewer observed values than bins fall back to as many bins as values.
    pub fn fit(table: &CohortTable, rows: &[usize], columns: &[usize], n_bins: usize) -> Result<Self> {
        let mut bins = BTreeMap::new();
        for &c in columns {
            let spec = &table.schema.predictors[c];
            if spec.kind != PredictorKind::Continuous {
                continue;
            }
            let values: Vec<f64> = rows
                .iter()
                .filter_map(|&r| table.records[r].values[c].as_ref().and_then(Value::as_f64))
                .collect();
            if values.is_empty() {
                continue;
            }
            let edges = fit_quantile_bins(&spec.name, &values, n_bins.min(values.len()))?;
            bins.insert(spec.name.clone(), edges);
        }
        Ok(Tokenizer { columns: columns.to_vec(), bins })
    }

    pub fn tokens(&self, table_schema: &crate::cohort::Schema, record: &PatientRecord) -> Vec<String> {
        self.columns
            .iter()
            .map(|&c| {
                let spec = &table_schema.predictors[c];
                tokenize_value(spec, record.values[c].as_ref(), self.bins.get(&spec.name))
            })
            .collect()
    }
}
