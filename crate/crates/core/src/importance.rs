//! Shapley attributions of token-model outputs to the patient's tokens, and
//! their aggregation into token- and predictor-level importance.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Input, NeuralModel};
use crate::rng;
use crate::tokenizer::{parse_token, UNRECOGNISED};

/// Largest token count for exhaustive enumeration.
pub const MAX_EXACT_TOKENS: usize = 12;

/// Output nodes with only `subset` present, re-averaged over the subset.
/// The empty coalition feeds a zero vector forward.
pub fn coalition_values(model: &NeuralModel, subset: &[u32]) -> Result<Vec<f64>> {
    if subset.is_empty() {
        let e = model.embedding_dim().ok_or_else(|| Error::Invalid("not a token model".into()))?;
        Ok(model.node_outputs_from_hidden(&vec![0.0; e]))
    } else {
        model.node_outputs(Input::Tokens(subset))
    }
}

pub fn coalition_value(model: &NeuralModel, subset: &[u32], node: usize) -> Result<f64> {
    Ok(coalition_values(model, subset)?[node])
}

fn subset_of(tokens: &[u32], mask: usize) -> Vec<u32> {
    tokens.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &t)| t).collect()
}

/// Exact Shapley values for every token (rows) and node (columns).
pub fn exact_shapley_all(model: &NeuralModel, tokens: &[u32]) -> Result<Vec<Vec<f64>>> {
    let n = tokens.len();
    if n > MAX_EXACT_TOKENS {
        return Err(Error::TooManyTokens(n, MAX_EXACT_TOKENS));
    }
    let values: Vec<Vec<f64>> = (0..1usize << n).map(|m| coalition_values(model, &subset_of(tokens, m))).collect::<Result<_>>()?;
    let nodes = values[0].len();
    // weight(|S|) = |S|! (n−|S|−1)! / n!
    let mut fact = vec![1.0f64; n + 1];
    for i in 1..=n {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![vec![0.0; nodes]; n];
    for (i, row) in phi.iter_mut().enumerate() {
        for m in 0..1usize << n {
            if m >> i & 1 == 1 {
                continue;
            }
            let s = m.count_ones() as usize;
            let w = fact[s] * fact[n - s - 1] / fact[n];
            let with = &values[m | 1 << i];
            for (k, r) in row.iter_mut().enumerate() {
                *r += w * (with[k] - values[m][k]);
            }
        }
    }
    Ok(phi)
}

pub fn exact_shapley(model: &NeuralModel, tokens: &[u32], node: usize) -> Result<Vec<f64>> {
    Ok(exact_shapley_all(model, tokens)?.into_iter().map(|r| r[node]).collect())
}

/// Permutation-sampling estimate from `m` random orderings.
pub fn sampled_shapley_all(model: &NeuralModel, tokens: &[u32], m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(Error::Invalid("need at least one permutation".into()));
    }
    let n = tokens.len();
    let base = coalition_values(model, &[])?;
    let nodes = base.len();
    let mut phi = vec![vec![0.0; nodes]; n];
    let mut r = rng::stream(seed, &[rng::label("shapley")]);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..m {
        order.shuffle(&mut r);
        let mut prev = base.clone();
        let mut present = Vec::with_capacity(n);
        for &i in &order {
            present.push(tokens[i]);
            let v = coalition_values(model, &present)?;
            for k in 0..nodes {
                phi[i][k] += v[k] - prev[k];
            }
            prev = v;
        }
    }
    phi.iter_mut().flatten().for_each(|v| *v /= m as f64);
    Ok(phi)
}

pub fn sampled_shapley(model: &NeuralModel, tokens: &[u32], node: usize, m: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(sampled_shapley_all(model, tokens, m, seed)?.into_iter().map(|r| r[node]).collect())
}

/// Attributions of one patient in one partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientAttribution {
    pub patient: String,
    pub partition: usize,
    pub tokens: Vec<String>,
    /// token × node
    pub phi: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenImportance {
    pub token: String,
    pub predictor: String,
    pub mean_abs: Vec<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub nodes: Vec<String>,
    pub tokens: Vec<TokenImportance>,
    /// Descending by score.
    pub predictors: Vec<(String, f64)>,
}

fn predictor_of(token: &str) -> Result<&str> {
    if token == UNRECOGNISED {
        return Ok(UNRECOGNISED);
    }
    parse_token(token).map(|(p, _)| p).map_err(|_| Error::UnmappableToken(token.to_string()))
}

/// |φ| averaged over partitions within each patient, then over all
/// patients (a patient lacking a token contributes zero). A token's score
/// sums its nodes; a predictor scores the max over its tokens.
pub fn aggregate_importance(attrs: &[PatientAttribution], nodes: &[String]) -> Result<ImportanceTable> {
    let mut per_patient: BTreeMap<&str, (usize, BTreeMap<&str, Vec<f64>>)> = BTreeMap::new();
    for a in attrs {
        if a.tokens.len() != a.phi.len() {
            return Err(Error::DimensionMismatch { expected: a.tokens.len(), got: a.phi.len() });
        }
        let entry = per_patient.entry(&a.patient).or_default();
        entry.0 += 1;
        for (tok, row) in a.tokens.iter().zip(&a.phi) {
            if row.len() != nodes.len() {
                return Err(Error::DimensionMismatch { expected: nodes.len(), got: row.len() });
            }
            predictor_of(tok)?;
            let acc = entry.1.entry(tok).or_insert_with(|| vec![0.0; nodes.len()]);
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v.abs();
            }
        }
    }
    let n_patients = per_patient.len() as f64;
    let mut totals: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (partitions, toks) in per_patient.values() {
        for (tok, acc) in toks {
            let t = totals.entry(tok).or_insert_with(|| vec![0.0; nodes.len()]);
            for (a, v) in t.iter_mut().zip(acc) {
                *a += v / *partitions as f64 / n_patients;
            }
        }
    }
    let mut tokens = Vec::new();
    let mut predictors: BTreeMap<String, f64> = BTreeMap::new();
    for (tok, mean_abs) in totals {
        let predictor = predictor_of(tok)?.to_string();
        let total: f64 = mean_abs.iter().sum();
        let best = predictors.entry(predictor.clone()).or_insert(0.0);
        *best = best.max(total);
        tokens.push(TokenImportance { token: tok.to_string(), predictor, mean_abs, total });
    }
    let mut predictors: Vec<(String, f64)> = predictors.into_iter().collect();
    predictors.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ImportanceTable { nodes: nodes.to_vec(), tokens, predictors })
}

impl ImportanceTable {
    /// Rows `predictor, token, node, mean_abs_shap`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["predictor", "token", "node", "mean_abs_shap"])?;
        for t in &self.tokens {
            for (node, v) in self.nodes.iter().zip(&t.mean_abs) {
                out.write_record([t.predictor.as_str(), t.token.as_str(), node.as_str(), &v.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn ranking_json(&self) -> serde_json::Value {
        serde_json::json!({
            "predictors": self.predictors.iter().map(|(p, s)| serde_json::json!({"predictor": p, "score": s})).collect::<Vec<_>>(),
            "tokens": self.tokens.iter().map(|t| serde_json::json!({"token": t.token, "predictor": t.predictor, "score": t.total})).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{InputSpec, MlpConfig, OutputEncoding};
    use crate::outcome::CATEGORY_LABELS;

    fn model(widths: Vec<usize>, enc: OutputEncoding, vocab: usize, seed: u64) -> NeuralModel {
        let mut m = NeuralModel::init(&MlpConfig::new(widths, 0.0, enc).with_seed(seed), InputSpec::Tokens { vocab }).unwrap();
        m.jitter(0.5, seed);
        m
    }

    #[test]
    fn coalition_examples() {
        let m = model(vec![4, 5], OutputEncoding::Ordinal, 10, 1);
        let toks = [1u32, 4, 7];
        assert_eq!(coalition_values(&m, &toks).unwrap(), m.node_outputs(Input::Tokens(&toks)).unwrap());
        let h = m.embed_average(&[1, 7]).unwrap();
        assert_eq!(coalition_value(&m, &[1, 7], 2).unwrap(), m.node_outputs_from_hidden(&h)[2]);

        // zero the output bias of a depth-1 multinomial model
        let d1 = model(vec![3], OutputEncoding::Multinomial, 5, 2);
        let mut p = d1.params().to_vec();
        let n = p.len();
        p[n - 7..].fill(0.0);
        let mut d1 = d1;
        d1.set_params(&p).unwrap();
        for v in coalition_values(&d1, &[]).unwrap() {
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_shapley_axioms() {
        let m = model(vec![4, 6], OutputEncoding::Multinomial, 12, 3);
        let single = exact_shapley_all(&m, &[5]).unwrap();
        let full = coalition_values(&m, &[5]).unwrap();
        let empty = coalition_values(&m, &[]).unwrap();
        for k in 0..7 {
            assert!((single[0][k] - (full[k] - empty[k])).abs() < 1e-15);
        }

        let toks = [0u32, 2, 3, 5, 8, 9, 11];
        let phi = exact_shapley_all(&m, &toks).unwrap();
        let full = coalition_values(&m, &toks).unwrap();
        for k in 0..7 {
            let s: f64 = phi.iter().map(|r| r[k]).sum();
            assert!((s - (full[k] - empty[k])).abs() < 1e-12);
        }

        // tokens 3 and 8 made interchangeable
        let mut p = m.params().to_vec();
        let e = 4;
        for j in 0..e {
            p[8 * e + j] = p[3 * e + j];
        }
        p[12 * e + 8] = p[12 * e + 3];
        let mut m2 = m.clone();
        m2.set_params(&p).unwrap();
        let phi = exact_shapley_all(&m2, &toks).unwrap();
        for k in 0..7 {
            assert!((phi[2][k] - phi[4][k]).abs() < 1e-12);
        }

        let many: Vec<u32> = (0..12).chain(0..1).collect();
        assert!(matches!(exact_shapley(&m, &many, 0), Err(Error::TooManyTokens(13, 12))));
    }

    #[test]
    fn sampled_matches_exact() {
        let m = model(vec![5, 4], OutputEncoding::Ordinal, 20, 4);
        let toks = [1u32, 3, 6, 8, 11, 14, 17, 19];
        let exact = exact_shapley_all(&m, &toks).unwrap();
        let est = sampled_shapley_all(&m, &toks, 20_000, 9).unwrap();
        for (a, b) in exact.iter().flatten().zip(est.iter().flatten()) {
            assert!((a - b).abs() < 0.01, "{a} {b}");
        }
        assert_eq!(est, sampled_shapley_all(&m, &toks, 20_000, 9).unwrap());
        // permutation sampling telescopes, so efficiency holds per draw
        let full = coalition_values(&m, &toks).unwrap();
        let empty = coalition_values(&m, &[]).unwrap();
        for k in 0..6 {
            let s: f64 = est.iter().map(|r| r[k]).sum();
            assert!((s - (full[k] - empty[k])).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_error_shrinks_like_inverse_sqrt() {
        let m = model(vec![4, 4], OutputEncoding::Multinomial, 8, 5);
        let toks = [0u32, 2, 4, 5, 7];
        let exact = exact_shapley_all(&m, &toks).unwrap();
        let rmse = |mm: usize| {
            let mut s = 0.0;
            let mut c = 0.0;
            for seed in 0..60 {
                let est = sampled_shapley_all(&m, &toks, mm, seed).unwrap();
                for (a, b) in exact.iter().flatten().zip(est.iter().flatten()) {
                    s += (a - b).powi(2);
                    c += 1.0;
                }
            }
            (s / c).sqrt()
        };
        let ratio = rmse(200) / rmse(50);
        assert!((0.25..=0.75).contains(&ratio), "{ratio}");
    }

    fn nodes() -> Vec<String> {
        CATEGORY_LABELS.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn aggregation_examples() {
        let phi = vec![vec![0.1, -0.2, 0.0, 0.0, 0.0, 0.0, 0.05], vec![-0.3; 7]];
        let one = PatientAttribution { patient: "A".into(), partition: 1, tokens: vec!["Age_BIN3".into(), "GCSm_5".into()], phi: phi.clone() };
        let t = aggregate_importance(std::slice::from_ref(&one), &nodes()).unwrap();
        for (tok, row) in t.tokens.iter().zip(&phi) {
            for (a, b) in tok.mean_abs.iter().zip(row) {
                assert_eq!(*a, b.abs());
            }
        }

        let a = PatientAttribution { patient: "A".into(), partition: 1, tokens: vec!["Pupils_1".into(), "Pupils_2".into()], phi: vec![vec![0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], vec![0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]] };
        let t = aggregate_importance(&[a], &nodes()).unwrap();
        assert_eq!(t.predictors, vec![("Pupils".to_string(), 0.4)]);

        let b = PatientAttribution { patient: "B".into(), partition: 2, tokens: vec!["GCSm_3".into()], phi: vec![vec![0.2; 7]] };
        let forward = aggregate_importance(&[one.clone(), b.clone()], &nodes()).unwrap();
        let backward = aggregate_importance(&[b, one], &nodes()).unwrap();
        assert_eq!(forward, backward);

        let bad = PatientAttribution { patient: "C".into(), partition: 1, tokens: vec!["nounderscore".into()], phi: vec![vec![0.0; 7]] };
        assert!(matches!(aggregate_importance(&[bad], &nodes()), Err(Error::UnmappableToken(_))));
        let unk = PatientAttribution { patient: "C".into(), partition: 1, tokens: vec![UNRECOGNISED.into()], phi: vec![vec![0.1; 7]] };
        assert_eq!(aggregate_importance(&[unk], &nodes()).unwrap().predictors[0].0, UNRECOGNISED);
    }

    #[test]
    fn partitions_average_within_patient() {
        let mk = |part, v: f64| PatientAttribution { patient: "A".into(), partition: part, tokens: vec!["Hb_BIN2".into()], phi: vec![vec![v; 6]] };
        let th: Vec<String> = (0..6).map(|t| t.to_string()).collect();
        let t = aggregate_importance(&[mk(1, 0.2), mk(2, -0.4)], &th).unwrap();
        assert!((t.tokens[0].mean_abs[0] - 0.3).abs() < 1e-15);
        let other = PatientAttribution { patient: "B".into(), partition: 1, tokens: vec!["Age_BIN1".into()], phi: vec![vec![0.0; 6]] };
        let t = aggregate_importance(&[mk(1, 0.2), mk(2, -0.4), other], &th).unwrap();
        let hb = t.tokens.iter().find(|x| x.token == "Hb_BIN2").unwrap();
        assert!((hb.mean_abs[0] - 0.15).abs() < 1e-15);
    }
}
