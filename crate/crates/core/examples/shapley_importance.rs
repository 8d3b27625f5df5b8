//! Exact and permutation-sampled Shapley values of tokens for a trained
//! token model, aggregated into predictor rankings.

use ordinal_outcome::importance::{
    aggregate_importance, coalition_values, exact_shapley_all, sampled_shapley_all, PatientAttribution,
};
use ordinal_outcome::models::network::train_apm;
use ordinal_outcome::models::{MlpConfig, OutputEncoding};
use ordinal_outcome::outcome::{Category, THRESHOLD_LABELS};
use ordinal_outcome::rng;
use rand::Rng;

fn main() -> ordinal_outcome::error::Result<()> {
    // 4 predictors with 3 values each; predictor A carries the signal
    let names = ["A", "B", "C", "D"];
    let token_name = |i: u32| format!("{}_{}", names[((i - 1) / 3) as usize], (i - 1) % 3);
    let mut r = rng::stream(8, &[]);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for _ in 0..500 {
        let toks: Vec<u32> = (0..4).map(|p| 1 + 3 * p + r.random_range(0..3)).collect();
        let a = (toks[0] - 1) as f64;
        y.push(Category::new((2.0 * a + r.random_range(0.0..2.5)) as usize)?);
        x.push(toks);
    }
    let mut cfg = MlpConfig::new(vec![8], 0.0, OutputEncoding::Ordinal).with_seed(8);
    cfg.max_epochs = 60;
    let model = train_apm(&x, &y, &[], &[], 13, &cfg)?;

    let p = &x[0];
    let exact = exact_shapley_all(&model, p)?;
    let sampled = sampled_shapley_all(&model, p, 5000, 1)?;
    let full = coalition_values(&model, p)?;
    let empty = coalition_values(&model, &[])?;
    let node = 2;
    let total: f64 = exact.iter().map(|row| row[node]).sum();
    println!("efficiency at {}: {:.6} vs {:.6}", THRESHOLD_LABELS[node], total, full[node] - empty[node]);
    for (i, &t) in p.iter().enumerate() {
        println!("  {:<4} exact {:+.4} sampled {:+.4}", token_name(t), exact[i][node], sampled[i][node]);
    }

    let attrs: Vec<PatientAttribution> = x[..100]
        .iter()
        .enumerate()
        .map(|(i, toks)| {
            Ok(PatientAttribution {
                patient: format!("P{i}"),
                partition: 0,
                tokens: toks.iter().map(|&t| token_name(t)).collect(),
                phi: exact_shapley_all(&model, toks)?,
            })
        })
        .collect::<ordinal_outcome::error::Result<_>>()?;
    let nodes: Vec<String> = THRESHOLD_LABELS.iter().map(|s| s.to_string()).collect();
    let table = aggregate_importance(&attrs, &nodes)?;
    println!("{}", serde_json::to_string_pretty(&table.ranking_json()["predictors"]).unwrap());
    Ok(())
}
