//! Repeated stratified k-fold, pooled out-of-fold predictions for several
//! configurations, configuration dropout, and bias-corrected selection.

use ordinal_outcome::metrics::orc;
use ordinal_outcome::outcome::{Category, ThresholdProfile};
use ordinal_outcome::rng;
use ordinal_outcome::validation::{
    assign_validation, bbc_select, bbcd_dropout, bootstrap_ci, build_grid, stratified_repeated_kfold, GridProfile, Metric,
    PredictionPool,
};
use rand::Rng;

fn main() -> ordinal_outcome::error::Result<()> {
    println!("grid sizes: paper {}, desk {}", build_grid(GridProfile::Paper).len(), build_grid(GridProfile::Desk).len());

    let n = 300;
    let mut r = rng::stream(21, &[]);
    let latent: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
    let labels: Vec<Category> = latent
        .iter()
        .map(|&z| Category::new(((z + r.random_range(-2.0..2.0) + 5.0) * 0.7).clamp(0.0, 6.0) as usize).unwrap())
        .collect();
    let mut plans = stratified_repeated_kfold(&labels, 4, 5, 21)?;
    assign_validation(&mut plans, &labels, 0.15, 21)?;
    println!("{} partitions, first test fold {} patients", plans.len(), plans[0].test.len());

    // stand-ins for trained configurations: signal strength decreases with index
    let ids: Vec<String> = (0..n).map(|i| format!("P{i:03}")).collect();
    let strengths = [1.0, 0.9, 0.6, 0.3, 0.0];
    let mut pools: Vec<PredictionPool> = strengths.iter().map(|_| PredictionPool::new(ids.clone(), labels.clone())).collect();
    for p in &plans {
        for (c, &s) in strengths.iter().enumerate() {
            let mut cr = rng::stream(21, &[p.repeat as u64, p.fold as u64, c as u64]);
            for &i in &p.test {
                let z = s * latent[i] + cr.random_range(-1.5..1.5);
                let q: [f64; 6] = std::array::from_fn(|t| 1.0 / (1.0 + (-(z - t as f64 + 2.5)).exp()));
                pools[c].add(i, p.repeat, ThresholdProfile::new(q)?);
            }
        }
    }
    for (c, p) in pools.iter().enumerate() {
        println!("config {c}: pooled ORC {:.3}", orc(&p.prediction_set())?);
    }

    let drop = bbcd_dropout(&pools, 0.05, 500, 1)?;
    println!("dropout: optimum {} survivors {:?} wins {:?}", drop.optimum, drop.survivors, drop.wins);

    let bbc = bbc_select(&pools, Metric::Orc, 500, 2)?;
    let naive = bootstrap_ci(&pools[bbc.chosen], Metric::Orc, 500, 2)?;
    println!(
        "chosen {}: bias-corrected ORC {:.3} [{:.3}, {:.3}], naive {:.3}",
        bbc.chosen, bbc.report.estimate, bbc.report.ci_low, bbc.report.ci_high, naive.estimate
    );
    Ok(())
}
