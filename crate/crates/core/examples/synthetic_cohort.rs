//! Synthetic ordinal cohort with known generating model: marginals,
//! missingness and the Bayes-optimal reference ORC.

use ordinal_outcome::metrics::{orc, PredictionSet};
use ordinal_outcome::outcome::{category_counts, CATEGORY_LABELS};
use ordinal_outcome::synthetic::{generate_cohort, oracle_profile, CohortSpec};

fn main() -> ordinal_outcome::error::Result<()> {
    let spec = CohortSpec::desk(1550, 42);
    let c = generate_cohort(&spec)?;
    println!("{} patients, {} predictors", c.table.len(), c.table.schema.len());
    for (label, n) in CATEGORY_LABELS.iter().zip(category_counts(&c.table.outcomes)) {
        println!("  GOSE {label:<5} {n}");
    }
    for (j, p) in c.table.schema.predictors.iter().enumerate() {
        let miss = c.table.records.iter().filter(|r| r.values[j].is_none()).count();
        if miss > 0 {
            println!("  {:<10} {:.1}% missing", p.name, 100.0 * miss as f64 / c.table.len() as f64);
        }
    }
    let oracle = c.complete.records.iter().map(|r| oracle_profile(&spec, r)).collect::<Result<Vec<_>, _>>()?;
    println!("oracle ORC {:.3}", orc(&PredictionSet::new(oracle, c.table.outcomes.clone())?)?);

    let dir = std::env::temp_dir().join("ordinal_synthetic_example");
    std::fs::create_dir_all(&dir)?;
    c.table.write_csv(&dir.join("cohort.csv"))?;
    c.table.schema.save(&dir.join("schema.json"))?;
    spec.save(&dir.join("truth.json"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
