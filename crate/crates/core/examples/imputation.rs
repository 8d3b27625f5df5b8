//! Predictive mean matching fitted on a training side and applied to
//! held-out rows, followed by one-hot / standardised encoding.

use ordinal_outcome::cohort::PredictorSet;
use ordinal_outcome::preprocess::{apply_pmm, fit_pmm, FeatureEncoder, PmmConfig};
use ordinal_outcome::rng;
use ordinal_outcome::synthetic::{generate_cohort, CohortSpec};

fn main() -> ordinal_outcome::error::Result<()> {
    let table = generate_cohort(&CohortSpec::desk(400, 5))?.table;
    let cols = table.schema.columns(PredictorSet::Concise);
    let train: Vec<usize> = (0..300).collect();
    let test: Vec<usize> = (300..400).collect();

    let gaps = |t: &ordinal_outcome::cohort::CohortTable, rows: &[usize]| -> usize {
        rows.iter().map(|&r| cols.iter().filter(|&&c| t.records[r].values[c].is_none()).count()).sum()
    };
    let missing = gaps(&table, &test);
    let model = fit_pmm(&table, &train, &cols, PmmConfig { seed: 5, ..Default::default() })?;
    let filled = apply_pmm(&model, &table, &test, &mut rng::stream(5, &[1]))?;
    println!("held-out missing concise cells: {missing} before, {} after", gaps(&filled, &(0..filled.len()).collect::<Vec<_>>()));

    let enc = FeatureEncoder::fit(&filled, &(0..filled.len()).collect::<Vec<_>>(), &cols)?;
    println!("design columns: {:?}", enc.names());
    println!("first row: {:?}", enc.encode(&filled.schema, &filled.records[0])?);
    Ok(())
}
