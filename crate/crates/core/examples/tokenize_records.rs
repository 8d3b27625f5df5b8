//! Turns heterogeneous cohort rows into token bags and dictionary indices.

use ordinal_outcome::cohort::PredictorSet;
use ordinal_outcome::synthetic::{generate_cohort, CohortSpec};
use ordinal_outcome::tokenizer::{encode_patient, TokenDictionary, Tokenizer};

fn main() -> ordinal_outcome::error::Result<()> {
    let cohort = generate_cohort(&CohortSpec::desk(300, 1))?.table;
    let train: Vec<usize> = (0..200).collect();
    let cols = cohort.schema.columns(PredictorSet::All);
    let tok = Tokenizer::fit(&cohort, &train, &cols, 20)?;

    let bags: Vec<Vec<String>> = cohort.records.iter().map(|r| tok.tokens(&cohort.schema, r)).collect();
    let dict = TokenDictionary::fit(train.iter().map(|&i| &bags[i]))?;
    println!("vocabulary: {} tokens", dict.len());

    let held_out = 250;
    println!("{:?}", bags[held_out]);
    let enc = encode_patient(&cohort.records[held_out].id, &bags[held_out], &dict);
    println!("{} -> {:?}", enc.id, enc.indices);
    Ok(())
}
