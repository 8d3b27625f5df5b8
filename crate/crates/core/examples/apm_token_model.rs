//! All-predictor model: token embeddings averaged with learned
//! significance weights, trained on a tokenised synthetic cohort.

use ordinal_outcome::cohort::PredictorSet;
use ordinal_outcome::metrics::{orc, PredictionSet};
use ordinal_outcome::models::network::train_apm;
use ordinal_outcome::models::{Input, MlpConfig, OutputEncoding};
use ordinal_outcome::synthetic::{generate_cohort, CohortSpec};
use ordinal_outcome::tokenizer::{encode_patient, TokenDictionary, Tokenizer};

fn main() -> ordinal_outcome::error::Result<()> {
    let t = generate_cohort(&CohortSpec::desk(800, 2))?.table;
    let rows: Vec<usize> = (0..t.len()).collect();
    let (train, rest) = rows.split_at(560);
    let (val, test) = rest.split_at(120);

    let tok = Tokenizer::fit(&t, train, &t.schema.columns(PredictorSet::All), 20)?;
    let bags: Vec<Vec<String>> = t.records.iter().map(|r| tok.tokens(&t.schema, r)).collect();
    let dict = TokenDictionary::fit(train.iter().map(|&i| &bags[i]))?;
    let idx: Vec<Vec<u32>> = t.records.iter().zip(&bags).map(|(r, b)| encode_patient(&r.id, b, &dict).indices).collect();
    let pick = |rs: &[usize]| -> (Vec<Vec<u32>>, Vec<_>) { (rs.iter().map(|&i| idx[i].clone()).collect(), rs.iter().map(|&i| t.outcomes[i]).collect()) };
    let ((xt, yt), (xv, yv), (xs, ys)) = (pick(train), pick(val), pick(test));

    let mut cfg = MlpConfig::new(vec![16, 16], 0.2, OutputEncoding::Ordinal).with_seed(4);
    cfg.max_epochs = 80;
    let m = train_apm(&xt, &yt, &xv, &yv, dict.len(), &cfg)?;
    let preds: Vec<_> = xs.iter().map(|x| m.predict(Input::Tokens(x)).map(|p| p.profile)).collect::<Result<_, _>>()?;
    println!("held-out ORC {:.3}", orc(&PredictionSet::new(preds, ys)?)?);

    let mut sig: Vec<(f64, &str)> = (1..dict.len() as u32).map(|i| (m.significance_logit(i), dict.token_at(i).unwrap())).collect();
    sig.sort_by(|a, b| b.0.total_cmp(&a.0));
    println!("most significant tokens: {:?}", &sig[..8]);
    Ok(())
}
