//! Threshold profile of one patient and the conditional chance of each
//! higher recovery level given survival.

use ordinal_outcome::outcome::{conditional_exceedance, CategoryDistribution, Threshold, ThresholdProfile};

fn main() -> ordinal_outcome::error::Result<()> {
    let q = ThresholdProfile::new([0.1273615, 0.1228617, 0.0661974, 0.0261596, 0.0216245, 0.0038411])?;
    let survival: Threshold = ">1".parse()?;
    println!("Pr(GOSE >1) = {:.1}%", 100.0 * q.at(survival));
    for t in Threshold::all().skip(1) {
        let p = conditional_exceedance(&q, survival, t)?;
        println!("Pr(GOSE {t} | survives) = {:.1}%", 100.0 * p);
    }

    // a multinomial output accumulates into the same profile
    let d = CategoryDistribution::new([0.4, 0.2, 0.1, 0.1, 0.1, 0.05, 0.05])?;
    println!("from categories: {:?}", d.to_threshold_profile().q);
    Ok(())
}
