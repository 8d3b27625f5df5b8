//! Multinomial and proportional-odds regressions on synthetic data,
//! with standard errors and a likelihood-ratio test.

use ordinal_outcome::models::linear::{lr_test, train_mnlr, train_polr};
use ordinal_outcome::models::LinearOptions;
use ordinal_outcome::outcome::Category;
use ordinal_outcome::rng;
use rand::Rng;

fn main() -> ordinal_outcome::error::Result<()> {
    let theta = [-1.5, -0.5, 0.0, 0.6, 1.2, 2.0];
    let beta = [0.8, -0.5];
    let mut r = rng::stream(11, &[]);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for _ in 0..3000 {
        let row = vec![r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
        let eta = beta[0] * row[0] + beta[1] * row[1] + {
            let u: f64 = r.random_range(1e-12..1.0);
            (u / (1.0 - u)).ln()
        };
        y.push(Category::new(theta.iter().filter(|&&t| eta > t).count())?);
        x.push(row);
    }

    let polr = train_polr(&x, &y, LinearOptions::default())?;
    let (se, _) = polr.standard_errors(&x, &y)?;
    for j in 0..2 {
        println!("beta[{j}] = {:.3} (se {:.3}, true {})", polr.beta[j], se[j], beta[j]);
    }
    println!("thresholds {:?}", polr.thresholds.map(|t| (t * 1000.0).round() / 1000.0));

    let reduced: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0]]).collect();
    let small = train_polr(&reduced, &y, LinearOptions::default())?;
    println!("LR test for x2: p = {:.2e}", lr_test(&polr, &small, 1)?);

    let mnlr = train_mnlr(&x, &y, LinearOptions::default())?;
    println!("MNLR profile at origin {:?}", mnlr.distribution(&[0.0, 0.0])?.to_threshold_profile().q);
    Ok(())
}
