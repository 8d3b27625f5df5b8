//! Feed-forward networks with both output encodings, early stopping on a
//! validation split, and a finite-difference gradient check.

use ordinal_outcome::models::network::{gradient_check, train_deep};
use ordinal_outcome::models::{Input, MlpConfig, OutputEncoding};
use ordinal_outcome::outcome::{class_weights, Category};
use ordinal_outcome::rng;
use rand::Rng;

fn main() -> ordinal_outcome::error::Result<()> {
    let mut r = rng::stream(3, &[]);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..600 {
        let row: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let s = 2.0 * row[0] - row[1] + r.random_range(-1.0..1.0);
        y.push(Category::new(((s + 3.0) * 7.0 / 6.0).clamp(0.0, 6.0) as usize)?);
        x.push(row);
    }
    let (xv, yv) = (x.split_off(500), y.split_off(500));

    for enc in [OutputEncoding::Multinomial, OutputEncoding::Ordinal] {
        let mut cfg = MlpConfig::new(vec![16, 8], 0.2, enc).with_seed(1);
        cfg.max_epochs = 60;
        let m = train_deep(&x, &y, &xv, &yv, &cfg)?;
        println!(
            "{enc:?}: stopped after {} epochs, best {} (val loss {:.4})",
            m.metadata.epochs_run,
            m.metadata.best_epoch,
            m.metadata.val_losses[m.metadata.best_epoch - 1]
        );
        println!("  profile of first validation patient {:?}", m.predict(Input::Features(&xv[0]))?.profile.q);

        let inputs: Vec<Input> = x[..20].iter().map(|r| Input::Features(r)).collect();
        let w = class_weights(&y)?;
        let mut probe = m.clone();
        probe.config.dropout = 0.0;
        println!("  max relative gradient error {:.2e}", gradient_check(&probe, &inputs, &y[..20], &w, 1e-6));
    }
    Ok(())
}
