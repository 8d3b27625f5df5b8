//! Every ordinal discrimination and calibration metric on one prediction
//! set, plus a smoothed calibration curve.

use ordinal_outcome::metrics::{evaluate_all, ici, lowess_curve, niv_ici, LowessOptions, PredictionSet};
use ordinal_outcome::outcome::{Category, ThresholdProfile};
use ordinal_outcome::rng;
use rand::Rng;

fn main() -> ordinal_outcome::error::Result<()> {
    let mut r = rng::stream(9, &[]);
    let (mut profiles, mut labels) = (Vec::new(), Vec::new());
    for _ in 0..1000 {
        let s: f64 = r.random_range(-2.5..2.5);
        let mut q = [0.0; 6];
        for (t, v) in q.iter_mut().enumerate() {
            *v = 1.0 / (1.0 + (-(s - (t as f64 - 2.5))).exp());
        }
        let u: f64 = r.random();
        labels.push(Category::new(q.iter().filter(|&&p| u < p).count())?);
        profiles.push(ThresholdProfile::new(q)?);
    }
    let set = PredictionSet::new(profiles, labels)?;
    for m in evaluate_all(&set, true) {
        println!("{:<18} {:<4} {:.4}", m.metric, m.threshold.map(|t| t.label()).unwrap_or(""), m.value);
    }
    let curve = lowess_curve(&set, ">4".parse()?, LowessOptions::default())?;
    println!("ICI at >4: {:.4} (no-information value at 50% prevalence {:.2})", ici(&curve), niv_ici(0.5));
    for i in (0..curve.p_pred.len()).step_by(200) {
        println!("  predicted {:.3} observed {:.3}", curve.p_pred[i], curve.p_obs[i]);
    }
    Ok(())
}
