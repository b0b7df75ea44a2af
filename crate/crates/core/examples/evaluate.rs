//! Sweeps thresholds over a noisy copy of a footprint mask and prints the
//! precision/recall curve with its AP and best F.
//!
//!     cargo run --release --example evaluate

use gbi::eval::evaluate_image;
use gbi::scene::{random_spec, render, SuiteParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gbi::Result<()> {
    let scene = render(&random_spec(&SuiteParams::default(), 5)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pred = scene.mask.map(|m| 0.35 * m + 0.65 * rng.random::<f64>());
    let report = evaluate_image(&pred, &scene.mask)?;
    println!("threshold precision recall f");
    for p in report.points.iter().step_by(10) {
        println!("{:.2}      {:.3}     {:.3}  {:.3}", p.threshold, p.precision, p.recall, p.f);
    }
    println!("AP {:.4}  best F {:.4} at {:.2}", report.ap, report.best_f, report.best_threshold);
    Ok(())
}
