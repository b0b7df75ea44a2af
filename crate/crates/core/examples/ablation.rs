//! Compares the stage combinations of the index on a synthetic suite, sharing
//! one detection pass per scene.
//!
//!     cargo run --release --example ablation [scenes]

use gbi::eval::evaluate_image;
use gbi::junction::{detect_junctions, DetectionParams};
use gbi::pipeline::ABLATION_VARIANTS;
use gbi::prior::AnglePriorModel;
use gbi::saliency::{gbi_from_junctions, SaliencyParams};
use gbi::scene::{random_spec, render, scene_seed, SuiteParams};

fn main() -> gbi::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let model = AnglePriorModel::shipped();
    let params = SaliencyParams::default();
    let mut f = [0.0; ABLATION_VARIANTS.len()];
    for i in 0..n {
        let scene = render(&random_spec(&SuiteParams::default(), scene_seed(7, i))?)?;
        let junctions = detect_junctions(&scene.image, &DetectionParams::default())?;
        for (k, (_, stages)) in ABLATION_VARIANTS.iter().enumerate() {
            let (_, map) = gbi_from_junctions(&scene.image, &junctions, &model, &params, *stages)?;
            f[k] += evaluate_image(&map.index, &scene.mask)?.best_f / n as f64;
        }
    }
    for ((name, _), f) in ABLATION_VARIANTS.iter().zip(f) {
        println!("{name:<10} F {f:.3}");
    }
    Ok(())
}
