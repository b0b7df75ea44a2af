//! Fits the included-angle prior on freshly rendered scenes and compares the
//! building posterior at a few angles with the bundled model.
//!
//!     cargo run --release --example fit_prior

use std::f64::consts::PI;

use gbi::junction::{detect_junctions, DetectionParams};
use gbi::ljunction::decompose;
use gbi::prior::{fit_model, AnglePool, AnglePriorModel, PriorFitParams};
use gbi::scene::{random_spec, render, scene_seed, SuiteParams};

fn main() -> gbi::Result<()> {
    let suite = SuiteParams::default();
    let detection = DetectionParams::default();
    let mut pool = AnglePool::default();
    for i in 0..12 {
        let scene = render(&random_spec(&suite, scene_seed(1, i))?)?;
        let ljs: Vec<_> = detect_junctions(&scene.image, &detection)?.iter().flat_map(decompose).collect();
        pool.add(&ljs, &scene.mask, scene.image.dims())?;
    }
    println!("{} building and {} background angles", pool.building.len(), pool.background.len());
    let fitted = fit_model(&pool, &PriorFitParams::default())?;
    let shipped = AnglePriorModel::shipped();
    println!("beta    fitted  bundled");
    for div in [6.0, 4.0, 3.0, 2.0, 1.5, 1.2] {
        let beta = PI / div;
        println!("{beta:.3}   {:.3}   {:.3}", fitted.posterior_building(beta), shipped.posterior_building(beta));
    }
    Ok(())
}
