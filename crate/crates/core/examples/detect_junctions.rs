//! Detects junctions on a rendered rectangle, or on an image given as the
//! first argument, and prints each with its L-junction angles.
//!
//!     cargo run --release --example detect_junctions [image.png]

use gbi::geometry::Vec2;
use gbi::junction::{detect_junctions, DetectionParams};
use gbi::ljunction::decompose;
use gbi::raster::load_image;
use gbi::scene::{render, Building, SceneSpec};

fn main() -> gbi::Result<()> {
    let img = match std::env::args().nth(1) {
        Some(path) => load_image(path)?,
        None => {
            let spec = SceneSpec {
                width: 128,
                height: 128,
                background: 0.2,
                buildings: vec![Building {
                    corner: Vec2::new(30.0, 40.0),
                    edge1: Vec2::new(50.0, 12.0),
                    edge2: Vec2::new(-8.0, 33.0),
                    intensity: 0.7,
                }],
                roads: vec![],
                shadow: None,
                noise_sigma: 0.02,
                seed: 1,
            };
            let scene = render(&spec)?;
            for c in &scene.corners {
                println!("true corner ({:.1}, {:.1}) beta {:.3}", c.position.x, c.position.y, c.beta);
            }
            scene.image
        }
    };
    let junctions = detect_junctions(&img, &DetectionParams::default())?;
    println!("{} junctions", junctions.len());
    for j in &junctions {
        let betas: Vec<String> = decompose(j).iter().map(|l| format!("{:.3}", l.beta())).collect();
        println!(
            "({:5.1}, {:5.1}) branches {} rho {:.2e} beta [{}]",
            j.position.x,
            j.position.y,
            j.branch_count(),
            j.rho,
            betas.join(", ")
        );
    }
    Ok(())
}
