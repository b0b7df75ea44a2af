//! Writes a small synthetic suite and reports how many corners each scene has.
//!
//!     cargo run --release --example synthetic_suite [out_dir]

use gbi::scene::{generate_suite, read_corners_csv, SuiteParams};

fn main() -> gbi::Result<()> {
    let keep = std::env::args().nth(1);
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = keep.as_deref().map(std::path::Path::new).unwrap_or(tmp.path());
    let files = generate_suite(dir, 5, 7, &SuiteParams::default())?;
    for f in &files {
        let corners = read_corners_csv(&f.corners)?;
        println!("{} {} corners", f.image.display(), corners.len());
    }
    Ok(())
}
