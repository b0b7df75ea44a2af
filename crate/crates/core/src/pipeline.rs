//! Dataset-level runs: prior fitting, ablation and junction overlays.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::{evaluate_dataset, evaluate_thresholds, EvalReport};
use crate::fsutil::write_atomic;
use crate::geometry::Vec2;
use crate::junction::{detect_junctions, DetectionParams, Junction};
use crate::ljunction::decompose;
use crate::prior::{fit_model, AnglePool, AnglePriorModel};
use crate::raster::{load_image, load_mask, save_rgb_png, Raster};
use crate::saliency::{gbi_from_junctions, Stages};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "pgm", "pnm", "ppm"];

/// An image and its footprint mask, named by their shared file stem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetItem {
    pub name: String,
    pub image: PathBuf,
    pub mask: PathBuf,
}

fn images_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
            continue;
        };
        if let Some(prev) = out.insert(stem.clone(), path.clone()) {
            return Err(Error::format(format!(
                "{} and {} share the name {stem}",
                prev.display(),
                path.display()
            )));
        }
    }
    Ok(out)
}

/// Matches the images of two directories by file stem. Any file without a
/// partner is reported, and an empty match is an error.
pub fn pair_by_stem(left: &Path, right: &Path) -> Result<Vec<DatasetItem>> {
    let a = images_by_stem(left)?;
    let b = images_by_stem(right)?;
    let unmatched: Vec<String> = a
        .iter()
        .filter(|(k, _)| !b.contains_key(*k))
        .chain(b.iter().filter(|(k, _)| !a.contains_key(*k)))
        .map(|(_, p)| p.display().to_string())
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::format(format!("files without a partner: {}", unmatched.join(", "))));
    }
    if a.is_empty() {
        return Err(Error::format(format!("no images in {}", left.display())));
    }
    Ok(a.into_iter()
        .zip(b)
        .map(|((name, image), (_, mask))| DatasetItem { name, image, mask })
        .collect())
}

/// Items of a dataset laid out as `scenes/` and `masks/`.
pub fn dataset_items(dir: &Path) -> Result<Vec<DatasetItem>> {
    pair_by_stem(&dir.join("scenes"), &dir.join("masks"))
}

struct Loaded {
    image: Raster,
    mask: Raster,
    junctions: Vec<Junction>,
}

fn load_and_detect(item: &DatasetItem, detection: &DetectionParams) -> Result<Loaded> {
    let image = load_image(&item.image)?;
    let mask = load_mask(&item.mask)?;
    if mask.dims() != image.dims() {
        return Err(Error::format(format!(
            "{}: mask size differs from image size",
            item.mask.display()
        )));
    }
    let junctions = detect_junctions(&image, detection)?;
    Ok(Loaded { image, mask, junctions })
}

/// Labels every L-junction of the dataset. Images are processed in parallel
/// and merged in item order.
pub fn build_pool(items: &[DatasetItem], detection: &DetectionParams) -> Result<AnglePool> {
    let pools: Vec<AnglePool> = items
        .par_iter()
        .map(|item| {
            let l = load_and_detect(item, detection)?;
            let ljs: Vec<_> = l.junctions.iter().flat_map(decompose).collect();
            let mut pool = AnglePool::default();
            pool.add(&ljs, &l.mask, l.image.dims())?;
            Ok(pool)
        })
        .collect::<Result<_>>()?;
    let mut pool = AnglePool::default();
    for p in pools {
        pool.building.extend(p.building);
        pool.background.extend(p.background);
    }
    Ok(pool)
}

pub fn fit_dataset_prior(items: &[DatasetItem], config: &Config) -> Result<(AnglePool, AnglePriorModel)> {
    let pool = build_pool(items, &config.detection)?;
    let model = fit_model(&pool, &config.prior_params())?;
    Ok((pool, model))
}

/// Per-bin counts of labeled angles beside the fitted densities at bin centres.
pub fn angle_histogram_csv(pool: &AnglePool, model: &AnglePriorModel, bins: usize) -> String {
    let width = PI / bins as f64;
    let bin_of = |b: f64| (((b / width).ceil() as usize).max(1) - 1).min(bins - 1);
    let mut counts = vec![[0usize; 2]; bins];
    for &b in &pool.building {
        counts[bin_of(b)][0] += 1;
    }
    for &b in &pool.background {
        counts[bin_of(b)][1] += 1;
    }
    let mut out = String::from("lo,hi,building,background,building_pdf,background_pdf\n");
    for (i, [nb, ng]) in counts.iter().enumerate() {
        let (lo, hi) = (i as f64 * width, (i + 1) as f64 * width);
        let mid = 0.5 * (lo + hi);
        out.push_str(&format!(
            "{lo},{hi},{nb},{ng},{:e},{:e}\n",
            model.building.pdf(mid),
            model.background.pdf(mid)
        ));
    }
    out
}

/// Stage sets compared by an ablation, from raw saliency to the full index.
pub const ABLATION_VARIANTS: [(&str, Stages); 4] = [
    ("raw", Stages::RAW),
    ("+neighbor", Stages { angle: false, neighbor: true, shadow: false, blur: false }),
    ("+angle", Stages { angle: true, neighbor: true, shadow: false, blur: false }),
    ("+shadow", Stages::FULL),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "F")]
    pub mean_f: f64,
}

/// Runs every ablation variant on one shared detection pass per image.
pub fn ablate(items: &[DatasetItem], model: &AnglePriorModel, config: &Config) -> Result<Vec<AblationRow>> {
    let thresholds = config.eval.thresholds()?;
    let per_image: Vec<Vec<(String, EvalReport)>> = items
        .par_iter()
        .map(|item| {
            let l = load_and_detect(item, &config.detection)?;
            ABLATION_VARIANTS
                .iter()
                .map(|(_, stages)| {
                    let (_, map) = gbi_from_junctions(&l.image, &l.junctions, model, &config.saliency, *stages)?;
                    Ok((item.name.clone(), evaluate_thresholds(&map.index, &l.mask, &thresholds)?))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    ABLATION_VARIANTS
        .iter()
        .enumerate()
        .map(|(v, (name, _))| {
            let reports: Vec<_> = per_image.iter().map(|r| r[v].clone()).collect();
            let summary = evaluate_dataset(&reports)?;
            Ok(AblationRow { variant: name.to_string(), map: summary.map, mean_f: summary.mean_f })
        })
        .collect()
}

pub fn write_ablation_csv(rows: &[AblationRow], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("variant,mAP,F\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.variant, r.map, r.mean_f));
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

fn plot(rgb: &mut RgbImage, p: Vec2, color: Rgb<u8>) {
    let (x, y) = (p.x.round(), p.y.round());
    if x >= 0.0 && y >= 0.0 && (x as u32) < rgb.width() && (y as u32) < rgb.height() {
        rgb.put_pixel(x as u32, y as u32, color);
    }
}

/// Draws each branch as a red segment and each centre as a green dot over a
/// gray copy of `img`.
pub fn overlay(img: &Raster, junctions: &[Junction]) -> RgbImage {
    let mut rgb = RgbImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        let v = (img.get(x as usize, y as usize).clamp(0.0, 1.0) * 255.0).round() as u8;
        Rgb([v, v, v])
    });
    for j in junctions {
        for b in &j.branches {
            let steps = (2.0 * b.scale).ceil() as usize;
            let dir = Vec2::polar(1.0, b.theta);
            for i in 0..=steps {
                plot(&mut rgb, j.position + dir * (i as f64 * 0.5), Rgb([255, 0, 0]));
            }
        }
    }
    for j in junctions {
        plot(&mut rgb, j.position, Rgb([0, 255, 0]));
    }
    rgb
}

pub fn save_overlay(img: &Raster, junctions: &[Junction], path: impl AsRef<Path>) -> Result<()> {
    save_rgb_png(overlay(img, junctions), path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::junction::Branch;
    use crate::raster::save_pgm;

    fn touch(dir: &Path, name: &str) {
        save_pgm(&Raster::zeros(4, 4), dir.join(name)).unwrap();
    }

    #[test]
    fn pairs_align_by_stem_and_report_orphans() {
        let root = tempfile::tempdir().unwrap();
        let (a, b) = (root.path().join("a"), root.path().join("b"));
        std::fs::create_dir_all(&a).unwrap();
        std::fs::create_dir_all(&b).unwrap();
        touch(&a, "x.pgm");
        touch(&b, "x.pgm");
        touch(&a, "y.pgm");
        std::fs::write(a.join("notes.txt"), "ignored").unwrap();
        let err = pair_by_stem(&a, &b).unwrap_err().to_string();
        assert!(err.contains("y.pgm"), "{err}");
        touch(&b, "y.pgm");
        let items = pair_by_stem(&a, &b).unwrap();
        assert_eq!(items.iter().map(|i| i.name.as_str()).collect::<Vec<_>>(), ["x", "y"]);
    }

    #[test]
    fn empty_directories_are_errors() {
        let root = tempfile::tempdir().unwrap();
        assert!(pair_by_stem(root.path(), root.path()).is_err());
        assert!(dataset_items(root.path()).is_err());
    }

    #[test]
    fn histogram_counts_every_sample() {
        let pool = AnglePool { building: vec![PI / 2.0, PI, 1e-3], background: vec![0.5; 4] };
        let csv = angle_histogram_csv(&pool, &AnglePriorModel::shipped(), 18);
        let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 18);
        let sum = |c: usize| rows.iter().map(|r| r[c].parse::<usize>().unwrap()).sum::<usize>();
        assert_eq!((sum(2), sum(3)), (3, 4));
        assert_eq!(rows[17][2], "1");
        assert_eq!(rows[0][2], "1");
    }

    #[test]
    fn overlay_marks_centre_and_branch() {
        let img = Raster::filled(20, 20, 0.5);
        let j = Junction {
            position: Vec2::new(5.0, 5.0),
            branches: vec![Branch { scale: 6.0, theta: 0.0 }, Branch { scale: 6.0, theta: PI / 2.0 }],
            rho: 0.0,
            log_nfa: -10.0,
        };
        let rgb = overlay(&img, &[j]);
        assert_eq!(rgb.get_pixel(5, 5).0, [0, 255, 0]);
        assert_eq!(rgb.get_pixel(11, 5).0, [255, 0, 0]);
        assert_eq!(rgb.get_pixel(5, 11).0, [255, 0, 0]);
        assert_eq!(rgb.get_pixel(12, 5).0, [128, 128, 128]);
    }
}
