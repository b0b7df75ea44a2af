//! Deterministic synthetic overhead scenes with known footprints and corners.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{create_dir_all, write_atomic};
use crate::geometry::{included_angle, Vec2};
use crate::ljunction::Parallelogram;
use crate::raster::{save_pgm, Raster};

/// Samples per pixel side when rendering.
const SUPERSAMPLE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub corner: Vec2,
    pub edge1: Vec2,
    pub edge2: Vec2,
    pub intensity: f64,
}

impl Building {
    pub fn region(&self) -> Parallelogram {
        Parallelogram { origin: self.corner, nu1: self.edge1, nu2: self.edge2 }
    }

    /// Vertices with the interior angle at each.
    pub fn corners(&self) -> [Corner; 4] {
        let v = self.region().vertices();
        let beta = included_angle(self.edge1.angle(), self.edge2.angle());
        [
            Corner { position: v[0], beta },
            Corner { position: v[1], beta: PI - beta },
            Corner { position: v[2], beta },
            Corner { position: v[3], beta: PI - beta },
        ]
    }
}

/// Straight band of constant intensity, drawn beneath buildings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub start: Vec2,
    pub end: Vec2,
    pub width: f64,
    pub intensity: f64,
}

impl Road {
    fn contains(&self, pt: Vec2) -> bool {
        let dir = self.end - self.start;
        let len = dir.norm();
        if len == 0.0 {
            return false;
        }
        let d = pt - self.start;
        let along = d.dot(dir) / len;
        (0.0..=len).contains(&along) && d.cross(dir).abs() / len <= self.width / 2.0
    }
}

/// Buildings cast their footprint, shifted by `offset`, darkened by `darkness`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shadow {
    pub offset: Vec2,
    pub darkness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub background: f64,
    pub buildings: Vec<Building>,
    #[serde(default)]
    pub roads: Vec<Road>,
    pub shadow: Option<Shadow>,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub position: Vec2,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: Raster,
    pub mask: Raster,
    pub corners: Vec<Corner>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("scene must have positive dimensions"));
        }
        let unit = |v: f64, what: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::param(format!("{what} {v} is outside [0, 1]")))
            }
        };
        unit(self.background, "background intensity")?;
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::param("noise sigma must be non-negative"));
        }
        if let Some(s) = &self.shadow {
            unit(s.darkness, "shadow darkness")?;
        }
        for r in &self.roads {
            unit(r.intensity, "road intensity")?;
            if !(r.width > 0.0) {
                return Err(Error::param("road width must be positive"));
            }
        }
        let (xmax, ymax) = (self.width as f64 - 1.0, self.height as f64 - 1.0);
        for b in &self.buildings {
            unit(b.intensity, "building intensity")?;
            if b.region().area() <= 0.0 {
                return Err(Error::param("building edges are collinear"));
            }
            for v in b.region().vertices() {
                if !(0.0..=xmax).contains(&v.x) || !(0.0..=ymax).contains(&v.y) {
                    return Err(Error::param(format!("building vertex ({}, {}) is out of bounds", v.x, v.y)));
                }
            }
        }
        Ok(())
    }
}

/// Renders a scene. Image intensities are area averages over each pixel;
/// the mask marks pixel centres inside a building. Buildings whose
/// footprints share a pixel are rejected.
pub fn render(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let dims = (spec.width, spec.height);
    let (w, h) = dims;
    let mut owner: Vec<Option<usize>> = vec![None; w * h];
    for (i, b) in spec.buildings.iter().enumerate() {
        for (x, y) in b.region().covered_pixels(dims) {
            if let Some(j) = owner[y * w + x] {
                return Err(Error::param(format!("buildings {j} and {i} overlap at ({x}, {y})")));
            }
            owner[y * w + x] = Some(i);
        }
    }

    let casts: Vec<Parallelogram> = match &spec.shadow {
        Some(s) => spec
            .buildings
            .iter()
            .map(|b| {
                let mut r = b.region();
                r.origin = r.origin + s.offset;
                r
            })
            .collect(),
        None => Vec::new(),
    };
    let darkness = spec.shadow.map_or(0.0, |s| s.darkness);
    let sample = |pt: Vec2| -> f64 {
        if let Some(b) = spec.buildings.iter().find(|b| b.region().contains(pt)) {
            return b.intensity;
        }
        let mut v = spec.background;
        for r in &spec.roads {
            if r.contains(pt) {
                v = r.intensity;
            }
        }
        if casts.iter().any(|c| c.contains(pt)) {
            v *= 1.0 - darkness;
        }
        v
    };
    // Area coverage by supersampling, so slanted edges are not staircased.
    let step = 1.0 / SUPERSAMPLE as f64;
    let mut img = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let pt = Vec2::new(
                        x as f64 - 0.5 + (sx as f64 + 0.5) * step,
                        y as f64 - 0.5 + (sy as f64 + 0.5) * step,
                    );
                    acc += sample(pt);
                }
            }
            img.push(acc / (SUPERSAMPLE * SUPERSAMPLE) as f64);
        }
    }
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::param(e.to_string()))?;
        for v in &mut img {
            *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    let mask: Vec<f64> = owner.iter().map(|o| if o.is_some() { 1.0 } else { 0.0 }).collect();
    Ok(Scene {
        image: Raster::new(w, h, img)?,
        mask: Raster::new(w, h, mask)?,
        corners: spec.buildings.iter().flat_map(|b| b.corners()).collect(),
    })
}

/// Ranges for randomly drawn scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteParams {
    pub width: usize,
    pub height: usize,
    pub min_buildings: usize,
    pub max_buildings: usize,
    /// Building side lengths, in pixels.
    pub min_side: f64,
    pub max_side: f64,
    /// Intensity gap between buildings and background.
    pub min_contrast: f64,
    pub max_contrast: f64,
    pub noise_sigma: f64,
    /// Share of buildings rotated away from the image axes.
    pub rotated_fraction: f64,
    pub shadows: bool,
    pub max_roads: usize,
    /// Minimum empty gap between any two buildings.
    pub spacing: f64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            width: 160,
            height: 160,
            min_buildings: 2,
            max_buildings: 5,
            min_side: 18.0,
            max_side: 48.0,
            min_contrast: 0.3,
            max_contrast: 0.5,
            noise_sigma: 0.02,
            rotated_fraction: 0.5,
            shadows: true,
            max_roads: 2,
            spacing: 8.0,
        }
    }
}

impl SuiteParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_buildings > self.max_buildings || self.min_side > self.max_side || self.min_side < 2.0 {
            return Err(Error::param("building count and side ranges must be ordered, sides at least 2 px"));
        }
        if !(0.0..=0.6).contains(&self.min_contrast) || self.min_contrast > self.max_contrast || self.max_contrast > 0.6 {
            return Err(Error::param("contrast range must be ordered within [0, 0.6]"));
        }
        if !(0.0..=1.0).contains(&self.rotated_fraction) {
            return Err(Error::param("rotated fraction must be in [0, 1]"));
        }
        let need = 2.0 * self.max_side;
        if (self.width as f64) < need || (self.height as f64) < need {
            return Err(Error::param("scene must be at least twice the largest building side"));
        }
        Ok(())
    }
}

/// Draws a random scene spec. Buildings are placed by rejection sampling and
/// may number fewer than requested when space runs out.
pub fn random_spec(params: &SuiteParams, seed: u64) -> Result<SceneSpec> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background = rng.random_range(0.1..0.35);
    let wanted = rng.random_range(params.min_buildings..=params.max_buildings);
    let shadow = params.shadows.then(|| {
        let a = rng.random_range(0.2..(FRAC_PI_2 - 0.2));
        let len = rng.random_range(3.0..7.0);
        Shadow { offset: Vec2::polar(len, a), darkness: rng.random_range(0.4..0.7) }
    });

    let (xmax, ymax) = (params.width as f64 - 1.0, params.height as f64 - 1.0);
    let margin = 4.0;
    let mut buildings: Vec<Building> = Vec::new();
    for _ in 0..200 {
        if buildings.len() == wanted {
            break;
        }
        let a = rng.random_range(params.min_side..=params.max_side);
        let b = rng.random_range(params.min_side..=params.max_side);
        let angle = if rng.random_bool(params.rotated_fraction) { rng.random_range(0.15..(FRAC_PI_2 - 0.15)) } else { 0.0 };
        let e1 = Vec2::polar(a, angle);
        let e2 = Vec2::polar(b, angle + FRAC_PI_2);
        let xs = [0.0, e1.x, e2.x, e1.x + e2.x];
        let ys = [0.0, e1.y, e2.y, e1.y + e2.y];
        let (lx, hx) = (xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let (ly, hy) = (ys.iter().copied().fold(f64::INFINITY, f64::min), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let (x0, x1) = (margin - lx, xmax - margin - hx);
        let (y0, y1) = (margin - ly, ymax - margin - hy);
        if x0 >= x1 || y0 >= y1 {
            continue;
        }
        let corner = Vec2::new(rng.random_range(x0..x1).round(), rng.random_range(y0..y1).round());
        let contrast = rng.random_range(params.min_contrast..=params.max_contrast);
        let cand = Building { corner, edge1: e1, edge2: e2, intensity: (background + contrast).min(1.0) };
        if buildings.iter().all(|o| separated(o, &cand, params.spacing)) {
            buildings.push(cand);
        }
    }

    let n_roads = rng.random_range(0..=params.max_roads);
    let roads = (0..n_roads)
        .map(|_| {
            let start = Vec2::new(rng.random_range(0.0..xmax), rng.random_range(0.0..ymax));
            let dir = rng.random_range(0.0..PI);
            let len = rng.random_range(0.5..1.0) * xmax.max(ymax);
            Road {
                start,
                end: start + Vec2::polar(len, dir),
                width: rng.random_range(3.0..6.0),
                intensity: (background + rng.random_range(-0.08..0.12)).clamp(0.0, 1.0),
            }
        })
        .collect();

    Ok(SceneSpec {
        width: params.width,
        height: params.height,
        background,
        buildings,
        roads,
        shadow,
        noise_sigma: params.noise_sigma,
        seed: rng.random(),
    })
}

/// Conservative test: the bounding circles, grown by `gap`, do not meet.
fn separated(a: &Building, b: &Building, gap: f64) -> bool {
    let centre = |x: &Building| x.corner + (x.edge1 + x.edge2) * 0.5;
    let radius = |x: &Building| (x.edge1 + x.edge2).norm().max((x.edge1 - x.edge2).norm()) / 2.0;
    centre(a).distance(centre(b)) > radius(a) + radius(b) + gap
}

/// Files written for one scene of a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFiles {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub corners: PathBuf,
}

pub fn scene_files(dir: &Path, index: usize) -> SceneFiles {
    let stem = format!("{index:03}");
    SceneFiles {
        image: dir.join("scenes").join(format!("{stem}.pgm")),
        mask: dir.join("masks").join(format!("{stem}.pgm")),
        corners: dir.join("corners").join(format!("{stem}.csv")),
    }
}

/// Seed of scene `index` in a suite seeded with `seed`.
pub fn scene_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

/// Writes `n` scenes as `scenes/NNN.pgm`, `masks/NNN.pgm` and `corners/NNN.csv`.
pub fn generate_suite(dir: impl AsRef<Path>, n: usize, seed: u64, params: &SuiteParams) -> Result<Vec<SceneFiles>> {
    if n == 0 {
        return Err(Error::param("suite needs at least one scene"));
    }
    params.validate()?;
    let dir = dir.as_ref();
    for sub in ["scenes", "masks", "corners"] {
        create_dir_all(&dir.join(sub))?;
    }
    (0..n)
        .map(|i| {
            let scene = render(&random_spec(params, scene_seed(seed, i))?)?;
            let files = scene_files(dir, i);
            save_pgm(&scene.image, &files.image)?;
            save_pgm(&scene.mask, &files.mask)?;
            write_corners_csv(&files.corners, &scene.corners)?;
            Ok(files)
        })
        .collect()
}

/// `x,y,beta` rows.
pub fn write_corners_csv(path: impl AsRef<Path>, corners: &[Corner]) -> Result<()> {
    let mut out = String::from("x,y,beta\n");
    for c in corners {
        out.push_str(&format!("{},{},{}\n", c.position.x, c.position.y, c.beta));
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

pub fn read_corners_csv(path: impl AsRef<Path>) -> Result<Vec<Corner>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    rdr.deserialize::<(f64, f64, f64)>()
        .map(|row| {
            let (x, y, beta) = row.map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
            Ok(Corner { position: Vec2::new(x, y), beta })
        })
        .collect()
}
