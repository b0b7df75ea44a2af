//! Geometric saliency of L-junctions and its rasterization into a building index.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::junction::{detect_junctions, DetectionParams, Junction};
use crate::ljunction::{decompose, LJunction};
use crate::prior::AnglePriorModel;
use crate::raster::{black_top_hat, gaussian_blur, Raster, StructuringElement};

/// How a neighbour's first-order saliency decays with centre distance `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DistanceWeight {
    /// `exp(-d / tau)`.
    #[default]
    Exponential,
    /// `exp(-d^2 / tau^2)`.
    Gaussian,
}

impl DistanceWeight {
    pub fn weight(self, d: f64, tau: f64) -> f64 {
        match self {
            Self::Exponential => (-d / tau).exp(),
            Self::Gaussian => (-(d * d) / (tau * tau)).exp(),
        }
    }
}

/// Which stages of the index are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    /// Weight first-order saliency by the angle posterior.
    pub angle: bool,
    /// Add pairwise saliency from neighbouring junctions.
    pub neighbor: bool,
    /// Multiply by the shadow suppression factor.
    pub shadow: bool,
    /// Blur the raw index before normalization.
    pub blur: bool,
}

impl Stages {
    pub const FULL: Self = Self { angle: true, neighbor: true, shadow: true, blur: true };
    /// First-order `1 - rho` only.
    pub const RAW: Self = Self { angle: false, neighbor: false, shadow: false, blur: false };
}

impl Default for Stages {
    fn default() -> Self {
        Self::FULL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaliencyParams {
    /// Neighbours kept per junction.
    pub neighbors: usize,
    /// Largest allowed ratio between two neighbours' longest branches.
    pub scale_ratio: f64,
    pub weight: DistanceWeight,
    /// Side of the square window for shadow detection.
    pub shadow_window: usize,
    pub blur_side: usize,
    pub blur_sigma: f64,
}

impl Default for SaliencyParams {
    fn default() -> Self {
        Self {
            neighbors: 4,
            scale_ratio: 3.0,
            weight: DistanceWeight::Exponential,
            shadow_window: 51,
            blur_side: 5,
            blur_sigma: 0.5,
        }
    }
}

impl SaliencyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_ratio.is_finite() && self.scale_ratio >= 1.0) {
            return Err(Error::param(format!("scale ratio {} must be at least 1", self.scale_ratio)));
        }
        StructuringElement::square(self.shadow_window)?;
        if self.blur_side.is_multiple_of(2) || !(self.blur_sigma > 0.0) {
            return Err(Error::param("blur needs an odd side and a positive sigma"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyRecord {
    pub junction: LJunction,
    pub g1: f64,
    pub g2: f64,
    pub neighbors: Vec<usize>,
}

impl SaliencyRecord {
    pub fn total(&self) -> f64 {
        self.g1 + self.g2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbiMap {
    /// Accumulated saliency before blurring and normalization.
    pub raw: Raster,
    /// Final index in [0, 1].
    pub index: Raster,
}

/// `(1 - rho) * P(building | beta)`.
pub fn first_order(lj: &LJunction, model: &AnglePriorModel) -> f64 {
    (1.0 - lj.rho) * model.posterior_building(lj.beta())
}

/// Up to `k` junctions nearest to `all[idx]` by centre distance, among those
/// closer than its longest branch and with a longest-branch ratio at most
/// `ratio_limit` either way. Ties go to the lower index.
pub fn find_neighbors(all: &[LJunction], idx: usize, k: usize, ratio_limit: f64) -> Vec<usize> {
    let me = &all[idx];
    let c = me.center();
    let tau = me.max_scale();
    let mut found: Vec<(f64, usize)> = all
        .iter()
        .enumerate()
        .filter(|&(j, other)| {
            if j == idx {
                return false;
            }
            let (a, b) = (tau, other.max_scale());
            c.distance(other.center()) < tau && a <= ratio_limit * b && b <= ratio_limit * a
        })
        .map(|(j, other)| (c.distance(other.center()), j))
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    found.truncate(k);
    found.into_iter().map(|(_, j)| j).collect()
}

/// Distance-weighted sum of the neighbours' first-order saliency.
pub fn pairwise(records: &[SaliencyRecord], idx: usize, weight: DistanceWeight) -> f64 {
    let me = &records[idx].junction;
    let c = me.center();
    let tau = me.max_scale();
    records[idx]
        .neighbors
        .iter()
        .map(|&j| weight.weight(c.distance(records[j].junction.center()), tau) * records[j].g1)
        .sum()
}

/// First-order and pairwise saliency for every junction.
pub fn score_junctions(
    ljs: &[LJunction],
    model: &AnglePriorModel,
    params: &SaliencyParams,
    stages: Stages,
) -> Vec<SaliencyRecord> {
    let mut records: Vec<SaliencyRecord> = ljs
        .par_iter()
        .enumerate()
        .map(|(i, lj)| SaliencyRecord {
            junction: *lj,
            g1: if stages.angle { first_order(lj, model) } else { 1.0 - lj.rho },
            g2: 0.0,
            neighbors: if stages.neighbor {
                find_neighbors(ljs, i, params.neighbors, params.scale_ratio)
            } else {
                Vec::new()
            },
        })
        .collect();
    if stages.neighbor {
        let g2: Vec<f64> = (0..records.len()).into_par_iter().map(|i| pairwise(&records, i, params.weight)).collect();
        for (r, v) in records.iter_mut().zip(g2) {
            r.g2 = v;
        }
    }
    records
}

/// Adds each record's total saliency to every pixel of its parallelogram.
/// Each pixel sums contributions in record order, so the result does not
/// depend on how rows are split across threads.
pub fn accumulate_gbi(records: &[SaliencyRecord], dims: (usize, usize)) -> Raster {
    let (w, h) = dims;
    let mut data = vec![0.0; w * h];
    if w == 0 || h == 0 {
        return Raster::from_vec_unchecked(w, h, data);
    }
    let shapes: Vec<_> = records.iter().map(|r| (r.junction.parallelogram(), r.total())).collect();
    const ROWS: usize = 16;
    data.par_chunks_mut(w * ROWS).enumerate().for_each(|(chunk, out)| {
        let y0 = chunk * ROWS;
        let rows = y0..(y0 + out.len() / w);
        for (shape, value) in &shapes {
            for (x, y) in shape.covered_in_rows(dims, rows.clone()) {
                out[(y - y0) * w + x] += value;
            }
        }
    });
    Raster::from_vec_unchecked(w, h, data)
}

/// `1 - T`, where `T` is the min-max normalized black top-hat of `brightness`;
/// dark pits such as cast shadows get values near 0.
pub fn shadow_factor(brightness: &Raster, window: usize) -> Result<Raster> {
    let hat = black_top_hat(brightness, StructuringElement::square(window)?);
    Ok(hat.normalize_min_max().map(|t| 1.0 - t))
}

pub fn finalize_gbi(raw: &Raster, brightness: &Raster, params: &SaliencyParams, stages: Stages) -> Result<GbiMap> {
    raw.check_same_dims(brightness)?;
    let mut index = if stages.blur { gaussian_blur(raw, params.blur_side, params.blur_sigma)? } else { raw.clone() };
    if stages.shadow {
        index = index.zip_map(&shadow_factor(brightness, params.shadow_window)?, |g, f| g * f)?;
    }
    Ok(GbiMap { raw: raw.clone(), index: index.normalize_min_max() })
}

/// Everything produced while computing the index of one image.
#[derive(Debug, Clone)]
pub struct GbiRun {
    pub junctions: Vec<Junction>,
    pub records: Vec<SaliencyRecord>,
    pub map: GbiMap,
}

/// Detects junctions in `img` and turns them into a building index.
pub fn compute_gbi(
    img: &Raster,
    model: &AnglePriorModel,
    detection: &DetectionParams,
    params: &SaliencyParams,
    stages: Stages,
) -> Result<GbiRun> {
    params.validate()?;
    let junctions = detect_junctions(img, detection)?;
    let (records, map) = gbi_from_junctions(img, &junctions, model, params, stages)?;
    Ok(GbiRun { junctions, records, map })
}

/// The index for already detected junctions; lets ablations share one detection pass.
pub fn gbi_from_junctions(
    img: &Raster,
    junctions: &[Junction],
    model: &AnglePriorModel,
    params: &SaliencyParams,
    stages: Stages,
) -> Result<(Vec<SaliencyRecord>, GbiMap)> {
    let ljs: Vec<LJunction> = junctions.iter().flat_map(decompose).collect();
    let records = score_junctions(&ljs, model, params, stages);
    let raw = accumulate_gbi(&records, img.dims());
    let map = finalize_gbi(&raw, img, params, stages)?;
    Ok((records, map))
}

/// Writes the nonzero pixels of `raw` as `x,y,value` rows.
pub fn write_raw_csv(raw: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("x,y,value\n");
    for y in 0..raw.height() {
        for (x, &v) in raw.row(y).iter().enumerate() {
            if v != 0.0 {
                out.push_str(&format!("{x},{y},{v}\n"));
            }
        }
    }
    write_atomic(path.as_ref(), out.as_bytes())
}
