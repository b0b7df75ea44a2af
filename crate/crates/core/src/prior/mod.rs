//! Included-angle distributions for building and background L-junctions, and
//! the posterior probability that a junction belongs to a building.

mod em;

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use em::{em_fit, em_fit_traced, EmTrace, MAX_ITERATIONS, MIN_STDDEV, TOLERANCE};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::ljunction::LJunction;
use crate::raster::Raster;

/// Overlap fraction above which a junction counts as lying on a building.
pub const BUILDING_OVERLAP: f64 = 0.8;

const SHIPPED_MODEL: &str = include_str!("../../data/default_prior.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub w: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl Component {
    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    pub(crate) fn log_density(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        -0.5 * z * z - self.sigma.ln() - 0.5 * (2.0 * PI).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GaussianMixture {
    pub components: Vec<Component>,
}

impl GaussianMixture {
    /// `sum w_i N(beta; mu_i, sigma_i^2)`.
    pub fn pdf(&self, beta: f64) -> f64 {
        self.components.iter().map(|c| c.w * c.density(beta)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::param("mixture has no components"));
        }
        for c in &self.components {
            if !(c.w.is_finite() && c.w >= 0.0) {
                return Err(Error::param(format!("invalid component weight {}", c.w)));
            }
            if !(c.sigma.is_finite() && c.sigma > 0.0) {
                return Err(Error::param(format!("invalid component stddev {}", c.sigma)));
            }
            if !c.mu.is_finite() {
                return Err(Error::param(format!("invalid component mean {}", c.mu)));
            }
        }
        let total: f64 = self.components.iter().map(|c| c.w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("component weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnglePriorModel {
    pub building: GaussianMixture,
    pub background: GaussianMixture,
    pub prior_building: f64,
}

impl AnglePriorModel {
    /// The model bundled with the crate, fitted on the synthetic suite.
    pub fn shipped() -> Self {
        let model: Self = serde_json::from_str(SHIPPED_MODEL).expect("bundled prior parses");
        model.validate().expect("bundled prior is valid");
        model
    }

    pub fn prior_background(&self) -> f64 {
        1.0 - self.prior_building
    }

    pub fn validate(&self) -> Result<()> {
        self.building.validate()?;
        self.background.validate()?;
        if !(0.0..=1.0).contains(&self.prior_building) {
            return Err(Error::param(format!("prior_building {} is outside [0, 1]", self.prior_building)));
        }
        Ok(())
    }

    /// Posterior probability that a junction with included angle `beta` lies on a building.
    pub fn posterior_building(&self, beta: f64) -> f64 {
        let b = self.building.pdf(beta) * self.prior_building;
        let g = self.background.pdf(beta) * self.prior_background();
        if b + g == 0.0 {
            if self.building.pdf(beta) == 0.0 && self.background.pdf(beta) == 0.0 {
                return self.prior_building;
            }
            return 0.0;
        }
        b / (b + g)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::format(e.to_string()))?;
        text.push('\n');
        write_atomic(path.as_ref(), text.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format(msg) | Error::Param(msg) => Error::format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| Error::format(e.to_string()))?;
        model.validate().map_err(|e| Error::format(e.to_string()))?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Building,
    Background,
}

/// Labels `lj` by the share of its parallelogram's pixels that fall on the
/// mask. Junctions covering no pixel get no label.
pub fn label_junction(lj: &LJunction, mask: &Raster) -> Result<Option<Region>> {
    check_binary(mask)?;
    Ok(label_unchecked(lj, mask))
}

fn label_unchecked(lj: &LJunction, mask: &Raster) -> Option<Region> {
    let (mut inside, mut total) = (0usize, 0usize);
    for (x, y) in lj.parallelogram().covered_pixels(mask.dims()) {
        total += 1;
        if mask.get(x, y) == 1.0 {
            inside += 1;
        }
    }
    if total == 0 {
        return None;
    }
    Some(if inside as f64 / total as f64 > BUILDING_OVERLAP { Region::Building } else { Region::Background })
}

pub(crate) fn check_binary(mask: &Raster) -> Result<()> {
    if mask.data().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::param("mask values must be 0 or 1"));
    }
    Ok(())
}

/// Included angles of building- and background-labeled junctions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnglePool {
    pub building: Vec<f64>,
    pub background: Vec<f64>,
}

impl AnglePool {
    /// Adds the junctions found on an image whose footprint mask is `mask`.
    pub fn add(&mut self, ljs: &[LJunction], mask: &Raster, image_dims: (usize, usize)) -> Result<()> {
        if mask.dims() != image_dims {
            return Err(Error::param(format!(
                "mask is {}x{} but image is {}x{}",
                mask.width(),
                mask.height(),
                image_dims.0,
                image_dims.1
            )));
        }
        check_binary(mask)?;
        for lj in ljs {
            match label_unchecked(lj, mask) {
                Some(Region::Building) => self.building.push(lj.beta()),
                Some(Region::Background) => self.background.push(lj.beta()),
                None => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorFitParams {
    pub building_components: usize,
    pub background_components: usize,
    pub seed: u64,
    /// Defaults to the building share of the pool.
    pub prior_building: Option<f64>,
}

impl Default for PriorFitParams {
    fn default() -> Self {
        Self { building_components: 3, background_components: 4, seed: 17, prior_building: None }
    }
}

impl PriorFitParams {
    pub fn validate(&self) -> Result<()> {
        if self.building_components == 0 || self.background_components == 0 {
            return Err(Error::param("each mixture needs at least one component"));
        }
        if let Some(p) = self.prior_building {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::param(format!("prior_building {p} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Fewest labeled junctions per class accepted by [`fit_model`].
pub const MIN_CLASS_SAMPLES: usize = 30;

pub fn fit_model(pool: &AnglePool, params: &PriorFitParams) -> Result<AnglePriorModel> {
    params.validate()?;
    for (name, v) in [("building", &pool.building), ("background", &pool.background)] {
        if v.len() < MIN_CLASS_SAMPLES {
            return Err(Error::param(format!(
                "only {} {name} junctions labeled, need at least {MIN_CLASS_SAMPLES}",
                v.len()
            )));
        }
    }
    let building = em_fit(&pool.building, params.building_components, params.seed)
        .map_err(|e| Error::param(format!("building mixture: {e}")))?;
    let background = em_fit(&pool.background, params.background_components, params.seed)
        .map_err(|e| Error::param(format!("background mixture: {e}")))?;
    let prior_building = params
        .prior_building
        .unwrap_or(pool.building.len() as f64 / (pool.building.len() + pool.background.len()) as f64);
    let model = AnglePriorModel { building, background, prior_building };
    model.validate()?;
    Ok(model)
}
