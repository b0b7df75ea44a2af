//! Multi-branch junction detection with per-branch scales and a-contrario
//! significance.

mod detect;
pub mod nfa;
mod refine;
pub mod sector;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use detect::{detect_junctions, detect_junctions_in_field};
pub use refine::refine_anisotropic_scales;
pub use sector::{
    alignment, branch_strength, pairwise_strength, sector_pixels, sector_stats, Pixel, SectorStats,
};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::geometry::Vec2;
use crate::raster::GradientField;

/// One branch of a junction: its length in pixels and direction in [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub scale: f64,
    pub theta: f64,
}

/// A detected junction. `rho` is its NFA clamped to [0, 1]; smaller is more
/// reliable. `log_nfa` keeps the unclamped log so very significant junctions
/// remain comparable after `rho` underflows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub position: Vec2,
    pub branches: Vec<Branch>,
    pub rho: f64,
    pub log_nfa: f64,
}

impl Junction {
    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn pixel(&self) -> Pixel {
        sector::pixel_of(self.position)
    }
}

/// Angular half-width of a branch sector: `atan(arc / s)` clipped to `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AngularTolerance {
    pub arc: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for AngularTolerance {
    fn default() -> Self {
        Self {
            arc: 1.5,
            min: PI / 16.0,
            max: FRAC_PI_4,
        }
    }
}

impl AngularTolerance {
    pub fn at(&self, scale: f64) -> f64 {
        (self.arc / scale).atan().clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionParams {
    /// Candidate isotropic seed scales, strictly increasing.
    pub scales: Vec<f64>,
    /// Orientations sampled per scale, evenly spaced on [0, 2π).
    pub orientation_bins: usize,
    pub tolerance: AngularTolerance,
    /// Junctions with NFA above this are discarded.
    pub epsilon: f64,
    /// Same-order junctions closer than this are suppressed; defaults to the smallest scale.
    pub nms_radius: f64,
    pub max_branches: usize,
    /// A ring extends a branch when its strength clears the null mean by this
    /// many null standard deviations.
    pub extension_margin: f64,
    /// Consecutive failing rings tolerated while extending a branch.
    pub extension_gap: usize,
    pub max_branch_length: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            scales: vec![5.0, 10.0, 15.0, 20.0, 30.0],
            orientation_bins: 64,
            tolerance: AngularTolerance::default(),
            epsilon: 1.0,
            nms_radius: 5.0,
            max_branches: 4,
            extension_margin: 2.0,
            extension_gap: 1,
            max_branch_length: 200.0,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::param("scale ladder is empty"));
        }
        if self.scales[0] < 1.0 || self.scales.iter().any(|s| !s.is_finite()) {
            return Err(Error::param("scales must be finite and at least 1 px"));
        }
        if self.scales.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("scales must be strictly increasing"));
        }
        if !(8..=4096).contains(&self.orientation_bins) {
            return Err(Error::param("orientation_bins must be in [8, 4096]"));
        }
        let t = &self.tolerance;
        if !(t.min > 0.0 && t.min <= t.max && t.max < FRAC_PI_2 && t.arc > 0.0) {
            return Err(Error::param(
                "angular tolerance needs 0 < min <= max < pi/2 and arc > 0",
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::param("epsilon must be positive"));
        }
        if !(self.nms_radius >= 0.0) {
            return Err(Error::param("nms_radius must be non-negative"));
        }
        if self.max_branches < 2 || self.max_branches > self.orientation_bins / 2 {
            return Err(Error::param("max_branches must be in [2, bins/2]"));
        }
        if !(self.extension_margin >= 0.0) {
            return Err(Error::param("extension_margin must be non-negative"));
        }
        if !(self.max_branch_length >= self.largest_scale()) {
            return Err(Error::param("max_branch_length must be at least the largest scale"));
        }
        Ok(())
    }

    pub fn largest_scale(&self) -> f64 {
        *self.scales.last().unwrap_or(&0.0)
    }

    pub fn delta(&self, scale: f64) -> f64 {
        self.tolerance.at(scale)
    }

    pub fn ln_test_count(&self, dims: (usize, usize), branches: usize) -> f64 {
        nfa::ln_test_count(dims, self.scales.len(), self.orientation_bins, branches)
    }
}

/// Minimum branch strength of the junction.
pub fn junction_strength(j: &Junction, grad: &GradientField, params: &DetectionParams) -> f64 {
    let p = j.pixel();
    j.branches
        .iter()
        .map(|b| branch_strength(p, b.scale, b.theta, grad, params.delta(b.scale)))
        .fold(f64::INFINITY, f64::min)
}

/// NFA of a junction given the log number of tests, clamped to [0, 1].
pub fn significance(j: &Junction, grad: &GradientField, params: &DetectionParams, ln_tests: f64) -> f64 {
    nfa::rho_from_log(log_significance(j, grad, params, ln_tests))
}

pub(crate) fn log_significance(
    j: &Junction,
    grad: &GradientField,
    params: &DetectionParams,
    ln_tests: f64,
) -> f64 {
    let p = j.pixel();
    let stats: Vec<SectorStats> = j
        .branches
        .iter()
        .map(|b| sector_stats(p, b.scale, b.theta, params.delta(b.scale), grad))
        .collect();
    let t = stats.iter().map(|s| s.strength).fold(f64::INFINITY, f64::min);
    nfa::log_nfa(t, &stats, ln_tests)
}

/// Writes junctions as CSV: `x,y,rho,m` followed by `m` `(scale, theta)` pairs.
pub fn write_junctions_csv(path: impl AsRef<Path>, junctions: &[Junction]) -> Result<()> {
    let path = path.as_ref();
    let widest = junctions.iter().map(Junction::branch_count).max().unwrap_or(2).max(2);
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let mut header = vec!["x".to_string(), "y".into(), "rho".into(), "m".into()];
    for i in 1..=widest {
        header.push(format!("scale{i}"));
        header.push(format!("theta{i}"));
    }
    w.write_record(&header).map_err(csv_err)?;
    for j in junctions {
        let mut row = vec![
            j.position.x.to_string(),
            j.position.y.to_string(),
            j.rho.to_string(),
            j.branch_count().to_string(),
        ];
        for b in &j.branches {
            row.push(b.scale.to_string());
            row.push(b.theta.to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Reads the format produced by [`write_junctions_csv`]. `log_nfa` is
/// reconstructed as `ln(rho)`.
pub fn read_junctions_csv(path: impl AsRef<Path>) -> Result<Vec<Junction>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::format(format!("missing column {i}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::format(format!("column {i}: {e}")))
        };
        let m = num(3)? as usize;
        if rec.len() != 4 + 2 * m {
            return Err(Error::format(format!(
                "row declares {m} branches but has {} fields",
                rec.len()
            )));
        }
        let branches = (0..m)
            .map(|i| Ok(Branch { scale: num(4 + 2 * i)?, theta: num(5 + 2 * i)? }))
            .collect::<Result<Vec<_>>>()?;
        let rho = num(2)?;
        out.push(Junction {
            position: Vec2::new(num(0)?, num(1)?),
            branches,
            rho,
            log_nfa: rho.ln(),
        });
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{gradient_field, Raster};

    #[test]
    fn default_params_are_valid() {
        let p = DetectionParams::default();
        p.validate().unwrap();
        assert!((p.delta(5.0) - (0.3f64).atan()).abs() < 1e-15);
        assert_eq!(p.delta(30.0), PI / 16.0);
        assert_eq!(p.delta(1.0), FRAC_PI_4);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = DetectionParams::default();
        p.scales = vec![10.0, 5.0];
        assert!(p.validate().is_err());
        let mut p = DetectionParams::default();
        p.epsilon = 0.0;
        assert!(p.validate().is_err());
        let mut p = DetectionParams::default();
        p.tolerance.max = 2.0;
        assert!(p.validate().is_err());
    }

    fn cross_image() -> Raster {
        Raster::from_fn(41, 41, |x, y| if x == 20 || y == 20 { 1.0 } else { 0.0 })
    }

    #[test]
    fn junction_strength_is_min_over_branches() {
        let g = gradient_field(&cross_image()).unwrap();
        let params = DetectionParams::default();
        let branches: Vec<Branch> = (0..4)
            .map(|k| Branch { scale: 10.0, theta: k as f64 * FRAC_PI_2 })
            .collect();
        let j = Junction { position: Vec2::new(20.0, 20.0), branches, rho: 1.0, log_nfa: 0.0 };
        let per_branch: Vec<f64> = j
            .branches
            .iter()
            .map(|b| branch_strength((20, 20), b.scale, b.theta, &g, params.delta(b.scale)))
            .collect();
        let oracle = per_branch.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(oracle > 0.0);
        assert_eq!(junction_strength(&j, &g, &params), oracle);

        // A branch pointing along the diagonal sees no aligned gradient.
        let mut k = j.clone();
        k.branches[0].theta = FRAC_PI_4;
        assert_eq!(junction_strength(&k, &g, &params), 0.0);
        assert_eq!(significance(&k, &g, &params, params.ln_test_count(g.dims(), 4)), 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.csv");
        let js = vec![
            Junction {
                position: Vec2::new(3.0, 4.0),
                branches: vec![Branch { scale: 5.0, theta: 0.5 }, Branch { scale: 7.5, theta: 2.0 }],
                rho: 0.25,
                log_nfa: 0.25f64.ln(),
            },
            Junction {
                position: Vec2::new(10.0, 1.0),
                branches: vec![
                    Branch { scale: 5.0, theta: 0.1 },
                    Branch { scale: 6.0, theta: 1.1 },
                    Branch { scale: 9.0, theta: 4.0 },
                ],
                rho: 1e-30,
                log_nfa: 1e-30f64.ln(),
            },
        ];
        write_junctions_csv(&path, &js).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,y,rho,m,scale1,theta1"));
        assert_eq!(read_junctions_csv(&path).unwrap(), js);
    }

    #[test]
    fn empty_csv_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.csv");
        write_junctions_csv(&path, &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(read_junctions_csv(&path).unwrap().is_empty());
    }
}
