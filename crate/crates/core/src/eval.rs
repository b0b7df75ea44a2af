//! Pixel-level precision/recall sweeps against binary footprint masks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::prior::check_binary;
use crate::raster::Raster;

/// Number of thresholds in a sweep: `0.00, 0.01, ..., 1.00`.
pub const THRESHOLD_COUNT: usize = 101;

pub fn threshold(i: usize) -> f64 {
    i as f64 / (THRESHOLD_COUNT - 1) as f64
}

/// Threshold sweep settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    /// Spacing of the sweep over [0, 1]; `1 / step` must be a whole number.
    pub step: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self { step: 1.0 / (THRESHOLD_COUNT - 1) as f64 }
    }
}

impl EvalParams {
    pub fn validate(&self) -> Result<()> {
        self.count().map(|_| ())
    }

    fn count(&self) -> Result<usize> {
        let n = (1.0 / self.step).round();
        if !(self.step > 0.0 && self.step <= 1.0) || (n * self.step - 1.0).abs() > 1e-9 || n > 1e6 {
            return Err(Error::param(format!("threshold step {} must divide 1 evenly", self.step)));
        }
        Ok(n as usize)
    }

    /// `0, step, 2 step, ..., 1`.
    pub fn thresholds(&self) -> Result<Vec<f64>> {
        let n = self.count()?;
        Ok((0..=n).map(|i| i as f64 / n as f64).collect())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn check_pair(pred: &Raster, gt: &Raster) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::param(format!(
            "prediction is {}x{} but mask is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    check_binary(gt)
}

/// Counts with a pixel predicted positive iff `pred >= t`.
pub fn confusion(pred: &Raster, gt: &Raster, t: f64) -> Result<Confusion> {
    check_pair(pred, gt)?;
    let mut c = Confusion::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        match (p >= t, g == 1.0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Precision is 1 when nothing is predicted; recall is 1 when nothing is true.
pub fn precision_recall(c: &Confusion) -> (f64, f64) {
    let p = if c.tp + c.fp == 0 { 1.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
    let r = if c.tp + c.fn_ == 0 { 1.0 } else { c.tp as f64 / (c.tp + c.fn_) as f64 };
    (p, r)
}

pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl EvalPoint {
    pub fn from_confusion(threshold: f64, c: &Confusion) -> Self {
        let (precision, recall) = precision_recall(c);
        Self { threshold, precision, recall, f: f_score(precision, recall) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub points: Vec<EvalPoint>,
    pub ap: f64,
    pub best_f: f64,
    pub best_threshold: f64,
}

impl EvalReport {
    /// Summarizes a sweep; the best F ties to the lowest threshold.
    pub fn from_points(points: Vec<EvalPoint>) -> Result<Self> {
        let ap = average_precision(&points)?;
        let best = points.iter().fold(points[0], |b, p| if p.f > b.f { *p } else { b });
        Ok(Self { ap, best_f: best.f, best_threshold: best.threshold, points })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path.as_ref())
    }

    /// `threshold,precision,recall,f` rows.
    pub fn write_pr_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("threshold,precision,recall,f\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.threshold, p.precision, p.recall, p.f));
        }
        write_atomic(path.as_ref(), out.as_bytes())
    }
}

/// Area under the precision-recall curve by the trapezoid rule. Points are
/// ordered by recall (ties by descending threshold) and the curve is extended
/// to recall 0 at the highest precision observed.
pub fn average_precision(points: &[EvalPoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::param("average precision needs at least two points"));
    }
    let mut pts: Vec<(f64, f64, f64)> = points.iter().map(|p| (p.recall, p.threshold, p.precision)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let top = pts.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    let mut area = 0.0;
    let (mut r0, mut p0) = (0.0, top);
    for &(r, _, p) in &pts {
        area += (r - r0) * (p + p0) / 2.0;
        r0 = r;
        p0 = p;
    }
    Ok(area)
}

/// Sweeps the standard thresholds over one prediction map.
pub fn evaluate_image(pred: &Raster, gt: &Raster) -> Result<EvalReport> {
    check_pair(pred, gt)?;
    let thresholds: Vec<f64> = (0..THRESHOLD_COUNT).map(threshold).collect();
    evaluate_thresholds(pred, gt, &thresholds)
}

/// Sweeps arbitrary ascending thresholds, counting each pixel once.
pub fn evaluate_thresholds(pred: &Raster, gt: &Raster, thresholds: &[f64]) -> Result<EvalReport> {
    check_pair(pred, gt)?;
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("thresholds must be strictly ascending"));
    }
    // pos[i] / neg[i]: building / background pixels passing exactly the first i thresholds.
    let n = thresholds.len();
    let mut pos = vec![0u64; n + 1];
    let mut neg = vec![0u64; n + 1];
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let passed = thresholds.partition_point(|&t| t <= p);
        if g == 1.0 {
            pos[passed] += 1;
        } else {
            neg[passed] += 1;
        }
    }
    let total_pos: u64 = pos.iter().sum();
    let total_neg: u64 = neg.iter().sum();
    let (mut tp, mut fp) = (total_pos, total_neg);
    let mut points = Vec::with_capacity(n);
    for (i, &t) in thresholds.iter().enumerate() {
        // Pixels passing fewer than i + 1 thresholds are negative at t.
        tp -= pos[i];
        fp -= neg[i];
        let c = Confusion { tp, fp, fn_: total_pos - tp, tn: total_neg - fp };
        points.push(EvalPoint::from_confusion(t, &c));
    }
    EvalReport::from_points(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub name: String,
    pub ap: f64,
    pub best_f: f64,
    pub best_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    #[serde(rename = "mAP")]
    pub map: f64,
    pub mean_f: f64,
    pub images: Vec<ImageScore>,
}

impl DatasetSummary {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path.as_ref())
    }
}

/// Mean AP and mean best F over named per-image reports, listed by name.
pub fn evaluate_dataset(reports: &[(String, EvalReport)]) -> Result<DatasetSummary> {
    if reports.is_empty() {
        return Err(Error::param("dataset has no images"));
    }
    let mut images: Vec<ImageScore> = reports
        .iter()
        .map(|(name, r)| ImageScore { name: name.clone(), ap: r.ap, best_f: r.best_f, best_threshold: r.best_threshold })
        .collect();
    images.sort_by(|a, b| a.name.cmp(&b.name));
    let n = images.len() as f64;
    Ok(DatasetSummary {
        map: images.iter().map(|s| s.ap).sum::<f64>() / n,
        mean_f: images.iter().map(|s| s.best_f).sum::<f64>() / n,
        images,
    })
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
