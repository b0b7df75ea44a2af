//! Two-branch junctions and the parallelograms their branches span.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::geometry::{included_angle, Vec2};
use crate::junction::{Branch, Junction};

/// Pairs with an included angle this close to 0 or π span no area and are dropped.
pub const DEGENERATE_ANGLE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LJunction {
    pub corner: Vec2,
    pub first: Branch,
    pub second: Branch,
    pub rho: f64,
}

impl LJunction {
    /// Returns `None` for (nearly) collinear branch pairs.
    pub fn new(corner: Vec2, first: Branch, second: Branch, rho: f64) -> Option<Self> {
        let lj = Self { corner, first, second, rho };
        let beta = lj.beta();
        (DEGENERATE_ANGLE..=PI - DEGENERATE_ANGLE).contains(&beta).then_some(lj)
    }

    pub fn nu1(&self) -> Vec2 {
        Vec2::polar(self.first.scale, self.first.theta)
    }

    pub fn nu2(&self) -> Vec2 {
        Vec2::polar(self.second.scale, self.second.theta)
    }

    /// Midpoint of the two branch endpoints, which is the parallelogram centre.
    pub fn center(&self) -> Vec2 {
        let q1 = self.corner + self.nu1();
        let q2 = self.corner + self.nu2();
        (q1 + q2) * 0.5
    }

    /// Included angle between the branches, in (0, π).
    pub fn beta(&self) -> f64 {
        included_angle(self.first.theta, self.second.theta)
    }

    /// Longest branch; bounds the neighbour search radius.
    pub fn max_scale(&self) -> f64 {
        self.first.scale.max(self.second.scale)
    }

    pub fn parallelogram(&self) -> Parallelogram {
        Parallelogram { origin: self.corner, nu1: self.nu1(), nu2: self.nu2() }
    }
}

/// Splits a junction into one L-junction per unordered branch pair, each
/// inheriting the junction's significance. Degenerate pairs are skipped.
pub fn decompose(j: &Junction) -> Vec<LJunction> {
    let b = &j.branches;
    let mut out = Vec::with_capacity(b.len() * (b.len().saturating_sub(1)) / 2);
    for i in 0..b.len() {
        for k in i + 1..b.len() {
            if let Some(lj) = LJunction::new(j.position, b[i], b[k], j.rho) {
                out.push(lj);
            }
        }
    }
    out
}

/// The closed region `origin + a * nu1 + b * nu2` with `a, b` in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parallelogram {
    pub origin: Vec2,
    pub nu1: Vec2,
    pub nu2: Vec2,
}

impl Parallelogram {
    /// `p, p + nu1, p + nu1 + nu2, p + nu2`.
    pub fn vertices(&self) -> [Vec2; 4] {
        let p = self.origin;
        [p, p + self.nu1, p + self.nu1 + self.nu2, p + self.nu2]
    }

    pub fn area(&self) -> f64 {
        self.nu1.cross(self.nu2).abs()
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.nu1.norm() + self.nu2.norm())
    }

    /// Closed-region membership, solved by inverting the 2×2 edge basis.
    pub fn contains(&self, pt: Vec2) -> bool {
        const TOL: f64 = 1e-9;
        let det = self.nu1.cross(self.nu2);
        if det == 0.0 {
            return false;
        }
        let d = pt - self.origin;
        let a = d.cross(self.nu2) / det;
        let b = self.nu1.cross(d) / det;
        (-TOL..=1.0 + TOL).contains(&a) && (-TOL..=1.0 + TOL).contains(&b)
    }

    /// Inclusive pixel bounding box clipped to `dims`, or `None` when the
    /// region lies entirely outside the grid.
    fn pixel_bounds(&self, dims: (usize, usize)) -> Option<(usize, usize, usize, usize)> {
        let v = self.vertices();
        let fold = |f: fn(f64, f64) -> f64, init: f64, sel: fn(&Vec2) -> f64| v.iter().map(sel).fold(init, f);
        let (x0, x1) = (fold(f64::min, f64::INFINITY, |p| p.x), fold(f64::max, f64::NEG_INFINITY, |p| p.x));
        let (y0, y1) = (fold(f64::min, f64::INFINITY, |p| p.y), fold(f64::max, f64::NEG_INFINITY, |p| p.y));
        let lo = |v: f64| (v - 1e-9).ceil().max(0.0);
        let (xa, xb) = (lo(x0), (x1 + 1e-9).floor().min(dims.0 as f64 - 1.0));
        let (ya, yb) = (lo(y0), (y1 + 1e-9).floor().min(dims.1 as f64 - 1.0));
        (xa <= xb && ya <= yb).then_some((xa as usize, xb as usize, ya as usize, yb as usize))
    }

    /// Integer pixel centres inside the region, row by row, clipped to `dims`.
    pub fn covered_pixels(&self, dims: (usize, usize)) -> impl Iterator<Item = (usize, usize)> + '_ {
        let bounds = self.pixel_bounds(dims);
        bounds
            .into_iter()
            .flat_map(|(xa, xb, ya, yb)| (ya..=yb).flat_map(move |y| (xa..=xb).map(move |x| (x, y))))
            .filter(move |&(x, y)| self.contains(Vec2::new(x as f64, y as f64)))
    }

    /// Covered pixels of rows `rows`, for row-partitioned rasterization.
    pub(crate) fn covered_in_rows(
        &self,
        dims: (usize, usize),
        rows: std::ops::Range<usize>,
    ) -> impl Iterator<Item = (usize, usize)> + '_ {
        let bounds = self.pixel_bounds(dims).and_then(|(xa, xb, ya, yb)| {
            let ya = ya.max(rows.start);
            let yb = yb.min(rows.end.saturating_sub(1));
            (rows.end > 0 && ya <= yb).then_some((xa, xb, ya, yb))
        });
        bounds
            .into_iter()
            .flat_map(|(xa, xb, ya, yb)| (ya..=yb).flat_map(move |y| (xa..=xb).map(move |x| (x, y))))
            .filter(move |&(x, y)| self.contains(Vec2::new(x as f64, y as f64)))
    }
}

/// Writes `x,y,cx,cy,s1,theta1,s2,theta2,beta,rho` rows.
pub fn write_ljunctions_csv(path: impl AsRef<Path>, items: &[LJunction]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fmt = |e: csv::Error| Error::format(e.to_string());
    w.write_record(["x", "y", "cx", "cy", "s1", "theta1", "s2", "theta2", "beta", "rho"])
        .map_err(fmt)?;
    for lj in items {
        let c = lj.center();
        let row = [
            lj.corner.x,
            lj.corner.y,
            c.x,
            c.y,
            lj.first.scale,
            lj.first.theta,
            lj.second.scale,
            lj.second.theta,
            lj.beta(),
            lj.rho,
        ];
        w.write_record(row.iter().map(|v| v.to_string())).map_err(fmt)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(e.to_string()))?;
    write_atomic(path.as_ref(), &bytes)
}
