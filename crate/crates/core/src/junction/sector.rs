//! Branch sectors and the gradient-alignment strength measured inside them.

use std::f64::consts::FRAC_PI_2;

use crate::geometry::{circular_distance, Vec2};
use crate::raster::{wrap_angle, GradientField};

/// Pixel position `(x, y)`.
pub type Pixel = (usize, usize);

/// Angle of the vector from `p` to `q`, in [0, 2π).
#[inline]
pub fn direction(p: Pixel, q: Pixel) -> f64 {
    let dx = q.0 as f64 - p.0 as f64;
    let dy = q.1 as f64 - p.1 as f64;
    wrap_angle(dy.atan2(dx))
}

/// Pixels `q != p` with `|pq| <= s` whose direction from `p` lies within
/// `delta` of `theta`, clipped to a `dims = (width, height)` grid.
pub fn sector_pixels(p: Pixel, s: f64, theta: f64, delta: f64, dims: (usize, usize)) -> Vec<Pixel> {
    let reach = s.floor() as isize;
    let (px, py) = (p.0 as isize, p.1 as isize);
    let mut out = Vec::new();
    for qy in (py - reach).max(0)..=(py + reach).min(dims.1 as isize - 1) {
        for qx in (px - reach).max(0)..=(px + reach).min(dims.0 as isize - 1) {
            if qx == px && qy == py {
                continue;
            }
            let r = ((qx - px) as f64).hypot((qy - py) as f64);
            let q = (qx as usize, qy as usize);
            if r <= s && circular_distance(direction(p, q), theta) <= delta {
                out.push(q);
            }
        }
    }
    out
}

/// `max(|cos(a - alpha)| - |sin(a - alpha)|, 0)`: 1 when the angles agree
/// modulo π, 0 once they differ by π/4 or more.
#[inline]
pub fn alignment(a: f64, alpha: f64) -> f64 {
    let d = a - alpha;
    (d.cos().abs() - d.sin().abs()).max(0.0)
}

/// Strength that pixel `q` lends to a branch from `p` through it: the gradient
/// magnitude at `q` times the alignment between the level line at `q` and the
/// direction `pq`. The level line runs orthogonal to the gradient, so pixels on
/// an edge that passes through `p` contribute fully.
pub fn pairwise_strength(q: Pixel, p: Pixel, grad: &GradientField) -> f64 {
    let m = grad.magnitude.get(q.0, q.1);
    if m == 0.0 {
        return 0.0;
    }
    let level_line = grad.orientation.get(q.0, q.1) + FRAC_PI_2;
    m * alignment(level_line, direction(p, q))
}

/// Sufficient statistics of a sector for the a-contrario test.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SectorStats {
    /// Sum of pairwise strengths.
    pub strength: f64,
    /// Sum of gradient magnitudes.
    pub mass: f64,
    /// Sum of squared gradient magnitudes.
    pub mass_sq: f64,
    pub count: usize,
}

impl SectorStats {
    #[inline]
    pub(crate) fn add(&mut self, gamma: f64, m: f64) {
        self.strength += gamma;
        self.mass += m;
        self.mass_sq += m * m;
        self.count += 1;
    }
}

pub fn sector_stats(p: Pixel, s: f64, theta: f64, delta: f64, grad: &GradientField) -> SectorStats {
    let mut st = SectorStats::default();
    for q in sector_pixels(p, s, theta, delta, grad.dims()) {
        st.add(pairwise_strength(q, p, grad), grad.magnitude.get(q.0, q.1));
    }
    st
}

/// Sum of [`pairwise_strength`] over the sector.
pub fn branch_strength(p: Pixel, s: f64, theta: f64, grad: &GradientField, delta: f64) -> f64 {
    sector_stats(p, s, theta, delta, grad).strength
}

pub(crate) fn pixel_of(v: Vec2) -> Pixel {
    (v.x.round() as usize, v.y.round() as usize)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI, TAU};

    use super::*;
    use crate::raster::{gradient_field, Raster};

    #[test]
    fn sector_matches_exhaustive_scan() {
        let p = (10, 10);
        let got = sector_pixels(p, 3.0, 0.0, FRAC_PI_8, (21, 21));
        let mut expect = Vec::new();
        for y in 0..21usize {
            for x in 0..21usize {
                let (dx, dy) = (x as f64 - 10.0, y as f64 - 10.0);
                if (x, y) == p || dx.hypot(dy) > 3.0 {
                    continue;
                }
                let a = dy.atan2(dx).rem_euclid(TAU);
                if a.min(TAU - a) <= FRAC_PI_8 {
                    expect.push((x, y));
                }
            }
        }
        assert_eq!(got, expect);
        assert_eq!(got, vec![(11, 10), (12, 10), (13, 10)]);
    }

    #[test]
    fn limiting_sector_is_right_neighbour() {
        assert_eq!(sector_pixels((4, 4), 1.0, 0.0, 1e-9, (9, 9)), vec![(5, 4)]);
    }

    #[test]
    fn alignment_examples() {
        assert!((alignment(0.3, 0.3) - 1.0).abs() < 1e-15);
        assert!(alignment(FRAC_PI_2, 0.0) < 1e-15);
        assert!(alignment(FRAC_PI_4, 0.0) < 1e-15);
        assert!((alignment(PI + 0.2, 0.2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pairwise_strength_follows_level_line() {
        // Horizontal ramp: gradient along +x, level lines vertical.
        let img = Raster::from_fn(5, 5, |x, _| x as f64 / 5.0);
        let g = gradient_field(&img).unwrap();
        let m = g.magnitude.get(2, 3);
        assert!((pairwise_strength((2, 3), (2, 1), &g) - m).abs() < 1e-12);
        assert!(pairwise_strength((3, 2), (1, 2), &g) < 1e-12);
        assert!(pairwise_strength((3, 3), (2, 2), &g) < 1e-12);
    }

    #[test]
    fn empty_and_flat_sectors_have_zero_strength() {
        let flat = gradient_field(&Raster::filled(12, 12, 0.4)).unwrap();
        assert_eq!(branch_strength((5, 5), 4.0, 1.0, &flat, 0.3), 0.0);

        let img = Raster::from_fn(12, 12, |x, y| ((x * 3 + y * 5) % 7) as f64 / 7.0);
        let g = gradient_field(&img).unwrap();
        // Corner pixel, sector pointing out of the image.
        assert_eq!(branch_strength((0, 0), 5.0, 5.0 * FRAC_PI_4, &g, 0.3), 0.0);
    }

    #[test]
    fn vertical_step_edge_branch_along_edge() {
        let img = Raster::from_fn(15, 15, |x, _| if x >= 7 { 1.0 } else { 0.0 });
        let g = gradient_field(&img).unwrap();
        let (p, s, theta, delta) = ((7, 7), 6.0, FRAC_PI_2, FRAC_PI_8);

        // Oracle: explicit per-pixel summation with the closed-form alignment.
        let mut oracle = 0.0;
        for y in 0..15usize {
            for x in 0..15usize {
                let (dx, dy) = (x as f64 - 7.0, y as f64 - 7.0);
                let r = dx.hypot(dy);
                if r == 0.0 || r > s {
                    continue;
                }
                let a = dy.atan2(dx).rem_euclid(TAU);
                if (a - theta).abs().min(TAU - (a - theta).abs()) > delta {
                    continue;
                }
                let gx = if x == 0 || x == 14 { 0.0 } else { (img.get(x + 1, y) - img.get(x - 1, y)) / 2.0 };
                let mag = gx.abs() / 0.5;
                // gradient along x, level line along y
                let d = FRAC_PI_2 - a;
                oracle += mag * (d.cos().abs() - d.sin().abs()).max(0.0);
            }
        }
        let got = branch_strength(p, s, theta, &g, delta);
        assert!(got > 0.0);
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    }
}
