//! Anisotropic branch lengths: each branch of an isotropic seed is grown ring
//! by ring along its direction while the new ring still looks like an edge.

use super::nfa::{self, log_nfa, null_mean, null_std};
use super::sector::{Pixel, SectorStats};
use super::{Branch, DetectionParams, Junction};
use crate::geometry::{circular_distance, Vec2};
use crate::raster::{wrap_angle, GradientField};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

#[derive(Debug, Clone, Copy)]
struct RingOffset {
    dx: isize,
    dy: isize,
    r: f64,
    alpha: f64,
}

/// Integer offsets grouped into unit-width rings `(R-1, R]`, sorted by angle.
pub(crate) struct RingTable {
    rings: Vec<Vec<RingOffset>>,
}

impl RingTable {
    pub(crate) fn new(max_radius: usize) -> Self {
        let mut rings: Vec<Vec<RingOffset>> = vec![Vec::new(); max_radius + 1];
        let reach = max_radius as isize;
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let r = (dx as f64).hypot(dy as f64);
                let ring = r.ceil() as usize;
                if ring <= max_radius {
                    let alpha = wrap_angle((dy as f64).atan2(dx as f64));
                    rings[ring].push(RingOffset { dx, dy, r, alpha });
                }
            }
        }
        for ring in &mut rings {
            ring.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        }
        Self { rings }
    }

    pub(crate) fn max_radius(&self) -> usize {
        self.rings.len() - 1
    }

    /// Calls `f` for every offset in ring `ring` whose angle is within `delta` of `theta`.
    fn for_each_in_arc(&self, ring: usize, theta: f64, delta: f64, mut f: impl FnMut(&RingOffset)) {
        let offs = &self.rings[ring];
        let slack = 1e-9;
        let lo = theta - delta - slack;
        let hi = theta + delta + slack;
        let mut visit = |a: f64, b: f64| {
            let start = offs.partition_point(|o| o.alpha < a);
            for o in &offs[start..] {
                if o.alpha > b {
                    break;
                }
                if circular_distance(o.alpha, theta) <= delta {
                    f(o);
                }
            }
        };
        if lo < 0.0 {
            visit(lo + TAU, TAU);
            visit(0.0, hi);
        } else if hi >= TAU {
            visit(lo, TAU);
            visit(0.0, hi - TAU);
        } else {
            visit(lo, hi);
        }
    }
}

/// Grows branches and rescores junctions against one gradient field.
pub(crate) struct Refiner<'a> {
    pub grad: &'a GradientField,
    pub params: &'a DetectionParams,
    pub table: RingTable,
}

impl<'a> Refiner<'a> {
    pub(crate) fn new(grad: &'a GradientField, params: &'a DetectionParams) -> Self {
        let (w, h) = grad.dims();
        let reach = params.max_branch_length.min(w.max(h) as f64).max(params.largest_scale());
        Self {
            grad,
            params,
            table: RingTable::new(reach.ceil() as usize),
        }
    }

    /// Pairwise strength, magnitude and level-line angle at offset `o` from `p`.
    #[inline]
    fn sample(&self, p: Pixel, o: &RingOffset) -> Option<(f64, f64, f64)> {
        let qx = p.0 as isize + o.dx;
        let qy = p.1 as isize + o.dy;
        let (w, h) = self.grad.dims();
        if qx < 0 || qy < 0 || qx >= w as isize || qy >= h as isize {
            return None;
        }
        let (qx, qy) = (qx as usize, qy as usize);
        let m = self.grad.magnitude.get(qx, qy);
        let level_line = self.grad.orientation.get(qx, qy) + FRAC_PI_2;
        Some((m * super::sector::alignment(level_line, o.alpha), m, level_line))
    }

    /// Statistics of the pixels with `lower < r <= upper` in the arc around `theta`.
    fn band_stats(&self, p: Pixel, lower: f64, upper: f64, theta: f64, delta: f64) -> SectorStats {
        let mut st = SectorStats::default();
        let first = (lower.floor() as usize + 1).max(1);
        let last = (upper.ceil() as usize).min(self.table.max_radius());
        for ring in first..=last {
            self.table.for_each_in_arc(ring, theta, delta, |o| {
                if o.r > lower && o.r <= upper {
                    if let Some((g, m, _)) = self.sample(p, o) {
                        st.add(g, m);
                    }
                }
            });
        }
        st
    }

    pub(crate) fn sector(&self, p: Pixel, b: &Branch) -> SectorStats {
        self.band_stats(p, 0.0, b.scale, b.theta, self.params.delta(b.scale))
    }

    fn ring_passes(&self, st: &SectorStats) -> bool {
        st.mass > 0.0 && st.strength > null_mean(st) + self.params.extension_margin * null_std(st)
    }

    fn extend(&self, p: Pixel, seed: Branch) -> Branch {
        let limit = self.params.max_branch_length.min(self.table.max_radius() as f64);
        let mut scale = seed.scale;
        let mut reached = seed.scale;
        let mut misses = 0;
        loop {
            let outer = reached.floor() + 1.0;
            if outer > limit {
                break;
            }
            let st = self.band_stats(p, reached, outer, seed.theta, self.params.delta(outer));
            if st.count == 0 {
                break;
            }
            reached = outer;
            if self.ring_passes(&st) {
                scale = outer;
                misses = 0;
            } else {
                misses += 1;
                if misses > self.params.extension_gap {
                    break;
                }
            }
        }
        Branch { scale, theta: seed.theta }
    }

    /// Strength-weighted circular mean of the level-line orientations inside
    /// the sector, each folded onto the half turn around the current angle.
    fn reorient(&self, p: Pixel, b: Branch) -> Branch {
        let delta = self.params.delta(b.scale);
        let (mut sx, mut sy) = (0.0, 0.0);
        let last = (b.scale.ceil() as usize).min(self.table.max_radius());
        for ring in 1..=last {
            self.table.for_each_in_arc(ring, b.theta, delta, |o| {
                if o.r <= b.scale {
                    if let Some((g, _, level_line)) = self.sample(p, o) {
                        let d = (level_line - b.theta + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
                        sx += g * d.cos();
                        sy += g * d.sin();
                    }
                }
            });
        }
        if sx == 0.0 && sy == 0.0 {
            b
        } else {
            Branch { scale: b.scale, theta: wrap_angle(b.theta + sy.atan2(sx)) }
        }
    }

    /// Scores a junction at `p` with the given branches.
    pub(crate) fn score(&self, p: Pixel, branches: Vec<Branch>) -> Junction {
        let stats: Vec<SectorStats> = branches.iter().map(|b| self.sector(p, b)).collect();
        let t = stats.iter().map(|s| s.strength).fold(f64::INFINITY, f64::min);
        let ln_tests = self.params.ln_test_count(self.grad.dims(), branches.len());
        let log = log_nfa(t, &stats, ln_tests);
        Junction {
            position: Vec2::new(p.0 as f64, p.1 as f64),
            branches,
            rho: nfa::rho_from_log(log),
            log_nfa: log,
        }
    }

    pub(crate) fn refine(&self, p: Pixel, seeds: &[Branch]) -> Junction {
        let mut branches: Vec<Branch> = seeds
            .iter()
            .map(|&b| self.reorient(p, self.extend(p, b)))
            .collect();
        branches.sort_by(|a, b| a.theta.total_cmp(&b.theta));
        self.score(p, branches)
    }
}

/// Extends every branch of `j` independently along its direction while the
/// per-ring strength stays above the null mean (by the configured margin),
/// re-estimates each direction as the strength-weighted mean level-line angle, and
/// recomputes the significance at the final scales. Branches never shrink.
pub fn refine_anisotropic_scales(j: &Junction, grad: &GradientField, params: &DetectionParams) -> Junction {
    let refiner = Refiner::new(grad, params);
    refiner.refine(j.pixel(), &j.branches)
}

/// True when every pair of branches is separated by more than the angular
/// tolerance at the smallest branch scale.
pub(crate) fn branches_distinct(branches: &[Branch], params: &DetectionParams) -> bool {
    let smallest = branches.iter().map(|b| b.scale).fold(f64::INFINITY, f64::min);
    let delta = params.delta(smallest);
    branches.iter().enumerate().all(|(i, a)| {
        branches[i + 1..]
            .iter()
            .all(|b| circular_distance(a.theta, b.theta) > delta)
    })
}

/// Two branches pointing in nearly opposite directions describe a straight edge.
pub(crate) fn is_straight(branches: &[Branch], params: &DetectionParams) -> bool {
    match branches {
        [a, b] => {
            let delta = params.delta(a.scale.min(b.scale));
            circular_distance(a.theta, b.theta) >= std::f64::consts::PI - delta
        }
        _ => false,
    }
}
