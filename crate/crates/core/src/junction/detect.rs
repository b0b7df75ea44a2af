//! Exhaustive candidate scan over positions, seed scales and orientations.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use super::nfa::{self, log_tail, null_mean};
use super::refine::{branches_distinct, is_straight, Refiner};
use super::sector::{Pixel, SectorStats};
use super::{Branch, DetectionParams, Junction};
use crate::error::{Error, Result};
use crate::geometry::circular_distance;
use crate::raster::{gradient_field, wrap_angle, GradientField, Raster};

/// Detects junctions in `img`.
///
/// Every pixel is tested at every seed scale: the sector strength is sampled
/// at `orientation_bins` directions, local maxima above the null mean become
/// branch hypotheses, and the strongest `M` of them form the junction whose
/// NFA is smallest. Meaningful seeds are thinned by greedy non-maximum
/// suppression in `(NFA, y, x)` order among seeds with the same branch count,
/// then refined to anisotropic scales and rescored. Refined junctions that are
/// no longer meaningful, have merged branches or form a straight line are
/// dropped. Output is sorted by NFA.
pub fn detect_junctions(img: &Raster, params: &DetectionParams) -> Result<Vec<Junction>> {
    params.validate()?;
    check_size(img.dims(), params)?;
    let grad = gradient_field(img)?;
    detect_junctions_in_field(&grad, params)
}

fn check_size(dims: (usize, usize), params: &DetectionParams) -> Result<()> {
    let need = 2.0 * params.largest_scale();
    if (dims.0 as f64) < need || (dims.1 as f64) < need {
        return Err(Error::param(format!(
            "image {}x{} is smaller than twice the largest scale ({need} px)",
            dims.0, dims.1
        )));
    }
    Ok(())
}

/// Same as [`detect_junctions`] on a precomputed gradient field.
pub fn detect_junctions_in_field(grad: &GradientField, params: &DetectionParams) -> Result<Vec<Junction>> {
    params.validate()?;
    check_size(grad.dims(), params)?;

    let table = ScanTable::new(params);
    let (w, h) = grad.dims();
    let comps = Components::new(grad);

    let seeds: Vec<Seed> = (0..h)
        .into_par_iter()
        .map_init(
            || vec![SectorStats::default(); params.scales.len() * params.orientation_bins],
            |acc, y| {
                let mut row = Vec::new();
                for x in 0..w {
                    table.scan_pixel((x, y), &comps, params, acc, &mut row);
                }
                row
            },
        )
        .flatten()
        .collect();

    // Best seed per (position, branch count); ties keep the smaller scale.
    let mut best: HashMap<(Pixel, usize), Seed> = HashMap::new();
    for seed in seeds {
        let key = (seed.pixel, seed.branches.len());
        match best.get(&key) {
            Some(cur) if (cur.log_nfa, cur.scale_idx) <= (seed.log_nfa, seed.scale_idx) => {}
            _ => {
                best.insert(key, seed);
            }
        }
    }
    let mut pool: Vec<Seed> = best.into_values().collect();
    pool.sort_by(|a, b| {
        a.log_nfa
            .total_cmp(&b.log_nfa)
            .then(a.pixel.1.cmp(&b.pixel.1))
            .then(a.pixel.0.cmp(&b.pixel.0))
            .then(a.branches.len().cmp(&b.branches.len()))
    });
    let kept = suppress(pool, params.nms_radius);

    let refiner = Refiner::new(grad, params);
    let ln_eps = params.epsilon.ln();
    let mut out: Vec<Junction> = kept
        .par_iter()
        .map(|s| refiner.refine(s.pixel, &s.branches))
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|j| j.log_nfa <= ln_eps && branches_distinct(&j.branches, params) && !is_straight(&j.branches, params))
        .collect();
    out.sort_by(|a, b| {
        a.log_nfa
            .total_cmp(&b.log_nfa)
            .then(a.position.y.total_cmp(&b.position.y))
            .then(a.position.x.total_cmp(&b.position.x))
            .then(a.branch_count().cmp(&b.branch_count()))
    });
    Ok(out)
}

/// Greedy suppression among junctions with the same branch count; `pool` must
/// already be sorted best first.
fn suppress(pool: Vec<Seed>, radius: f64) -> Vec<Seed> {
    let mut kept: Vec<Seed> = Vec::new();
    for j in pool {
        let clash = kept.iter().any(|k| {
            let (dx, dy) = (k.pixel.0 as f64 - j.pixel.0 as f64, k.pixel.1 as f64 - j.pixel.1 as f64);
            k.branches.len() == j.branches.len() && dx.hypot(dy) <= radius
        });
        if !clash {
            kept.push(j);
        }
    }
    kept
}

struct Seed {
    pixel: Pixel,
    scale_idx: usize,
    branches: Vec<Branch>,
    log_nfa: f64,
}

/// Gradient magnitude with its Cartesian components.
struct Components {
    width: usize,
    height: usize,
    m: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl Components {
    fn new(grad: &GradientField) -> Self {
        let (width, height) = grad.dims();
        let m = grad.magnitude.data().to_vec();
        let (gx, gy) = m
            .iter()
            .zip(grad.orientation.data())
            .map(|(&m, &phi)| (m * phi.cos(), m * phi.sin()))
            .unzip();
        Self { width, height, m, gx, gy }
    }
}

struct ScanOffset {
    dx: isize,
    dy: isize,
    cos_a: f64,
    sin_a: f64,
    runs: std::ops::Range<usize>,
}

/// Precomputed sector membership for every offset within the largest scale.
///
/// Scales sharing the same angular tolerance form a group; an offset is
/// accumulated once, into the smallest scale of each group that contains it,
/// and a prefix sum over the group's scales recovers full sector statistics.
struct ScanTable {
    offsets: Vec<ScanOffset>,
    /// `(start, len)` runs into the flat `[scale][bin]` accumulator.
    runs: Vec<(usize, usize)>,
    /// Scale indices of each group, ascending.
    groups: Vec<Vec<usize>>,
    deltas: Vec<f64>,
    bins: usize,
}

impl ScanTable {
    fn new(params: &DetectionParams) -> Self {
        let bins = params.orientation_bins;
        let deltas: Vec<f64> = params.scales.iter().map(|&s| params.delta(s)).collect();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for k in 0..params.scales.len() {
            match groups.iter_mut().find(|g| deltas[g[0]] == deltas[k]) {
                Some(g) => g.push(k),
                None => groups.push(vec![k]),
            }
        }
        let bin_angle = |b: usize| TAU * b as f64 / bins as f64;

        let reach = params.largest_scale().floor() as isize;
        let mut offsets = Vec::new();
        let mut runs = Vec::new();
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let r = (dx as f64).hypot(dy as f64);
                if r > params.largest_scale() {
                    continue;
                }
                let alpha = wrap_angle((dy as f64).atan2(dx as f64));
                let start = runs.len();
                for g in &groups {
                    let Some(&k) = g.iter().find(|&&k| r <= params.scales[k]) else {
                        continue;
                    };
                    let member: Vec<usize> = (0..bins)
                        .filter(|&b| circular_distance(alpha, bin_angle(b)) <= deltas[k])
                        .collect();
                    for run in contiguous_runs(&member) {
                        runs.push((k * bins + run.0, run.1));
                    }
                }
                offsets.push(ScanOffset {
                    dx,
                    dy,
                    cos_a: alpha.cos(),
                    sin_a: alpha.sin(),
                    runs: start..runs.len(),
                });
            }
        }
        Self { offsets, runs, groups, deltas, bins }
    }

    fn scan_pixel(
        &self,
        p: Pixel,
        comps: &Components,
        params: &DetectionParams,
        acc: &mut [SectorStats],
        out: &mut Vec<Seed>,
    ) {
        acc.iter_mut().for_each(|a| *a = SectorStats::default());
        let (px, py) = (p.0 as isize, p.1 as isize);
        let mut any = false;
        for off in &self.offsets {
            let qx = px + off.dx;
            let qy = py + off.dy;
            if qx < 0 || qy < 0 || qx >= comps.width as isize || qy >= comps.height as isize {
                continue;
            }
            let qi = qy as usize * comps.width + qx as usize;
            let m = comps.m[qi];
            if m == 0.0 {
                continue;
            }
            any = true;
            let (gx, gy) = (comps.gx[qi], comps.gy[qi]);
            // m * max(|sin(phi - a)| - |cos(phi - a)|, 0): level-line alignment.
            let along = (gy * off.cos_a - gx * off.sin_a).abs();
            let across = (gx * off.cos_a + gy * off.sin_a).abs();
            let gamma = (along - across).max(0.0);
            for &(start, len) in &self.runs[off.runs.clone()] {
                for a in &mut acc[start..start + len] {
                    a.add(gamma, m);
                }
            }
        }
        if !any {
            return;
        }
        let bins = self.bins;
        for g in &self.groups {
            for pair in g.windows(2) {
                let (lo, hi) = (pair[0], pair[1]);
                for b in 0..bins {
                    let prev = acc[lo * bins + b];
                    let cur = &mut acc[hi * bins + b];
                    cur.strength += prev.strength;
                    cur.mass += prev.mass;
                    cur.mass_sq += prev.mass_sq;
                    cur.count += prev.count;
                }
            }
        }

        let dims = (comps.width, comps.height);
        for k in 0..params.scales.len() {
            let sectors = &acc[k * bins..(k + 1) * bins];
            if let Some((chosen, log_nfa)) = select_branches(sectors, self.deltas[k], params, dims) {
                let scale = params.scales[k];
                out.push(Seed {
                    pixel: p,
                    scale_idx: k,
                    branches: chosen
                        .into_iter()
                        .map(|b| Branch { scale, theta: TAU * b as f64 / bins as f64 })
                        .collect(),
                    log_nfa,
                });
            }
        }
    }
}

/// Picks the branch set with the smallest NFA at one scale, if meaningful.
fn select_branches(
    sectors: &[SectorStats],
    delta: f64,
    params: &DetectionParams,
    dims: (usize, usize),
) -> Option<(Vec<usize>, f64)> {
    let n = sectors.len();
    let bin_angle = |b: usize| TAU * b as f64 / n as f64;
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&b| {
            let s = sectors[b].strength;
            let prev = sectors[(b + n - 1) % n].strength;
            let next = sectors[(b + 1) % n].strength;
            s > prev && s >= next && s > null_mean(&sectors[b])
        })
        .collect();
    if peaks.len() < 2 {
        return None;
    }
    peaks.sort_by(|&a, &b| sectors[b].strength.total_cmp(&sectors[a].strength).then(a.cmp(&b)));

    let mut chosen: Vec<usize> = Vec::with_capacity(params.max_branches);
    for b in peaks {
        if chosen.len() == params.max_branches {
            break;
        }
        if chosen
            .iter()
            .all(|&c| circular_distance(bin_angle(b), bin_angle(c)) > delta)
        {
            chosen.push(b);
        }
    }

    let ln_eps = params.epsilon.ln();
    let mut best: Option<(f64, usize)> = None;
    for m in 2..=chosen.len() {
        if m == 2 && circular_distance(bin_angle(chosen[0]), bin_angle(chosen[1])) >= PI - delta {
            // Two opposite branches are a straight edge, not a junction.
            continue;
        }
        let t = sectors[chosen[m - 1]].strength;
        let ln_tests = nfa::ln_test_count(dims, params.scales.len(), n, m);
        let log = ln_tests + chosen[..m].iter().map(|&b| log_tail(t, &sectors[b])).sum::<f64>();
        if best.is_none_or(|(l, _)| log < l) {
            best = Some((log, m));
        }
    }
    match best {
        Some((log, m)) if log <= ln_eps => {
            let mut set = chosen[..m].to_vec();
            set.sort_unstable();
            Some((set, log))
        }
        _ => None,
    }
}

/// Splits a sorted list of circular bin indices into `(start, len)` runs.
fn contiguous_runs(sorted: &[usize]) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for &b in sorted {
        match runs.last_mut() {
            Some((s, l)) if *s + *l == b => *l += 1,
            _ => runs.push((b, 1)),
        }
    }
    runs
}
