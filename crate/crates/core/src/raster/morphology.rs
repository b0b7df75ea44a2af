//! Flat square grayscale morphology.
//!
//! A square element is separable, so each operator is a 1-D running min/max
//! over rows followed by columns. Windows are truncated at the border, which
//! is the same as edge replication for min and max.

use std::collections::VecDeque;

use super::Raster;
use crate::error::{Error, Result};

/// Flat square structuring element with an odd side length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuringElement {
    side: usize,
}

impl StructuringElement {
    pub fn square(side: usize) -> Result<Self> {
        if side == 0 || side.is_multiple_of(2) {
            return Err(Error::param(format!(
                "structuring element side must be odd and positive, got {side}"
            )));
        }
        Ok(Self { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    fn radius(&self) -> usize {
        self.side / 2
    }
}

#[derive(Clone, Copy)]
enum Extremum {
    Min,
    Max,
}

impl Extremum {
    #[inline]
    fn dominates(self, a: f64, b: f64) -> bool {
        match self {
            Extremum::Min => a <= b,
            Extremum::Max => a >= b,
        }
    }
}

/// Running extremum over `[i - r, i + r]` clipped to the slice, via a monotone deque.
fn running_extremum(src: &[f64], r: usize, kind: Extremum, dst: &mut [f64]) {
    let n = src.len();
    let mut dq: VecDeque<usize> = VecDeque::with_capacity(2 * r + 1);
    let mut next = 0;
    for i in 0..n {
        let hi = (i + r).min(n - 1);
        while next <= hi {
            while let Some(&back) = dq.back() {
                if kind.dominates(src[next], src[back]) {
                    dq.pop_back();
                } else {
                    break;
                }
            }
            dq.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(r);
        while let Some(&front) = dq.front() {
            if front < lo {
                dq.pop_front();
            } else {
                break;
            }
        }
        dst[i] = src[*dq.front().expect("window is never empty")];
    }
}

fn separable(img: &Raster, se: StructuringElement, kind: Extremum) -> Raster {
    let (w, h) = img.dims();
    let r = se.radius();
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        running_extremum(img.row(y), r, kind, &mut rows[y * w..(y + 1) * w]);
    }
    let mut out = vec![0.0; w * h];
    let mut col = vec![0.0; h];
    let mut res = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = rows[y * w + x];
        }
        running_extremum(&col, r, kind, &mut res);
        for y in 0..h {
            out[y * w + x] = res[y];
        }
    }
    Raster::from_vec_unchecked(w, h, out)
}

pub fn erode(img: &Raster, se: StructuringElement) -> Raster {
    separable(img, se, Extremum::Min)
}

pub fn dilate(img: &Raster, se: StructuringElement) -> Raster {
    separable(img, se, Extremum::Max)
}

/// Dilation followed by erosion.
pub fn close(img: &Raster, se: StructuringElement) -> Raster {
    erode(&dilate(img, se), se)
}

/// Closing minus the original: bright where the image has dark pits smaller
/// than the structuring element. Always non-negative.
pub fn black_top_hat(img: &Raster, se: StructuringElement) -> Raster {
    let closed = close(img, se);
    closed
        .zip_map(img, |c, v| (c - v).max(0.0))
        .expect("closing preserves dimensions")
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn brute(img: &Raster, side: usize, max: bool) -> Raster {
        let r = (side / 2) as isize;
        Raster::from_fn(img.width(), img.height(), |x, y| {
            let mut acc = if max { f64::NEG_INFINITY } else { f64::INFINITY };
            for dy in -r..=r {
                for dx in -r..=r {
                    let v = img.get_clamped(x as isize + dx, y as isize + dy);
                    acc = if max { acc.max(v) } else { acc.min(v) };
                }
            }
            acc
        })
    }

    #[test]
    fn element_must_be_odd() {
        assert!(StructuringElement::square(50).is_err());
        assert!(StructuringElement::square(0).is_err());
        assert_eq!(StructuringElement::square(51).unwrap().side(), 51);
    }

    #[test]
    fn top_hat_of_constant_is_zero() {
        let se = StructuringElement::square(5).unwrap();
        let th = black_top_hat(&Raster::filled(6, 4, 0.7), se);
        assert!(th.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dark_pixel_depth_recovered_by_top_hat() {
        let depth = 0.35;
        let img = Raster::from_fn(9, 9, |x, y| if (x, y) == (4, 4) { 0.8 - depth } else { 0.8 });
        let se = StructuringElement::square(3).unwrap();
        let th = black_top_hat(&img, se);

        let oracle = brute(&brute(&img, 3, true), 3, false);
        for y in 0..9 {
            for x in 0..9 {
                let expect = oracle.get(x, y) - img.get(x, y);
                assert!((th.get(x, y) - expect).abs() < 1e-15);
            }
        }
        assert!((th.get(4, 4) - depth).abs() < 1e-12);
        assert_eq!(th.get(0, 0), 0.0);
    }

    proptest! {
        #[test]
        fn deque_filters_match_brute_force(
            w in 1usize..12, h in 1usize..12, side in prop::sample::select(vec![1usize, 3, 5, 7, 51]),
            seed in prop::collection::vec(0.0f64..1.0, 144),
        ) {
            let img = Raster::from_fn(w, h, |x, y| seed[y * 12 + x]);
            let se = StructuringElement::square(side).unwrap();
            prop_assert_eq!(dilate(&img, se), brute(&img, side, true));
            prop_assert_eq!(erode(&img, se), brute(&img, side, false));
        }

        #[test]
        fn top_hat_nonnegative_and_zero_on_closed(
            w in 1usize..12, h in 1usize..12,
            seed in prop::collection::vec(0.0f64..1.0, 144),
        ) {
            let img = Raster::from_fn(w, h, |x, y| seed[y * 12 + x]);
            let se = StructuringElement::square(3).unwrap();
            prop_assert!(black_top_hat(&img, se).data().iter().all(|&v| v >= 0.0));
            let closed = close(&img, se);
            prop_assert!(black_top_hat(&closed, se).data().iter().all(|&v| v == 0.0));
        }
    }
}
