use std::f64::consts::TAU;

use super::Raster;
use crate::error::{Error, Result};

/// Normalized 1-D Gaussian taps of odd length `side`.
pub fn gaussian_kernel(side: usize, sigma: f64) -> Result<Vec<f64>> {
    if side == 0 || side.is_multiple_of(2) {
        return Err(Error::param(format!("kernel side must be odd, got {side}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    let half = (side / 2) as f64;
    let mut taps: Vec<f64> = (0..side)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

/// Separable Gaussian smoothing with edge replication.
pub fn gaussian_blur(img: &Raster, side: usize, sigma: f64) -> Result<Raster> {
    let taps = gaussian_kernel(side, sigma)?;
    let half = (side / 2) as isize;
    let (w, h) = img.dims();

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * img.get_clamped(x as isize + k as isize - half, y as isize);
            }
            tmp[y * w + x] = acc;
        }
    }
    let tmp = Raster::from_vec_unchecked(w, h, tmp);

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * tmp.get_clamped(x as isize, y as isize + k as isize - half);
            }
            out[y * w + x] = acc;
        }
    }
    Ok(Raster::from_vec_unchecked(w, h, out))
}

/// Max-normalized gradient magnitude and gradient direction of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    /// Gradient norm divided by its image-wide maximum, in [0, 1].
    pub magnitude: Raster,
    /// `atan2(dy, dx)` in [0, 2π); zero where the gradient vanishes.
    pub orientation: Raster,
}

impl GradientField {
    pub fn dims(&self) -> (usize, usize) {
        self.magnitude.dims()
    }
}

/// Central differences inside the grid, one-sided differences on the border.
pub fn gradient_field(img: &Raster) -> Result<GradientField> {
    let (w, h) = img.dims();
    if w < 2 || h < 2 {
        return Err(Error::param(format!(
            "gradient needs at least 2x2 pixels, got {w}x{h}"
        )));
    }
    let diff = |lo: f64, hi: f64, span: f64| (hi - lo) / span;

    let mut mag = vec![0.0; w * h];
    let mut ori = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let dx = match x {
                0 => diff(img.get(0, y), img.get(1, y), 1.0),
                _ if x == w - 1 => diff(img.get(x - 1, y), img.get(x, y), 1.0),
                _ => diff(img.get(x - 1, y), img.get(x + 1, y), 2.0),
            };
            let dy = match y {
                0 => diff(img.get(x, 0), img.get(x, 1), 1.0),
                _ if y == h - 1 => diff(img.get(x, y - 1), img.get(x, y), 1.0),
                _ => diff(img.get(x, y - 1), img.get(x, y + 1), 2.0),
            };
            let i = y * w + x;
            mag[i] = dx.hypot(dy);
            ori[i] = if mag[i] > 0.0 { wrap_angle(dy.atan2(dx)) } else { 0.0 };
        }
    }

    let peak = mag.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        mag.iter_mut().for_each(|m| *m = (*m / peak).min(1.0));
    }
    Ok(GradientField {
        magnitude: Raster::from_vec_unchecked(w, h, mag),
        orientation: Raster::from_vec_unchecked(w, h, ori),
    })
}

/// Maps any finite angle into [0, 2π).
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;

    #[test]
    fn blur_rejects_even_side() {
        assert!(gaussian_blur(&Raster::zeros(4, 4), 4, 1.0).is_err());
        assert!(gaussian_blur(&Raster::zeros(4, 4), 3, 0.0).is_err());
    }

    #[test]
    fn blur_keeps_constants() {
        let img = Raster::filled(7, 5, 0.37);
        let out = gaussian_blur(&img, 5, 0.5).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.37).abs() < 1e-15));
    }

    #[test]
    fn blur_of_single_pixel_is_identity() {
        let img = Raster::filled(1, 1, 0.8);
        assert!((gaussian_blur(&img, 5, 0.5).unwrap().get(0, 0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn blur_impulse_matches_direct_kernel_evaluation() {
        // Oracle: evaluate the 2-D Gaussian at each tap and normalize by the sum.
        let sigma: f64 = 0.5;
        let g = |dx: f64, dy: f64| (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        let total: f64 = (-1..=1)
            .flat_map(|j| (-1..=1).map(move |i| g(i as f64, j as f64)))
            .sum();

        let img = Raster::from_fn(5, 5, |x, y| if x == 2 && y == 2 { 1.0 } else { 0.0 });
        let out = gaussian_blur(&img, 3, sigma).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                let (dx, dy) = (x as isize - 2, y as isize - 2);
                let expect = if dx.abs() <= 1 && dy.abs() <= 1 {
                    g(dx as f64, dy as f64) / total
                } else {
                    0.0
                };
                assert!((out.get(x, y) - expect).abs() < 1e-12, "({x},{y})");
            }
        }
    }

    #[test]
    fn ramp_gradients() {
        let w = 8;
        let img = Raster::from_fn(w, 6, |x, _| x as f64 / w as f64);
        let g = gradient_field(&img).unwrap();
        for y in 1..5 {
            for x in 1..w - 1 {
                assert!((g.magnitude.get(x, y) - 1.0).abs() < 1e-12);
                assert_eq!(g.orientation.get(x, y), 0.0);
            }
        }

        let h = 6;
        let img = Raster::from_fn(5, h, |_, y| y as f64 / h as f64);
        let g = gradient_field(&img).unwrap();
        for y in 1..h - 1 {
            for x in 1..4 {
                assert!((g.orientation.get(x, y) - FRAC_PI_2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_image_has_zero_gradient() {
        let g = gradient_field(&Raster::filled(4, 4, 0.3)).unwrap();
        assert!(g.magnitude.data().iter().all(|&v| v == 0.0));
        assert!(g.orientation.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_rejects_thin_images() {
        assert!(gradient_field(&Raster::zeros(1, 5)).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(-1e-300), 0.0);
        assert!((wrap_angle(-FRAC_PI_2) - 3.0 * FRAC_PI_2).abs() < 1e-12);
        assert!(wrap_angle(TAU) < TAU);
    }
}
