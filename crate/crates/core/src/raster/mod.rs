//! Single-channel real-valued images and the per-pixel kernels that run on them.
//!
//! Every kernel treats pixels outside the grid as copies of the nearest edge
//! pixel (edge replication).

mod filter;
mod io;
mod morphology;

pub use filter::{gaussian_blur, gaussian_kernel, gradient_field, wrap_angle, GradientField};
pub use io::{load_image, load_mask, save_pgm, save_png};
pub(crate) use io::save_rgb_png;
pub use morphology::{black_top_hat, close, dilate, erode, StructuringElement};

use crate::error::{Error, Result};

/// Row-major grid of finite real values.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::param(format!(
                "raster data has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0 && value.is_finite());
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Builds a raster by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0);
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                assert!(v.is_finite(), "non-finite value at ({x}, {y})");
                data.push(v);
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Value at a possibly out-of-range position, replicating the border.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination of two rasters of equal dimensions.
    pub fn zip_map(&self, other: &Raster, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        self.check_same_dims(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_vec_unchecked(self.width, self.height, data))
    }

    pub fn check_same_dims(&self, other: &Raster) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::param(format!(
                "dimension mismatch: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Rescales values affinely onto [0, 1]. A constant raster maps to all
    /// zeros when its value is zero and to all ones otherwise.
    pub fn normalize_min_max(&self) -> Self {
        let (lo, hi) = (self.min(), self.max());
        if hi > lo {
            let span = hi - lo;
            self.map(|v| ((v - lo) / span).clamp(0.0, 1.0))
        } else if hi == 0.0 {
            Self::zeros(self.width, self.height)
        } else {
            Self::filled(self.width, self.height, 1.0)
        }
    }

    /// Shifts content by `(dx, dy)`; vacated pixels take `fill`.
    pub fn translate(&self, dx: isize, dy: isize, fill: f64) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            let sx = x as isize - dx;
            let sy = y as isize - dy;
            if sx < 0 || sy < 0 || sx >= self.width as isize || sy >= self.height as isize {
                fill
            } else {
                self.get(sx as usize, sy as usize)
            }
        })
    }

    pub(crate) fn from_vec_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self {
            width,
            height,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(Raster::new(0, 3, vec![]).is_err());
        assert!(Raster::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Raster::new(1, 1, vec![f64::NAN]).is_err());
        assert!(Raster::new(1, 2, vec![0.0, f64::INFINITY]).is_err());
        assert!(Raster::new(2, 1, vec![0.5, 0.25]).is_ok());
    }

    #[test]
    fn clamped_access_replicates_edges() {
        let r = Raster::from_fn(3, 2, |x, y| (x + 10 * y) as f64);
        assert_eq!(r.get_clamped(-5, 0), 0.0);
        assert_eq!(r.get_clamped(7, 1), 12.0);
        assert_eq!(r.get_clamped(1, -1), 1.0);
    }

    #[test]
    fn min_max_normalization() {
        let r = Raster::new(2, 2, vec![0.0, 2.0, 4.0, 1.0]).unwrap();
        assert_eq!(r.normalize_min_max().data(), &[0.0, 0.5, 1.0, 0.25]);
        assert!(Raster::zeros(3, 3).normalize_min_max().data().iter().all(|&v| v == 0.0));
    }
}
