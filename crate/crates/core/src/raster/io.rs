use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{
    ColorType, DynamicImage, ExtendedColorType, GrayImage, ImageEncoder, ImageFormat, ImageReader,
};

use super::Raster;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })
}

/// Reads an 8-bit grayscale or RGB(A) PNG/PGM as brightness in [0, 1].
///
/// RGB pixels are reduced to luma `0.299 R + 0.587 G + 0.114 B`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img.color() {
        ColorType::L8 => img.to_luma8().into_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        ColorType::La8 => img
            .to_luma_alpha8()
            .pixels()
            .map(|p| p.0[0] as f64 / 255.0)
            .collect(),
        ColorType::Rgb8 | ColorType::Rgba8 => img
            .to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                (LUMA[0] * r as f64 + LUMA[1] * g as f64 + LUMA[2] * b as f64) / 255.0
            })
            .collect(),
        other => {
            return Err(Error::format(format!(
                "{}: unsupported pixel format {other:?}, expected 8-bit gray or RGB",
                path.display()
            )))
        }
    };
    Raster::new(w, h, data)
}

/// Reads a footprint mask; pixels brighter than 127 are buildings (1), the rest 0.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Raster> {
    let img = load_image(path)?;
    Ok(img.map(|v| if (v * 255.0).round() > 127.0 { 1.0 } else { 0.0 }))
}

fn quantize(img: &Raster) -> GrayImage {
    let bytes = img
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    GrayImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .expect("buffer matches dimensions")
}

fn codec_error(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes an 8-bit binary PGM (P5); values are clamped to [0, 1] and scaled by 255.
pub fn save_pgm(img: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let gray = quantize(img);
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(gray.as_raw(), gray.width(), gray.height(), ExtendedColorType::L8)
        .map_err(codec_error(path))?;
    write_atomic(path, &buf)
}

/// Writes an 8-bit grayscale PNG with the same quantization as [`save_pgm`].
pub fn save_png(img: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Cursor::new(Vec::new());
    DynamicImage::ImageLuma8(quantize(img))
        .write_to(&mut buf, ImageFormat::Png)
        .map_err(codec_error(path))?;
    write_atomic(path, buf.get_ref())
}

pub(crate) fn save_rgb_png(rgb: image::RgbImage, path: &Path) -> Result<()> {
    let mut buf = Cursor::new(Vec::new());
    DynamicImage::ImageRgb8(rgb)
        .write_to(&mut buf, ImageFormat::Png)
        .map_err(codec_error(path))?;
    write_atomic(path, buf.get_ref())
}
