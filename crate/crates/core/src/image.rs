//! Minimal raster type shared by the renderer, the featurizer and the
//! termination detector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Luma weights for RGB to grayscale conversion.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major raster with intensities in `[0, 1]`, one or three channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation(format!("image has zero size {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::validation(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::validation(format!(
                "image buffer holds {} values, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("image contains non-finite intensities"));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels: 1,
            data: vec![value; width * height],
        }
    }

    /// Grayscale intensities, one per pixel.
    pub fn luma(&self) -> Vec<f64> {
        if self.channels == 1 {
            return self.data.clone();
        }
        self.data
            .chunks_exact(3)
            .map(|px| LUMA[0] * px[0] + LUMA[1] * px[1] + LUMA[2] * px[2])
            .collect()
    }

    /// Quantized 8-bit grayscale bytes.
    pub fn to_gray_bytes(&self) -> Vec<u8> {
        self.luma().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
    }

    /// Encode as binary PGM.
    pub fn to_pgm(&self) -> Result<Vec<u8>> {
        use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
        use image::ImageEncoder;

        let mut out = Vec::new();
        PnmEncoder::new(&mut out)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(
                &self.to_gray_bytes(),
                self.width as u32,
                self.height as u32,
                image::ExtendedColorType::L8,
            )
            .map_err(|e| Error::validation(format!("pgm encoding failed: {e}")))?;
        Ok(out)
    }
}

/// Area-averaging resize of a single-channel raster. Each output pixel
/// is the mean of the source area it covers, with fractional coverage at
/// the edges.
pub fn resize_area(src: &[f64], width: usize, height: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    if width == out_w && height == out_h {
        return src.to_vec();
    }
    let x_spans = coverage(width, out_w);
    let y_spans = coverage(height, out_h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for ys in &y_spans {
        for xs in &x_spans {
            let mut acc = 0.0;
            let mut area = 0.0;
            for &(y, wy) in ys {
                let row = &src[y * width..(y + 1) * width];
                for &(x, wx) in xs {
                    acc += row[x] * wx * wy;
                    area += wx * wy;
                }
            }
            out.push(acc / area);
        }
    }
    out
}

/// For each output cell, the source indices it overlaps and the overlap
/// length in source-pixel units.
fn coverage(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let overlap = (hi.min((s + 1) as f64) - lo.max(s as f64)).max(0.0);
                    (overlap > 1e-12).then_some((s, overlap))
                })
                .collect()
        })
        .collect()
}

/// Grayscale, area-resample to `width x height`, and flatten row-major.
pub fn preprocess(image: &Image, width: usize, height: usize) -> Result<Vec<f64>> {
    if image.width == 0 || image.height == 0 || image.data.is_empty() {
        return Err(Error::validation("cannot preprocess an empty image"));
    }
    if width == 0 || height == 0 {
        return Err(Error::validation("target resolution must be nonzero"));
    }
    let gray = image.luma();
    let mut out = resize_area(&gray, image.width, image.height, width, height);
    for v in &mut out {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_path_preserves_values() {
        let data: Vec<f64> = (0..12).map(|i| i as f64 / 12.0).collect();
        let img = Image::gray(4, 3, data.clone()).unwrap();
        let out = preprocess(&img, 4, 3).unwrap();
        for (a, b) in out.iter().zip(&data) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn white_rgb_is_ones() {
        let img = Image::new(5, 5, 3, vec![1.0; 75]).unwrap();
        let out = preprocess(&img, 2, 2).unwrap();
        assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_by_two_block_mean() {
        let img = Image::gray(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(preprocess(&img, 1, 1).unwrap(), vec![0.5]);
    }

    #[test]
    fn fractional_coverage_preserves_mean() {
        let data: Vec<f64> = (0..49).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let mean: f64 = data.iter().sum::<f64>() / 49.0;
        let out = resize_area(&data, 7, 7, 3, 3);
        let out_mean: f64 = out.iter().sum::<f64>() / 9.0;
        assert!((mean - out_mean).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty() {
        assert!(Image::gray(0, 3, vec![]).is_err());
        let bogus = Image {
            width: 0,
            height: 0,
            channels: 1,
            data: vec![],
        };
        assert!(preprocess(&bogus, 4, 4).is_err());
    }

    #[test]
    fn pgm_header() {
        let img = Image::filled(3, 2, 0.5);
        let pgm = img.to_pgm().unwrap();
        assert!(pgm.starts_with(b"P5"));
        assert!(pgm.ends_with(&[128; 6]));
    }
}
