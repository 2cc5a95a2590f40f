//! Grayscale raster with real-valued intensities.

use crate::error::{Error, Result};

/// H×W grayscale image, row-major.
///
/// Intensities nominally live in [0, 255] but any finite real is allowed:
/// mixed examples are zero-mean and signed.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

/// How out-of-range integer coordinates are mapped back into the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Border {
    /// Clamp to the nearest edge pixel.
    Replicate,
    /// Mirror about the edge, repeating the edge pixel (`-1 -> 0`).
    Reflect,
}

impl Border {
    #[inline]
    fn index(self, i: isize, n: usize) -> usize {
        let n = n as isize;
        match self {
            Border::Replicate => i.clamp(0, n - 1) as usize,
            Border::Reflect => {
                if n == 1 {
                    return 0;
                }
                let period = 2 * n;
                let mut k = i.rem_euclid(period);
                if k >= n {
                    k = period - 1 - k;
                }
                k as usize
            }
        }
    }
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage(format!("empty extent {height}x{width}")));
        }
        if pixels.len() != height * width {
            return Err(Error::InvalidImage(format!(
                "buffer of {} pixels for {height}x{width}",
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidImage(format!("non-finite pixel {p}")));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image extent must be non-zero");
        Self { height, width, pixels: vec![value; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "image extent must be non-zero");
        let mut pixels = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                pixels.push(f(i, j));
            }
        }
        Self { height, width, pixels }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[i * self.width + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.pixels[i * self.width + j] = value;
    }

    /// Pixel at integer coordinates that may lie outside the image.
    #[inline]
    pub fn get_border(&self, i: isize, j: isize, border: Border) -> f64 {
        self.get(border.index(i, self.height), border.index(j, self.width))
    }

    /// Bilinear sample at fractional `(y, x)` (row, column) coordinates.
    pub fn sample_bilinear(&self, y: f64, x: f64, border: Border) -> f64 {
        let y0 = y.floor();
        let x0 = x.floor();
        let fy = y - y0;
        let fx = x - x0;
        let (y0, x0) = (y0 as isize, x0 as isize);
        let p00 = self.get_border(y0, x0, border);
        if fy == 0.0 && fx == 0.0 {
            return p00;
        }
        let p01 = self.get_border(y0, x0 + 1, border);
        let p10 = self.get_border(y0 + 1, x0, border);
        let p11 = self.get_border(y0 + 1, x0 + 1, border);
        let top = p00 + (p01 - p00) * fx;
        let bottom = p10 + (p11 - p10) * fx;
        top + (bottom - top) * fy
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        image_stats(self).1
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)))
    }

    /// The image with its own mean removed.
    pub fn centered(&self) -> Self {
        let mean = self.mean();
        self.map(|p| p - mean)
    }

    /// Area-averaging resize. Each output pixel is the coverage-weighted mean
    /// of the input pixels its footprint overlaps.
    pub fn resize_area(&self, height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "image extent must be non-zero");
        if (height, width) == self.dims() {
            return self.clone();
        }
        let rows = area_weights(self.height, height);
        let cols = area_weights(self.width, width);
        let mut out = Vec::with_capacity(height * width);
        for row in &rows {
            for col in &cols {
                let mut acc = 0.0;
                let mut total = 0.0;
                for &(i, wi) in row {
                    for &(j, wj) in col {
                        acc += wi * wj * self.get(i, j);
                        total += wi * wj;
                    }
                }
                out.push(acc / total);
            }
        }
        Self { height, width, pixels: out }
    }

    /// Bilinear resize with pixel-centre alignment and edge replication.
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "image extent must be non-zero");
        if (height, width) == self.dims() {
            return self.clone();
        }
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        Self::from_fn(height, width, |i, j| {
            let y = (i as f64 + 0.5) * sy - 0.5;
            let x = (j as f64 + 0.5) * sx - 0.5;
            self.sample_bilinear(y, x, Border::Replicate)
        })
    }

    pub fn same_dims(&self, other: &GrayImage) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dims(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", other.height, other.width),
            ));
        }
        Ok(())
    }
}

/// For each destination cell, the source indices it covers and the overlap.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|k| {
            let lo = k as f64 * scale;
            let hi = (k + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let w = (hi.min((s + 1) as f64) - lo.max(s as f64)).max(0.0);
                    (w > 0.0).then_some((s, w))
                })
                .collect()
        })
        .collect()
}

/// Mean and population standard deviation of an image's intensities.
pub fn image_stats(img: &GrayImage) -> (f64, f64) {
    let n = img.pixels.len() as f64;
    let mean = img.pixels.iter().sum::<f64>() / n;
    let var = img.pixels.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
