//! Pointwise intensity transforms. Each output pixel depends only on the
//! matching input pixel and global statistics of the image (Sharpness is the
//! exception: it reads a 3x3 neighbourhood).

use crate::image::{Border, GrayImage};

const WHITE: f64 = 255.0;

fn clamp8(p: f64) -> f64 {
    p.clamp(0.0, WHITE)
}

/// Linearly stretch `[min, max]` onto `[0, 255]`. Constant images pass through.
pub fn auto_contrast(img: &GrayImage) -> GrayImage {
    let (lo, hi) = img.min_max();
    if hi <= lo {
        return img.clone();
    }
    let scale = WHITE / (hi - lo);
    img.map(|p| (p - lo) * scale)
}

/// Histogram equalisation over 256 bins of the clamped, rounded intensities.
/// A histogram with a single occupied bin is left unchanged.
pub fn equalize(img: &GrayImage) -> GrayImage {
    let bin = |p: f64| clamp8(p).round() as usize;
    let mut hist = [0usize; 256];
    for &p in img.pixels() {
        hist[bin(p)] += 1;
    }
    let total = img.len();
    if hist.iter().filter(|&&c| c > 0).count() <= 1 {
        return img.clone();
    }
    let mut cdf = [0usize; 256];
    let mut acc = 0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    let denom = (total - cdf_min) as f64;
    img.map(|p| (cdf[bin(p)] - cdf_min) as f64 / denom * WHITE)
}

/// Invert every clamped intensity strictly above `threshold`.
pub fn solarize(img: &GrayImage, threshold: f64) -> GrayImage {
    if threshold >= WHITE {
        return img.clone();
    }
    img.map(|p| {
        let q = clamp8(p);
        if q > threshold {
            WHITE - q
        } else {
            q
        }
    })
}

/// Keep `bits` of precision: clamped intensities are floored to multiples
/// of `2^(8 - bits)`.
pub fn posterize(img: &GrayImage, bits: u32) -> GrayImage {
    if bits >= 8 {
        return img.clone();
    }
    let step = f64::from(1u32 << (8 - bits));
    img.map(|p| (clamp8(p) / step).floor() * step)
}

/// Scale deviations from the image mean by `factor`.
pub fn contrast(img: &GrayImage, factor: f64) -> GrayImage {
    let mean = img.mean();
    img.map(|p| p + (factor - 1.0) * (p - mean))
}

pub fn brightness(img: &GrayImage, factor: f64) -> GrayImage {
    img.map(|p| p * factor)
}

/// Blend with a 3x3 smoothed copy. `factor > 1` sharpens, `< 1` blurs.
pub fn sharpness(img: &GrayImage, factor: f64) -> GrayImage {
    if factor == 1.0 {
        return img.clone();
    }
    let (h, w) = img.dims();
    GrayImage::from_fn(h, w, |i, j| {
        let mut acc = 0.0;
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                let weight = if di == 0 && dj == 0 { 5.0 } else { 1.0 };
                acc += weight * img.get_border(i as isize + di, j as isize + dj, Border::Replicate);
            }
        }
        let smooth = acc / 13.0;
        let p = img.get(i, j);
        p + (factor - 1.0) * (p - smooth)
    })
}

/// Power-law intensity curve `255 * (x / 255)^gamma`, sign-preserving so
/// signed inputs stay finite.
pub fn gamma(img: &GrayImage, gamma: f64) -> GrayImage {
    if gamma == 1.0 {
        return img.clone();
    }
    img.map(|p| {
        let u = p / WHITE;
        WHITE * u.signum() * u.abs().powf(gamma)
    })
}
