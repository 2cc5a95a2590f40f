use crate::image::{Border, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipAxis {
    /// Mirror left to right.
    Horizontal,
    /// Mirror top to bottom.
    Vertical,
}

pub fn flip(img: &GrayImage, axis: FlipAxis) -> GrayImage {
    let (h, w) = img.dims();
    match axis {
        FlipAxis::Horizontal => GrayImage::from_fn(h, w, |i, j| img.get(i, w - 1 - j)),
        FlipAxis::Vertical => GrayImage::from_fn(h, w, |i, j| img.get(h - 1 - i, j)),
    }
}

/// Inverse-mapped warp: output pixel `(i, j)` samples the input at `src(i, j)`.
pub(crate) fn warp(img: &GrayImage, border: Border, src: impl Fn(f64, f64) -> (f64, f64)) -> GrayImage {
    let (h, w) = img.dims();
    GrayImage::from_fn(h, w, |i, j| {
        let (y, x) = src(i as f64, j as f64);
        img.sample_bilinear(y, x, border)
    })
}

fn centre(img: &GrayImage) -> (f64, f64) {
    ((img.height() as f64 - 1.0) / 2.0, (img.width() as f64 - 1.0) / 2.0)
}

/// Counter-clockwise rotation about the image centre.
pub fn rotate(img: &GrayImage, degrees: f64) -> GrayImage {
    if degrees == 0.0 {
        return img.clone();
    }
    let (cy, cx) = centre(img);
    let (s, c) = degrees.to_radians().sin_cos();
    // Screen coordinates have y pointing down, so a visual counter-clockwise
    // turn maps output (dy, dx) back through the transposed matrix below.
    warp(img, Border::Replicate, |y, x| {
        let (dy, dx) = (y - cy, x - cx);
        (cy + c * dy + s * dx, cx - s * dy + c * dx)
    })
}

/// Horizontal shear: rows slide by `shear * (row - centre)`.
pub fn shear_x(img: &GrayImage, shear: f64) -> GrayImage {
    let (cy, _) = centre(img);
    warp(img, Border::Replicate, |y, x| (y, x + shear * (y - cy)))
}

pub fn shear_y(img: &GrayImage, shear: f64) -> GrayImage {
    let (_, cx) = centre(img);
    warp(img, Border::Replicate, |y, x| (y + shear * (x - cx), x))
}

/// Shift content right by `fraction` of the width.
pub fn translate_x(img: &GrayImage, fraction: f64) -> GrayImage {
    let dx = fraction * img.width() as f64;
    warp(img, Border::Replicate, |y, x| (y, x - dx))
}

/// Shift content down by `fraction` of the height.
pub fn translate_y(img: &GrayImage, fraction: f64) -> GrayImage {
    let dy = fraction * img.height() as f64;
    warp(img, Border::Replicate, |y, x| (y - dy, x))
}

/// Fill a `side x side` square centred at `(ci, cj)` with the image mean.
/// The square is clipped at the image boundary.
pub fn cutout(img: &GrayImage, side: usize, ci: usize, cj: usize) -> GrayImage {
    if side == 0 {
        return img.clone();
    }
    let fill = img.mean();
    let half = side / 2;
    let (h, w) = img.dims();
    let top = ci.saturating_sub(half);
    let left = cj.saturating_sub(half);
    let bottom = (top + side).min(h);
    let right = (left + side).min(w);
    let mut out = img.clone();
    for i in top..bottom {
        for j in left..right {
            out.set(i, j, fill);
        }
    }
    out
}
