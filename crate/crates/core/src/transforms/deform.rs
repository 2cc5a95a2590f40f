//! Non-rigid warps: elastic deformation and grid distortion.

use rand::Rng;

use crate::image::{Border, GrayImage};
use crate::transforms::geometric::warp;

/// Separable Gaussian blur with reflected borders.
pub(crate) fn gaussian_blur(field: &GrayImage, sigma: f64) -> GrayImage {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.into_iter().map(|k| k / norm).collect();
    let (h, w) = field.dims();
    let rows = GrayImage::from_fn(h, w, |i, j| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, wt)| wt * field.get_border(i as isize, j as isize + k as isize - radius, Border::Reflect))
            .sum()
    });
    GrayImage::from_fn(h, w, |i, j| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, wt)| wt * rows.get_border(i as isize + k as isize - radius, j as isize, Border::Reflect))
            .sum()
    })
}

/// Elastic deformation: a per-pixel displacement field of i.i.d. uniform
/// [-1, 1] noise, Gaussian-smoothed with `sigma` and scaled by `alpha`
/// pixels, resampled bilinearly with reflected borders.
pub fn elastic_deform<R: Rng + ?Sized>(img: &GrayImage, alpha: f64, sigma: f64, rng: &mut R) -> GrayImage {
    assert!(alpha >= 0.0 && sigma > 0.0, "elastic deform needs alpha >= 0, sigma > 0");
    if alpha == 0.0 {
        return img.clone();
    }
    let (h, w) = img.dims();
    let mut noise = || GrayImage::from_fn(h, w, |_, _| rng.random_range(-1.0..=1.0));
    let raw_dy = noise();
    let raw_dx = noise();
    let dy = gaussian_blur(&raw_dy, sigma);
    let dx = gaussian_blur(&raw_dx, sigma);
    warp(img, Border::Reflect, |y, x| {
        let (i, j) = (y as usize, x as usize);
        (y + alpha * dy.get(i, j), x + alpha * dx.get(i, j))
    })
}

/// Cell boundaries after rescaling each of `cells` equal steps by a factor
/// in `[1 - limit, 1 + limit]`, renormalised to span `[0, extent - 1]`.
fn distorted_knots<R: Rng + ?Sized>(extent: usize, cells: usize, limit: f64, rng: &mut R) -> Vec<f64> {
    let factors: Vec<f64> = (0..cells).map(|_| 1.0 + rng.random_range(-limit..=limit)).collect();
    let total: f64 = factors.iter().sum();
    let span = (extent - 1) as f64;
    let mut knots = Vec::with_capacity(cells + 1);
    let mut acc = 0.0;
    knots.push(0.0);
    for f in &factors {
        acc += f;
        knots.push(acc / total * span);
    }
    knots[cells] = span;
    knots
}

/// Piecewise-linear map from uniform knots to distorted knots.
fn remap(coord: f64, extent: usize, knots: &[f64]) -> f64 {
    let cells = knots.len() - 1;
    let span = (extent - 1) as f64;
    if span == 0.0 {
        return coord;
    }
    let t = (coord / span * cells as f64).clamp(0.0, cells as f64);
    let k = (t.floor() as usize).min(cells - 1);
    let frac = t - k as f64;
    knots[k] + frac * (knots[k + 1] - knots[k])
}

/// Grid distortion over a `cells x cells` lattice. Row and column cell
/// extents are rescaled independently.
pub fn grid_distortion<R: Rng + ?Sized>(img: &GrayImage, cells: usize, limit: f64, rng: &mut R) -> GrayImage {
    assert!(cells >= 2, "grid distortion needs at least 2 cells");
    assert!((0.0..1.0).contains(&limit), "grid distortion limit must be in [0, 1)");
    if limit == 0.0 {
        return img.clone();
    }
    let (h, w) = img.dims();
    let row_knots = distorted_knots(h, cells, limit, rng);
    let col_knots = distorted_knots(w, cells, limit, rng);
    let rows: Vec<f64> = (0..h).map(|i| remap(i as f64, h, &row_knots)).collect();
    let cols: Vec<f64> = (0..w).map(|j| remap(j as f64, w, &col_knots)).collect();
    warp(img, Border::Reflect, |y, x| (rows[y as usize], cols[x as usize]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn checkerboard(n: usize, cell: usize) -> GrayImage {
        GrayImage::from_fn(n, n, |i, j| if (i / cell + j / cell).is_multiple_of(2) { 0.0 } else { 255.0 })
    }

    #[test]
    fn identity_parameters() {
        let img = checkerboard(8, 2);
        let mut rng = seeded_rng(0, "deform");
        assert_eq!(elastic_deform(&img, 0.0, 4.0, &mut rng), img);
        assert_eq!(grid_distortion(&img, 5, 0.0, &mut rng), img);
    }

    #[test]
    fn constant_images_stay_constant() {
        let img = GrayImage::filled(16, 16, 77.0);
        for seed in 0..5 {
            let mut rng = seeded_rng(seed, "deform");
            let e = elastic_deform(&img, 25.0, 3.0, &mut rng);
            let g = grid_distortion(&img, 4, 0.4, &mut rng);
            assert!(e.pixels().iter().all(|&p| (p - 77.0).abs() < 1e-9));
            assert!(g.pixels().iter().all(|&p| (p - 77.0).abs() < 1e-9));
        }
    }

    #[test]
    fn elastic_field_displaces_checkerboard() {
        let img = checkerboard(32, 4);
        for seed in 0..20 {
            let out = elastic_deform(&img, 10.0, 4.0, &mut seeded_rng(seed, "elastic"));
            let changed = out.pixels().iter().zip(img.pixels()).filter(|(a, b)| (*a - *b).abs() > 1e-6).count();
            assert!(changed as f64 >= 0.01 * img.len() as f64, "seed {seed}: {changed} changed");
        }
    }

    #[test]
    fn grid_distortion_keeps_ramp_row_order() {
        let ramp = GrayImage::from_fn(16, 16, |i, _| i as f64 * 16.0);
        for seed in 0..50 {
            let out = grid_distortion(&ramp, 5, 0.3, &mut seeded_rng(seed, "grid"));
            let means: Vec<f64> = (0..16).map(|i| (0..16).map(|j| out.get(i, j)).sum::<f64>() / 16.0).collect();
            assert!(means.windows(2).all(|w| w[0] <= w[1] + 1e-12), "seed {seed}: {means:?}");
        }
    }

    #[test]
    fn knots_span_extent_and_increase() {
        let mut rng = seeded_rng(3, "knots");
        let k = distorted_knots(64, 5, 0.5, &mut rng);
        assert_eq!(k[0], 0.0);
        assert_eq!(k[5], 63.0);
        assert!(k.windows(2).all(|w| w[0] < w[1]));
    }
}
