use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::image::GrayImage;

/// Multiplicative speckle: `x * (1 + e)` with `e ~ N(0, variance)` per pixel.
pub fn speckle<R: Rng + ?Sized>(img: &GrayImage, variance: f64, rng: &mut R) -> GrayImage {
    assert!(variance >= 0.0, "speckle variance must be non-negative");
    if variance == 0.0 {
        return img.clone();
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite std");
    img.map(|p| p * (1.0 + normal.sample(rng)))
}
