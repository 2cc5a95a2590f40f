//! Procedural stand-in dataset: one shape family per class drawn at a random
//! pose over a speckled, unevenly lit background.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledExample;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::label::SoftLabel;
use crate::rng::seeded_rng;
use crate::transforms::gaussian_blur;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    /// Square side in pixels.
    pub size: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// Parses `CxNxS`, e.g. `4x50x64`. The seed is supplied separately.
    pub fn parse(text: &str, seed: u64) -> Result<Self> {
        let parts: Vec<&str> = text.trim().split(['x', 'X']).collect();
        let bad = || Error::Config(format!("synthetic spec {text:?} is not CLASSESxPER_CLASSxSIZE"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
        Ok(Self { classes: num(parts[0])?, per_class: num(parts[1])?, size: num(parts[2])?, seed })
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Ellipse,
    Ring,
    Bar,
    Cross,
    TwinBlobs,
    Triangle,
}

const SHAPES: [Shape; 6] = [Shape::Ellipse, Shape::Ring, Shape::Bar, Shape::Cross, Shape::TwinBlobs, Shape::Triangle];

impl Shape {
    /// Membership in object coordinates, where the object spans roughly
    /// [-0.3, 0.3] on each axis.
    fn contains(self, u: f64, v: f64, stretch: f64) -> bool {
        let r = (u * u + v * v).sqrt();
        match self {
            Shape::Ellipse => (u / 0.28).powi(2) + (v / (0.14 * stretch)).powi(2) <= 1.0,
            Shape::Ring => (0.14..=0.24).contains(&r),
            Shape::Bar => u.abs() <= 0.3 && v.abs() <= 0.05 * stretch,
            Shape::Cross => {
                let w = 0.05 * stretch;
                (u.abs() <= 0.24 && v.abs() <= w) || (v.abs() <= 0.24 && u.abs() <= w)
            }
            Shape::TwinBlobs => {
                let d = 0.1 * stretch;
                ((u - 0.15).powi(2) + v * v).sqrt() <= d || ((u + 0.15).powi(2) + v * v).sqrt() <= d
            }
            Shape::Triangle => {
                // equilateral, circumradius 0.26
                (0..3).all(|k| {
                    let a = PI / 2.0 + k as f64 * 2.0 * PI / 3.0;
                    u * a.cos() + v * a.sin() <= 0.13
                })
            }
        }
    }
}

/// Classes cycle through six shape families; beyond six, the object scale
/// distinguishes repeats of a family.
pub fn synth_dataset(spec: &SynthSpec) -> Result<Vec<LabeledExample>> {
    if spec.classes < 2 {
        return Err(Error::Config("synthetic dataset needs at least 2 classes".into()));
    }
    if spec.per_class == 0 {
        return Err(Error::Config("synthetic dataset needs at least 1 example per class".into()));
    }
    if spec.size < 8 {
        return Err(Error::Config("synthetic images must be at least 8 pixels wide".into()));
    }
    let mut out = Vec::with_capacity(spec.classes * spec.per_class);
    for i in 0..spec.per_class {
        for class in 0..spec.classes {
            let mut rng = seeded_rng(spec.seed, &format!("synth/c{class}/i{i}"));
            let image = render(class, spec.size, &mut rng);
            let label = SoftLabel::one_hot(class, spec.classes)?;
            out.push(LabeledExample::new(image, label, format!("synth-c{class}-{i:04}")));
        }
    }
    Ok(out)
}

fn render<R: Rng + ?Sized>(class: usize, size: usize, rng: &mut R) -> GrayImage {
    let shape = SHAPES[class % SHAPES.len()];
    let family_scale = 1.0 + 0.35 * (class / SHAPES.len()) as f64;

    let angle = rng.random_range(-PI / 3.0..PI / 3.0);
    let scale = family_scale * rng.random_range(0.75..1.2);
    let stretch = rng.random_range(0.8..1.3);
    let centre = (rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15));
    let object_level = rng.random_range(120.0..190.0);
    let background = rng.random_range(50.0..80.0);
    let gradient = (rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0));

    let (c, s) = (angle.cos(), angle.sin());
    let n = size as f64;
    let coverage = |i: usize, j: usize| {
        let mut hits = 0;
        for (dy, dx) in [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)] {
            let y = (i as f64 + dy) / n - 0.5 - centre.0;
            let x = (j as f64 + dx) / n - 0.5 - centre.1;
            let u = (c * x + s * y) / scale;
            let v = (-s * x + c * y) / scale;
            if shape.contains(u, v, stretch) {
                hits += 1;
            }
        }
        f64::from(hits) / 4.0
    };
    let clean = GrayImage::from_fn(size, size, |i, j| {
        let lit = background + gradient.0 * (i as f64 / n - 0.5) + gradient.1 * (j as f64 / n - 0.5);
        lit + (object_level - lit) * coverage(i, j)
    });
    // clutter: a few faint distractor specks shared by every class
    let mut cluttered = clean;
    for _ in 0..rng.random_range(2..6) {
        let (ci, cj) = (rng.random_range(0..size), rng.random_range(0..size));
        let radius = rng.random_range(0.02..0.06) * n;
        let level = rng.random_range(20.0..50.0);
        let base = cluttered;
        cluttered = GrayImage::from_fn(size, size, |i, j| {
            let d = ((i as f64 - ci as f64).powi(2) + (j as f64 - cj as f64).powi(2)).sqrt();
            base.get(i, j) + if d <= radius { level } else { 0.0 }
        });
    }
    let smooth = gaussian_blur(&cluttered, 0.6 * n / 64.0);
    let speckle = Normal::new(1.0, 0.3).expect("valid std");
    let additive = Normal::new(0.0, 8.0).expect("valid std");
    smooth.map(|p| (p * speckle.sample(rng) + additive.sample(rng)).clamp(0.0, 255.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::by_class;

    #[test]
    fn balanced_and_sized() {
        let spec = SynthSpec { classes: 4, per_class: 10, size: 32, seed: 7 };
        let data = synth_dataset(&spec).unwrap();
        assert_eq!(data.len(), 40);
        assert!(by_class(&data).values().all(|v| v.len() == 10));
        assert!(data.iter().all(|e| e.image.dims() == (32, 32)));
        assert!(data.iter().all(|e| e.image.pixels().iter().all(|p| (0.0..=255.0).contains(p))));
    }

    #[test]
    fn reproducible() {
        let spec = SynthSpec { classes: 3, per_class: 4, size: 16, seed: 2 };
        assert_eq!(synth_dataset(&spec).unwrap(), synth_dataset(&spec).unwrap());
        let other = SynthSpec { seed: 3, ..spec };
        assert_ne!(synth_dataset(&spec).unwrap(), synth_dataset(&other).unwrap());
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(synth_dataset(&SynthSpec { classes: 4, per_class: 0, size: 16, seed: 0 }).is_err());
        assert!(synth_dataset(&SynthSpec { classes: 1, per_class: 4, size: 16, seed: 0 }).is_err());
    }

    #[test]
    fn parses_compact_spec() {
        assert_eq!(SynthSpec::parse("4x50x64", 9).unwrap(), SynthSpec { classes: 4, per_class: 50, size: 64, seed: 9 });
        assert!(SynthSpec::parse("4x50", 0).is_err());
        assert!(SynthSpec::parse("ax1x2", 0).is_err());
    }
}
