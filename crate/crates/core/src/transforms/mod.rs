//! The 18-entry transform catalog with a shared magnitude scale.
//!
//! Every entry maps a magnitude `m` in `[0, 10]` onto its native parameter;
//! `m = 0` gives that transform's identity parameter. Policies only ever ask
//! for `m` in `[1, 10]`.

mod deform;
mod geometric;
mod noise;
mod photometric;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::validate_magnitude;
use crate::error::{Error, Result};
use crate::image::GrayImage;

pub(crate) use deform::gaussian_blur;
pub use deform::{elastic_deform, grid_distortion};
pub use geometric::{cutout, flip, rotate, shear_x, shear_y, translate_x, translate_y, FlipAxis};
pub use noise::speckle;
pub use photometric::{auto_contrast, brightness, contrast, equalize, gamma, posterize, sharpness, solarize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransformId {
    Identity,
    AutoContrast,
    Equalize,
    Rotate,
    Solarize,
    Posterize,
    Contrast,
    Brightness,
    Sharpness,
    ShearX,
    ShearY,
    TranslateX,
    TranslateY,
    CutoutRegion,
    GammaAdjust,
    GridDistortion,
    ElasticDeform,
    SpeckleNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformKind {
    Geometric,
    Photometric,
    Noise,
    Deformation,
}

/// Reference extent at which the deformation ranges are quoted, in pixels.
const DEFORM_REFERENCE: f64 = 64.0;
const ELASTIC_ALPHA_MAX: f64 = 40.0;
const ELASTIC_SIGMA: f64 = 6.0;
const GRID_CELLS: usize = 5;

/// One catalog entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransformDescriptor {
    pub id: TransformId,
    pub kind: TransformKind,
}

impl TransformDescriptor {
    const fn new(id: TransformId, kind: TransformKind) -> Self {
        Self { id, kind }
    }

    pub fn name(&self) -> &'static str {
        self.id.name()
    }

    /// Native parameter at magnitude `m` (any real in `[0, 10]`).
    ///
    /// | transform | native parameter | at m = 10 |
    /// |---|---|---|
    /// | Rotate | degrees (random sign) | 30 |
    /// | ShearX/Y | shear coefficient (random sign) | 0.3 |
    /// | TranslateX/Y | fraction of the axis (random sign) | 0.3 |
    /// | Solarize | threshold | 0 |
    /// | Posterize | bits kept | 4 |
    /// | Contrast/Brightness/Sharpness | factor `1 + d`, sign of `d` random | 1.9 |
    /// | GammaAdjust | exponent `g`, inverted at random | 2.0 |
    /// | CutoutRegion | side as fraction of `min(H, W)` | 0.4 |
    /// | SpeckleNoise | noise variance | 0.1 |
    /// | ElasticDeform | alpha, pixels at 64x64 | 40 |
    /// | GridDistortion | per-cell limit | 0.5 |
    /// | AutoContrast/Equalize | strength (0 or 1) | 1 |
    pub fn magnitude_map(&self, m: f64) -> f64 {
        let level = (m / 10.0).clamp(0.0, 1.0);
        use TransformId::*;
        match self.id {
            Identity => 0.0,
            AutoContrast | Equalize => {
                if level > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Rotate => 30.0 * level,
            Solarize => 255.0 * (1.0 - level),
            Posterize => 8.0 - 4.0 * level,
            Contrast | Brightness | Sharpness => 1.0 + 0.9 * level,
            ShearX | ShearY => 0.3 * level,
            TranslateX | TranslateY => 0.3 * level,
            CutoutRegion => 0.4 * level,
            GammaAdjust => 2f64.powf(level),
            GridDistortion => 0.5 * level,
            ElasticDeform => ELASTIC_ALPHA_MAX * level,
            SpeckleNoise => 0.1 * level,
        }
    }

    /// Apply at integer magnitude `m` in `[1, 10]`.
    pub fn apply<R: Rng + ?Sized>(&self, img: &GrayImage, m: u8, rng: &mut R) -> Result<GrayImage> {
        validate_magnitude(m as i64)?;
        self.apply_param(img, self.magnitude_map(m as f64), rng)
    }

    /// Apply at an explicit native parameter (see [`Self::magnitude_map`]).
    /// Directional transforms still draw their sign from `rng`.
    pub fn apply_param<R: Rng + ?Sized>(&self, img: &GrayImage, param: f64, rng: &mut R) -> Result<GrayImage> {
        if !param.is_finite() {
            return Err(Error::NonFinite(format!("{} parameter", self.name())));
        }
        let mut sign = || if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        use TransformId::*;
        let out = match self.id {
            Identity => img.clone(),
            AutoContrast if param > 0.0 => auto_contrast(img),
            Equalize if param > 0.0 => equalize(img),
            AutoContrast | Equalize => img.clone(),
            Rotate => {
                let s = sign();
                rotate(img, s * param)
            }
            Solarize => solarize(img, param),
            Posterize => posterize(img, param.round().clamp(1.0, 8.0) as u32),
            Contrast => {
                let s = sign();
                contrast(img, 1.0 + s * (param - 1.0))
            }
            Brightness => {
                let s = sign();
                brightness(img, 1.0 + s * (param - 1.0))
            }
            Sharpness => {
                let s = sign();
                sharpness(img, 1.0 + s * (param - 1.0))
            }
            ShearX => {
                let s = sign();
                shear_x(img, s * param)
            }
            ShearY => {
                let s = sign();
                shear_y(img, s * param)
            }
            TranslateX => {
                let s = sign();
                translate_x(img, s * param)
            }
            TranslateY => {
                let s = sign();
                translate_y(img, s * param)
            }
            CutoutRegion => {
                let (h, w) = img.dims();
                let side = (param * h.min(w) as f64).round() as usize;
                if side == 0 {
                    img.clone()
                } else {
                    let ci = rng.random_range(0..h);
                    let cj = rng.random_range(0..w);
                    cutout(img, side, ci, cj)
                }
            }
            GammaAdjust => {
                let g = if sign() > 0.0 { param } else { 1.0 / param };
                gamma(img, g)
            }
            GridDistortion => {
                if !(0.0..1.0).contains(&param) {
                    return Err(Error::Config(format!("grid distortion limit {param} outside [0, 1)")));
                }
                grid_distortion(img, GRID_CELLS, param, rng)
            }
            ElasticDeform => {
                if param < 0.0 {
                    return Err(Error::Config(format!("elastic alpha {param} is negative")));
                }
                let scale = img.height().min(img.width()) as f64 / DEFORM_REFERENCE;
                elastic_deform(img, param * scale * scale, (ELASTIC_SIGMA * scale).max(0.5), rng)
            }
            SpeckleNoise => {
                if param < 0.0 {
                    return Err(Error::Config(format!("speckle variance {param} is negative")));
                }
                speckle(img, param, rng)
            }
        };
        Ok(out)
    }
}

impl TransformId {
    pub fn name(self) -> &'static str {
        use TransformId::*;
        match self {
            Identity => "Identity",
            AutoContrast => "AutoContrast",
            Equalize => "Equalize",
            Rotate => "Rotate",
            Solarize => "Solarize",
            Posterize => "Posterize",
            Contrast => "Contrast",
            Brightness => "Brightness",
            Sharpness => "Sharpness",
            ShearX => "ShearX",
            ShearY => "ShearY",
            TranslateX => "TranslateX",
            TranslateY => "TranslateY",
            CutoutRegion => "CutoutRegion",
            GammaAdjust => "GammaAdjust",
            GridDistortion => "GridDistortion",
            ElasticDeform => "ElasticDeform",
            SpeckleNoise => "SpeckleNoise",
        }
    }

    pub fn descriptor(self) -> TransformDescriptor {
        *CATALOG.iter().find(|d| d.id == self).expect("every id is catalogued")
    }
}

impl fmt::Display for TransformId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

use TransformKind::{Deformation, Geometric, Noise, Photometric};

/// Full catalog. The first 15 entries are the base RandAugment list.
pub const CATALOG: [TransformDescriptor; 18] = [
    TransformDescriptor::new(TransformId::Identity, Photometric),
    TransformDescriptor::new(TransformId::AutoContrast, Photometric),
    TransformDescriptor::new(TransformId::Equalize, Photometric),
    TransformDescriptor::new(TransformId::Rotate, Geometric),
    TransformDescriptor::new(TransformId::Solarize, Photometric),
    TransformDescriptor::new(TransformId::Posterize, Photometric),
    TransformDescriptor::new(TransformId::Contrast, Photometric),
    TransformDescriptor::new(TransformId::Brightness, Photometric),
    TransformDescriptor::new(TransformId::Sharpness, Photometric),
    TransformDescriptor::new(TransformId::ShearX, Geometric),
    TransformDescriptor::new(TransformId::ShearY, Geometric),
    TransformDescriptor::new(TransformId::TranslateX, Geometric),
    TransformDescriptor::new(TransformId::TranslateY, Geometric),
    TransformDescriptor::new(TransformId::CutoutRegion, Geometric),
    TransformDescriptor::new(TransformId::GammaAdjust, Photometric),
    TransformDescriptor::new(TransformId::GridDistortion, Deformation),
    TransformDescriptor::new(TransformId::ElasticDeform, Deformation),
    TransformDescriptor::new(TransformId::SpeckleNoise, Noise),
];

pub const BASE_CATALOG_LEN: usize = 15;

pub fn base_catalog() -> &'static [TransformDescriptor] {
    &CATALOG[..BASE_CATALOG_LEN]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn textured(h: usize, w: usize) -> GrayImage {
        GrayImage::from_fn(h, w, |i, j| ((i * 37 + j * 11 + i * j) % 251) as f64)
    }

    #[test]
    fn catalog_is_complete_and_unique() {
        let mut ids: Vec<_> = CATALOG.iter().map(|d| d.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 18);
        for d in CATALOG {
            assert_eq!(d.id.descriptor(), d);
        }
    }

    #[test]
    fn identity_parameter_is_exact_identity() {
        let img = textured(12, 10);
        for d in CATALOG {
            let p = d.magnitude_map(0.0);
            for seed in 0..4 {
                let out = d.apply_param(&img, p, &mut seeded_rng(seed, d.name())).unwrap();
                assert_eq!(out, img, "{} at identity parameter", d.name());
            }
        }
    }

    #[test]
    fn magnitude_maps_are_monotone_in_distortion() {
        for d in CATALOG {
            let vals: Vec<f64> = (0..=10).map(|m| d.magnitude_map(m as f64)).collect();
            let deviation = |v: f64| match d.id {
                TransformId::Solarize => 255.0 - v,
                TransformId::Posterize => 8.0 - v,
                TransformId::Contrast | TransformId::Brightness | TransformId::Sharpness | TransformId::GammaAdjust => {
                    v - 1.0
                }
                _ => v,
            };
            assert!(
                vals.windows(2).all(|w| deviation(w[0]) <= deviation(w[1])),
                "{} not monotone: {vals:?}",
                d.name()
            );
        }
        assert_eq!(TransformId::Rotate.descriptor().magnitude_map(10.0), 30.0);
        assert_eq!(TransformId::Posterize.descriptor().magnitude_map(10.0), 4.0);
        assert!((TransformId::GammaAdjust.descriptor().magnitude_map(10.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn apply_rejects_out_of_range_magnitude() {
        let img = textured(4, 4);
        let d = TransformId::Rotate.descriptor();
        let mut rng = seeded_rng(0, "m");
        assert!(d.apply(&img, 0, &mut rng).is_err());
        assert!(d.apply(&img, 11, &mut rng).is_err());
        assert!(d.apply(&img, 10, &mut rng).is_ok());
    }

    #[test]
    fn every_transform_preserves_dims_and_reproduces() {
        let img = textured(9, 13);
        for d in CATALOG {
            for m in [1u8, 5, 10] {
                let a = d.apply(&img, m, &mut seeded_rng(7, "rep")).unwrap();
                let b = d.apply(&img, m, &mut seeded_rng(7, "rep")).unwrap();
                assert_eq!(a.dims(), img.dims(), "{}", d.name());
                assert_eq!(a, b, "{} not reproducible", d.name());
                assert!(a.pixels().iter().all(|p| p.is_finite()));
            }
        }
    }

    #[test]
    fn equalize_constant_is_identity() {
        let c = GrayImage::filled(6, 6, 31.0);
        let out = TransformId::Equalize.descriptor().apply(&c, 5, &mut seeded_rng(0, "eq")).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn speckle_mean_is_unbiased() {
        let img = GrayImage::from_fn(32, 32, |i, j| 60.0 + ((i + j) % 7) as f64 * 10.0);
        let mu = img.mean();
        let d = TransformId::SpeckleNoise.descriptor();
        let sigma_noise = d.magnitude_map(5.0).sqrt();
        let seeds = 100;
        let mean: f64 = (0..seeds)
            .map(|s| d.apply(&img, 5, &mut seeded_rng(s, "speckle-mean")).unwrap().mean())
            .sum::<f64>()
            / seeds as f64;
        let bound = 3.0 * sigma_noise * mu / (img.len() as f64).sqrt();
        assert!((mean - mu).abs() < bound, "{mean} vs {mu} (bound {bound})");
    }
}
