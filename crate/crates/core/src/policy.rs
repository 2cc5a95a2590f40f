//! Turns a [`PolicyConfig`] into concrete per-example augmentation.
//!
//! Pipeline order: mix (mixing variants only), then baseline flips
//! (RandAugment-family variants only), then `n` catalog transforms drawn with
//! replacement and applied at the shared magnitude `m`.

use rand::Rng;

use crate::config::{MixerKind, PolicyConfig, Variant};
use crate::dataset::LabeledExample;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::label::SoftLabel;
use crate::mixer::{linear_mix, nonlinear_mix, pair_dataset, sample_lambdas, MixLambdas};
use crate::rng::seeded_rng;
use crate::transforms::{
    base_catalog, brightness, flip, rotate, FlipAxis, TransformDescriptor, TransformId, CATALOG,
};

/// Offset that moves a zero-mean mixed image into the nominal display range
/// while catalog transforms run on it.
pub const DISPLAY_OFFSET: f64 = 128.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPlan {
    pub flip_h: bool,
    pub flip_v: bool,
    pub chosen: Vec<TransformId>,
    pub lambdas: Option<MixLambdas>,
}

/// Knobs that are not part of a policy.
#[derive(Debug, Clone, Copy, Default)]
pub struct AugmentOptions {
    /// Never flip. Exists so identity properties can be asserted.
    pub suppress_flips: bool,
}

/// Input to [`augment`].
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Single(&'a LabeledExample),
    Pair(&'a LabeledExample, &'a LabeledExample),
}

/// An augmented training or evaluation sample.
#[derive(Debug, Clone)]
pub struct AugmentedExample {
    pub image: GrayImage,
    pub label: SoftLabel,
    /// True for non-linearly mixed images, which are already zero-mean.
    pub zero_mean: bool,
}

impl AugmentedExample {
    pub fn clean(example: &LabeledExample) -> Self {
        Self { image: example.image.clone(), label: example.label.clone(), zero_mean: false }
    }
}

pub fn active_catalog(variant: Variant) -> Vec<TransformDescriptor> {
    let mut out = base_catalog().to_vec();
    let extra: &[TransformId] = match variant {
        Variant::NoAug | Variant::SNPol => return Vec::new(),
        Variant::RA => &[],
        Variant::RAPlusSpeckle => &[TransformId::SpeckleNoise],
        Variant::RAPlusDeform => &[TransformId::GridDistortion, TransformId::ElasticDeform],
        Variant::ExtRA | Variant::LinearMixRA | Variant::NonlinearMixRA => {
            return CATALOG.to_vec();
        }
    };
    out.extend(extra.iter().map(|id| id.descriptor()));
    out
}

pub fn sample_plan<R: Rng + ?Sized>(config: &PolicyConfig, rng: &mut R) -> Result<AugmentationPlan> {
    let catalog = active_catalog(config.variant);
    let flip_h = rng.random_bool(0.5);
    let flip_v = rng.random_bool(0.5);
    let chosen = if catalog.is_empty() {
        Vec::new()
    } else {
        (0..config.n).map(|_| catalog[rng.random_range(0..catalog.len())].id).collect()
    };
    let lambdas = if config.variant.mixes() { Some(sample_lambdas(config.m, rng)?) } else { None };
    let flips = config.variant.baseline_flips();
    Ok(AugmentationPlan { flip_h: flip_h && flips, flip_v: flip_v && flips, chosen, lambdas })
}

/// Augment one example (or one cross-class pair) under `config`.
///
/// Mixing variants take a pair; an unpaired leftover may be passed as
/// `Source::Single` and is used unmixed with its original label. SNPol runs
/// its own fixed pipeline.
pub fn augment<R: Rng + ?Sized>(
    source: Source<'_>,
    config: &PolicyConfig,
    options: AugmentOptions,
    rng: &mut R,
) -> Result<AugmentedExample> {
    if config.variant == Variant::SNPol {
        let Source::Single(example) = source else {
            return Err(Error::Config("SNPol augments single examples".into()));
        };
        let mut draws = SnPolDraws::sample(rng);
        if options.suppress_flips {
            draws.flip = false;
        }
        return Ok(AugmentedExample {
            image: sn_pol_apply(&example.image, &draws),
            label: example.label.clone(),
            zero_mean: false,
        });
    }
    let plan = sample_plan(config, rng)?;
    let mut out = match (source, config.variant.mixer()) {
        (Source::Single(e), _) => AugmentedExample::clean(e),
        (Source::Pair(..), MixerKind::None) => {
            return Err(Error::Config(format!("{} does not mix pairs", config.variant)));
        }
        (Source::Pair(a, b), kind) => {
            let lambdas = plan.lambdas.expect("mixing variants carry lambdas");
            if kind == MixerKind::NonLinear {
                let m = nonlinear_mix(a, b, lambdas)?;
                AugmentedExample { image: m.image, label: m.label, zero_mean: true }
            } else {
                let m = linear_mix(a, b, lambdas)?;
                AugmentedExample { image: m.image, label: m.label, zero_mean: false }
            }
        }
    };
    if !options.suppress_flips {
        if plan.flip_h {
            out.image = flip(&out.image, FlipAxis::Horizontal);
        }
        if plan.flip_v {
            out.image = flip(&out.image, FlipAxis::Vertical);
        }
    }
    if !plan.chosen.is_empty() {
        let offset = if out.zero_mean { DISPLAY_OFFSET } else { 0.0 };
        let mut img = if offset != 0.0 { out.image.map(|p| p + offset) } else { out.image };
        for id in &plan.chosen {
            img = id.descriptor().apply(&img, config.m, rng)?;
        }
        out.image = if offset != 0.0 { img.map(|p| p - offset) } else { img };
    }
    Ok(out)
}

/// Random draws of the fixed SNPol pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnPolDraws {
    pub flip: bool,
    /// Degrees, uniform in [-10, 10].
    pub rotation: f64,
    /// Per-axis rescale deltas `(dy, dx)`, each uniform in [-0.1, 0.1].
    pub aspect: (f64, f64),
    /// Retained area fraction, uniform in [0.95, 1].
    pub crop_area: f64,
    /// Crop placement as fractions of the free margin.
    pub crop_offset: (f64, f64),
    /// Intensity factor, uniform in [0.75, 1.25].
    pub brightness: f64,
}

impl SnPolDraws {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            flip: rng.random_bool(0.5),
            rotation: rng.random_range(-10.0..=10.0),
            aspect: (rng.random_range(-0.1..=0.1), rng.random_range(-0.1..=0.1)),
            crop_area: rng.random_range(0.95..=1.0),
            crop_offset: (rng.random::<f64>(), rng.random::<f64>()),
            brightness: rng.random_range(0.75..=1.25),
        }
    }

    pub fn identity() -> Self {
        Self {
            flip: false,
            rotation: 0.0,
            aspect: (0.0, 0.0),
            crop_area: 1.0,
            crop_offset: (0.0, 0.0),
            brightness: 1.0,
        }
    }
}

/// Horizontal flip, rotation, aspect change, crop-and-resize, brightness.
pub fn sn_pol_apply(img: &GrayImage, draws: &SnPolDraws) -> GrayImage {
    let (h, w) = img.dims();
    let mut out = if draws.flip { flip(img, FlipAxis::Horizontal) } else { img.clone() };
    out = rotate(&out, draws.rotation);
    let (dy, dx) = draws.aspect;
    if dy != 0.0 || dx != 0.0 {
        // rescale about the centre, then crop or edge-pad back to H x W
        let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
        let src = out.clone();
        out = GrayImage::from_fn(h, w, |i, j| {
            let y = cy + (i as f64 - cy) / (1.0 + dy);
            let x = cx + (j as f64 - cx) / (1.0 + dx);
            src.sample_bilinear(y, x, crate::image::Border::Replicate)
        });
    }
    if draws.crop_area < 1.0 {
        let side = draws.crop_area.sqrt();
        let ch = ((h as f64 * side).round() as usize).clamp(1, h);
        let cw = ((w as f64 * side).round() as usize).clamp(1, w);
        let top = ((h - ch) as f64 * draws.crop_offset.0).floor() as usize;
        let left = ((w - cw) as f64 * draws.crop_offset.1).floor() as usize;
        let crop = GrayImage::from_fn(ch, cw, |i, j| out.get(top + i, left + j));
        out = crop.resize_bilinear(h, w);
    }
    brightness(&out, draws.brightness)
}

/// The SNPol pipeline with fresh draws.
pub fn sn_pol_augment<R: Rng + ?Sized>(example: &LabeledExample, rng: &mut R) -> LabeledExample {
    let draws = SnPolDraws::sample(rng);
    LabeledExample::new(sn_pol_apply(&example.image, &draws), example.label.clone(), example.source_id.clone())
}

/// Augment a whole set once under `config` (one epoch's worth).
///
/// Mixing variants first draw a cross-class pairing from the stream
/// `label/pairs`; every resulting source (pair or leftover) then gets its own
/// stream `label/src{k}`, so results do not depend on processing order.
pub fn augment_dataset(
    examples: &[LabeledExample],
    config: &PolicyConfig,
    options: AugmentOptions,
    seed: u64,
    label: &str,
) -> Result<Vec<AugmentedExample>> {
    let stream = |k: usize| seeded_rng(seed, &format!("{label}/src{k}"));
    if config.variant == Variant::NoAug {
        return Ok(examples.iter().map(AugmentedExample::clean).collect());
    }
    if !config.variant.mixes() {
        return examples
            .iter()
            .enumerate()
            .map(|(k, e)| augment(Source::Single(e), config, options, &mut stream(k)))
            .collect();
    }
    let pairing = pair_dataset(examples, &mut seeded_rng(seed, &format!("{label}/pairs")))?;
    let pairs = pairing.pairs.iter().map(|&(a, b)| Source::Pair(&examples[a], &examples[b]));
    let singles = pairing.unpaired.iter().map(|&k| Source::Single(&examples[k]));
    pairs
        .chain(singles)
        .enumerate()
        .map(|(k, src)| augment(src, config, options, &mut stream(k)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn ex(class: usize, fill: impl Fn(usize, usize) -> f64, id: &str) -> LabeledExample {
        LabeledExample::new(GrayImage::from_fn(8, 8, fill), SoftLabel::one_hot(class, 3).unwrap(), id)
    }

    #[test]
    fn catalog_sizes() {
        assert_eq!(active_catalog(Variant::ExtRA).len(), 18);
        assert_eq!(active_catalog(Variant::LinearMixRA).len(), 18);
        assert_eq!(active_catalog(Variant::NonlinearMixRA).len(), 18);
        assert_eq!(active_catalog(Variant::RA).len(), 15);
        assert_eq!(active_catalog(Variant::RAPlusSpeckle).len(), 16);
        assert_eq!(active_catalog(Variant::RAPlusDeform).len(), 17);
        assert!(active_catalog(Variant::NoAug).is_empty());
        assert!(active_catalog(Variant::SNPol).is_empty());
    }

    #[test]
    fn plans_follow_variant() {
        let mut rng = seeded_rng(0, "plan");
        let zero = PolicyConfig::new(Variant::RA, 5, 0, 0).unwrap();
        assert!(sample_plan(&zero, &mut rng).unwrap().chosen.is_empty());
        let mix = PolicyConfig::new(Variant::NonlinearMixRA, 5, 2, 0).unwrap();
        let plan = sample_plan(&mix, &mut rng).unwrap();
        assert!(plan.lambdas.is_some());
        assert_eq!(plan.chosen.len(), 2);
        let ext = PolicyConfig::new(Variant::ExtRA, 5, 4, 0).unwrap();
        assert!(sample_plan(&ext, &mut rng).unwrap().lambdas.is_none());
        let sub = PolicyConfig::new(Variant::RAPlusSpeckle, 5, 10, 0).unwrap();
        let allowed: Vec<_> = active_catalog(Variant::RAPlusSpeckle).iter().map(|d| d.id).collect();
        for _ in 0..50 {
            assert!(sample_plan(&sub, &mut rng).unwrap().chosen.iter().all(|id| allowed.contains(id)));
        }
    }

    #[test]
    fn no_aug_is_identity() {
        let e = ex(1, |i, j| (i * 8 + j) as f64, "a");
        let cfg = PolicyConfig::no_aug(3);
        for seed in 0..10 {
            let out = augment(Source::Single(&e), &cfg, AugmentOptions::default(), &mut seeded_rng(seed, "x")).unwrap();
            assert_eq!(out.image, e.image);
            assert_eq!(out.label, e.label);
        }
    }

    #[test]
    fn mixing_with_full_split_and_no_transforms() {
        let a = ex(0, |i, j| (i * 8 + j) as f64, "a");
        let b = ex(2, |i, _| (i * 20) as f64, "b");
        let cfg = PolicyConfig::new(Variant::NonlinearMixRA, 10, 0, 0).unwrap();
        // With n = 0 the output is flips(mix(a, b)); check the pure regions
        // against a directly computed mix using the same plan.
        for seed in 0..10 {
            let mut rng = seeded_rng(seed, "mix");
            let plan = sample_plan(&cfg, &mut rng.clone()).unwrap();
            let out = augment(Source::Pair(&a, &b), &cfg, AugmentOptions::default(), &mut rng).unwrap();
            let mixed = nonlinear_mix(&a, &b, plan.lambdas.unwrap()).unwrap();
            let mut want = mixed.image;
            if plan.flip_h {
                want = flip(&want, FlipAxis::Horizontal);
            }
            if plan.flip_v {
                want = flip(&want, FlipAxis::Vertical);
            }
            assert_eq!(out.image, want);
            assert_eq!(out.label, mixed.label);
            assert!(out.zero_mean);
        }
        let all_a = MixLambdas::new(1.0, 1.0, 0.5).unwrap();
        let m = nonlinear_mix(&a, &b, all_a).unwrap();
        assert_eq!(m.image, a.image.centered());
        assert_eq!(m.label, a.label);
    }

    #[test]
    fn pairs_rejected_for_single_image_variants() {
        let a = ex(0, |_, _| 1.0, "a");
        let b = ex(1, |_, _| 2.0, "b");
        let cfg = PolicyConfig::new(Variant::RA, 3, 1, 0).unwrap();
        assert!(augment(Source::Pair(&a, &b), &cfg, AugmentOptions::default(), &mut seeded_rng(0, "p")).is_err());
    }

    #[test]
    fn augment_is_deterministic_and_shape_preserving() {
        let a = ex(0, |i, j| ((i * 3 + j * 5) % 7) as f64 * 30.0, "a");
        let b = ex(1, |i, j| ((i + j) % 4) as f64 * 60.0, "b");
        for variant in Variant::ALL {
            let cfg = PolicyConfig::new(variant, 7, 4, 1).unwrap();
            let src = if variant.mixes() { Source::Pair(&a, &b) } else { Source::Single(&a) };
            let run = |s| augment(src, &cfg, AugmentOptions::default(), &mut seeded_rng(s, "det")).unwrap();
            let (x, y) = (run(5), run(5));
            assert_eq!(x.image, y.image, "{variant}");
            assert_eq!(x.label, y.label);
            assert_eq!(x.image.dims(), a.image.dims());
            assert_eq!(x.label.classes(), 3);
        }
    }

    #[test]
    fn sn_pol_identity_and_brightness() {
        let img = GrayImage::from_fn(10, 12, |i, j| ((i * 13 + j * 7) % 29) as f64 * 8.0);
        let out = sn_pol_apply(&img, &SnPolDraws::identity());
        for (a, b) in out.pixels().iter().zip(img.pixels()) {
            assert!((a - b).abs() < 1e-6);
        }
        let flat = GrayImage::filled(6, 6, 100.0);
        let bright = sn_pol_apply(&flat, &SnPolDraws { brightness: 1.25, ..SnPolDraws::identity() });
        assert!(bright.pixels().iter().all(|&p| (p - 125.0).abs() < 1e-9));
        let cropped = sn_pol_apply(&img, &SnPolDraws { crop_area: 0.95, crop_offset: (0.5, 0.5), ..SnPolDraws::identity() });
        assert_eq!(cropped.dims(), img.dims());
        let e = LabeledExample::new(img, SoftLabel::one_hot(0, 2).unwrap(), "s");
        let s = sn_pol_augment(&e, &mut seeded_rng(1, "sn"));
        assert_eq!(s.label, e.label);
        assert_eq!(s.image.dims(), e.image.dims());
    }
}
