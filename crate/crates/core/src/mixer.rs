//! Mixed-example generation.
//!
//! Two parents from different classes are combined into one artificial
//! example. The non-linear mixer tiles the image into four regions split at
//! row `floor(l1 * H)` and column `floor(l2 * W)`: the top-left comes from the
//! first parent, the bottom-right from the second, and the two off-diagonal
//! regions blend both parents as zero-mean waveforms whose weights are
//! balanced by the parents' intensity energies and renormalised to unit norm.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::config::validate_magnitude;
use crate::dataset::{by_class, LabeledExample};
use crate::error::{Error, Result};
use crate::image::{image_stats, GrayImage};
use crate::label::SoftLabel;

/// Clamp keeping `lambda3` away from 0 and 1, where the mixing coefficient
/// is undefined.
pub const LAMBDA3_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixLambdas {
    /// Row split fraction.
    pub lambda1: f64,
    /// Column split fraction.
    pub lambda2: f64,
    /// Intensity mixing fraction.
    pub lambda3: f64,
}

impl MixLambdas {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2), ("lambda3", lambda3)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(Self { lambda1, lambda2, lambda3: lambda3.clamp(LAMBDA3_EPS, 1.0 - LAMBDA3_EPS) })
    }
}

#[derive(Debug, Clone)]
pub struct MixedExample {
    pub image: GrayImage,
    pub label: SoftLabel,
    pub lambdas: MixLambdas,
    pub parents: (String, String),
}

/// A random cross-class matching over one epoch's examples (by index).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    pub pairs: Vec<(usize, usize)>,
    /// Examples left over by class imbalance; they are used unmixed.
    pub unpaired: Vec<usize>,
}

/// Pair examples of different classes, each example used at most once.
///
/// Repeatedly matches a member of the currently largest class with a member
/// drawn uniformly from all other classes; this reaches the maximum matching
/// size `min(N / 2, N - largest class)`. The order within each pair is
/// randomised.
pub fn pair_dataset<R: Rng + ?Sized>(examples: &[LabeledExample], rng: &mut R) -> Result<Pairing> {
    let mut groups: Vec<Vec<usize>> = by_class(examples).into_values().collect();
    if groups.len() < 2 {
        return Err(Error::Dataset("pairing needs at least two classes".into()));
    }
    for g in &mut groups {
        g.shuffle(rng);
    }
    let mut pairs = Vec::new();
    loop {
        let nonempty = groups.iter().filter(|g| !g.is_empty()).count();
        if nonempty < 2 {
            break;
        }
        let largest = (0..groups.len()).max_by_key(|&k| (groups[k].len(), std::cmp::Reverse(k))).unwrap();
        let others: usize = groups.iter().enumerate().filter(|(k, _)| *k != largest).map(|(_, g)| g.len()).sum();
        let mut pick = rng.random_range(0..others);
        let partner = (0..groups.len())
            .filter(|&k| k != largest)
            .find(|&k| {
                if pick < groups[k].len() {
                    true
                } else {
                    pick -= groups[k].len();
                    false
                }
            })
            .unwrap();
        let a = groups[largest].pop().unwrap();
        let b = groups[partner].pop().unwrap();
        pairs.push(if rng.random_bool(0.5) { (a, b) } else { (b, a) });
    }
    let mut unpaired: Vec<usize> = groups.into_iter().flatten().collect();
    unpaired.sort_unstable();
    Ok(Pairing { pairs, unpaired })
}

/// Three independent draws from `Beta(m/10, m/10)`.
pub fn sample_lambdas<R: Rng + ?Sized>(m: u8, rng: &mut R) -> Result<MixLambdas> {
    validate_magnitude(m as i64)?;
    let a = m as f64 / 10.0;
    let beta = Beta::new(a, a).map_err(|e| Error::Config(format!("Beta({a}, {a}): {e}")))?;
    let mut draw = || beta.sample(rng).clamp(0.0, 1.0);
    let (l1, l2, l3) = (draw(), draw(), draw());
    MixLambdas::new(l1, l2, l3)
}

/// Mixing coefficient `c` and its normaliser `phi = sqrt(c^2 + (1 - c)^2)`.
///
/// `c = 1 / (1 + (sigma1 / sigma2) * (1 - lambda3) / lambda3)`. A parent
/// with zero energy hands all weight to the other; if both are flat, `c`
/// falls back to `lambda3`.
pub fn mixing_coefficient(sigma1: f64, sigma2: f64, lambda3: f64) -> (f64, f64) {
    let c = match (sigma1 == 0.0, sigma2 == 0.0) {
        (true, true) => lambda3,
        (_, true) => 0.0,
        (true, false) => 1.0,
        (false, false) => 1.0 / (1.0 + (sigma1 / sigma2) * ((1.0 - lambda3) / lambda3)),
    };
    let phi = (c * c + (1.0 - c) * (1.0 - c)).sqrt();
    (c, phi)
}

/// Four-region energy-normalised mix of two equally sized images.
pub fn mix_images(x1: &GrayImage, x2: &GrayImage, lambdas: &MixLambdas) -> Result<GrayImage> {
    x1.same_dims(x2)?;
    let (h, w) = x1.dims();
    let (mu1, sigma1) = image_stats(x1);
    let (mu2, sigma2) = image_stats(x2);
    let (c, phi) = mixing_coefficient(sigma1, sigma2, lambdas.lambda3);
    let (near, far) = (c / phi, (1.0 - c) / phi);
    let row_split = (lambdas.lambda1 * h as f64).floor() as usize;
    let col_split = (lambdas.lambda2 * w as f64).floor() as usize;
    Ok(GrayImage::from_fn(h, w, |i, j| {
        let a = x1.get(i, j) - mu1;
        let b = x2.get(i, j) - mu2;
        match (i < row_split, j < col_split) {
            (true, true) => a,
            (true, false) => near * a + far * b,
            (false, true) => far * a + near * b,
            (false, false) => b,
        }
    }))
}

/// The two scalar label weights `(w1, w2)`; they sum to one.
pub fn label_weights(lambdas: &MixLambdas) -> (f64, f64) {
    let MixLambdas { lambda1: l1, lambda2: l2, lambda3: l3 } = *lambdas;
    (l3 * l1 + (1.0 - l3) * l2, l3 * (1.0 - l1) + (1.0 - l3) * (1.0 - l2))
}

pub fn mix_labels(y1: &SoftLabel, y2: &SoftLabel, lambdas: &MixLambdas) -> Result<SoftLabel> {
    let (w1, w2) = label_weights(lambdas);
    SoftLabel::blend(y1, w1, y2, w2)
}

/// Non-linear mix of two labelled examples.
pub fn nonlinear_mix(e1: &LabeledExample, e2: &LabeledExample, lambdas: MixLambdas) -> Result<MixedExample> {
    Ok(MixedExample {
        image: mix_images(&e1.image, &e2.image, &lambdas)?,
        label: mix_labels(&e1.label, &e2.label, &lambdas)?,
        lambdas,
        parents: (e1.source_id.clone(), e2.source_id.clone()),
    })
}

/// Mix-up baseline: pixel-wise and label-wise interpolation by `lambda3`.
pub fn linear_mixup(
    x1: &GrayImage,
    x2: &GrayImage,
    y1: &SoftLabel,
    y2: &SoftLabel,
    lambda3: f64,
) -> Result<MixedExample> {
    x1.same_dims(x2)?;
    let t = lambda3;
    let pixels = x1.pixels().iter().zip(x2.pixels()).map(|(a, b)| t * a + (1.0 - t) * b).collect();
    let image = GrayImage::new(x1.height(), x1.width(), pixels)?;
    let label = SoftLabel::blend(y1, t, y2, 1.0 - t)?;
    Ok(MixedExample {
        image,
        label,
        lambdas: MixLambdas { lambda1: t, lambda2: t, lambda3: t },
        parents: (String::new(), String::new()),
    })
}

pub fn linear_mix(e1: &LabeledExample, e2: &LabeledExample, lambdas: MixLambdas) -> Result<MixedExample> {
    let mut out = linear_mixup(&e1.image, &e2.image, &e1.label, &e2.label, lambdas.lambda3)?;
    out.lambdas = lambdas;
    out.parents = (e1.source_id.clone(), e2.source_id.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn example(class: usize, id: usize) -> LabeledExample {
        LabeledExample::new(
            GrayImage::filled(2, 2, id as f64),
            SoftLabel::one_hot(class, 2).unwrap(),
            format!("e{id}"),
        )
    }

    fn hot(c: usize, n: usize) -> SoftLabel {
        SoftLabel::one_hot(c, n).unwrap()
    }

    #[test]
    fn balanced_pairing_is_complete_and_cross_class() {
        let ex: Vec<_> = [0, 0, 1, 1].iter().enumerate().map(|(i, &c)| example(c, i)).collect();
        for seed in 0..20 {
            let p = pair_dataset(&ex, &mut seeded_rng(seed, "pair")).unwrap();
            assert_eq!(p.pairs.len(), 2);
            assert!(p.unpaired.is_empty());
            for &(a, b) in &p.pairs {
                assert_ne!(ex[a].class(), ex[b].class());
            }
        }
    }

    #[test]
    fn imbalanced_pairing_leaves_remainder() {
        let ex: Vec<_> = [0, 0, 0, 1].iter().enumerate().map(|(i, &c)| example(c, i)).collect();
        let p = pair_dataset(&ex, &mut seeded_rng(3, "pair")).unwrap();
        assert_eq!(p.pairs.len(), 1);
        assert_eq!(p.unpaired.len(), 2);
        assert!(p.unpaired.iter().all(|&k| ex[k].class() == 0));
    }

    #[test]
    fn single_class_pairing_fails() {
        let ex: Vec<_> = (0..3).map(|i| example(0, i)).collect();
        assert!(pair_dataset(&ex, &mut seeded_rng(0, "pair")).is_err());
    }

    #[test]
    fn coefficient_cases() {
        let (c, phi) = mixing_coefficient(2.0, 2.0, 0.5);
        assert_eq!(c, 0.5);
        assert!((phi - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let (c, phi) = mixing_coefficient(3.0, 3.0, 0.8);
        assert!((c - 0.8).abs() < 1e-15);
        assert!((phi - (0.64f64 + 0.04).sqrt()).abs() < 1e-15);
        let (c, phi) = mixing_coefficient(1.0, 5.0, 1.0 - LAMBDA3_EPS);
        assert!(c > 0.99999 && phi > 0.99999);
        assert_eq!(mixing_coefficient(1.0, 0.0, 0.3).0, 0.0);
        assert_eq!(mixing_coefficient(0.0, 1.0, 0.3).0, 1.0);
        assert_eq!(mixing_coefficient(0.0, 0.0, 0.3).0, 0.3);
    }

    #[test]
    fn full_and_empty_splits() {
        let x1 = GrayImage::from_fn(4, 5, |i, j| (i * 5 + j) as f64);
        let x2 = GrayImage::from_fn(4, 5, |i, j| ((i + 2 * j) % 3) as f64 * 40.0);
        let all1 = mix_images(&x1, &x2, &MixLambdas::new(1.0, 1.0, 0.3).unwrap()).unwrap();
        assert_eq!(all1, x1.centered());
        let all2 = mix_images(&x1, &x2, &MixLambdas::new(0.0, 0.0, 0.9).unwrap()).unwrap();
        assert_eq!(all2, x2.centered());
    }

    #[test]
    fn self_mix_scales_blended_regions_by_inverse_phi() {
        let x = GrayImage::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 11) as f64 * 9.0);
        let lam = MixLambdas::new(0.5, 0.5, 0.7).unwrap();
        let out = mix_images(&x, &x, &lam).unwrap();
        let (_, phi) = mixing_coefficient(x.std(), x.std(), lam.lambda3);
        let base = x.centered();
        for i in 0..6 {
            for j in 0..6 {
                let pure = (i < 3) == (j < 3);
                let want = if pure { base.get(i, j) } else { base.get(i, j) / phi };
                assert!((out.get(i, j) - want).abs() < 1e-9, "({i},{j})");
            }
        }
    }

    #[test]
    fn mix_rejects_mismatched_dims() {
        let lam = MixLambdas::new(0.5, 0.5, 0.5).unwrap();
        assert!(mix_images(&GrayImage::filled(2, 2, 0.0), &GrayImage::filled(2, 3, 0.0), &lam).is_err());
        assert!(mix_labels(&hot(0, 2), &hot(0, 3), &lam).is_err());
    }

    #[test]
    fn label_mixing_examples() {
        let (y1, y2) = (hot(0, 3), hot(2, 3));
        let l = mix_labels(&y1, &y2, &MixLambdas::new(1.0, 1.0, 0.37).unwrap()).unwrap();
        assert!((l.probs()[0] - 1.0).abs() < 1e-15);
        let l = mix_labels(&y1, &y2, &MixLambdas::new(0.6, 0.4, 0.5).unwrap()).unwrap();
        assert!((l.probs()[0] - 0.5).abs() < 1e-15 && (l.probs()[2] - 0.5).abs() < 1e-15);
        let l = mix_labels(&y1, &y2, &MixLambdas::new(1.0, 0.0, 0.7).unwrap()).unwrap();
        assert!((l.probs()[0] - 0.7).abs() < 1e-15 && (l.probs()[2] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn linear_mixup_examples() {
        let zero = GrayImage::filled(3, 3, 0.0);
        let hundred = GrayImage::filled(3, 3, 100.0);
        let (a, b) = (hot(0, 2), hot(1, 2));
        let full = linear_mixup(&zero, &hundred, &a, &b, 1.0).unwrap();
        assert_eq!(full.image, zero);
        assert_eq!(full.label, a);
        let half = linear_mixup(&zero, &hundred, &a, &b, 0.5).unwrap();
        assert_eq!(half.image, GrayImage::filled(3, 3, 50.0));
        let q = linear_mixup(&zero, &hundred, &a, &b, 0.25).unwrap();
        assert_eq!(q.label.probs(), &[0.25, 0.75]);
    }

    #[test]
    fn lambdas_stay_in_range() {
        let mut rng = seeded_rng(11, "lambdas");
        for m in 1..=10u8 {
            for _ in 0..200 {
                let l = sample_lambdas(m, &mut rng).unwrap();
                for v in [l.lambda1, l.lambda2, l.lambda3] {
                    assert!((0.0..=1.0).contains(&v));
                }
                assert!(l.lambda3 >= LAMBDA3_EPS && l.lambda3 <= 1.0 - LAMBDA3_EPS);
            }
        }
        assert!(sample_lambdas(0, &mut rng).is_err());
    }

    #[test]
    fn c_increases_with_lambda3() {
        let mut prev = 0.0;
        for k in 1..100 {
            let (c, _) = mixing_coefficient(1.3, 0.7, k as f64 / 100.0);
            assert!(c > prev);
            prev = c;
        }
    }
}
