//! Mixed-example generation against independently written oracles.

use mixaug_core::dataset::by_class;
use mixaug_core::mixer::{label_weights, mix_images, mix_labels, mixing_coefficient, pair_dataset, sample_lambdas};
use mixaug_core::{seeded_rng, GrayImage, LabeledExample, MixLambdas, SoftLabel};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Direct transcription of the four-case formula with 1-based indices and
/// the `i <= lambda1 * H` comparisons taken literally.
fn oracle_pixel(x1: &[Vec<f64>], x2: &[Vec<f64>], l: (f64, f64, f64), i1: usize, j1: usize) -> f64 {
    let h = x1.len() as f64;
    let w = x1[0].len() as f64;
    let stats = |x: &[Vec<f64>]| {
        let flat: Vec<f64> = x.iter().flatten().copied().collect();
        let mu = flat.iter().sum::<f64>() / flat.len() as f64;
        let var = flat.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / flat.len() as f64;
        (mu, var.sqrt())
    };
    let (mu1, s1) = stats(x1);
    let (mu2, s2) = stats(x2);
    let c = 1.0 / (1.0 + s1 / s2 * (1.0 - l.2) / l.2);
    let phi = (c * c + (1.0 - c) * (1.0 - c)).sqrt();
    let a = x1[i1 - 1][j1 - 1] - mu1;
    let b = x2[i1 - 1][j1 - 1] - mu2;
    let top = (i1 as f64) <= l.0 * h;
    let left = (j1 as f64) <= l.1 * w;
    if top && left {
        a
    } else if top {
        c / phi * a + (1.0 - c) / phi * b
    } else if left {
        (1.0 - c) / phi * a + c / phi * b
    } else {
        b
    }
}

fn random_rows<R: Rng>(rng: &mut R, h: usize, w: usize) -> Vec<Vec<f64>> {
    (0..h).map(|_| (0..w).map(|_| rng.random_range(0.0..255.0)).collect()).collect()
}

fn to_image(rows: &[Vec<f64>]) -> GrayImage {
    GrayImage::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

#[test]
fn mix_matches_brute_force_formula() {
    let mut rng = seeded_rng(11, "oracle");
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let (a, b) = (random_rows(&mut rng, 8, 8), random_rows(&mut rng, 8, 8));
        let l = (rng.random::<f64>(), rng.random::<f64>(), rng.random_range(0.01..0.99));
        let out = mix_images(&to_image(&a), &to_image(&b), &MixLambdas::new(l.0, l.1, l.2).unwrap()).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                worst = worst.max((out.get(i, j) - oracle_pixel(&a, &b, l, i + 1, j + 1)).abs());
            }
        }
    }
    assert!(worst < 1e-9, "max pixel error {worst}");
}

#[test]
fn coefficient_examples() {
    let (c, phi) = mixing_coefficient(3.0, 3.0, 0.5);
    assert!((c - 0.5).abs() < 1e-15);
    assert!((phi - 0.5f64.sqrt()).abs() < 1e-15);
    let (c, phi) = mixing_coefficient(2.0, 2.0, 0.8);
    assert!((c - 0.8).abs() < 1e-12);
    assert!((phi - 0.68f64.sqrt()).abs() < 1e-12);
    let (c, phi) = mixing_coefficient(1.0, 5.0, 1.0 - 1e-9);
    assert!((c - 1.0).abs() < 1e-8 && (phi - 1.0).abs() < 1e-8);
    assert_eq!(mixing_coefficient(1.0, 0.0, 0.3).0, 0.0);
    assert_eq!(mixing_coefficient(0.0, 1.0, 0.3).0, 1.0);
    assert_eq!(mixing_coefficient(0.0, 0.0, 0.3).0, 0.3);
}

#[test]
fn energy_is_preserved_in_mixed_regions() {
    // Full-image mixed region: lambda1 = 1 puts every row on top, lambda2 = 0
    // every column right of the split.
    let lambdas = MixLambdas::new(1.0, 0.0, 0.37).unwrap();
    let mut rng = seeded_rng(3, "energy");
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut total = 0.0;
    for _ in 0..1000 {
        let a = GrayImage::from_fn(16, 16, |_, _| normal.sample(&mut rng));
        let b = GrayImage::from_fn(16, 16, |_, _| normal.sample(&mut rng));
        total += mix_images(&a, &b, &lambdas).unwrap().std();
    }
    let mean = total / 1000.0;
    assert!((0.95..=1.05).contains(&mean), "mean mixed std {mean}");
}

#[test]
fn identical_parents_scale_mixed_regions_by_inverse_phi() {
    let x = GrayImage::from_fn(10, 10, |i, j| ((i * 31 + j * 17) % 23) as f64);
    let l = MixLambdas::new(0.4, 0.7, 0.8).unwrap();
    let out = mix_images(&x, &x, &l).unwrap();
    let centred = x.centered();
    let (_, phi) = mixing_coefficient(x.std(), x.std(), 0.8);
    for i in 0..10 {
        for j in 0..10 {
            let pure = (i < 4) == (j < 7);
            let want = if pure { centred.get(i, j) } else { centred.get(i, j) / phi };
            if pure {
                assert_eq!(out.get(i, j), want);
            } else {
                assert!((out.get(i, j) - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn label_examples_and_conservation() {
    let a = SoftLabel::one_hot(0, 3).unwrap();
    let b = SoftLabel::one_hot(2, 3).unwrap();
    let y = mix_labels(&a, &b, &MixLambdas::new(1.0, 0.0, 0.7).unwrap()).unwrap();
    assert!((y.probs()[0] - 0.7).abs() < 1e-12 && (y.probs()[2] - 0.3).abs() < 1e-12);
    let y = mix_labels(&a, &b, &MixLambdas::new(0.6, 0.4, 0.5).unwrap()).unwrap();
    assert!((y.probs()[0] - 0.5).abs() < 1e-12);
    let mut rng = seeded_rng(8, "weights");
    for _ in 0..100_000 {
        let l = MixLambdas::new(rng.random(), rng.random(), rng.random()).unwrap();
        let (w1, w2) = label_weights(&l);
        assert!((w1 + w2 - 1.0).abs() < 1e-12);
        assert!(w1 >= 0.0 && w2 >= 0.0);
    }
}

/// One-sample Kolmogorov-Smirnov statistic against Uniform(0, 1).
fn ks_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| ((k as f64 + 1.0) / n - x).max(x - k as f64 / n))
        .fold(0.0, f64::max)
}

#[test]
fn beta_lambdas_follow_magnitude() {
    let mut rng = seeded_rng(1, "beta");
    let draws: Vec<MixLambdas> = (0..10_000).map(|_| sample_lambdas(10, &mut rng).unwrap()).collect();
    for pick in [|l: &MixLambdas| l.lambda1, |l: &MixLambdas| l.lambda2, |l: &MixLambdas| l.lambda3] {
        let ks = ks_uniform(draws.iter().map(pick).collect());
        assert!(ks < 0.05, "KS {ks}");
    }
    let sparse: Vec<f64> = (0..10_000).map(|_| sample_lambdas(1, &mut rng).unwrap().lambda1).collect();
    let interior = sparse.iter().filter(|&&x| x > 0.1 && x < 0.9).count() as f64 / sparse.len() as f64;
    assert!(interior < 0.25, "fraction in (0.1, 0.9): {interior}");
    assert!(sample_lambdas(0, &mut rng).is_err());
    assert!(sample_lambdas(11, &mut rng).is_err());
}

/// Largest cross-class matching, by exhaustive search.
fn max_matching(classes: &[usize]) -> usize {
    fn go(classes: &[usize], used: &mut Vec<bool>) -> usize {
        let Some(first) = used.iter().position(|u| !u) else { return 0 };
        used[first] = true;
        let mut best = go(classes, used);
        for k in first + 1..classes.len() {
            if !used[k] && classes[k] != classes[first] {
                used[k] = true;
                best = best.max(1 + go(classes, used));
                used[k] = false;
            }
        }
        used[first] = false;
        best
    }
    go(classes, &mut vec![false; classes.len()])
}

#[test]
fn pairing_is_a_maximum_cross_class_matching() {
    let mut rng = seeded_rng(6, "pairing");
    for trial in 0..200 {
        let n = rng.random_range(2..10);
        let c = rng.random_range(2..4);
        let classes: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let examples: Vec<LabeledExample> = classes
            .iter()
            .enumerate()
            .map(|(k, &cl)| LabeledExample::new(GrayImage::filled(2, 2, k as f64), SoftLabel::one_hot(cl, c).unwrap(), format!("e{k}")))
            .collect();
        if by_class(&examples).len() < 2 {
            assert!(pair_dataset(&examples, &mut rng).is_err());
            continue;
        }
        let p = pair_dataset(&examples, &mut seeded_rng(trial, "p")).unwrap();
        assert_eq!(p.pairs.len(), max_matching(&classes), "classes {classes:?}");
        let mut seen = vec![0; n];
        for &(a, b) in &p.pairs {
            assert_ne!(classes[a], classes[b]);
            seen[a] += 1;
            seen[b] += 1;
        }
        for &u in &p.unpaired {
            seen[u] += 1;
        }
        assert!(seen.iter().all(|&s| s == 1));
    }
}

proptest! {
    #[test]
    fn coefficient_increases_with_lambda3(s1 in 0.1f64..50.0, s2 in 0.1f64..50.0, a in 0.01f64..0.98, d in 0.001f64..0.01) {
        prop_assert!(mixing_coefficient(s1, s2, a + d).0 > mixing_coefficient(s1, s2, a).0);
    }

    #[test]
    fn scaling_second_parent_follows_closed_form(k in 0.2f64..5.0, l3 in 0.05f64..0.95, seed in 0u64..1000) {
        let mut rng = seeded_rng(seed, "scale");
        let a = GrayImage::from_fn(6, 6, |_, _| rng.random_range(0.0..100.0));
        let b = GrayImage::from_fn(6, 6, |_, _| rng.random_range(0.0..100.0));
        let (s1, s2) = (a.std(), b.std());
        let scaled = b.map(|p| p * k);
        let (c, _) = mixing_coefficient(s1, scaled.std(), l3);
        let closed = 1.0 / (1.0 + s1 / (k * s2) * (1.0 - l3) / l3);
        prop_assert!((c - closed).abs() < 1e-12);
    }

    #[test]
    fn mixed_labels_are_distributions(l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0, l3 in 0.0f64..=1.0) {
        let a = SoftLabel::new(vec![0.2, 0.8, 0.0]).unwrap();
        let b = SoftLabel::one_hot(2, 3).unwrap();
        let y = mix_labels(&a, &b, &MixLambdas::new(l1, l2, l3).unwrap()).unwrap();
        prop_assert!((y.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(y.probs().iter().all(|&p| p >= 0.0));
    }
}
