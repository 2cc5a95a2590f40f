//! Macro-averaged classification metrics and the affinity/diversity
//! diagnostics of an augmentation policy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{PolicyConfig, Variant};
use crate::dataset::LabeledExample;
use crate::error::{Error, Result};
use crate::label::argmax;
use crate::policy::{augment_dataset, AugmentOptions, AugmentedExample};
use crate::trainer::{Classifier, TrainedModel};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if c == 0 || counts.iter().any(|row| row.len() != c) {
            return Err(Error::Config("confusion matrix must be square and non-empty".into()));
        }
        Ok(Self { counts })
    }

    pub fn zeros(classes: usize) -> Self {
        Self { counts: vec![vec![0; classes]; classes] }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }
}

pub fn confusion(model: &Classifier, examples: &[LabeledExample]) -> Result<ConfusionMatrix> {
    if examples.is_empty() {
        return Err(Error::Dataset("cannot evaluate on an empty example list".into()));
    }
    let images: Vec<_> = examples.iter().map(|e| e.image.clone()).collect();
    let probs = model.predict(&images)?;
    let mut cm = ConfusionMatrix::zeros(model.network.classes());
    for (e, p) in examples.iter().zip(&probs) {
        if e.label.classes() != cm.classes() {
            return Err(Error::dims(format!("{} classes", cm.classes()), format!("{} classes", e.label.classes())));
        }
        cm.record(e.class(), argmax(p));
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Unweighted means of per-class precision, recall and F1. A class whose
/// denominator is zero contributes 0.
pub fn macro_prf(cm: &ConfusionMatrix) -> MacroScores {
    let c = cm.classes();
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for k in 0..c {
        let tp = cm.counts[k][k] as f64;
        let predicted: u64 = cm.counts.iter().map(|row| row[k]).sum();
        let actual: u64 = cm.counts[k].iter().sum();
        let p = ratio(tp, predicted as f64);
        let r = ratio(tp, actual as f64);
        p_sum += p;
        r_sum += r;
        f_sum += ratio(2.0 * p * r, p + r);
    }
    let n = c as f64;
    MacroScores { precision: p_sum / n, recall: r_sum / n, f1: f_sum / n }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinityDiversity {
    pub variant: Variant,
    pub m: u8,
    pub n: u8,
    /// Augmented minus clean validation loss, nats.
    pub affinity: f64,
    /// Final-epoch training loss, nats.
    pub diversity: f64,
}

/// Loss gap between `repeats` augmented copies of `val` and clean `val`,
/// measured on a model trained without augmentation.
pub fn affinity<R: Rng + ?Sized>(
    clean_model: &TrainedModel,
    val: &[LabeledExample],
    policy: &PolicyConfig,
    options: AugmentOptions,
    rng: &mut R,
    repeats: usize,
) -> Result<f64> {
    if clean_model.policy.variant != Variant::NoAug {
        return Err(Error::Config(format!(
            "affinity needs a model trained without augmentation, got {}",
            clean_model.policy.variant
        )));
    }
    if repeats == 0 || val.is_empty() {
        return Err(Error::Config("affinity needs at least one repeat and one example".into()));
    }
    let model = &clean_model.classifier;
    let clean: Vec<AugmentedExample> = val.iter().map(AugmentedExample::clean).collect();
    let base = model.mean_loss(&clean)?;
    let mut total = 0.0;
    for r in 0..repeats {
        let seed = rng.random::<u64>();
        let shifted = augment_dataset(val, policy, options, seed, &format!("affinity/r{r}"))?;
        total += model.mean_loss(&shifted)?;
    }
    Ok(total / repeats as f64 - base)
}

/// Mean of the last epoch's per-batch training losses.
pub fn diversity(train_run: &TrainedModel) -> Result<f64> {
    let losses = &train_run.final_batch_losses;
    if losses.is_empty() {
        return Err(Error::Config("training run has no recorded batch losses".into()));
    }
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cm(rows: &[&[u64]]) -> ConfusionMatrix {
        ConfusionMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn diagonal_is_perfect() {
        let s = macro_prf(&cm(&[&[3, 0, 0], &[0, 2, 0], &[0, 0, 5]]));
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn two_class_hand_example() {
        let s = macro_prf(&cm(&[&[1, 1], &[0, 1]]));
        assert!((s.precision - 0.75).abs() < 1e-12);
        assert!((s.recall - 0.75).abs() < 1e-12);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_class_contributes_zero() {
        let s = macro_prf(&cm(&[&[0, 0], &[0, 4]]));
        assert!((s.recall - 0.5).abs() < 1e-12);
        assert!((s.precision - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_ragged() {
        assert!(ConfusionMatrix::new(vec![vec![1, 2], vec![3]]).is_err());
        assert!(ConfusionMatrix::new(Vec::new()).is_err());
    }

    proptest! {
        #[test]
        fn relabeling_invariance(cells in proptest::collection::vec(0u64..20, 16), perm in Just([2usize, 0, 3, 1])) {
            let orig: Vec<Vec<u64>> = cells.chunks(4).map(|r| r.to_vec()).collect();
            let permuted: Vec<Vec<u64>> =
                (0..4).map(|i| (0..4).map(|j| orig[perm[i]][perm[j]]).collect()).collect();
            let a = macro_prf(&ConfusionMatrix::new(orig).unwrap());
            let b = macro_prf(&ConfusionMatrix::new(permuted).unwrap());
            prop_assert!((a.f1 - b.f1).abs() < 1e-12);
            prop_assert!((a.precision - b.precision).abs() < 1e-12);
            prop_assert!((a.recall - b.recall).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.f1));
        }
    }
}
