use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::label::SoftLabel;
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub image: GrayImage,
    pub label: SoftLabel,
    /// Provenance tag. Unique within a dataset.
    pub source_id: String,
}

impl LabeledExample {
    pub fn new(image: GrayImage, label: SoftLabel, source_id: impl Into<String>) -> Self {
        Self { image, label, source_id: source_id.into() }
    }

    pub fn class(&self) -> usize {
        self.label.argmax()
    }
}

/// Train and validation partitions of one cross-validation fold.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub val: Vec<LabeledExample>,
    pub fold_id: usize,
}

impl DatasetSplit {
    pub fn new(train: Vec<LabeledExample>, val: Vec<LabeledExample>, fold_id: usize) -> Result<Self> {
        if train.is_empty() || val.is_empty() {
            return Err(Error::Dataset("train and val must both be non-empty".into()));
        }
        let classes = train[0].label.classes();
        if let Some(bad) = train.iter().chain(&val).find(|e| e.label.classes() != classes) {
            return Err(Error::Dataset(format!(
                "example {} has {} classes, dataset has {classes}",
                bad.source_id,
                bad.label.classes()
            )));
        }
        let train_ids: HashSet<&str> = train.iter().map(|e| e.source_id.as_str()).collect();
        if let Some(dup) = val.iter().find(|e| train_ids.contains(e.source_id.as_str())) {
            return Err(Error::Dataset(format!("{} appears in both train and val", dup.source_id)));
        }
        let val_classes: HashSet<usize> = val.iter().map(LabeledExample::class).collect();
        if let Some(missing) = train.iter().map(LabeledExample::class).find(|c| !val_classes.contains(c)) {
            return Err(Error::Dataset(format!("class {missing} present in train but not in val")));
        }
        Ok(Self { train, val, fold_id })
    }

    pub fn classes(&self) -> usize {
        self.train[0].label.classes()
    }
}

/// Number of classes and the common image extent of a dataset.
pub fn dataset_shape(examples: &[LabeledExample]) -> Result<(usize, (usize, usize))> {
    let first = examples.first().ok_or_else(|| Error::Dataset("empty dataset".into()))?;
    let classes = first.label.classes();
    let dims = first.image.dims();
    for e in examples {
        if e.label.classes() != classes {
            return Err(Error::Dataset(format!("{}: label dimension {}", e.source_id, e.label.classes())));
        }
        e.image.same_dims(&first.image)?;
    }
    Ok((classes, dims))
}

/// Examples grouped by hard class, in dataset order.
pub fn by_class(examples: &[LabeledExample]) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in examples.iter().enumerate() {
        groups.entry(e.class()).or_default().push(i);
    }
    groups
}

/// Stratified k-fold partition. Each class is shuffled and dealt round-robin
/// into folds, so every fold sees every class when each class has at least
/// `folds` members.
pub fn stratified_folds(examples: &[LabeledExample], folds: usize, rng: &mut Stream) -> Result<Vec<DatasetSplit>> {
    if folds < 2 {
        return Err(Error::Config(format!("folds = {folds}, need at least 2")));
    }
    dataset_shape(examples)?;
    let mut assignment = vec![0usize; examples.len()];
    for (class, mut members) in by_class(examples) {
        if members.len() < folds {
            return Err(Error::Dataset(format!(
                "class {class} has {} examples, need at least {folds} for {folds}-fold validation",
                members.len()
            )));
        }
        members.shuffle(rng);
        for (k, idx) in members.into_iter().enumerate() {
            assignment[idx] = k % folds;
        }
    }
    (0..folds)
        .map(|fold| {
            let (val, train): (Vec<_>, Vec<_>) =
                examples.iter().zip(&assignment).partition(|(_, &f)| f == fold);
            DatasetSplit::new(
                train.into_iter().map(|(e, _)| e.clone()).collect(),
                val.into_iter().map(|(e, _)| e.clone()).collect(),
                fold,
            )
        })
        .collect()
}
