//! Soft-label training of desk-scale classifiers with SGD.
//!
//! Every network input is centred on its own mean intensity and scaled by
//! 1/255. Non-linearly mixed images are zero-mean by construction, so clean
//! images are brought into the same frame.

pub mod io;
pub mod loss;
pub mod network;
pub mod sgd;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::config::PolicyConfig;
use crate::dataset::{DatasetSplit, LabeledExample};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::label::{argmax, SoftLabel};
use crate::policy::{augment_dataset, AugmentOptions, AugmentedExample};
use crate::rng::seeded_rng;

pub use loss::{kl_loss, kl_loss_grad, softmax};
pub use network::{Architecture, Network, Scratch};
pub use sgd::Sgd;

const INPUT_SCALE: f64 = 1.0 / 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    /// `(H, W)` of the network input.
    pub input_size: (usize, usize),
    pub classes: usize,
    pub init_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Epochs always run before early stopping is considered.
    pub min_epochs: usize,
    /// Stop after this many consecutive post-minimum epochs without a new
    /// best validation accuracy.
    pub patience: usize,
    pub max_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 50,
            min_epochs: 20,
            patience: 20,
            max_epochs: 150,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience < 1 || self.batch_size < 1 || self.max_epochs < 1 {
            return Err(Error::Config("patience, batch_size and max_epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.momentum >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::Config("learning rate, momentum and weight decay must be non-negative".into()));
        }
        Ok(())
    }
}

/// The part of a trained model needed for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub network: Network,
}

impl Classifier {
    fn prepare(&self, image: &GrayImage) -> Result<Vec<f32>> {
        if image.dims() != self.network.input_dims() {
            let (h, w) = self.network.input_dims();
            return Err(Error::dims(format!("{h}x{w}"), format!("{}x{}", image.height(), image.width())));
        }
        let offset = image.mean();
        Ok(image.pixels().iter().map(|&p| ((p - offset) * INPUT_SCALE) as f32).collect())
    }

    fn scores(&self, image: &GrayImage, scratch: &mut Scratch) -> Result<Vec<f64>> {
        let input = self.prepare(image)?;
        Ok(self.network.forward(&input, scratch).into_iter().map(f64::from).collect())
    }

    /// Class probabilities for clean images.
    pub fn predict(&self, images: &[GrayImage]) -> Result<Vec<Vec<f64>>> {
        let mut scratch = Scratch::default();
        images.iter().map(|img| Ok(softmax(&self.scores(img, &mut scratch)?))).collect()
    }

    /// Mean KL loss over already augmented samples.
    pub fn mean_loss(&self, samples: &[AugmentedExample]) -> Result<f64> {
        let mut scratch = Scratch::default();
        let scores = samples
            .iter()
            .map(|s| self.scores(&s.image, &mut scratch))
            .collect::<Result<Vec<_>>>()?;
        let targets: Vec<SoftLabel> = samples.iter().map(|s| s.label.clone()).collect();
        kl_loss(&scores, &targets)
    }

    /// Fraction of clean examples whose predicted class matches the label.
    pub fn accuracy(&self, examples: &[LabeledExample]) -> Result<f64> {
        let mut scratch = Scratch::default();
        let mut correct = 0usize;
        for e in examples {
            if argmax(&self.scores(&e.image, &mut scratch)?) == e.class() {
                correct += 1;
            }
        }
        Ok(correct as f64 / examples.len().max(1) as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub classifier: Classifier,
    /// Mean training loss per epoch, nats.
    pub loss_history: Vec<f64>,
    /// Validation accuracy per epoch.
    pub val_history: Vec<f64>,
    /// Per-batch training losses of the last epoch run.
    pub final_batch_losses: Vec<f64>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub policy: PolicyConfig,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
}

impl TrainedModel {
    pub fn epochs_run(&self) -> usize {
        self.loss_history.len()
    }
}

/// Train a classifier on `split.train` under augmentation `policy`, early
/// stopping on clean validation accuracy. Best-epoch weights are returned
/// (ties go to the earliest epoch).
pub fn train(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    split: &DatasetSplit,
    policy: &PolicyConfig,
) -> Result<TrainedModel> {
    train_with_options(model_cfg, train_cfg, split, policy, AugmentOptions::default())
}

pub fn train_with_options(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    split: &DatasetSplit,
    policy: &PolicyConfig,
    options: AugmentOptions,
) -> Result<TrainedModel> {
    train_cfg.validate()?;
    if split.classes() != model_cfg.classes {
        return Err(Error::dims(format!("{} classes", model_cfg.classes), format!("{} classes", split.classes())));
    }
    let (h, w) = model_cfg.input_size;
    let network = Network::new(model_cfg.architecture, h, w, model_cfg.classes, model_cfg.init_seed)?;
    let mut model = Classifier { network };
    for e in split.train.iter().chain(&split.val) {
        model.prepare(&e.image)?;
    }

    let mut opt = Sgd::new(model.network.num_params(), train_cfg.learning_rate, train_cfg.momentum, train_cfg.weight_decay);
    let mut grads = vec![0.0f32; model.network.num_params()];
    let mut scratch = Scratch::default();
    let mut loss_history = Vec::new();
    let mut val_history = Vec::new();
    let mut final_batch_losses = Vec::new();
    let mut best: Option<(f64, usize, Network)> = None;
    let mut stale = 0usize;

    for epoch in 1..=train_cfg.max_epochs {
        let label = format!("train/e{epoch}");
        let samples = augment_dataset(&split.train, policy, options, policy.seed, &label)?;
        let inputs = samples
            .iter()
            .map(|s| model.prepare(&s.image))
            .collect::<Result<Vec<_>>>()?;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut seeded_rng(policy.seed, &format!("{label}/shuffle")));

        let mut epoch_loss = 0.0;
        final_batch_losses.clear();
        for batch in order.chunks(train_cfg.batch_size) {
            grads.fill(0.0);
            let b = batch.len() as f64;
            let mut batch_loss = 0.0;
            for &k in batch {
                let scores: Vec<f64> =
                    model.network.forward(&inputs[k], &mut scratch).into_iter().map(f64::from).collect();
                let target = samples[k].label.probs();
                let l = loss::kl_single(&scores, target);
                if !l.is_finite() {
                    return Err(Error::Diverged { epoch, reason: format!("loss {l}") });
                }
                batch_loss += l;
                let d: Vec<f32> =
                    softmax(&scores).iter().zip(target).map(|(p, y)| ((p - y) / b) as f32).collect();
                model.network.backward(&inputs[k], &d, &mut scratch, &mut grads);
            }
            epoch_loss += batch_loss;
            final_batch_losses.push(batch_loss / b);
            opt.step(model.network.params_mut(), &grads);
            if model.network.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { epoch, reason: "non-finite weights".into() });
            }
        }
        loss_history.push(epoch_loss / samples.len() as f64);

        let acc = model.accuracy(&split.val)?;
        val_history.push(acc);
        match &best {
            Some((best_acc, _, _)) if acc <= *best_acc => {
                if epoch > train_cfg.min_epochs {
                    stale += 1;
                }
            }
            _ => {
                best = Some((acc, epoch, model.network.clone()));
                stale = 0;
            }
        }
        if stale >= train_cfg.patience {
            break;
        }
    }

    let (_, best_epoch, best_net) = best.expect("at least one epoch runs");
    Ok(TrainedModel {
        classifier: Classifier { network: best_net },
        loss_history,
        val_history,
        final_batch_losses,
        best_epoch,
        policy: *policy,
        model_config: *model_cfg,
        train_config: *train_cfg,
    })
}

/// Class probabilities for clean images.
pub fn predict(model: &TrainedModel, images: &[GrayImage]) -> Result<Vec<Vec<f64>>> {
    model.classifier.predict(images)
}
