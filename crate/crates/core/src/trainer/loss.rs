//! Soft-label KL objective over softmax class probabilities.

use crate::error::{Error, Result};
use crate::label::SoftLabel;

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log softmax(scores)`, computed without forming the probabilities.
pub fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - lse).collect()
}

/// `KL(target || softmax(scores))` for one example, in nats. Terms with a
/// zero target contribute nothing.
pub fn kl_single(scores: &[f64], target: &[f64]) -> f64 {
    let logp = log_softmax(scores);
    target
        .iter()
        .zip(&logp)
        .filter(|(y, _)| **y > 0.0)
        .map(|(y, lp)| y * (y.ln() - lp))
        .sum()
}

fn check_batch(scores: &[Vec<f64>], targets: &[SoftLabel]) -> Result<()> {
    if scores.len() != targets.len() {
        return Err(Error::dims(format!("{} targets", targets.len()), format!("{} score rows", scores.len())));
    }
    if scores.is_empty() {
        return Err(Error::Dataset("empty batch".into()));
    }
    for (s, t) in scores.iter().zip(targets) {
        if s.len() != t.classes() {
            return Err(Error::dims(format!("{} classes", t.classes()), format!("{} scores", s.len())));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("class scores".into()));
        }
    }
    Ok(())
}

/// Batch mean of `KL(target_i || softmax(scores_i))`.
pub fn kl_loss(scores: &[Vec<f64>], targets: &[SoftLabel]) -> Result<f64> {
    check_batch(scores, targets)?;
    let total: f64 = scores.iter().zip(targets).map(|(s, t)| kl_single(s, t.probs())).sum();
    Ok(total / scores.len() as f64)
}

/// Gradient of [`kl_loss`] with respect to the scores: `(p_i - y_i) / B`.
pub fn kl_loss_grad(scores: &[Vec<f64>], targets: &[SoftLabel]) -> Result<Vec<Vec<f64>>> {
    check_batch(scores, targets)?;
    let b = scores.len() as f64;
    Ok(scores
        .iter()
        .zip(targets)
        .map(|(s, t)| softmax(s).iter().zip(t.probs()).map(|(p, y)| (p - y) / b).collect())
        .collect())
}
