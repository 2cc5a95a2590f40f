use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// Probability vector over `C >= 2` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabel {
    probs: Vec<f64>,
}

impl SoftLabel {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidLabel(format!("{} classes, need at least 2", probs.len())));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidLabel(format!("negative or non-finite entry in {probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidLabel(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn one_hot(class: usize, classes: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::InvalidLabel(format!("class {class} out of {classes}")));
        }
        let mut probs = vec![0.0; classes];
        probs[class] = 1.0;
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    /// Weighted sum `w1 * a + w2 * b` of two labels of equal dimension.
    pub(crate) fn blend(a: &SoftLabel, w1: f64, b: &SoftLabel, w2: f64) -> Result<SoftLabel> {
        if a.classes() != b.classes() {
            return Err(Error::dims(a.classes(), b.classes()));
        }
        let probs = a.probs.iter().zip(&b.probs).map(|(p, q)| w1 * p + w2 * q).collect();
        SoftLabel::new(probs)
    }
}

/// First index of the maximum value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_sums_to_one() {
        for c in 0..5 {
            let l = SoftLabel::one_hot(c, 5).unwrap();
            assert_eq!(l.probs().iter().sum::<f64>(), 1.0);
            assert_eq!(l.argmax(), c);
        }
        assert!(SoftLabel::one_hot(5, 5).is_err());
    }

    #[test]
    fn validation() {
        assert!(SoftLabel::new(vec![1.0]).is_err());
        assert!(SoftLabel::new(vec![0.5, 0.6]).is_err());
        assert!(SoftLabel::new(vec![1.5, -0.5]).is_err());
        assert!(SoftLabel::new(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.45, 0.45]), 1);
    }
}
