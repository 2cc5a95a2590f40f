//! Run settings: the `key = value` config file merged with command-line
//! flags. Flags win over file values.

use std::path::PathBuf;
use std::str::FromStr;

use mixaug_core::config::{parse_kv, parse_num};
use mixaug_core::search::SearchConfig;
use mixaug_core::trainer::{Architecture, ModelConfig, TrainConfig};
use mixaug_core::Variant;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub dataset: Option<PathBuf>,
    pub synth: Option<String>,
    pub seed: u64,
    pub workers: usize,
    /// Class order for manifests; defaults to sorted unique names.
    pub classes: Option<Vec<String>>,
    pub architecture: Architecture,
    /// Network input `(H, W)`; defaults to the dataset's image size.
    pub input_size: Option<(usize, usize)>,
    pub train: TrainConfig,
    pub m_values: Vec<u8>,
    pub n_values: Vec<u8>,
    pub folds: usize,
    pub variants: Vec<Variant>,
    pub seeds_per_cell: usize,
    pub affinity_repeats: usize,
    /// Single policy for `train-one` and `augment-preview`.
    pub variant: Variant,
    pub m: u8,
    pub n: u8,
    /// Number of images written by `augment-preview`.
    pub count: usize,
}

impl Default for Settings {
    fn default() -> Self {
        let model = ModelConfig { architecture: Architecture::SmallConvNet, input_size: (0, 0), classes: 0, init_seed: 0 };
        let grid = SearchConfig::new(model);
        Self {
            dataset: None,
            synth: None,
            seed: 0,
            workers: 1,
            classes: None,
            architecture: Architecture::SmallConvNet,
            input_size: None,
            train: TrainConfig::default(),
            m_values: grid.m_values,
            n_values: grid.n_values,
            folds: grid.folds,
            variants: grid.variants,
            seeds_per_cell: grid.seeds_per_cell,
            affinity_repeats: grid.affinity_repeats,
            variant: Variant::NonlinearMixRA,
            m: 5,
            n: 3,
            count: 8,
        }
    }
}

fn list<T: FromStr>(key: &str, value: &str, line: usize) -> CliResult<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Usage(format!("line {line}: bad entry {s:?} in {key}"))))
        .collect()
}

pub fn parse_size(text: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Usage(format!("size {text:?} is not HxW"));
    let (h, w) = text.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((h.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?))
}

impl Settings {
    /// Apply a config file on top of the defaults. Unknown keys are errors.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut s = Settings::default();
        for (line, key, value) in parse_kv(text)? {
            let v = value.as_str();
            match key.as_str() {
                "dataset" => s.dataset = Some(PathBuf::from(v)),
                "synth" => s.synth = Some(v.to_string()),
                "seed" => s.seed = parse_num(&key, v, line)?,
                "workers" => s.workers = parse_num(&key, v, line)?,
                "classes" => s.classes = Some(list(&key, v, line)?),
                "architecture" => s.architecture = Architecture::parse(v)?,
                "input_size" => s.input_size = Some(parse_size(v)?),
                "learning_rate" => s.train.learning_rate = parse_num(&key, v, line)?,
                "momentum" => s.train.momentum = parse_num(&key, v, line)?,
                "weight_decay" => s.train.weight_decay = parse_num(&key, v, line)?,
                "batch_size" => s.train.batch_size = parse_num(&key, v, line)?,
                "min_epochs" => s.train.min_epochs = parse_num(&key, v, line)?,
                "patience" => s.train.patience = parse_num(&key, v, line)?,
                "max_epochs" => s.train.max_epochs = parse_num(&key, v, line)?,
                "m_values" => s.m_values = list(&key, v, line)?,
                "n_values" => s.n_values = list(&key, v, line)?,
                "folds" => s.folds = parse_num(&key, v, line)?,
                "variants" => s.variants = list(&key, v, line)?,
                "seeds_per_cell" => s.seeds_per_cell = parse_num(&key, v, line)?,
                "affinity_repeats" => s.affinity_repeats = parse_num(&key, v, line)?,
                "variant" => s.variant = v.parse()?,
                "m" => s.m = parse_num(&key, v, line)?,
                "n" => s.n = parse_num(&key, v, line)?,
                "count" => s.count = parse_num(&key, v, line)?,
                other => return Err(CliError::Usage(format!("line {line}: unknown config key {other:?}"))),
            }
        }
        Ok(s)
    }

    pub fn model(&self, input_size: (usize, usize), classes: usize) -> ModelConfig {
        ModelConfig { architecture: self.architecture, input_size, classes, init_seed: self.seed }
    }

    pub fn search(&self, model: ModelConfig) -> SearchConfig {
        SearchConfig {
            m_values: self.m_values.clone(),
            n_values: self.n_values.clone(),
            folds: self.folds,
            variants: self.variants.clone(),
            seeds_per_cell: self.seeds_per_cell,
            model,
            train: self.train,
            affinity_repeats: self.affinity_repeats,
            workers: self.workers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_sections() {
        let s = Settings::parse(
            "synth = 4x10x16\nseed = 3\nm_values = 1, 5\nn_values = 2\nvariants = NoAug,ExtRA\n\
             learning_rate = 0.05\ninput_size = 16x16\narchitecture = linear-softmax\n",
        )
        .unwrap();
        assert_eq!(s.synth.as_deref(), Some("4x10x16"));
        assert_eq!(s.m_values, vec![1, 5]);
        assert_eq!(s.n_values, vec![2]);
        assert_eq!(s.variants, vec![Variant::NoAug, Variant::ExtRA]);
        assert_eq!(s.train.learning_rate, 0.05);
        assert_eq!(s.input_size, Some((16, 16)));
        assert_eq!(s.architecture, Architecture::LinearSoftmax);
    }

    #[test]
    fn unknown_key_is_usage_error() {
        let err = Settings::parse("colour = blue\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(Settings::parse("variants = NoAug, Bogus\n").is_err());
    }
}
