//! Cross-validated grid search over `(m, n)` and the variant ablation.
//!
//! Every training run draws its randomness from streams keyed by the cell
//! identity (variant, m, n, fold, seed index), so results do not depend on
//! the order or thread in which cells execute. Variants that ignore the grid
//! are trained once per (fold, seed) and copied into each grid cell.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PolicyConfig, Variant};
use crate::dataset::{stratified_folds, DatasetSplit, LabeledExample};
use crate::error::{Error, Result};
use crate::metrics::{affinity, confusion, diversity, macro_prf, ConfusionMatrix};
use crate::policy::AugmentOptions;
use crate::rng::{derive_seed, seeded_rng};
use crate::trainer::{train, ModelConfig, TrainConfig, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub m_values: Vec<u8>,
    pub n_values: Vec<u8>,
    pub folds: usize,
    pub variants: Vec<Variant>,
    pub seeds_per_cell: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Augmented copies of the validation split per affinity estimate.
    pub affinity_repeats: usize,
    /// Worker threads for cell execution.
    pub workers: usize,
}

impl SearchConfig {
    /// Defaults for the given model; the variant list covers the three
    /// RandAugment-style columns of the main comparison.
    pub fn new(model: ModelConfig) -> Self {
        Self {
            m_values: vec![1, 3, 5, 7, 9],
            n_values: vec![1, 3, 5, 7, 9],
            folds: 3,
            variants: vec![Variant::NoAug, Variant::ExtRA, Variant::NonlinearMixRA],
            seeds_per_cell: 1,
            model,
            train: TrainConfig::default(),
            affinity_repeats: 5,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty() || self.n_values.is_empty() || self.variants.is_empty() {
            return Err(Error::Config("m, n and variant lists must be non-empty".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("at least 2 folds are required".into()));
        }
        if self.seeds_per_cell < 1 || self.affinity_repeats < 1 || self.workers < 1 {
            return Err(Error::Config("seeds_per_cell, affinity_repeats and workers must be at least 1".into()));
        }
        for &m in &self.m_values {
            PolicyConfig::new(Variant::RA, m, 0, 0)?;
        }
        for &n in &self.n_values {
            PolicyConfig::new(Variant::RA, 1, n, 0)?;
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub variant: Variant,
    pub m: u8,
    pub n: u8,
    pub fold: usize,
    /// Seed index within the cell, `0..seeds_per_cell`.
    pub seed: usize,
    pub policy_seed: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
    pub affinity: f64,
    pub diversity: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Seconds; excluded from determinism guarantees.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Job {
    variant: Variant,
    m: u8,
    n: u8,
    fold: usize,
    seed: usize,
}

impl Job {
    /// Grid-free variants collapse to one job per (fold, seed).
    fn canonical(self) -> Self {
        if self.variant.uses_grid() {
            self
        } else {
            Self { m: 0, n: 0, ..self }
        }
    }

    fn key(&self) -> String {
        format!("{}/m{}/n{}/f{}/s{}", self.variant.name(), self.m, self.n, self.fold, self.seed)
    }

    fn policy(&self, master_seed: u64) -> Result<PolicyConfig> {
        let seed = derive_seed(master_seed, &format!("policy/{}", self.key()));
        if self.variant.uses_grid() {
            PolicyConfig::new(self.variant, self.m, self.n, seed)
        } else {
            PolicyConfig::new(self.variant, 1, 0, seed)
        }
    }
}

fn model_for(cfg: &SearchConfig, master_seed: u64, fold: usize, seed: usize) -> ModelConfig {
    // shared across variants so that columns differ only by augmentation
    ModelConfig { init_seed: derive_seed(master_seed, &format!("init/f{fold}/s{seed}")), ..cfg.model }
}

/// The clean model of a fold: the NoAug run of seed index 0.
fn baseline_job(fold: usize) -> Job {
    Job { variant: Variant::NoAug, m: 0, n: 0, fold, seed: 0 }
}

pub fn make_folds(dataset: &[LabeledExample], folds: usize, master_seed: u64) -> Result<Vec<DatasetSplit>> {
    stratified_folds(dataset, folds, &mut seeded_rng(master_seed, "folds"))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn run_job(
    job: Job,
    cfg: &SearchConfig,
    split: &DatasetSplit,
    master_seed: u64,
    baseline: Option<&TrainedModel>,
) -> Result<(TrainedModel, CellResult)> {
    let start = Instant::now();
    let policy = job.policy(master_seed)?;
    let run = train(&model_for(cfg, master_seed, job.fold, job.seed), &cfg.train, split, &policy)?;
    let clean = baseline.unwrap_or(&run);
    let cm = confusion(&run.classifier, &split.val)?;
    let scores = macro_prf(&cm);
    let mut rng = seeded_rng(master_seed, &format!("affinity/{}", job.key()));
    let aff = affinity(clean, &split.val, &policy, AugmentOptions::default(), &mut rng, cfg.affinity_repeats)?;
    let cell = CellResult {
        variant: job.variant,
        m: job.m,
        n: job.n,
        fold: job.fold,
        seed: job.seed,
        policy_seed: policy.seed,
        precision: scores.precision,
        recall: scores.recall,
        f1: scores.f1,
        confusion: cm,
        affinity: aff,
        diversity: diversity(&run)?,
        epochs_run: run.epochs_run(),
        best_epoch: run.best_epoch,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((run, cell))
}

/// Train and evaluate every (variant, m, n, fold, seed) cell.
///
/// Output order is `variants × m_values × n_values × folds × seeds`, in the
/// order given by the config, regardless of worker count.
pub fn run_grid(cfg: &SearchConfig, dataset: &[LabeledExample], master_seed: u64) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let splits = make_folds(dataset, cfg.folds, master_seed)?;
    let pool = pool(cfg.workers)?;

    let baselines: Vec<(TrainedModel, CellResult)> = pool.install(|| {
        (0..cfg.folds)
            .into_par_iter()
            .map(|f| run_job(baseline_job(f), cfg, &splits[f], master_seed, None))
            .collect::<Result<_>>()
    })?;

    let mut wanted = Vec::new();
    for &variant in &cfg.variants {
        for &m in &cfg.m_values {
            for &n in &cfg.n_values {
                for fold in 0..cfg.folds {
                    for seed in 0..cfg.seeds_per_cell {
                        wanted.push(Job { variant, m, n, fold, seed });
                    }
                }
            }
        }
    }
    let mut unique: Vec<Job> = wanted.iter().map(|j| j.canonical()).collect();
    unique.sort();
    unique.dedup();
    unique.retain(|j| *j != baseline_job(j.fold));

    let computed: Vec<CellResult> = pool.install(|| {
        unique
            .par_iter()
            .map(|&job| {
                let fold = job.fold;
                run_job(job, cfg, &splits[fold], master_seed, Some(&baselines[fold].0)).map(|(_, cell)| cell)
            })
            .collect::<Result<_>>()
    })?;
    let mut by_job: BTreeMap<Job, CellResult> = unique.into_iter().zip(computed).collect();
    for (f, (_, cell)) in baselines.into_iter().enumerate() {
        by_job.insert(baseline_job(f), cell);
    }

    Ok(wanted
        .into_iter()
        .map(|job| {
            let mut cell = by_job[&job.canonical()].clone();
            cell.m = job.m;
            cell.n = job.n;
            cell
        })
        .collect())
}

/// Policy with the highest mean macro F1 over its folds and seeds. Ties go
/// to the milder policy: lower n, then lower m, then earlier variant.
pub fn select_best(results: &[CellResult]) -> Option<(Variant, u8, u8)> {
    let mut groups: BTreeMap<(u8, u8, usize), (Variant, f64, usize)> = BTreeMap::new();
    for r in results {
        let order = Variant::ALL.iter().position(|v| *v == r.variant).unwrap_or(usize::MAX);
        let entry = groups.entry((r.n, r.m, order)).or_insert((r.variant, 0.0, 0));
        entry.1 += r.f1;
        entry.2 += 1;
    }
    let mut best: Option<((u8, u8, usize), Variant, f64)> = None;
    // keys iterate mildest first, so only strict improvements replace
    for (key, (variant, sum, count)) in groups {
        let mean = sum / count as f64;
        if best.as_ref().is_none_or(|b| mean > b.2) {
            best = Some((key, variant, mean));
        }
    }
    best.map(|((n, m, _), variant, _)| (variant, m, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationColumn {
    pub variant: Variant,
    /// Selected grid point; grid-free variants report the first grid point.
    pub m: u8,
    pub n: u8,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub columns: Vec<AblationColumn>,
    pub cells: Vec<CellResult>,
}

/// Per-variant summary at each variant's best grid point, with mean and
/// standard deviation over folds and seeds.
pub fn summarize(results: &[CellResult], variants: &[Variant]) -> Result<Vec<AblationColumn>> {
    variants
        .iter()
        .map(|&variant| {
            let own: Vec<CellResult> = results.iter().filter(|r| r.variant == variant).cloned().collect();
            let (_, m, n) = select_best(&own)
                .ok_or_else(|| Error::Config(format!("no results for variant {variant}")))?;
            let at: Vec<&CellResult> = own.iter().filter(|r| r.m == m && r.n == n).collect();
            let stat = |f: fn(&CellResult) -> f64| MeanStd::of(&at.iter().map(|r| f(r)).collect::<Vec<_>>());
            Ok(AblationColumn {
                variant,
                m,
                n,
                precision: stat(|r| r.precision),
                recall: stat(|r| r.recall),
                f1: stat(|r| r.f1),
            })
        })
        .collect()
}

/// The eight-column comparison: every variant at its own grid-searched best.
pub fn ablation_suite(cfg: &SearchConfig, dataset: &[LabeledExample], master_seed: u64) -> Result<AblationReport> {
    let cfg = SearchConfig { variants: Variant::ALL.to_vec(), ..cfg.clone() };
    let cells = run_grid(&cfg, dataset, master_seed)?;
    let columns = summarize(&cells, &cfg.variants)?;
    Ok(AblationReport { columns, cells })
}
