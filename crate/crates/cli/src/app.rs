//! Argument parsing and the subcommands.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use mixaug_core::policy::{augment_dataset, AugmentOptions, DISPLAY_OFFSET};
use mixaug_core::search::{ablation_suite, run_grid, select_best, summarize, CellResult, SearchConfig};
use mixaug_core::synth::{synth_dataset, SynthSpec};
use mixaug_core::{LabeledExample, PolicyConfig, Variant};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::manifest::{load_manifest, save_png};
use crate::report::{
    ablation_json, ablation_table, cell_json, scatter_json, scatter_rows, to_canonical_json, write_ablation_csv,
    write_cells_csv, write_scatter_csv, REPORT_VERSION,
};
use crate::settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "mixaug", version, about = "Augmentation policy search for small grayscale image classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// `key = value` config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// CSV manifest with a `path,class` header.
    #[arg(long, global = true, value_name = "PATH")]
    dataset: Option<PathBuf>,

    /// Synthetic dataset `CLASSESxPER_CLASSxSIZE`, e.g. `4x50x64`.
    #[arg(long, global = true, value_name = "SPEC")]
    synth: Option<String>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true, value_name = "K")]
    workers: Option<usize>,

    /// Master seed.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Grid search over (m, n) for the configured variants.
    Search,
    /// All eight variants, each at its best grid point.
    Ablation,
    /// Write augmented sample images as PNG.
    AugmentPreview {
        #[command(flatten)]
        policy: PolicyArgs,
        /// Number of images.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Affinity/diversity/F1 per policy as CSV.
    AffinityScatter,
    /// Cross-validate a single policy.
    TrainOne {
        #[command(flatten)]
        policy: PolicyArgs,
    },
}

#[derive(Debug, Args)]
struct PolicyArgs {
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    m: Option<u8>,
    #[arg(long)]
    n: Option<u8>,
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            e.exit_code()
        }
    }
}

fn settings_for(cli: &Cli) -> CliResult<Settings> {
    let mut s = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
            Settings::parse(&text)?
        }
        None => Settings::default(),
    };
    if cli.dataset.is_some() && cli.synth.is_some() {
        return Err(CliError::Usage("--dataset and --synth are mutually exclusive".into()));
    }
    if let Some(d) = &cli.dataset {
        s.dataset = Some(d.clone());
        s.synth = None;
    }
    if let Some(spec) = &cli.synth {
        s.synth = Some(spec.clone());
        s.dataset = None;
    }
    if let Some(w) = cli.workers {
        s.workers = w;
    }
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if s.dataset.is_some() && s.synth.is_some() {
        return Err(CliError::Usage("config sets both dataset and synth".into()));
    }
    if s.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    Ok(s)
}

struct Loaded {
    examples: Vec<LabeledExample>,
    class_names: Vec<String>,
    source: Value,
    input_size: (usize, usize),
}

fn load_dataset(s: &Settings) -> CliResult<Loaded> {
    let (mut examples, class_names, source) = if let Some(spec) = &s.synth {
        let spec = SynthSpec::parse(spec, s.seed)?;
        let examples = synth_dataset(&spec)?;
        let names = (0..spec.classes).map(|k| format!("class{k}")).collect();
        let source = json!({ "synth": format!("{}x{}x{}", spec.classes, spec.per_class, spec.size), "synth_seed": spec.seed.to_string() });
        (examples, names, source)
    } else if let Some(path) = &s.dataset {
        let (manifest, examples) = load_manifest(path, s.classes.as_deref(), s.input_size)?;
        let source = json!({ "manifest": path.display().to_string() });
        (examples, manifest.class_names, source)
    } else {
        return Err(CliError::Usage("no dataset: pass --dataset PATH or --synth SPEC, or set one in --config".into()));
    };
    let native = examples[0].image.dims();
    let input_size = s.input_size.unwrap_or(native);
    for e in &mut examples {
        if e.image.dims() != input_size {
            let (h, w) = input_size;
            e.image = if e.image.height() >= h && e.image.width() >= w {
                e.image.resize_area(h, w)
            } else {
                e.image.resize_bilinear(h, w)
            };
        }
    }
    Ok(Loaded { examples, class_names, source, input_size })
}

fn settings_json(s: &Settings, data: &Loaded) -> Value {
    let t = &s.train;
    json!({
        "dataset": data.source,
        "class_names": data.class_names,
        "examples": data.examples.len(),
        "seed": s.seed.to_string(),
        "workers": s.workers,
        "architecture": s.architecture.name(),
        "input_size": [data.input_size.0, data.input_size.1],
        "learning_rate": t.learning_rate,
        "momentum": t.momentum,
        "weight_decay": t.weight_decay,
        "batch_size": t.batch_size,
        "min_epochs": t.min_epochs,
        "patience": t.patience,
        "max_epochs": t.max_epochs,
        "m_values": s.m_values,
        "n_values": s.n_values,
        "folds": s.folds,
        "variants": s.variants.iter().map(|v| v.name()).collect::<Vec<_>>(),
        "seeds_per_cell": s.seeds_per_cell,
        "affinity_repeats": s.affinity_repeats,
    })
}

fn search_config(s: &Settings, data: &Loaded) -> SearchConfig {
    s.search(s.model(data.input_size, data.class_names.len()))
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn write_report(dir: &Path, command: &str, s: &Settings, data: &Loaded, cells: &[CellResult], extra: Value) -> CliResult<()> {
    let mut report = json!({
        "version": REPORT_VERSION,
        "tool": format!("mixaug {}", env!("CARGO_PKG_VERSION")),
        "command": command,
        "config": settings_json(s, data),
        "cells": cells.iter().map(cell_json).collect::<Vec<_>>(),
        "scatter": scatter_json(&scatter_rows(cells)),
        "best": best_json(cells),
        "ablation": Value::Null,
    });
    if let (Value::Object(map), Value::Object(more)) = (&mut report, extra) {
        map.extend(more);
    }
    fs::write(dir.join("report.json"), to_canonical_json(&report))?;
    Ok(())
}

fn best_json(cells: &[CellResult]) -> Value {
    match select_best(cells) {
        Some((variant, m, n)) => {
            let f1: Vec<f64> =
                cells.iter().filter(|c| c.variant == variant && c.m == m && c.n == n).map(|c| c.f1).collect();
            json!({ "variant": variant.name(), "m": m, "n": n, "f1": f1.iter().sum::<f64>() / f1.len() as f64 })
        }
        None => Value::Null,
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let s = settings_for(&cli)?;
    let out = cli.out.clone();
    match cli.command {
        Command::Search => {
            let data = load_dataset(&s)?;
            let cells = run_grid(&search_config(&s, &data), &data.examples, s.seed)?;
            prepare_out(&out)?;
            write_report(&out, "search", &s, &data, &cells, json!({}))?;
            write_cells_csv(&out.join("cells.csv"), &cells)?;
            write_scatter_csv(&out.join("scatter.csv"), &scatter_rows(&cells))?;
            if let Some((v, m, n)) = select_best(&cells) {
                println!("best policy: {v} m={m} n={n}");
            }
        }
        Command::Ablation => {
            let data = load_dataset(&s)?;
            let report = ablation_suite(&search_config(&s, &data), &data.examples, s.seed)?;
            prepare_out(&out)?;
            let extra = json!({ "ablation": ablation_json(&report.columns) });
            write_report(&out, "ablation", &s, &data, &report.cells, extra)?;
            write_cells_csv(&out.join("cells.csv"), &report.cells)?;
            write_scatter_csv(&out.join("scatter.csv"), &scatter_rows(&report.cells))?;
            write_ablation_csv(&out.join("ablation.csv"), &report.columns)?;
            print!("{}", ablation_table(&report.columns));
        }
        Command::AffinityScatter => {
            let data = load_dataset(&s)?;
            let cells = run_grid(&search_config(&s, &data), &data.examples, s.seed)?;
            prepare_out(&out)?;
            let rows = scatter_rows(&cells);
            write_scatter_csv(&out.join("scatter.csv"), &rows)?;
            println!("{} policies written to {}", rows.len(), out.join("scatter.csv").display());
        }
        Command::TrainOne { policy } => {
            let (variant, m, n) = pick_policy(&s, &policy);
            PolicyConfig::new(variant, m, n, 0)?;
            let data = load_dataset(&s)?;
            let cfg = SearchConfig { variants: vec![variant], m_values: vec![m], n_values: vec![n], ..search_config(&s, &data) };
            let cells = run_grid(&cfg, &data.examples, s.seed)?;
            prepare_out(&out)?;
            let summary = summarize(&cells, &[variant])?;
            write_report(&out, "train-one", &s, &data, &cells, json!({ "ablation": ablation_json(&summary) }))?;
            write_cells_csv(&out.join("cells.csv"), &cells)?;
            let col = &summary[0];
            println!(
                "{variant} m={m} n={n}: precision {:.4} recall {:.4} f1 {:.4} (± {:.4} over {} runs)",
                col.precision.mean,
                col.recall.mean,
                col.f1.mean,
                col.f1.std,
                cells.len()
            );
        }
        Command::AugmentPreview { policy, count } => {
            let (variant, m, n) = pick_policy(&s, &policy);
            let config = PolicyConfig::new(variant, m, n, s.seed)?;
            let data = load_dataset(&s)?;
            let samples = augment_dataset(&data.examples, &config, AugmentOptions::default(), s.seed, "preview")?;
            prepare_out(&out)?;
            let count = count.unwrap_or(s.count).min(samples.len());
            for (k, sample) in samples.iter().take(count).enumerate() {
                let offset = if sample.zero_mean { DISPLAY_OFFSET } else { 0.0 };
                let path = out.join(format!("preview_{k:03}.png"));
                save_png(&sample.image, offset, &path)?;
                let label: Vec<String> = sample.label.probs().iter().map(|p| format!("{p:.3}")).collect();
                println!("{} label [{}]", path.display(), label.join(", "));
            }
        }
    }
    Ok(())
}

fn pick_policy(s: &Settings, args: &PolicyArgs) -> (Variant, u8, u8) {
    (args.variant.unwrap_or(s.variant), args.m.unwrap_or(s.m), args.n.unwrap_or(s.n))
}
