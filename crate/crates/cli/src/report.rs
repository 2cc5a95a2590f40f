//! Report emission. JSON is canonical: object keys sorted, floats rounded to
//! nine significant digits, so a parsed report re-serialises byte-identically.

use std::collections::BTreeMap;
use std::path::Path;

use mixaug_core::search::{AblationColumn, CellResult, MeanStd};
use mixaug_core::Variant;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

pub const REPORT_VERSION: &str = "1";

pub const CELLS_HEADER: [&str; 13] = [
    "variant", "m", "n", "fold", "seed", "policy_seed", "precision", "recall", "f1", "affinity", "diversity",
    "epochs_run", "best_epoch",
];
pub const SCATTER_HEADER: [&str; 6] = ["variant", "m", "n", "affinity", "diversity", "f1"];
pub const ABLATION_HEADER: [&str; 9] = [
    "variant", "m", "n", "precision_mean", "precision_std", "recall_mean", "recall_std", "f1_mean", "f1_std",
];

pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// Text form of a float in CSV output, matching the JSON rounding.
pub fn fmt_float(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".into()
    } else {
        serde_json::Number::from_f64(r).map(|n| n.to_string()).unwrap_or_else(|| r.to_string())
    }
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().expect("f64 number"));
            serde_json::Number::from_f64(r).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

/// Pretty-printed canonical JSON with a trailing newline.
pub fn to_canonical_json(v: &Value) -> String {
    let mut text = serde_json::to_string_pretty(&canonicalize(v.clone())).expect("values serialise");
    text.push('\n');
    text
}

/// One aggregated point of the affinity/diversity plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub variant: Variant,
    pub m: u8,
    pub n: u8,
    pub affinity: f64,
    pub diversity: f64,
    pub f1: f64,
}

/// Means over folds and seeds for every (variant, m, n), in first-seen order.
pub fn scatter_rows(cells: &[CellResult]) -> Vec<ScatterRow> {
    let mut order = Vec::new();
    let mut acc: BTreeMap<(Variant, u8, u8), ([f64; 3], usize)> = BTreeMap::new();
    for c in cells {
        let key = (c.variant, c.m, c.n);
        let entry = acc.entry(key).or_insert_with(|| {
            order.push(key);
            ([0.0; 3], 0)
        });
        entry.0[0] += c.affinity;
        entry.0[1] += c.diversity;
        entry.0[2] += c.f1;
        entry.1 += 1;
    }
    order
        .into_iter()
        .map(|key| {
            let (sums, k) = acc[&key];
            let k = k as f64;
            ScatterRow { variant: key.0, m: key.1, n: key.2, affinity: sums[0] / k, diversity: sums[1] / k, f1: sums[2] / k }
        })
        .collect()
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-cell metrics. Wall time is left out so that the file is a
/// deterministic function of the inputs.
pub fn write_cells_csv(path: &Path, cells: &[CellResult]) -> CliResult<()> {
    write_csv(
        path,
        &CELLS_HEADER,
        cells.iter().map(|c| {
            vec![
                c.variant.name().to_string(),
                c.m.to_string(),
                c.n.to_string(),
                c.fold.to_string(),
                c.seed.to_string(),
                c.policy_seed.to_string(),
                fmt_float(c.precision),
                fmt_float(c.recall),
                fmt_float(c.f1),
                fmt_float(c.affinity),
                fmt_float(c.diversity),
                c.epochs_run.to_string(),
                c.best_epoch.to_string(),
            ]
        }),
    )
}

pub fn write_scatter_csv(path: &Path, rows: &[ScatterRow]) -> CliResult<()> {
    write_csv(
        path,
        &SCATTER_HEADER,
        rows.iter().map(|r| {
            vec![
                r.variant.name().to_string(),
                r.m.to_string(),
                r.n.to_string(),
                fmt_float(r.affinity),
                fmt_float(r.diversity),
                fmt_float(r.f1),
            ]
        }),
    )
}

pub fn write_ablation_csv(path: &Path, columns: &[AblationColumn]) -> CliResult<()> {
    write_csv(
        path,
        &ABLATION_HEADER,
        columns.iter().map(|c| {
            let mut row = vec![c.variant.name().to_string(), c.m.to_string(), c.n.to_string()];
            for s in [c.precision, c.recall, c.f1] {
                row.push(fmt_float(s.mean));
                row.push(fmt_float(s.std));
            }
            row
        }),
    )
}

fn mean_std(s: MeanStd) -> Value {
    json!({ "mean": s.mean, "std": s.std })
}

pub fn cell_json(c: &CellResult) -> Value {
    json!({
        "variant": c.variant.name(),
        "m": c.m,
        "n": c.n,
        "fold": c.fold,
        "seed": c.seed,
        "policy_seed": c.policy_seed.to_string(),
        "precision": c.precision,
        "recall": c.recall,
        "f1": c.f1,
        "confusion": c.confusion.counts(),
        "affinity": c.affinity,
        "diversity": c.diversity,
        "epochs_run": c.epochs_run,
        "best_epoch": c.best_epoch,
        "wall_time": c.wall_time,
    })
}

pub fn ablation_json(columns: &[AblationColumn]) -> Value {
    Value::Array(
        columns
            .iter()
            .map(|c| {
                json!({
                    "variant": c.variant.name(),
                    "m": c.m,
                    "n": c.n,
                    "precision": mean_std(c.precision),
                    "recall": mean_std(c.recall),
                    "f1": mean_std(c.f1),
                })
            })
            .collect(),
    )
}

pub fn scatter_json(rows: &[ScatterRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "variant": r.variant.name(),
                    "m": r.m,
                    "n": r.n,
                    "affinity": r.affinity,
                    "diversity": r.diversity,
                    "f1": r.f1,
                })
            })
            .collect(),
    )
}

/// Plain-text rendering of the ablation table: one column per variant,
/// `mean ± std` rows for precision, recall and F1.
type Row = (&'static str, fn(&AblationColumn) -> MeanStd);

pub fn ablation_table(columns: &[AblationColumn]) -> String {
    let mut out = format!("{:<10}", "metric");
    for c in columns {
        out += &format!(" {:>15}", c.variant.name());
    }
    out.push('\n');
    let rows: [Row; 3] =
        [("precision", |c| c.precision), ("recall", |c| c.recall), ("f1", |c| c.f1)];
    for (name, get) in rows {
        out += &format!("{name:<10}");
        for c in columns {
            let s = get(c);
            out += &format!(" {:>15}", format!("{:.3} ± {:.3}", s.mean, s.std));
        }
        out.push('\n');
    }
    out
}
