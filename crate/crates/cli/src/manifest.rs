//! CSV dataset manifests: a `path,class` header followed by one row per
//! image, paths relative to the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use mixaug_core::{GrayImage, LabeledExample, SoftLabel};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    /// `(relative path, class name)` in file order.
    pub entries: Vec<(String, String)>,
    /// Index `k` of this list is class `k`.
    pub class_names: Vec<String>,
}

#[derive(Debug, serde::Deserialize)]
struct Row {
    path: String,
    class: String,
}

/// Read a manifest and decode its images in row order.
///
/// Without `class_names` the classes are the sorted unique names found in
/// the file. Images are resized to `size` (area averaging when shrinking);
/// without `size` all images must share the dimensions of the first one.
pub fn load_manifest(
    path: &Path,
    class_names: Option<&[String]>,
    size: Option<(usize, usize)>,
) -> CliResult<(DatasetManifest, Vec<LabeledExample>)> {
    let data = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| data(e.to_string()))?;
    let headers = reader.headers().map_err(|e| data(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["path", "class"] {
        return Err(data(format!("header must be `path,class`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut entries = Vec::new();
    for (k, row) in reader.deserialize::<Row>().enumerate() {
        // header is line 1
        let row = row.map_err(|e| data(format!("row {}: {e}", k + 2)))?;
        entries.push((row.path, row.class));
    }
    if entries.is_empty() {
        return Err(data("manifest has no rows".into()));
    }
    let class_names: Vec<String> = match class_names {
        Some(names) => names.to_vec(),
        None => entries.iter().map(|(_, c)| c.clone()).collect::<BTreeSet<_>>().into_iter().collect(),
    };
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();

    let mut examples = Vec::with_capacity(entries.len());
    let mut target = size;
    for (k, (rel, class)) in entries.iter().enumerate() {
        let row = k + 2;
        let index = class_names
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| data(format!("row {row}: unknown class {class:?}")))?;
        let file = root.join(rel);
        let decoded = image::open(&file).map_err(|e| data(format!("row {row}: {}: {e}", file.display())))?;
        let mut img = to_gray(&decoded);
        let (h, w) = *target.get_or_insert(img.dims());
        if img.dims() != (h, w) {
            if size.is_none() {
                return Err(data(format!(
                    "row {row}: image is {}x{}, expected {h}x{w}; set input_size to resize",
                    img.height(),
                    img.width()
                )));
            }
            img = if img.height() >= h && img.width() >= w { img.resize_area(h, w) } else { img.resize_bilinear(h, w) };
        }
        let label = SoftLabel::one_hot(index, class_names.len()).map_err(|e| data(format!("row {row}: {e}")))?;
        examples.push(LabeledExample::new(img, label, rel.clone()));
    }
    Ok((DatasetManifest { root, entries, class_names }, examples))
}

/// Luminance as the plain average of the colour channels; alpha is ignored.
pub fn to_gray(img: &DynamicImage) -> GrayImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().channel_count() <= 2 {
        let luma = img.to_luma8();
        return GrayImage::from_fn(h, w, |i, j| f64::from(luma.get_pixel(j as u32, i as u32).0[0]));
    }
    let rgb = img.to_rgb8();
    GrayImage::from_fn(h, w, |i, j| {
        let [r, g, b] = rgb.get_pixel(j as u32, i as u32).0;
        (f64::from(r) + f64::from(g) + f64::from(b)) / 3.0
    })
}

/// Encode as 8-bit grayscale PNG, adding `offset` and clamping to [0, 255].
pub fn save_png(img: &GrayImage, offset: f64, path: &Path) -> CliResult<()> {
    let (h, w) = img.dims();
    let buf = image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
        image::Luma([(img.get(y as usize, x as usize) + offset).round().clamp(0.0, 255.0) as u8])
    });
    buf.save(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
