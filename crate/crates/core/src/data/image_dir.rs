use std::path::Path;

use super::{Dataset, GrayImage};
use crate::error::{Error, Result};
use crate::readout::LabelVector;

/// Rounded Rec. 601 luma of an RGB pixel.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round().clamp(0.0, 255.0) as u8
}

fn row_err<T>(row: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Manifest { row, message: message.into() })
}

/// Loads images listed in a `path,label` CSV manifest, in manifest order.
///
/// Paths are relative to `root`. Rows are numbered from 1 after the header.
pub fn load_image_dir(root: &Path, manifest: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(manifest).map_err(|e| Error::Manifest { row: 0, message: e.to_string() })?;
    let headers = reader.headers().map_err(|e| Error::Manifest { row: 0, message: e.to_string() })?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(path_col), Some(label_col)) = (col("path"), col("label")) else {
        return row_err(0, "manifest header must contain `path` and `label`");
    };

    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Manifest { row, message: e.to_string() })?;
        let (Some(rel), Some(label)) = (record.get(path_col), record.get(label_col)) else {
            return row_err(row, "missing field");
        };
        let label: usize = match label.trim().parse() {
            Ok(l) => l,
            Err(_) => return row_err(row, format!("bad label `{label}`")),
        };
        let path = root.join(rel.trim());
        let decoded = match image::open(&path) {
            Ok(img) => img,
            Err(e) => return row_err(row, format!("{}: {e}", path.display())),
        };
        images.push(to_gray(&decoded));
        labels.push(label);
    }
    let name = root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(name, images, LabelVector::from_labels(labels)?)
}

fn to_gray(img: &image::DynamicImage) -> GrayImage {
    use image::DynamicImage::*;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = match img {
        ImageLuma8(g) => g.as_raw().clone(),
        _ => img.to_rgb8().pixels().map(|p| luma(p[0], p[1], p[2])).collect(),
    };
    GrayImage::new(h, w, pixels).expect("decoded image dimensions match its pixel buffer")
}
