use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use super::{Dataset, DeclaredSplit, GrayImage};
use crate::error::{Error, Result};
use crate::readout::LabelVector;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn format_err<T>(offset: u64, message: impl Into<String>) -> Result<T> {
    Err(Error::Format { offset, message: message.into() })
}

/// Whole file, transparently gunzipped when it starts with the gzip magic.
fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        return Ok(out);
    }
    Ok(raw)
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => format_err(bytes.len() as u64, format!("file truncated, expected 4 bytes at {offset}")),
    }
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = be_u32(bytes, 0)?;
    if magic != expected {
        return format_err(0, format!("bad magic 0x{magic:08x}, expected 0x{expected:08x}"));
    }
    Ok(())
}

/// Parses an unsigned-byte image tensor (`n x rows x cols`).
pub fn read_idx_images(path: &Path) -> Result<Vec<GrayImage>> {
    let bytes = read_bytes(path)?;
    check_magic(&bytes, IMAGE_MAGIC)?;
    let n = be_u32(&bytes, 4)? as usize;
    let rows = be_u32(&bytes, 8)? as usize;
    let cols = be_u32(&bytes, 12)? as usize;
    if rows == 0 || cols == 0 {
        return format_err(8, "zero image dimension");
    }
    let size = rows * cols;
    let expected = 16 + n * size;
    if bytes.len() < expected {
        return format_err(bytes.len() as u64, format!("truncated: {n} images need {expected} bytes"));
    }
    if bytes.len() > expected {
        return format_err(expected as u64, "trailing bytes after the last image");
    }
    bytes[16..]
        .chunks_exact(size)
        .map(|px| GrayImage::new(rows, cols, px.to_vec()))
        .collect()
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_bytes(path)?;
    check_magic(&bytes, LABEL_MAGIC)?;
    let n = be_u32(&bytes, 4)? as usize;
    let expected = 8 + n;
    if bytes.len() < expected {
        return format_err(bytes.len() as u64, format!("truncated: {n} labels need {expected} bytes"));
    }
    if bytes.len() > expected {
        return format_err(expected as u64, "trailing bytes after the last label");
    }
    Ok(bytes[8..].to_vec())
}

/// Loads an image file and its label file as one dataset.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let imgs = read_idx_images(images)?;
    let labs = read_idx_labels(labels)?;
    if imgs.len() != labs.len() {
        return format_err(4, format!("{} images but {} labels", imgs.len(), labs.len()));
    }
    let labels = LabelVector::from_labels(labs.into_iter().map(usize::from).collect())?;
    let name = images.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(name, imgs, labels)
}

/// Concatenates official train and test files, declaring the split.
pub fn load_idx_split(
    name: &str,
    train_images: &Path,
    train_labels: &Path,
    test_images: &Path,
    test_labels: &Path,
) -> Result<Dataset> {
    let train = load_idx(train_images, train_labels)?;
    let test = load_idx(test_images, test_labels)?;
    let classes = train.class_count().max(test.class_count());
    let n_train = train.len();
    let images: Vec<_> = train.images.into_iter().chain(test.images).collect();
    let labels: Vec<usize> = train.labels.as_slice().iter().chain(test.labels.as_slice()).copied().collect();
    let total = labels.len();
    Dataset::from_shared(name, images, LabelVector::new(labels, classes)?)?
        .with_declared_split(DeclaredSplit { train: (0..n_train).collect(), test: (n_train..total).collect() })
}

pub fn write_idx_images(path: &Path, images: &[GrayImage]) -> Result<()> {
    let (rows, cols) = images.first().map_or((0, 0), |i| i.dims());
    if images.iter().any(|i| i.dims() != (rows, cols)) {
        return Err(Error::Input("IDX images must share one size".into()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    for v in [IMAGE_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.write_all(&v.to_be_bytes())?;
    }
    for img in images {
        out.write_all(img.pixels())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&LABEL_MAGIC.to_be_bytes())?;
    out.write_all(&(labels.len() as u32).to_be_bytes())?;
    out.write_all(labels)?;
    out.flush()?;
    Ok(())
}
