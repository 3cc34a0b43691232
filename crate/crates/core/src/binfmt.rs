//! Flat binary records: 16-byte header then row-major little-endian `f32` data.
//!
//! Header: magic `ORNN`, kind, rows, cols (each `u32` little-endian). Complex
//! values are stored as interleaved `re, im`.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::RealGrid;
use crate::optics::{CameraFrame, FieldGrid};
use crate::readout::FeatureMatrix;

pub const MAGIC: &[u8; 4] = b"ORNN";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum RecordKind {
    Field = 1,
    Frame = 2,
    FeatureMatrix = 3,
}

impl RecordKind {
    fn from_u32(v: u32) -> Option<Self> {
        match v {
            1 => Some(Self::Field),
            2 => Some(Self::Frame),
            3 => Some(Self::FeatureMatrix),
            _ => None,
        }
    }
}

fn write_header<W: Write>(out: &mut W, kind: RecordKind, rows: usize, cols: usize) -> Result<()> {
    out.write_all(MAGIC)?;
    for v in [kind as u32, rows as u32, cols as u32] {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_f32s<W: Write>(out: &mut W, values: impl Iterator<Item = f64>) -> Result<()> {
    for v in values {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn write_field<W: Write>(out: &mut W, field: &FieldGrid) -> Result<()> {
    write_header(out, RecordKind::Field, field.height(), field.width())?;
    write_f32s(out, field.values().iter().flat_map(|c| [c.re, c.im]))
}

pub fn write_frame<W: Write>(out: &mut W, frame: &CameraFrame) -> Result<()> {
    write_header(out, RecordKind::Frame, frame.height(), frame.width())?;
    write_f32s(out, frame.intensities().data().iter().copied())
}

pub fn write_features<W: Write>(out: &mut W, x: &FeatureMatrix) -> Result<()> {
    write_header(out, RecordKind::FeatureMatrix, x.rows(), x.cols())?;
    write_f32s(out, x.data().iter().copied())
}

/// A decoded record: kind, shape and the raw `f32` payload widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub kind: RecordKind,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Record {
    pub fn into_features(self) -> Result<FeatureMatrix> {
        self.expect(RecordKind::FeatureMatrix)?;
        FeatureMatrix::new(self.rows, self.cols, self.values)
    }

    pub fn into_field(self) -> Result<FieldGrid> {
        self.expect(RecordKind::Field)?;
        let values = self.values.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        FieldGrid::new(self.rows, self.cols, values)
    }

    /// Intensities as an unquantized frame with the given saturation level.
    pub fn into_frame(self, saturation_level: f64) -> Result<CameraFrame> {
        self.expect(RecordKind::Frame)?;
        CameraFrame::new(RealGrid::new(self.rows, self.cols, self.values)?, saturation_level)
    }

    fn expect(&self, kind: RecordKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format { offset: 4, message: format!("expected {kind:?} record, found {:?}", self.kind) });
        }
        Ok(())
    }
}

pub fn read_record<R: Read>(input: &mut R) -> Result<Record> {
    let mut header = [0u8; 16];
    read_exact_at(input, &mut header, 0)?;
    if &header[..4] != MAGIC {
        return Err(Error::Format { offset: 0, message: "missing ORNN magic".into() });
    }
    let word = |i: usize| u32::from_le_bytes([header[i], header[i + 1], header[i + 2], header[i + 3]]);
    let kind = RecordKind::from_u32(word(4))
        .ok_or_else(|| Error::Format { offset: 4, message: format!("unknown record kind {}", word(4)) })?;
    let (rows, cols) = (word(8) as usize, word(12) as usize);
    let per = if kind == RecordKind::Field { 2 } else { 1 };
    let mut payload = vec![0u8; rows * cols * per * 4];
    read_exact_at(input, &mut payload, 16)?;
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok(Record { kind, rows, cols, values })
}

fn read_exact_at<R: Read>(input: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format { offset, message: "truncated record".into() },
        _ => Error::Io(e),
    })
}
