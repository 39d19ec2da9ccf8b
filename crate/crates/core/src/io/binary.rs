//! `INDR` container.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "INDR"
//! 4       2     format version (u16 LE) = 1
//! 6       2     flags (u16 LE): bit 0 payload is f64 (else f32)
//!                               bit 1 cost matrix (else embeddings)
//!                               bit 2 anchored (matrices only)
//! 8       8     n rows (u64 LE)
//! 16      8     m columns (u64 LE)
//! 24      ...   id table: n row ids, then m column ids for matrices;
//!               each a u32 LE byte length followed by UTF-8
//! ...     ...   metadata: u32 LE byte length followed by UTF-8 JSON
//! ...     n*m*w payload, row-major little-endian floats
//! end-4   4     CRC-32 of the payload bytes (u32 LE)
//! ```
//!
//! Embedding metadata is `{"provenance": ...}`; matrix metadata carries the
//! cost kind, operator history and source row/column positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ops::OperatorStep;
use crate::scalar::{Scalar, Width};
use crate::types::{CostKind, CostMatrix, CostMatrixParts, EmbeddingSet};

pub const MAGIC: &[u8; 4] = b"INDR";
pub const FORMAT_VERSION: u16 = 1;

const FLAG_F64: u16 = 1 << 0;
const FLAG_MATRIX: u16 = 1 << 1;
const FLAG_ANCHORED: u16 = 1 << 2;
const KNOWN_FLAGS: u16 = FLAG_F64 | FLAG_MATRIX | FLAG_ANCHORED;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    Embeddings,
    Matrix,
}

/// Header summary and checksum of an `INDR` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileInfo {
    pub kind: PayloadKind,
    pub version: u16,
    pub width: Width,
    pub rows: u64,
    pub cols: u64,
    pub anchored: bool,
    pub payload_crc: u32,
    pub metadata: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingMeta {
    provenance: String,
}

#[derive(Serialize, Deserialize)]
struct MatrixMeta {
    cost_kind: CostKind,
    history: Vec<OperatorStep>,
    row_index: Vec<usize>,
    col_index: Vec<usize>,
}

struct Header {
    flags: u16,
    version: u16,
    rows: u64,
    cols: u64,
}

impl Header {
    fn width(&self) -> Width {
        if self.flags & FLAG_F64 != 0 {
            Width::F64
        } else {
            Width::F32
        }
    }

    fn kind(&self) -> PayloadKind {
        if self.flags & FLAG_MATRIX != 0 {
            PayloadKind::Matrix
        } else {
            PayloadKind::Embeddings
        }
    }
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn encode<T: Scalar>(
    flags: u16,
    rows: usize,
    cols: usize,
    ids: impl Iterator<Item = impl AsRef<str>>,
    meta: &str,
    values: &[T],
    width: Width,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + values.len() * width.bytes());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let flags = match width {
        Width::F64 => flags | FLAG_F64,
        Width::F32 => flags,
    };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for id in ids {
        push_str(&mut out, id.as_ref());
    }
    push_str(&mut out, meta);
    let start = out.len();
    for &v in values {
        match width {
            Width::F32 => (v.as_f64() as f32).write_le(&mut out),
            Width::F64 => v.as_f64().write_le(&mut out),
        }
    }
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Embeddings at the scalar's own width.
pub fn write_embeddings<T: Scalar>(e: &EmbeddingSet<T>) -> Vec<u8> {
    write_embeddings_as(e, T::WIDTH)
}

/// Embeddings at an explicit width; `F32` narrows `f64` values.
pub fn write_embeddings_as<T: Scalar>(e: &EmbeddingSet<T>, width: Width) -> Vec<u8> {
    let meta =
        serde_json::to_string(&EmbeddingMeta { provenance: e.provenance().to_string() }).expect("metadata serialises");
    encode(0, e.len(), e.dim(), e.ids().iter(), &meta, e.data().as_slice(), width)
}

/// Cost matrix at the scalar's own width, with ids and metadata.
pub fn write_matrix<T: Scalar>(m: &CostMatrix<T>) -> Vec<u8> {
    let meta = serde_json::to_string(&MatrixMeta {
        cost_kind: m.cost_kind(),
        history: m.history().to_vec(),
        row_index: m.row_index().to_vec(),
        col_index: m.col_index().to_vec(),
    })
    .expect("metadata serialises");
    let flags = FLAG_MATRIX | if m.anchored() { FLAG_ANCHORED } else { 0 };
    encode(flags, m.rows(), m.cols(), m.row_ids().iter().chain(m.col_ids()), &meta, m.values().as_slice(), T::WIDTH)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::parse(self.pos as u64, format!("unexpected end of file reading {what}"))),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let at = self.pos as u64;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|e| Error::parse(at, format!("{what}: {e}")))
    }
}

fn read_header(c: &mut Cursor<'_>) -> Result<Header> {
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::parse(0, "bad magic, expected \"INDR\""));
    }
    let version = c.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::parse(4, format!("unsupported format version {version}")));
    }
    let flags = c.u16("flags")?;
    if flags & !KNOWN_FLAGS != 0 {
        return Err(Error::parse(6, format!("unknown flag bits {flags:#06x}")));
    }
    let rows = c.u64("row count")?;
    let cols = c.u64("column count")?;
    Ok(Header { flags, version, rows, cols })
}

struct Body {
    header: Header,
    row_ids: Vec<String>,
    col_ids: Vec<String>,
    meta: String,
    meta_offset: u64,
    values: Vec<f64>,
    payload_crc: u32,
}

fn read_body(bytes: &[u8]) -> Result<Body> {
    let mut c = Cursor { bytes, pos: 0 };
    let header = read_header(&mut c)?;
    let too_big = |what: &str| Error::parse(c.pos as u64, format!("{what} count does not fit in memory"));
    let rows = usize::try_from(header.rows).map_err(|_| too_big("row"))?;
    let cols = usize::try_from(header.cols).map_err(|_| too_big("column"))?;
    // every id needs at least its 4-byte length prefix
    let ids_needed = rows.saturating_add(if header.kind() == PayloadKind::Matrix { cols } else { 0 });
    if ids_needed.saturating_mul(4) > bytes.len() {
        return Err(Error::parse(c.pos as u64, "id table larger than file"));
    }
    let row_ids = (0..rows).map(|_| c.string("row id")).collect::<Result<Vec<_>>>()?;
    let col_ids = if header.kind() == PayloadKind::Matrix {
        (0..cols).map(|_| c.string("column id")).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let meta_offset = c.pos as u64;
    let meta = c.string("metadata")?;
    let width = header.width().bytes();
    let count = rows.checked_mul(cols).ok_or_else(|| Error::parse(c.pos as u64, "payload size overflows"))?;
    let payload_len = count.checked_mul(width).ok_or_else(|| Error::parse(c.pos as u64, "payload size overflows"))?;
    let payload = c.take(payload_len, "payload")?;
    let stored = c.u32("checksum")?;
    if c.pos != bytes.len() {
        return Err(Error::parse(c.pos as u64, "trailing bytes after checksum"));
    }
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    let values = match header.width() {
        Width::F32 => payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect(),
        Width::F64 => payload.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect(),
    };
    Ok(Body { header, row_ids, col_ids, meta, meta_offset, values, payload_crc: computed })
}

/// Reads an embeddings file, converting the payload to `T`.
pub fn read_embeddings<T: Scalar>(bytes: &[u8]) -> Result<EmbeddingSet<T>> {
    let body = read_body(bytes)?;
    if body.header.kind() != PayloadKind::Embeddings {
        return Err(Error::parse(6, "file holds a cost matrix, not embeddings"));
    }
    let meta: EmbeddingMeta =
        serde_json::from_str(&body.meta).map_err(|e| Error::parse(body.meta_offset, format!("metadata: {e}")))?;
    let data = Matrix::new(
        body.header.rows as usize,
        body.header.cols as usize,
        body.values.into_iter().map(T::lit).collect(),
    )?;
    EmbeddingSet::new(body.row_ids, data, meta.provenance)
}

/// Reads a cost-matrix file, converting the payload to `T`.
pub fn read_matrix<T: Scalar>(bytes: &[u8]) -> Result<CostMatrix<T>> {
    let body = read_body(bytes)?;
    if body.header.kind() != PayloadKind::Matrix {
        return Err(Error::parse(6, "file holds embeddings, not a cost matrix"));
    }
    let meta: MatrixMeta =
        serde_json::from_str(&body.meta).map_err(|e| Error::parse(body.meta_offset, format!("metadata: {e}")))?;
    let values = Matrix::new(
        body.header.rows as usize,
        body.header.cols as usize,
        body.values.into_iter().map(T::lit).collect(),
    )?;
    CostMatrix::from_parts(CostMatrixParts {
        row_ids: body.row_ids,
        col_ids: body.col_ids,
        row_index: meta.row_index,
        col_index: meta.col_index,
        values,
        anchored: body.header.flags & FLAG_ANCHORED != 0,
        cost_kind: meta.cost_kind,
        history: meta.history,
    })
}

/// Parses and checksums a file without materialising typed data.
pub fn inspect(bytes: &[u8]) -> Result<FileInfo> {
    let body = read_body(bytes)?;
    let metadata =
        serde_json::from_str(&body.meta).map_err(|e| Error::parse(body.meta_offset, format!("metadata: {e}")))?;
    Ok(FileInfo {
        kind: body.header.kind(),
        version: body.header.version,
        width: body.header.width(),
        rows: body.header.rows,
        cols: body.header.cols,
        anchored: body.header.flags & FLAG_ANCHORED != 0,
        payload_crc: body.payload_crc,
        metadata,
    })
}
