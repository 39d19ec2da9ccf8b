//! File formats: the `INDR` binary container for embeddings and cost
//! matrices, and CSV for hand-authored fixtures, labels and tables.

mod binary;
mod text;

use std::fs;
use std::path::Path;

pub use binary::{
    inspect, read_embeddings, read_matrix, write_embeddings, write_embeddings_as, write_matrix, FileInfo, PayloadKind,
    FORMAT_VERSION, MAGIC,
};
pub use text::{read_embeddings_csv, read_labels_csv, write_embeddings_csv, write_labels_csv, write_matrix_csv};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::types::{CostMatrix, EmbeddingSet};

/// Loads embeddings from an `INDR` binary file or, failing the magic check,
/// a CSV file with a header row and the id in the first column.
pub fn load_embeddings<T: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingSet<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        read_embeddings(&bytes)
    } else {
        let provenance = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        read_embeddings_csv(bytes.as_slice(), &provenance)
    }
}

/// Writes embeddings in the binary format at the set's own scalar width.
pub fn save_embeddings<T: Scalar>(e: &EmbeddingSet<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_embeddings(e))?;
    Ok(())
}

pub fn save_matrix<T: Scalar>(m: &CostMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_matrix(m))?;
    Ok(())
}

pub fn load_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<CostMatrix<T>> {
    read_matrix(&fs::read(path)?)
}
