//! CSV readers and writers.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::types::{CostMatrix, EmbeddingSet};

fn csv_err(e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::parse(offset, format!("{other:?}")),
    }
}

/// `id,x0,x1,...` with one header row; the id column comes first.
pub fn read_embeddings_csv<T: Scalar, R: Read>(reader: R, provenance: &str) -> Result<EmbeddingSet<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let width = rdr.headers().map_err(csv_err)?.len();
    if width < 2 {
        return Err(Error::parse(0, "header needs an id column and at least one value column"));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let offset = record.position().map_or(0, |p| p.byte());
        if record.len() != width {
            return Err(Error::parse(offset, format!("expected {width} fields, found {}", record.len())));
        }
        ids.push(record[0].to_string());
        for field in record.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| Error::parse(offset, format!("not a number: {field:?}")))?;
            values.push(T::lit(v));
        }
    }
    let data = Matrix::new(ids.len(), width - 1, values)?;
    EmbeddingSet::new(ids, data, provenance)
}

pub fn write_embeddings_csv<T: Scalar, W: Write>(e: &EmbeddingSet<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = std::iter::once("id".to_string()).chain((0..e.dim()).map(|j| format!("x{j}"))).collect();
    w.write_record(&header).map_err(csv_err)?;
    for (id, row) in e.ids().iter().zip(e.data().iter_rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Cost matrix as a table: header `id,<column ids>`, one row per row id.
pub fn write_matrix_csv<T: Scalar, W: Write>(m: &CostMatrix<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = std::iter::once("id").chain(m.col_ids().iter().map(String::as_str)).collect();
    w.write_record(&header).map_err(csv_err)?;
    for (i, id) in m.row_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `id,label` rows; returns labels aligned with `ids`. Every id must appear
/// exactly once.
pub fn read_labels_csv<R: Read>(reader: R, ids: &[String]) -> Result<Vec<usize>> {
    use std::collections::HashMap;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let offset = record.position().map_or(0, |p| p.byte());
        if record.len() != 2 {
            return Err(Error::parse(offset, "expected id,label"));
        }
        let label: usize =
            record[1].parse().map_err(|_| Error::parse(offset, format!("bad label {:?}", &record[1])))?;
        if by_id.insert(record[0].to_string(), label).is_some() {
            return Err(Error::parse(offset, format!("duplicate id {:?}", &record[0])));
        }
    }
    ids.iter()
        .map(|id| by_id.get(id).copied().ok_or_else(|| Error::InvalidSpec(format!("no label for id {id:?}"))))
        .collect()
}

pub fn write_labels_csv<W: Write>(ids: &[String], labels: &[usize], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "label"]).map_err(csv_err)?;
    for (id, l) in ids.iter().zip(labels) {
        w.write_record([id.as_str(), &l.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
