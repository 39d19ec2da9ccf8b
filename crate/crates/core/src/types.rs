//! Shared data model: embedding sets, cost matrices and paired datasets.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ops::OperatorStep;
use crate::scalar::{squared_norm, Scalar};

/// One defect found by [`validate_embeddings`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    Empty { rows: usize, cols: usize },
    IdCountMismatch { ids: usize, rows: usize },
    NonFinite { row: usize, col: usize },
    ZeroNormRow { row: usize },
    DuplicateId { id: String, first: usize, second: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty { rows, cols } => write!(f, "empty matrix ({rows}x{cols})"),
            Violation::IdCountMismatch { ids, rows } => {
                write!(f, "{ids} ids for {rows} rows")
            }
            Violation::NonFinite { row, col } => write!(f, "non-finite at row {row} col {col}"),
            Violation::ZeroNormRow { row } => write!(f, "zero-norm row at index {row}"),
            Violation::DuplicateId { id, first, second } => {
                write!(f, "duplicate id {id:?} at rows {first} and {second}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Reports every invariant violation of a prospective embedding set.
///
/// Rows holding a non-finite value are not additionally checked for zero norm.
pub fn validate_embeddings<T: Scalar>(ids: &[String], data: &Matrix<T>) -> ValidationReport {
    let mut violations = Vec::new();
    if data.rows() == 0 || data.cols() == 0 {
        violations.push(Violation::Empty { rows: data.rows(), cols: data.cols() });
    }
    if ids.len() != data.rows() {
        violations.push(Violation::IdCountMismatch { ids: ids.len(), rows: data.rows() });
    }
    if data.cols() > 0 {
        for (i, row) in data.iter_rows().enumerate() {
            let mut finite = true;
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    violations.push(Violation::NonFinite { row: i, col: j });
                    finite = false;
                }
            }
            if finite && squared_norm(row) == T::zero() {
                violations.push(Violation::ZeroNormRow { row: i });
            }
        }
    }
    let mut seen: HashMap<&str, usize> = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if let Some(&first) = seen.get(id.as_str()) {
            violations.push(Violation::DuplicateId { id: id.clone(), first, second: i });
        } else {
            seen.insert(id, i);
        }
    }
    ValidationReport { violations }
}

/// `n x d` encoder outputs with stable sample identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T> {
    ids: Vec<String>,
    data: Matrix<T>,
    provenance: String,
}

impl<T: Scalar> EmbeddingSet<T> {
    pub fn new(ids: Vec<String>, data: Matrix<T>, provenance: impl Into<String>) -> Result<Self> {
        let report = validate_embeddings(&ids, &data);
        if !report.is_valid() {
            return Err(Error::Validation(report));
        }
        Ok(Self { ids, data, provenance: provenance.into() })
    }

    /// Sequential ids `{prefix}{i}` zero-padded to a common width.
    pub fn with_generated_ids(prefix: &str, data: Matrix<T>, provenance: impl Into<String>) -> Result<Self> {
        let ids = generated_ids(prefix, data.rows());
        Self::new(ids, data, provenance)
    }

    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &Matrix<T> {
        &self.data
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.data.row(i)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Same ids and provenance over new values of the same shape.
    pub fn with_data(&self, data: Matrix<T>) -> Result<Self> {
        if data.rows() != self.len() || data.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.len() * self.dim(),
                found: data.rows() * data.cols(),
            });
        }
        Self::new(self.ids.clone(), data, self.provenance.clone())
    }

    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        for &i in idx {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange { index: i, len: self.len() });
            }
        }
        Self::new(
            idx.iter().map(|&i| self.ids[i].clone()).collect(),
            self.data.select_rows(idx),
            self.provenance.clone(),
        )
    }

    /// Converts to another scalar width, revalidating (narrowing can overflow).
    pub fn cast<U: Scalar>(&self) -> Result<EmbeddingSet<U>> {
        EmbeddingSet::new(self.ids.clone(), self.data.map(|x| U::lit(x.as_f64())), self.provenance.clone())
    }
}

pub(crate) fn generated_ids(prefix: &str, n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

/// Name of the cost function that generated a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// Arc-cosine of cosine similarity; symmetric, values in `[0, pi]`.
    Angular,
    /// Supplied directly (hand-built or imported); no symmetry assumed.
    Precomputed,
}

impl CostKind {
    pub fn is_symmetric(self) -> bool {
        matches!(self, CostKind::Angular)
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::Angular => "angular",
            CostKind::Precomputed => "precomputed",
        })
    }
}

/// Relational profiles: row `i` holds the costs from sample `i` to every
/// column sample.
///
/// `row_index` / `col_index` record the positions of rows and columns in the
/// embedding set(s) they were computed from; matching uses them to locate the
/// column that belongs to a given row sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    row_ids: Vec<String>,
    col_ids: Vec<String>,
    row_index: Vec<usize>,
    col_index: Vec<usize>,
    values: Matrix<T>,
    anchored: bool,
    cost_kind: CostKind,
    history: Vec<OperatorStep>,
}

/// Unvalidated fields of a [`CostMatrix`].
#[derive(Debug, Clone)]
pub struct CostMatrixParts<T> {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub row_index: Vec<usize>,
    pub col_index: Vec<usize>,
    pub values: Matrix<T>,
    pub anchored: bool,
    pub cost_kind: CostKind,
    pub history: Vec<OperatorStep>,
}

impl<T: Scalar> CostMatrix<T> {
    pub fn from_parts(parts: CostMatrixParts<T>) -> Result<Self> {
        let CostMatrixParts { row_ids, col_ids, row_index, col_index, values, anchored, cost_kind, history } = parts;
        let (n, m) = (values.rows(), values.cols());
        for (len, expected) in [(row_ids.len(), n), (row_index.len(), n), (col_ids.len(), m), (col_index.len(), m)] {
            if len != expected {
                return Err(Error::DimensionMismatch { expected, found: len });
            }
        }
        if values.as_slice().iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidSpec("cost matrix contains NaN".into()));
        }
        Ok(Self { row_ids, col_ids, row_index, col_index, values, anchored, cost_kind, history })
    }

    /// A square, non-anchored matrix of hand-supplied costs with ids `0..n`.
    pub fn square(values: Matrix<T>) -> Result<Self> {
        if values.rows() != values.cols() {
            return Err(Error::NotSquare { rows: values.rows(), cols: values.cols() });
        }
        let n = values.rows();
        let ids = generated_ids("", n);
        Self::from_parts(CostMatrixParts {
            row_ids: ids.clone(),
            col_ids: ids,
            row_index: (0..n).collect(),
            col_index: (0..n).collect(),
            values,
            anchored: false,
            cost_kind: CostKind::Precomputed,
            history: Vec::new(),
        })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        Self::square(Matrix::from_rows(rows)?)
    }

    pub fn into_parts(self) -> CostMatrixParts<T> {
        CostMatrixParts {
            row_ids: self.row_ids,
            col_ids: self.col_ids,
            row_index: self.row_index,
            col_index: self.col_index,
            values: self.values,
            anchored: self.anchored,
            cost_kind: self.cost_kind,
            history: self.history,
        }
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    pub fn row_index(&self) -> &[usize] {
        &self.row_index
    }

    pub fn col_index(&self) -> &[usize] {
        &self.col_index
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.values.row(i)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values.get(i, j)
    }

    pub fn anchored(&self) -> bool {
        self.anchored
    }

    pub fn cost_kind(&self) -> CostKind {
        self.cost_kind
    }

    pub fn history(&self) -> &[OperatorStep] {
        &self.history
    }

    /// Column position holding the profile coordinate of source sample `source`.
    pub fn column_of_source(&self, source: usize) -> Option<usize> {
        self.col_index.iter().position(|&c| c == source)
    }

    /// Replaces the values after an operator, appending it to the history.
    pub(crate) fn with_values(&self, values: Matrix<T>, step: OperatorStep) -> Self {
        debug_assert_eq!(values.rows(), self.rows());
        debug_assert_eq!(values.cols(), self.cols());
        let mut history = self.history.clone();
        history.push(step);
        Self { values, history, ..self.clone() }
    }

    pub(crate) fn ensure_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare { rows: self.rows(), cols: self.cols() })
        }
    }
}

/// Index-aligned embeddings of the same samples in two modalities.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset<T> {
    u: EmbeddingSet<T>,
    q: EmbeddingSet<T>,
}

impl<T: Scalar> PairedDataset<T> {
    pub fn new(u: EmbeddingSet<T>, q: EmbeddingSet<T>) -> Result<Self> {
        if u.len() != q.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), found: q.len() });
        }
        Ok(Self { u, q })
    }

    /// Single-modality case: both sides are the same set.
    pub fn single(e: EmbeddingSet<T>) -> Self {
        Self { u: e.clone(), q: e }
    }

    pub fn u(&self) -> &EmbeddingSet<T> {
        &self.u
    }

    pub fn q(&self) -> &EmbeddingSet<T> {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Key naming pair `i`: the shared id, or `u~q` when the modalities use
    /// different ids.
    pub fn pair_key(&self, i: usize) -> String {
        let (a, b) = (&self.u.ids()[i], &self.q.ids()[i]);
        if a == b {
            a.clone()
        } else {
            format!("{a}~{b}")
        }
    }

    pub fn into_parts(self) -> (EmbeddingSet<T>, EmbeddingSet<T>) {
        (self.u, self.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn valid_set_has_empty_report() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 3.0, 4.0], [0.0, 1.0, 0.0, 0.0], [5.0, 5.0, 5.0, 5.0]]).unwrap();
        let report = validate_embeddings(&ids(&["a", "b", "c"]), &m);
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn zero_row_reported() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [0.0, 0.0]]).unwrap();
        let report = validate_embeddings(&ids(&["a", "b"]), &m);
        assert_eq!(report.violations, vec![Violation::ZeroNormRow { row: 1 }]);
        assert_eq!(report.violations[0].to_string(), "zero-norm row at index 1");
    }

    #[test]
    fn duplicate_id_reported() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let report = validate_embeddings(&ids(&["a", "a"]), &m);
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].to_string().starts_with("duplicate id"));
    }

    #[test]
    fn nan_and_empty_reported() {
        let m = Matrix::from_rows(&[[1.0, f64::NAN]]).unwrap();
        let report = validate_embeddings(&ids(&["a"]), &m);
        assert_eq!(report.violations, vec![Violation::NonFinite { row: 0, col: 1 }]);

        let empty: Matrix<f64> = Matrix::new(0, 3, vec![]).unwrap();
        let report = validate_embeddings(&[], &empty);
        assert_eq!(report.violations, vec![Violation::Empty { rows: 0, cols: 3 }]);
    }

    #[test]
    fn generated_ids_are_padded_and_unique() {
        assert_eq!(generated_ids("s", 11)[3], "s03");
        assert_eq!(generated_ids("", 1), vec!["0"]);
    }

    #[test]
    fn pair_keys() {
        let u = EmbeddingSet::new(ids(&["a", "b"]), Matrix::from_rows(&[[1.0], [2.0]]).unwrap(), "").unwrap();
        let q = EmbeddingSet::new(ids(&["a", "x"]), Matrix::from_rows(&[[1.0], [2.0]]).unwrap(), "").unwrap();
        let p = PairedDataset::new(u, q).unwrap();
        assert_eq!(p.pair_key(0), "a");
        assert_eq!(p.pair_key(1), "b~x");
    }
}
