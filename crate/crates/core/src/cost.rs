//! Cost functions on embedding vectors and pairwise cost matrices.
//!
//! A cost function must satisfy `d(x, x) = 0` and the triangle inequality.
//! The angular distance `arccos(<u, v> / (|u| |v|))` is the one shipped kind.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{dot, squared_norm, Scalar};
use crate::types::{CostKind, CostMatrix, CostMatrixParts, EmbeddingSet};

/// Contract for a cost `d(u, v)` between embedding vectors.
///
/// `prepare` computes per-vector data once (for angular distance, the squared
/// norm) so pairwise kernels avoid recomputing it; `cost` must equal
/// `cost_prepared` on freshly prepared inputs bit-for-bit.
pub trait CostFunction<T: Scalar>: Sync {
    type Prepared: Copy + Send + Sync;

    fn kind(&self) -> CostKind;

    fn prepare(&self, v: &[T]) -> Result<Self::Prepared>;

    fn cost_prepared(&self, u: &[T], pu: Self::Prepared, v: &[T], pv: Self::Prepared) -> T;

    fn cost(&self, u: &[T], v: &[T]) -> Result<T> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), found: v.len() });
        }
        let (pu, pv) = (self.prepare(u)?, self.prepare(v)?);
        Ok(self.cost_prepared(u, pu, v, pv))
    }
}

/// Angular distance, values in `[0, pi]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Angular;

impl<T: Scalar> CostFunction<T> for Angular {
    type Prepared = T;

    fn kind(&self) -> CostKind {
        CostKind::Angular
    }

    fn prepare(&self, v: &[T]) -> Result<T> {
        let sq = squared_norm(v);
        if sq == T::zero() || !sq.is_finite() {
            return Err(Error::ZeroNormInput { row: None });
        }
        Ok(sq)
    }

    #[inline]
    fn cost_prepared(&self, u: &[T], su: T, v: &[T], sv: T) -> T {
        // sqrt(su * sv) rather than |u| |v|: for u == v it returns su exactly,
        // so the cosine is exactly 1 and the distance exactly 0.
        let cos = dot(u, v) / (su * sv).sqrt();
        let cos = cos.max(-T::one()).min(T::one());
        cos.acos()
    }
}

/// Angular distance between two vectors.
pub fn angular_distance<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    Angular.cost(u, v)
}

fn prepare_rows<T: Scalar, F: CostFunction<T>>(f: &F, e: &EmbeddingSet<T>) -> Result<Vec<F::Prepared>> {
    e.data()
        .iter_rows()
        .enumerate()
        .map(|(i, r)| {
            f.prepare(r).map_err(|err| match err {
                Error::ZeroNormInput { .. } => Error::ZeroNormInput { row: Some(i) },
                other => other,
            })
        })
        .collect()
}

/// Costs from selected rows of `a` to selected rows of `b`.
///
/// Entries whose row and column refer to the same sample of the same set
/// (`same_source`) are set to exactly zero. Rows are computed in parallel;
/// each entry is a pure function of its inputs, so the result does not depend
/// on the worker count.
pub(crate) fn cost_block<T: Scalar, F: CostFunction<T>>(
    f: &F,
    a: &EmbeddingSet<T>,
    rows: &[usize],
    b: &EmbeddingSet<T>,
    cols: &[usize],
    same_source: bool,
) -> Result<Matrix<T>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let pa = prepare_rows(f, a)?;
    let pb = if same_source { pa.clone() } else { prepare_rows(f, b)? };
    let m = cols.len();
    let mut out = Matrix::zeros(rows.len(), m);
    if m == 0 {
        return Ok(out);
    }
    out.as_mut_slice().par_chunks_mut(m).zip(rows.par_iter()).for_each(|(dst, &i)| {
        let u = a.row(i);
        for (slot, &j) in dst.iter_mut().zip(cols) {
            *slot = if same_source && i == j { T::zero() } else { f.cost_prepared(u, pa[i], b.row(j), pb[j]) };
        }
    });
    Ok(out)
}

/// Full square cost matrix of a set against itself. Each unordered pair is
/// computed once and mirrored, so the result is exactly symmetric with an
/// exactly zero diagonal.
pub fn self_costs<T: Scalar, F: CostFunction<T>>(a: &EmbeddingSet<T>, f: &F) -> Result<CostMatrix<T>> {
    let n = a.len();
    let prepared = prepare_rows(f, a)?;
    // upper triangle, row-parallel
    let upper: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let u = a.row(i);
            ((i + 1)..n).map(|j| f.cost_prepared(u, prepared[i], a.row(j), prepared[j])).collect()
        })
        .collect();
    let mut values = Matrix::zeros(n, n);
    for (i, tail) in upper.iter().enumerate() {
        for (off, &v) in tail.iter().enumerate() {
            let j = i + 1 + off;
            values.set(i, j, v);
            values.set(j, i, v);
        }
    }
    CostMatrix::from_parts(CostMatrixParts {
        row_ids: a.ids().to_vec(),
        col_ids: a.ids().to_vec(),
        row_index: (0..n).collect(),
        col_index: (0..n).collect(),
        values,
        anchored: false,
        cost_kind: f.kind(),
        history: Vec::new(),
    })
}

/// `n_a x n_b` matrix with entry `(i, j) = f(a[i], b[j])`.
///
/// When `a` and `b` are the same object the symmetric path of [`self_costs`]
/// is taken.
pub fn pairwise_costs<T: Scalar, F: CostFunction<T>>(
    a: &EmbeddingSet<T>,
    b: &EmbeddingSet<T>,
    f: &F,
) -> Result<CostMatrix<T>> {
    if std::ptr::eq(a, b) {
        return self_costs(a, f);
    }
    let rows: Vec<usize> = (0..a.len()).collect();
    let cols: Vec<usize> = (0..b.len()).collect();
    let values = cost_block(f, a, &rows, b, &cols, false)?;
    CostMatrix::from_parts(CostMatrixParts {
        row_ids: a.ids().to_vec(),
        col_ids: b.ids().to_vec(),
        row_index: rows,
        col_index: cols,
        values,
        anchored: a.ids() != b.ids(),
        cost_kind: f.kind(),
        history: Vec::new(),
    })
}
