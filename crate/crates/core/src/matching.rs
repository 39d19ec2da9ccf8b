//! Relational matching: rank the rows of one profile matrix against the rows
//! of another over a shared anchor coordinate system, scoring against the
//! equal-index pairing.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::CostMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowSimilarity {
    Cosine,
    CenteredCosine,
    NegativeEuclidean,
}

/// How the coordinates belonging to the query and candidate samples
/// themselves are treated. In a full matrix both row `i` of one modality and
/// row `i` of the other carry an exact zero at column `i`, which leaks the
/// answer; `ExcludePair` drops the query's and candidate's own columns from
/// both rows before comparing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagonalHandling {
    Include,
    ExcludePair,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub row_similarity: RowSimilarity,
    pub diagonal_handling: DiagonalHandling,
    pub k_list: Vec<usize>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            row_similarity: RowSimilarity::Cosine,
            diagonal_handling: DiagonalHandling::ExcludePair,
            k_list: vec![1, 5, 10, 30, 50],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "U->Q")]
    UToQ,
    #[serde(rename = "Q->U")]
    QToU,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::UToQ => "U->Q",
            Direction::QToU => "Q->U",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub direction: Direction,
    pub queries: usize,
    pub candidates: usize,
    /// 1-based rank of the true partner, per query.
    pub per_query_rank_of_truth: Vec<usize>,
    /// Best-scoring candidate per query.
    pub per_query_best: Vec<usize>,
    pub topk_accuracy: BTreeMap<usize, f64>,
    pub mean_reciprocal_rank: f64,
    pub config: MatchConfig,
}

/// 1-based rank of `truth` when `sims` is sorted descending with ties broken
/// toward the lower index.
pub fn rank_of_truth<T: Scalar>(sims: &[T], truth: usize) -> Result<usize> {
    if truth >= sims.len() {
        return Err(Error::IndexOutOfRange { index: truth, len: sims.len() });
    }
    let t = sims[truth];
    let ahead = sims.iter().enumerate().filter(|&(j, &s)| s > t || (s == t && j < truth)).count();
    Ok(ahead + 1)
}

/// Index of the largest value, lowest index on ties.
pub fn argmax<T: Scalar>(sims: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (j, &s) in sims.iter().enumerate() {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((j, s)),
        }
    }
    best.map(|(j, _)| j)
}

/// Similarity of two profile rows, ignoring the columns listed in `skip`.
///
/// Sums run sequentially over the column index. A zero-norm row has cosine
/// similarity 0 with everything.
pub fn row_similarity<T: Scalar>(a: &[T], b: &[T], kind: RowSimilarity, skip: &[usize]) -> T {
    let keep = |j: &usize| !skip.contains(j);
    match kind {
        RowSimilarity::Cosine => cosine(a, b, None, &keep),
        RowSimilarity::CenteredCosine => {
            let mean = |r: &[T]| {
                let (mut s, mut c) = (T::zero(), 0usize);
                for j in (0..r.len()).filter(keep) {
                    s = s + r[j];
                    c += 1;
                }
                if c == 0 {
                    T::zero()
                } else {
                    s / T::lit(c as f64)
                }
            };
            cosine(a, b, Some((mean(a), mean(b))), &keep)
        }
        RowSimilarity::NegativeEuclidean => {
            let mut acc = T::zero();
            for j in (0..a.len()).filter(keep) {
                let d = a[j] - b[j];
                acc = acc + d * d;
            }
            -acc.sqrt()
        }
    }
}

fn cosine<T: Scalar>(a: &[T], b: &[T], means: Option<(T, T)>, keep: &impl Fn(&usize) -> bool) -> T {
    let (ma, mb) = means.unwrap_or((T::zero(), T::zero()));
    let (mut ab, mut aa, mut bb) = (T::zero(), T::zero(), T::zero());
    for j in (0..a.len()).filter(keep) {
        let (x, y) = (a[j] - ma, b[j] - mb);
        ab = ab + x * y;
        aa = aa + x * x;
        bb = bb + y * y;
    }
    if aa == T::zero() || bb == T::zero() {
        T::zero()
    } else {
        // sqrt(aa * bb) is exactly aa for identical rows, giving cosine 1
        ab / (aa * bb).sqrt()
    }
}

fn check_finite<T: Scalar>(m: &CostMatrix<T>) -> Result<()> {
    for i in 0..m.rows() {
        if m.row(i).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteRow { row: i });
        }
    }
    Ok(())
}

/// Columns of the profile coordinate system belonging to each row's own
/// sample, if present.
fn own_columns<T: Scalar>(m: &CostMatrix<T>) -> Vec<Option<usize>> {
    m.row_index().iter().map(|&src| m.column_of_source(src)).collect()
}

/// Similarities of query row `qi` of `queries` against every row of
/// `candidates`.
pub fn similarities<T: Scalar>(
    queries: &CostMatrix<T>,
    candidates: &CostMatrix<T>,
    qi: usize,
    cfg: &MatchConfig,
) -> Vec<T> {
    let q_own = own_columns(queries);
    let c_own = own_columns(candidates);
    similarities_with(queries, candidates, qi, cfg, &q_own, &c_own)
}

fn similarities_with<T: Scalar>(
    queries: &CostMatrix<T>,
    candidates: &CostMatrix<T>,
    qi: usize,
    cfg: &MatchConfig,
    q_own: &[Option<usize>],
    c_own: &[Option<usize>],
) -> Vec<T> {
    let qrow = queries.row(qi);
    (0..candidates.rows())
        .map(|cj| {
            let mut skip: Vec<usize> = Vec::with_capacity(2);
            if cfg.diagonal_handling == DiagonalHandling::ExcludePair {
                skip.extend(q_own[qi]);
                skip.extend(c_own[cj]);
            }
            row_similarity(qrow, candidates.row(cj), cfg.row_similarity, &skip)
        })
        .collect()
}

fn retrieve<T: Scalar>(
    queries: &CostMatrix<T>,
    candidates: &CostMatrix<T>,
    cfg: &MatchConfig,
    direction: Direction,
    truth: &[usize],
) -> Result<RetrievalReport> {
    let q_own = own_columns(queries);
    let c_own = own_columns(candidates);
    let per_query: Vec<(usize, usize)> = (0..queries.rows())
        .into_par_iter()
        .map(|qi| {
            let sims = similarities_with(queries, candidates, qi, cfg, &q_own, &c_own);
            let rank = rank_of_truth(&sims, truth[qi])?;
            Ok((rank, argmax(&sims).unwrap_or(0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_query.len().max(1) as f64;
    let ranks: Vec<usize> = per_query.iter().map(|p| p.0).collect();
    let topk_accuracy = cfg.k_list.iter().map(|&k| (k, ranks.iter().filter(|&&r| r <= k).count() as f64 / n)).collect();
    let mean_reciprocal_rank = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
    Ok(RetrievalReport {
        direction,
        queries: queries.rows(),
        candidates: candidates.rows(),
        per_query_best: per_query.iter().map(|p| p.1).collect(),
        per_query_rank_of_truth: ranks,
        topk_accuracy,
        mean_reciprocal_rank,
        config: cfg.clone(),
    })
}

/// Ranks modality-Q rows for every modality-U row and vice versa. Row `i`
/// of `iu` is paired with row `i` of `iq`.
pub fn relational_match<T: Scalar>(
    iu: &CostMatrix<T>,
    iq: &CostMatrix<T>,
    cfg: &MatchConfig,
) -> Result<(RetrievalReport, RetrievalReport)> {
    let identity: Vec<usize> = (0..iu.rows()).collect();
    relational_match_with_truth(iu, iq, &identity, cfg)
}

/// As [`relational_match`], with row `i` of `iu` paired with row
/// `truth[i]` of `iq`. `truth` must be a permutation.
pub fn relational_match_with_truth<T: Scalar>(
    iu: &CostMatrix<T>,
    iq: &CostMatrix<T>,
    truth: &[usize],
    cfg: &MatchConfig,
) -> Result<(RetrievalReport, RetrievalReport)> {
    if iu.cols() != iq.cols() || iu.col_ids() != iq.col_ids() {
        return Err(Error::ColumnMismatch);
    }
    if iu.rows() != iq.rows() {
        return Err(Error::DimensionMismatch { expected: iu.rows(), found: iq.rows() });
    }
    if truth.len() != iu.rows() {
        return Err(Error::DimensionMismatch { expected: iu.rows(), found: truth.len() });
    }
    if iu.rows() == 0 {
        return Err(Error::EmptySplit);
    }
    let mut inverse = vec![usize::MAX; truth.len()];
    for (i, &t) in truth.iter().enumerate() {
        if t >= truth.len() {
            return Err(Error::IndexOutOfRange { index: t, len: truth.len() });
        }
        if inverse[t] != usize::MAX {
            return Err(Error::InvalidSpec(format!("truth maps two queries to row {t}")));
        }
        inverse[t] = i;
    }
    for &k in &cfg.k_list {
        if k == 0 || k > iu.rows() {
            return Err(Error::KOutOfRange { k, max: iu.rows() });
        }
    }
    check_finite(iu)?;
    check_finite(iq)?;
    Ok((retrieve(iu, iq, cfg, Direction::UToQ, truth)?, retrieve(iq, iu, cfg, Direction::QToU, &inverse)?))
}
