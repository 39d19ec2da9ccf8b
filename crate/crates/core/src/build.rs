//! Construction of relational profiles ("Indra representations").
//!
//! Row `i` of the output is the cost from sample `i` to each reference
//! sample: every sample in full mode, or a landmark subset in anchored mode.

use std::collections::HashSet;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::cost::{cost_block, self_costs, CostFunction};
use crate::error::{Error, Result};
use crate::rng::stage_rng;
use crate::scalar::Scalar;
use crate::types::{CostMatrix, CostMatrixParts, EmbeddingSet, PairedDataset};

const ANCHOR_STAGE: u64 = 0xA4C;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum AnchorMode {
    All,
    ExplicitIds { ids: Vec<String> },
    RandomK { k: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSpec {
    #[serde(flatten)]
    pub mode: AnchorMode,
    /// Drop anchor samples from the query rows. Ignored for `All`.
    pub exclude_from_queries: bool,
}

impl AnchorSpec {
    pub fn all() -> Self {
        Self { mode: AnchorMode::All, exclude_from_queries: false }
    }

    pub fn random(k: usize, seed: u64) -> Self {
        Self { mode: AnchorMode::RandomK { k, seed }, exclude_from_queries: false }
    }

    pub fn ids<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Self {
        Self {
            mode: AnchorMode::ExplicitIds { ids: ids.into_iter().map(Into::into).collect() },
            exclude_from_queries: false,
        }
    }

    pub fn excluding_queries(mut self, exclude: bool) -> Self {
        self.exclude_from_queries = exclude;
        self
    }

    pub fn is_all(&self) -> bool {
        matches!(self.mode, AnchorMode::All)
    }

    /// Positions of the anchors in `e`, or `None` for `All`.
    ///
    /// Random anchors are returned in ascending index order; explicit anchors
    /// keep the order they were given in.
    pub fn resolve<T: Scalar>(&self, e: &EmbeddingSet<T>) -> Result<Option<Vec<usize>>> {
        match &self.mode {
            AnchorMode::All => Ok(None),
            AnchorMode::RandomK { k, seed } => random_anchor_indices(e.len(), *k, *seed).map(Some),
            AnchorMode::ExplicitIds { ids } => {
                if ids.is_empty() {
                    return Err(Error::InvalidAnchorSpec("explicit anchor list is empty".into()));
                }
                let mut seen = HashSet::new();
                let mut out = Vec::with_capacity(ids.len());
                for id in ids {
                    if !seen.insert(id.as_str()) {
                        return Err(Error::InvalidAnchorSpec(format!("anchor id {id:?} listed twice")));
                    }
                    out.push(e.index_of(id).ok_or_else(|| Error::UnknownAnchorId(id.clone()))?);
                }
                Ok(Some(out))
            }
        }
    }
}

/// `k` distinct indices from `0..n`, sorted ascending, drawn from `seed`.
pub fn random_anchor_indices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::InvalidAnchorSpec(format!("random-k needs 1 <= k <= n, got k={k}, n={n}")));
    }
    let mut rng = stage_rng(seed, ANCHOR_STAGE);
    let mut idx = sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Profiles of every (non-excluded) sample of `e` against the anchors at
/// `anchors`.
pub fn build_with_anchor_indices<T: Scalar, F: CostFunction<T>>(
    e: &EmbeddingSet<T>,
    f: &F,
    anchors: &[usize],
    exclude_from_queries: bool,
) -> Result<CostMatrix<T>> {
    build_anchored(e, f, anchors, exclude_from_queries, e.ids())
}

fn build_anchored<T: Scalar, F: CostFunction<T>>(
    e: &EmbeddingSet<T>,
    f: &F,
    anchors: &[usize],
    exclude_from_queries: bool,
    key_ids: &[String],
) -> Result<CostMatrix<T>> {
    if anchors.is_empty() {
        return Err(Error::InvalidAnchorSpec("no anchors".into()));
    }
    for &a in anchors {
        if a >= e.len() {
            return Err(Error::IndexOutOfRange { index: a, len: e.len() });
        }
    }
    let rows: Vec<usize> = if exclude_from_queries {
        let excluded: HashSet<usize> = anchors.iter().copied().collect();
        (0..e.len()).filter(|i| !excluded.contains(i)).collect()
    } else {
        (0..e.len()).collect()
    };
    let values = cost_block(f, e, &rows, e, anchors, true)?;
    CostMatrix::from_parts(CostMatrixParts {
        row_ids: rows.iter().map(|&i| e.ids()[i].clone()).collect(),
        col_ids: anchors.iter().map(|&j| key_ids[j].clone()).collect(),
        row_index: rows,
        col_index: anchors.to_vec(),
        values,
        anchored: true,
        cost_kind: f.kind(),
        history: Vec::new(),
    })
}

/// Relational profiles of every sample of `e`.
///
/// With `AnchorMode::All` this is the square matrix of costs to every sample
/// (zero diagonal, exactly symmetric for symmetric costs); otherwise an
/// `n x k` (or `(n - k) x k` when anchors are excluded from the queries)
/// matrix flagged as anchored.
pub fn build_indra<T: Scalar, F: CostFunction<T>>(
    e: &EmbeddingSet<T>,
    f: &F,
    anchors: &AnchorSpec,
) -> Result<CostMatrix<T>> {
    match anchors.resolve(e)? {
        None => self_costs(e, f),
        Some(idx) => build_anchored(e, f, &idx, anchors.exclude_from_queries, e.ids()),
    }
}

/// Profiles for both modalities of a paired dataset.
///
/// Anchors are resolved once (explicit ids against `u`) and the same
/// positions are used for `q`, so column `c` of both outputs refers to the
/// same pair. Both outputs label their columns with the pair keys.
pub fn build_paired_indra<T: Scalar, F: CostFunction<T>>(
    p: &PairedDataset<T>,
    f: &F,
    anchors: &AnchorSpec,
) -> Result<(CostMatrix<T>, CostMatrix<T>)> {
    let keys: Vec<String> = (0..p.len()).map(|i| p.pair_key(i)).collect();
    match anchors.resolve(p.u())? {
        None => {
            let relabel = |m: CostMatrix<T>| {
                let mut parts = m.into_parts();
                parts.col_ids = keys.clone();
                CostMatrix::from_parts(parts)
            };
            Ok((relabel(self_costs(p.u(), f)?)?, relabel(self_costs(p.q(), f)?)?))
        }
        Some(idx) => {
            let ex = anchors.exclude_from_queries;
            Ok((build_anchored(p.u(), f, &idx, ex, &keys)?, build_anchored(p.q(), f, &idx, ex, &keys)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    use super::*;
    use crate::cost::Angular;
    use crate::matrix::Matrix;

    fn three() -> EmbeddingSet<f64> {
        EmbeddingSet::with_generated_ids("s", Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap(), "")
            .unwrap()
    }

    #[test]
    fn full_mode_three_points() {
        let m = build_indra(&three(), &Angular, &AnchorSpec::all()).unwrap();
        let expected = [[0.0, FRAC_PI_2, FRAC_PI_4], [FRAC_PI_2, 0.0, FRAC_PI_4], [FRAC_PI_4, FRAC_PI_4, 0.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((m.get(i, j) - v).abs() < 1e-15, "({i},{j})");
            }
        }
        assert!(!m.anchored());
    }

    #[test]
    fn single_sample() {
        let e = EmbeddingSet::with_generated_ids("s", Matrix::from_rows(&[[3.0, 4.0]]).unwrap(), "").unwrap();
        let m = build_indra(&e, &Angular, &AnchorSpec::all()).unwrap();
        assert_eq!(m.values().as_slice(), &[0.0]);
    }

    #[test]
    fn explicit_ids_and_errors() {
        let e = three();
        let m = build_indra(&e, &Angular, &AnchorSpec::ids(["s2", "s0"])).unwrap();
        assert_eq!(m.col_ids(), &["s2".to_string(), "s0".to_string()]);
        assert_eq!(m.col_index(), &[2, 0]);
        assert_eq!(m.get(2, 0), 0.0);
        assert!(m.anchored());

        let m = build_indra(&e, &Angular, &AnchorSpec::ids(["s2"]).excluding_queries(true)).unwrap();
        assert_eq!(m.row_index(), &[0, 1]);

        assert!(matches!(
            build_indra(&e, &Angular, &AnchorSpec::ids(["nope"])),
            Err(Error::UnknownAnchorId(id)) if id == "nope"
        ));
        assert!(matches!(build_indra(&e, &Angular, &AnchorSpec::ids(["s1", "s1"])), Err(Error::InvalidAnchorSpec(_))));
        assert!(matches!(build_indra(&e, &Angular, &AnchorSpec::random(4, 1)), Err(Error::InvalidAnchorSpec(_))));
        assert!(matches!(build_indra(&e, &Angular, &AnchorSpec::random(0, 1)), Err(Error::InvalidAnchorSpec(_))));
    }

    #[test]
    fn random_anchors_sorted_distinct_deterministic() {
        let a = random_anchor_indices(100, 10, 7).unwrap();
        let b = random_anchor_indices(100, 10, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(a, random_anchor_indices(100, 10, 8).unwrap());
        assert_eq!(random_anchor_indices(5, 5, 0).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn single_modality_pair_gives_identical_matrices() {
        let p = PairedDataset::single(three());
        let (a, b) = build_paired_indra(&p, &Angular, &AnchorSpec::all()).unwrap();
        assert_eq!(a, b);
        let (a, b) = build_paired_indra(&p, &Angular, &AnchorSpec::random(2, 3).excluding_queries(true)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows(), 1);
    }
}
