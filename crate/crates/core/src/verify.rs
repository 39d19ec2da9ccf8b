//! Numerical certification of the enriched-category structure of a cost
//! matrix.
//!
//! A square cost matrix is a finite Lawvere metric space when it has a zero
//! diagonal and satisfies the triangle inequality. Row `a` is then the
//! representable functor of sample `a`, and the hom between two rows in the
//! presheaf category is the supremum of truncated differences
//! `sup_j max(0, m[b][j] - m[a][j])`. Faithfulness of the embedding means this
//! equals the object-level cost `m[b][a]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{truncated_sub, Scalar};
use crate::types::CostMatrix;

/// Default tolerances at 64-bit precision.
pub const TRIANGLE_TOL: f64 = 1e-7;
pub const FAITHFULNESS_TOL: f64 = 1e-6;
pub const T0_TOL: f64 = 1e-9;
/// Triple enumeration is cubic; larger matrices need an explicit override.
pub const DEFAULT_MAX_N: usize = 512;
/// Cap on recorded violations per list; counts stay exact.
pub const MAX_RECORDED: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub triangle: f64,
    pub faithfulness: f64,
    pub t0: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { triangle: TRIANGLE_TOL, faithfulness: FAITHFULNESS_TOL, t0: T0_TOL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub tolerances: Tolerances,
    /// `None` disables the size cap.
    pub max_n: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { tolerances: Tolerances::default(), max_n: Some(DEFAULT_MAX_N) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityViolation {
    pub i: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryViolation {
    pub i: usize,
    pub j: usize,
    pub gap: f64,
}

/// `m[i][k] > m[i][j] + m[j][k] + tol`; `slack` is the excess over the
/// two-step path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleViolation {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub n: usize,
    pub cost_kind: String,
    pub symmetry_checked: bool,
    pub identity_violations: Vec<IdentityViolation>,
    pub symmetry_violations: Vec<SymmetryViolation>,
    pub triangle_violations: Vec<TriangleViolation>,
    pub triangle_violation_count: u64,
    pub max_triangle_slack: f64,
    /// Pairs the cost structure cannot separate. Informational: a Lawvere
    /// space need not be T0, so these do not affect `passed`.
    pub t0_duplicates: Vec<(usize, usize)>,
    pub yoneda_max_error: f64,
    pub structure_max_error: f64,
    pub passed: bool,
    pub tolerances: Tolerances,
}

fn check_index(index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { index, len })
    }
}

/// Hom from the functor of row `a` to the functor of row `b`:
/// `max_j max(0, m[b][j] - m[a][j])`.
pub fn yoneda_hom<T: Scalar>(m: &CostMatrix<T>, a: usize, b: usize) -> Result<T> {
    m.ensure_square()?;
    check_index(a, m.rows())?;
    check_index(b, m.rows())?;
    Ok(hom(m, a, b))
}

#[inline]
fn hom<T: Scalar>(m: &CostMatrix<T>, a: usize, b: usize) -> T {
    m.row(b).iter().zip(m.row(a)).map(|(&rb, &ra)| truncated_sub(rb, ra)).fold(T::zero(), T::max)
}

#[inline]
fn abs_gap<T: Scalar>(x: T, y: T) -> f64 {
    if x == y {
        0.0
    } else {
        (x - y).abs().as_f64()
    }
}

fn faithfulness_error<T: Scalar>(m: &CostMatrix<T>) -> f64 {
    let n = m.rows();
    (0..n)
        .into_par_iter()
        .map(|a| (0..n).map(|b| abs_gap(hom(m, a, b), m.get(b, a))).fold(0.0, f64::max))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// Max over all pairs of `|hom(a, b) - m[b][a]|`.
pub fn check_faithfulness<T: Scalar>(m: &CostMatrix<T>, tol: f64) -> Result<(f64, bool)> {
    m.ensure_square()?;
    let err = faithfulness_error(m);
    Ok((err, err <= tol))
}

fn structure_error<T: Scalar>(m: &CostMatrix<T>) -> f64 {
    let n = m.rows();
    let symmetric = m.cost_kind().is_symmetric();
    (0..n)
        .into_par_iter()
        .map(|a| {
            let mut worst = 0.0f64;
            for b in a..n {
                let ab = hom(m, a, b);
                let ba = hom(m, b, a);
                worst = worst.max(abs_gap(ab, m.get(b, a))).max(abs_gap(ba, m.get(a, b)));
                if symmetric {
                    worst = worst.max(abs_gap(ab, ba));
                }
            }
            worst
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// Checks that the costs between objects and the homs between their
/// representations determine each other, in both directions of every pair
/// (and agree with each other for symmetric cost kinds).
pub fn check_structure_preservation<T: Scalar>(m: &CostMatrix<T>, tol: f64) -> Result<(f64, bool)> {
    m.ensure_square()?;
    let err = structure_error(m);
    Ok((err, err <= tol))
}

/// Unordered pairs `(i, j)`, `i < j`, whose rows agree entrywise within `tol`
/// and whose mutual costs are both at most `tol`.
pub fn find_t0_duplicates<T: Scalar>(m: &CostMatrix<T>, tol: f64) -> Result<Vec<(usize, usize)>> {
    m.ensure_square()?;
    let n = m.rows();
    let tol_t = T::lit(tol);
    let per_row: Vec<Vec<(usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .filter(|&j| m.get(i, j) <= tol_t && m.get(j, i) <= tol_t)
                .filter(|&j| m.row(i).iter().zip(m.row(j)).all(|(&x, &y)| x == y || (x - y).abs() <= tol_t))
                .map(|j| (i, j))
                .collect()
        })
        .collect();
    Ok(per_row.into_iter().flatten().collect())
}

/// Lawvere-axiom check with the default tolerances except the triangle slack.
pub fn verify_lawvere<T: Scalar>(m: &CostMatrix<T>, tol: f64) -> Result<VerificationReport> {
    verify(
        m,
        &VerifyOptions {
            tolerances: Tolerances { triangle: tol, ..Tolerances::default() },
            ..VerifyOptions::default()
        },
    )
}

/// Full certification: exact zero diagonal, exact symmetry (for symmetric cost
/// kinds), triangle inequality over all ordered triples, Yoneda faithfulness,
/// structure preservation and T0 duplicates.
pub fn verify<T: Scalar>(m: &CostMatrix<T>, opts: &VerifyOptions) -> Result<VerificationReport> {
    m.ensure_square()?;
    let n = m.rows();
    if let Some(cap) = opts.max_n {
        if n > cap {
            return Err(Error::TooLarge { n, cap });
        }
    }
    let tol = opts.tolerances;

    let identity_violations: Vec<IdentityViolation> = (0..n)
        .filter(|&i| m.get(i, i) != T::zero())
        .map(|i| IdentityViolation { i, value: m.get(i, i).as_f64() })
        .collect();

    let symmetry_checked = m.cost_kind().is_symmetric();
    let mut symmetry_violations = Vec::new();
    if symmetry_checked {
        for i in 0..n {
            for j in (i + 1)..n {
                if m.get(i, j) != m.get(j, i) {
                    symmetry_violations.push(SymmetryViolation { i, j, gap: abs_gap(m.get(i, j), m.get(j, i)) });
                }
            }
        }
    }

    let tri_tol = T::lit(tol.triangle);
    // (violations, count, max slack) per outer index, merged in index order
    let per_i: Vec<(Vec<TriangleViolation>, u64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut found = Vec::new();
            let mut count = 0u64;
            let mut max_slack = f64::NEG_INFINITY;
            let ri = m.row(i);
            for j in 0..n {
                let dij = ri[j];
                let rj = m.row(j);
                for k in 0..n {
                    let direct = ri[k];
                    let path = dij + rj[k];
                    if direct == path {
                        max_slack = max_slack.max(0.0);
                        continue;
                    }
                    let slack = (direct - path).as_f64();
                    if slack.is_finite() {
                        max_slack = max_slack.max(slack);
                    }
                    if direct > path + tri_tol {
                        count += 1;
                        if found.len() < MAX_RECORDED {
                            found.push(TriangleViolation { i, j, k, slack });
                        }
                    }
                }
            }
            (found, count, max_slack)
        })
        .collect();
    let mut triangle_violations = Vec::new();
    let mut triangle_violation_count = 0u64;
    let mut max_triangle_slack = if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    for (found, count, slack) in per_i {
        triangle_violation_count += count;
        max_triangle_slack = max_triangle_slack.max(slack);
        let room = MAX_RECORDED - triangle_violations.len().min(MAX_RECORDED);
        triangle_violations.extend(found.into_iter().take(room));
    }

    let yoneda_max_error = faithfulness_error(m);
    let structure_max_error = structure_error(m);
    let t0_duplicates = find_t0_duplicates(m, tol.t0)?;

    let passed = identity_violations.is_empty()
        && symmetry_violations.is_empty()
        && triangle_violation_count == 0
        && yoneda_max_error <= tol.faithfulness
        && structure_max_error <= tol.faithfulness;

    Ok(VerificationReport {
        n,
        cost_kind: m.cost_kind().to_string(),
        symmetry_checked,
        identity_violations,
        symmetry_violations,
        triangle_violations,
        triangle_violation_count,
        max_triangle_slack,
        t0_duplicates,
        yoneda_max_error,
        structure_max_error,
        passed,
        tolerances: tol,
    })
}
