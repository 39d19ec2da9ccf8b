//! Post-processing operators on cost matrices, and Gaussian feature noise.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::row_rng;
use crate::scalar::{total_cmp, Scalar};
use crate::types::{CostMatrix, EmbeddingSet};

/// Replacement value for entries dropped by sparsification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fill {
    Infinite,
    Value(f64),
}

impl Fill {
    /// `pi`, the largest angular distance.
    pub fn pi() -> Self {
        Fill::Value(std::f64::consts::PI)
    }

    fn as_scalar<T: Scalar>(self) -> T {
        match self {
            Fill::Infinite => T::infinity(),
            Fill::Value(v) => T::lit(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormScheme {
    Center,
    Zscore,
    Minmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum OperatorStep {
    Sparsify { k: usize, fill: Fill },
    Normalize { scheme: NormScheme },
}

impl fmt::Display for OperatorStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorStep::Sparsify { k, fill: Fill::Infinite } => write!(f, "sparsify:{k}:inf"),
            OperatorStep::Sparsify { k, fill: Fill::Value(v) } => write!(f, "sparsify:{k}:{v}"),
            OperatorStep::Normalize { scheme: NormScheme::Center } => f.write_str("center"),
            OperatorStep::Normalize { scheme: NormScheme::Zscore } => f.write_str("zscore"),
            OperatorStep::Normalize { scheme: NormScheme::Minmax } => f.write_str("minmax"),
        }
    }
}

/// Ordered operator pipeline, applied left to right.
///
/// Textual form: comma-separated steps, each one of `sparsify:K[:FILL]`
/// (`FILL` a number or `inf`, default pi), `center`, `zscore`, `minmax`.
/// The empty string is the identity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub steps: Vec<OperatorStep>,
}

impl OperatorSpec {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl FromStr for OperatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut steps = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let mut fields = part.split(':');
            let step = match fields.next().unwrap_or_default() {
                "sparsify" => {
                    let k = fields
                        .next()
                        .ok_or_else(|| Error::InvalidSpec(format!("{part}: sparsify needs k")))?
                        .parse::<usize>()
                        .map_err(|e| Error::InvalidSpec(format!("{part}: {e}")))?;
                    if k == 0 {
                        return Err(Error::InvalidSpec(format!("{part}: k must be >= 1")));
                    }
                    let fill = match fields.next() {
                        None => Fill::pi(),
                        Some("inf") | Some("+inf") => Fill::Infinite,
                        Some(v) => {
                            let v: f64 = v.parse().map_err(|e| Error::InvalidSpec(format!("{part}: {e}")))?;
                            if v.is_nan() || v < 0.0 {
                                return Err(Error::InvalidSpec(format!("{part}: fill must be >= 0")));
                            }
                            if v.is_infinite() {
                                Fill::Infinite
                            } else {
                                Fill::Value(v)
                            }
                        }
                    };
                    OperatorStep::Sparsify { k, fill }
                }
                "center" => OperatorStep::Normalize { scheme: NormScheme::Center },
                "zscore" => OperatorStep::Normalize { scheme: NormScheme::Zscore },
                "minmax" => OperatorStep::Normalize { scheme: NormScheme::Minmax },
                other => return Err(Error::InvalidSpec(format!("unknown operator {other:?}"))),
            };
            if fields.next().is_some() {
                return Err(Error::InvalidSpec(format!("{part}: too many fields")));
            }
            steps.push(step);
        }
        Ok(Self { steps })
    }
}

impl fmt::Display for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.steps.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Keeps the `k` smallest costs of each row (ties to the lower column) and
/// replaces the rest with `fill`.
pub fn sparsify_topk<T: Scalar>(m: &CostMatrix<T>, k: usize, fill: Fill) -> Result<CostMatrix<T>> {
    let cols = m.cols();
    if k == 0 || k > cols {
        return Err(Error::KOutOfRange { k, max: cols });
    }
    let fill_value: T = fill.as_scalar();
    let mut values = m.values().clone();
    values.as_mut_slice().par_chunks_mut(cols).for_each(|row| {
        let mut order: Vec<usize> = (0..cols).collect();
        // (value, index) is a strict total order, so the selected set is unique.
        let by_cost = |a: &usize, b: &usize| total_cmp(row[*a], row[*b]).then(a.cmp(b));
        if k < cols {
            order.select_nth_unstable_by(k - 1, by_cost);
        }
        for &j in &order[k..] {
            row[j] = fill_value;
        }
    });
    Ok(m.with_values(values, OperatorStep::Sparsify { k, fill }))
}

/// Per-row normalisation over the finite entries; infinite entries pass
/// through unchanged and do not enter the statistics.
///
/// `zscore` uses the population standard deviation. `minmax` maps the finite
/// entries onto `[0, 1]`. Rows whose finite entries are all equal (or absent)
/// are rejected by `zscore` and `minmax`.
pub fn normalize_rows<T: Scalar>(m: &CostMatrix<T>, scheme: NormScheme) -> Result<CostMatrix<T>> {
    let mut values = m.values().clone();
    for i in 0..values.rows() {
        let row = values.row_mut(i);
        let finite: Vec<T> = row.iter().copied().filter(|v| v.is_finite()).collect();
        let count = T::lit(finite.len() as f64);
        match scheme {
            NormScheme::Center | NormScheme::Zscore => {
                if finite.is_empty() {
                    if scheme == NormScheme::Zscore {
                        return Err(Error::DegenerateRow { row: i });
                    }
                    continue;
                }
                let mean = finite.iter().copied().sum::<T>() / count;
                let scale = if scheme == NormScheme::Zscore {
                    let var = finite.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / count;
                    let sd = var.sqrt();
                    if sd == T::zero() {
                        return Err(Error::DegenerateRow { row: i });
                    }
                    sd
                } else {
                    T::one()
                };
                for v in row.iter_mut().filter(|v| v.is_finite()) {
                    *v = (*v - mean) / scale;
                }
            }
            NormScheme::Minmax => {
                let lo = finite.iter().copied().fold(T::infinity(), T::min);
                let hi = finite.iter().copied().fold(T::neg_infinity(), T::max);
                if finite.is_empty() || hi == lo {
                    return Err(Error::DegenerateRow { row: i });
                }
                for v in row.iter_mut().filter(|v| v.is_finite()) {
                    *v = (*v - lo) / (hi - lo);
                }
            }
        }
    }
    Ok(m.with_values(values, OperatorStep::Normalize { scheme }))
}

pub fn apply_step<T: Scalar>(m: &CostMatrix<T>, step: OperatorStep) -> Result<CostMatrix<T>> {
    match step {
        OperatorStep::Sparsify { k, fill } => sparsify_topk(m, k, fill),
        OperatorStep::Normalize { scheme } => normalize_rows(m, scheme),
    }
}

pub fn apply_operators<T: Scalar>(m: &CostMatrix<T>, spec: &OperatorSpec) -> Result<CostMatrix<T>> {
    spec.steps.iter().try_fold(m.clone(), |acc, &step| apply_step(&acc, step))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidSpec(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }
}

/// Adds independent `N(0, sigma^2)` noise to every entry.
///
/// Row `r` draws from its own stream of the seed, so output depends only on
/// `(seed, shape)`. `sigma = 0` returns the input unchanged.
pub fn inject_noise<T: Scalar>(e: &EmbeddingSet<T>, spec: NoiseSpec) -> Result<EmbeddingSet<T>> {
    let spec = NoiseSpec::new(spec.sigma, spec.seed)?;
    if spec.sigma == 0.0 {
        return Ok(e.clone());
    }
    let d = e.dim();
    let mut data: Matrix<T> = e.data().clone();
    data.as_mut_slice().par_chunks_mut(d).enumerate().for_each(|(r, row)| {
        let mut rng = row_rng(spec.seed, r as u64);
        for v in row.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = *v + T::lit(spec.sigma * z);
        }
    });
    e.with_data(data)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    use super::*;

    fn row_matrix(row: &[f64]) -> CostMatrix<f64> {
        let parts = crate::types::CostMatrixParts {
            row_ids: vec!["r".into()],
            col_ids: (0..row.len()).map(|i| i.to_string()).collect(),
            row_index: vec![0],
            col_index: (0..row.len()).collect(),
            values: Matrix::from_rows(&[row]).unwrap(),
            anchored: true,
            cost_kind: crate::types::CostKind::Precomputed,
            history: vec![],
        };
        CostMatrix::from_parts(parts).unwrap()
    }

    #[test]
    fn sparsify_example() {
        let m = row_matrix(&[0.0, FRAC_PI_2, FRAC_PI_4]);
        let s = sparsify_topk(&m, 2, Fill::pi()).unwrap();
        assert_eq!(s.row(0), &[0.0, PI, FRAC_PI_4]);
        assert_eq!(s.history().len(), 1);
    }

    #[test]
    fn sparsify_keep_all_and_ties() {
        let m = row_matrix(&[0.3, 0.1, 0.1, 0.2]);
        assert_eq!(sparsify_topk(&m, 4, Fill::Infinite).unwrap().values(), m.values());
        let s = sparsify_topk(&m, 1, Fill::Infinite).unwrap();
        assert_eq!(s.row(0), &[f64::INFINITY, 0.1, f64::INFINITY, f64::INFINITY]);
        assert!(matches!(sparsify_topk(&m, 0, Fill::pi()), Err(Error::KOutOfRange { k: 0, max: 4 })));
        assert!(matches!(sparsify_topk(&m, 5, Fill::pi()), Err(Error::KOutOfRange { k: 5, max: 4 })));
    }

    #[test]
    fn normalizations() {
        let m = row_matrix(&[0.0, 2.0, 4.0]);
        assert_eq!(normalize_rows(&m, NormScheme::Center).unwrap().row(0), &[-2.0, 0.0, 2.0]);
        assert_eq!(normalize_rows(&m, NormScheme::Minmax).unwrap().row(0), &[0.0, 0.5, 1.0]);
        let z = normalize_rows(&m, NormScheme::Zscore).unwrap();
        let sd = (8.0f64 / 3.0).sqrt();
        assert!((z.get(0, 0) + 2.0 / sd).abs() < 1e-15);

        let flat = row_matrix(&[1.0, 1.0, 1.0]);
        assert!(matches!(normalize_rows(&flat, NormScheme::Zscore), Err(Error::DegenerateRow { row: 0 })));
        assert!(matches!(normalize_rows(&flat, NormScheme::Minmax), Err(Error::DegenerateRow { row: 0 })));
        assert!(normalize_rows(&flat, NormScheme::Center).is_ok());
    }

    #[test]
    fn infinite_entries_pass_through() {
        let m = row_matrix(&[0.0, f64::INFINITY, 4.0]);
        let c = normalize_rows(&m, NormScheme::Minmax).unwrap();
        assert_eq!(c.row(0), &[0.0, f64::INFINITY, 1.0]);
    }

    #[test]
    fn spec_parsing_round_trips() {
        let spec: OperatorSpec = "sparsify:10, zscore,sparsify:3:inf,minmax,center".parse().unwrap();
        assert_eq!(spec.steps.len(), 5);
        assert_eq!(spec.steps[0], OperatorStep::Sparsify { k: 10, fill: Fill::pi() });
        let again: OperatorSpec = spec.to_string().parse().unwrap();
        assert_eq!(again, spec);
        assert!("".parse::<OperatorSpec>().unwrap().is_empty());
        assert!("sparsify".parse::<OperatorSpec>().is_err());
        assert!("sparsify:0".parse::<OperatorSpec>().is_err());
        assert!("blur".parse::<OperatorSpec>().is_err());
        assert!("center:1".parse::<OperatorSpec>().is_err());
    }

    #[test]
    fn empty_spec_is_identity() {
        let m = row_matrix(&[0.5, 0.25]);
        assert_eq!(apply_operators(&m, &OperatorSpec::default()).unwrap(), m);
    }

    fn blob(n: usize, d: usize) -> EmbeddingSet<f64> {
        let data: Vec<f64> = (0..n * d).map(|i| 1.0 + (i % 7) as f64).collect();
        EmbeddingSet::with_generated_ids("x", Matrix::new(n, d, data).unwrap(), "").unwrap()
    }

    #[test]
    fn zero_sigma_is_bit_identical() {
        let e = blob(4, 3);
        assert_eq!(inject_noise(&e, NoiseSpec::new(0.0, 5).unwrap()).unwrap(), e);
    }

    #[test]
    fn noise_is_deterministic_and_keeps_ids() {
        let e = blob(20, 8);
        let s = NoiseSpec::new(3.0, 42).unwrap();
        let a = inject_noise(&e, s).unwrap();
        let b = inject_noise(&e, s).unwrap();
        assert!(a.data().bit_eq(b.data()));
        assert_eq!(a.ids(), e.ids());
        assert_ne!(a.data(), e.data());
        assert!(NoiseSpec::new(-1.0, 0).is_err());
    }

    #[test]
    fn noise_moments() {
        // 10^6 entries: mean within 0.01 of 0 and std within 0.02 of sigma
        let e = blob(1000, 1000);
        let out = inject_noise(&e, NoiseSpec::new(3.0, 42).unwrap()).unwrap();
        let diffs: Vec<f64> = out.data().as_slice().iter().zip(e.data().as_slice()).map(|(a, b)| a - b).collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((sd - 3.0).abs() < 0.02, "sd {sd}");
    }
}
