//! Synthetic embedding sets with known structure, used as desk-scale stand-ins
//! for exported encoder outputs.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stage_rng;
use crate::scalar::Scalar;
use crate::types::{generated_ids, EmbeddingSet, PairedDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum Generator {
    /// `classes` isotropic unit-variance clusters whose centres are pairwise
    /// `separation` apart (scaled basis vectors, so `dim >= classes`).
    GaussianBlobs { classes: usize, n_per_class: usize, dim: usize, separation: f64 },
    /// `q = u R + noise * N(0, 1)` for a Haar-random orthogonal `R`.
    PairedOrthogonal { n: usize, dim: usize, noise: f64 },
    /// Shared latent Gaussians through two random linear maps and `tanh`,
    /// plus noise.
    PairedNonlinear { n: usize, latent_dim: usize, dim_u: usize, dim_q: usize, noise: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub generator: Generator,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Synthetic<T> {
    Labeled { set: EmbeddingSet<T>, labels: Vec<usize> },
    Paired(PairedDataset<T>),
}

impl<T: Scalar> Synthetic<T> {
    pub fn into_labeled(self) -> Option<(EmbeddingSet<T>, Vec<usize>)> {
        match self {
            Synthetic::Labeled { set, labels } => Some((set, labels)),
            Synthetic::Paired(_) => None,
        }
    }

    pub fn into_paired(self) -> Option<PairedDataset<T>> {
        match self {
            Synthetic::Paired(p) => Some(p),
            Synthetic::Labeled { .. } => None,
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Haar-distributed `d x d` orthogonal matrix (QR of a Gaussian matrix with
/// the sign of `R`'s diagonal folded into `Q`).
pub fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let g = DMatrix::from_row_slice(d, d, &gaussian(rng, d, d));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let rows: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| q[(i, j)]).collect()).collect();
    Matrix::from_rows(&rows).expect("square")
}

fn matmul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = Matrix::zeros(n, m);
    for i in 0..n {
        let dst = out.row_mut(i);
        for (p, &x) in a.row(i).iter().enumerate().take(k) {
            for (o, &y) in dst.iter_mut().zip(b.row(p)) {
                *o += x * y;
            }
        }
    }
    out
}

fn add_noise(m: &mut Matrix<f64>, sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma == 0.0 {
        return;
    }
    for v in m.as_mut_slice() {
        *v += sigma * rng.sample::<f64, _>(StandardNormal);
    }
}

fn set<T: Scalar>(ids: Vec<String>, m: Matrix<f64>, provenance: &str) -> Result<EmbeddingSet<T>> {
    EmbeddingSet::new(ids, m.map(T::lit), provenance)
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::InvalidSpec(format!("{name} must be >= 1")))
    } else {
        Ok(())
    }
}

fn noise_level(v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("noise must be finite and >= 0, got {v}")))
    }
}

pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<Synthetic<T>> {
    let seed = spec.seed;
    match spec.generator {
        Generator::GaussianBlobs { classes, n_per_class, dim, separation } => {
            positive("classes", classes)?;
            positive("n_per_class", n_per_class)?;
            positive("dim", dim)?;
            if !(separation > 0.0 && separation.is_finite()) {
                return Err(Error::InvalidSpec("separation must be > 0".into()));
            }
            if dim < classes {
                return Err(Error::InvalidSpec(format!("gaussian-blobs needs dim >= classes ({dim} < {classes})")));
            }
            let n = classes * n_per_class;
            let mut rng = stage_rng(seed, 1);
            let mut data = Matrix::new(n, dim, gaussian(&mut rng, n, dim))?;
            let offset = separation / std::f64::consts::SQRT_2;
            let labels: Vec<usize> = (0..n).map(|i| i / n_per_class).collect();
            for (i, &c) in labels.iter().enumerate() {
                data.row_mut(i)[c] += offset;
            }
            Ok(Synthetic::Labeled { set: set(generated_ids("b", n), data, "synthetic:gaussian-blobs")?, labels })
        }
        Generator::PairedOrthogonal { n, dim, noise } => {
            positive("n", n)?;
            positive("dim", dim)?;
            noise_level(noise)?;
            let mut rng = stage_rng(seed, 2);
            let u = Matrix::new(n, dim, gaussian(&mut rng, n, dim))?;
            let rot = random_orthogonal(dim, &mut rng);
            let mut q = matmul(&u, &rot);
            add_noise(&mut q, noise, &mut rng);
            let ids = generated_ids("p", n);
            Ok(Synthetic::Paired(PairedDataset::new(
                set(ids.clone(), u, "synthetic:paired-orthogonal:u")?,
                set(ids, q, "synthetic:paired-orthogonal:q")?,
            )?))
        }
        Generator::PairedNonlinear { n, latent_dim, dim_u, dim_q, noise } => {
            for (name, v) in [("n", n), ("latent_dim", latent_dim), ("dim_u", dim_u), ("dim_q", dim_q)] {
                positive(name, v)?;
            }
            noise_level(noise)?;
            let mut rng = stage_rng(seed, 3);
            let z = Matrix::new(n, latent_dim, gaussian(&mut rng, n, latent_dim))?;
            let scale = 1.0 / (latent_dim as f64).sqrt();
            let project = |d: usize, rng: &mut ChaCha8Rng| {
                let w = Matrix::new(latent_dim, d, gaussian(rng, latent_dim, d)).expect("shape");
                let mut out = matmul(&z, &w).map(|v| (v * scale).tanh());
                add_noise(&mut out, noise, rng);
                out
            };
            let u = project(dim_u, &mut rng);
            let q = project(dim_q, &mut rng);
            let ids = generated_ids("p", n);
            Ok(Synthetic::Paired(PairedDataset::new(
                set(ids.clone(), u, "synthetic:paired-nonlinear:u")?,
                set(ids, q, "synthetic:paired-nonlinear:q")?,
            )?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::dot;

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = stage_rng(5, 0);
        let q = random_orthogonal(16, &mut rng);
        for i in 0..16 {
            for j in 0..16 {
                let col_i: Vec<f64> = (0..16).map(|r| q.get(r, i)).collect();
                let col_j: Vec<f64> = (0..16).map(|r| q.get(r, j)).collect();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&col_i, &col_j) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn blob_centres_are_separated() {
        let spec = SyntheticSpec {
            generator: Generator::GaussianBlobs { classes: 3, n_per_class: 400, dim: 5, separation: 10.0 },
            seed: 1,
        };
        let (e, labels) = generate_synthetic::<f64>(&spec).unwrap().into_labeled().unwrap();
        assert_eq!(e.len(), 1200);
        let mut centres = vec![vec![0.0; 5]; 3];
        for (i, &c) in labels.iter().enumerate() {
            for (a, v) in centres[c].iter_mut().zip(e.row(i)) {
                *a += v / 400.0;
            }
        }
        let d01: f64 = centres[0].iter().zip(&centres[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!((d01 - 10.0).abs() < 0.3, "{d01}");
    }

    #[test]
    fn deterministic_and_validated() {
        let spec = SyntheticSpec {
            generator: Generator::PairedNonlinear { n: 20, latent_dim: 4, dim_u: 6, dim_q: 3, noise: 0.1 },
            seed: 9,
        };
        let a = generate_synthetic::<f64>(&spec).unwrap();
        let b = generate_synthetic::<f64>(&spec).unwrap();
        assert_eq!(a, b);
        let p = a.into_paired().unwrap();
        assert_eq!((p.u().dim(), p.q().dim()), (6, 3));

        let bad = SyntheticSpec {
            generator: Generator::GaussianBlobs { classes: 4, n_per_class: 1, dim: 3, separation: 1.0 },
            seed: 0,
        };
        assert!(generate_synthetic::<f64>(&bad).is_err());
        let bad = SyntheticSpec { generator: Generator::PairedOrthogonal { n: 0, dim: 3, noise: 0.0 }, seed: 0 };
        assert!(generate_synthetic::<f64>(&bad).is_err());
    }
}
