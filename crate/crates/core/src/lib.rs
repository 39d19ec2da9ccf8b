//! Relational representations of embedding sets.
//!
//! Each sample is represented by its profile of costs (angular distances) to
//! the other samples of its dataset, or to a set of landmark samples. The
//! profiles of a dataset form a finite Lawvere metric space; [`verify`]
//! certifies that structure numerically, [`matching`] compares profiles
//! across models and modalities without training, and [`probe`] measures
//! them with a linear classifier.
//!
//! All numeric code is generic over [`Scalar`] (`f32` / `f64`). Pipelines
//! work at `f64`; the aliases below name the common instantiations.

pub mod build;
pub mod cost;
pub mod error;
pub mod io;
pub mod matching;
pub mod matrix;
pub mod ops;
pub mod probe;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod types;
pub mod verify;

pub use build::{build_indra, build_paired_indra, build_with_anchor_indices, AnchorMode, AnchorSpec};
pub use cost::{angular_distance, pairwise_costs, self_costs, Angular, CostFunction};
pub use error::{Error, Result};
pub use matching::{
    rank_of_truth, relational_match, relational_match_with_truth, DiagonalHandling, MatchConfig, RetrievalReport,
    RowSimilarity,
};
pub use matrix::Matrix;
pub use ops::{
    apply_operators, inject_noise, normalize_rows, sparsify_topk, Fill, NoiseSpec, NormScheme, OperatorSpec,
    OperatorStep,
};
pub use probe::{evaluate_probe, noise_sweep, train_probe, LabeledSplit, ProbeConfig, ProbeModel, ReprKind};
pub use scalar::{Scalar, Width};
pub use synth::{generate_synthetic, Generator, Synthetic, SyntheticSpec};
pub use types::{
    validate_embeddings, CostKind, CostMatrix, CostMatrixParts, EmbeddingSet, PairedDataset, ValidationReport,
    Violation,
};
pub use verify::{
    check_faithfulness, check_structure_preservation, find_t0_duplicates, verify_lawvere, yoneda_hom,
    VerificationReport, VerifyOptions,
};

/// Embeddings at working precision.
pub type Embeddings = EmbeddingSet<f64>;
/// Embeddings at file interchange precision.
pub type Embeddings32 = EmbeddingSet<f32>;
/// Relational profile matrix at working precision.
pub type IndraMatrix = CostMatrix<f64>;
pub type Paired = PairedDataset<f64>;
pub type Probe = ProbeModel<f64>;
