//! Linear probing: multinomial logistic regression on frozen features.
//!
//! The solver is full-batch gradient descent with Armijo backtracking. The
//! first trial step of each iteration is the Barzilai-Borwein step from the
//! previous one; backtracking keeps the objective non-increasing.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::build::{build_with_anchor_indices, random_anchor_indices};
use crate::cost::Angular;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ops::{inject_noise, NoiseSpec};
use crate::rng::stage_rng;
use crate::scalar::{dot, Scalar};
use crate::types::EmbeddingSet;

const SPLIT_STAGE: u64 = 0x5B17;
const NOISE_STAGE: u64 = 0x4015E;
const ANCHOR_STAGE: u64 = 0xA7C4;
const ARMIJO_C: f64 = 1e-4;

/// Features with class labels and a train/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSplit<T> {
    features: Matrix<T>,
    labels: Vec<usize>,
    classes: usize,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl<T: Scalar> LabeledSplit<T> {
    pub fn new(features: Matrix<T>, labels: Vec<usize>, train: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: labels.len() });
        }
        for (i, row) in features.iter_rows().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { row: i, col: j });
            }
        }
        let mut seen = vec![false; n];
        for &i in train.iter().chain(&test) {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidSplit(format!("index {i} appears twice")));
            }
        }
        let classes = labels.iter().max().map_or(0, |&c| c + 1);
        let mut in_train = vec![false; classes];
        for &i in &train {
            in_train[labels[i]] = true;
        }
        if in_train.iter().filter(|&&p| p).count() < 2 {
            return Err(Error::SingleClassData);
        }
        if let Some(c) = in_train.iter().position(|&p| !p) {
            return Err(Error::InvalidSplit(format!("class {c} has no training samples")));
        }
        Ok(Self { features, labels, classes, train, test })
    }

    /// Per-class shuffled split putting `round(test_fraction * count)` of each
    /// class in the test set (keeping at least one training sample per class).
    pub fn stratified(features: Matrix<T>, labels: Vec<usize>, test_fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::InvalidSplit(format!("test fraction {test_fraction} outside [0, 1)")));
        }
        let (train, test) = stratified_indices(&labels, test_fraction, seed);
        Self::new(features, labels, train, test)
    }

    /// Same labels and partition over different features.
    pub fn with_features(&self, features: Matrix<T>) -> Result<Self> {
        Self::new(features, self.labels.clone(), self.train.clone(), self.test.clone())
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }
}

/// Stratified train/test indices, both sorted ascending.
pub fn stratified_indices(labels: &[usize], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let classes = labels.iter().max().map_or(0, |&c| c + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rng = stage_rng(seed, SPLIT_STAGE);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut members in by_class {
        members.shuffle(&mut rng);
        let n_test = ((members.len() as f64 * test_fraction).round() as usize).min(members.len().saturating_sub(1));
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub l2_penalty: f64,
    pub max_iterations: usize,
    /// Stop once the gradient norm falls to this value.
    pub convergence_tol: f64,
    /// Seeds the train/test split, anchor draw and noise of sweeps.
    pub seed: u64,
    /// Standardise each feature with the training mean and deviation.
    pub standardize: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { l2_penalty: 1e-4, max_iterations: 500, convergence_tol: 1e-6, seed: 0, standardize: true }
    }
}

impl ProbeConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidSpec("max_iterations must be >= 1".into()));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol <= 0.0 {
            return Err(Error::InvalidSpec("convergence_tol must be > 0".into()));
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(Error::InvalidSpec("l2_penalty must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// L2-regularised multinomial cross-entropy over a fixed design matrix.
///
/// Parameters are laid out as the `classes x dim` weight matrix (row-major)
/// followed by `classes` biases. The bias is not penalised.
pub struct SoftmaxObjective<'a, T> {
    x: &'a Matrix<T>,
    y: &'a [usize],
    classes: usize,
    l2: T,
}

impl<'a, T: Scalar> SoftmaxObjective<'a, T> {
    pub fn new(x: &'a Matrix<T>, y: &'a [usize], classes: usize, l2: f64) -> Self {
        Self { x, y, classes, l2: T::lit(l2) }
    }

    pub fn num_params(&self) -> usize {
        self.classes * (self.x.cols() + 1)
    }

    /// Objective value; writes the gradient into `grad` when given.
    pub fn evaluate(&self, params: &[T], mut grad: Option<&mut [T]>) -> T {
        let (c_n, m) = (self.classes, self.x.cols());
        let (weights, bias) = params.split_at(c_n * m);
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
        let mut loss = T::zero();
        let mut probs = vec![T::zero(); c_n];
        for (row, &label) in self.x.iter_rows().zip(self.y) {
            log_softmax_into(weights, bias, row, &mut probs);
            loss = loss - probs[label];
            if let Some(g) = grad.as_deref_mut() {
                let (gw, gb) = g.split_at_mut(c_n * m);
                for c in 0..c_n {
                    let coef = probs[c].exp() - if c == label { T::one() } else { T::zero() };
                    gb[c] = gb[c] + coef;
                    for (gv, &xv) in gw[c * m..(c + 1) * m].iter_mut().zip(row) {
                        *gv = *gv + coef * xv;
                    }
                }
            }
        }
        let inv_n = T::one() / T::lit(self.x.rows().max(1) as f64);
        let half = T::lit(0.5);
        let penalty = half * self.l2 * dot(weights, weights);
        if let Some(g) = grad {
            let (gw, gb) = g.split_at_mut(c_n * m);
            for (gv, &w) in gw.iter_mut().zip(weights) {
                *gv = *gv * inv_n + self.l2 * w;
            }
            gb.iter_mut().for_each(|v| *v = *v * inv_n);
        }
        loss * inv_n + penalty
    }
}

/// Log-probabilities of each class for one feature row.
fn log_softmax_into<T: Scalar>(weights: &[T], bias: &[T], row: &[T], out: &mut [T]) {
    let m = row.len();
    for (c, o) in out.iter_mut().enumerate() {
        *o = dot(&weights[c * m..(c + 1) * m], row) + bias[c];
    }
    let max = out.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + out.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
    out.iter_mut().for_each(|z| *z = *z - lse);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel<T> {
    classes: usize,
    dim: usize,
    /// `classes x dim`, row-major.
    weights: Vec<T>,
    bias: Vec<T>,
    shift: Vec<T>,
    scale: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Objective after each accepted step, starting from the initial point.
    pub objective_trace: Vec<f64>,
}

impl<T: Scalar> ProbeModel<T> {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    fn standardized(&self, row: &[T]) -> Vec<T> {
        row.iter().zip(self.shift.iter().zip(&self.scale)).map(|(&v, (&s, &k))| (v - s) / k).collect()
    }

    /// Class probabilities for one raw feature row.
    pub fn predict_proba(&self, row: &[T]) -> Result<Vec<T>> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: row.len() });
        }
        let mut out = vec![T::zero(); self.classes];
        log_softmax_into(&self.weights, &self.bias, &self.standardized(row), &mut out);
        out.iter_mut().for_each(|v| *v = v.exp());
        Ok(out)
    }

    /// Arg-max class, lowest class on ties.
    pub fn predict(&self, row: &[T]) -> Result<usize> {
        let p = self.predict_proba(row)?;
        Ok(crate::matching::argmax(&p).unwrap_or(0))
    }
}

fn column_stats<T: Scalar>(x: &Matrix<T>, standardize: bool) -> (Vec<T>, Vec<T>) {
    let m = x.cols();
    if !standardize || x.rows() == 0 {
        return (vec![T::zero(); m], vec![T::one(); m]);
    }
    let n = T::lit(x.rows() as f64);
    let mut mean = vec![T::zero(); m];
    for row in x.iter_rows() {
        for (a, &v) in mean.iter_mut().zip(row) {
            *a = *a + v;
        }
    }
    mean.iter_mut().for_each(|a| *a = *a / n);
    let mut var = vec![T::zero(); m];
    for row in x.iter_rows() {
        for ((a, &v), &mu) in var.iter_mut().zip(row).zip(&mean) {
            *a = *a + (v - mu) * (v - mu);
        }
    }
    let scale = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > T::zero() {
                sd
            } else {
                T::one()
            }
        })
        .collect();
    (mean, scale)
}

/// Fits the probe on the training part of `data`.
pub fn train_probe<T: Scalar>(data: &LabeledSplit<T>, cfg: &ProbeConfig) -> Result<ProbeModel<T>> {
    cfg.validate()?;
    let raw = data.features.select_rows(&data.train);
    let (shift, scale) = column_stats(&raw, cfg.standardize);
    let mut x = raw;
    for i in 0..x.rows() {
        for ((v, &s), &k) in x.row_mut(i).iter_mut().zip(&shift).zip(&scale) {
            *v = (*v - s) / k;
        }
    }
    let y: Vec<usize> = data.train.iter().map(|&i| data.labels[i]).collect();
    let objective = SoftmaxObjective::new(&x, &y, data.classes, cfg.l2_penalty);

    let p = objective.num_params();
    let mut params = vec![T::zero(); p];
    let mut grad = vec![T::zero(); p];
    let mut value = objective.evaluate(&params, Some(&mut grad));
    let mut trace = vec![value.as_f64()];
    let mut step = T::one();
    let mut trial = vec![T::zero(); p];
    let mut trial_grad = vec![T::zero(); p];
    let mut converged = false;
    let mut iterations = 0;
    let mut gnorm = dot(&grad, &grad).sqrt();

    while iterations < cfg.max_iterations {
        if gnorm.as_f64() <= cfg.convergence_tol {
            converged = true;
            break;
        }
        let gsq = gnorm * gnorm;
        let accepted = loop {
            for ((t, &w), &g) in trial.iter_mut().zip(&params).zip(&grad) {
                *t = w - step * g;
            }
            let v = objective.evaluate(&trial, Some(&mut trial_grad));
            if v.is_finite() && v <= value - T::lit(ARMIJO_C) * step * gsq {
                break Some(v);
            }
            step = step * T::lit(0.5);
            if step.as_f64() < 1e-20 {
                break None;
            }
        };
        let Some(new_value) = accepted else {
            break;
        };
        iterations += 1;
        // Barzilai-Borwein: <s, s> / <s, y>
        let mut ss = T::zero();
        let mut sy = T::zero();
        for i in 0..p {
            let s = trial[i] - params[i];
            ss = ss + s * s;
            sy = sy + s * (trial_grad[i] - grad[i]);
        }
        step = if sy > T::zero() { ss / sy } else { step * T::lit(2.0) };
        step = step.max(T::lit(1e-10)).min(T::lit(1e10));

        std::mem::swap(&mut params, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        value = new_value;
        trace.push(value.as_f64());
        gnorm = dot(&grad, &grad).sqrt();
    }
    if gnorm.as_f64() <= cfg.convergence_tol {
        converged = true;
    }

    let m = x.cols();
    let bias = params.split_off(data.classes * m);
    Ok(ProbeModel {
        classes: data.classes,
        dim: m,
        weights: params,
        bias,
        shift,
        scale,
        iterations,
        converged,
        gradient_norm: gnorm.as_f64(),
        objective_trace: trace,
    })
}

/// Accuracy of `model` on the listed rows of `data`.
pub fn evaluate_indices<T: Scalar>(model: &ProbeModel<T>, data: &LabeledSplit<T>, idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::EmptySplit);
    }
    if data.features.cols() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, found: data.features.cols() });
    }
    let mut correct = 0usize;
    for &i in idx {
        if model.predict(data.features.row(i))? == data.labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / idx.len() as f64)
}

/// Accuracy on the test split.
pub fn evaluate_probe<T: Scalar>(model: &ProbeModel<T>, data: &LabeledSplit<T>) -> Result<f64> {
    evaluate_indices(model, data, &data.test)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReprKind {
    Raw,
    /// Profiles against `anchors` randomly drawn training samples.
    Indra {
        anchors: usize,
    },
}

impl ReprKind {
    pub fn label(&self) -> String {
        match self {
            ReprKind::Raw => "raw".into(),
            ReprKind::Indra { anchors } => format!("indra:{anchors}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub repr_kind: String,
    pub accuracy: f64,
    pub seed: u64,
}

/// Builds the chosen representation of `e`. Indra features are profiles of
/// every sample against anchors drawn from the training indices only.
pub fn represent<T: Scalar>(e: &EmbeddingSet<T>, repr: ReprKind, train: &[usize], seed: u64) -> Result<Matrix<T>> {
    match repr {
        ReprKind::Raw => Ok(e.data().clone()),
        ReprKind::Indra { anchors } => {
            let picks = random_anchor_indices(train.len(), anchors, seed ^ ANCHOR_STAGE)?;
            let idx: Vec<usize> = picks.into_iter().map(|p| train[p]).collect();
            Ok(build_with_anchor_indices(e, &Angular, &idx, false)?.values().clone())
        }
    }
}

/// For each noise level: perturb the embeddings, build the representation,
/// train on the training split and report test accuracy.
///
/// The split, the anchors and the noise draw are shared across noise levels
/// (all derived from `cfg.seed`), so levels differ only in the noise scale.
pub fn noise_sweep<T: Scalar>(
    e: &EmbeddingSet<T>,
    labels: &[usize],
    sigmas: &[f64],
    repr: ReprKind,
    cfg: &ProbeConfig,
    test_fraction: f64,
) -> Result<Vec<SweepRow>> {
    if sigmas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidSpec("sigmas must be sorted ascending".into()));
    }
    if labels.len() != e.len() {
        return Err(Error::DimensionMismatch { expected: e.len(), found: labels.len() });
    }
    let base = LabeledSplit::stratified(e.data().clone(), labels.to_vec(), test_fraction, cfg.seed)?;
    let noise_seed = stage_rng_seed(cfg.seed, NOISE_STAGE);
    sigmas
        .par_iter()
        .map(|&sigma| {
            let noisy = inject_noise(e, NoiseSpec::new(sigma, noise_seed)?)?;
            let features = represent(&noisy, repr, base.train(), cfg.seed)?;
            let split = base.with_features(features)?;
            let model = train_probe(&split, cfg)?;
            Ok(SweepRow { sigma, repr_kind: repr.label(), accuracy: evaluate_probe(&model, &split)?, seed: cfg.seed })
        })
        .collect()
}

fn stage_rng_seed(seed: u64, stage: u64) -> u64 {
    use rand::Rng;
    stage_rng(seed, stage).random()
}
