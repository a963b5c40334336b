//! Weighted combination of fairness-oriented and performance-oriented
//! models, plus the cross-validated selection of the performance model.
//!
//! The final predictor averages member probability vectors componentwise
//! under a weight vector: one model per debiased sensitive attribute (the
//! fairness members) and one model trained on the original data for raw
//! accuracy (the performance member, always last). A one-hot weight vector
//! reproduces that member's predictions bitwise, so the ensemble is a
//! strict generalization of using either model alone.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, ModelKind, TrainConfig, TrainedModel};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Absolute slack allowed on the weight-vector sum.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// A weighted committee: fairness members first, performance member last.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub fair_models: Vec<TrainedModel>,
    pub perf_model: TrainedModel,
    /// One weight per member, fairness members first; non-negative,
    /// summing to 1 within [`WEIGHT_SUM_TOLERANCE`].
    pub weights: Vec<f64>,
}

impl EnsembleSpec {
    pub fn new(
        fair_models: Vec<TrainedModel>,
        perf_model: TrainedModel,
        weights: Vec<f64>,
    ) -> Result<EnsembleSpec> {
        let spec = EnsembleSpec {
            fair_models,
            perf_model,
            weights,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Default weights: (0.6 fair, 0.4 performance) for a single fairness
    /// member, uniform across all members otherwise.
    pub fn default_weights(fair_count: usize) -> Vec<f64> {
        if fair_count == 1 {
            vec![0.6, 0.4]
        } else {
            vec![1.0 / (fair_count + 1) as f64; fair_count + 1]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let members = self.fair_models.len() + 1;
        if self.fair_models.is_empty() {
            return Err(Error::InvalidArgument(
                "ensemble needs at least one fairness member".into(),
            ));
        }
        if self.weights.len() != members {
            return Err(Error::InvalidArgument(format!(
                "{} members need {} weights, got {}",
                members,
                members,
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weights must be non-negative and finite, got {:?}",
                self.weights
            )));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "weights must sum to 1 (±{WEIGHT_SUM_TOLERANCE}), got {sum}"
            )));
        }
        let width = self.perf_model.feature_count;
        if self.fair_models.iter().any(|m| m.feature_count != width) {
            return Err(Error::InvalidArgument(
                "all member models must accept the same feature width".into(),
            ));
        }
        Ok(())
    }

    /// Combined probability pair and label for one row.
    pub fn predict(&self, x: &[f64]) -> Result<((f64, f64), u8)> {
        let mut probs = Vec::with_capacity(self.fair_models.len() + 1);
        for m in &self.fair_models {
            probs.push(m.predict_proba(x));
        }
        probs.push(self.perf_model.predict_proba(x));
        combine(&probs, &self.weights)
    }

    /// Combined labels for every row of a dataset.
    pub fn predict_all(&self, data: &Dataset) -> Result<Vec<u8>> {
        (0..data.len())
            .map(|i| Ok(self.predict(data.row(i))?.1))
            .collect()
    }

    /// A copy of this committee with different weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<EnsembleSpec> {
        EnsembleSpec::new(self.fair_models.clone(), self.perf_model.clone(), weights)
    }
}

/// Componentwise weighted sum of probability pairs; the label is the
/// argmax, with an exact tie going to 0 (the rejection).
///
/// Weights are not renormalized here: any non-negative vector is accepted
/// (the predicted label is invariant under positive scaling), so callers
/// wanting convexity validate at [`EnsembleSpec`] construction.
pub fn combine(prob_vectors: &[(f64, f64)], weights: &[f64]) -> Result<((f64, f64), u8)> {
    if prob_vectors.len() != weights.len() || prob_vectors.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} probability vectors cannot combine under {} weights",
            prob_vectors.len(),
            weights.len()
        )));
    }
    let mut p0 = 0.0;
    let mut p1 = 0.0;
    for (&(v0, v1), &w) in prob_vectors.iter().zip(weights) {
        p0 += w * v0;
        p1 += w * v1;
    }
    Ok(((p0, p1), u8::from(p1 > p0)))
}

/// Deterministic stratified fold assignment: class-0 and class-1 indices
/// are shuffled separately under one seeded stream, then dealt into
/// contiguous chunks so every fold mirrors the overall class balance.
pub fn stratified_folds(labels: &[u8], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = crate::rng::seeded(seed, crate::rng::Stream::Stratified);
    let mut class0: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let mut class1: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    class0.shuffle(&mut rng);
    class1.shuffle(&mut rng);
    (0..folds)
        .map(|f| {
            let mut fold: Vec<usize> =
                class0[f * class0.len() / folds..(f + 1) * class0.len() / folds].to_vec();
            fold.extend_from_slice(
                &class1[f * class1.len() / folds..(f + 1) * class1.len() / folds],
            );
            fold
        })
        .collect()
}

/// Mean held-out-fold accuracy of one candidate under a fixed fold
/// assignment. Empty folds (possible only on very small data) are skipped.
pub fn cv_accuracy(
    train: &Dataset,
    kind: ModelKind,
    cfg: &TrainConfig,
    folds: &[Vec<usize>],
) -> Result<f64> {
    let mut scores = Vec::with_capacity(folds.len());
    for fold in folds {
        if fold.is_empty() {
            continue;
        }
        let rest: Vec<usize> = {
            let held: std::collections::HashSet<usize> = fold.iter().copied().collect();
            (0..train.len()).filter(|i| !held.contains(i)).collect()
        };
        let model = classifier::fit(&train.subset(&rest), kind, cfg)?;
        let hits = fold
            .iter()
            .filter(|&&i| model.predict(train.row(i)) == train.label(i))
            .count();
        scores.push(hits as f64 / fold.len() as f64);
    }
    if scores.is_empty() {
        return Err(Error::InvalidArgument(
            "no non-empty evaluation folds".into(),
        ));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Picks the candidate with the highest stratified 5-fold cross-validated
/// accuracy on `train` and refits it on the full set.
///
/// Candidates that fail to train on some fold are logged and skipped; ties
/// go to the earlier candidate. Every candidate failing is an error.
pub fn select_performance_model(
    train: &Dataset,
    candidates: &[(ModelKind, TrainConfig)],
    seed: u64,
) -> Result<TrainedModel> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(
            "no candidate models to select from".into(),
        ));
    }
    let folds = stratified_folds(train.labels(), 5, seed);
    let mut best: Option<(f64, usize)> = None;
    for (idx, (kind, cfg)) in candidates.iter().enumerate() {
        match cv_accuracy(train, *kind, cfg, &folds) {
            Ok(score) => {
                if best.is_none_or(|(b, _)| score > b) {
                    best = Some((score, idx));
                }
            }
            Err(e) => {
                log::warn!(
                    "candidate {idx} ({}) failed cross-validation: {e}",
                    kind.name()
                );
            }
        }
    }
    match best {
        Some((score, idx)) => {
            let (kind, cfg) = &candidates[idx];
            log::info!(
                "selected candidate {idx} ({}) with CV accuracy {score:.4}",
                kind.name()
            );
            classifier::fit(train, *kind, cfg)
        }
        None => Err(Error::Selection(format!(
            "all {} candidate models failed to train",
            candidates.len()
        ))),
    }
}
