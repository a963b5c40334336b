//! From-scratch logistic regression.
//!
//! Training is plain full-batch gradient descent on the L2-regularized
//! logistic loss with zero-initialized parameters, so a fit is a pure
//! function of `(dataset, config)` — the same inputs always give bitwise
//! identical weights. That determinism is what makes out-of-fold scoring
//! and report reproducibility possible further down the pipeline.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Kinds of trainable models. Only logistic regression ships today; the
/// enum leaves room for additional base learners without breaking the
/// serialized model format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
        }
    }
}

/// Hyper-parameters for a single fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Coefficient of the `(l2/2)·‖w‖²` penalty. The intercept is not
    /// penalized.
    pub l2_penalty: f64,
    /// Reserved for stochastic model kinds; logistic regression ignores it.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 2000,
            l2_penalty: 1e-4,
            seed: 0,
        }
    }
}

/// A fitted model: linear weights over the feature columns plus intercept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    /// Serialization format version; bump on breaking layout changes.
    pub version: u32,
    pub kind: ModelKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_count: usize,
}

/// Current serialized model format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
#[cfg(test)]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Trains a model of the given kind. Fails if the labels are single-class
/// or the hyper-parameters are outside their domains.
pub fn fit(train: &Dataset, kind: ModelKind, cfg: &TrainConfig) -> Result<TrainedModel> {
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive, got {}",
            cfg.learning_rate
        )));
    }
    if cfg.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }
    if !(cfg.l2_penalty >= 0.0 && cfg.l2_penalty.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "l2 penalty must be non-negative, got {}",
            cfg.l2_penalty
        )));
    }
    let positives = train.labels().iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::DegenerateTraining(format!(
            "training set holds a single class ({} of {} rows positive)",
            positives,
            train.len()
        )));
    }
    match kind {
        ModelKind::Logistic => Ok(fit_logistic(train, cfg)),
    }
}

fn fit_logistic(train: &Dataset, cfg: &TrainConfig) -> TrainedModel {
    let m = train.width();
    let mut weights = vec![0.0f64; m];
    let mut bias = 0.0f64;

    for _ in 0..cfg.epochs {
        let (grad, grad_bias) = loss_gradient(train, &weights, bias, cfg.l2_penalty);
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * g;
        }
        bias -= cfg.learning_rate * grad_bias;
    }

    TrainedModel {
        version: MODEL_FORMAT_VERSION,
        kind: ModelKind::Logistic,
        weights,
        bias,
        feature_count: m,
    }
}

/// Mean regularized logistic loss of `(weights, bias)` on a dataset.
/// Shares its definition with the analytic gradient in [`loss_gradient`];
/// tests cross-check the two by central finite differences.
#[cfg(test)]
pub(crate) fn loss(train: &Dataset, weights: &[f64], bias: f64, l2: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..train.len() {
        let mut z = bias;
        for (w, x) in weights.iter().zip(train.row(i)) {
            z += w * x;
        }
        total += softplus(z) - f64::from(train.label(i)) * z;
    }
    let penalty: f64 = weights.iter().map(|w| w * w).sum::<f64>() * l2 / 2.0;
    total / train.len() as f64 + penalty
}

/// Analytic gradient of [`loss`] with respect to (weights, bias).
pub(crate) fn loss_gradient(
    train: &Dataset,
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> (Vec<f64>, f64) {
    let inv_n = 1.0 / train.len() as f64;
    let mut grad = vec![0.0f64; weights.len()];
    let mut grad_bias = 0.0;
    for i in 0..train.len() {
        let row = train.row(i);
        let mut z = bias;
        for (w, x) in weights.iter().zip(row) {
            z += w * x;
        }
        let residual = sigmoid(z) - f64::from(train.label(i));
        for (g, x) in grad.iter_mut().zip(row) {
            *g += residual * x;
        }
        grad_bias += residual;
    }
    for (g, w) in grad.iter_mut().zip(weights) {
        *g = *g * inv_n + l2 * *w;
    }
    (grad, grad_bias * inv_n)
}

impl TrainedModel {
    /// Class probabilities `(p0, p1)` for one feature row; they sum to 1.
    pub fn predict_proba(&self, x: &[f64]) -> (f64, f64) {
        debug_assert_eq!(x.len(), self.feature_count);
        let mut z = self.bias;
        for (w, v) in self.weights.iter().zip(x) {
            z += w * v;
        }
        let p1 = sigmoid(z);
        (1.0 - p1, p1)
    }

    /// Predicted label: 1 when p1 strictly exceeds 0.5, otherwise 0.
    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.predict_proba(x).1 > 0.5)
    }

    /// Positive-class probability for every row of a dataset.
    pub fn predict_proba_all(&self, d: &Dataset) -> Vec<f64> {
        (0..d.len())
            .map(|i| self.predict_proba(d.row(i)).1)
            .collect()
    }

    /// Predicted label for every row of a dataset.
    pub fn predict_all(&self, d: &Dataset) -> Vec<u8> {
        (0..d.len()).map(|i| self.predict(d.row(i))).collect()
    }

    /// Serializes to the versioned JSON model format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    /// Parses the versioned JSON model format, validating version and shape.
    pub fn from_json(raw: &str) -> Result<TrainedModel> {
        let model: TrainedModel =
            serde_json::from_str(raw).map_err(|e| Error::Data(format!("model JSON: {e}")))?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "unsupported model format version {} (current is {MODEL_FORMAT_VERSION})",
                model.version
            )));
        }
        if model.weights.len() != model.feature_count {
            return Err(Error::Data(format!(
                "model declares {} features but carries {} weights",
                model.feature_count,
                model.weights.len()
            )));
        }
        Ok(model)
    }
}
