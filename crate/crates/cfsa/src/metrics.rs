//! Fairness and performance measurement.
//!
//! Group-fairness metrics compare prediction behaviour between the favored
//! (`s = 1`) and deprived (`s = 0`) groups; all three are reported as
//! absolute differences, so 0 is perfectly fair and larger is worse.
//! Performance metrics come from the usual confusion-matrix quantities.
//!
//! Undefined values are never smuggled through as `NaN` or silent zeros:
//! fairness metrics return a structured error naming the empty cell, and
//! ratio-based performance metrics return [`MetricValue::Undefined`] with
//! the reason. The one deliberate convention is MCC, which is reported as
//! 0 (and logged) when its denominator vanishes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A metric outcome that is either a number or a structured reason why the
/// number does not exist on this data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MetricValue {
    Defined { value: f64 },
    Undefined { reason: String },
}

impl MetricValue {
    pub fn defined(value: f64) -> Self {
        MetricValue::Defined { value }
    }

    pub fn undefined(reason: impl Into<String>) -> Self {
        MetricValue::Undefined {
            reason: reason.into(),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            MetricValue::Defined { value } => Some(*value),
            MetricValue::Undefined { .. } => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, MetricValue::Defined { .. })
    }
}

/// Confusion-matrix counts for binary predictions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: u64,
    pub false_positive: u64,
    pub true_negative: u64,
    pub false_negative: u64,
}

impl Confusion {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Confusion {
            true_positive: tp,
            false_positive: fp,
            true_negative: tn,
            false_negative: fn_,
        }
    }

    /// Tallies predictions against labels. Both slices must be non-empty,
    /// equally long and 0/1-valued.
    pub fn from_predictions(preds: &[u8], labels: &[u8]) -> Result<Confusion> {
        check_binary_pair(preds, labels)?;
        let mut c = Confusion::default();
        for (&p, &y) in preds.iter().zip(labels) {
            match (p, y) {
                (1, 1) => c.true_positive += 1,
                (1, 0) => c.false_positive += 1,
                (0, 0) => c.true_negative += 1,
                _ => c.false_negative += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    pub fn accuracy(&self) -> f64 {
        (self.true_positive + self.true_negative) as f64 / self.total() as f64
    }

    pub fn precision(&self) -> MetricValue {
        let denom = self.true_positive + self.false_positive;
        if denom == 0 {
            MetricValue::undefined("no positive predictions")
        } else {
            MetricValue::defined(self.true_positive as f64 / denom as f64)
        }
    }

    pub fn recall(&self) -> MetricValue {
        let denom = self.true_positive + self.false_negative;
        if denom == 0 {
            MetricValue::undefined("no positive labels")
        } else {
            MetricValue::defined(self.true_positive as f64 / denom as f64)
        }
    }

    pub fn f1(&self) -> MetricValue {
        match (self.precision(), self.recall()) {
            (MetricValue::Defined { value: p }, MetricValue::Defined { value: r }) => {
                if p + r == 0.0 {
                    MetricValue::undefined("precision and recall both zero")
                } else {
                    MetricValue::defined(2.0 * p * r / (p + r))
                }
            }
            (MetricValue::Undefined { reason }, _) | (_, MetricValue::Undefined { reason }) => {
                MetricValue::undefined(reason)
            }
        }
    }

    /// Matthews correlation coefficient. Returns 0 (logged) when any
    /// marginal is empty and the coefficient is formally undefined.
    pub fn mcc(&self) -> f64 {
        let tp = self.true_positive as f64;
        let fp = self.false_positive as f64;
        let tn = self.true_negative as f64;
        let fn_ = self.false_negative as f64;
        let denom = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        if denom == 0.0 {
            log::warn!("mcc denominator is zero (confusion {self:?}); reporting 0 by convention");
            return 0.0;
        }
        (tp * tn - fp * fn_) / denom
    }
}

/// All five performance metrics of one prediction set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMetrics {
    pub accuracy: f64,
    pub precision: MetricValue,
    pub recall: MetricValue,
    pub f1: MetricValue,
    pub mcc: f64,
}

/// Computes accuracy, precision, recall, F1 and MCC in one pass.
pub fn performance(preds: &[u8], labels: &[u8]) -> Result<PerformanceMetrics> {
    let c = Confusion::from_predictions(preds, labels)?;
    Ok(PerformanceMetrics {
        accuracy: c.accuracy(),
        precision: c.precision(),
        recall: c.recall(),
        f1: c.f1(),
        mcc: c.mcc(),
    })
}

fn check_binary_pair(a: &[u8], b: &[u8]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty prediction set".into()));
    }
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} predictions vs {} labels",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|&v| v > 1) {
        return Err(Error::InvalidArgument(
            "predictions and labels must be 0 or 1".into(),
        ));
    }
    Ok(())
}

fn check_triple(preds: &[u8], labels: &[u8], sensitive: &[u8]) -> Result<()> {
    check_binary_pair(preds, labels)?;
    if sensitive.len() != preds.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} predictions vs {} sensitive values",
            preds.len(),
            sensitive.len()
        )));
    }
    if sensitive.iter().any(|&v| v > 1) {
        return Err(Error::InvalidArgument(
            "sensitive values must be 0 or 1".into(),
        ));
    }
    Ok(())
}

fn rate(hits: u64, total: u64, metric: &str, cell: &str) -> Result<f64> {
    if total == 0 {
        return Err(Error::UndefinedMetric {
            metric: metric.into(),
            reason: format!("cell {cell} is empty"),
        });
    }
    Ok(hits as f64 / total as f64)
}

/// Statistical parity difference:
/// `|P(pred = 1 | favored) − P(pred = 1 | deprived)|`.
///
/// Labels are accepted for signature uniformity but do not enter the value.
pub fn statistical_parity_difference(preds: &[u8], labels: &[u8], sensitive: &[u8]) -> Result<f64> {
    check_triple(preds, labels, sensitive)?;
    let mut counts = [[0u64; 2]; 2]; // [group][predicted]
    for (&p, &s) in preds.iter().zip(sensitive) {
        counts[s as usize][p as usize] += 1;
    }
    let fav = rate(counts[1][1], counts[1][0] + counts[1][1], "spd", "favored")?;
    let dep = rate(counts[0][1], counts[0][0] + counts[0][1], "spd", "deprived")?;
    Ok((fav - dep).abs())
}

/// Per-group true/false positive rates, the building blocks of the
/// odds-based metrics.
fn group_rates(
    preds: &[u8],
    labels: &[u8],
    sensitive: &[u8],
    metric: &str,
) -> Result<[[f64; 2]; 2]> {
    // counts[group][label] = (positives predicted, total)
    let mut hits = [[0u64; 2]; 2];
    let mut totals = [[0u64; 2]; 2];
    for ((&p, &y), &s) in preds.iter().zip(labels).zip(sensitive) {
        totals[s as usize][y as usize] += 1;
        hits[s as usize][y as usize] += u64::from(p);
    }
    let mut rates = [[0.0f64; 2]; 2];
    for group in 0..2 {
        for label in 0..2 {
            let cell = format!(
                "{}/{}",
                if group == 1 { "favored" } else { "deprived" },
                if label == 1 { "granted" } else { "rejected" }
            );
            rates[group][label] = rate(hits[group][label], totals[group][label], metric, &cell)?;
        }
    }
    Ok(rates)
}

/// Average odds difference: mean of the absolute FPR and TPR gaps between
/// the groups.
pub fn average_odds_difference(preds: &[u8], labels: &[u8], sensitive: &[u8]) -> Result<f64> {
    check_triple(preds, labels, sensitive)?;
    let r = group_rates(preds, labels, sensitive, "aod")?;
    let fpr_gap = (r[1][0] - r[0][0]).abs();
    let tpr_gap = (r[1][1] - r[0][1]).abs();
    Ok(0.5 * (fpr_gap + tpr_gap))
}

/// Equal opportunity difference: absolute TPR gap between the groups.
pub fn equal_opportunity_difference(preds: &[u8], labels: &[u8], sensitive: &[u8]) -> Result<f64> {
    check_triple(preds, labels, sensitive)?;
    let mut hits = [0u64; 2];
    let mut totals = [0u64; 2];
    for ((&p, &y), &s) in preds.iter().zip(labels).zip(sensitive) {
        if y == 1 {
            totals[s as usize] += 1;
            hits[s as usize] += u64::from(p);
        }
    }
    let fav = rate(hits[1], totals[1], "eod", "favored/granted")?;
    let dep = rate(hits[0], totals[0], "eod", "deprived/granted")?;
    Ok((fav - dep).abs())
}

/// The fairness metrics the pipeline can report on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessMetric {
    StatisticalParity,
    AverageOdds,
    EqualOpportunity,
}

impl FairnessMetric {
    pub const ALL: [FairnessMetric; 3] = [
        FairnessMetric::StatisticalParity,
        FairnessMetric::AverageOdds,
        FairnessMetric::EqualOpportunity,
    ];

    pub fn code(self) -> &'static str {
        match self {
            FairnessMetric::StatisticalParity => "spd",
            FairnessMetric::AverageOdds => "aod",
            FairnessMetric::EqualOpportunity => "eod",
        }
    }

    pub fn compute(self, preds: &[u8], labels: &[u8], sensitive: &[u8]) -> Result<f64> {
        match self {
            FairnessMetric::StatisticalParity => {
                statistical_parity_difference(preds, labels, sensitive)
            }
            FairnessMetric::AverageOdds => average_odds_difference(preds, labels, sensitive),
            FairnessMetric::EqualOpportunity => {
                equal_opportunity_difference(preds, labels, sensitive)
            }
        }
    }
}

/// The performance metrics the pipeline can report on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceMetric {
    Accuracy,
    Precision,
    Recall,
    F1,
    Mcc,
}

impl PerformanceMetric {
    pub const ALL: [PerformanceMetric; 5] = [
        PerformanceMetric::Accuracy,
        PerformanceMetric::Precision,
        PerformanceMetric::Recall,
        PerformanceMetric::F1,
        PerformanceMetric::Mcc,
    ];

    pub fn code(self) -> &'static str {
        match self {
            PerformanceMetric::Accuracy => "accuracy",
            PerformanceMetric::Precision => "precision",
            PerformanceMetric::Recall => "recall",
            PerformanceMetric::F1 => "f1",
            PerformanceMetric::Mcc => "mcc",
        }
    }

    pub fn compute(self, preds: &[u8], labels: &[u8]) -> Result<MetricValue> {
        let c = Confusion::from_predictions(preds, labels)?;
        Ok(self.of_confusion(&c))
    }

    pub fn of_confusion(self, c: &Confusion) -> MetricValue {
        match self {
            PerformanceMetric::Accuracy => MetricValue::defined(c.accuracy()),
            PerformanceMetric::Precision => c.precision(),
            PerformanceMetric::Recall => c.recall(),
            PerformanceMetric::F1 => c.f1(),
            PerformanceMetric::Mcc => MetricValue::defined(c.mcc()),
        }
    }
}
