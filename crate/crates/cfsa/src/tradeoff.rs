//! Mutation-based fairness/performance trade-off baseline.
//!
//! A mitigation method that merely trades accuracy for fairness can be
//! imitated by a trivial device: take the original model's predictions and
//! overwrite a random fraction (the *mutation degree*) with the majority
//! class. Sweeping the degree from 0 to 1 and averaging repeated draws
//! yields a polyline of (bias, performance) points — the trade-off
//! baseline. A real method is only interesting where it beats that line:
//! either both metrics improve (*win-win*) or the accuracy given up buys
//! more fairness than random mutation would (*good*).
//!
//! Region classification against the baseline follows the five-level
//! scheme: win-win, good, inverted (bias rose with performance), poor,
//! lose-lose — with ties resolved toward the less favorable region.

use serde::{Deserialize, Serialize};

use crate::classifier::TrainedModel;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{FairnessMetric, MetricValue, PerformanceMetric};

/// Default mutation degrees: 0.1, 0.2, …, 1.0 (degree 0 is always
/// prepended as the original model's own point).
pub fn default_degrees() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// Majority class of a label vector; an exact tie counts as 0.
pub fn majority_label(labels: &[u8]) -> u8 {
    let ones = labels.iter().filter(|&&y| y == 1).count();
    u8::from(2 * ones > labels.len())
}

/// Overwrites a seeded uniform sample of ⌊degree·n⌋ positions (drawn
/// without replacement) with the majority label; positions already holding
/// the majority still count toward the quota.
pub fn mutate_predictions(preds: &[u8], degree: f64, majority: u8, seed: u64) -> Vec<u8> {
    debug_assert!(
        (0.0..=1.0).contains(&degree),
        "mutation degree outside [0,1]"
    );
    let n = preds.len();
    let count = ((degree * n as f64).floor() as usize).min(n);
    let mut out = preds.to_vec();
    let mut rng = crate::rng::seeded(seed, crate::rng::Stream::Mutation);
    for i in rand::seq::index::sample(&mut rng, n, count) {
        out[i] = majority;
    }
    out
}

/// One averaged point of the baseline polyline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselinePoint {
    pub degree: f64,
    pub bias: f64,
    pub performance: f64,
}

/// One (degree, repeat) draw, kept for replay and audit export; metric
/// slots record why a sample was excluded from its point's average.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RawSample {
    pub degree: f64,
    pub repeat: usize,
    /// Seed the mutation positions were drawn with; replaying
    /// [`mutate_predictions`] with it reproduces the sample exactly.
    pub mutation_seed: u64,
    pub bias: MetricValue,
    pub performance: MetricValue,
}

/// The trade-off polyline for one (fairness, performance) metric pair:
/// the original model's point followed by averaged pseudo-model points at
/// each mutation degree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TradeoffBaseline {
    pub fairness_metric: FairnessMetric,
    pub performance_metric: PerformanceMetric,
    /// Polyline points; `points[0]` is the unmutated model (degree 0).
    pub points: Vec<BaselinePoint>,
    /// Every individual draw, including excluded (undefined) ones.
    pub raw_samples: Vec<RawSample>,
    pub repeats: usize,
    pub seed: u64,
}

/// The five effectiveness levels, from best to worst. `Inverted` sits
/// outside the better/worse axis: performance rose but so did bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    WinWin,
    Good,
    Inverted,
    Poor,
    LoseLose,
}

impl Region {
    pub fn code(self) -> &'static str {
        match self {
            Region::WinWin => "win_win",
            Region::Good => "good",
            Region::Inverted => "inverted",
            Region::Poor => "poor",
            Region::LoseLose => "lose_lose",
        }
    }

    /// A method beats the baseline when it lands in win-win or good.
    pub fn beats_baseline(self) -> bool {
        matches!(self, Region::WinWin | Region::Good)
    }
}

/// A method's (bias, performance) point classified against a baseline.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MitigationOutcome {
    /// (bias, performance) of the mitigation method.
    pub point: (f64, f64),
    pub region: Region,
}

impl MitigationOutcome {
    pub fn beats_baseline(&self) -> bool {
        self.region.beats_baseline()
    }
}

/// Per-draw seed stream: a splitmix64-style mix of (seed, degree index,
/// repeat index), so draws are independent of evaluation order and
/// identical across metric pairs evaluated on the same predictions.
fn sample_seed(seed: u64, degree_idx: u64, repeat_idx: u64) -> u64 {
    let mut z = seed;
    for salt in [degree_idx.wrapping_add(1), repeat_idx.wrapping_add(1)] {
        z = z.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Builds the trade-off baseline for `model` on `test` against sensitive
/// column `s`.
///
/// For each degree, `repeats` seeded mutations of the model's test
/// predictions are scored on both metrics and averaged; draws on which
/// either metric is undefined are excluded from the average with a warning
/// (they stay in `raw_samples` with the reason). A degree whose draws are
/// all undefined contributes no point. The unmutated model's point is
/// prepended and must be defined.
pub fn build_baseline(
    model: &TrainedModel,
    test: &Dataset,
    s: &str,
    fairness: FairnessMetric,
    performance: PerformanceMetric,
    degrees: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<TradeoffBaseline> {
    if repeats == 0 {
        return Err(Error::InvalidArgument(
            "baseline needs at least one repeat".into(),
        ));
    }
    if degrees.windows(2).any(|w| w[0] >= w[1]) || degrees.iter().any(|d| !(0.0..=1.0).contains(d))
    {
        return Err(Error::InvalidArgument(
            "mutation degrees must be strictly ascending within [0,1]".into(),
        ));
    }
    let sensitive = test.sensitive_vector(s)?;
    let labels = test.labels();
    let preds0 = model.predict_all(test);
    let majority = majority_label(labels);

    // degree 0: the original model, a single deterministic draw
    let bias0 = fairness.compute(&preds0, labels, &sensitive)?;
    let perf0 = match performance.compute(&preds0, labels)? {
        MetricValue::Defined { value } => value,
        MetricValue::Undefined { reason } => {
            return Err(Error::UndefinedMetric {
                metric: performance.code().to_string(),
                reason: format!("undefined on the unmutated model: {reason}"),
            })
        }
    };
    let mut points = vec![BaselinePoint {
        degree: 0.0,
        bias: bias0,
        performance: perf0,
    }];
    let mut raw_samples = vec![RawSample {
        degree: 0.0,
        repeat: 0,
        mutation_seed: sample_seed(seed, 0, 0),
        bias: MetricValue::defined(bias0),
        performance: MetricValue::defined(perf0),
    }];

    for (di, &degree) in degrees.iter().enumerate() {
        let mut bias_sum = 0.0;
        let mut perf_sum = 0.0;
        let mut used = 0usize;
        for repeat in 0..repeats {
            // degree index 0 is reserved for the unmutated point
            let mseed = sample_seed(seed, di as u64 + 1, repeat as u64);
            let mutated = mutate_predictions(&preds0, degree, majority, mseed);
            let bias = match fairness.compute(&mutated, labels, &sensitive) {
                Ok(v) => MetricValue::defined(v),
                Err(Error::UndefinedMetric { reason, .. }) => MetricValue::undefined(reason),
                Err(other) => return Err(other),
            };
            let perf = performance.compute(&mutated, labels)?;
            match (&bias, &perf) {
                (MetricValue::Defined { value: b }, MetricValue::Defined { value: p }) => {
                    bias_sum += b;
                    perf_sum += p;
                    used += 1;
                }
                _ => {
                    log::warn!(
                        "degree {degree} repeat {repeat}: {} sample excluded (undefined metric)",
                        fairness.code()
                    );
                }
            }
            raw_samples.push(RawSample {
                degree,
                repeat,
                mutation_seed: mseed,
                bias,
                performance: perf,
            });
        }
        if used == 0 {
            log::warn!(
                "degree {degree}: every draw was undefined for {}/{}; point skipped",
                fairness.code(),
                performance.code()
            );
            continue;
        }
        points.push(BaselinePoint {
            degree,
            bias: bias_sum / used as f64,
            performance: perf_sum / used as f64,
        });
    }
    Ok(TradeoffBaseline {
        fairness_metric: fairness,
        performance_metric: performance,
        points,
        raw_samples,
        repeats,
        seed,
    })
}

/// Baseline performance at bias level `f`, linearly interpolated on the
/// first polyline segment bracketing `f`; outside the polyline's bias span
/// the nearest extreme point's performance is used. A zero-width bracket
/// reports the higher performance (the stricter hurdle).
fn interpolate(points: &[BaselinePoint], f: f64) -> f64 {
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (f >= a.bias.min(b.bias)) && (f <= a.bias.max(b.bias)) {
            if a.bias == b.bias {
                return a.performance.max(b.performance);
            }
            let t = (f - a.bias) / (b.bias - a.bias);
            return a.performance + t * (b.performance - a.performance);
        }
    }
    // outside the measured span: clamp to the nearest-bias extreme point
    let min = points
        .iter()
        .min_by(|a, b| a.bias.total_cmp(&b.bias))
        .expect(">= 2 points");
    let max = points
        .iter()
        .max_by(|a, b| a.bias.total_cmp(&b.bias))
        .expect(">= 2 points");
    if f < min.bias {
        min.performance
    } else {
        max.performance
    }
}

/// Classifies a method's (bias, performance) point against a baseline.
///
/// With the original model at `(f0, p0)` and the method at `(f1, p1)`
/// (bias lower-better, performance higher-better):
///
/// * `p1 > p0` and `f1 < f0` → win-win;
/// * `p1 > p0` and `f1 ≥ f0` → inverted;
/// * `p1 ≤ p0` and `f1 > f0` → lose-lose;
/// * otherwise the method paid performance for fairness: it is *good* if
///   it sits strictly above the baseline polyline at its bias level,
///   *poor* otherwise (a point exactly on the line is poor).
pub fn classify(point: (f64, f64), baseline: &TradeoffBaseline) -> Result<MitigationOutcome> {
    let points = &baseline.points;
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "baseline needs at least two points to classify against".into(),
        ));
    }
    if points
        .windows(2)
        .all(|w| w[0].bias == w[1].bias && w[0].performance == w[1].performance)
    {
        return Err(Error::InvalidArgument(
            "degenerate baseline: every point identical; nothing to compare against".into(),
        ));
    }
    let (f0, p0) = (points[0].bias, points[0].performance);
    let (f1, p1) = point;
    if !f1.is_finite() || !p1.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "method point ({f1}, {p1}) is not finite"
        )));
    }
    let region = if p1 > p0 {
        if f1 < f0 {
            Region::WinWin
        } else {
            Region::Inverted
        }
    } else if f1 > f0 {
        Region::LoseLose
    } else if p1 > interpolate(points, f1) {
        Region::Good
    } else {
        Region::Poor
    };
    Ok(MitigationOutcome { point, region })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{self, ModelKind, TrainConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_test(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let s = f64::from(rng.random::<bool>());
            let x: f64 = rng.random();
            features.extend_from_slice(&[s, x]);
            labels.push(u8::from(x + 0.2 * s > 0.6));
        }
        Dataset::from_parts(
            vec!["s".into(), "x".into()],
            &["s".to_string()],
            "y",
            features,
            labels,
        )
        .unwrap()
    }

    fn toy_model(train: &Dataset) -> TrainedModel {
        classifier::fit(train, ModelKind::Logistic, &TrainConfig::default()).unwrap()
    }

    #[test]
    fn degree_zero_is_identity() {
        let preds = vec![0, 1, 1, 0, 1];
        assert_eq!(mutate_predictions(&preds, 0.0, 1, 99), preds);
    }

    #[test]
    fn degree_one_overwrites_everything() {
        let preds = vec![0, 1, 1, 0, 1, 0, 0];
        assert_eq!(mutate_predictions(&preds, 1.0, 1, 3), vec![1; 7]);
        assert_eq!(mutate_predictions(&preds, 1.0, 0, 3), vec![0; 7]);
    }

    #[test]
    fn mutation_budget_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let preds: Vec<u8> = (0..100).map(|_| rng.random::<bool>() as u8).collect();
        let out = mutate_predictions(&preds, 0.3, 1, 17);
        // at most 30 positions changed, and every change became the majority
        let changed: Vec<usize> = (0..100).filter(|&i| out[i] != preds[i]).collect();
        assert!(changed.len() <= 30);
        assert!(changed.iter().all(|&i| out[i] == 1));
        // unselected positions are untouched: flipping the majority shows
        // the same selection set regardless of current values
        let alt = mutate_predictions(&preds, 0.3, 0, 17);
        let touched: Vec<usize> = (0..100).filter(|&i| out[i] == 1 && alt[i] == 0).collect();
        assert_eq!(
            touched.len(),
            30,
            "selection must cover exactly 30 positions"
        );
        assert_eq!(mutate_predictions(&preds, 0.3, 1, 17), out, "deterministic");
    }

    #[test]
    fn majority_breaks_ties_to_zero() {
        assert_eq!(majority_label(&[0, 1, 0, 1]), 0);
        assert_eq!(majority_label(&[0, 1, 1]), 1);
        assert_eq!(majority_label(&[0]), 0);
    }

    #[test]
    fn full_mutation_zeroes_every_fairness_metric_exactly() {
        let test = toy_test(200, 4);
        let model = toy_model(&toy_test(200, 5));
        let preds0 = model.predict_all(&test);
        let majority = majority_label(test.labels());
        let mutated = mutate_predictions(&preds0, 1.0, majority, 21);
        let sensitive = test.sensitive_vector("s").unwrap();
        for metric in FairnessMetric::ALL {
            let v = metric.compute(&mutated, test.labels(), &sensitive).unwrap();
            assert_eq!(v, 0.0, "{} must vanish at full mutation", metric.code());
        }
        let majority_fraction =
            test.labels().iter().filter(|&&y| y == majority).count() as f64 / test.len() as f64;
        let acc = PerformanceMetric::Accuracy
            .compute(&mutated, test.labels())
            .unwrap()
            .value()
            .unwrap();
        assert_eq!(acc, majority_fraction);
    }

    #[test]
    fn baseline_starts_at_the_original_model() {
        let train = toy_test(150, 1);
        let test = toy_test(100, 2);
        let model = toy_model(&train);
        let few = build_baseline(
            &model,
            &test,
            "s",
            FairnessMetric::StatisticalParity,
            PerformanceMetric::Accuracy,
            &default_degrees(),
            1,
            9,
        )
        .unwrap();
        let many = build_baseline(
            &model,
            &test,
            "s",
            FairnessMetric::StatisticalParity,
            PerformanceMetric::Accuracy,
            &default_degrees(),
            50,
            9,
        )
        .unwrap();
        assert_eq!(
            few.points[0], many.points[0],
            "degree-0 point has no randomness"
        );
        assert_eq!(few.points[0].degree, 0.0);
        assert_eq!(few.points.len(), 11);
        // final point: all-majority predictions
        let last = many.points.last().unwrap();
        assert_eq!(last.bias, 0.0);
    }

    #[test]
    fn raw_samples_replay_exactly() {
        let train = toy_test(120, 11);
        let test = toy_test(90, 12);
        let model = toy_model(&train);
        let baseline = build_baseline(
            &model,
            &test,
            "s",
            FairnessMetric::AverageOdds,
            PerformanceMetric::F1,
            &default_degrees(),
            5,
            31,
        )
        .unwrap();
        let preds0 = model.predict_all(&test);
        let majority = majority_label(test.labels());
        let sensitive = test.sensitive_vector("s").unwrap();
        for sample in baseline.raw_samples.iter().filter(|r| r.degree > 0.0) {
            let mutated =
                mutate_predictions(&preds0, sample.degree, majority, sample.mutation_seed);
            if let Some(b) = sample.bias.value() {
                let again = FairnessMetric::AverageOdds
                    .compute(&mutated, test.labels(), &sensitive)
                    .unwrap();
                assert_eq!(b, again, "stored bias must replay bitwise");
            }
            if let Some(p) = sample.performance.value() {
                let again = PerformanceMetric::F1
                    .compute(&mutated, test.labels())
                    .unwrap()
                    .value()
                    .unwrap();
                assert_eq!(p, again, "stored performance must replay bitwise");
            }
        }
        // determinism end to end
        let again = build_baseline(
            &model,
            &test,
            "s",
            FairnessMetric::AverageOdds,
            PerformanceMetric::F1,
            &default_degrees(),
            5,
            31,
        )
        .unwrap();
        assert_eq!(baseline.points, again.points);
    }

    #[test]
    fn undefined_draws_are_excluded_not_fatal() {
        // majority is 0, so degree-1.0 predictions have no positives and
        // precision is undefined there; the 1.0 point must be skipped
        let train = toy_test(150, 14);
        let mut test = toy_test(80, 15);
        // rebuild with mostly-0 labels to force majority 0
        let features: Vec<f64> = (0..test.len()).flat_map(|i| test.row(i).to_vec()).collect();
        let labels: Vec<u8> = (0..test.len()).map(|i| u8::from(i % 5 == 0)).collect();
        test = Dataset::from_parts(
            vec!["s".into(), "x".into()],
            &["s".to_string()],
            "y",
            features,
            labels,
        )
        .unwrap();
        let model = toy_model(&train);
        let baseline = build_baseline(
            &model,
            &test,
            "s",
            FairnessMetric::StatisticalParity,
            PerformanceMetric::Precision,
            &default_degrees(),
            3,
            2,
        )
        .unwrap();
        assert!(baseline.points.iter().all(|p| p.degree < 1.0));
        let dropped: Vec<_> = baseline
            .raw_samples
            .iter()
            .filter(|r| r.degree == 1.0)
            .collect();
        assert_eq!(dropped.len(), 3);
        assert!(dropped.iter().all(|r| !r.performance.is_defined()));
    }

    fn hand_baseline(points: &[(f64, f64)]) -> TradeoffBaseline {
        TradeoffBaseline {
            fairness_metric: FairnessMetric::StatisticalParity,
            performance_metric: PerformanceMetric::Accuracy,
            points: points
                .iter()
                .enumerate()
                .map(|(i, &(bias, performance))| BaselinePoint {
                    degree: i as f64 / 10.0,
                    bias,
                    performance,
                })
                .collect(),
            raw_samples: Vec::new(),
            repeats: 1,
            seed: 0,
        }
    }

    #[test]
    fn classification_hand_cases() {
        let b = hand_baseline(&[(0.2, 0.9), (0.1, 0.8), (0.0, 0.7)]);
        let case = |f, p| classify((f, p), &b).unwrap().region;
        assert_eq!(case(0.1, 0.92), Region::WinWin);
        assert_eq!(case(0.25, 0.91), Region::Inverted);
        assert_eq!(
            case(0.2, 0.95),
            Region::Inverted,
            "equal bias with a gain is inverted"
        );
        assert_eq!(case(0.25, 0.85), Region::LoseLose);
        // worked interpolation: p̂(0.05) = 0.75
        assert_eq!(case(0.05, 0.78), Region::Good);
        assert_eq!(
            case(0.05, 0.75),
            Region::Poor,
            "exactly on the line is poor"
        );
        assert_eq!(case(0.05, 0.70), Region::Poor);
        // original point itself: on the line, poor
        assert_eq!(case(0.2, 0.9), Region::Poor);
        // outside the span: clamps to the nearest extreme
        assert_eq!(
            case(-0.1, 0.71),
            Region::Good,
            "p̂ clamps to 0.7 below the span"
        );
    }

    #[test]
    fn degenerate_baseline_is_an_error() {
        let b = hand_baseline(&[(0.1, 0.8), (0.1, 0.8), (0.1, 0.8)]);
        assert!(matches!(
            classify((0.05, 0.7), &b),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn beats_predicate_is_monotone_in_performance() {
        let b = hand_baseline(&[(0.3, 0.85), (0.2, 0.8), (0.1, 0.72), (0.0, 0.6)]);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let f1: f64 = rng.random::<f64>() * 0.3;
            let p_low: f64 = rng.random::<f64>();
            let p_high = p_low + rng.random::<f64>() * (1.0 - p_low);
            let low = classify((f1, p_low), &b).unwrap();
            let high = classify((f1, p_high), &b).unwrap();
            if low.beats_baseline() {
                assert!(
                    high.beats_baseline(),
                    "raising performance from {p_low} to {p_high} at bias {f1} \
                     moved {:?} to {:?}",
                    low.region,
                    high.region
                );
            }
        }
    }

    #[test]
    fn vertical_bracket_uses_the_stricter_hurdle() {
        // the opening segment is vertical at bias 0.2, spanning 0.9..0.6;
        // a method at that exact bias faces the higher end as its hurdle,
        // so it cannot be "good" without beating the original model itself
        let b = hand_baseline(&[(0.2, 0.9), (0.2, 0.6), (0.1, 0.5)]);
        assert_eq!(classify((0.2, 0.7), &b).unwrap().region, Region::Poor);
        assert_eq!(classify((0.2, 0.89), &b).unwrap().region, Region::Poor);
        // interior biases interpolate the later, sloped segment as usual
        assert_eq!(classify((0.15, 0.58), &b).unwrap().region, Region::Good);
        assert_eq!(classify((0.15, 0.54), &b).unwrap().region, Region::Poor);
    }
}
