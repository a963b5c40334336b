//! Deterministic synthetic fixtures with known bias, and brute-force
//! oracles for cross-checking the analytic solvers.
//!
//! Real benchmark datasets cannot be redistributed, so the test suite and
//! the bundled demos run on generated data whose bias is *constructed*,
//! not assumed: every row records the grant it truly deserved and whether
//! that grant was withheld because of its group. Detection and repair can
//! therefore be scored against actual ground truth instead of downstream
//! proxies.
//!
//! The generator plants two bias mechanisms:
//!
//! * **group imbalance** — favored and deprived groups draw their latent
//!   grant intent at different base rates;
//! * **label bias** — a β-fraction of deprived rows whose ground truth is
//!   a grant are flipped to rejected, mimicking a biased labeler.
//!
//! Features are Gaussian evidence blobs around the two class means with a
//! shared spherical covariance, so the optimal feature-only decision rule
//! is linear (a threshold on the mean feature) — but it is imperfect by
//! construction, which is what forces a fitted model to lean on the group
//! column and makes the injected bias detectable.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Shape and bias parameters of a generated dataset.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureSpec {
    /// Total rows; at least 4.
    pub rows: usize,
    /// Non-sensitive feature columns.
    pub features: usize,
    /// Sensitive attributes (1 or 2), named `s1`, `s2`.
    pub sensitive_count: usize,
    /// Fraction of rows in the favored group of each attribute.
    pub favored_share: f64,
    /// Latent grant rate of the favored group.
    pub favored_rate: f64,
    /// Latent grant rate of the deprived group.
    pub deprived_rate: f64,
    /// β: fraction of deprived ground-truth-granted rows whose label is
    /// flipped to rejected, per attribute.
    pub bias_rate: f64,
    /// Distance between the class-conditional feature means.
    pub class_separation: f64,
    /// Standard deviation of each feature around its class mean.
    pub noise: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            rows: 500,
            features: 6,
            sensitive_count: 1,
            favored_share: 0.5,
            favored_rate: 0.65,
            deprived_rate: 0.25,
            bias_rate: 0.3,
            class_separation: 0.07,
            noise: 0.28,
            seed: 0,
        }
    }
}

impl FixtureSpec {
    /// The reference fixture used throughout the acceptance checks:
    /// 2,000 rows with a 0.3 label-bias injection rate, seed 7.
    pub fn reference() -> FixtureSpec {
        FixtureSpec {
            rows: 2000,
            bias_rate: 0.3,
            seed: 7,
            ..Default::default()
        }
    }

    /// Same spec with a different seed, for multi-seed sweeps.
    pub fn with_seed(self, seed: u64) -> FixtureSpec {
        FixtureSpec { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 4 {
            return Err(Error::InvalidArgument(format!(
                "fixture needs at least 4 rows, got {}",
                self.rows
            )));
        }
        if self.features == 0 {
            return Err(Error::InvalidArgument(
                "fixture needs at least one feature".into(),
            ));
        }
        if !(1..=2).contains(&self.sensitive_count) {
            return Err(Error::InvalidArgument(format!(
                "1 or 2 sensitive attributes supported, got {}",
                self.sensitive_count
            )));
        }
        for (name, v) in [
            ("favored_share", self.favored_share),
            ("favored_rate", self.favored_rate),
            ("deprived_rate", self.deprived_rate),
            ("bias_rate", self.bias_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0,1], got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.class_separation) {
            return Err(Error::InvalidArgument(
                "class separation must lie in [0,1]".into(),
            ));
        }
        if !self.noise.is_finite() || self.noise <= 0.0 {
            return Err(Error::InvalidArgument("noise must be positive".into()));
        }
        let favored = (self.favored_share * self.rows as f64).round() as usize;
        if favored < 2 || self.rows - favored < 2 {
            return Err(Error::InvalidArgument(format!(
                "favored share {} leaves a group with fewer than 2 of {} rows",
                self.favored_share, self.rows
            )));
        }
        Ok(())
    }
}

/// Per-row provenance recorded alongside a generated dataset. Never fed to
/// models; used to score detection against construction-time truth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Latent grant intent drawn from the group base rate.
    pub latent_class: Vec<u8>,
    /// Deserved label before any bias injection (the latent intent).
    pub true_label: Vec<u8>,
    /// Rows whose granted label was withheld by the biased labeler.
    pub bias_injected: Vec<bool>,
}

/// A generated dataset with its provenance.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub data: Dataset,
    pub truth: GroundTruth,
}

/// Generates a biased dataset per `spec`. Deterministic in the spec.
///
/// Construction order: group membership (exact rounded counts per
/// attribute), latent grant intent (Bernoulli at the group's base rate,
/// averaged across attributes), features (Gaussian blob around the latent
/// class's mean, clipped to `[0,1]`), ground-truth label (the latent
/// intent itself), then label-bias injection (per attribute, a rounded
/// β-fraction of deprived currently-granted rows is flipped to rejected
/// and recorded).
pub fn gen_biased(spec: &FixtureSpec) -> Result<Fixture> {
    spec.validate()?;
    let n = spec.rows;
    let m = spec.features;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // group membership per attribute: exact rounded counts
    let favored_count = (spec.favored_share * n as f64).round() as usize;
    let mut membership: Vec<Vec<u8>> = Vec::with_capacity(spec.sensitive_count);
    for _ in 0..spec.sensitive_count {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut s = vec![0u8; n];
        for &i in order.iter().take(favored_count) {
            s[i] = 1;
        }
        membership.push(s);
    }

    // latent grant intent at the (mean) group rate
    let latent_class: Vec<u8> = (0..n)
        .map(|i| {
            let p: f64 = membership
                .iter()
                .map(|s| {
                    if s[i] == 1 {
                        spec.favored_rate
                    } else {
                        spec.deprived_rate
                    }
                })
                .sum::<f64>()
                / spec.sensitive_count as f64;
            u8::from(rng.random::<f64>() < p)
        })
        .collect();

    // features: per-class Gaussian blobs clipped to the unit box
    let half = spec.class_separation / 2.0;
    let blob = |c: u8| {
        Normal::new(if c == 1 { 0.5 + half } else { 0.5 - half }, spec.noise)
            .expect("noise validated positive")
    };
    let dist = [blob(0), blob(1)];
    let mut xs = vec![0.0f64; n * m];
    for i in 0..n {
        let d = &dist[latent_class[i] as usize];
        for j in 0..m {
            xs[i * m + j] = d.sample(&mut rng).clamp(0.0, 1.0);
        }
    }

    // The pre-injection label IS the latent intent: features are evidence
    // for it, not its definition. Because both blobs share a covariance,
    // the optimal feature-only decision rule is linear (threshold on the
    // mean feature), but realized labels keep irreducible noise — no
    // feature pattern explains them completely, which is what lets a
    // fitted model's sensitive coefficient carry the group gap.
    let true_label: Vec<u8> = latent_class.clone();

    // label bias: per attribute, withhold the grant from a β-fraction of
    // deprived rows whose ground truth is a grant
    let mut labels = true_label.clone();
    let mut bias_injected = vec![false; n];
    for s in &membership {
        let candidates: Vec<usize> = (0..n).filter(|&i| s[i] == 0 && labels[i] == 1).collect();
        let k = (spec.bias_rate * candidates.len() as f64).round() as usize;
        for pick in rand::seq::index::sample(&mut rng, candidates.len(), k) {
            labels[candidates[pick]] = 0;
            bias_injected[candidates[pick]] = true;
        }
    }

    // assemble: sensitive columns first, then features
    let mut names: Vec<String> = (1..=spec.sensitive_count)
        .map(|a| format!("s{a}"))
        .collect();
    names.extend((1..=m).map(|j| format!("x{j}")));
    let sensitive_names: Vec<String> = names[..spec.sensitive_count].to_vec();
    let width = spec.sensitive_count + m;
    let mut features = Vec::with_capacity(n * width);
    for i in 0..n {
        for s in &membership {
            features.push(f64::from(s[i]));
        }
        features.extend_from_slice(&xs[i * m..(i + 1) * m]);
    }
    let data = Dataset::from_parts(names, &sensitive_names, "y", features, labels)?;
    Ok(Fixture {
        data,
        truth: GroundTruth {
            latent_class,
            true_label,
            bias_injected,
        },
    })
}

/// Brute-force reference solver for the rebalancing removal counts.
///
/// Scans every deprived-rejected removal count `b`, pairing it with the
/// two favored-granted counts that keep the groups' share ratio within
/// rounding, and returns the pair minimizing the post-removal grant-rate
/// gap; ties prefer the smaller share-ratio residual, then fewer total
/// removals, then the smaller pair. Plain floating-point arithmetic
/// throughout — an independent route from the analytic solver it checks.
pub fn oracle_removals(fg: u64, fr: u64, dg: u64, dr: u64) -> (u64, u64) {
    let f_tot = fg + fr;
    let d_tot = dg + dr;
    if f_tot == 0 || d_tot == 0 {
        return (0, 0);
    }
    let mut best: Option<(f64, u64, u64, u64, u64)> = None;
    for b in 0..=dr {
        let exact = f_tot * b; // components ≤ 5,000 ⇒ far below u64 limits
        let floor = exact / d_tot;
        let ceil = floor + u64::from(exact % d_tot != 0);
        let mut pair = [Some(floor), if ceil == floor { None } else { Some(ceil) }];
        for slot in &mut pair {
            if slot.is_some_and(|a| a > fg) {
                *slot = None;
            }
        }
        for a in pair.into_iter().flatten() {
            if f_tot - a == 0 || d_tot - b == 0 {
                continue;
            }
            let fav = (fg - a) as f64 / (f_tot - a) as f64;
            let dep = dg as f64 / (d_tot - b) as f64;
            let gap = (fav - dep).abs();
            let residual = (a * d_tot).abs_diff(b * f_tot);
            let candidate = (gap, residual, a + b, b, a);
            let better = match &best {
                None => true,
                Some(cur) => {
                    (candidate.0 < cur.0)
                        || (candidate.0 == cur.0
                            && (candidate.1, candidate.2, candidate.3, candidate.4)
                                < (cur.1, cur.2, cur.3, cur.4))
                }
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    best.map_or((0, 0), |(_, _, _, b, a)| (a, b))
}
