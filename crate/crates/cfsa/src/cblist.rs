//! Per-row counterfactual bias scoring.
//!
//! For every training row we ask a probe model two questions: what
//! probability does it assign the row, and what probability does it assign
//! the row's *counterfactual twin* — the identical row with only the
//! sensitive attribute flipped. Three scores condense the answers:
//!
//! * **flip score** (`cftest`): 1 when the predicted label changes across
//!   the flip (both probabilities compared against 0.5, strictly), else 0;
//! * **distance score** (`cdtest`): `|p − p′|`, how far the probability
//!   moved;
//! * **combined score** (`cbtest`): the distance score, shifted up by 1
//!   when the label flipped, so every label-flipping row outranks every
//!   non-flipping row.
//!
//! Scores are produced out-of-fold: rows are scored by a model that never
//! saw them during training, either exact leave-one-out (small data) or
//! seeded K-fold. The result is a [`CbList`] — all rows ranked from most
//! to least biased.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, ModelKind, TrainConfig};
use crate::dataset::{Dataset, Subgroup};
use crate::error::{Error, Result};

/// Largest dataset for which exact leave-one-out scoring is supported;
/// larger data must use K-fold scoring.
pub const LOO_LIMIT: usize = 2000;

/// 1 when the predicted label flips when the sensitive attribute does.
/// Probabilities compare against 0.5 strictly, so an exact 0.5 counts as
/// the negative side.
pub fn cftest(p: f64, p_twin: f64) -> u8 {
    u8::from((p > 0.5) != (p_twin > 0.5))
}

/// Absolute probability movement across the flip.
pub fn cdtest(p: f64, p_twin: f64) -> f64 {
    (p - p_twin).abs()
}

/// Combined score: distance plus 1 when the label flips. Label-flipping
/// rows therefore always rank above non-flipping rows.
pub fn cbtest(p: f64, p_twin: f64) -> f64 {
    if cftest(p, p_twin) == 1 {
        1.0 + cdtest(p, p_twin)
    } else {
        cdtest(p, p_twin)
    }
}

/// One row's counterfactual scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasScore {
    pub row_id: u64,
    pub subgroup: Subgroup,
    pub cftest: u8,
    pub cdtest: f64,
    pub cbtest: f64,
}

/// How scores are produced.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CbListConfig {
    /// Number of scoring folds. Equal to the row count means exact
    /// leave-one-out, which is only supported up to [`LOO_LIMIT`] rows.
    pub folds: usize,
    /// Seed for the fold assignment shuffle.
    pub seed: u64,
    /// Probe-model hyper-parameters.
    pub train: TrainConfig,
}

impl Default for CbListConfig {
    fn default() -> Self {
        CbListConfig {
            folds: 5,
            seed: 0,
            train: TrainConfig::default(),
        }
    }
}

/// All rows of a dataset ranked by combined bias score, descending; ties
/// broken by ascending row id.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CbList {
    entries: Vec<BiasScore>,
    folds: usize,
    seed: u64,
    sensitive: String,
}

impl CbList {
    /// Assembles a list from raw scores (they are re-sorted), recording the
    /// sensitive column they were computed against.
    pub fn from_entries(
        mut entries: Vec<BiasScore>,
        folds: usize,
        seed: u64,
        sensitive: impl Into<String>,
    ) -> CbList {
        sort_entries(&mut entries);
        CbList {
            entries,
            folds,
            seed,
            sensitive: sensitive.into(),
        }
    }

    /// Ranked scores, most biased first.
    pub fn entries(&self) -> &[BiasScore] {
        &self.entries
    }

    /// Name of the sensitive column the scores were computed against.
    pub fn sensitive(&self) -> &str {
        &self.sensitive
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Score of a specific row, if it was scored.
    pub fn get(&self, row_id: u64) -> Option<&BiasScore> {
        self.entries.iter().find(|e| e.row_id == row_id)
    }

    /// Ranked row ids of one subgroup, most biased first.
    pub fn ranked_ids(&self, subgroup: Subgroup) -> Vec<u64> {
        self.entries
            .iter()
            .filter(|e| e.subgroup == subgroup)
            .map(|e| e.row_id)
            .collect()
    }

    /// Writes the ranked list as CSV: `row_id,subgroup,cftest,cdtest,cbtest`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row_id", "subgroup", "cftest", "cdtest", "cbtest"])
            .map_err(|e| Error::Data(e.to_string()))?;
        for e in &self.entries {
            w.write_record(&[
                e.row_id.to_string(),
                e.subgroup.code().to_string(),
                e.cftest.to_string(),
                e.cdtest.to_string(),
                e.cbtest.to_string(),
            ])
            .map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the ranked bias list for sensitive column `s` using out-of-fold
/// probe models.
///
/// Rows are dealt into `cfg.folds` seeded folds; each fold's rows are
/// scored by a model fitted on the remaining folds. `folds == n` requests
/// exact leave-one-out. Fold models are fitted in parallel; the result does
/// not depend on scheduling.
pub fn build_cblist(train: &Dataset, s: &str, cfg: &CbListConfig) -> Result<CbList> {
    let n = train.len();
    let s_col = train.sensitive_index(s)?;
    if cfg.folds < 2 || cfg.folds > n {
        return Err(Error::InvalidArgument(format!(
            "fold count must lie in 2..={n} for {n} rows, got {}",
            cfg.folds
        )));
    }
    if cfg.folds == n && n > LOO_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "leave-one-out scoring is supported up to {LOO_LIMIT} rows ({n} given); \
             use K-fold scoring instead"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut crate::rng::seeded(cfg.seed, crate::rng::Stream::Folds));

    // Contiguous chunks of the shuffled order form the folds; boundaries
    // differ by at most one row.
    let bounds: Vec<usize> = (0..=cfg.folds).map(|f| f * n / cfg.folds).collect();

    let fold_scores: Vec<Result<Vec<BiasScore>>> = (0..cfg.folds)
        .into_par_iter()
        .map(|f| {
            let held_out = &order[bounds[f]..bounds[f + 1]];
            let rest: Vec<usize> = order[..bounds[f]]
                .iter()
                .chain(&order[bounds[f + 1]..])
                .copied()
                .collect();
            let fit_set = train.subset(&rest);
            let model = classifier::fit(&fit_set, ModelKind::Logistic, &cfg.train).map_err(
                |e| match e {
                    Error::DegenerateTraining(_) => Error::DegenerateFold {
                        fold: f,
                        folds: cfg.folds,
                    },
                    other => other,
                },
            )?;
            let mut twin = vec![0.0f64; train.width()];
            let scores = held_out
                .iter()
                .map(|&i| {
                    let row = train.row(i);
                    twin.copy_from_slice(row);
                    twin[s_col] = 1.0 - twin[s_col];
                    let p = model.predict_proba(row).1;
                    let p_twin = model.predict_proba(&twin).1;
                    BiasScore {
                        row_id: train.row_id(i),
                        subgroup: Subgroup::of(train.sensitive_value(i, s_col), train.label(i)),
                        cftest: cftest(p, p_twin),
                        cdtest: cdtest(p, p_twin),
                        cbtest: cbtest(p, p_twin),
                    }
                })
                .collect();
            Ok(scores)
        })
        .collect();

    let mut entries = Vec::with_capacity(n);
    for fold in fold_scores {
        entries.extend(fold?);
    }
    Ok(CbList::from_entries(entries, cfg.folds, cfg.seed, s))
}

fn sort_entries(entries: &mut [BiasScore]) {
    entries.sort_by(|a, b| {
        b.cbtest
            .partial_cmp(&a.cbtest)
            .expect("bias scores are never NaN")
            .then(a.row_id.cmp(&b.row_id))
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Data with a deliberately biased label rule so the probe model learns
    /// a strong sensitive coefficient.
    fn biased_set(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let s = f64::from(rng.random::<bool>());
            let x: f64 = rng.random();
            features.extend_from_slice(&[s, x]);
            // favored rows get the benefit of the doubt
            labels.push(u8::from(x + 0.35 * s > 0.6));
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

    #[test]
    fn score_hand_cases() {
        assert_eq!(cftest(0.9, 0.6), 0);
        assert!((cdtest(0.9, 0.6) - 0.3).abs() < 1e-12);
        assert!((cbtest(0.9, 0.6) - 0.3).abs() < 1e-12);

        assert_eq!(cftest(0.55, 0.45), 1);
        assert!((cdtest(0.55, 0.45) - 0.1).abs() < 1e-12);
        assert!((cbtest(0.55, 0.45) - 1.1).abs() < 1e-12);

        // exactly 0.5 is the negative side of the threshold
        assert_eq!(cftest(0.5, 0.5), 0);
        assert_eq!(cftest(0.5, 0.500001), 1);
    }

    proptest! {
        #[test]
        fn flip_rows_always_outrank_non_flip_rows(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            let score = cbtest(p, q);
            prop_assert!((0.0..=2.0).contains(&score));
            if cftest(p, q) == 1 {
                prop_assert!(score >= 1.0);
            } else {
                prop_assert!(score <= 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn list_is_sorted_and_covers_every_row_once() {
        let d = biased_set(90, 4);
        let list = build_cblist(&d, "s", &CbListConfig::default()).unwrap();
        assert_eq!(list.len(), d.len());
        let mut ids: Vec<u64> = list.entries().iter().map(|e| e.row_id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), d.len(), "every row scored exactly once");
        for w in list.entries().windows(2) {
            assert!(
                w[0].cbtest > w[1].cbtest
                    || (w[0].cbtest == w[1].cbtest && w[0].row_id < w[1].row_id)
            );
        }
    }

    #[test]
    fn scoring_is_deterministic() {
        let d = biased_set(60, 8);
        let cfg = CbListConfig::default();
        let a = build_cblist(&d, "s", &cfg).unwrap();
        let b = build_cblist(&d, "s", &cfg).unwrap();
        assert_eq!(a.entries(), b.entries());
        let c = build_cblist(&d, "s", &CbListConfig { seed: 1, ..cfg }).unwrap();
        // different fold assignment is allowed to give different scores
        assert_eq!(c.len(), a.len());
    }

    #[test]
    fn leave_one_out_equals_folds_eq_n() {
        let d = biased_set(24, 2);
        let cfg = CbListConfig {
            folds: 24,
            ..Default::default()
        };
        let list = build_cblist(&d, "s", &cfg).unwrap();
        assert_eq!(list.len(), 24);
        assert_eq!(list.folds(), 24);
    }

    #[test]
    fn loo_is_capped() {
        let d = biased_set(30, 2);
        let err = build_cblist(
            &d,
            "s",
            &CbListConfig {
                folds: 31,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn degenerate_fold_is_reported() {
        // 3 rows, one positive: leave-one-out on the positive row trains single-class
        let d = Dataset::from_parts(
            vec!["s".into(), "x".into()],
            &["s".to_string()],
            "y",
            vec![0.0, 0.2, 1.0, 0.8, 0.0, 0.5],
            vec![0, 1, 0],
        )
        .unwrap();
        let err = build_cblist(
            &d,
            "s",
            &CbListConfig {
                folds: 3,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateFold { .. }), "{err}");
    }

    #[test]
    fn constant_sensitive_column_scores_zero_distance() {
        // s is all zeros; the probe model can learn nothing about it, so
        // flipping it must not move any probability.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..40 {
            let x: f64 = rng.random();
            features.extend_from_slice(&[0.0, x]);
            labels.push(u8::from(x > 0.5));
        }
        let d = Dataset::from_parts(
            vec!["s".into(), "x".into()],
            &["s".to_string()],
            "y",
            features,
            labels,
        )
        .unwrap();
        let list = build_cblist(&d, "s", &CbListConfig::default()).unwrap();
        for e in list.entries() {
            assert_eq!(e.cftest, 0);
            assert_eq!(e.cdtest, 0.0);
            assert_eq!(e.cbtest, 0.0);
        }
    }

    #[test]
    fn biased_data_produces_flip_entries() {
        let d = biased_set(200, 12);
        let list = build_cblist(&d, "s", &CbListConfig::default()).unwrap();
        let flips = list.entries().iter().filter(|e| e.cftest == 1).count();
        assert!(flips > 0, "expected at least one label-flipping row");
        // and they sit at the top of the ranking
        assert_eq!(list.entries()[0].cftest, 1);
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let d = biased_set(30, 21);
        let list = build_cblist(&d, "s", &CbListConfig::default()).unwrap();
        let mut buf = Vec::new();
        list.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "row_id,subgroup,cftest,cdtest,cbtest"
        );
        assert_eq!(lines.count(), 30);
    }
}
