//! Grant-rate rebalancing and label correction.
//!
//! Debiasing transforms a training set in three moves, all driven by the
//! ranked bias list:
//!
//! 1. **rebalance** — remove the most-biased favored-granted and
//!    deprived-rejected rows so both groups end up with (as near as
//!    integers allow) equal grant rates, while preserving each group's
//!    share of the data ([`compute_removals`] finds how many of each);
//! 2. **correct labels** — drop favored-rejected and deprived-granted rows
//!    whose combined bias score exceeds 1 (their labels flipped under the
//!    counterfactual probe, the strongest evidence of labeling bias), and
//!    re-admit removed deprived-rejected rows whose predicted label flipped
//!    as *granted* rows — the grant they would have received without the
//!    sensitive attribute;
//! 3. **refill** — synthesize replacements so both corrected cells return
//!    to their post-rebalance sizes, keeping the grant rates balanced.
//!
//! The result is a same-shape dataset whose grant-rate gap is bounded by
//! one part in the smaller group.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cblist::{self, CbList, CbListConfig};
use crate::dataset::{Dataset, Subgroup, SubgroupCounts};
use crate::error::{Error, Result};
use crate::synth::{self, SynthConfig};

/// How many rows to remove from each over-represented cell, plus the
/// continuous solution they were rounded from.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RemovalPlan {
    /// Favored-granted rows to remove.
    pub fg_remove: u64,
    /// Deprived-rejected rows to remove.
    pub dr_remove: u64,
    /// Cell sizes the plan was computed for.
    pub counts_before: SubgroupCounts,
    /// Real-valued deprived-rejected removal count solving the rate
    /// equation exactly, before integer rounding; absent when the deprived
    /// group already grants at least as often as the favored group.
    pub continuous_root: Option<f64>,
}

impl RemovalPlan {
    /// Cell sizes after applying the plan.
    pub fn counts_after(&self) -> SubgroupCounts {
        SubgroupCounts {
            fg: self.counts_before.fg - self.fg_remove,
            fr: self.counts_before.fr,
            dg: self.counts_before.dg,
            dr: self.counts_before.dr - self.dr_remove,
        }
    }

    /// Grant-rate gap once the plan is applied (`None` if a group empties).
    pub fn achieved_gap(&self) -> Option<f64> {
        self.counts_after().grant_rate_gap()
    }
}

/// What the full debias pass did, cell by cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DebiasReport {
    pub removal_plan: RemovalPlan,
    /// Favored-rejected rows dropped for combined score > 1.
    pub fr_removed: u64,
    /// Deprived-granted rows dropped for combined score > 1.
    pub dg_removed: u64,
    /// Removed deprived-rejected rows re-admitted as granted.
    pub dr_flipped_to_dg: u64,
    /// Deprived-granted rows synthesized to refill the cell.
    pub synthesized_dg: u64,
    /// Favored-rejected rows synthesized to refill the cell.
    pub synthesized_fr: u64,
    /// Cell sizes of the final dataset.
    pub final_counts: SubgroupCounts,
}

/// Tuning for the full debias pass.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DebiasConfig {
    /// Out-of-fold scoring settings for the bias list.
    pub cblist: CbListConfig,
    /// Synthesis settings; the seed is used for the deprived-granted
    /// refill and `seed + 1` for the favored-rejected refill.
    pub synth: SynthConfig,
}

/// Removal counts equalizing grant rates while preserving group shares.
///
/// With cells `(FG, FR, DG, DR)`, removing `a` favored-granted and `b`
/// deprived-rejected rows equalizes rates when
/// `(FG−a)/(FG−a+FR) = DG/(DG+DR−b)`; keeping each group's share of the
/// data ties the two counts together as `a = r·b` with
/// `r = (FG+FR)/(DG+DR)`. Substituting gives the quadratic
/// `r·b² − (FG + r·DR)·b + (FG·DR − DG·FR) = 0`, whose feasible root
/// (`0 ≤ b ≤ DR`, `0 ≤ r·b ≤ FG`) is reported as [`RemovalPlan::continuous_root`].
///
/// The returned integer pair minimizes the post-removal grant-rate gap
/// over all pairs that respect the share ratio within rounding
/// (`a ∈ {⌊r·b⌋, ⌈r·b⌉}`), breaking gap ties by smaller share-ratio
/// residual `|a·(DG+DR) − b·(FG+FR)|`, then fewer total removals. Gap
/// comparisons use exact integer cross-multiplication, so the result is
/// reproducible across platforms.
///
/// If the deprived group already grants at least as often as the favored
/// group, there is nothing to remove: the zero plan is returned, with a
/// warning when the inversion is strict.
pub fn compute_removals(counts: SubgroupCounts) -> Result<RemovalPlan> {
    let SubgroupCounts { fg, fr, dg, dr } = counts;
    let f_tot = fg + fr;
    let d_tot = dg + dr;
    if f_tot == 0 || d_tot == 0 {
        return Err(Error::InvalidArgument(format!(
            "both groups need at least one row to rebalance \
             (favored {f_tot}, deprived {d_tot})"
        )));
    }

    // favored rate vs deprived rate, compared exactly: fg/f_tot ? dg/d_tot
    let fav_cross = u128::from(fg) * u128::from(d_tot);
    let dep_cross = u128::from(dg) * u128::from(f_tot);
    if fav_cross <= dep_cross {
        if fav_cross < dep_cross {
            log::warn!(
                "deprived grant rate exceeds favored ({dg}/{d_tot} > {fg}/{f_tot}); \
                 nothing to remove"
            );
        }
        return Ok(RemovalPlan {
            fg_remove: 0,
            dr_remove: 0,
            counts_before: counts,
            continuous_root: if fav_cross == dep_cross {
                Some(0.0)
            } else {
                None
            },
        });
    }

    // Continuous solution of the rate equation along a = r·b.
    let r = f_tot as f64 / d_tot as f64;
    let lin = fg as f64 + r * dr as f64;
    let cons = (fg * dr) as f64 - (dg * fr) as f64;
    // = (fg − r·dr)² + 4·r·dg·fr, hence never negative
    let disc = (lin * lin - 4.0 * r * cons).max(0.0);
    let root_low = (lin - disc.sqrt()) / (2.0 * r);
    let root_high = (lin + disc.sqrt()) / (2.0 * r);
    let eps = 1e-9 * (1.0 + dr as f64);
    let feasible =
        |x: f64| x >= -eps && x <= dr as f64 + eps && r * x >= -eps && r * x <= fg as f64 + eps;
    let root = if feasible(root_low) {
        root_low
    } else if feasible(root_high) {
        root_high
    } else {
        return Err(Error::InfeasibleRebalance {
            root_low,
            root_high,
            max_dr: dr,
            max_fg: fg,
        });
    };

    // Integer search along the share ratio: for each b, the only two
    // integers a that respect a = r·b within rounding are ⌊r·b⌋ and ⌈r·b⌉.
    // Gap comparison: |(fg−a)/f' − dg/d'| as exact cross-multiplied i128.
    let mut best: Option<(u128, u128, u128, u64, u64)> = None; // gap as (num, den) + tie keys
    for b in 0..=dr {
        let prod = u128::from(f_tot) * u128::from(b);
        let a_floor = (prod / u128::from(d_tot)) as u64;
        let exact = prod % u128::from(d_tot) == 0;
        let mut candidates = [Some(a_floor), if exact { None } else { Some(a_floor + 1) }];
        if a_floor > fg {
            candidates = [None, None];
        } else if a_floor + 1 > fg {
            candidates[1] = None;
        }
        for a in candidates.into_iter().flatten() {
            let f_after = f_tot - a;
            let d_after = d_tot - b;
            if f_after == 0 || d_after == 0 {
                continue;
            }
            let gap_num = (i128::from(fg - a) * i128::from(d_after)
                - i128::from(dg) * i128::from(f_after))
            .unsigned_abs();
            let gap_den = u128::from(f_after) * u128::from(d_after);
            let residual = (i128::from(a) * i128::from(d_tot) - i128::from(b) * i128::from(f_tot))
                .unsigned_abs();
            let beats = match &best {
                None => true,
                Some((bn, bd, bres, bb, ba)) => {
                    // gap_num/gap_den vs bn/bd, exactly
                    match (gap_num * bd).cmp(&(bn * gap_den)) {
                        std::cmp::Ordering::Less => true,
                        std::cmp::Ordering::Greater => false,
                        std::cmp::Ordering::Equal => {
                            (residual, u128::from(a) + u128::from(b), b, a)
                                < (*bres, u128::from(*ba) + u128::from(*bb), *bb, *ba)
                        }
                    }
                }
            };
            if beats {
                best = Some((gap_num, gap_den, residual, b, a));
            }
        }
    }
    let (_, _, _, b, a) = best.expect("b = 0, a = 0 is always a candidate");
    Ok(RemovalPlan {
        fg_remove: a,
        dr_remove: b,
        counts_before: counts,
        continuous_root: Some(root),
    })
}

/// Applies a removal plan: drops the `fg_remove` highest-scored
/// favored-granted rows and the `dr_remove` highest-scored
/// deprived-rejected rows.
///
/// Returns `(rebalanced, removed_dr, removed_fg)`; the removed
/// deprived-rejected rows keep their ids and scores so label correction
/// can re-admit them later.
pub fn rebalance(
    train: &Dataset,
    cblist: &CbList,
    plan: &RemovalPlan,
) -> Result<(Dataset, Dataset, Dataset)> {
    let index_of: HashMap<u64, usize> = (0..train.len()).map(|i| (train.row_id(i), i)).collect();
    let take = |cell: Subgroup, count: u64| -> Result<Vec<usize>> {
        let ranked: Vec<usize> = cblist
            .ranked_ids(cell)
            .into_iter()
            .filter_map(|id| index_of.get(&id).copied())
            .collect();
        if (ranked.len() as u64) < count {
            return Err(Error::InvalidArgument(format!(
                "plan removes {count} {} rows but only {} are present",
                cell.code(),
                ranked.len()
            )));
        }
        Ok(ranked[..count as usize].to_vec())
    };
    let removed_fg = take(Subgroup::FavoredGranted, plan.fg_remove)?;
    let removed_dr = take(Subgroup::DeprivedRejected, plan.dr_remove)?;
    let removed: HashSet<usize> = removed_fg.iter().chain(&removed_dr).copied().collect();
    let kept: Vec<usize> = (0..train.len()).filter(|i| !removed.contains(i)).collect();
    Ok((
        train.subset(&kept),
        train.subset(&removed_dr),
        train.subset(&removed_fg),
    ))
}

/// Removes labeling-bias suspects and refills both corrected cells.
///
/// * Every favored-rejected and deprived-granted row with combined score
///   above 1 (i.e. its predicted label flipped under the counterfactual
///   probe) is removed.
/// * Removed deprived-rejected rows whose predicted label flipped are
///   re-admitted with label 1 — highest scores first, capped at the number
///   of deprived-granted rows just removed — keeping their original
///   features and ids.
/// * Any remaining deficit in the deprived-granted cell, and the whole
///   favored-rejected deficit, is synthesized from the surviving rows of
///   the respective cell (favored-rejected refills use `seed + 1` so the
///   two cells draw independent streams).
///
/// Both corrected cells return to their post-rebalance sizes, so the
/// grant-rate balance achieved by [`rebalance`] is preserved.
pub fn correct_labels(
    rebalanced: &Dataset,
    cblist: &CbList,
    removed_dr: &Dataset,
    plan: &RemovalPlan,
    synth_cfg: &SynthConfig,
) -> Result<(Dataset, DebiasReport)> {
    let score_of: HashMap<u64, &crate::cblist::BiasScore> =
        cblist.entries().iter().map(|e| (e.row_id, e)).collect();
    let lookup = |id: u64| -> Result<&crate::cblist::BiasScore> {
        score_of.get(&id).copied().ok_or_else(|| {
            Error::InvalidArgument(format!("row {id} has no bias score; stale list?"))
        })
    };

    // 1. drop FR/DG rows whose combined score exceeds 1
    let mut kept = Vec::with_capacity(rebalanced.len());
    let mut fr_removed = 0u64;
    let mut dg_removed = 0u64;
    for i in 0..rebalanced.len() {
        let score = lookup(rebalanced.row_id(i))?;
        let biased = score.cbtest > 1.0;
        match score.subgroup {
            Subgroup::FavoredRejected if biased => fr_removed += 1,
            Subgroup::DeprivedGranted if biased => dg_removed += 1,
            _ => kept.push(i),
        }
    }
    let mut out = rebalanced.subset(&kept);

    // 2. re-admit flipped deprived-rejected rows as granted, best first
    let mut candidates: Vec<usize> = (0..removed_dr.len())
        .filter(|&i| {
            score_of
                .get(&removed_dr.row_id(i))
                .is_some_and(|s| s.cftest == 1)
        })
        .collect();
    candidates.sort_by(|&a, &b| {
        let (sa, sb) = (
            score_of[&removed_dr.row_id(a)],
            score_of[&removed_dr.row_id(b)],
        );
        sb.cbtest
            .partial_cmp(&sa.cbtest)
            .expect("bias scores are never NaN")
            .then(sa.row_id.cmp(&sb.row_id))
    });
    candidates.truncate(dg_removed as usize);
    let mut flipped_ids = Vec::with_capacity(candidates.len());
    for &i in &candidates {
        out.push_row(removed_dr.row(i), 1, removed_dr.row_id(i), false);
        flipped_ids.push(removed_dr.row_id(i));
    }
    let flipped = candidates.len() as u64;

    // 3. synthesize the remaining deficits from the surviving cells
    let next_id = out.max_row_id().max(removed_dr.max_row_id()) + 1;
    let dg_pool: Vec<usize> = (0..out.len())
        .filter(|&i| {
            let id = out.row_id(i);
            flipped_ids.contains(&id)
                || score_of
                    .get(&id)
                    .is_some_and(|s| s.subgroup == Subgroup::DeprivedGranted)
        })
        .collect();
    let fr_pool: Vec<usize> = (0..out.len())
        .filter(|&i| {
            score_of
                .get(&out.row_id(i))
                .is_some_and(|s| s.subgroup == Subgroup::FavoredRejected)
        })
        .collect();
    let new_dg = synth::synthesize(
        &out.subset(&dg_pool),
        Subgroup::DeprivedGranted,
        (dg_removed - flipped) as usize,
        synth_cfg,
    )?;
    let new_fr = synth::synthesize(
        &out.subset(&fr_pool),
        Subgroup::FavoredRejected,
        fr_removed as usize,
        &SynthConfig {
            seed: synth_cfg.seed + 1,
            ..*synth_cfg
        },
    )?;
    let synthesized_dg = new_dg.len() as u64;
    let synthesized_fr = new_fr.len() as u64;
    let mut id = next_id;
    for row in &new_dg {
        out.push_row(row, 1, id, true);
        id += 1;
    }
    for row in &new_fr {
        out.push_row(row, 0, id, true);
        id += 1;
    }

    let final_counts = out.partition(cblist.sensitive())?.counts();
    let report = DebiasReport {
        removal_plan: *plan,
        fr_removed,
        dg_removed,
        dr_flipped_to_dg: flipped,
        synthesized_dg,
        synthesized_fr,
        final_counts,
    };
    Ok((out, report))
}

/// Full debias pass for one sensitive column: score, rebalance, correct.
///
/// Returns the corrected dataset, the bias list it was driven by (for
/// audit export), and the cell-by-cell report.
pub fn run(
    train: &Dataset,
    s: &str,
    cfg: &DebiasConfig,
) -> Result<(Dataset, CbList, DebiasReport)> {
    let cblist = cblist::build_cblist(train, s, &cfg.cblist)?;
    let plan = compute_removals(train.partition(s)?.counts())?;
    let (rebalanced, removed_dr, _removed_fg) = rebalance(train, &cblist, &plan)?;
    let (corrected, report) = correct_labels(&rebalanced, &cblist, &removed_dr, &plan, &cfg.synth)?;
    Ok((corrected, cblist, report))
}
