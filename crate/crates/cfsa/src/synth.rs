//! Cluster-based synthetic row generation.
//!
//! When label correction removes rows from a subgroup, replacements are
//! generated rather than duplicated so the subgroup keeps its size without
//! collapsing onto existing points. Generation is a three-step process:
//!
//! 1. **cluster** the donor pool with seeded k-means on the non-sensitive
//!    features, so interpolation never mixes unrelated modes of the data;
//! 2. **filter** each cluster by dropping its farthest-from-centroid tail
//!    (outliers make poor interpolation anchors);
//! 3. **synthesize** each new row as a uniform interpolation between a
//!    retained row and one of its nearest retained in-cluster neighbours —
//!    the SMOTE recipe, applied per cluster.
//!
//! Every output row is a convex combination of two donor rows from one
//! cluster, so features stay inside `[0,1]` and the sensitive columns
//! (constant across a donor pool) are preserved exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Subgroup};
use crate::error::{Error, Result};

/// How many nearest retained in-cluster neighbours a donor row may be
/// paired with (fewer if the cluster is smaller).
pub const NEIGHBOR_POOL: usize = 5;

/// Tuning knobs for subgroup synthesis.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Number of k-means clusters. `None` uses ⌈√(pool size / 2)⌉, capped
    /// at the pool size; an explicit value is capped the same way.
    pub k_clusters: Option<usize>,
    /// Fraction of each cluster dropped as farthest-from-centroid outliers
    /// before interpolation. Must lie in `[0, 1)`; every cluster keeps at
    /// least one row.
    pub filter_fraction: f64,
    /// Seed for cluster initialization and donor sampling.
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            k_clusters: None,
            filter_fraction: 0.20,
            seed: 0,
        }
    }
}

/// Default cluster count for a donor pool: ⌈√(n/2)⌉, capped to `[1, n]`.
pub fn default_k(pool_size: usize) -> usize {
    ((pool_size as f64 / 2.0).sqrt().ceil() as usize).clamp(1, pool_size.max(1))
}

/// Generates `n_new` feature vectors from a donor pool of rows that all
/// share one (sensitive value, label) cell.
///
/// Returns full-width rows: sensitive columns are identical across the
/// pool, so interpolation reproduces them exactly; the caller attaches the
/// subgroup's label and fresh row ids. `n_new = 0` yields an empty vector;
/// a pool smaller than two rows cannot anchor interpolation and is an
/// error. Output is a pure function of `(pool, n_new, cfg)`.
pub fn synthesize(
    pool: &Dataset,
    subgroup: Subgroup,
    n_new: usize,
    cfg: &SynthConfig,
) -> Result<Vec<Vec<f64>>> {
    if n_new == 0 {
        return Ok(Vec::new());
    }
    let n = pool.len();
    if n < 2 {
        return Err(Error::SynthesisInfeasible {
            subgroup: subgroup.code().to_string(),
            available: n,
            requested: n_new,
        });
    }
    if !(0.0..1.0).contains(&cfg.filter_fraction) {
        return Err(Error::InvalidArgument(format!(
            "filter fraction must lie in [0,1), got {}",
            cfg.filter_fraction
        )));
    }
    if cfg.k_clusters == Some(0) {
        return Err(Error::InvalidArgument(
            "cluster count must be at least 1".into(),
        ));
    }
    let k = cfg.k_clusters.unwrap_or_else(|| default_k(n)).min(n);

    // Distances are measured on the non-sensitive columns only.
    let dims: Vec<usize> = (0..pool.width())
        .filter(|c| !pool.sensitive_columns().contains(c))
        .collect();
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| dims.iter().map(|&c| pool.row(i)[c]).collect())
        .collect();

    let mut rng = crate::rng::seeded(cfg.seed, crate::rng::Stream::Synth);
    let clustering = kmeans(&points, k, &mut rng);

    // Per-cluster members in ascending pool order, then drop the farthest
    // ⌈filter_fraction·size⌉ from the final centroid (keeping at least 1).
    let mut retained: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (c, members) in cluster_members(&clustering.assignment, k)
        .into_iter()
        .enumerate()
    {
        if members.is_empty() {
            continue;
        }
        let drop =
            ((cfg.filter_fraction * members.len() as f64).ceil() as usize).min(members.len() - 1);
        let mut by_dist: Vec<usize> = members.clone();
        // farthest first; ties keep the earlier row first so it is dropped first
        by_dist.sort_by(|&a, &b| {
            dist2(&points[b], &clustering.centers[c])
                .partial_cmp(&dist2(&points[a], &clustering.centers[c]))
                .expect("distances are finite")
                .then(a.cmp(&b))
        });
        let dropped: std::collections::BTreeSet<usize> = by_dist.into_iter().take(drop).collect();
        retained[c] = members
            .into_iter()
            .filter(|i| !dropped.contains(i))
            .collect();
    }

    let allocation = largest_remainder(
        &retained.iter().map(|r| r.len() as f64).collect::<Vec<_>>(),
        n_new,
    );

    let m = pool.width();
    let mut out = Vec::with_capacity(n_new);
    for (c, &count) in allocation.iter().enumerate() {
        let rows = &retained[c];
        for _ in 0..count {
            let a = rows[rng.random_range(0..rows.len())];
            // a's nearest retained in-cluster neighbours (itself if alone)
            let mut others: Vec<usize> = rows.iter().copied().filter(|&i| i != a).collect();
            others.sort_by(|&x, &y| {
                dist2(&points[x], &points[a])
                    .partial_cmp(&dist2(&points[y], &points[a]))
                    .expect("distances are finite")
                    .then(x.cmp(&y))
            });
            others.truncate(NEIGHBOR_POOL);
            let b = if others.is_empty() {
                a
            } else {
                others[rng.random_range(0..others.len())]
            };
            let u: f64 = rng.random();
            let row_a = pool.row(a);
            let row_b = pool.row(b);
            let mut row = Vec::with_capacity(m);
            for j in 0..m {
                row.push((row_a[j] + u * (row_b[j] - row_a[j])).clamp(0.0, 1.0));
            }
            out.push(row);
        }
    }
    Ok(out)
}

/// Splits `n_new` across clusters proportionally to `weights` with
/// largest-remainder rounding; remainder ties go to the lower index.
fn largest_remainder(weights: &[f64], n_new: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    assert!(total > 0.0, "at least one cluster must retain rows");
    let quotas: Vec<f64> = weights.iter().map(|w| n_new as f64 * w / total).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = alloc.iter().sum();
    let mut by_frac: Vec<usize> = (0..weights.len()).collect();
    by_frac.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa)
            .expect("quotas are finite")
            .then(a.cmp(&b))
    });
    for &c in by_frac.iter().take(n_new - assigned) {
        alloc[c] += 1;
    }
    alloc
}

struct Clustering {
    centers: Vec<Vec<f64>>,
    assignment: Vec<usize>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn cluster_members(assignment: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        members[c].push(i);
    }
    members
}

/// Seeded k-means: k-means++ initialization, Lloyd iterations capped at
/// 100, convergence when no centroid moves more than 1e-6, empty clusters
/// re-seeded from the point farthest from its current centroid.
fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Clustering {
    let n = points.len();
    debug_assert!(k >= 1 && k <= n);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].clone());
    while centers.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| {
                centers
                    .iter()
                    .map(|c| dist2(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // all points coincide with existing centers; any choice works
            rng.random_range(0..n)
        };
        centers.push(points[next].clone());
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..100 {
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assignment[i] = best;
        }
        let members = cluster_members(&assignment, k);
        let mut moved: f64 = 0.0;
        for (c, m) in members.iter().enumerate() {
            if m.is_empty() {
                // re-seed from the point farthest from its current centroid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        dist2(&points[a], &centers[assignment[a]])
                            .partial_cmp(&dist2(&points[b], &centers[assignment[b]]))
                            .expect("distances are finite")
                            .then(b.cmp(&a))
                    })
                    .expect("n >= 1");
                moved = moved.max(dist2(&centers[c], &points[far]).sqrt());
                centers[c] = points[far].clone();
                continue;
            }
            let dims = centers[c].len();
            let mut mean = vec![0.0; dims];
            for &i in m {
                for (j, v) in points[i].iter().enumerate() {
                    mean[j] += v;
                }
            }
            for v in &mut mean {
                *v /= m.len() as f64;
            }
            moved = moved.max(dist2(&centers[c], &mean).sqrt());
            centers[c] = mean;
        }
        if moved < 1e-6 {
            break;
        }
    }
    // final assignment against the converged centers
    for (i, p) in points.iter().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, center) in centers.iter().enumerate() {
            let d = dist2(p, center);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignment[i] = best;
    }
    Clustering {
        centers,
        assignment,
    }
}
