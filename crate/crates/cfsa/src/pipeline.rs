//! End-to-end orchestration: run configuration, the full mitigation run,
//! ensemble-weight sweeps, training-data audits, and report files.
//!
//! Everything here is a pure function of (configuration, input CSV): the
//! master seed fans out to per-stage seeds, so two runs with the same
//! config produce byte-identical reports except for the `timings` field.
//! Report files are written atomically (temp file in the target directory,
//! then rename), and a failed multi-file write removes the files it had
//! already placed, so a crashed run never leaves a partial report behind.
//!
//! Artifact inventory of a `run`:
//!
//! * `run_report.json` — config echo, debias accounting, per-model
//!   metrics, trade-off cells, timings;
//! * `cells.csv` — one row per (attribute × fairness × performance) cell;
//! * `model_metrics.csv` — flat per-model metric table;
//! * `baseline_samples.csv` — every mutation draw behind the baselines;
//! * `cblist_<attr>.csv` — the ranked bias scores per attribute.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cblist::{CbList, CbListConfig};
use crate::classifier::{self, ModelKind, TrainConfig};
use crate::dataset::{self, Dataset, Schema, SummaryStats};
use crate::debias::{self, DebiasConfig, DebiasReport};
use crate::ensemble::{self, EnsembleSpec};
use crate::error::{Error, Result};
use crate::fixtures::{Fixture, FixtureSpec};
use crate::metrics::{FairnessMetric, MetricValue, PerformanceMetric};
use crate::synth::SynthConfig;
use crate::tradeoff::{self, Region, TradeoffBaseline};

fn default_split_fraction() -> f64 {
    0.7
}

fn default_folds() -> usize {
    5
}

fn default_repeats() -> usize {
    50
}

fn default_filter_fraction() -> f64 {
    SynthConfig::default().filter_fraction
}

fn default_fairness_metrics() -> Vec<FairnessMetric> {
    FairnessMetric::ALL.to_vec()
}

fn default_performance_metrics() -> Vec<PerformanceMetric> {
    PerformanceMetric::ALL.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("cfsa-out")
}

/// A complete, reproducible run declaration.
///
/// Loaded from TOML (or JSON, chosen by file extension). Every field except
/// `dataset`, `schema` and `seed` has a default; [`RunConfig::resolved`]
/// fills the context-dependent ones (sensitive attributes from the schema,
/// candidate models from `train`, default ensemble weights) so reports can
/// echo the exact configuration that ran.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Input CSV path.
    pub dataset: PathBuf,
    /// Sensitive attributes to mitigate. Default: every attribute the
    /// schema declares sensitive.
    #[serde(default)]
    pub sensitive: Vec<String>,
    /// Fraction of rows in the train split.
    #[serde(default = "default_split_fraction")]
    pub split_fraction: f64,
    /// Master seed. Required: runs never draw implicit entropy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Out-of-fold scoring folds for the bias list.
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Cluster count for synthesis; `None` chooses from the pool size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_clusters: Option<usize>,
    /// Outlier fraction dropped per cluster before synthesis.
    #[serde(default = "default_filter_fraction")]
    pub filter_fraction: f64,
    /// Mutation degrees of the trade-off baseline, strictly ascending.
    #[serde(default = "tradeoff::default_degrees")]
    pub degrees: Vec<f64>,
    /// Mutation repeats per degree.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_fairness_metrics")]
    pub fairness_metrics: Vec<FairnessMetric>,
    #[serde(default = "default_performance_metrics")]
    pub performance_metrics: Vec<PerformanceMetric>,
    /// Ensemble weights, fairness members first. Default: (0.6, 0.4) for
    /// one fairness member, uniform otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Directory the report files go to.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Hyper-parameters of the fairness models (and the probe models that
    /// score rows).
    #[serde(default)]
    pub train: TrainConfig,
    /// Candidate hyper-parameters for the performance model; the best by
    /// cross-validated accuracy wins. Default: just `train`.
    #[serde(default)]
    pub candidates: Vec<TrainConfig>,
    /// Column declarations for the input CSV.
    pub schema: Schema,
}

impl RunConfig {
    /// Minimal config for a dataset generated by [`gen_fixture`]: schema
    /// from the spec, everything else defaulted. The seed is set from the
    /// spec so the config is runnable as-is.
    pub fn for_fixture(spec: &FixtureSpec, csv_path: impl Into<PathBuf>) -> RunConfig {
        RunConfig {
            dataset: csv_path.into(),
            sensitive: Vec::new(),
            split_fraction: default_split_fraction(),
            seed: Some(spec.seed),
            folds: default_folds(),
            k_clusters: None,
            filter_fraction: default_filter_fraction(),
            degrees: tradeoff::default_degrees(),
            repeats: default_repeats(),
            fairness_metrics: default_fairness_metrics(),
            performance_metrics: default_performance_metrics(),
            weights: None,
            output: default_output(),
            train: TrainConfig::default(),
            candidates: Vec::new(),
            schema: fixture_schema(spec),
        }
    }

    /// Parses a config file; TOML unless the extension is `.json`.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let raw = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            serde_json::from_str(&raw)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }

    /// Validates and fills the context-dependent defaults, returning the
    /// configuration that reports echo.
    pub fn resolved(mut self) -> Result<RunConfig> {
        self.schema.validate()?;
        if self.sensitive.is_empty() {
            self.sensitive = self
                .schema
                .sensitive
                .iter()
                .map(|a| a.column.clone())
                .collect();
        }
        for attr in &self.sensitive {
            if !self.schema.sensitive.iter().any(|a| a.column == *attr) {
                return Err(Error::Config(format!(
                    "sensitive attribute {attr:?} is not declared sensitive in the schema"
                )));
            }
        }
        if self.seed.is_none() {
            return Err(Error::Config(
                "a master seed is required (set `seed` in the config or pass --seed)".into(),
            ));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split_fraction must lie strictly between 0 and 1, got {}",
                self.split_fraction
            )));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        if !(0.0..1.0).contains(&self.filter_fraction) {
            return Err(Error::Config(format!(
                "filter_fraction must lie in [0, 1), got {}",
                self.filter_fraction
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.degrees.is_empty()
            || self.degrees.windows(2).any(|w| w[0] >= w[1])
            || self.degrees.iter().any(|d| !(0.0..=1.0).contains(d))
        {
            return Err(Error::Config(
                "degrees must be non-empty, strictly ascending and within [0, 1]".into(),
            ));
        }
        if self.fairness_metrics.is_empty() || self.performance_metrics.is_empty() {
            return Err(Error::Config(
                "at least one metric of each kind is required".into(),
            ));
        }
        if self.candidates.is_empty() {
            self.candidates = vec![self.train];
        }
        let members = self.sensitive.len() + 1;
        let weights = self
            .weights
            .get_or_insert_with(|| EnsembleSpec::default_weights(members - 1));
        if weights.len() != members {
            return Err(Error::Config(format!(
                "{} ensemble members need {} weights, got {}",
                members,
                members,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || (weights.iter().sum::<f64>() - 1.0).abs() > ensemble::WEIGHT_SUM_TOLERANCE
        {
            return Err(Error::Config(format!(
                "ensemble weights must be non-negative and sum to 1, got {weights:?}"
            )));
        }
        Ok(self)
    }

    fn master_seed(&self) -> u64 {
        self.seed.expect("resolved config always carries a seed")
    }
}

/// Stage tags for the seed fan-out; distinct per independent random stream.
mod stage {
    pub const SPLIT: u64 = 1;
    pub const CBLIST: u64 = 2;
    pub const SYNTH: u64 = 3;
    pub const SELECT: u64 = 4;
    pub const BASELINE: u64 = 5;
}

/// Derives one stage/item seed from the master seed; a splitmix64-style
/// mix, so neighbouring (stage, item) pairs get unrelated streams.
fn stage_seed(master: u64, stage: u64, item: u64) -> u64 {
    let mut z = master;
    for salt in [stage.wrapping_add(1), item.wrapping_add(1)] {
        z = z.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Metrics of one model on the test split. Fairness cells are reported per
/// sensitive attribute; every cell is either a value or a structured
/// reason why it is undefined on this data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelMetrics {
    /// `unmitigated`, `fair:<attr>`, or `ensemble`.
    pub model: String,
    /// attribute → metric code → value.
    pub fairness: BTreeMap<String, BTreeMap<String, MetricValue>>,
    /// metric code → value.
    pub performance: BTreeMap<String, MetricValue>,
}

/// One (attribute × fairness × performance) trade-off evaluation of the
/// mitigated model against its own mutation baseline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutcomeCell {
    pub attribute: String,
    pub fairness_metric: FairnessMetric,
    pub performance_metric: PerformanceMetric,
    pub bias: MetricValue,
    pub performance: MetricValue,
    /// `None` when either coordinate is undefined on the test split.
    pub region: Option<Region>,
}

impl OutcomeCell {
    pub fn beats_baseline(&self) -> bool {
        self.region.is_some_and(Region::beats_baseline)
    }
}

/// The JSON report of a full run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    /// The exact configuration that ran, defaults resolved.
    pub config: RunConfig,
    /// Debias accounting per sensitive attribute.
    pub debias: BTreeMap<String, DebiasReport>,
    pub model_metrics: Vec<ModelMetrics>,
    pub cells: Vec<OutcomeCell>,
    /// Stage wall-clock times in milliseconds — the only report field that
    /// varies between identically-seeded runs.
    pub timings: BTreeMap<String, f64>,
}

/// A trade-off baseline tagged with the attribute it was built against.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttributeBaseline {
    pub attribute: String,
    pub baseline: TradeoffBaseline,
}

/// Everything a run produces, in memory. [`write_artifacts`] lays the
/// reportable parts out on disk.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub report: RunReport,
    pub cblists: BTreeMap<String, CbList>,
    pub baselines: Vec<AttributeBaseline>,
    pub ensemble: EnsembleSpec,
    pub train: Dataset,
    pub test: Dataset,
}

/// Wraps a fairness metric into a reportable cell: an empty-group error
/// becomes a structured undefined value, anything else propagates.
fn fairness_cell(
    fm: FairnessMetric,
    preds: &[u8],
    labels: &[u8],
    sensitive: &[u8],
) -> Result<MetricValue> {
    match fm.compute(preds, labels, sensitive) {
        Ok(v) => Ok(MetricValue::defined(v)),
        Err(Error::UndefinedMetric { reason, .. }) => Ok(MetricValue::undefined(reason)),
        Err(e) => Err(e),
    }
}

fn model_metrics(
    name: impl Into<String>,
    preds: &[u8],
    test: &Dataset,
    svecs: &BTreeMap<String, Vec<u8>>,
    cfg: &RunConfig,
) -> Result<ModelMetrics> {
    let mut fairness = BTreeMap::new();
    for (attr, svec) in svecs {
        let mut per = BTreeMap::new();
        for fm in &cfg.fairness_metrics {
            per.insert(
                fm.code().to_string(),
                fairness_cell(*fm, preds, test.labels(), svec)?,
            );
        }
        fairness.insert(attr.clone(), per);
    }
    let mut performance = BTreeMap::new();
    for pm in &cfg.performance_metrics {
        performance.insert(pm.code().to_string(), pm.compute(preds, test.labels())?);
    }
    Ok(ModelMetrics {
        model: name.into(),
        fairness,
        performance,
    })
}

/// Scores `preds` against every baseline and classifies the outcome.
fn classify_cells(
    preds: &[u8],
    test: &Dataset,
    svecs: &BTreeMap<String, Vec<u8>>,
    baselines: &[AttributeBaseline],
) -> Result<Vec<OutcomeCell>> {
    baselines
        .iter()
        .map(|ab| {
            let svec = &svecs[&ab.attribute];
            let fm = ab.baseline.fairness_metric;
            let pm = ab.baseline.performance_metric;
            let bias = fairness_cell(fm, preds, test.labels(), svec)?;
            let performance = pm.compute(preds, test.labels())?;
            let region = match (bias.value(), performance.value()) {
                (Some(b), Some(p)) => Some(tradeoff::classify((b, p), &ab.baseline)?.region),
                _ => None,
            };
            Ok(OutcomeCell {
                attribute: ab.attribute.clone(),
                fairness_metric: fm,
                performance_metric: pm,
                bias,
                performance,
                region,
            })
        })
        .collect()
}

/// Logs a stage failure (to standard error via the logger) before
/// propagating it, so a failed run names the stage that broke.
fn at_stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| {
        log::error!("stage {name} failed: {e}");
        e
    })
}

/// Runs the full pipeline:
/// load → split → per-attribute debias → fairness-model fits →
/// performance-model selection → ensemble → metrics → trade-off cells.
pub fn run(cfg: &RunConfig) -> Result<RunArtifacts> {
    let cfg = cfg.clone().resolved()?;
    let seed = cfg.master_seed();
    let mut timings = BTreeMap::new();
    let t_total = Instant::now();

    let t = Instant::now();
    let data = at_stage("load", dataset::load_csv(&cfg.dataset, &cfg.schema))?;
    timings.insert("load_ms".to_string(), t.elapsed().as_secs_f64() * 1e3);

    let t = Instant::now();
    let (train, test) = at_stage(
        "split",
        data.split(cfg.split_fraction, stage_seed(seed, stage::SPLIT, 0)),
    )?;
    timings.insert("split_ms".to_string(), t.elapsed().as_secs_f64() * 1e3);

    // per-attribute debias and fairness-model fit
    let t = Instant::now();
    let mut fair_models = Vec::with_capacity(cfg.sensitive.len());
    let mut debias_reports = BTreeMap::new();
    let mut cblists = BTreeMap::new();
    for (ai, attr) in cfg.sensitive.iter().enumerate() {
        let dcfg = DebiasConfig {
            cblist: CbListConfig {
                folds: cfg.folds,
                seed: stage_seed(seed, stage::CBLIST, ai as u64),
                train: cfg.train,
            },
            synth: SynthConfig {
                k_clusters: cfg.k_clusters,
                filter_fraction: cfg.filter_fraction,
                seed: stage_seed(seed, stage::SYNTH, ai as u64),
            },
        };
        let (debiased, cblist, dreport) = at_stage("debias", debias::run(&train, attr, &dcfg))?;
        let fair = at_stage(
            "fit",
            classifier::fit(&debiased, ModelKind::Logistic, &cfg.train),
        )?;
        fair_models.push(fair);
        debias_reports.insert(attr.clone(), dreport);
        cblists.insert(attr.clone(), cblist);
    }
    timings.insert("debias_ms".to_string(), t.elapsed().as_secs_f64() * 1e3);

    // performance model: best candidate by cross-validated accuracy on the
    // untouched training data
    let t = Instant::now();
    let candidates: Vec<(ModelKind, TrainConfig)> = cfg
        .candidates
        .iter()
        .map(|c| (ModelKind::Logistic, *c))
        .collect();
    let perf_model = at_stage(
        "select",
        ensemble::select_performance_model(&train, &candidates, stage_seed(seed, stage::SELECT, 0)),
    )?;
    let spec = at_stage(
        "ensemble",
        EnsembleSpec::new(
            fair_models,
            perf_model,
            cfg.weights.clone().expect("resolved"),
        ),
    )?;
    timings.insert("select_ms".to_string(), t.elapsed().as_secs_f64() * 1e3);

    // metrics on the test split
    let t = Instant::now();
    let svecs: BTreeMap<String, Vec<u8>> = cfg
        .sensitive
        .iter()
        .map(|attr| Ok((attr.clone(), test.sensitive_vector(attr)?)))
        .collect::<Result<_>>()?;
    let ensemble_preds = spec.predict_all(&test)?;
    let unmitigated_preds = spec.perf_model.predict_all(&test);
    let mut metrics_rows = vec![model_metrics(
        "unmitigated",
        &unmitigated_preds,
        &test,
        &svecs,
        &cfg,
    )?];
    for (ai, attr) in cfg.sensitive.iter().enumerate() {
        let preds = spec.fair_models[ai].predict_all(&test);
        metrics_rows.push(model_metrics(
            format!("fair:{attr}"),
            &preds,
            &test,
            &svecs,
            &cfg,
        )?);
    }
    metrics_rows.push(model_metrics(
        "ensemble",
        &ensemble_preds,
        &test,
        &svecs,
        &cfg,
    )?);
    timings.insert("metrics_ms".to_string(), t.elapsed().as_secs_f64() * 1e3);

    // trade-off baselines from the unmitigated model, then one cell per
    // (attribute × fairness × performance) for the ensemble
    let t = Instant::now();
    let mut baselines = Vec::new();
    for (ai, attr) in cfg.sensitive.iter().enumerate() {
        for fm in &cfg.fairness_metrics {
            for pm in &cfg.performance_metrics {
                let baseline = at_stage(
                    "baseline",
                    tradeoff::build_baseline(
                        &spec.perf_model,
                        &test,
                        attr,
                        *fm,
                        *pm,
                        &cfg.degrees,
                        cfg.repeats,
                        stage_seed(seed, stage::BASELINE, ai as u64),
                    ),
                )?;
                baselines.push(AttributeBaseline {
                    attribute: attr.clone(),
                    baseline,
                });
            }
        }
    }
    let cells = at_stage(
        "classify",
        classify_cells(&ensemble_preds, &test, &svecs, &baselines),
    )?;
    timings.insert("baseline_ms".to_string(), t.elapsed().as_secs_f64() * 1e3);
    timings.insert(
        "total_ms".to_string(),
        t_total.elapsed().as_secs_f64() * 1e3,
    );

    let report = RunReport {
        config: cfg,
        debias: debias_reports,
        model_metrics: metrics_rows,
        cells,
        timings,
    };
    Ok(RunArtifacts {
        report,
        cblists,
        baselines,
        ensemble: spec,
        train,
        test,
    })
}

/// One row of a weight sweep: the ensemble re-evaluated at one weighting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    /// Total weight on the fairness members (split uniformly among them).
    pub fairness_weight: f64,
    /// Full weight vector, fairness members first.
    pub weights: Vec<f64>,
    /// Cells classified win-win or good.
    pub beats: usize,
    /// Cells with both coordinates defined.
    pub cells: usize,
    pub proportion: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: RunConfig,
    pub rows: Vec<SweepRow>,
    pub timings: BTreeMap<String, f64>,
}

/// Re-evaluates the fitted ensemble across a fairness-weight grid
/// (0, step, 2·step, … 1), reusing the models and baselines of a single
/// run. With the default step 0.1 this yields 11 rows; weight 1 is the
/// pure fairness committee, weight 0 the unmitigated performance model.
pub fn sweep_weights(cfg: &RunConfig, step: f64) -> Result<(SweepReport, RunArtifacts)> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!(
            "sweep step must lie in (0, 1], got {step}"
        )));
    }
    let steps = (1.0 / step).round();
    if (steps * step - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "sweep step {step} does not divide 1 evenly"
        )));
    }
    let art = run(cfg)?;
    let t = Instant::now();
    let fair_count = art.ensemble.fair_models.len();
    let svecs: BTreeMap<String, Vec<u8>> = art
        .report
        .config
        .sensitive
        .iter()
        .map(|attr| Ok((attr.clone(), art.test.sensitive_vector(attr)?)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(steps as usize + 1);
    for i in 0..=(steps as u64) {
        let fairness_weight = (i as f64 * step).min(1.0);
        let mut weights = vec![fairness_weight / fair_count as f64; fair_count];
        weights.push(1.0 - fairness_weight);
        let spec = art.ensemble.with_weights(weights.clone())?;
        let preds = spec.predict_all(&art.test)?;
        let cells = classify_cells(&preds, &art.test, &svecs, &art.baselines)?;
        let usable = cells.iter().filter(|c| c.region.is_some()).count();
        let beats = cells.iter().filter(|c| c.beats_baseline()).count();
        rows.push(SweepRow {
            fairness_weight,
            weights,
            beats,
            cells: usable,
            proportion: if usable == 0 {
                0.0
            } else {
                beats as f64 / usable as f64
            },
        });
    }
    let mut timings = art.report.timings.clone();
    timings.insert("sweep_ms".to_string(), t.elapsed().as_secs_f64() * 1e3);
    let report = SweepReport {
        config: art.report.config.clone(),
        rows,
        timings,
    };
    Ok((report, art))
}

/// Bias-score distribution of one attribute's ranked list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditAttr {
    pub attribute: String,
    /// Joint (group, outcome) distribution of the train split.
    pub summary: SummaryStats,
    pub rows: usize,
    /// Rows whose decision flips under the counterfactual.
    pub flip_count: usize,
    pub mean_cbtest: f64,
    /// 95th percentile of the combined score (nearest-rank).
    pub p95_cbtest: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    pub config: RunConfig,
    pub attributes: Vec<AuditAttr>,
    pub timings: BTreeMap<String, f64>,
}

/// Scores the train split's rows per attribute without mitigating,
/// returning the distribution summary and the full ranked lists.
pub fn audit(cfg: &RunConfig) -> Result<(AuditReport, BTreeMap<String, CbList>)> {
    let cfg = cfg.clone().resolved()?;
    let seed = cfg.master_seed();
    let t_total = Instant::now();
    let data = at_stage("load", dataset::load_csv(&cfg.dataset, &cfg.schema))?;
    let (train, _test) = at_stage(
        "split",
        data.split(cfg.split_fraction, stage_seed(seed, stage::SPLIT, 0)),
    )?;
    let mut attributes = Vec::new();
    let mut cblists = BTreeMap::new();
    for (ai, attr) in cfg.sensitive.iter().enumerate() {
        let ccfg = CbListConfig {
            folds: cfg.folds,
            seed: stage_seed(seed, stage::CBLIST, ai as u64),
            train: cfg.train,
        };
        let cblist = at_stage("cblist", crate::cblist::build_cblist(&train, attr, &ccfg))?;
        let n = cblist.len();
        let flip_count = cblist.entries().iter().filter(|e| e.cftest == 1).count();
        let mean_cbtest = cblist.entries().iter().map(|e| e.cbtest).sum::<f64>() / n.max(1) as f64;
        // nearest-rank percentile over the ascending scores
        let mut asc: Vec<f64> = cblist.entries().iter().map(|e| e.cbtest).collect();
        asc.sort_by(f64::total_cmp);
        let p95_cbtest = asc[(n * 95).div_ceil(100).saturating_sub(1).min(n - 1)];
        attributes.push(AuditAttr {
            attribute: attr.clone(),
            summary: train.summary(attr)?,
            rows: n,
            flip_count,
            mean_cbtest,
            p95_cbtest,
        });
        cblists.insert(attr.clone(), cblist);
    }
    let mut timings = BTreeMap::new();
    timings.insert(
        "total_ms".to_string(),
        t_total.elapsed().as_secs_f64() * 1e3,
    );
    Ok((
        AuditReport {
            config: cfg,
            attributes,
            timings,
        },
        cblists,
    ))
}

/// Writes `bytes` to `path` atomically: a temp file in the same directory,
/// synced, then renamed over the target.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(path.to_path_buf())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Data(format!("cannot serialize report: {e}")))?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Builds a CSV in memory and writes it atomically.
fn write_csv_atomic(
    path: &Path,
    build: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
) -> Result<PathBuf> {
    let mut w = csv::Writer::from_writer(Vec::new());
    build(&mut w)?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Data(format!("cannot flush csv buffer: {e}")))?;
    atomic_write(path, &bytes)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("csv: {e}"))
}

/// One metric cell flattened for CSV: (status, value-or-empty, reason).
fn flat(mv: &MetricValue) -> (&'static str, String, String) {
    match mv {
        MetricValue::Defined { value } => ("defined", value.to_string(), String::new()),
        MetricValue::Undefined { reason } => ("undefined", String::new(), reason.clone()),
    }
}

/// File-name-safe version of a column name.
fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn write_cells_csv(path: &Path, cells: &[OutcomeCell]) -> Result<PathBuf> {
    write_csv_atomic(path, |w| {
        w.write_record([
            "attribute",
            "fairness_metric",
            "performance_metric",
            "bias",
            "performance",
            "region",
            "undefined_reason",
        ])
        .map_err(csv_err)?;
        for c in cells {
            let (_, bias, bias_reason) = flat(&c.bias);
            let (_, perf, perf_reason) = flat(&c.performance);
            let reason = if bias_reason.is_empty() {
                perf_reason
            } else {
                bias_reason
            };
            w.write_record([
                c.attribute.as_str(),
                c.fairness_metric.code(),
                c.performance_metric.code(),
                &bias,
                &perf,
                c.region.map_or("", Region::code),
                &reason,
            ])
            .map_err(csv_err)?;
        }
        Ok(())
    })
}

fn write_model_metrics_csv(path: &Path, rows: &[ModelMetrics]) -> Result<PathBuf> {
    write_csv_atomic(path, |w| {
        w.write_record(["model", "attribute", "metric", "status", "value", "reason"])
            .map_err(csv_err)?;
        for m in rows {
            for (attr, per) in &m.fairness {
                for (code, mv) in per {
                    let (status, value, reason) = flat(mv);
                    w.write_record([m.model.as_str(), attr, code, status, &value, &reason])
                        .map_err(csv_err)?;
                }
            }
            for (code, mv) in &m.performance {
                let (status, value, reason) = flat(mv);
                w.write_record([m.model.as_str(), "", code, status, &value, &reason])
                    .map_err(csv_err)?;
            }
        }
        Ok(())
    })
}

fn write_baseline_samples_csv(path: &Path, baselines: &[AttributeBaseline]) -> Result<PathBuf> {
    write_csv_atomic(path, |w| {
        w.write_record([
            "attribute",
            "fairness_metric",
            "performance_metric",
            "degree",
            "repeat",
            "mutation_seed",
            "bias_status",
            "bias",
            "performance_status",
            "performance",
        ])
        .map_err(csv_err)?;
        for ab in baselines {
            for s in &ab.baseline.raw_samples {
                let (bias_status, bias, _) = flat(&s.bias);
                let (perf_status, perf, _) = flat(&s.performance);
                w.write_record([
                    ab.attribute.as_str(),
                    ab.baseline.fairness_metric.code(),
                    ab.baseline.performance_metric.code(),
                    &s.degree.to_string(),
                    &s.repeat.to_string(),
                    &s.mutation_seed.to_string(),
                    bias_status,
                    &bias,
                    perf_status,
                    &perf,
                ])
                .map_err(csv_err)?;
            }
        }
        Ok(())
    })
}

fn write_cblist_csv(path: &Path, cblist: &CbList) -> Result<PathBuf> {
    let mut buf = Vec::new();
    cblist.write_csv(&mut buf)?;
    atomic_write(path, &buf)
}

/// Removes already-written files when a later write fails, so the output
/// directory never holds a partial report set.
fn cleanup_on_error<T>(written: &[PathBuf], r: Result<T>) -> Result<T> {
    if r.is_err() {
        for p in written {
            let _ = fs::remove_file(p);
        }
    }
    r
}

/// Writes the full artifact set of a run into `out`; returns the paths.
pub fn write_artifacts(art: &RunArtifacts, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let result = (|| {
        written.push(write_json(&out.join("run_report.json"), &art.report)?);
        written.push(write_cells_csv(&out.join("cells.csv"), &art.report.cells)?);
        written.push(write_model_metrics_csv(
            &out.join("model_metrics.csv"),
            &art.report.model_metrics,
        )?);
        written.push(write_baseline_samples_csv(
            &out.join("baseline_samples.csv"),
            &art.baselines,
        )?);
        for (attr, cblist) in &art.cblists {
            written.push(write_cblist_csv(
                &out.join(format!("cblist_{}.csv", slug(attr))),
                cblist,
            )?);
        }
        Ok(())
    })();
    cleanup_on_error(&written, result)?;
    Ok(written)
}

/// Writes a sweep report (JSON + per-row CSV) into `out`.
pub fn write_sweep(report: &SweepReport, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let result = (|| {
        written.push(write_json(&out.join("sweep_report.json"), report)?);
        written.push(write_csv_atomic(&out.join("sweep.csv"), |w| {
            w.write_record(["fairness_weight", "beats", "cells", "proportion"])
                .map_err(csv_err)?;
            for r in &report.rows {
                w.write_record([
                    r.fairness_weight.to_string(),
                    r.beats.to_string(),
                    r.cells.to_string(),
                    r.proportion.to_string(),
                ])
                .map_err(csv_err)?;
            }
            Ok(())
        })?);
        Ok(())
    })();
    cleanup_on_error(&written, result)?;
    Ok(written)
}

/// Writes an audit report (JSON + ranked list CSVs) into `out`.
pub fn write_audit(
    report: &AuditReport,
    cblists: &BTreeMap<String, CbList>,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let result = (|| {
        written.push(write_json(&out.join("audit.json"), report)?);
        for (attr, cblist) in cblists {
            written.push(write_cblist_csv(
                &out.join(format!("cblist_{}.csv", slug(attr))),
                cblist,
            )?);
        }
        Ok(())
    })();
    cleanup_on_error(&written, result)?;
    Ok(written)
}

/// Schema matching the CSV layout [`write_fixture`] produces for `spec`.
pub fn fixture_schema(spec: &FixtureSpec) -> Schema {
    let mut columns: Vec<dataset::Column> = (1..=spec.sensitive_count)
        .map(|a| dataset::Column::numeric(format!("s{a}")))
        .collect();
    columns.extend((1..=spec.features).map(|j| dataset::Column::numeric(format!("x{j}"))));
    columns.push(dataset::Column::numeric("y"));
    Schema {
        columns,
        sensitive: (1..=spec.sensitive_count)
            .map(|a| dataset::SensitiveAttr {
                column: format!("s{a}"),
                favored: "1".into(),
            })
            .collect(),
        label: "y".into(),
        favorable: "1".into(),
    }
}

/// Generates a fixture and writes `fixture.csv`, its ground-truth sidecar
/// `fixture_truth.csv`, and `fixture_schema.json` into `out`.
pub fn write_fixture(spec: &FixtureSpec, out: &Path) -> Result<(Fixture, Vec<PathBuf>)> {
    let fix = crate::fixtures::gen_biased(spec)?;
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let result = (|| {
        // route the dataset CSV through a temp file for the same
        // atomicity as the other artifacts
        let final_path = out.join("fixture.csv");
        let tmp = tempfile::NamedTempFile::new_in(out)?;
        fix.data.write_csv(tmp.path(), false)?;
        tmp.persist(&final_path).map_err(|e| e.error)?;
        written.push(final_path);

        written.push(write_csv_atomic(&out.join("fixture_truth.csv"), |w| {
            w.write_record(["row_id", "latent_class", "true_label", "bias_injected"])
                .map_err(csv_err)?;
            for i in 0..fix.data.len() {
                w.write_record([
                    fix.data.row_id(i).to_string(),
                    fix.truth.latent_class[i].to_string(),
                    fix.truth.true_label[i].to_string(),
                    u8::from(fix.truth.bias_injected[i]).to_string(),
                ])
                .map_err(csv_err)?;
            }
            Ok(())
        })?);
        written.push(write_json(
            &out.join("fixture_schema.json"),
            &fixture_schema(spec),
        )?);
        Ok(())
    })();
    cleanup_on_error(&written, result)?;
    Ok((fix, written))
}
