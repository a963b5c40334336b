//! Tabular dataset handling: schema declaration, CSV ingestion, encoding,
//! normalization, splitting and subgroup bookkeeping.
//!
//! Every dataset this crate works with is binary-classification tabular data
//! with one or more binary sensitive columns. Conventions, fixed once here
//! and relied on everywhere else:
//!
//! * sensitive value `1` = favored group, `0` = deprived group;
//! * label `1` = favorable outcome ("granted"), `0` = unfavorable ("rejected");
//! * after preprocessing every feature value lies in `[0, 1]`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a raw CSV column is interpreted during encoding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    /// Parsed as `f64`, then min-max normalized to `[0, 1]`.
    #[default]
    Numeric,
    /// Distinct raw strings are integer-coded (lexicographic order), then
    /// the codes are min-max normalized to `[0, 1]`.
    Categorical,
}

/// Declaration of one CSV column.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(default)]
    pub kind: ColumnKind,
    /// Optional ascending cut points for binning a numeric column. A value
    /// `v` falls into the bin counting how many cut points are `< v`, and
    /// the bin codes are then min-max normalized like categorical codes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_points: Option<Vec<f64>>,
}

impl Column {
    pub fn numeric(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Numeric,
            cut_points: None,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Categorical,
            cut_points: None,
        }
    }
}

/// A sensitive column together with the raw value treated as favored.
/// Multi-valued attributes are binarized favored-value-vs-rest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensitiveAttr {
    pub column: String,
    pub favored: String,
}

/// Declarative description of a CSV file: every column in file order, which
/// ones are sensitive, which one is the label and which raw label value is
/// the favorable outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<Column>,
    pub sensitive: Vec<SensitiveAttr>,
    pub label: String,
    pub favorable: String,
}

impl Schema {
    /// Checks internal consistency: unique column names, label and sensitive
    /// columns present, at least one plain feature column.
    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("no columns declared".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column {:?}", c.name)));
            }
            if let Some(cps) = &c.cut_points {
                if c.kind == ColumnKind::Categorical {
                    return Err(Error::Schema(format!(
                        "categorical column {:?} cannot take cut points",
                        c.name
                    )));
                }
                if cps.is_empty() || cps.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Schema(format!(
                        "cut points of {:?} must be non-empty and strictly ascending",
                        c.name
                    )));
                }
            }
        }
        if !seen.contains(self.label.as_str()) {
            return Err(Error::Schema(format!(
                "label column {:?} not declared",
                self.label
            )));
        }
        if self.sensitive.is_empty() {
            return Err(Error::Schema(
                "at least one sensitive column is required".into(),
            ));
        }
        let mut sens = BTreeSet::new();
        for s in &self.sensitive {
            if !seen.contains(s.column.as_str()) {
                return Err(Error::Schema(format!(
                    "sensitive column {:?} not declared",
                    s.column
                )));
            }
            if s.column == self.label {
                return Err(Error::Schema(format!(
                    "column {:?} cannot be both label and sensitive",
                    s.column
                )));
            }
            if !sens.insert(s.column.as_str()) {
                return Err(Error::Schema(format!(
                    "sensitive column {:?} listed twice",
                    s.column
                )));
            }
        }
        let feature_cols = self.columns.len() - 1; // minus label
        if feature_cols < self.sensitive.len() + 1 {
            return Err(Error::Schema(
                "need at least one non-sensitive feature column besides the label".into(),
            ));
        }
        Ok(())
    }
}

/// The four subgroup cells spanned by (sensitive value, label).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subgroup {
    DeprivedRejected,
    DeprivedGranted,
    FavoredRejected,
    FavoredGranted,
}

impl Subgroup {
    /// Cell for a (sensitive, label) pair; both must be 0 or 1.
    pub fn of(sensitive: u8, label: u8) -> Subgroup {
        match (sensitive, label) {
            (0, 0) => Subgroup::DeprivedRejected,
            (0, _) => Subgroup::DeprivedGranted,
            (_, 0) => Subgroup::FavoredRejected,
            _ => Subgroup::FavoredGranted,
        }
    }

    /// Two-letter code used in CSV exports: DR, DG, FR, FG.
    pub fn code(self) -> &'static str {
        match self {
            Subgroup::DeprivedRejected => "DR",
            Subgroup::DeprivedGranted => "DG",
            Subgroup::FavoredRejected => "FR",
            Subgroup::FavoredGranted => "FG",
        }
    }
}

/// Row indices of each subgroup cell within one dataset.
#[derive(Clone, Debug, Default)]
pub struct SubgroupPartition {
    pub dr: Vec<usize>,
    pub dg: Vec<usize>,
    pub fr: Vec<usize>,
    pub fg: Vec<usize>,
}

impl SubgroupPartition {
    pub fn counts(&self) -> SubgroupCounts {
        SubgroupCounts {
            fg: self.fg.len() as u64,
            fr: self.fr.len() as u64,
            dg: self.dg.len() as u64,
            dr: self.dr.len() as u64,
        }
    }

    pub fn indices(&self, g: Subgroup) -> &[usize] {
        match g {
            Subgroup::DeprivedRejected => &self.dr,
            Subgroup::DeprivedGranted => &self.dg,
            Subgroup::FavoredRejected => &self.fr,
            Subgroup::FavoredGranted => &self.fg,
        }
    }
}

/// Subgroup cell sizes. `fg` = favored granted, `fr` = favored rejected,
/// `dg` = deprived granted, `dr` = deprived rejected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupCounts {
    pub fg: u64,
    pub fr: u64,
    pub dg: u64,
    pub dr: u64,
}

impl SubgroupCounts {
    pub fn new(fg: u64, fr: u64, dg: u64, dr: u64) -> Self {
        SubgroupCounts { fg, fr, dg, dr }
    }

    pub fn favored(&self) -> u64 {
        self.fg + self.fr
    }

    pub fn deprived(&self) -> u64 {
        self.dg + self.dr
    }

    pub fn total(&self) -> u64 {
        self.favored() + self.deprived()
    }

    /// P(granted | favored), if the favored group is non-empty.
    pub fn favored_rate(&self) -> Option<f64> {
        (self.favored() > 0).then(|| self.fg as f64 / self.favored() as f64)
    }

    /// P(granted | deprived), if the deprived group is non-empty.
    pub fn deprived_rate(&self) -> Option<f64> {
        (self.deprived() > 0).then(|| self.dg as f64 / self.deprived() as f64)
    }

    /// |P(granted|favored) − P(granted|deprived)|, if both groups are non-empty.
    pub fn grant_rate_gap(&self) -> Option<f64> {
        Some((self.favored_rate()? - self.deprived_rate()?).abs())
    }
}

/// Joint distribution of (group, outcome) as percentages of the dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryStats {
    pub counts: SubgroupCounts,
    /// Percentages in the same cell order: fg, fr, dg, dr. Sums to 100.
    pub percent_fg: f64,
    pub percent_fr: f64,
    pub percent_dg: f64,
    pub percent_dr: f64,
}

/// An encoded, normalized tabular dataset.
///
/// Rows carry stable `row_id`s that survive splitting and filtering, so a
/// row can be traced through the whole pipeline. Synthesized rows are
/// flagged so exports can distinguish them from observed data.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    /// Positions of the sensitive columns within `feature_names`.
    sensitive_columns: Vec<usize>,
    label_name: String,
    /// Row-major `n × m` feature matrix, every value in `[0, 1]`.
    features: Vec<f64>,
    labels: Vec<u8>,
    row_ids: Vec<u64>,
    synthetic: Vec<bool>,
    m: usize,
}

impl Dataset {
    /// Builds a dataset from pre-encoded parts. Row ids are assigned
    /// sequentially from 0 and all rows are marked as observed.
    ///
    /// Validates the representation invariants: at least one row, at least
    /// two feature columns, features within `[0, 1]`, labels in `{0, 1}`,
    /// sensitive columns binary-valued.
    pub fn from_parts(
        feature_names: Vec<String>,
        sensitive_names: &[String],
        label_name: impl Into<String>,
        features: Vec<f64>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let m = feature_names.len();
        if m < 2 {
            return Err(Error::InvalidArgument(
                "need at least two feature columns (one sensitive, one regular)".into(),
            ));
        }
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "dataset must hold at least one row".into(),
            ));
        }
        if features.len() != n * m {
            return Err(Error::InvalidArgument(format!(
                "feature matrix holds {} values, expected {} ({} rows x {} columns)",
                features.len(),
                n * m,
                n,
                m
            )));
        }
        let mut sensitive_columns = Vec::with_capacity(sensitive_names.len());
        for s in sensitive_names {
            let idx = feature_names
                .iter()
                .position(|f| f == s)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown sensitive column {s:?}")))?;
            sensitive_columns.push(idx);
        }
        if sensitive_columns.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one sensitive column required".into(),
            ));
        }
        let d = Dataset {
            feature_names,
            sensitive_columns,
            label_name: label_name.into(),
            features,
            labels,
            row_ids: (0..n as u64).collect(),
            synthetic: vec![false; n],
            m,
        };
        d.check_values()?;
        Ok(d)
    }

    fn check_values(&self) -> Result<()> {
        for (i, v) in self.features.iter().enumerate() {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::InvalidArgument(format!(
                    "feature value {} at row {} column {} outside [0, 1]",
                    v,
                    i / self.m,
                    i % self.m
                )));
            }
        }
        if let Some(l) = self.labels.iter().find(|l| **l > 1) {
            return Err(Error::InvalidArgument(format!(
                "label {l} outside {{0, 1}}"
            )));
        }
        for &c in &self.sensitive_columns {
            for r in 0..self.len() {
                let v = self.features[r * self.m + c];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "sensitive column {:?} holds non-binary value {} at row {}",
                        self.feature_names[c], v, r
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of feature columns (sensitive columns included).
    pub fn width(&self) -> usize {
        self.m
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    /// Positions of all sensitive columns within the feature matrix.
    pub fn sensitive_columns(&self) -> &[usize] {
        &self.sensitive_columns
    }

    /// Names of all sensitive columns, in declaration order.
    pub fn sensitive_names(&self) -> Vec<&str> {
        self.sensitive_columns
            .iter()
            .map(|&i| self.feature_names[i].as_str())
            .collect()
    }

    /// Resolves a sensitive column name to its feature-matrix position.
    pub fn sensitive_index(&self, name: &str) -> Result<usize> {
        self.sensitive_columns
            .iter()
            .copied()
            .find(|&i| self.feature_names[i] == name)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "{name:?} is not a sensitive column (have: {})",
                    self.sensitive_names().join(", ")
                ))
            })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.m..(i + 1) * self.m]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row_id(&self, i: usize) -> u64 {
        self.row_ids[i]
    }

    pub fn is_synthetic(&self, i: usize) -> bool {
        self.synthetic[i]
    }

    /// Largest row id present, useful when allocating fresh ids.
    pub fn max_row_id(&self) -> u64 {
        self.row_ids.iter().copied().max().unwrap_or(0)
    }

    /// Sensitive value (0 or 1) of row `i` for the column at `s_col`.
    pub fn sensitive_value(&self, i: usize, s_col: usize) -> u8 {
        (self.features[i * self.m + s_col] != 0.0) as u8
    }

    /// Per-row sensitive values for a named sensitive column.
    pub fn sensitive_vector(&self, s: &str) -> Result<Vec<u8>> {
        let col = self.sensitive_index(s)?;
        Ok((0..self.len())
            .map(|i| self.sensitive_value(i, col))
            .collect())
    }

    /// New dataset holding the given rows (by position, in the given order).
    /// Row ids and synthetic flags travel with the rows.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.m);
        let mut labels = Vec::with_capacity(rows.len());
        let mut row_ids = Vec::with_capacity(rows.len());
        let mut synthetic = Vec::with_capacity(rows.len());
        for &r in rows {
            features.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
            row_ids.push(self.row_ids[r]);
            synthetic.push(self.synthetic[r]);
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            sensitive_columns: self.sensitive_columns.clone(),
            label_name: self.label_name.clone(),
            features,
            labels,
            row_ids,
            synthetic,
            m: self.m,
        }
    }

    /// Appends one row. Internal: callers are responsible for id freshness.
    pub(crate) fn push_row(&mut self, features: &[f64], label: u8, row_id: u64, synthetic: bool) {
        debug_assert_eq!(features.len(), self.m);
        self.features.extend_from_slice(features);
        self.labels.push(label);
        self.row_ids.push(row_id);
        self.synthetic.push(synthetic);
    }

    /// Seeded shuffle split: `floor(n * train_fraction)` rows go to the
    /// returned train set, the rest to the test set. The same seed always
    /// produces the same split.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction must lie strictly between 0 and 1, got {train_fraction}"
            )));
        }
        if self.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least two rows to split".into(),
            ));
        }
        let k = (self.len() as f64 * train_fraction).floor() as usize;
        if k == 0 || k == self.len() {
            return Err(Error::InvalidArgument(format!(
                "fraction {train_fraction} leaves one side of the split empty for {} rows",
                self.len()
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut crate::rng::seeded(seed, crate::rng::Stream::Split));
        Ok((self.subset(&idx[..k]), self.subset(&idx[k..])))
    }

    /// Partitions rows into the four (group, outcome) cells for sensitive
    /// column `s`. Every row lands in exactly one cell.
    pub fn partition(&self, s: &str) -> Result<SubgroupPartition> {
        let col = self.sensitive_index(s)?;
        let mut p = SubgroupPartition::default();
        for i in 0..self.len() {
            match Subgroup::of(self.sensitive_value(i, col), self.labels[i]) {
                Subgroup::DeprivedRejected => p.dr.push(i),
                Subgroup::DeprivedGranted => p.dg.push(i),
                Subgroup::FavoredRejected => p.fr.push(i),
                Subgroup::FavoredGranted => p.fg.push(i),
            }
        }
        Ok(p)
    }

    /// Counterfactual twin dataset: sensitive column `s` flipped on every
    /// row (`v → 1 − v`), everything else byte-identical. Applying it twice
    /// returns the original dataset.
    pub fn counterfactual(&self, s: &str) -> Result<Dataset> {
        let col = self.sensitive_index(s)?;
        let mut out = self.clone();
        for i in 0..out.len() {
            let v = &mut out.features[i * out.m + col];
            *v = 1.0 - *v;
        }
        Ok(out)
    }

    /// Joint (group, outcome) distribution for sensitive column `s`.
    pub fn summary(&self, s: &str) -> Result<SummaryStats> {
        let counts = self.partition(s)?.counts();
        let n = counts.total() as f64;
        Ok(SummaryStats {
            counts,
            percent_fg: 100.0 * counts.fg as f64 / n,
            percent_fr: 100.0 * counts.fr as f64 / n,
            percent_dg: 100.0 * counts.dg as f64 / n,
            percent_dr: 100.0 * counts.dr as f64 / n,
        })
    }

    /// Writes the dataset as CSV. When `flag_synthetic` is set, an extra
    /// trailing `synthetic` column marks generated rows with 1.
    pub fn write_csv(&self, path: &Path, flag_synthetic: bool) -> Result<()> {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))?;
        let mut header: Vec<&str> = self.feature_names.iter().map(|s| s.as_str()).collect();
        header.push(&self.label_name);
        if flag_synthetic {
            header.push("synthetic");
        }
        w.write_record(&header)
            .map_err(|e| Error::Data(e.to_string()))?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            record.clear();
            for v in self.row(i) {
                record.push(v.to_string());
            }
            record.push(self.labels[i].to_string());
            if flag_synthetic {
                record.push(u8::from(self.synthetic[i]).to_string());
            }
            w.write_record(&record)
                .map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Values treated as missing during ingestion (after trimming).
fn is_missing(raw: &str) -> bool {
    raw.is_empty() || raw == "?"
}

/// Min-max normalizes one column in place. Constant columns collapse to 0.
/// Applying this twice gives the same result as applying it once.
pub(crate) fn min_max_normalize(col: &mut [f64]) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in col.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if lo == hi {
        col.fill(0.0);
        return;
    }
    let span = hi - lo;
    for v in col.iter_mut() {
        *v = (*v - lo) / span;
    }
}

/// Loads and encodes a CSV file against `schema`.
///
/// Rows containing a missing value (empty cell or `?`) are dropped. The
/// label and sensitive columns are binarized favorable/favored-value-vs-rest
/// and must end up with both values present; numeric columns are min-max
/// normalized; categorical columns are integer-coded then normalized.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Data(e.to_string()))?
        .clone();
    let declared: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    let found: Vec<&str> = headers.iter().collect();
    if declared != found {
        return Err(Error::Schema(format!(
            "header mismatch: file has [{}], schema declares [{}]",
            found.join(", "),
            declared.join(", ")
        )));
    }

    let width = schema.columns.len();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut dropped = 0usize;
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("row {}: {e}", line + 2)))?;
        if rec.len() != width {
            return Err(Error::Data(format!(
                "row {} has {} fields, expected {}",
                line + 2,
                rec.len(),
                width
            )));
        }
        if rec.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    if dropped > 0 {
        log::info!(
            "dropped {dropped} rows with missing values from {}",
            path.display()
        );
    }
    if rows.is_empty() {
        return Err(Error::Data(format!(
            "{} holds no usable rows after dropping missing values",
            path.display()
        )));
    }
    let n = rows.len();

    let sensitive_by_name: BTreeMap<&str, &str> = schema
        .sensitive
        .iter()
        .map(|s| (s.column.as_str(), s.favored.as_str()))
        .collect();

    // Encode column by column, label last.
    let label_pos = schema
        .columns
        .iter()
        .position(|c| c.name == schema.label)
        .unwrap();
    let mut labels = vec![0u8; n];
    let mut feature_names = Vec::with_capacity(width - 1);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(width - 1);
    for (ci, col) in schema.columns.iter().enumerate() {
        if ci == label_pos {
            for (ri, row) in rows.iter().enumerate() {
                labels[ri] = u8::from(row[ci] == schema.favorable);
            }
            continue;
        }
        let mut values = vec![0.0f64; n];
        if let Some(&favored) = sensitive_by_name.get(col.name.as_str()) {
            for (ri, row) in rows.iter().enumerate() {
                values[ri] = f64::from(row[ci] == favored);
            }
        } else {
            match (col.kind, &col.cut_points) {
                (ColumnKind::Numeric, cut_points) => {
                    for (ri, row) in rows.iter().enumerate() {
                        let v: f64 = row[ci].parse().map_err(|_| {
                            Error::Data(format!(
                                "column {:?} row {}: {:?} is not numeric",
                                col.name,
                                ri + 2,
                                row[ci]
                            ))
                        })?;
                        values[ri] = match cut_points {
                            Some(cps) => cps.iter().filter(|c| **c < v).count() as f64,
                            None => v,
                        };
                    }
                    min_max_normalize(&mut values);
                }
                (ColumnKind::Categorical, _) => {
                    let distinct: BTreeSet<&str> = rows.iter().map(|r| r[ci].as_str()).collect();
                    let codes: BTreeMap<&str, usize> = distinct.into_iter().zip(0..).collect();
                    for (ri, row) in rows.iter().enumerate() {
                        values[ri] = codes[row[ci].as_str()] as f64;
                    }
                    min_max_normalize(&mut values);
                }
            }
        }
        feature_names.push(col.name.clone());
        columns.push(values);
    }

    // Binary sanity of the encoded label and sensitive columns.
    if labels.iter().all(|&l| l == 0) || labels.iter().all(|&l| l == 1) {
        return Err(Error::Data(format!(
            "label column {:?} is single-valued after encoding (favorable = {:?})",
            schema.label, schema.favorable
        )));
    }
    for s in &schema.sensitive {
        let idx = feature_names.iter().position(|f| *f == s.column).unwrap();
        let col = &columns[idx];
        if col.iter().all(|&v| v == 0.0) || col.iter().all(|&v| v == 1.0) {
            return Err(Error::Data(format!(
                "sensitive column {:?} is single-valued after encoding (favored = {:?})",
                s.column, s.favored
            )));
        }
    }

    let m = feature_names.len();
    let mut features = vec![0.0f64; n * m];
    for (ci, col) in columns.iter().enumerate() {
        for (ri, v) in col.iter().enumerate() {
            features[ri * m + ci] = *v;
        }
    }
    let sensitive_names: Vec<String> = schema.sensitive.iter().map(|s| s.column.clone()).collect();
    Dataset::from_parts(
        feature_names,
        &sensitive_names,
        schema.label.clone(),
        features,
        labels,
    )
}

/// Checks that all row ids in a dataset are unique; a test-suite invariant
/// for every operation that filters, merges or synthesizes rows.
#[cfg(test)]
pub(crate) fn row_ids_unique(d: &Dataset) -> bool {
    let mut seen = std::collections::HashSet::with_capacity(d.len());
    (0..d.len()).all(|i| seen.insert(d.row_id(i)))
}
