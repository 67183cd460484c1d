//! Tabular data model, schema-driven CSV ingestion, and class × group clusters.
//!
//! A [`Dataset`] stores a row-major feature matrix together with a binary
//! label and a group id per instance. Groups are the observed combinations of
//! the schema's group columns, numbered in order of first appearance.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column layout of an input CSV.
///
/// Serialized as a flat TOML document:
///
/// ```toml
/// label_column = "credit_risk"
/// positive_label = "good"
/// group_columns = ["sex", "age_over_30"]
/// feature_columns = ["duration", "amount", "sex"]
/// delimiter = ","
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub label_column: String,
    pub positive_label: String,
    pub group_columns: Vec<String>,
    pub feature_columns: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<()> {
        if self.group_columns.is_empty() {
            return Err(Error::Schema("group_columns must not be empty".into()));
        }
        if self.feature_columns.is_empty() {
            return Err(Error::Schema("feature_columns must not be empty".into()));
        }
        if self.feature_columns.contains(&self.label_column) {
            return Err(Error::Schema(format!(
                "label column '{}' must not be a feature column",
                self.label_column
            )));
        }
        if self.group_columns.contains(&self.label_column) {
            return Err(Error::Schema(format!(
                "label column '{}' must not be a group column",
                self.label_column
            )));
        }
        for list in [&self.group_columns, &self.feature_columns] {
            let mut seen = std::collections::HashSet::new();
            for name in list.iter() {
                if !seen.insert(name) {
                    return Err(Error::Schema(format!("column '{name}' listed twice")));
                }
            }
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Schema(format!(
                "delimiter {:?} must be a single ASCII character",
                self.delimiter
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: DatasetSchema =
            toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }
}

/// Column provenance kept alongside the numeric data so a dataset can be
/// written back out with its original column names.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMeta {
    pub feature_names: Vec<String>,
    pub label_column: String,
    pub positive_label: String,
    pub negative_label: String,
    pub group_columns: Vec<String>,
    /// Raw group-column values for each group id.
    pub group_values: Vec<Vec<String>>,
    /// Positions in the feature vector that hold a group column.
    pub protected_features: Vec<usize>,
}

impl ColumnMeta {
    fn generic(d: usize, m: usize) -> Self {
        ColumnMeta {
            feature_names: (0..d).map(|k| format!("x{k}")).collect(),
            label_column: "label".into(),
            positive_label: "1".into(),
            negative_label: "0".into(),
            group_columns: vec!["group".into()],
            group_values: (0..m).map(|g| vec![g.to_string()]).collect(),
            protected_features: Vec::new(),
        }
    }

    /// Schema that reloads a CSV written by [`Dataset::write_csv`].
    pub fn schema(&self) -> DatasetSchema {
        DatasetSchema {
            label_column: self.label_column.clone(),
            positive_label: self.positive_label.clone(),
            group_columns: self.group_columns.clone(),
            feature_columns: self.feature_names.clone(),
            delimiter: ',',
        }
    }
}

/// Binary-labeled instances with group membership.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    groups: Vec<usize>,
    n: usize,
    d: usize,
    m: usize,
    group_names: Vec<String>,
    meta: ColumnMeta,
}

impl Dataset {
    /// Builds a dataset from a row-major `n × d` feature buffer.
    pub fn new(
        features: Vec<f64>,
        d: usize,
        labels: Vec<u8>,
        groups: Vec<usize>,
        m: usize,
    ) -> Result<Self> {
        let meta = ColumnMeta::generic(d, m);
        Self::with_meta(features, d, labels, groups, m, meta)
    }

    pub fn with_meta(
        features: Vec<f64>,
        d: usize,
        labels: Vec<u8>,
        groups: Vec<usize>,
        m: usize,
        meta: ColumnMeta,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::Validation("feature dimension must be positive".into()));
        }
        let n = labels.len();
        if groups.len() != n || features.len() != n * d {
            return Err(Error::Validation(format!(
                "length mismatch: {} labels, {} groups, {} feature values for d={d}",
                n,
                groups.len(),
                features.len()
            )));
        }
        if m < 2 {
            return Err(Error::Validation(format!(
                "at least 2 groups are required, got {m}"
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite feature value at row {}, feature {}",
                pos / d,
                pos % d
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::Validation(format!("label {bad} is not 0 or 1")));
        }
        if let Some(&bad) = groups.iter().find(|&&g| g >= m) {
            return Err(Error::Validation(format!("group id {bad} is not below {m}")));
        }
        if meta.feature_names.len() != d || meta.group_values.len() != m {
            return Err(Error::Validation("column metadata does not match shape".into()));
        }
        let group_names = meta.group_values.iter().map(|v| v.join("|")).collect();
        Ok(Dataset {
            features,
            labels,
            groups,
            n,
            d,
            m,
            group_names,
            meta,
        })
    }

    /// Reads a delimited file with a header row according to `schema`.
    pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, schema)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, schema: &DatasetSchema) -> Result<Self> {
        schema.validate()?;
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(schema.delimiter as u8)
            .trim(csv::Trim::All)
            .has_headers(true)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let column = |name: &str| -> Result<usize> {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
        };
        let label_col = column(&schema.label_column)?;
        let group_cols = schema
            .group_columns
            .iter()
            .map(|c| column(c))
            .collect::<Result<Vec<_>>>()?;
        let feature_cols = schema
            .feature_columns
            .iter()
            .map(|c| column(c))
            .collect::<Result<Vec<_>>>()?;

        let d = feature_cols.len();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        let mut group_ids: HashMap<Vec<String>, usize> = HashMap::new();
        let mut group_values: Vec<Vec<String>> = Vec::new();
        let mut negative_label: Option<String> = None;

        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let row = row + 1;
            let cell = |col: usize, name: &str| -> Result<&str> {
                match record.get(col) {
                    Some(v) if !v.is_empty() => Ok(v),
                    _ => Err(Error::Parse {
                        row,
                        column: name.to_string(),
                        message: "missing value".into(),
                    }),
                }
            };
            for (&col, name) in feature_cols.iter().zip(&schema.feature_columns) {
                let raw = cell(col, name)?;
                let value: f64 = raw.parse().map_err(|_| Error::Parse {
                    row,
                    column: name.clone(),
                    message: format!("'{raw}' is not a number"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: name.clone(),
                        message: format!("'{raw}' is not finite"),
                    });
                }
                features.push(value);
            }
            let raw_label = cell(label_col, &schema.label_column)?;
            if raw_label == schema.positive_label {
                labels.push(1);
            } else {
                if negative_label.is_none() {
                    negative_label = Some(raw_label.to_string());
                }
                labels.push(0);
            }
            let key = group_cols
                .iter()
                .zip(&schema.group_columns)
                .map(|(&col, name)| cell(col, name).map(str::to_string))
                .collect::<Result<Vec<_>>>()?;
            let next = group_ids.len();
            let id = *group_ids.entry(key.clone()).or_insert_with(|| {
                group_values.push(key);
                next
            });
            groups.push(id);
        }

        let m = group_values.len();
        if m < 2 {
            return Err(Error::Validation(format!(
                "found {m} distinct group(s); at least 2 are required"
            )));
        }
        let positives = labels.iter().filter(|&&y| y == 1).count();
        if positives == 0 || positives == labels.len() {
            return Err(Error::Validation(format!(
                "labels must contain both classes (positive label '{}' found {} of {} rows)",
                schema.positive_label,
                positives,
                labels.len()
            )));
        }

        let protected_features = schema
            .feature_columns
            .iter()
            .enumerate()
            .filter(|(_, name)| schema.group_columns.contains(name))
            .map(|(k, _)| k)
            .collect();
        let meta = ColumnMeta {
            feature_names: schema.feature_columns.clone(),
            label_column: schema.label_column.clone(),
            positive_label: schema.positive_label.clone(),
            negative_label: negative_label.unwrap_or_else(|| "0".into()),
            group_columns: schema.group_columns.clone(),
            group_values,
            protected_features,
        };
        Self::with_meta(features, d, labels, groups, m, meta)
    }

    /// Writes the dataset as CSV: feature columns, non-feature group columns,
    /// the label column, and, when `provenance` is given, the `__synthetic`
    /// and `__source_technique` columns.
    ///
    /// A group column that is also a feature is written from the feature value.
    pub fn write_csv<W: Write>(&self, writer: W, provenance: Option<&[RowTag]>) -> Result<()> {
        if let Some(tags) = provenance {
            if tags.len() != self.n {
                return Err(Error::Parameter(format!(
                    "{} provenance tags for {} rows",
                    tags.len(),
                    self.n
                )));
            }
        }
        let mut wtr = csv::Writer::from_writer(writer);
        let extra_groups: Vec<usize> = (0..self.meta.group_columns.len())
            .filter(|&c| !self.meta.feature_names.contains(&self.meta.group_columns[c]))
            .collect();
        let mut header: Vec<&str> = self.meta.feature_names.iter().map(String::as_str).collect();
        header.extend(extra_groups.iter().map(|&c| self.meta.group_columns[c].as_str()));
        header.push(&self.meta.label_column);
        if provenance.is_some() {
            header.push("__synthetic");
            header.push("__source_technique");
        }
        wtr.write_record(&header)?;

        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.n {
            record.clear();
            record.extend(self.row(i).iter().map(|v| v.to_string()));
            let g = self.groups[i];
            record.extend(
                extra_groups
                    .iter()
                    .map(|&c| self.meta.group_values[g][c].clone()),
            );
            record.push(if self.labels[i] == 1 {
                self.meta.positive_label.clone()
            } else {
                self.meta.negative_label.clone()
            });
            if let Some(tags) = provenance {
                record.push(if tags[i].synthetic { "1" } else { "0" }.into());
                record.push(tags[i].technique.clone());
            }
            wtr.write_record(&record)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, provenance: Option<&[RowTag]>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), provenance)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.d)
    }

    /// Row-major feature buffer.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn group(&self, i: usize) -> usize {
        self.groups[i]
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn meta(&self) -> &ColumnMeta {
        &self.meta
    }

    /// Instances per class, indexed by label.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for &y in &self.labels {
            counts[y as usize] += 1;
        }
        counts
    }

    pub fn group_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.m];
        for &g in &self.groups {
            counts[g] += 1;
        }
        counts
    }

    /// Rows selected by `indices`, in that order. Group numbering is kept.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
            n: indices.len(),
            d: self.d,
            m: self.m,
            group_names: self.group_names.clone(),
            meta: self.meta.clone(),
        }
    }

    /// A copy with extra rows appended after the existing ones.
    pub fn appended<'a, I>(&self, rows: I) -> Result<Dataset>
    where
        I: IntoIterator<Item = (&'a [f64], u8, usize)>,
    {
        let mut out = self.clone();
        for (x, y, g) in rows {
            if x.len() != self.d || y > 1 || g >= self.m || x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation("appended row is inconsistent".into()));
            }
            out.features.extend_from_slice(x);
            out.labels.push(y);
            out.groups.push(g);
            out.n += 1;
        }
        Ok(out)
    }
}

/// Per-row provenance written to the augmented CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowTag {
    pub synthetic: bool,
    pub technique: String,
}

/// Intersection of a class and a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClusterKey {
    pub class: u8,
    pub group: usize,
}

impl ClusterKey {
    pub fn new(class: u8, group: usize) -> Self {
        ClusterKey { class, group }
    }
}

impl fmt::Display for ClusterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(y={}, g={})", self.class, self.group)
    }
}

/// Partition of instance indices into the `2·M` class × group clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterIndex {
    m: usize,
    // slot = class * m + group
    members: Vec<Vec<usize>>,
}

impl ClusterIndex {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Keys in ascending order: class 0 groups first, then class 1.
    pub fn keys(&self) -> impl Iterator<Item = ClusterKey> + '_ {
        (0..2u8).flat_map(move |c| (0..self.m).map(move |g| ClusterKey::new(c, g)))
    }

    pub fn get(&self, key: ClusterKey) -> &[usize] {
        assert!(key.group < self.m && key.class < 2, "cluster key out of range");
        &self.members[key.class as usize * self.m + key.group]
    }

    pub fn size(&self, key: ClusterKey) -> usize {
        self.get(key).len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClusterKey, &[usize])> + '_ {
        self.keys().map(move |k| (k, self.get(k)))
    }

    pub fn max_size(&self) -> usize {
        self.members.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Instances with the other class and the same group as `key`.
    pub fn other_class(&self, key: ClusterKey) -> &[usize] {
        self.get(ClusterKey::new(1 - key.class, key.group))
    }

    /// Instances with the same class and any other group than `key`, sorted.
    pub fn other_groups(&self, key: ClusterKey) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.m)
            .filter(|&g| g != key.group)
            .flat_map(|g| self.get(ClusterKey::new(key.class, g)).iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    pub fn other_groups_len(&self, key: ClusterKey) -> usize {
        (0..self.m)
            .filter(|&g| g != key.group)
            .map(|g| self.size(ClusterKey::new(key.class, g)))
            .sum()
    }

    /// Class members of `class` across all groups, sorted.
    pub fn class_members(&self, class: u8) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.m)
            .flat_map(|g| self.get(ClusterKey::new(class, g)).iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

pub fn partition_clusters(ds: &Dataset) -> ClusterIndex {
    let m = ds.m();
    let mut members = vec![Vec::new(); 2 * m];
    for i in 0..ds.n() {
        members[ds.label(i) as usize * m + ds.group(i)].push(i);
    }
    ClusterIndex { m, members }
}

/// Size gap between each cluster and the largest cluster.
pub fn imbalance_degrees(ci: &ClusterIndex) -> BTreeMap<ClusterKey, usize> {
    let largest = ci.max_size();
    ci.iter().map(|(k, v)| (k, largest - v.len())).collect()
}

/// One Gaussian blob of the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCluster {
    pub key: ClusterKey,
    pub size: usize,
    pub mean: Vec<f64>,
    /// Row-major `d × d` covariance.
    pub covariance: Vec<f64>,
}

impl GaussianCluster {
    pub fn isotropic(key: ClusterKey, size: usize, mean: Vec<f64>, std_dev: f64) -> Self {
        let d = mean.len();
        let mut covariance = vec![0.0; d * d];
        for k in 0..d {
            covariance[k * d + k] = std_dev * std_dev;
        }
        GaussianCluster {
            key,
            size,
            mean,
            covariance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub clusters: Vec<GaussianCluster>,
    pub seed: u64,
}

/// Draws a reproducible dataset with exactly the requested cluster sizes.
/// Rows are emitted cluster by cluster in the order given.
pub fn make_synthetic_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    let first = spec
        .clusters
        .first()
        .ok_or_else(|| Error::Parameter("no clusters specified".into()))?;
    let d = first.mean.len();
    if d == 0 {
        return Err(Error::Parameter("cluster mean must be non-empty".into()));
    }
    let classes: std::collections::BTreeSet<u8> = spec.clusters.iter().map(|c| c.key.class).collect();
    let groups: std::collections::BTreeSet<usize> = spec.clusters.iter().map(|c| c.key.group).collect();
    if classes.len() < 2 || groups.len() < 2 || classes.iter().any(|&c| c > 1) {
        return Err(Error::Parameter(
            "at least 2 classes (0 and 1) and 2 groups must be specified".into(),
        ));
    }
    let m = groups.iter().max().unwrap() + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total: usize = spec.clusters.iter().map(|c| c.size).sum();
    let mut features = Vec::with_capacity(total * d);
    let mut labels = Vec::with_capacity(total);
    let mut group_ids = Vec::with_capacity(total);
    let mut z = vec![0.0; d];
    for cluster in &spec.clusters {
        if cluster.mean.len() != d || cluster.covariance.len() != d * d {
            return Err(Error::Parameter(format!(
                "cluster {} has inconsistent dimensions",
                cluster.key
            )));
        }
        let cov = DMatrix::from_row_slice(d, d, &cluster.covariance);
        if (&cov - cov.transpose()).abs().max() > 1e-12 {
            return Err(Error::Parameter(format!(
                "covariance of cluster {} is not symmetric",
                cluster.key
            )));
        }
        let chol = cov.cholesky().ok_or_else(|| {
            Error::Parameter(format!(
                "covariance of cluster {} is not positive definite",
                cluster.key
            ))
        })?;
        let l = chol.l();
        for _ in 0..cluster.size {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            for r in 0..d {
                let mut acc = cluster.mean[r];
                for c in 0..=r {
                    acc += l[(r, c)] * z[c];
                }
                features.push(acc);
            }
            labels.push(cluster.key.class);
            group_ids.push(cluster.key.group);
        }
    }
    Dataset::new(features, d, labels, group_ids, m)
}
