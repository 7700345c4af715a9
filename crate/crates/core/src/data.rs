//! Sample representations: labelled feature rows and aligned class-probability
//! estimates, plus delimited-text loading.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A labelled sample. Labels are stored 0-indexed; `label_names[k]` is the
/// external spelling of internal class `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    n_classes: usize,
    groups: Option<Vec<usize>>,
    protected: Option<Vec<usize>>,
    label_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from feature rows and 0-indexed labels.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::InvalidDataset("ragged feature rows".into()));
        }
        let features = rows.into_iter().flatten().collect();
        Self::from_flat(features, n_features, labels, n_classes)
    }

    /// Builds a dataset from a row-major feature buffer.
    pub fn from_flat(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidDataset("dataset must contain at least one row".into()));
        }
        if n_classes < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 classes, got {n_classes}")));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::InvalidDataset(format!(
                "feature buffer holds {} values, expected {} rows x {} columns",
                features.len(),
                labels.len(),
                n_features
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= n_classes) {
            return Err(Error::InvalidDataset(format!(
                "row {i} has label index {y} but only {n_classes} classes"
            )));
        }
        let label_names = (1..=n_classes).map(|k| k.to_string()).collect();
        Ok(Self { features, n_features, labels, n_classes, groups: None, protected: None, label_names })
    }

    pub fn with_groups(mut self, groups: Vec<usize>) -> Result<Self> {
        if groups.len() != self.len() {
            return Err(Error::SizeMismatch(format!(
                "{} group ids for {} rows",
                groups.len(),
                self.len()
            )));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn with_protected(mut self, protected: Vec<usize>) -> Result<Self> {
        if protected.len() != self.len() {
            return Err(Error::SizeMismatch(format!(
                "{} protected ids for {} rows",
                protected.len(),
                self.len()
            )));
        }
        self.protected = Some(protected);
        Ok(self)
    }

    pub fn with_label_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_classes {
            return Err(Error::InvalidDataset(format!(
                "{} label names for {} classes",
                names.len(),
                self.n_classes
            )));
        }
        self.label_names = names;
        Ok(self)
    }

    /// Drops the protected attribute, e.g. before handing a sample to the optimizer.
    pub fn without_protected(&self) -> Self {
        Self { protected: None, ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn groups(&self) -> Option<&[usize]> {
        self.groups.as_deref()
    }

    pub fn protected(&self) -> Option<&[usize]> {
        self.protected.as_deref()
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// Empirical class frequencies.
    pub fn priors(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1.0;
        }
        let n = self.len() as f64;
        counts.iter_mut().for_each(|c| *c /= n);
        counts
    }

    /// Rows selected by `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let mut out = Self::from_flat(features, self.n_features, labels, self.n_classes)?;
        out.label_names = self.label_names.clone();
        out.groups = self.groups.as_ref().map(|g| indices.iter().map(|&i| g[i]).collect());
        out.protected = self.protected.as_ref().map(|g| indices.iter().map(|&i| g[i]).collect());
        Ok(out)
    }

    /// Same rows with labels replaced.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::SizeMismatch(format!("{} labels for {} rows", labels.len(), self.len())));
        }
        if labels.iter().any(|&y| y >= self.n_classes) {
            return Err(Error::InvalidDataset("replacement label out of range".into()));
        }
        Ok(Self { labels, ..self.clone() })
    }
}

/// Class-probability estimates aligned row-by-row with a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityModel {
    probs: Vec<f64>,
    n_classes: usize,
}

impl ProbabilityModel {
    pub fn new(probs: Vec<f64>, n_classes: usize) -> Result<Self> {
        if n_classes == 0 || probs.len() % n_classes != 0 {
            return Err(Error::InvalidArgument(format!(
                "probability buffer of length {} is not a multiple of {n_classes}",
                probs.len()
            )));
        }
        for (i, row) in probs.chunks(n_classes).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "probability row {i} is not a distribution (sum {sum})"
                )));
            }
        }
        Ok(Self { probs, n_classes })
    }

    /// Rescales each nonnegative row to sum to one.
    pub fn normalized(mut probs: Vec<f64>, n_classes: usize) -> Result<Self> {
        if n_classes == 0 || probs.len() % n_classes != 0 {
            return Err(Error::InvalidArgument("ragged probability buffer".into()));
        }
        for (i, row) in probs.chunks_mut(n_classes).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || !(sum > 0.0) {
                return Err(Error::InvalidArgument(format!("probability row {i} cannot be normalized")));
            }
            row.iter_mut().for_each(|p| *p /= sum);
        }
        Self::new(probs, n_classes)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidArgument("ragged probability rows".into()));
        }
        Self::new(rows.concat(), m)
    }

    pub fn len(&self) -> usize {
        self.probs.len() / self.n_classes
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn values(&self) -> &[f64] {
        &self.probs
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let probs = indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self { probs, n_classes: self.n_classes }
    }

    pub(crate) fn check_aligned(&self, data: &Dataset) -> Result<()> {
        if self.len() != data.len() || self.n_classes != data.n_classes() {
            return Err(Error::SizeMismatch(format!(
                "probability model is {}x{}, dataset is {}x{}",
                self.len(),
                self.n_classes,
                data.len(),
                data.n_classes()
            )));
        }
        Ok(())
    }
}

/// Column layout of a delimited input file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub features: Vec<String>,
    pub label: String,
    /// External label values in class order. When absent, labels must be
    /// the integers `1..=n_classes` (if `n_classes` is given) or are
    /// inferred from the file.
    #[serde(default)]
    pub classes: Option<Vec<String>>,
    #[serde(default)]
    pub n_classes: Option<usize>,
    #[serde(default)]
    pub group: Option<String>,
    #[serde(default)]
    pub protected: Option<String>,
    /// Probability columns, one per class, e.g. `p1..pm`.
    #[serde(default)]
    pub probs: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub probs: Option<ProbabilityModel>,
}

enum LabelMap {
    Declared(Vec<String>),
    Numbered(usize),
}

impl LabelMap {
    fn map(&self, raw: &str, line: usize) -> Result<usize> {
        match self {
            LabelMap::Declared(names) => names.iter().position(|c| c == raw).ok_or_else(|| {
                Error::LabelRange { line, label: raw.to_string(), m: names.len() }
            }),
            LabelMap::Numbered(m) => match raw.parse::<usize>() {
                Ok(k) if (1..=*m).contains(&k) => Ok(k - 1),
                _ => Err(Error::LabelRange { line, label: raw.to_string(), m: *m }),
            },
        }
    }

    fn names(&self) -> Vec<String> {
        match self {
            LabelMap::Declared(names) => names.clone(),
            LabelMap::Numbered(m) => (1..=*m).map(|k| k.to_string()).collect(),
        }
    }
}

fn detect_delimiter(path: &Path) -> Result<u8> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    let header = text.lines().next().unwrap_or_default();
    Ok(if header.contains('\t') { b'\t' } else { b',' })
}

/// Loads a comma- or tab-delimited file with a header row.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Loaded> {
    let path = path.as_ref();
    let delimiter = detect_delimiter(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    let headers = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column {name:?}") })
    };
    let feature_cols = schema.features.iter().map(|f| column(f)).collect::<Result<Vec<_>>>()?;
    let label_col = column(&schema.label)?;
    let group_col = schema.group.as_deref().map(column).transpose()?;
    let protected_col = schema.protected.as_deref().map(column).transpose()?;
    let prob_cols = schema.probs.iter().map(|f| column(f)).collect::<Result<Vec<_>>>()?;

    let records = reader
        .records()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Parse { line: i + 2, message: e.to_string() }))
        .collect::<Result<Vec<_>>>()?;

    let label_map = match (&schema.classes, schema.n_classes) {
        (Some(names), _) => LabelMap::Declared(names.clone()),
        (None, Some(m)) => LabelMap::Numbered(m),
        (None, None) => {
            let raw: BTreeSet<&str> = records.iter().filter_map(|r| r.get(label_col)).collect();
            let mut names: Vec<String> = raw.into_iter().map(str::to_string).collect();
            if names.iter().all(|s| s.parse::<i64>().is_ok()) {
                names.sort_by_key(|s| s.parse::<i64>().unwrap_or_default());
            }
            LabelMap::Declared(names)
        }
    };

    let mut features = Vec::with_capacity(records.len() * feature_cols.len());
    let mut labels = Vec::with_capacity(records.len());
    let mut groups = Vec::new();
    let mut protected = Vec::new();
    let mut probs = Vec::new();
    for (i, record) in records.iter().enumerate() {
        let line = i + 2;
        let field = |c: usize| {
            record
                .get(c)
                .ok_or_else(|| Error::Parse { line, message: format!("row has only {} fields", record.len()) })
        };
        labels.push(label_map.map(field(label_col)?, line)?);
        for &c in &feature_cols {
            let raw = field(c)?;
            features.push(raw.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("feature {:?} is not a number: {raw:?}", &headers[c]),
            })?);
        }
        for (col, out) in [(group_col, &mut groups), (protected_col, &mut protected)] {
            if let Some(c) = col {
                let raw = field(c)?;
                out.push(raw.parse::<usize>().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {:?} must hold non-negative integers, got {raw:?}", &headers[c]),
                })?);
            }
        }
        for &c in &prob_cols {
            let raw = field(c)?;
            probs.push(raw.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("probability {:?} is not a number: {raw:?}", &headers[c]),
            })?);
        }
    }

    let names = label_map.names();
    let m = names.len();
    let mut dataset = Dataset::from_flat(features, feature_cols.len(), labels, m)?.with_label_names(names)?;
    if group_col.is_some() {
        dataset = dataset.with_groups(groups)?;
    }
    if protected_col.is_some() {
        dataset = dataset.with_protected(protected)?;
    }
    let probs = if prob_cols.is_empty() {
        None
    } else {
        if prob_cols.len() != m {
            return Err(Error::InvalidArgument(format!(
                "{} probability columns for {m} classes",
                prob_cols.len()
            )));
        }
        Some(ProbabilityModel::normalized(probs, m)?)
    };
    Ok(Loaded { dataset, probs })
}

/// Writes a dataset in the format [`load_dataset`] reads: features `x1..xd`,
/// `label` (external names), then optional `group`, `protected` and `p1..pm`.
pub fn write_dataset(path: impl AsRef<Path>, data: &Dataset, probs: Option<&ProbabilityModel>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |e: csv::Error| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    let mut header: Vec<String> = (1..=data.n_features()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    if data.groups().is_some() {
        header.push("group".into());
    }
    if data.protected().is_some() {
        header.push("protected".into());
    }
    if probs.is_some() {
        header.extend((1..=data.n_classes()).map(|k| format!("p{k}")));
    }
    writer.write_record(&header).map_err(io_err)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.row(i).iter().map(f64::to_string).collect();
        rec.push(data.label_names()[data.label(i)].clone());
        if let Some(g) = data.groups() {
            rec.push(g[i].to_string());
        }
        if let Some(p) = data.protected() {
            rec.push(p[i].to_string());
        }
        if let Some(pm) = probs {
            rec.extend(pm.row(i).iter().map(f64::to_string));
        }
        writer.write_record(&rec).map_err(io_err)?;
    }
    writer.flush().map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Per-column affine standardization fitted on one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Self {
        let d = data.n_features();
        let n = data.len() as f64;
        let mut mean = vec![0.0; d];
        for i in 0..data.len() {
            for (m, x) in mean.iter_mut().zip(data.row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..data.len() {
            for ((v, x), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        // constant columns keep unit scale
        let scale = var.iter().map(|v| if *v > 0.0 { (v / n).sqrt() } else { 1.0 }).collect();
        Self { mean, scale }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect()
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features() != self.mean.len() {
            return Err(Error::SizeMismatch(format!(
                "standardizer fitted on {} columns, dataset has {}",
                self.mean.len(),
                data.n_features()
            )));
        }
        let features = (0..data.len()).flat_map(|i| self.transform_row(data.row(i))).collect();
        Ok(Dataset { features, ..data.clone() })
    }
}
