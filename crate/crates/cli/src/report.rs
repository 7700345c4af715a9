//! Report records, prediction files and the summary table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use postshift::fw::TraceRecord;
use postshift::{Dataset, ElicitationResult, SoftPredictions};

use crate::config::RunConfig;
use crate::pipeline::{Prepared, UNAVAILABLE_BASELINES};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    /// One per elicitation (one per iteration for Frank-Wolfe).
    #[serde(default)]
    pub condition_numbers: Vec<f64>,
    #[serde(default)]
    pub residuals: Vec<f64>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub ill_conditioned: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queries: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zetas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capped: Option<Vec<usize>>,
}

impl Artifacts {
    pub fn record_elicitation(&mut self, r: &ElicitationResult) {
        self.alpha = Some(r.coefficients.alpha.clone());
        self.condition_numbers.push(r.condition_number);
        self.residuals.push(r.residual);
        self.epsilons.push(r.epsilon);
        self.ill_conditioned |= r.ill_conditioned;
    }

    pub fn record_trace(&mut self, trace: &[TraceRecord]) {
        self.iterations = Some(trace.len());
        for t in trace {
            self.condition_numbers.push(t.condition_number);
            self.residuals.push(t.residual);
            self.epsilons.push(t.epsilon);
            self.ill_conditioned |= t.condition_number > postshift::linalg::ILL_CONDITIONED;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub record: String,
    pub version: String,
    pub method: String,
    pub metric: String,
    pub seed: u64,
    /// Metric on each split; null when the metric cannot be evaluated there
    /// (e.g. a fairness oracle on a sample without the protected attribute).
    pub values: BTreeMap<String, Option<f64>>,
    pub artifacts: Artifacts,
    pub unavailable_baselines: Vec<String>,
    pub wall_time_ms: f64,
    /// The effective config without the output directory and sweep grid.
    pub config: serde_json::Value,
}

pub fn config_echo(config: &RunConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(config).expect("run config serializes");
    if let Some(map) = v.as_object_mut() {
        map.remove("output");
        map.remove("sweep");
    }
    v
}

impl RunReport {
    pub fn new(
        config: &RunConfig,
        values: BTreeMap<String, Option<f64>>,
        artifacts: Artifacts,
        elapsed: Duration,
    ) -> Self {
        Self {
            record: "run".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            method: config.method.name().into(),
            metric: config.metric.name.as_str().into(),
            seed: config.seed,
            values,
            artifacts,
            unavailable_baselines: UNAVAILABLE_BASELINES.iter().map(|s| s.to_string()).collect(),
            wall_time_ms: elapsed.as_secs_f64() * 1e3,
            config: config_echo(config),
        }
    }

    pub fn value(&self, split: &str) -> Option<f64> {
        self.values.get(split).copied().flatten()
    }
}

pub fn write_json_lines<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_json_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    write_json_lines(path, trace)
}

#[derive(Debug, Serialize)]
struct ErrorRecord {
    record: &'static str,
    message: String,
    causes: Vec<String>,
}

pub fn write_error(path: &Path, error: &anyhow::Error) -> Result<()> {
    let rec = ErrorRecord {
        record: "error",
        message: error.to_string(),
        causes: error.chain().skip(1).map(|c| c.to_string()).collect(),
    };
    write_json_lines(path, &[rec])
}

/// `split,row,label,protected,q1..qm`: labels are class indices `1..m`,
/// `protected` is empty when the split has no such attribute, `q` are the
/// predicted class probabilities (one-hot for deterministic rules).
pub fn write_predictions(path: &Path, data: &Prepared, preds: &BTreeMap<&'static str, SoftPredictions>) -> Result<()> {
    let m = data.n_classes();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["split".to_string(), "row".into(), "label".into(), "protected".into()];
    header.extend((1..=m).map(|k| format!("q{k}")));
    w.write_record(&header)?;
    let splits = [("train", Some(&data.train)), ("val", Some(&data.val)), ("test", data.test.as_ref())];
    for (name, d) in splits {
        let (Some(d), Some(p)) = (d, preds.get(name)) else { continue };
        for i in 0..d.len() {
            let mut rec = vec![name.to_string(), i.to_string(), (d.label(i) + 1).to_string()];
            rec.push(d.protected().map(|g| g[i].to_string()).unwrap_or_default());
            rec.extend(p.row(i).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One split of a predictions file, ready for metric evaluation.
pub struct PredictionSplit {
    pub data: Dataset,
    pub predictions: SoftPredictions,
}

pub fn read_predictions(path: &Path, split: &str) -> Result<PredictionSplit> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let m = r.headers()?.iter().filter(|h| h.starts_with('q')).count();
    if m < 2 {
        bail!("{} has fewer than two probability columns", path.display());
    }
    let mut labels = Vec::new();
    let mut protected = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("line {}", i + 2))?;
        if &rec[0] != split {
            continue;
        }
        let line = i + 2;
        let label: usize = rec[2].parse().with_context(|| format!("line {line}: bad label"))?;
        if !(1..=m).contains(&label) {
            bail!("line {line}: label {label} outside 1..{m}");
        }
        labels.push(label - 1);
        if !rec[3].is_empty() {
            protected.push(rec[3].parse::<usize>().with_context(|| format!("line {line}: bad protected value"))?);
        }
        for k in 0..m {
            values.push(rec[4 + k].parse::<f64>().with_context(|| format!("line {line}: bad probability"))?);
        }
    }
    if labels.is_empty() {
        bail!("no rows for split {split:?} in {}", path.display());
    }
    let n = labels.len();
    let mut data = Dataset::new(vec![vec![0.0]; n], labels, m)?;
    if protected.len() == n {
        data = data.with_protected(protected)?;
    }
    Ok(PredictionSplit { data, predictions: SoftPredictions::new(values, m)? })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

pub fn summary_table(reports: &[RunReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<18} {:<22} {:>8} {:>8} {:>8} {:>10}", "method", "metric", "train", "val", "test", "ms");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<18} {:<22} {:>8} {:>8} {:>8} {:>10.1}",
            r.method,
            r.metric,
            cell(r.value("train")),
            cell(r.value("val")),
            cell(r.value("test")),
            r.wall_time_ms
        );
    }
    out
}
