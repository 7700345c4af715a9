//! Grid over ε and basis subsets, selected by validation metric.

use std::fs;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{BasisConfig, EpsilonSetting, RunConfig};
use crate::pipeline;
use crate::report::{self, RunReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub record: String,
    pub index: usize,
    pub epsilon: Option<EpsilonSetting>,
    pub basis: BasisConfig,
    pub ok: bool,
    pub val: Option<f64>,
    pub test: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Best {
    record: String,
    index: usize,
    val: f64,
}

pub struct SweepOutcome {
    pub candidates: Vec<Candidate>,
    pub best: usize,
    pub report: RunReport,
}

/// Child configs in grid order (ε outer, basis inner). An empty axis keeps
/// the base config's value.
pub fn candidates(config: &RunConfig) -> Vec<RunConfig> {
    let grid = config.sweep.clone().unwrap_or_default();
    let eps: Vec<Option<EpsilonSetting>> = if grid.epsilon.is_empty() {
        vec![config.optim.epsilon]
    } else {
        grid.epsilon.iter().map(|&e| Some(EpsilonSetting::Fixed(e))).collect()
    };
    let bases = if grid.basis.is_empty() { vec![config.basis.clone()] } else { grid.basis.clone() };
    let mut out = Vec::with_capacity(eps.len() * bases.len());
    for e in &eps {
        for b in &bases {
            let mut child = config.clone();
            child.optim.epsilon = *e;
            child.basis = b.clone();
            child.sweep = None;
            child.output = config.output.join(format!("candidate-{}", out.len()));
            out.push(child);
        }
    }
    out
}

/// Runs every candidate; fails only when all of them fail. Writes
/// `sweep.jsonl` (one record per candidate, then the winner), `summary.txt`
/// and `best.jsonl` (the winning report).
pub fn sweep(config: &RunConfig) -> Result<SweepOutcome> {
    fs::create_dir_all(&config.output).with_context(|| format!("creating {}", config.output.display()))?;
    let children = candidates(config);
    let mut records = Vec::with_capacity(children.len());
    let mut reports: Vec<Option<RunReport>> = Vec::with_capacity(children.len());
    for (index, child) in children.iter().enumerate() {
        let result = pipeline::run(child);
        if let Err(e) = &result {
            log::warn!("candidate {index} failed: {e:#}");
        }
        records.push(Candidate {
            record: "candidate".into(),
            index,
            epsilon: child.optim.epsilon,
            basis: child.basis.clone(),
            ok: result.is_ok(),
            val: result.as_ref().ok().and_then(|r| r.value("val")),
            test: result.as_ref().ok().and_then(|r| r.value("test")),
            error: result.as_ref().err().map(|e| format!("{e:#}")),
        });
        reports.push(result.ok());
    }
    let mut best: Option<(usize, f64)> = None;
    for c in &records {
        if let Some(v) = c.val.filter(|v| v.is_finite()) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((c.index, v));
            }
        }
    }
    let Some((index, val)) = best else {
        bail!("all {} sweep candidates failed or had no validation metric", records.len());
    };
    let lines: Vec<serde_json::Value> = records
        .iter()
        .map(|c| serde_json::to_value(c).expect("candidate serializes"))
        .chain(std::iter::once(
            serde_json::to_value(Best { record: "best".into(), index, val }).expect("best serializes"),
        ))
        .collect();
    report::write_json_lines(&config.output.join("sweep.jsonl"), &lines)?;
    let ok: Vec<RunReport> = reports.iter().flatten().cloned().collect();
    fs::write(config.output.join("summary.txt"), report::summary_table(&ok))?;
    let report = reports[index].clone().expect("winner has a report");
    report::write_json_lines(&config.output.join("best.jsonl"), std::slice::from_ref(&report))?;
    Ok(SweepOutcome { candidates: records, best: index, report })
}
