//! Writes a simulated benchmark as loadable files, with its Bayes oracle.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use postshift::shiftlab::{bayes_oracle, OracleValue, ShiftSpec, SyntheticSpec};
use postshift::{write_dataset, Schema};

use crate::config::{DataConfig, RunConfig};
use crate::pipeline::prepare;

#[derive(Debug, Serialize)]
struct OracleRecord<'a> {
    metric: String,
    spec: &'a SyntheticSpec,
    shift: &'a ShiftSpec,
    /// Population value for discrete specs, otherwise measured on the test file.
    oracle: Option<OracleValue>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct DataSection {
    data: DataConfig,
}

/// Writes `train.csv`, `val.csv`, `test.csv` (features, label, group and the
/// configured probability estimates), `data.toml` (a `[data]` section that
/// loads them) and `oracle.json`. A zero resolution skips the oracle.
pub fn synth(config: &RunConfig, out: &Path, resolution: usize) -> Result<Option<OracleValue>> {
    let synthetic = config.synthetic.as_ref().context("synth needs a [synthetic] section")?;
    let (spec, shift) = synthetic.distributions()?;
    let data = prepare(config)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let test = data.test.as_ref().expect("synthetic data has a test split");
    write_dataset(out.join("train.csv"), &data.train, Some(&data.p_train))?;
    write_dataset(out.join("val.csv"), &data.val, Some(&data.p_val))?;
    write_dataset(out.join("test.csv"), test, data.p_test.as_ref())?;

    let m = data.n_classes();
    let schema = Schema {
        features: (1..=data.train.n_features()).map(|j| format!("x{j}")).collect(),
        label: "label".into(),
        n_classes: Some(m),
        group: data.train.groups().map(|_| "group".into()),
        probs: (1..=m).map(|k| format!("p{k}")).collect(),
        ..Schema::default()
    };
    let section = DataSection {
        data: DataConfig { train: "train.csv".into(), val: "val.csv".into(), test: Some("test.csv".into()), schema },
    };
    fs::write(out.join("data.toml"), toml::to_string(&section)?)?;

    let metric = config.metric.build(m)?;
    let (oracle, error) = if resolution == 0 {
        (None, None)
    } else {
        let sample = match spec {
            SyntheticSpec::Discrete { .. } => None,
            SyntheticSpec::Gaussian { .. } => Some(test),
        };
        match bayes_oracle(&spec, &metric, resolution, sample) {
            Ok(o) => (Some(o), None),
            Err(e) => {
                log::warn!("oracle not computed: {e}");
                (None, Some(e.to_string()))
            }
        }
    };
    let record = OracleRecord { metric: metric.name(), spec: &spec, shift: &shift, oracle: oracle.clone(), error };
    fs::write(out.join("oracle.json"), serde_json::to_string_pretty(&record)?)?;
    Ok(oracle)
}
