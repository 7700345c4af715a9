//! Data → basis → method → evaluation, with every output file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use postshift::baselines::{argmax_baseline, coordinate_search_plugin};
use postshift::classifier::RuleContext;
use postshift::elicit::SystemForm;
use postshift::fw::{fw_eg, FwConfig, FwError, FwPath, TraceRecord};
use postshift::logreg::{LogRegConfig, LogisticRegression};
use postshift::shiftlab::{corrupt, noisy_conditional};
use postshift::{
    load_dataset, Dataset, ElicitConfig, EpsilonChoice, PostShiftRule, ProbabilityModel,
    RandomizedClassifier, SoftPredictions, Split,
};

use crate::config::{Method, ProbSource, RunConfig};
use crate::report::{self, Artifacts, RunReport};

/// Independent generator streams derived from the config seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    TrainSample = 1,
    Corruption = 2,
    ValSample = 3,
    TestSample = 4,
    Probes = 5,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Gradient-trained baselines that this harness does not provide.
pub const UNAVAILABLE_BASELINES: [&str; 5] =
    ["fine-tuning", "learn-to-reweight", "adaptive-surrogates", "forward-correction", "kmm"];

/// The three samples with the probability estimates of the model trained on
/// the training sample.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Option<Dataset>,
    pub p_train: ProbabilityModel,
    pub p_val: ProbabilityModel,
    pub p_test: Option<ProbabilityModel>,
}

impl Prepared {
    pub fn n_classes(&self) -> usize {
        self.train.n_classes()
    }

    fn splits(&self) -> Vec<(&'static str, &Dataset)> {
        let mut out = vec![("train", &self.train), ("val", &self.val)];
        if let Some(t) = &self.test {
            out.push(("test", t));
        }
        out
    }
}

fn fit_logreg(train: &Dataset, others: &[&Dataset]) -> Result<Vec<ProbabilityModel>> {
    let model = LogisticRegression::fit(train, &LogRegConfig::default())?;
    let mut out = vec![model.predict(train)?];
    for d in others {
        out.push(model.predict(d)?);
    }
    Ok(out)
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    if let Some(s) = &config.synthetic {
        let (spec, shift) = s.distributions()?;
        let clean = spec.sample_clean(s.n_train, &mut stream(config.seed, Stream::TrainSample))?;
        let train = corrupt(&spec, &clean, &shift, &mut stream(config.seed, Stream::Corruption))?;
        let val = spec.sample_clean(s.n_val, &mut stream(config.seed, Stream::ValSample))?;
        let test = spec.sample_clean(s.n_test, &mut stream(config.seed, Stream::TestSample))?;
        let (p_train, p_val, p_test) = match s.probs {
            ProbSource::Exact => (
                noisy_conditional(&spec, &shift, &train)?,
                noisy_conditional(&spec, &shift, &val)?,
                noisy_conditional(&spec, &shift, &test)?,
            ),
            ProbSource::Logreg => {
                let mut p = fit_logreg(&train, &[&val, &test])?.into_iter();
                (p.next().unwrap(), p.next().unwrap(), p.next().unwrap())
            }
        };
        return Ok(Prepared { train, val, test: Some(test), p_train, p_val, p_test: Some(p_test) });
    }
    let data = config.data.as_ref().context("no data source configured")?;
    let load = |p: &Path| load_dataset(p, &data.schema).with_context(|| format!("loading {}", p.display()));
    let train = load(&data.train)?;
    let val = load(&data.val)?;
    let test = data.test.as_deref().map(load).transpose()?;
    let m = train.dataset.n_classes();
    if val.dataset.n_classes() != m || test.as_ref().is_some_and(|t| t.dataset.n_classes() != m) {
        bail!("train, val and test disagree in the number of classes");
    }
    let test_has_probs = test.as_ref().is_none_or(|t| t.probs.is_some());
    let (p_train, p_val, p_test) = match (&train.probs, &val.probs) {
        (Some(a), Some(b)) if test_has_probs => (a.clone(), b.clone(), test.as_ref().and_then(|t| t.probs.clone())),
        _ => {
            log::info!("probability columns missing; fitting logistic regression on the training file");
            let others: Vec<&Dataset> = std::iter::once(&val.dataset).chain(test.as_ref().map(|t| &t.dataset)).collect();
            let mut p = fit_logreg(&train.dataset, &others)?.into_iter();
            (p.next().unwrap(), p.next().unwrap(), p.next())
        }
    };
    // the optimizer never sees the protected attribute of the training sample
    let train = train.dataset.without_protected();
    Ok(Prepared { train, val: val.dataset, test: test.map(|t| t.dataset), p_train, p_val, p_test })
}

/// What a method produced: a deterministic rule on some probability model,
/// or a randomized classifier over post-shift rules on the training model.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Fitted {
    Rule { rule: PostShiftRule },
    Randomized { classifier: RandomizedClassifier },
}

/// Probabilities a fitted classifier is applied to, per split.
struct ModelProbs {
    train: ProbabilityModel,
    val: ProbabilityModel,
    test: Option<ProbabilityModel>,
}

impl ModelProbs {
    fn get(&self, split: &str) -> &ProbabilityModel {
        match split {
            "train" => &self.train,
            "val" => &self.val,
            _ => self.test.as_ref().expect("test probabilities exist when a test split does"),
        }
    }
}

pub struct Outcome {
    pub report: RunReport,
    pub predictions: BTreeMap<&'static str, SoftPredictions>,
    pub trace: Vec<TraceRecord>,
    pub fitted: Fitted,
}

fn elicit_config(config: &RunConfig, default_eps: f64) -> ElicitConfig {
    let o = &config.optim;
    ElicitConfig {
        epsilon: o.epsilon.map_or(EpsilonChoice::Fixed(default_eps), |e| e.choice()),
        mode: o.mode,
        probes: o.probes.clone(),
        reg: o.reg,
        form: SystemForm::Literal,
    }
}

fn predict(fitted: &Fitted, data: &Dataset, probs: &ProbabilityModel) -> Result<SoftPredictions> {
    Ok(match fitted {
        Fitted::Rule { rule } => SoftPredictions::from_assignment(&rule.apply(data, probs)?, data.n_classes())?,
        Fitted::Randomized { classifier } => classifier.materialize(&RuleContext::new(data, Some(probs)))?,
    })
}

/// Runs the configured method without touching the file system.
pub fn execute(config: &RunConfig, data: &Prepared) -> Result<Outcome> {
    let started = Instant::now();
    let m = data.n_classes();
    let metric = config.metric.build(m)?;
    let basis = config.basis.build(&data.train)?;
    let mut artifacts = Artifacts::default();
    let mut trace = Vec::new();
    let mut probs = ModelProbs { train: data.p_train.clone(), val: data.p_val.clone(), test: data.p_test.clone() };

    let fitted = match config.method {
        Method::PiEw => {
            let tr = Split::new(&data.train, &basis, Some(&data.p_train), config.optim.base)?;
            let va = Split::new(&data.val, &basis, Some(&data.p_val), config.optim.base)?;
            let (rule, result) = postshift::pi_ew_metric(&metric, &basis, &tr, &va, &elicit_config(config, 1.0))?;
            artifacts.record_elicitation(&result);
            Fitted::Rule { rule }
        }
        Method::FwEgKnown | Method::FwEgUnknown => {
            let known = config.method == Method::FwEgKnown;
            if known && metric.is_oracle() {
                bail!("fw-eg-known needs a closed-form metric; use fw-eg-unknown for oracle metrics");
            }
            let fw = FwConfig {
                iterations: config.optim.iterations,
                epsilon: config.optim.epsilon.map(|e| e.choice()),
                split: config.optim.split,
                path: if known { FwPath::Known } else { FwPath::Unknown },
                probes: config.optim.probes.clone(),
                reg: config.optim.reg,
                unknown_form: config.optim.unknown_form,
                seed: stream(config.seed, Stream::Probes).next_u64(),
            };
            match fw_eg(&metric, &basis, &data.train, &data.p_train, &data.val, &data.p_val, &fw) {
                Ok(out) => {
                    artifacts.record_trace(&out.trace);
                    trace = out.trace;
                    Fitted::Randomized { classifier: out.state.classifier }
                }
                Err(e) => return Err(e.into()),
            }
        }
        Method::ArgmaxTrain => Fitted::Rule { rule: argmax_baseline(&data.p_train) },
        Method::ArgmaxVal => {
            let others: Vec<&Dataset> = std::iter::once(&data.train).chain(data.test.as_ref()).collect();
            let mut p = fit_logreg(&data.val, &others)?.into_iter();
            let val = p.next().unwrap();
            probs = ModelProbs { train: p.next().unwrap(), val, test: p.next() };
            Fitted::Rule { rule: argmax_baseline(&probs.val) }
        }
        Method::PluginTrainVal => {
            let search = coordinate_search_plugin(&data.p_val, &data.val, &metric, config.optim.spacing)?;
            artifacts.queries = Some(search.queries);
            artifacts.zetas = Some(search.zetas.clone());
            artifacts.capped = Some(search.capped.clone());
            Fitted::Rule { rule: search.rule }
        }
    };

    let mut predictions = BTreeMap::new();
    let mut values = BTreeMap::new();
    for (name, d) in data.splits() {
        let p = predict(&fitted, d, probs.get(name))?;
        let value = match metric.evaluate(d, &p) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("metric not available on the {name} split: {e}");
                None
            }
        };
        values.insert(name.to_string(), value);
        predictions.insert(name, p);
    }
    let report = RunReport::new(config, values, artifacts, started.elapsed());
    Ok(Outcome { report, predictions, trace, fitted })
}

/// Runs and writes `report.jsonl`, `summary.txt`, `predictions.csv`,
/// `rule.json` and, for Frank-Wolfe, `trace.jsonl` into the output directory.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let out = &config.output;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let result = prepare(config).and_then(|data| execute(config, &data).map(|o| (o, data)));
    let (outcome, data) = match result {
        Ok(r) => r,
        Err(e) => {
            if let Some(fw) = e.downcast_ref::<FwError>() {
                report::write_trace(&out.join("trace.jsonl"), &fw.trace)?;
            }
            report::write_error(&out.join("error.json"), &e)?;
            return Err(e);
        }
    };
    report::write_predictions(&out.join("predictions.csv"), &data, &outcome.predictions)?;
    report::write_json_lines(&out.join("report.jsonl"), std::slice::from_ref(&outcome.report))?;
    fs::write(out.join("summary.txt"), report::summary_table(std::slice::from_ref(&outcome.report)))?;
    fs::write(out.join("rule.json"), serde_json::to_string_pretty(&outcome.fitted)?)?;
    if !outcome.trace.is_empty() {
        report::write_trace(&out.join("trace.jsonl"), &outcome.trace)?;
    }
    Ok(outcome.report)
}
