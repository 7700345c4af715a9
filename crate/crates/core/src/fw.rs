//! Frank-Wolfe over diagonal confusions with elicited gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisMatrix, BasisSet};
use crate::classifier::{Component, DeterministicRule, RandomizedClassifier, SoftPredictions};
use crate::confusion::confusion;
use crate::data::{Dataset, ProbabilityModel};
use crate::elicit::{ElicitConfig, EpsilonChoice, ProbeKind, Split, SystemForm, WeightMode};
use crate::error::{Error, Result};
use crate::metrics::MetricSpec;
use crate::plugin::{pi_ew, PostShiftRule};

pub const DEFAULT_ITERATIONS: usize = 25;
pub const DEFAULT_EPSILON_KNOWN: f64 = 1.0;
pub const DEFAULT_EPSILON_UNKNOWN: f64 = 0.1;

/// Step size at iteration `t` (counting from 0).
pub fn step_size(t: usize) -> f64 {
    2.0 / (t as f64 + 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// One validation sample for elicitation and for measuring iterates.
    #[default]
    Shared,
    /// The validation sample is split in two: the first half feeds the
    /// elicitation rhs, the second half measures confusions.
    Halved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FwPath {
    /// Known gradient for closed-form metrics, local probing for oracles.
    #[default]
    Auto,
    Known,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwConfig {
    pub iterations: usize,
    /// Defaults to [`DEFAULT_EPSILON_KNOWN`] or [`DEFAULT_EPSILON_UNKNOWN`].
    pub epsilon: Option<EpsilonChoice>,
    pub split: SplitMode,
    pub path: FwPath,
    pub probes: ProbeKind,
    pub reg: f64,
    /// System form on the unknown path; the known path is always literal.
    pub unknown_form: SystemForm,
    /// Seeds the halved split.
    pub seed: u64,
}

impl Default for FwConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            epsilon: None,
            split: SplitMode::Shared,
            path: FwPath::Auto,
            probes: ProbeKind::Fixed,
            reg: 0.0,
            unknown_form: SystemForm::Centered,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwState {
    pub t: usize,
    pub classifier: RandomizedClassifier,
    /// Diagonal confusion of the iterate on the measuring sample.
    pub diag: Vec<f64>,
}

/// `h ← (1−s)h + s·f̂`, `c ← (1−s)c + s·c̃` with `s = 2/(t+2)`.
pub fn fw_step(state: &FwState, f_hat: DeterministicRule, c_tilde: &[f64]) -> Result<FwState> {
    if c_tilde.len() != state.diag.len() {
        return Err(Error::SizeMismatch("confusion vectors differ in length".into()));
    }
    let s = step_size(state.t);
    let new = RandomizedClassifier::new(vec![Component { weight: 1.0, rule: f_hat }])?;
    let mut classifier = RandomizedClassifier::mix(&state.classifier, &new, 1.0 - s)?;
    classifier.compact();
    let diag = state.diag.iter().zip(c_tilde).map(|(c, n)| (1.0 - s) * c + s * n).collect();
    Ok(FwState { t: state.t + 1, classifier, diag })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    /// `∇ψ(c_t)` on the known path.
    pub gradient: Option<Vec<f64>>,
    /// Set on the unknown path, where the shifted oracle is elicited.
    pub shifted: bool,
    pub alpha: Vec<f64>,
    pub condition_number: f64,
    pub residual: f64,
    pub epsilon: f64,
    pub step: f64,
    /// `c_t` before the step.
    pub diag: Vec<f64>,
    /// Metric value of `h^t` before the step.
    pub metric: f64,
    /// Metric value of `h^{t+1}`.
    pub metric_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwOutput {
    pub state: FwState,
    pub trace: Vec<TraceRecord>,
    /// Validation indices feeding elicitation and measurement (equal in
    /// shared mode).
    pub elicit_indices: Vec<usize>,
    pub measure_indices: Vec<usize>,
}

impl FwOutput {
    pub fn classifier(&self) -> &RandomizedClassifier {
        &self.state.classifier
    }
}

#[derive(Debug, thiserror::Error)]
#[error("Frank-Wolfe iteration {iteration} failed")]
pub struct FwError {
    pub iteration: usize,
    #[source]
    pub source: Error,
    /// Records of the iterations completed before the failure.
    pub trace: Vec<TraceRecord>,
}

struct Sample {
    data: Dataset,
    probs: ProbabilityModel,
    basis: BasisMatrix,
    pred: SoftPredictions,
}

impl Sample {
    fn new(data: Dataset, probs: ProbabilityModel, basis: &BasisSet, rule: &PostShiftRule) -> Result<Self> {
        probs.check_aligned(&data)?;
        let basis_m = basis.evaluate(&data)?;
        let pred = SoftPredictions::from_assignment(&rule.apply(&data, &probs)?, data.n_classes())?;
        Ok(Self { data, probs, basis: basis_m, pred })
    }

    fn split(&self) -> Result<Split<'_>> {
        Split::from_parts(&self.data, self.basis.clone(), Some(&self.probs), self.pred.clone())
    }

    fn absorb(&mut self, assignment: &[usize], s: f64) {
        for (x, &k) in assignment.iter().enumerate() {
            let row = self.pred.row_mut(x);
            row.iter_mut().for_each(|v| *v *= 1.0 - s);
            row[k] += s;
        }
    }
}

fn halves(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (a, b) = idx.split_at(n / 2);
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Runs `T` Frank-Wolfe iterations starting from the argmax of `η̂`.
#[allow(clippy::too_many_arguments)]
pub fn fw_eg(
    metric: &MetricSpec,
    basis: &BasisSet,
    train: &Dataset,
    train_probs: &ProbabilityModel,
    val: &Dataset,
    val_probs: &ProbabilityModel,
    config: &FwConfig,
) -> std::result::Result<FwOutput, FwError> {
    let setup = |source| FwError { iteration: 0, source, trace: Vec::new() };
    if config.iterations == 0 {
        return Err(setup(Error::InvalidArgument("at least one iteration is required".into())));
    }
    let known = match config.path {
        FwPath::Auto => !metric.is_oracle(),
        FwPath::Known => true,
        FwPath::Unknown => false,
    };
    let epsilon = config.epsilon.clone().unwrap_or(EpsilonChoice::Fixed(if known {
        DEFAULT_EPSILON_KNOWN
    } else {
        DEFAULT_EPSILON_UNKNOWN
    }));
    let m = train.n_classes();
    let h0 = PostShiftRule::argmax(m);

    let (elicit_indices, measure_indices) = match config.split {
        SplitMode::Shared => ((0..val.len()).collect::<Vec<_>>(), (0..val.len()).collect::<Vec<_>>()),
        SplitMode::Halved => {
            if val.len() < 2 {
                return Err(setup(Error::InvalidArgument("halved split needs at least 2 validation rows".into())));
            }
            halves(val.len(), config.seed)
        }
    };
    let build = |idx: &[usize]| -> Result<Sample> {
        Sample::new(val.subset(idx)?, val_probs.subset(idx), basis, &h0)
    };
    let mut tr = Sample::new(train.clone(), train_probs.clone(), basis, &h0).map_err(setup)?;
    let mut ev = build(&elicit_indices).map_err(setup)?;
    let mut ms = match config.split {
        SplitMode::Shared => None,
        SplitMode::Halved => Some(build(&measure_indices).map_err(setup)?),
    };

    let priors = ms.as_ref().unwrap_or(&ev).data.priors();
    let c0 = {
        let s = ms.as_ref().unwrap_or(&ev);
        confusion(&s.data, &s.pred).map_err(setup)?.diag()
    };
    let mut state = FwState {
        t: 0,
        classifier: RandomizedClassifier::deterministic(DeterministicRule::PostShift(h0)),
        diag: c0,
    };
    let elicit_config = ElicitConfig {
        epsilon,
        mode: WeightMode::Diagonal,
        probes: config.probes.clone(),
        reg: config.reg,
        form: if known { SystemForm::Literal } else { config.unknown_form },
    };

    let mut trace = Vec::with_capacity(config.iterations);
    for t in 0..config.iterations {
        let fail = |source, trace: &Vec<TraceRecord>| FwError { iteration: t, source, trace: trace.clone() };
        let measured = |ev: &Sample, ms: &Option<Sample>, diag: &[f64]| -> Result<f64> {
            if known {
                Ok(metric.value_from_diag(diag, &priors)?.value)
            } else {
                let s = ms.as_ref().unwrap_or(ev);
                metric.evaluate(&s.data, &s.pred)
            }
        };
        let step = (|| -> Result<(TraceRecord, PostShiftRule)> {
            let metric_now = measured(&ev, &ms, &state.diag)?;
            let train_split = tr.split()?;
            let val_split = ev.split()?;
            let (gradient, rule, result) = if known {
                let beta = metric.gradient(&state.diag, &priors)?;
                let lin = MetricSpec::Linear { weights: beta.clone() };
                let mut objective = |h: &SoftPredictions| lin.evaluate(&ev.data, h);
                let (rule, result) = pi_ew(&mut objective, basis, &train_split, &val_split, &elicit_config)?;
                (Some(beta), rule, result)
            } else {
                let base = metric.evaluate(&ev.data, &ev.pred)?;
                if !base.is_finite() {
                    return Err(Error::NonFiniteMetric { probe: usize::MAX, value: base });
                }
                let mut objective = |h: &SoftPredictions| Ok(metric.evaluate(&ev.data, h)? - base);
                let (rule, result) = pi_ew(&mut objective, basis, &train_split, &val_split, &elicit_config)?;
                (None, rule, result)
            };
            let record = TraceRecord {
                t,
                shifted: gradient.is_none(),
                gradient,
                alpha: result.coefficients.alpha.clone(),
                condition_number: result.condition_number,
                residual: result.residual,
                epsilon: result.epsilon,
                step: step_size(t),
                diag: state.diag.clone(),
                metric: metric_now,
                metric_after: f64::NAN,
            };
            Ok((record, rule))
        })();
        let (mut record, rule) = step.map_err(|e| fail(e, &trace))?;

        let advance = (|| -> Result<FwState> {
            let s = step_size(t);
            let pred_tr = rule.predict_with(&tr.basis, &tr.probs)?;
            let pred_ev = rule.predict_with(&ev.basis, &ev.probs)?;
            let c_tilde = {
                let (data, assignment) = match &ms {
                    Some(ms) => (&ms.data, rule.predict_with(&ms.basis, &ms.probs)?),
                    None => (&ev.data, pred_ev.clone()),
                };
                let diag = confusion(data, &SoftPredictions::from_assignment(&assignment, m)?)?.diag();
                if let Some(ms) = ms.as_mut() {
                    ms.absorb(&assignment, s);
                }
                diag
            };
            tr.absorb(&pred_tr, s);
            ev.absorb(&pred_ev, s);
            fw_step(&state, DeterministicRule::PostShift(rule), &c_tilde)
        })();
        state = advance.map_err(|e| fail(e, &trace))?;
        record.metric_after = measured(&ev, &ms, &state.diag).map_err(|e| fail(e, &trace))?;
        if !record.metric_after.is_finite() {
            return Err(fail(Error::NonFiniteMetric { probe: usize::MAX, value: record.metric_after }, &trace));
        }
        log::debug!("fw iteration {t}: metric {:.6} -> {:.6}", record.metric, record.metric_after);
        trace.push(record);
    }
    Ok(FwOutput { state, trace, elicit_indices, measure_indices })
}
