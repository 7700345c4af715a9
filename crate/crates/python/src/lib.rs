//! Python bindings: datasets, metrics (including Python callables as
//! black-box oracles), weight elicitation, PI-EW, FW-EG, the coordinate
//! search baseline and the shift simulators.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use postshift::baselines::coordinate_search_plugin;
use postshift::classifier::RuleContext;
use postshift::elicit::{BaseClassifier, ProbeKind, SystemForm};
use postshift::fw::{fw_eg as run_fw, FwConfig, FwError, FwPath, SplitMode};
use postshift::logreg::{LogRegConfig, LogisticRegression};
use postshift::metrics::{BlackBox, FairnessOracle, MetricOracle};
use postshift::shiftlab::{self, benchmarks, ShiftSpec, SyntheticSpec};
use postshift::{
    BasisSet, Dataset, ElicitConfig, EpsilonChoice, MetricSpec, OracleHandle, PostShiftRule, ProbabilityModel,
    RandomizedClassifier, SoftPredictions, Split, WeightMode,
};

fn err(e: postshift::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fw_err(e: FwError) -> PyErr {
    PyRuntimeError::new_err(format!("{e}: {}", e.source))
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serializes through JSON into plain Python objects.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(json_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Parses a kebab-case enum name such as `"diagonal"` or `"halved"`.
fn named<T: DeserializeOwned>(what: &str, s: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} {s:?}")))
}

fn rows(values: &[f64], m: usize) -> Vec<Vec<f64>> {
    values.chunks(m).map(<[f64]>::to_vec).collect()
}

#[pyclass(name = "Dataset", module = "postshift", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (features, labels, n_classes, groups=None, protected=None))]
    fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        n_classes: usize,
        groups: Option<Vec<usize>>,
        protected: Option<Vec<usize>>,
    ) -> PyResult<Self> {
        let mut d = Dataset::new(features, labels, n_classes).map_err(err)?;
        if let Some(g) = groups {
            d = d.with_groups(g).map_err(err)?;
        }
        if let Some(p) = protected {
            d = d.with_protected(p).map_err(err)?;
        }
        Ok(Self { inner: d })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, features={}, classes={})",
            self.inner.len(),
            self.inner.n_features(),
            self.inner.n_classes()
        )
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.inner.n_classes()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        rows(self.inner.features(), self.inner.n_features())
    }

    #[getter]
    fn groups(&self) -> Option<Vec<usize>> {
        self.inner.groups().map(<[usize]>::to_vec)
    }

    #[getter]
    fn protected(&self) -> Option<Vec<usize>> {
        self.inner.protected().map(<[usize]>::to_vec)
    }

    fn priors(&self) -> Vec<f64> {
        self.inner.priors()
    }

    fn subset(&self, indices: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: self.inner.subset(&indices).map_err(err)? })
    }

    fn without_protected(&self) -> Self {
        Self { inner: self.inner.without_protected() }
    }
}

/// Class-probability estimates, one row per example.
#[pyclass(name = "Probabilities", module = "postshift", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProbabilities {
    inner: ProbabilityModel,
}

#[pymethods]
impl PyProbabilities {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self { inner: ProbabilityModel::from_rows(&rows).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.inner.n_classes()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        rows(self.inner.values(), self.inner.n_classes())
    }

    fn argmax(&self) -> PyResult<Vec<usize>> {
        let p = SoftPredictions::new(self.inner.values().to_vec(), self.inner.n_classes()).map_err(err)?;
        Ok(p.argmax())
    }
}

#[pyclass(name = "LogisticRegression", module = "postshift", frozen, skip_from_py_object)]
struct PyLogReg {
    inner: LogisticRegression,
}

#[pymethods]
impl PyLogReg {
    #[staticmethod]
    #[pyo3(signature = (data, iterations=300, learning_rate=0.5, l2=1e-4))]
    fn fit(data: &PyDataset, iterations: usize, learning_rate: f64, l2: f64) -> PyResult<Self> {
        let config = LogRegConfig { iterations, learning_rate, l2 };
        Ok(Self { inner: LogisticRegression::fit(&data.inner, &config).map_err(err)? })
    }

    fn predict(&self, data: &PyDataset) -> PyResult<PyProbabilities> {
        Ok(PyProbabilities { inner: self.inner.predict(&data.inner).map_err(err)? })
    }
}

/// A Python callable `f(labels, predictions, protected) -> float`.
struct PyOracle {
    name: String,
    callable: Py<PyAny>,
}

impl MetricOracle for PyOracle {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn query(&self, data: &Dataset, predictions: &SoftPredictions) -> postshift::Result<f64> {
        Python::attach(|py| {
            let preds = rows(predictions.values(), predictions.n_classes());
            let protected = data.protected().map(<[usize]>::to_vec);
            self.callable
                .call1(py, (data.labels().to_vec(), preds, protected))
                .and_then(|v| v.extract::<f64>(py))
                .map_err(|e| postshift::Error::InvalidArgument(format!("oracle {} raised: {e}", self.name)))
        })
    }
}

#[pyclass(name = "Metric", module = "postshift", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMetric {
    inner: MetricSpec,
}

#[pymethods]
impl PyMetric {
    #[staticmethod]
    fn accuracy(n_classes: usize) -> Self {
        Self { inner: MetricSpec::accuracy(n_classes) }
    }

    #[staticmethod]
    fn linear(weights: Vec<f64>) -> Self {
        Self { inner: MetricSpec::Linear { weights } }
    }

    /// Row-major `m × m` costs on the full confusion matrix.
    #[staticmethod]
    fn linear_full(costs: Vec<f64>) -> Self {
        Self { inner: MetricSpec::LinearFull { costs } }
    }

    #[staticmethod]
    fn gmean() -> Self {
        Self { inner: MetricSpec::GMean }
    }

    #[staticmethod]
    fn fmeasure_macro() -> Self {
        Self { inner: MetricSpec::FMeasureMacro }
    }

    /// `positive` is a 0-based class index.
    #[staticmethod]
    fn fmeasure_binary(positive: usize) -> Self {
        Self { inner: MetricSpec::FMeasureBinary { positive } }
    }

    #[staticmethod]
    fn fairness() -> Self {
        Self { inner: MetricSpec::Oracle(OracleHandle::new(FairnessOracle)) }
    }

    /// Hides a closed-form metric behind the oracle interface.
    #[staticmethod]
    fn black_box(metric: &PyMetric) -> Self {
        Self { inner: MetricSpec::Oracle(OracleHandle::new(BlackBox(metric.inner.clone()))) }
    }

    /// Wraps `callable(labels, predictions, protected) -> float`, where
    /// `predictions` holds per-example class probabilities.
    #[staticmethod]
    #[pyo3(signature = (callable, name="python-oracle"))]
    fn oracle(callable: Py<PyAny>, name: &str) -> Self {
        let oracle = PyOracle { name: name.into(), callable };
        Self { inner: MetricSpec::Oracle(OracleHandle::new(oracle)) }
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name()
    }

    #[getter]
    fn is_oracle(&self) -> bool {
        self.inner.is_oracle()
    }

    fn __repr__(&self) -> String {
        format!("Metric({})", self.inner.name())
    }

    fn evaluate(&self, data: &PyDataset, predictions: Vec<Vec<f64>>) -> PyResult<f64> {
        let p = SoftPredictions::from_rows(&predictions).map_err(err)?;
        self.inner.evaluate(&data.inner, &p).map_err(err)
    }

    fn value_from_diag(&self, diag: Vec<f64>, priors: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.value_from_diag(&diag, &priors).map_err(err)?.value)
    }

    fn gradient(&self, diag: Vec<f64>, priors: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.gradient(&diag, &priors).map_err(err)
    }
}

#[pyclass(name = "Basis", module = "postshift", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBasis {
    inner: BasisSet,
}

#[pymethods]
impl PyBasis {
    #[staticmethod]
    fn constant() -> Self {
        Self { inner: BasisSet::constant() }
    }

    /// One indicator per group id, in the given order.
    #[staticmethod]
    fn clusters(ids: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: BasisSet::clusters(ids).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: serde_json::from_str(text).map_err(json_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn evaluate(&self, data: &PyDataset) -> PyResult<Vec<Vec<f64>>> {
        let b = self.inner.evaluate(&data.inner).map_err(err)?;
        Ok((0..b.len()).map(|i| b.row(i).to_vec()).collect())
    }
}

/// `x ↦ argmax_i Σ_j W_ji(x) η̂_j(x)`.
#[pyclass(name = "Rule", module = "postshift", frozen, skip_from_py_object)]
struct PyRule {
    inner: PostShiftRule,
}

#[pymethods]
impl PyRule {
    #[staticmethod]
    fn argmax(n_classes: usize) -> Self {
        Self { inner: PostShiftRule::argmax(n_classes) }
    }

    #[staticmethod]
    fn from_class_weights(weights: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: PostShiftRule::from_class_weights(weights).map_err(err)? })
    }

    fn predict(&self, data: &PyDataset, probs: &PyProbabilities) -> PyResult<Vec<usize>> {
        self.inner.apply(&data.inner, &probs.inner).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }
}

/// A mixture of deterministic rules, as returned by Frank-Wolfe.
#[pyclass(name = "RandomizedClassifier", module = "postshift", frozen, skip_from_py_object)]
struct PyRandomized {
    inner: RandomizedClassifier,
}

#[pymethods]
impl PyRandomized {
    fn __len__(&self) -> usize {
        self.inner.components().len()
    }

    /// Per-example class probabilities of the mixture.
    fn predict_proba(&self, data: &PyDataset, probs: &PyProbabilities) -> PyResult<Vec<Vec<f64>>> {
        let p = self.inner.materialize(&RuleContext::new(&data.inner, Some(&probs.inner))).map_err(err)?;
        Ok(rows(p.values(), p.n_classes()))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }
}

fn epsilon_choice(epsilon: &Bound<'_, PyAny>) -> PyResult<EpsilonChoice> {
    if let Ok(s) = epsilon.extract::<String>() {
        return match s.as_str() {
            "auto" => Ok(EpsilonChoice::Auto),
            _ => Err(PyValueError::new_err(format!("epsilon must be a number or \"auto\", got {s:?}"))),
        };
    }
    Ok(EpsilonChoice::Fixed(epsilon.extract::<f64>()?))
}

struct Inputs<'a> {
    train: Split<'a>,
    val: Split<'a>,
}

fn splits<'a>(
    basis: &PyBasis,
    train: &'a PyDataset,
    train_probs: &'a PyProbabilities,
    val: &'a PyDataset,
    val_probs: &'a PyProbabilities,
    base: &str,
) -> PyResult<Inputs<'a>> {
    let base: BaseClassifier = named("base classifier", base)?;
    Ok(Inputs {
        train: Split::new(&train.inner, &basis.inner, Some(&train_probs.inner), base).map_err(err)?,
        val: Split::new(&val.inner, &basis.inner, Some(&val_probs.inner), base).map_err(err)?,
    })
}

fn elicit_config(
    epsilon: &Bound<'_, PyAny>,
    mode: &str,
    reg: f64,
    form: &str,
    gamma: Option<f64>,
    omega: Option<f64>,
) -> PyResult<ElicitConfig> {
    let probes = match (gamma, omega) {
        (None, None) => ProbeKind::Fixed,
        (Some(gamma), Some(omega)) => ProbeKind::Threshold { gamma, omega, relax_step: None },
        _ => return Err(PyValueError::new_err("threshold probes need both gamma and omega")),
    };
    Ok(ElicitConfig {
        epsilon: epsilon_choice(epsilon)?,
        mode: named::<WeightMode>("weight mode", mode)?,
        probes,
        reg,
        form: named::<SystemForm>("system form", form)?,
    })
}

/// Elicits the example-weight coefficients for `metric` on `val`; returns
/// the full elicitation result as a dict.
#[pyfunction]
#[pyo3(signature = (metric, basis, train, train_probs, val, val_probs, epsilon=None, mode="diagonal", reg=0.0, form="literal", base="soft", gamma=None, omega=None))]
#[allow(clippy::too_many_arguments)]
fn elicit_weights<'py>(
    py: Python<'py>,
    metric: &PyMetric,
    basis: &PyBasis,
    train: &PyDataset,
    train_probs: &PyProbabilities,
    val: &PyDataset,
    val_probs: &PyProbabilities,
    epsilon: Option<&Bound<'py, PyAny>>,
    mode: &str,
    reg: f64,
    form: &str,
    base: &str,
    gamma: Option<f64>,
    omega: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let one = 1.0f64.into_pyobject(py)?.into_any();
    let config = elicit_config(epsilon.unwrap_or(&one), mode, reg, form, gamma, omega)?;
    let s = splits(basis, train, train_probs, val, val_probs, base)?;
    let mut objective = postshift::plugin::metric_objective(&metric.inner, &val.inner);
    let result = postshift::elicit(&mut objective, &basis.inner, &s.train, &s.val, &config).map_err(err)?;
    to_py(py, &result)
}

/// Plug-in with elicited weights: returns `(rule, elicitation result)`.
#[pyfunction]
#[pyo3(signature = (metric, basis, train, train_probs, val, val_probs, epsilon=None, mode="diagonal", reg=0.0, form="literal", base="soft", gamma=None, omega=None))]
#[allow(clippy::too_many_arguments)]
fn pi_ew<'py>(
    py: Python<'py>,
    metric: &PyMetric,
    basis: &PyBasis,
    train: &PyDataset,
    train_probs: &PyProbabilities,
    val: &PyDataset,
    val_probs: &PyProbabilities,
    epsilon: Option<&Bound<'py, PyAny>>,
    mode: &str,
    reg: f64,
    form: &str,
    base: &str,
    gamma: Option<f64>,
    omega: Option<f64>,
) -> PyResult<(PyRule, Bound<'py, PyAny>)> {
    let one = 1.0f64.into_pyobject(py)?.into_any();
    let config = elicit_config(epsilon.unwrap_or(&one), mode, reg, form, gamma, omega)?;
    let s = splits(basis, train, train_probs, val, val_probs, base)?;
    let (rule, result) = postshift::pi_ew_metric(&metric.inner, &basis.inner, &s.train, &s.val, &config).map_err(err)?;
    Ok((PyRule { inner: rule }, to_py(py, &result)?))
}

/// Frank-Wolfe with elicited gradients: returns `(classifier, trace)`.
/// `path` is `"auto"`, `"known"` or `"unknown"`; `epsilon=None` picks
/// the path's default.
#[pyfunction]
#[pyo3(signature = (metric, basis, train, train_probs, val, val_probs, iterations=25, epsilon=None, path="auto", split="shared", reg=0.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn fw_eg<'py>(
    py: Python<'py>,
    metric: &PyMetric,
    basis: &PyBasis,
    train: &PyDataset,
    train_probs: &PyProbabilities,
    val: &PyDataset,
    val_probs: &PyProbabilities,
    iterations: usize,
    epsilon: Option<&Bound<'py, PyAny>>,
    path: &str,
    split: &str,
    reg: f64,
    seed: u64,
) -> PyResult<(PyRandomized, Bound<'py, PyAny>)> {
    let config = FwConfig {
        iterations,
        epsilon: epsilon.map(epsilon_choice).transpose()?,
        split: named::<SplitMode>("split mode", split)?,
        path: named::<FwPath>("path", path)?,
        reg,
        seed,
        ..FwConfig::default()
    };
    let out = run_fw(
        &metric.inner,
        &basis.inner,
        &train.inner,
        &train_probs.inner,
        &val.inner,
        &val_probs.inner,
        &config,
    )
    .map_err(fw_err)?;
    let trace = to_py(py, &out.trace)?;
    Ok((PyRandomized { inner: out.state.classifier }, trace))
}

/// Coordinate-wise search over per-class weights on the validation
/// metric: returns `(rule, {"zetas", "capped", "queries", "value"})`.
#[pyfunction]
#[pyo3(signature = (metric, probs, val, spacing=1e-4))]
fn coordinate_search<'py>(
    py: Python<'py>,
    metric: &PyMetric,
    probs: &PyProbabilities,
    val: &PyDataset,
    spacing: f64,
) -> PyResult<(PyRule, Bound<'py, PyAny>)> {
    let s = coordinate_search_plugin(&probs.inner, &val.inner, &metric.inner, spacing).map_err(err)?;
    let info = serde_json::json!({ "zetas": s.zetas, "capped": s.capped, "queries": s.queries, "value": s.value });
    Ok((PyRule { inner: s.rule }, to_py(py, &info)?))
}

/// Row-major `m × m` confusion matrix, `C[i][j] = P(y = i, h = j)`.
#[pyfunction]
fn confusion(data: &PyDataset, predictions: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let p = SoftPredictions::from_rows(&predictions).map_err(err)?;
    let c = postshift::confusion(&data.inner, &p).map_err(err)?;
    Ok(rows(c.full(), c.n_classes()))
}

/// A clean distribution `D` with its training corruption `μ`.
#[pyclass(name = "Benchmark", module = "postshift", frozen, skip_from_py_object)]
struct PyBenchmark {
    spec: SyntheticSpec,
    shift: ShiftSpec,
}

#[pymethods]
impl PyBenchmark {
    #[staticmethod]
    fn two_point_domain_shift() -> Self {
        let (spec, shift) = benchmarks::two_point_domain_shift();
        Self { spec, shift }
    }

    #[staticmethod]
    #[pyo3(signature = (flip=0.3))]
    fn gaussian_cluster_noise(flip: f64) -> Self {
        let (spec, shift) = benchmarks::gaussian_cluster_noise(flip);
        Self { spec, shift }
    }

    #[staticmethod]
    fn from_json(spec: &str, shift: &str) -> PyResult<Self> {
        let spec: SyntheticSpec = serde_json::from_str(spec).map_err(json_err)?;
        let shift: ShiftSpec = serde_json::from_str(shift).map_err(json_err)?;
        spec.validate().map_err(err)?;
        shift.validate(spec.n_classes()).map_err(err)?;
        Ok(Self { spec, shift })
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.spec.n_classes()
    }

    fn sample_clean(&self, n: usize, seed: u64) -> PyResult<PyDataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(PyDataset { inner: self.spec.sample_clean(n, &mut rng).map_err(err)? })
    }

    /// A training sample from `μ`, built from a clean sample.
    fn corrupt(&self, clean: &PyDataset, seed: u64) -> PyResult<PyDataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(PyDataset { inner: shiftlab::corrupt(&self.spec, &clean.inner, &self.shift, &mut rng).map_err(err)? })
    }

    /// `P^D(y | x)` at each row.
    fn clean_conditional(&self, data: &PyDataset) -> PyResult<PyProbabilities> {
        Ok(PyProbabilities { inner: self.spec.conditional_model(&data.inner).map_err(err)? })
    }

    /// `P^μ(y | x)` at each row: the exact training conditional.
    fn noisy_conditional(&self, data: &PyDataset) -> PyResult<PyProbabilities> {
        Ok(PyProbabilities { inner: shiftlab::noisy_conditional(&self.spec, &self.shift, &data.inner).map_err(err)? })
    }

    /// Best value of `argmax_i w_i P^D(y=i|x)` over a per-class weight
    /// grid; on `sample` when given, else on the population.
    #[pyo3(signature = (metric, resolution=20, sample=None))]
    fn bayes_oracle<'py>(
        &self,
        py: Python<'py>,
        metric: &PyMetric,
        resolution: usize,
        sample: Option<&PyDataset>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let v = shiftlab::bayes_oracle(&self.spec, &metric.inner, resolution, sample.map(|s| &s.inner)).map_err(err)?;
        to_py(py, &v)
    }

    /// Correction weights `W(x)` (row-major `m × m`) that turn the
    /// training loss with `costs` into the clean one.
    #[pyo3(signature = (costs, row, group=None))]
    fn true_weights(&self, costs: Vec<f64>, row: Vec<f64>, group: Option<usize>) -> PyResult<Vec<f64>> {
        shiftlab::true_weights(&self.spec, &self.shift, &costs, &row, group).map_err(err)
    }
}

#[pymodule(name = "postshift")]
fn postshift_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyProbabilities>()?;
    m.add_class::<PyLogReg>()?;
    m.add_class::<PyMetric>()?;
    m.add_class::<PyBasis>()?;
    m.add_class::<PyRule>()?;
    m.add_class::<PyRandomized>()?;
    m.add_class::<PyBenchmark>()?;
    m.add_function(wrap_pyfunction!(elicit_weights, m)?)?;
    m.add_function(wrap_pyfunction!(pi_ew, m)?)?;
    m.add_function(wrap_pyfunction!(fw_eg, m)?)?;
    m.add_function(wrap_pyfunction!(coordinate_search, m)?)?;
    m.add_function(wrap_pyfunction!(confusion, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
