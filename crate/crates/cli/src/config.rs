//! Run configuration, read from TOML. See `docs/config.md` for the schema.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use postshift::elicit::{BaseClassifier, ProbeKind, SystemForm};
use postshift::fw::SplitMode;
use postshift::metrics::{BlackBox, FairnessOracle};
use postshift::shiftlab::{benchmarks, ShiftSpec, SyntheticSpec};
use postshift::{BasisKind, BasisSet, Dataset, EpsilonChoice, MetricSpec, OracleHandle, Schema, WeightMode};

pub const CONFIG_VERSION: u32 = 1;

fn current_version() -> u32 {
    CONFIG_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PiEw,
    FwEgKnown,
    FwEgUnknown,
    ArgmaxTrain,
    ArgmaxVal,
    PluginTrainVal,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::PiEw => "pi-ew",
            Method::FwEgKnown => "fw-eg-known",
            Method::FwEgUnknown => "fw-eg-unknown",
            Method::ArgmaxTrain => "argmax-train",
            Method::ArgmaxVal => "argmax-val",
            Method::PluginTrainVal => "plugin-train-val",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricName {
    Accuracy,
    Linear,
    LinearFull,
    Gmean,
    FmeasureMacro,
    FmeasureBinary,
    Fairness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub name: MetricName,
    /// Per-class weights for `linear`.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Row-major `m × m` costs for `linear-full`.
    #[serde(default)]
    pub costs: Option<Vec<f64>>,
    /// Zero-based positive class for `fmeasure-binary`.
    #[serde(default = "default_positive")]
    pub positive: usize,
    /// Hide a closed-form metric behind the query interface.
    #[serde(default)]
    pub blackbox: bool,
}

fn default_positive() -> usize {
    1
}

impl MetricName {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Accuracy => "accuracy",
            MetricName::Linear => "linear",
            MetricName::LinearFull => "linear-full",
            MetricName::Gmean => "gmean",
            MetricName::FmeasureMacro => "fmeasure-macro",
            MetricName::FmeasureBinary => "fmeasure-binary",
            MetricName::Fairness => "fairness",
        }
    }
}

impl MetricConfig {
    pub fn named(name: MetricName) -> Self {
        Self { name, weights: None, costs: None, positive: default_positive(), blackbox: false }
    }

    pub fn build(&self, m: usize) -> Result<MetricSpec> {
        let spec = match self.name {
            MetricName::Accuracy => MetricSpec::accuracy(m),
            MetricName::Linear => {
                let weights = self.weights.clone().context("metric `linear` needs `weights`")?;
                if weights.len() != m {
                    bail!("metric `linear` has {} weights for {m} classes", weights.len());
                }
                MetricSpec::Linear { weights }
            }
            MetricName::LinearFull => {
                let costs = self.costs.clone().context("metric `linear-full` needs `costs`")?;
                if costs.len() != m * m {
                    bail!("metric `linear-full` needs {} costs, got {}", m * m, costs.len());
                }
                MetricSpec::LinearFull { costs }
            }
            MetricName::Gmean => MetricSpec::GMean,
            MetricName::FmeasureMacro => MetricSpec::FMeasureMacro,
            MetricName::FmeasureBinary => MetricSpec::FMeasureBinary { positive: self.positive },
            MetricName::Fairness => return Ok(MetricSpec::Oracle(OracleHandle::new(FairnessOracle))),
        };
        Ok(if self.blackbox { MetricSpec::Oracle(OracleHandle::new(BlackBox(spec))) } else { spec })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    pub val: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
    pub schema: Schema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    TwoPointDomainShift,
    GaussianClusterNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbSource {
    /// The exact training conditional of the simulated distribution.
    #[default]
    Exact,
    /// Logistic regression fitted on the training sample.
    Logreg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    #[serde(default)]
    pub benchmark: Option<Benchmark>,
    /// Flip probability for `gaussian-cluster-noise`.
    #[serde(default = "default_flip")]
    pub flip: f64,
    #[serde(default)]
    pub spec: Option<SyntheticSpec>,
    #[serde(default)]
    pub shift: Option<ShiftSpec>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    #[serde(default)]
    pub probs: ProbSource,
}

fn default_flip() -> f64 {
    0.3
}

impl SyntheticConfig {
    pub fn distributions(&self) -> Result<(SyntheticSpec, ShiftSpec)> {
        match (self.benchmark, &self.spec, &self.shift) {
            (Some(Benchmark::TwoPointDomainShift), None, None) => Ok(benchmarks::two_point_domain_shift()),
            (Some(Benchmark::GaussianClusterNoise), None, None) => Ok(benchmarks::gaussian_cluster_noise(self.flip)),
            (None, Some(spec), Some(shift)) => Ok((spec.clone(), shift.clone())),
            _ => bail!("synthetic data needs either `benchmark` or both `spec` and `shift`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbfConfig {
    pub center: Vec<f64>,
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_width() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(default)]
    pub constant: bool,
    /// One indicator per distinct group id of the training sample.
    #[serde(default = "yes")]
    pub auto_clusters: bool,
    #[serde(default)]
    pub clusters: Vec<usize>,
    #[serde(default)]
    pub binary_features: Vec<usize>,
    #[serde(default)]
    pub rbf: Vec<RbfConfig>,
}

fn yes() -> bool {
    true
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { constant: false, auto_clusters: true, clusters: vec![], binary_features: vec![], rbf: vec![] }
    }
}

impl BasisConfig {
    /// Basis on `train`; falls back to the constant basis when nothing
    /// applies. RBF distances are measured on features standardized with
    /// training statistics.
    pub fn build(&self, train: &Dataset) -> Result<BasisSet> {
        let mut kinds = Vec::new();
        if self.constant {
            kinds.push(BasisKind::Constant);
        }
        let mut clusters: BTreeSet<usize> = self.clusters.iter().copied().collect();
        if self.auto_clusters && self.clusters.is_empty() {
            if let Some(g) = train.groups() {
                clusters.extend(g.iter().copied());
            }
        }
        kinds.extend(clusters.into_iter().map(|cluster| BasisKind::Cluster { cluster }));
        kinds.extend(self.binary_features.iter().map(|&column| BasisKind::BinaryFeature { column }));
        kinds.extend(self.rbf.iter().map(|r| BasisKind::Rbf { center: r.center.clone(), width: r.width }));
        if kinds.is_empty() {
            kinds.push(BasisKind::Constant);
        }
        let basis = BasisSet::new(kinds)?;
        Ok(if self.rbf.is_empty() {
            basis
        } else {
            basis.with_standardizer(postshift::data::Standardizer::fit(train))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSetting {
    Fixed(f64),
    Auto(AutoTag),
}

impl EpsilonSetting {
    pub fn choice(self) -> EpsilonChoice {
        match self {
            EpsilonSetting::Fixed(e) => EpsilonChoice::Fixed(e),
            EpsilonSetting::Auto(_) => EpsilonChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    /// Unset: 1.0 for PI-EW and known-gradient FW, 0.1 for unknown-gradient FW.
    #[serde(default)]
    pub epsilon: Option<EpsilonSetting>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub split: SplitMode,
    #[serde(default = "default_mode")]
    pub mode: WeightMode,
    #[serde(default)]
    pub base: BaseClassifier,
    #[serde(default)]
    pub reg: f64,
    #[serde(default = "default_probes")]
    pub probes: ProbeKind,
    #[serde(default = "default_form")]
    pub unknown_form: SystemForm,
    /// Grid spacing of the coordinate-search baseline.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
}

fn default_iterations() -> usize {
    postshift::fw::DEFAULT_ITERATIONS
}

fn default_mode() -> WeightMode {
    WeightMode::Diagonal
}

fn default_probes() -> ProbeKind {
    ProbeKind::Fixed
}

fn default_form() -> SystemForm {
    SystemForm::Centered
}

fn default_spacing() -> f64 {
    1e-4
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            epsilon: None,
            iterations: default_iterations(),
            split: SplitMode::Shared,
            mode: default_mode(),
            base: BaseClassifier::default(),
            reg: 0.0,
            probes: default_probes(),
            unknown_form: default_form(),
            spacing: default_spacing(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub basis: Vec<BasisConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "current_version")]
    pub version: u32,
    pub seed: u64,
    pub method: Method,
    pub metric: MetricConfig,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("postshift-out")
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).context("invalid run config")?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative data paths and the output directory are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        let root = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = root.join(&*p);
            }
        };
        if let Some(data) = config.data.as_mut() {
            resolve(&mut data.train);
            resolve(&mut data.val);
            if let Some(t) = data.test.as_mut() {
                resolve(t);
            }
        }
        resolve(&mut config.output);
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            bail!("config version {} is not supported (expected {CONFIG_VERSION})", self.version);
        }
        match (&self.data, &self.synthetic) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => bail!("exactly one of [data] and [synthetic] is required"),
        }
        if let Some(s) = &self.synthetic {
            if s.n_train == 0 || s.n_val == 0 || s.n_test == 0 {
                bail!("synthetic sample sizes must be positive");
            }
        }
        let o = &self.optim;
        if let Some(EpsilonSetting::Fixed(e)) = o.epsilon {
            if !(e > 0.0 && e <= 1.0) {
                bail!("epsilon must lie in (0, 1], got {e}");
            }
        }
        if o.iterations == 0 {
            bail!("iterations must be at least 1");
        }
        if !(o.spacing > 0.0 && o.spacing <= 0.5) {
            bail!("spacing must lie in (0, 0.5], got {}", o.spacing);
        }
        if let Some(sweep) = &self.sweep {
            if let Some(e) = sweep.epsilon.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
                bail!("sweep epsilon {e} outside (0, 1]");
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
method = "pi-ew"
[metric]
name = "accuracy"
[synthetic]
benchmark = "two-point-domain-shift"
n_train = 100
n_val = 50
n_test = 50
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.version, CONFIG_VERSION);
        assert_eq!(c.optim.iterations, 25);
        assert_eq!(c.optim.spacing, 1e-4);
        assert!(c.basis.auto_clusters);
    }

    #[test]
    fn seed_is_mandatory() {
        let text = MINIMAL.replace("seed = 3\n", "");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn data_source_must_be_unique() {
        let text = format!(
            "{MINIMAL}\n[data]\ntrain = \"a.csv\"\nval = \"b.csv\"\n[data.schema]\nfeatures = [\"x1\"]\nlabel = \"label\"\n"
        );
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn epsilon_accepts_number_or_auto() {
        let c = RunConfig::from_toml(&format!("{MINIMAL}\n[optim]\nepsilon = \"auto\"\n")).unwrap();
        assert_eq!(c.optim.epsilon, Some(EpsilonSetting::Auto(AutoTag::Auto)));
        let c = RunConfig::from_toml(&format!("{MINIMAL}\n[optim]\nepsilon = 0.4\n")).unwrap();
        assert_eq!(c.optim.epsilon, Some(EpsilonSetting::Fixed(0.4)));
        assert!(RunConfig::from_toml(&format!("{MINIMAL}\n[optim]\nepsilon = 2.0\n")).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn linear_metric_checks_its_weights() {
        let mut m = MetricConfig::named(MetricName::Linear);
        assert!(m.build(2).is_err());
        m.weights = Some(vec![1.0, 2.0, 3.0]);
        assert!(m.build(2).is_err());
        assert!(m.build(3).is_ok());
    }
}
