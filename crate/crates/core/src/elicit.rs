//! Weight elicitation: probing classifiers, the `Σ̂ α = Ê` system and its
//! solution.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisMatrix, BasisSet};
use crate::classifier::{argmax_lowest, ClusterAction, SoftPredictions};
use crate::confusion::{phi_confusions, phi_confusions_full};
use crate::data::{Dataset, ProbabilityModel};
use crate::error::{Error, Result};
use crate::linalg::{self, Solution};

/// Candidate radii tried by [`EpsilonChoice::Auto`], largest first.
pub const EPSILON_GRID: [f64; 6] = [1.0, 0.4, 1e-1, 1e-2, 1e-3, 1e-4];
/// Automatic radius selection keeps the smallest ε whose system is better
/// conditioned than this.
pub const AUTO_CONDITION_LIMIT: f64 = 1e6;
/// Line-search resolution for threshold probes.
pub const LINE_SEARCH_SPACING: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// `W_i(x) = Σ_ℓ α_{ℓ,i} φ^ℓ(x)`, `L·m` unknowns.
    Diagonal,
    /// `W_ij(x) = Σ_ℓ α_{ℓ,i,j} φ^ℓ(x)`, `L·m²` unknowns.
    Full,
}

impl WeightMode {
    pub fn unknowns(self, n_basis: usize, n_classes: usize) -> usize {
        match self {
            WeightMode::Diagonal => n_basis * n_classes,
            WeightMode::Full => n_basis * n_classes * n_classes,
        }
    }
}

/// Elicited coefficients together with the basis they refer to.
/// `alpha` is basis-major: `alpha[ℓ*m + i]`, or `alpha[(ℓ*m + i)*m + j]`
/// in full mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightCoefficients {
    pub alpha: Vec<f64>,
    pub basis: BasisSet,
    pub mode: WeightMode,
    pub n_classes: usize,
}

impl WeightCoefficients {
    pub fn new(alpha: Vec<f64>, basis: BasisSet, mode: WeightMode, n_classes: usize) -> Result<Self> {
        let expected = mode.unknowns(basis.len(), n_classes);
        if alpha.len() != expected {
            return Err(Error::SizeMismatch(format!(
                "{} coefficients, expected {expected} for {} bases and {n_classes} classes",
                alpha.len(),
                basis.len()
            )));
        }
        Ok(Self { alpha, basis, mode, n_classes })
    }

    /// Constant basis with one weight per class.
    pub fn class_weights(weights: Vec<f64>) -> Result<Self> {
        let m = weights.len();
        Self::new(weights, BasisSet::constant(), WeightMode::Diagonal, m)
    }

    /// Induced weights at a point with basis values `phi`: length `m`
    /// (diagonal) or row-major `m × m` (full).
    pub fn weights_at(&self, phi: &[f64]) -> Vec<f64> {
        let width = self.alpha.len() / phi.len();
        let mut w = vec![0.0; width];
        for (l, &p) in phi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (k, a) in self.alpha[l * width..(l + 1) * width].iter().enumerate() {
                w[k] += a * p;
            }
        }
        w
    }
}

/// How the base classifier `h̄` is chosen when none is supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseClassifier {
    /// Predicts class `i` with probability `η̂_i(x)`. With a deterministic
    /// base, a probe toward the class the base already predicts on a whole
    /// cluster coincides with the base and the system is singular.
    #[default]
    Soft,
    Argmax,
    Uniform,
}

/// One sample as seen by elicitation: data, evaluated basis, optional
/// probability estimates and the base classifier materialized on it.
#[derive(Debug, Clone)]
pub struct Split<'a> {
    pub data: &'a Dataset,
    pub basis: BasisMatrix,
    pub probs: Option<&'a ProbabilityModel>,
    pub base: SoftPredictions,
}

impl<'a> Split<'a> {
    pub fn new(
        data: &'a Dataset,
        basis: &BasisSet,
        probs: Option<&'a ProbabilityModel>,
        base: BaseClassifier,
    ) -> Result<Self> {
        let base = match base {
            BaseClassifier::Uniform => SoftPredictions::uniform(data.len(), data.n_classes()),
            BaseClassifier::Soft => {
                let p = probs.ok_or_else(|| {
                    Error::InvalidArgument("soft base classifier needs probability estimates".into())
                })?;
                p.check_aligned(data)?;
                SoftPredictions::new(p.values().to_vec(), data.n_classes())?
            }
            BaseClassifier::Argmax => {
                let p = probs.ok_or_else(|| {
                    Error::InvalidArgument("argmax base classifier needs probability estimates".into())
                })?;
                p.check_aligned(data)?;
                let assignment: Vec<usize> = (0..p.len()).map(|i| argmax_lowest(p.row(i))).collect();
                SoftPredictions::from_assignment(&assignment, data.n_classes())?
            }
        };
        Self::from_parts(data, basis.evaluate(data)?, probs, base)
    }

    pub fn from_parts(
        data: &'a Dataset,
        basis: BasisMatrix,
        probs: Option<&'a ProbabilityModel>,
        base: SoftPredictions,
    ) -> Result<Self> {
        if basis.len() != data.len() || base.len() != data.len() || base.n_classes() != data.n_classes() {
            return Err(Error::SizeMismatch("basis, base classifier and dataset disagree in shape".into()));
        }
        if let Some(p) = probs {
            p.check_aligned(data)?;
        }
        Ok(Self { data, basis, probs, base })
    }

    pub fn with_base(mut self, base: SoftPredictions) -> Result<Self> {
        if base.len() != self.data.len() || base.n_classes() != self.data.n_classes() {
            return Err(Error::SizeMismatch("base classifier does not match the dataset".into()));
        }
        self.base = base;
        Ok(self)
    }

    fn probs(&self) -> Result<&'a ProbabilityModel> {
        self.probs
            .ok_or_else(|| Error::InvalidArgument("probe construction needs probability estimates".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProbeKind {
    /// `h^{ℓ,i} = εφ^ℓ e^i + (1−εφ^ℓ) h̄`; in full mode the examples
    /// whose top-scored class is `i` are moved toward class `j` instead.
    Fixed,
    /// Per-cluster tuned plug-in rules meeting `Φ̂^ℓ_i ≥ γ` on the target
    /// entry and `≤ ω` elsewhere. Disjoint cluster bases only.
    Threshold {
        gamma: f64,
        omega: f64,
        /// When set, ω is raised in these steps until feasible or ω ≥ γ.
        #[serde(default)]
        relax_step: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub basis: usize,
    pub class: usize,
    /// Target class of a full-mode probe.
    pub relabel_to: Option<usize>,
    pub train: SoftPredictions,
    pub val: SoftPredictions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFeasibility {
    pub basis: usize,
    pub class: usize,
    pub target: f64,
    pub max_off_target: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub gamma: f64,
    /// Slack actually used, after any relaxation.
    pub omega: f64,
    /// Rule used on each cluster when it is not the target cluster.
    pub cluster_actions: Vec<ClusterAction>,
    pub probes: Vec<ProbeFeasibility>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.probes.iter().all(|p| p.feasible)
    }

    fn summary(&self) -> String {
        let bad: Vec<String> = self
            .probes
            .iter()
            .filter(|p| !p.feasible)
            .map(|p| {
                format!(
                    "(basis {}, class {}): target {:.4} vs gamma {}, off-target {:.4} vs omega {}",
                    p.basis, p.class, p.target, self.gamma, p.max_off_target, self.omega
                )
            })
            .collect();
        bad.join("; ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbingSet {
    pub epsilon: f64,
    pub kind: ProbeKind,
    pub mode: WeightMode,
    pub probes: Vec<Probe>,
    pub feasibility: Option<FeasibilityReport>,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0,1], got {epsilon}")));
    }
    Ok(())
}

fn check_pair(train: &Split<'_>, val: &Split<'_>) -> Result<()> {
    if train.data.n_classes() != val.data.n_classes() || train.basis.n_basis() != val.basis.n_basis() {
        return Err(Error::SizeMismatch("train and validation splits disagree in classes or bases".into()));
    }
    Ok(())
}

fn perturb(split: &Split<'_>, l: usize, class: usize, epsilon: f64, only: Option<&[bool]>) -> SoftPredictions {
    let mut out = split.base.clone();
    for x in 0..split.data.len() {
        if only.is_some_and(|mask| !mask[x]) {
            continue;
        }
        let p = epsilon * split.basis.get(x, l);
        if p == 0.0 {
            continue;
        }
        let row = out.row_mut(x);
        row.iter_mut().for_each(|v| *v *= 1.0 - p);
        row[class] += p;
    }
    out
}

/// `L·m` probes `εφ^ℓ(x)e^i + (1−εφ^ℓ(x))h̄(x)`, materialized on both splits.
pub fn build_fixed_probes(train: &Split<'_>, val: &Split<'_>, epsilon: f64) -> Result<ProbingSet> {
    check_epsilon(epsilon)?;
    check_pair(train, val)?;
    let m = train.data.n_classes();
    let mut probes = Vec::with_capacity(train.basis.n_basis() * m);
    for l in 0..train.basis.n_basis() {
        for i in 0..m {
            probes.push(Probe {
                basis: l,
                class: i,
                relabel_to: None,
                train: perturb(train, l, i, epsilon, None),
                val: perturb(val, l, i, epsilon, None),
            });
        }
    }
    Ok(ProbingSet { epsilon, kind: ProbeKind::Fixed, mode: WeightMode::Diagonal, probes, feasibility: None })
}

/// `L·m²` full-mode probes: for `(ℓ,i,j)`, examples whose highest
/// estimated class is `i` are moved toward class `j` with strength
/// `εφ^ℓ(x)`; every other example keeps `h̄`.
pub fn build_relabel_probes(train: &Split<'_>, val: &Split<'_>, epsilon: f64) -> Result<ProbingSet> {
    check_epsilon(epsilon)?;
    check_pair(train, val)?;
    let m = train.data.n_classes();
    let top = |s: &Split<'_>| -> Result<Vec<usize>> {
        let p = s.probs()?;
        Ok((0..p.len()).map(|x| argmax_lowest(p.row(x))).collect())
    };
    let (top_tr, top_val) = (top(train)?, top(val)?);
    let mut probes = Vec::with_capacity(train.basis.n_basis() * m * m);
    for l in 0..train.basis.n_basis() {
        for i in 0..m {
            let mask_tr: Vec<bool> = top_tr.iter().map(|&k| k == i).collect();
            let mask_val: Vec<bool> = top_val.iter().map(|&k| k == i).collect();
            for j in 0..m {
                probes.push(Probe {
                    basis: l,
                    class: i,
                    relabel_to: Some(j),
                    train: perturb(train, l, j, epsilon, Some(&mask_tr)),
                    val: perturb(val, l, j, epsilon, Some(&mask_val)),
                });
            }
        }
    }
    Ok(ProbingSet { epsilon, kind: ProbeKind::Fixed, mode: WeightMode::Full, probes, feasibility: None })
}

fn cluster_members(split: &Split<'_>) -> Result<Vec<usize>> {
    split
        .basis
        .hard_assignment()?
        .into_iter()
        .enumerate()
        .map(|(x, c)| {
            c.ok_or_else(|| {
                Error::InvalidArgument(format!("threshold probes need every example in a cluster (row {x} is in none)"))
            })
        })
        .collect()
}

/// Nearest-rank quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = (q * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

fn grid_points() -> Vec<f64> {
    let steps = (1.0 / LINE_SEARCH_SPACING).round() as usize;
    (0..=steps).map(|k| k as f64 / steps as f64).collect()
}

/// Largest φ-confusion entry of a cluster under a rule, in units of
/// examples (dividing by n does not change the argmin).
fn max_entry(members: &[usize], labels: &[usize], m: usize, predict: impl Fn(usize) -> usize) -> usize {
    let mut hits = vec![0usize; m];
    for &x in members {
        let y = labels[x];
        if predict(x) == y {
            hits[y] += 1;
        }
    }
    hits.into_iter().max().unwrap_or(0)
}

/// Rule minimizing the largest diagonal φ-confusion of one cluster.
fn tune_cluster(members: &[usize], labels: &[usize], probs: &ProbabilityModel) -> ClusterAction {
    let m = probs.n_classes();
    if m == 2 {
        let mut scores: Vec<f64> = members.iter().map(|&x| probs.row(x)[1]).collect();
        scores.sort_by(f64::total_cmp);
        let mut candidates = vec![f64::NEG_INFINITY];
        if !scores.is_empty() {
            candidates.extend(grid_points().into_iter().map(|q| quantile(&scores, q)));
        }
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for tau in candidates {
            let v = max_entry(members, labels, 2, |x| usize::from(probs.row(x)[1] <= tau));
            if v < best.0 {
                best = (v, tau);
            }
        }
        return ClusterAction::BinaryThreshold { tau: best.1 };
    }
    let anchor = m - 1;
    let mut weights = vec![1.0; m];
    for (i, w) in weights.iter_mut().enumerate().take(anchor) {
        let mut best = (usize::MAX, 0.0);
        for zeta in grid_points() {
            let v = max_entry(members, labels, m, |x| {
                let p = probs.row(x);
                if zeta * p[i] < (1.0 - zeta) * p[anchor] {
                    i
                } else {
                    anchor
                }
            });
            if v < best.0 {
                best = (v, zeta);
            }
        }
        *w = if best.1 >= 1.0 { 1.0 / LINE_SEARCH_SPACING } else { best.1 / (1.0 - best.1) };
    }
    ClusterAction::WeightedArgmin { weights }
}

fn cluster_rule_predictions(
    split: &Split<'_>,
    clusters: &[usize],
    actions: &[ClusterAction],
    target: (usize, usize),
) -> Result<Vec<usize>> {
    let probs = split.probs()?;
    Ok(clusters
        .iter()
        .enumerate()
        .map(|(x, &c)| if c == target.0 { target.1 } else { actions[c].predict(probs.row(x)) })
        .collect())
}

fn mix_toward(base: &SoftPredictions, assignment: &[usize], epsilon: f64) -> SoftPredictions {
    let mut out = base.clone();
    for (x, &k) in assignment.iter().enumerate() {
        let row = out.row_mut(x);
        row.iter_mut().for_each(|v| *v *= 1.0 - epsilon);
        row[k] += epsilon;
    }
    out
}

/// Per-cluster tuned probes for disjoint cluster bases. Constraints are
/// checked on the unmixed rules; the returned probes are mixed with `h̄`
/// at radius `epsilon`.
pub fn build_threshold_probes(
    train: &Split<'_>,
    val: &Split<'_>,
    gamma: f64,
    omega: f64,
    relax_step: Option<f64>,
    epsilon: f64,
) -> Result<ProbingSet> {
    check_epsilon(epsilon)?;
    check_pair(train, val)?;
    if !(gamma > omega && omega > 0.0) {
        return Err(Error::InvalidArgument(format!("need gamma > omega > 0 (gamma {gamma}, omega {omega})")));
    }
    if let Some(step) = relax_step {
        if !(step > 0.0) {
            return Err(Error::InvalidArgument(format!("relaxation step must be positive, got {step}")));
        }
    }
    let m = train.data.n_classes();
    let n_basis = train.basis.n_basis();
    let probs = train.probs()?;
    let clusters_tr = cluster_members(train)?;
    let clusters_val = cluster_members(val)?;
    let mut members = vec![Vec::new(); n_basis];
    for (x, &c) in clusters_tr.iter().enumerate() {
        members[c].push(x);
    }
    let actions: Vec<ClusterAction> =
        members.iter().map(|mem| tune_cluster(mem, train.data.labels(), probs)).collect();

    let mut probes = Vec::with_capacity(n_basis * m);
    let mut entries = Vec::with_capacity(n_basis * m);
    for l in 0..n_basis {
        for i in 0..m {
            let pred_tr = cluster_rule_predictions(train, &clusters_tr, &actions, (l, i))?;
            let pred_val = cluster_rule_predictions(val, &clusters_val, &actions, (l, i))?;
            let pure = SoftPredictions::from_assignment(&pred_tr, m)?;
            let phi = phi_confusions(train.data, &train.basis, &pure)?;
            let target = phi.get(l, i);
            let max_off_target = (0..n_basis * m)
                .filter(|&k| k != l * m + i)
                .map(|k| phi.values[k])
                .fold(0.0, f64::max);
            entries.push(ProbeFeasibility { basis: l, class: i, target, max_off_target, feasible: false });
            probes.push(Probe {
                basis: l,
                class: i,
                relabel_to: None,
                train: mix_toward(&train.base, &pred_tr, epsilon),
                val: mix_toward(&val.base, &pred_val, epsilon),
            });
        }
    }

    let mut omega_used = omega;
    let mark = |entries: &mut Vec<ProbeFeasibility>, w: f64| {
        for e in entries.iter_mut() {
            e.feasible = e.target >= gamma && e.max_off_target <= w;
        }
        entries.iter().all(|e| e.feasible)
    };
    let mut ok = mark(&mut entries, omega_used);
    if let Some(step) = relax_step {
        while !ok && omega_used + step < gamma {
            omega_used += step;
            ok = mark(&mut entries, omega_used);
        }
    }
    let report = FeasibilityReport { gamma, omega: omega_used, cluster_actions: actions, probes: entries };
    if !ok {
        return Err(Error::Infeasible(report.summary()));
    }
    Ok(ProbingSet {
        epsilon,
        kind: ProbeKind::Threshold { gamma, omega, relax_step },
        mode: WeightMode::Diagonal,
        probes,
        feasibility: Some(report),
    })
}

/// How the system relates probe statistics to metric values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemForm {
    /// Rows are the probes' φ-confusions, rhs the metric values.
    #[default]
    Literal,
    /// Rows and rhs are taken relative to the base classifier, so the
    /// fit passes through `h̄` (a local linearization around it).
    Centered,
}

fn probe_statistics(train: &Split<'_>, mode: WeightMode, h: &SoftPredictions) -> Result<Vec<f64>> {
    match mode {
        WeightMode::Diagonal => Ok(phi_confusions(train.data, &train.basis, h)?.values),
        WeightMode::Full => phi_confusions_full(train.data, &train.basis, h),
    }
}

/// Row `k` of Σ̂ holds the flattened training φ-confusions of probe `k`;
/// the rhs holds the metric values (minus the base value and base row in
/// centered form).
pub fn assemble_system(
    probes: &ProbingSet,
    train: &Split<'_>,
    metric_values: &[f64],
    form: SystemForm,
    base_value: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = probes.probes.len();
    if metric_values.len() != k {
        return Err(Error::SizeMismatch(format!("{} metric values for {k} probes", metric_values.len())));
    }
    if k != probes.mode.unknowns(train.basis.n_basis(), train.data.n_classes()) {
        return Err(Error::SizeMismatch("probe count does not match the number of unknowns".into()));
    }
    if let Some(probe) = metric_values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteMetric { probe, value: metric_values[probe] });
    }
    let (offset_row, offset_value) = match form {
        SystemForm::Literal => (vec![0.0; k], 0.0),
        SystemForm::Centered => {
            if !base_value.is_finite() {
                return Err(Error::NonFiniteMetric { probe: k, value: base_value });
            }
            (probe_statistics(train, probes.mode, &train.base)?, base_value)
        }
    };
    let mut sigma = Vec::with_capacity(k * k);
    for p in &probes.probes {
        let row = probe_statistics(train, probes.mode, &p.train)?;
        sigma.extend(row.iter().zip(&offset_row).map(|(a, b)| a - b));
    }
    let rhs = metric_values.iter().map(|v| v - offset_value).collect();
    Ok((sigma, rhs))
}

/// Generic solve; see [`linalg::solve`].
pub fn solve_alpha(sigma: &[f64], rhs: &[f64], reg: f64) -> Result<Solution> {
    linalg::solve(sigma, rhs.len(), rhs, reg)
}

/// Rank of the full-mode system: each row of a φ-confusion block sums to a
/// classifier-independent constant, leaving `L·m − 1` gauge directions.
pub fn full_mode_rank(n_basis: usize, n_classes: usize) -> usize {
    n_basis * n_classes * n_classes - n_basis * n_classes + 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "choice", content = "value", rename_all = "kebab-case")]
pub enum EpsilonChoice {
    Fixed(f64),
    /// Smallest ε in [`EPSILON_GRID`] whose system is conditioned below
    /// [`AUTO_CONDITION_LIMIT`].
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitConfig {
    pub epsilon: EpsilonChoice,
    pub mode: WeightMode,
    pub probes: ProbeKind,
    pub reg: f64,
    pub form: SystemForm,
}

impl Default for ElicitConfig {
    fn default() -> Self {
        Self {
            epsilon: EpsilonChoice::Fixed(1.0),
            mode: WeightMode::Diagonal,
            probes: ProbeKind::Fixed,
            reg: 0.0,
            form: SystemForm::Literal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitationResult {
    pub coefficients: WeightCoefficients,
    /// Row-major `k × k` system matrix.
    pub sigma: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Raw metric value at each probe.
    pub probe_values: Vec<f64>,
    pub condition_number: f64,
    pub residual: f64,
    pub ill_conditioned: bool,
    pub rank: usize,
    pub epsilon: f64,
    pub form: SystemForm,
    pub feasibility: Option<FeasibilityReport>,
}

impl ElicitationResult {
    pub fn n_unknowns(&self) -> usize {
        self.rhs.len()
    }
}

fn build_probes(train: &Split<'_>, val: &Split<'_>, config: &ElicitConfig, epsilon: f64) -> Result<ProbingSet> {
    match (&config.probes, config.mode) {
        (ProbeKind::Fixed, WeightMode::Diagonal) => build_fixed_probes(train, val, epsilon),
        (ProbeKind::Fixed, WeightMode::Full) => build_relabel_probes(train, val, epsilon),
        (ProbeKind::Threshold { gamma, omega, relax_step }, WeightMode::Diagonal) => {
            build_threshold_probes(train, val, *gamma, *omega, *relax_step, epsilon)
        }
        (ProbeKind::Threshold { .. }, WeightMode::Full) => {
            Err(Error::InvalidArgument("threshold probes support diagonal mode only".into()))
        }
    }
}

fn system_condition(train: &Split<'_>, probes: &ProbingSet, form: SystemForm) -> Result<f64> {
    let zeros = vec![0.0; probes.probes.len()];
    let (sigma, _) = assemble_system(probes, train, &zeros, form, 0.0)?;
    let k = zeros.len();
    match probes.mode {
        WeightMode::Diagonal => linalg::condition_number(&sigma, k),
        WeightMode::Full => {
            linalg::condition_number_rank(&sigma, k, full_mode_rank(train.basis.n_basis(), train.data.n_classes()))
        }
    }
}

/// Builds probes, queries `objective` on each probe's validation
/// predictions, assembles and solves the system.
pub fn elicit(
    objective: &mut dyn FnMut(&SoftPredictions) -> Result<f64>,
    basis: &BasisSet,
    train: &Split<'_>,
    val: &Split<'_>,
    config: &ElicitConfig,
) -> Result<ElicitationResult> {
    if basis.len() != train.basis.n_basis() {
        return Err(Error::SizeMismatch("basis set does not match the evaluated basis".into()));
    }
    let probes = match config.epsilon {
        EpsilonChoice::Fixed(eps) => build_probes(train, val, config, eps)?,
        EpsilonChoice::Auto => {
            let mut best: Option<(f64, ProbingSet)> = None;
            let mut chosen = None;
            for eps in EPSILON_GRID {
                let set = build_probes(train, val, config, eps)?;
                let cond = system_condition(train, &set, config.form)?;
                if cond < AUTO_CONDITION_LIMIT {
                    chosen = Some(set);
                    continue;
                }
                if best.as_ref().is_none_or(|(c, _)| cond < *c) {
                    best = Some((cond, set));
                }
            }
            match (chosen, best) {
                (Some(set), _) => set,
                (None, Some((cond, set))) => {
                    log::warn!(
                        "no epsilon in the grid gives condition number below {AUTO_CONDITION_LIMIT:e}; using {} ({cond:e})",
                        set.epsilon
                    );
                    set
                }
                (None, None) => unreachable!("epsilon grid is nonempty"),
            }
        }
    };
    let probe_values = probes.probes.iter().map(|p| objective(&p.val)).collect::<Result<Vec<f64>>>()?;
    let base_value = match config.form {
        SystemForm::Literal => 0.0,
        SystemForm::Centered => objective(&val.base)?,
    };
    let (sigma, rhs) = assemble_system(&probes, train, &probe_values, config.form, base_value)?;
    let k = rhs.len();
    let solution = match config.mode {
        WeightMode::Diagonal => linalg::solve(&sigma, k, &rhs, config.reg)?,
        WeightMode::Full => {
            linalg::solve_truncated(&sigma, k, &rhs, full_mode_rank(train.basis.n_basis(), train.data.n_classes()))?
        }
    };
    Ok(ElicitationResult {
        coefficients: WeightCoefficients::new(solution.alpha, basis.clone(), config.mode, train.data.n_classes())?,
        sigma,
        rhs,
        probe_values,
        condition_number: solution.condition_number,
        residual: solution.residual,
        ill_conditioned: solution.ill_conditioned,
        rank: solution.rank,
        epsilon: probes.epsilon,
        form: config.form,
        feasibility: probes.feasibility,
    })
}
