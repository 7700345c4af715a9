//! Synthetic populations, label-noise and domain-shift corruptions with
//! exact correction weights, and grid-search Bayes oracles.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::classifier::{argmax_lowest, SoftPredictions};
use crate::confusion::{confusion, ConfusionStats};
use crate::data::{Dataset, ProbabilityModel};
use crate::error::{Error, Result};
use crate::metrics::MetricSpec;

const STOCHASTIC_TOL: f64 = 1e-9;

fn categorical(weights: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights).map_err(|e| Error::InvalidArgument(format!("bad categorical weights: {e}")))
}

fn square(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let k = rows.len();
    if k == 0 || rows.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidArgument(format!("{name} must be a nonempty square matrix")));
    }
    Ok(DMatrix::from_row_slice(k, k, &rows.concat()))
}

fn check_stochastic(rows: &[Vec<f64>], m: usize) -> Result<()> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::SizeMismatch(format!("transition matrix must be {m}x{m}")));
    }
    for r in rows {
        if r.iter().any(|v| !(*v >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidArgument("transition rows must be nonnegative and sum to 1".into()));
        }
    }
    Ok(())
}

/// A data-generating distribution `D` over `X × [m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum SyntheticSpec {
    /// Finite domain: `joint[p][i] = P(x = points[p], y = i)`. Group id of
    /// a sampled row is its point index.
    Discrete { points: Vec<Vec<f64>>, joint: Vec<Vec<f64>> },
    /// Class-conditional normals with shared covariance. When
    /// `cluster_feature` is set, group id is `1(x[f] > 0)`.
    Gaussian {
        means: Vec<Vec<f64>>,
        covariance: Vec<Vec<f64>>,
        priors: Vec<f64>,
        #[serde(default)]
        cluster_feature: Option<usize>,
    },
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SyntheticSpec::Discrete { points, joint } => {
                if points.is_empty() || points.len() != joint.len() {
                    return Err(Error::InvalidArgument("one joint row per point is required".into()));
                }
                let m = joint[0].len();
                let d = points[0].len();
                if m < 2 || joint.iter().any(|r| r.len() != m) || points.iter().any(|p| p.len() != d) {
                    return Err(Error::InvalidArgument("ragged discrete specification".into()));
                }
                let total: f64 = joint.iter().flatten().sum();
                if joint.iter().flatten().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::InvalidArgument(format!("joint table must be nonnegative and sum to 1 (sum {total})")));
                }
                Ok(())
            }
            SyntheticSpec::Gaussian { means, covariance, priors, cluster_feature } => {
                let m = priors.len();
                if m < 2 || means.len() != m {
                    return Err(Error::InvalidArgument("need one mean per class and m >= 2".into()));
                }
                let d = means[0].len();
                if d == 0 || means.iter().any(|mu| mu.len() != d) {
                    return Err(Error::InvalidArgument("means must share a nonzero dimension".into()));
                }
                if priors.iter().any(|p| !(*p > 0.0)) || (priors.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::InvalidArgument("priors must be positive and sum to 1".into()));
                }
                let cov = square(covariance, "covariance")?;
                if cov.nrows() != d || cov.cholesky().is_none() {
                    return Err(Error::InvalidArgument("covariance must be a symmetric positive definite d x d matrix".into()));
                }
                if cluster_feature.is_some_and(|f| f >= d) {
                    return Err(Error::InvalidArgument("cluster feature out of range".into()));
                }
                Ok(())
            }
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            SyntheticSpec::Discrete { joint, .. } => joint[0].len(),
            SyntheticSpec::Gaussian { priors, .. } => priors.len(),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            SyntheticSpec::Discrete { points, .. } => points[0].len(),
            SyntheticSpec::Gaussian { means, .. } => means[0].len(),
        }
    }

    /// Marginal `P^D(x)` of a discrete spec.
    pub fn point_marginal(&self) -> Result<Vec<f64>> {
        match self {
            SyntheticSpec::Discrete { joint, .. } => Ok(joint.iter().map(|r| r.iter().sum()).collect()),
            _ => Err(Error::InvalidArgument("point marginal is defined for discrete specs only".into())),
        }
    }

    fn group_of(&self, row: &[f64], point: Option<usize>) -> Option<usize> {
        match self {
            SyntheticSpec::Discrete { .. } => point,
            SyntheticSpec::Gaussian { cluster_feature, .. } => cluster_feature.map(|f| usize::from(row[f] > 0.0)),
        }
    }

    /// Exact `P^D(y | x)` at a point; discrete specs need the point index.
    pub fn conditional(&self, row: &[f64], point: Option<usize>) -> Result<Vec<f64>> {
        match self {
            SyntheticSpec::Discrete { joint, .. } => {
                let p = point.ok_or_else(|| Error::InvalidArgument("discrete conditional needs the point index".into()))?;
                let r = joint.get(p).ok_or_else(|| Error::InvalidArgument(format!("point {p} out of range")))?;
                let total: f64 = r.iter().sum();
                if total <= 0.0 {
                    return Err(Error::InvalidArgument(format!("point {p} has zero mass")));
                }
                Ok(r.iter().map(|v| v / total).collect())
            }
            SyntheticSpec::Gaussian { means, covariance, priors, .. } => {
                let cov = square(covariance, "covariance")?;
                let chol = cov.cholesky().ok_or_else(|| Error::InvalidArgument("degenerate covariance".into()))?;
                let x = DVector::from_column_slice(row);
                let logits: Vec<f64> = means
                    .iter()
                    .zip(priors)
                    .map(|(mu, p)| {
                        let mu = DVector::from_column_slice(mu);
                        let diff = &x - &mu;
                        let z = chol.solve(&diff);
                        p.ln() - 0.5 * diff.dot(&z)
                    })
                    .collect();
                Ok(softmax(&logits))
            }
        }
    }

    /// Exact clean conditional for every row of a dataset drawn from this
    /// spec.
    pub fn conditional_model(&self, data: &Dataset) -> Result<ProbabilityModel> {
        let rows = (0..data.len())
            .map(|x| {
                let point = match self {
                    SyntheticSpec::Discrete { .. } => Some(self.point_index(data, x)?),
                    SyntheticSpec::Gaussian { .. } => None,
                };
                self.conditional(data.row(x), point)
            })
            .collect::<Result<Vec<_>>>()?;
        ProbabilityModel::normalized(rows.concat(), self.n_classes())
    }

    fn point_index(&self, data: &Dataset, x: usize) -> Result<usize> {
        data.groups()
            .map(|g| g[x])
            .ok_or_else(|| Error::InvalidArgument("discrete rows carry their point index as group id".into()))
    }

    /// Draws `n` i.i.d. examples from `D`.
    pub fn sample_clean(&self, n: usize, rng: &mut impl Rng) -> Result<Dataset> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        match self {
            SyntheticSpec::Discrete { points, joint } => {
                let m = self.n_classes();
                let dist = categorical(&joint.concat())?;
                let mut rows = Vec::with_capacity(n);
                let mut labels = Vec::with_capacity(n);
                let mut groups = Vec::with_capacity(n);
                for _ in 0..n {
                    let k = dist.sample(rng);
                    rows.push(points[k / m].clone());
                    labels.push(k % m);
                    groups.push(k / m);
                }
                Dataset::new(rows, labels, m)?.with_groups(groups)
            }
            SyntheticSpec::Gaussian { means, priors, .. } => self.sample_mixture(n, means, priors, rng),
        }
    }

    fn sample_mixture(&self, n: usize, means: &[Vec<f64>], priors: &[f64], rng: &mut impl Rng) -> Result<Dataset> {
        let SyntheticSpec::Gaussian { covariance, .. } = self else {
            unreachable!("mixture sampling on a gaussian spec")
        };
        let chol = square(covariance, "covariance")?
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("degenerate covariance".into()))?;
        let lower = chol.l();
        let d = self.n_features();
        let dist = categorical(priors)?;
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let y = dist.sample(rng);
            let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let x = DVector::from_column_slice(&means[y]) + &lower * z;
            rows.push(x.iter().copied().collect::<Vec<f64>>());
            labels.push(y);
        }
        let groups: Option<Vec<usize>> = rows.iter().map(|r| self.group_of(r, None)).collect();
        let data = Dataset::new(rows, labels, self.n_classes())?;
        match groups {
            Some(g) => data.with_groups(g),
            None => Ok(data),
        }
    }

    /// Mixture parameters of the tilted training law
    /// `P^μ(x) ∝ P^D(x) exp(θ x_f)`: shifted means, reweighted priors and the
    /// normalizer `Z = E_D[exp(θ x_f)]`.
    fn tilted(&self, feature: usize, theta: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>, f64)> {
        let SyntheticSpec::Gaussian { means, covariance, priors, .. } = self else {
            return Err(Error::InvalidArgument("tilt shift needs a gaussian spec".into()));
        };
        if feature >= self.n_features() {
            return Err(Error::InvalidArgument("tilt feature out of range".into()));
        }
        let s_ff = covariance[feature][feature];
        let shifted = means
            .iter()
            .map(|mu| mu.iter().enumerate().map(|(k, v)| v + theta * covariance[k][feature]).collect())
            .collect();
        let raw: Vec<f64> = means
            .iter()
            .zip(priors)
            .map(|(mu, p)| p * (theta * mu[feature] + 0.5 * theta * theta * s_ff).exp())
            .collect();
        let z: f64 = raw.iter().sum();
        Ok((shifted, raw.iter().map(|r| r / z).collect(), z))
    }

    /// Population confusion of a deterministic rule given per point
    /// (discrete specs).
    pub fn population_confusion(&self, assignment: &[usize]) -> Result<ConfusionStats> {
        let SyntheticSpec::Discrete { joint, .. } = self else {
            return Err(Error::InvalidArgument("population confusions need a discrete spec".into()));
        };
        let m = self.n_classes();
        if assignment.len() != joint.len() {
            return Err(Error::SizeMismatch("one prediction per point is required".into()));
        }
        let mut full = vec![0.0; m * m];
        for (row, &k) in joint.iter().zip(assignment) {
            for (i, v) in row.iter().enumerate() {
                full[i * m + k] += v;
            }
        }
        ConfusionStats::from_full(full, m)
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Corruption `μ` of a clean distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShiftSpec {
    /// `P(ỹ = j | y = i) = T_ij`.
    Iln { transition: Vec<Vec<f64>> },
    /// One transition matrix per group id.
    Cdln { transitions: Vec<Vec<Vec<f64>>> },
    /// `T(x) = (1−s)·low + s·high` with `s = 1 / (1 + exp(−scale·x[feature]))`.
    Idln { low: Vec<Vec<f64>>, high: Vec<Vec<f64>>, feature: usize, scale: f64 },
    /// Discrete domain shift: training points drawn from `marginal`,
    /// labels from the clean conditional.
    Ds { marginal: Vec<f64> },
    /// Gaussian domain shift: `P^μ(x) ∝ P^D(x) exp(θ x[feature])`.
    Tilt { feature: usize, theta: f64 },
}

impl ShiftSpec {
    pub fn is_label_noise(&self) -> bool {
        matches!(self, ShiftSpec::Iln { .. } | ShiftSpec::Cdln { .. } | ShiftSpec::Idln { .. })
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            ShiftSpec::Iln { transition } => check_stochastic(transition, m),
            ShiftSpec::Cdln { transitions } => transitions.iter().try_for_each(|t| check_stochastic(t, m)),
            ShiftSpec::Idln { low, high, scale, .. } => {
                check_stochastic(low, m)?;
                check_stochastic(high, m)?;
                if !scale.is_finite() {
                    return Err(Error::InvalidArgument("idln scale must be finite".into()));
                }
                Ok(())
            }
            ShiftSpec::Ds { marginal } => {
                if marginal.iter().any(|v| !(*v >= 0.0)) || (marginal.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::InvalidArgument("training marginal must be a distribution".into()));
                }
                Ok(())
            }
            ShiftSpec::Tilt { theta, .. } => {
                if !theta.is_finite() {
                    return Err(Error::InvalidArgument("tilt must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Row-major transition matrix in force at a point.
    pub fn transition(&self, row: &[f64], group: Option<usize>) -> Result<Vec<f64>> {
        match self {
            ShiftSpec::Iln { transition } => Ok(transition.concat()),
            ShiftSpec::Cdln { transitions } => {
                let g = group.ok_or_else(|| Error::InvalidArgument("cluster-dependent noise needs group ids".into()))?;
                transitions
                    .get(g)
                    .map(|t| t.concat())
                    .ok_or_else(|| Error::InvalidArgument(format!("no transition matrix for cluster {g}")))
            }
            ShiftSpec::Idln { low, high, feature, scale } => {
                let v = row
                    .get(*feature)
                    .ok_or_else(|| Error::InvalidArgument("idln feature out of range".into()))?;
                let s = 1.0 / (1.0 + (-scale * v).exp());
                Ok(low.concat().iter().zip(high.concat()).map(|(a, b)| (1.0 - s) * a + s * b).collect())
            }
            ShiftSpec::Ds { .. } | ShiftSpec::Tilt { .. } => {
                Err(Error::InvalidArgument("domain shift has no label transition".into()))
            }
        }
    }
}

/// Applies a corruption to a clean sample. Label noise resamples each label
/// from the row of `T(x)` for its clean label; domain shift redraws the
/// sample (same size) from the training law with clean conditionals.
pub fn corrupt(spec: &SyntheticSpec, clean: &Dataset, shift: &ShiftSpec, rng: &mut impl Rng) -> Result<Dataset> {
    let m = spec.n_classes();
    shift.validate(m)?;
    if clean.n_classes() != m {
        return Err(Error::SizeMismatch("dataset and spec disagree in classes".into()));
    }
    match shift {
        ShiftSpec::Iln { .. } | ShiftSpec::Cdln { .. } | ShiftSpec::Idln { .. } => {
            let groups = clean.groups();
            let mut labels = Vec::with_capacity(clean.len());
            for x in 0..clean.len() {
                let t = shift.transition(clean.row(x), groups.map(|g| g[x]))?;
                let y = clean.label(x);
                labels.push(categorical(&t[y * m..(y + 1) * m])?.sample(rng));
            }
            clean.with_labels(labels)
        }
        ShiftSpec::Ds { marginal } => {
            let SyntheticSpec::Discrete { points, .. } = spec else {
                return Err(Error::InvalidArgument("discrete domain shift needs a discrete spec".into()));
            };
            if marginal.len() != points.len() {
                return Err(Error::SizeMismatch("one marginal entry per point is required".into()));
            }
            let dist = categorical(marginal)?;
            let conditionals = (0..points.len())
                .map(|p| if marginal[p] > 0.0 { spec.conditional(&points[p], Some(p)) } else { Ok(vec![1.0; m]) })
                .collect::<Result<Vec<_>>>()?;
            let label_dists = conditionals.iter().map(|c| categorical(c)).collect::<Result<Vec<_>>>()?;
            let mut rows = Vec::with_capacity(clean.len());
            let mut labels = Vec::with_capacity(clean.len());
            let mut groups = Vec::with_capacity(clean.len());
            for _ in 0..clean.len() {
                let p = dist.sample(rng);
                rows.push(points[p].clone());
                labels.push(label_dists[p].sample(rng));
                groups.push(p);
            }
            Dataset::new(rows, labels, m)?.with_groups(groups)
        }
        ShiftSpec::Tilt { feature, theta } => {
            let (means, priors, _) = spec.tilted(*feature, *theta)?;
            spec.sample_mixture(clean.len(), &means, &priors, rng)
        }
    }
}

/// Exact training conditional `P^μ(ỹ | x)` on the rows of `data`:
/// `η̃(x) = T(x)ᵀ η(x)` under label noise, the clean conditional under
/// domain shift.
pub fn noisy_conditional(spec: &SyntheticSpec, shift: &ShiftSpec, data: &Dataset) -> Result<ProbabilityModel> {
    let clean = spec.conditional_model(data)?;
    if !shift.is_label_noise() {
        return Ok(clean);
    }
    let m = spec.n_classes();
    let mut out = Vec::with_capacity(data.len() * m);
    for x in 0..data.len() {
        let t = shift.transition(data.row(x), data.groups().map(|g| g[x]))?;
        let eta = clean.row(x);
        out.extend((0..m).map(|j| (0..m).map(|i| eta[i] * t[i * m + j]).sum::<f64>()));
    }
    ProbabilityModel::normalized(out, m)
}

/// Correction weights `W(x)` (row-major `m × m`) making the `W`-weighted
/// training objective equal `Σ L_ij C^D_ij`: `T(x)⁻¹ L` under label noise,
/// `L · P^D(x)/P^μ(x)` under domain shift.
pub fn true_weights(
    spec: &SyntheticSpec,
    shift: &ShiftSpec,
    costs: &[f64],
    row: &[f64],
    group: Option<usize>,
) -> Result<Vec<f64>> {
    let m = spec.n_classes();
    if costs.len() != m * m {
        return Err(Error::SizeMismatch(format!("costs must be {m}x{m}")));
    }
    shift.validate(m)?;
    let l = DMatrix::from_row_slice(m, m, costs);
    let ratio = match shift {
        ShiftSpec::Iln { .. } | ShiftSpec::Cdln { .. } | ShiftSpec::Idln { .. } => {
            let t = DMatrix::from_row_slice(m, m, &shift.transition(row, group)?);
            let inv = t.try_inverse().ok_or_else(|| Error::InvalidArgument("transition matrix is singular".into()))?;
            let w = inv * l;
            return Ok(w.transpose().iter().copied().collect());
        }
        ShiftSpec::Ds { marginal } => {
            let p = group.ok_or_else(|| Error::InvalidArgument("discrete density ratio needs the point index".into()))?;
            let clean = spec.point_marginal()?;
            let train = *marginal.get(p).ok_or_else(|| Error::InvalidArgument(format!("point {p} out of range")))?;
            if !(train > 0.0) {
                return Err(Error::InvalidArgument(format!("point {p} has no training mass")));
            }
            clean[p] / train
        }
        ShiftSpec::Tilt { feature, theta } => {
            let (_, _, z) = spec.tilted(*feature, *theta)?;
            z * (-theta * row[*feature]).exp()
        }
    };
    Ok(costs.iter().map(|c| c * ratio).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    /// Best per-class weights `w`, rule `argmax_i w_i P(y=i|x)`.
    pub weights: Vec<f64>,
    /// Grid points per axis; weights range over `{k/resolution : k = 1..resolution}`.
    pub resolution: usize,
    /// True when computed on the population rather than a sample.
    pub population: bool,
}

fn grid_weights(m: usize, resolution: usize) -> impl Iterator<Item = Vec<f64>> {
    let total = resolution.pow(m as u32);
    (0..total).map(move |mut code| {
        (0..m)
            .map(|_| {
                let k = code % resolution + 1;
                code /= resolution;
                k as f64 / resolution as f64
            })
            .collect()
    })
}

/// Best metric value over per-class weighted argmax rules applied to the
/// true clean conditional. Population-exact for discrete specs when no
/// sample is given; otherwise evaluated on `sample`.
pub fn bayes_oracle(
    spec: &SyntheticSpec,
    metric: &MetricSpec,
    resolution: usize,
    sample: Option<&Dataset>,
) -> Result<OracleValue> {
    spec.validate()?;
    if resolution == 0 {
        return Err(Error::InvalidArgument("grid resolution must be positive".into()));
    }
    let m = spec.n_classes();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |value: f64, w: Vec<f64>| {
        if value.is_finite() && best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, w));
        }
    };
    match (spec, sample) {
        (SyntheticSpec::Discrete { points, .. }, None) => {
            let conds = (0..points.len())
                .map(|p| spec.conditional(&points[p], Some(p)).or_else(|_| Ok(vec![1.0 / m as f64; m])))
                .collect::<Result<Vec<_>>>()?;
            for w in grid_weights(m, resolution) {
                let assignment: Vec<usize> = conds
                    .iter()
                    .map(|c| argmax_lowest(&c.iter().zip(&w).map(|(a, b)| a * b).collect::<Vec<_>>()))
                    .collect();
                let value = metric.value_from_stats(&spec.population_confusion(&assignment)?)?.value;
                consider(value, w);
            }
        }
        (_, Some(data)) => {
            let cond = spec.conditional_model(data)?;
            for w in grid_weights(m, resolution) {
                let assignment: Vec<usize> = (0..data.len())
                    .map(|x| argmax_lowest(&cond.row(x).iter().zip(&w).map(|(a, b)| a * b).collect::<Vec<_>>()))
                    .collect();
                let preds = SoftPredictions::from_assignment(&assignment, m)?;
                let value = match metric {
                    MetricSpec::Oracle(_) => metric.evaluate(data, &preds)?,
                    _ => metric.value_from_stats(&confusion(data, &preds)?)?.value,
                };
                consider(value, w);
            }
        }
        (SyntheticSpec::Gaussian { .. }, None) => {
            return Err(Error::InvalidArgument("gaussian oracles are evaluated on a sample".into()));
        }
    }
    let (value, weights) = best.ok_or_else(|| Error::InvalidArgument("no finite metric value on the grid".into()))?;
    Ok(OracleValue { value, weights, resolution, population: sample.is_none() })
}


/// Ready-made benchmark distributions.
pub mod benchmarks {
    use super::{ShiftSpec, SyntheticSpec};

    /// Two-point domain `{a, b}` with `P^D(a) = 0.8` and training marginal
    /// `P^μ(a) = 0.5`; `P(y=1|a) = 0.7`, `P(y=1|b) = 0.2` (classes 1-indexed).
    /// Density ratios are 1.6 on `a` and 0.4 on `b`.
    pub fn two_point_domain_shift() -> (SyntheticSpec, ShiftSpec) {
        let spec = SyntheticSpec::Discrete {
            points: vec![vec![0.0], vec![1.0]],
            joint: vec![vec![0.8 * 0.7, 0.8 * 0.3], vec![0.2 * 0.2, 0.2 * 0.8]],
        };
        (spec, ShiftSpec::Ds { marginal: vec![0.5, 0.5] })
    }

    /// Symmetric noise: keep the label with probability `1 − flip`, move to
    /// each other class with probability `flip/(m−1)`.
    pub fn symmetric_transition(m: usize, flip: f64) -> Vec<Vec<f64>> {
        (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 - flip } else { flip / (m - 1) as f64 }).collect())
            .collect()
    }

    /// Three-class gaussian mixture in the plane with priors (0.6, 0.3, 0.1);
    /// clusters split on the sign of the first feature and labels in the
    /// positive cluster are flipped with probability `flip`.
    pub fn gaussian_cluster_noise(flip: f64) -> (SyntheticSpec, ShiftSpec) {
        let spec = SyntheticSpec::Gaussian {
            means: vec![vec![-0.5, -0.5], vec![0.5, 0.5], vec![0.0, 1.2]],
            covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            priors: vec![0.6, 0.3, 0.1],
            cluster_feature: Some(0),
        };
        let shift = ShiftSpec::Cdln { transitions: vec![symmetric_transition(3, 0.0), symmetric_transition(3, flip)] };
        (spec, shift)
    }
}
