//! Classifier representations: per-example class distributions, symbolic
//! deterministic rules, and finite mixtures of rules.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ProbabilityModel};
use crate::error::{Error, Result};
use crate::plugin::PostShiftRule;

/// A randomized classifier materialized on a fixed sample: row `i` is the
/// distribution `h(x_i)` over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftPredictions {
    values: Vec<f64>,
    n_classes: usize,
}

impl SoftPredictions {
    pub fn new(values: Vec<f64>, n_classes: usize) -> Result<Self> {
        if n_classes == 0 || values.len() % n_classes != 0 {
            return Err(Error::InvalidArgument("ragged prediction buffer".into()));
        }
        for (i, row) in values.chunks(n_classes).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= -1e-12)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("prediction row {i} is not in the simplex")));
            }
        }
        Ok(Self { values, n_classes })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidArgument("ragged prediction rows".into()));
        }
        Self::new(rows.concat(), m)
    }

    pub fn from_assignment(assignment: &[usize], n_classes: usize) -> Result<Self> {
        let mut values = vec![0.0; assignment.len() * n_classes];
        for (i, &k) in assignment.iter().enumerate() {
            if k >= n_classes {
                return Err(Error::InvalidArgument(format!("row {i} assigned to class {k} of {n_classes}")));
            }
            values[i * n_classes + k] = 1.0;
        }
        Ok(Self { values, n_classes })
    }

    pub fn constant(n: usize, n_classes: usize, class: usize) -> Result<Self> {
        Self::from_assignment(&vec![class; n], n_classes)
    }

    pub fn uniform(n: usize, n_classes: usize) -> Self {
        Self { values: vec![1.0 / n_classes as f64; n * n_classes], n_classes }
    }

    /// `w·a + (1−w)·b`, row by row.
    pub fn blend(a: &Self, b: &Self, w: f64) -> Result<Self> {
        if a.n_classes != b.n_classes || a.values.len() != b.values.len() {
            return Err(Error::SizeMismatch("blending predictions of different shapes".into()));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidArgument(format!("blend weight {w} outside [0,1]")));
        }
        let values = a.values.iter().zip(&b.values).map(|(x, y)| w * x + (1.0 - w) * y).collect();
        Ok(Self { values, n_classes: a.n_classes })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.n_classes
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let values = indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self { values, n_classes: self.n_classes }
    }

    /// Largest per-row total-variation distance to `other`.
    pub fn max_total_variation(&self, other: &Self) -> f64 {
        (0..self.len())
            .map(|i| 0.5 * self.row(i).iter().zip(other.row(i)).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Most probable class per row (lowest index on ties).
    pub fn argmax(&self) -> Vec<usize> {
        (0..self.len()).map(|i| argmax_lowest(self.row(i))).collect()
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

/// Index of the smallest entry, lowest index on ties.
pub fn argmin_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s < scores[best] {
            best = k;
        }
    }
    best
}

/// What a [`ClusterRule`] predicts inside one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum ClusterAction {
    Constant { class: usize },
    /// Binary only: predicts class 1 when `η̂_1(x) ≤ tau`, class 0 otherwise.
    BinaryThreshold { tau: f64 },
    /// `argmin_j w_j η̂_j(x)`.
    WeightedArgmin { weights: Vec<f64> },
}

impl ClusterAction {
    pub fn predict(&self, probs: &[f64]) -> usize {
        match self {
            ClusterAction::Constant { class } => *class,
            ClusterAction::BinaryThreshold { tau } => usize::from(probs[1] <= *tau),
            ClusterAction::WeightedArgmin { weights } => {
                let scores: Vec<f64> = weights.iter().zip(probs).map(|(w, p)| w * p).collect();
                argmin_lowest(&scores)
            }
        }
    }
}

/// A rule that acts per group id, e.g. a constraint-satisfying probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRule {
    pub actions: BTreeMap<usize, ClusterAction>,
    pub default: ClusterAction,
}

/// What a rule needs to be turned into predictions on a sample.
#[derive(Debug, Clone, Copy)]
pub struct RuleContext<'a> {
    pub data: &'a Dataset,
    pub probs: Option<&'a ProbabilityModel>,
}

impl<'a> RuleContext<'a> {
    pub fn new(data: &'a Dataset, probs: Option<&'a ProbabilityModel>) -> Self {
        Self { data, probs }
    }

    fn probs(&self) -> Result<&'a ProbabilityModel> {
        let p = self
            .probs
            .ok_or_else(|| Error::Materialize("rule needs class-probability estimates".into()))?;
        p.check_aligned(self.data)?;
        Ok(p)
    }
}

/// A deterministic classifier `X → [m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum DeterministicRule {
    Constant { class: usize },
    PostShift(PostShiftRule),
    Cluster(ClusterRule),
    /// Predictions frozen on one specific sample.
    Fixed { assignment: Vec<usize> },
}

impl DeterministicRule {
    pub fn materialize(&self, ctx: &RuleContext<'_>) -> Result<Vec<usize>> {
        let n = ctx.data.len();
        let m = ctx.data.n_classes();
        let out = match self {
            DeterministicRule::Constant { class } => vec![*class; n],
            DeterministicRule::PostShift(rule) => rule.apply(ctx.data, ctx.probs()?)?,
            DeterministicRule::Cluster(rule) => {
                let probs = ctx.probs()?;
                let groups = ctx
                    .data
                    .groups()
                    .ok_or_else(|| Error::Materialize("cluster rule needs group ids".into()))?;
                groups
                    .iter()
                    .enumerate()
                    .map(|(i, g)| rule.actions.get(g).unwrap_or(&rule.default).predict(probs.row(i)))
                    .collect()
            }
            DeterministicRule::Fixed { assignment } => {
                if assignment.len() != n {
                    return Err(Error::Materialize(format!(
                        "fixed assignment has {} rows, sample has {n}",
                        assignment.len()
                    )));
                }
                assignment.clone()
            }
        };
        if let Some(k) = out.iter().find(|&&k| k >= m) {
            return Err(Error::Materialize(format!("rule predicts class {k} of {m}")));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub rule: DeterministicRule,
}

/// A finite convex combination of deterministic rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedClassifier {
    components: Vec<Component>,
}

impl RandomizedClassifier {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if components.is_empty()
            || components.iter().any(|c| !(0.0..=1.0).contains(&c.weight))
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidArgument(format!(
                "component weights must lie in [0,1] and sum to 1 (sum {sum})"
            )));
        }
        Ok(Self { components })
    }

    pub fn deterministic(rule: DeterministicRule) -> Self {
        Self { components: vec![Component { weight: 1.0, rule }] }
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// `w·h1 + (1−w)·h2`, with zero-weight components dropped.
    pub fn mix(h1: &Self, h2: &Self, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidArgument(format!("mixing weight {w} outside [0,1]")));
        }
        let scaled = |h: &Self, s: f64| {
            h.components
                .iter()
                .map(move |c| Component { weight: c.weight * s, rule: c.rule.clone() })
                .collect::<Vec<_>>()
        };
        let mut components = scaled(h1, w);
        components.extend(scaled(h2, 1.0 - w));
        components.retain(|c| c.weight > 0.0);
        let total: f64 = components.iter().map(|c| c.weight).sum();
        components.iter_mut().for_each(|c| c.weight /= total);
        Ok(Self { components })
    }

    /// Merges components whose rules are identical.
    pub fn compact(&mut self) {
        let mut merged: Vec<Component> = Vec::with_capacity(self.components.len());
        for c in self.components.drain(..) {
            match merged.iter_mut().find(|m| m.rule == c.rule) {
                Some(m) => m.weight += c.weight,
                None => merged.push(c),
            }
        }
        self.components = merged;
    }

    /// Exact per-example class distribution by linearity.
    pub fn materialize(&self, ctx: &RuleContext<'_>) -> Result<SoftPredictions> {
        let n = ctx.data.len();
        let m = ctx.data.n_classes();
        let mut values = vec![0.0; n * m];
        for c in &self.components {
            for (i, k) in c.rule.materialize(ctx)?.into_iter().enumerate() {
                values[i * m + k] += c.weight;
            }
        }
        Ok(SoftPredictions { values, n_classes: m })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx_data() -> (Dataset, ProbabilityModel) {
        let d = Dataset::new(vec![vec![0.0]; 3], vec![0, 1, 1], 2).unwrap().with_groups(vec![0, 1, 5]).unwrap();
        let p = ProbabilityModel::from_rows(&[vec![0.9, 0.1], vec![0.3, 0.7], vec![0.5, 0.5]]).unwrap();
        (d, p)
    }

    fn constant(class: usize) -> RandomizedClassifier {
        RandomizedClassifier::deterministic(DeterministicRule::Constant { class })
    }

    #[test]
    fn mix_identities() {
        let (a, b) = (constant(0), constant(1));
        assert_eq!(RandomizedClassifier::mix(&a, &b, 1.0).unwrap(), a);
        assert_eq!(RandomizedClassifier::mix(&a, &b, 0.0).unwrap(), b);
        assert!(RandomizedClassifier::mix(&a, &b, 1.5).is_err());
        let half = RandomizedClassifier::mix(&a, &b, 0.5).unwrap();
        assert_eq!(half.components().len(), 2);
        assert_eq!(half.components()[0].weight, 0.5);
    }

    #[test]
    fn compact_merges_identical_rules() {
        let a = constant(0);
        let b = constant(1);
        let mut h = RandomizedClassifier::mix(&RandomizedClassifier::mix(&a, &b, 0.5).unwrap(), &a, 0.5).unwrap();
        h.compact();
        assert_eq!(h.components().len(), 2);
        assert!((h.components()[0].weight - 0.75).abs() < 1e-15);
        assert!((h.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cluster_rule_actions() {
        let (d, p) = ctx_data();
        let rule = DeterministicRule::Cluster(ClusterRule {
            actions: BTreeMap::from([
                (0, ClusterAction::Constant { class: 1 }),
                (1, ClusterAction::BinaryThreshold { tau: 0.5 }),
            ]),
            default: ClusterAction::WeightedArgmin { weights: vec![1.0, 1.0] },
        });
        let ctx = RuleContext::new(&d, Some(&p));
        assert_eq!(rule.materialize(&ctx).unwrap(), vec![1, 0, 0]);
    }

    #[test]
    fn fixed_rule_is_bound_to_its_sample() {
        let (d, _) = ctx_data();
        let ctx = RuleContext::new(&d, None);
        let rule = DeterministicRule::Fixed { assignment: vec![0, 1] };
        assert!(matches!(rule.materialize(&ctx), Err(Error::Materialize(_))));
    }

    #[test]
    fn soft_predictions_checks() {
        assert!(SoftPredictions::from_rows(&[vec![0.5, 0.6]]).is_err());
        let s = SoftPredictions::from_assignment(&[1, 0], 2).unwrap();
        assert_eq!(s.row(0), &[0.0, 1.0]);
        assert_eq!(argmax_lowest(&[0.2, 0.2, 0.1]), 0);
        assert_eq!(argmin_lowest(&[0.2, 0.1, 0.1]), 1);
    }
}
