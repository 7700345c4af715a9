//! Plug-in post-shift classifiers built from elicited weights.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisMatrix, BasisSet};
use crate::classifier::{argmax_lowest, DeterministicRule, SoftPredictions};
use crate::data::{Dataset, ProbabilityModel};
use crate::elicit::{elicit, ElicitConfig, ElicitationResult, Split, WeightCoefficients, WeightMode};
use crate::error::{Error, Result};
use crate::metrics::MetricSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

/// `argmax_i W_i(x) η̂_i(x)` (diagonal) or `argmax_j Σ_i W_ij(x) η̂_i(x)`
/// (full). Weights may be negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostShiftRule {
    pub coefficients: WeightCoefficients,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl PostShiftRule {
    pub fn new(coefficients: WeightCoefficients) -> Self {
        Self { coefficients, tie_break: TieBreak::LowestIndex }
    }

    /// Unweighted argmax of the probability estimates.
    pub fn argmax(n_classes: usize) -> Self {
        Self::from_class_weights(vec![1.0; n_classes]).expect("constant basis with m weights")
    }

    /// `argmax_i w_i η̂_i(x)`.
    pub fn from_class_weights(weights: Vec<f64>) -> Result<Self> {
        Ok(Self::new(WeightCoefficients::class_weights(weights)?))
    }

    pub fn n_classes(&self) -> usize {
        self.coefficients.n_classes
    }

    pub fn basis(&self) -> &BasisSet {
        &self.coefficients.basis
    }

    /// Per-class scores at one point.
    pub fn scores(&self, phi: &[f64], eta: &[f64]) -> Vec<f64> {
        let w = self.coefficients.weights_at(phi);
        let m = eta.len();
        match self.coefficients.mode {
            WeightMode::Diagonal => w.iter().zip(eta).map(|(a, b)| a * b).collect(),
            WeightMode::Full => (0..m).map(|j| (0..m).map(|i| w[i * m + j] * eta[i]).sum()).collect(),
        }
    }

    /// Predictions given an already evaluated basis.
    pub fn predict_with(&self, basis: &BasisMatrix, probs: &ProbabilityModel) -> Result<Vec<usize>> {
        if basis.len() != probs.len() || basis.n_basis() != self.coefficients.basis.len() {
            return Err(Error::SizeMismatch("basis matrix does not match the rule or the probabilities".into()));
        }
        if probs.n_classes() != self.n_classes() {
            return Err(Error::SizeMismatch(format!(
                "rule has {} classes, probabilities have {}",
                self.n_classes(),
                probs.n_classes()
            )));
        }
        Ok((0..probs.len()).map(|x| argmax_lowest(&self.scores(basis.row(x), probs.row(x)))).collect())
    }

    pub fn apply(&self, data: &Dataset, probs: &ProbabilityModel) -> Result<Vec<usize>> {
        probs.check_aligned(data)?;
        self.predict_with(&self.coefficients.basis.evaluate(data)?, probs)
    }
}

/// Materializes a rule on a dataset.
pub fn apply_rule(rule: &PostShiftRule, data: &Dataset, probs: &ProbabilityModel) -> Result<DeterministicRule> {
    Ok(DeterministicRule::Fixed { assignment: rule.apply(data, probs)? })
}

/// `h ↦ metric(val, h)`.
pub fn metric_objective<'a>(
    metric: &'a MetricSpec,
    val: &'a Dataset,
) -> impl FnMut(&SoftPredictions) -> Result<f64> + 'a {
    move |h| metric.evaluate(val, h)
}

/// Elicits weights for `objective` and returns the plug-in rule.
pub fn pi_ew(
    objective: &mut dyn FnMut(&SoftPredictions) -> Result<f64>,
    basis: &BasisSet,
    train: &Split<'_>,
    val: &Split<'_>,
    config: &ElicitConfig,
) -> Result<(PostShiftRule, ElicitationResult)> {
    let result = elicit(objective, basis, train, val, config)?;
    Ok((PostShiftRule::new(result.coefficients.clone()), result))
}

/// [`pi_ew`] for a metric evaluated on the validation split.
pub fn pi_ew_metric(
    metric: &MetricSpec,
    basis: &BasisSet,
    train: &Split<'_>,
    val: &Split<'_>,
    config: &ElicitConfig,
) -> Result<(PostShiftRule, ElicitationResult)> {
    let mut objective = metric_objective(metric, val.data);
    pi_ew(&mut objective, basis, train, val, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rule(weights: Vec<f64>) -> PostShiftRule {
        PostShiftRule::from_class_weights(weights).unwrap()
    }

    #[test]
    fn weighted_argmax() {
        assert_eq!(argmax_lowest(&rule(vec![1.0, 2.0]).scores(&[1.0], &[0.6, 0.4])), 1);
        assert_eq!(argmax_lowest(&rule(vec![1.0, 1.0]).scores(&[1.0], &[0.6, 0.4])), 0);
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let d = Dataset::new(vec![vec![0.0]; 2], vec![0, 2], 3).unwrap();
        let p = ProbabilityModel::from_rows(&[vec![1.0 / 3.0; 3], vec![1.0 / 3.0; 3]]).unwrap();
        assert_eq!(PostShiftRule::argmax(3).apply(&d, &p).unwrap(), vec![0, 0]);
    }

    #[test]
    fn single_live_class() {
        let d = Dataset::new(vec![vec![0.0]; 2], vec![0, 1], 3).unwrap();
        let p = ProbabilityModel::from_rows(&[vec![0.8, 0.1, 0.1], vec![0.0, 0.5, 0.5]]).unwrap();
        assert_eq!(rule(vec![0.0, 1.0, 0.0]).apply(&d, &p).unwrap(), vec![1, 1]);
    }

    #[test]
    fn negative_weight_is_never_chosen() {
        let rows = vec![vec![0.9, 0.05, 0.05], vec![0.5, 0.5, 0.0], vec![1.0, 0.0, 0.0]];
        let d = Dataset::new(vec![vec![0.0]; 3], vec![0, 0, 0], 3).unwrap();
        let p = ProbabilityModel::from_rows(&rows).unwrap();
        // scores for class 0 are negative; others are >= 0
        assert_eq!(rule(vec![-1.0, 1.0, 1.0]).apply(&d, &p).unwrap(), vec![1, 1, 1]);
    }

    #[test]
    fn full_mode_scores() {
        let w = WeightCoefficients::new(vec![0.0, 1.0, 1.0, 0.0], BasisSet::constant(), WeightMode::Full, 2).unwrap();
        let r = PostShiftRule::new(w);
        // swaps the classes: score_j = η̂_{1-j}
        assert_eq!(r.scores(&[1.0], &[0.7, 0.3]), vec![0.3, 0.7]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn argmax_is_scale_invariant(
            weights in prop::collection::vec(-2.0f64..2.0, 3),
            rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 1..20),
            lambda in 0.01f64..100.0,
        ) {
            let probs = ProbabilityModel::normalized(rows.concat(), 3).unwrap();
            let d = Dataset::new(vec![vec![0.0]; rows.len()], vec![0; rows.len()], 3).unwrap();
            let a = rule(weights.clone()).apply(&d, &probs).unwrap();
            let b = rule(weights.iter().map(|w| w * lambda).collect()).apply(&d, &probs).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
