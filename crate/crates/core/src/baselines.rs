//! Reference plug-in comparators.

use serde::{Deserialize, Serialize};

use crate::classifier::{argmax_lowest, SoftPredictions};
use crate::data::{Dataset, ProbabilityModel};
use crate::error::{Error, Result};
use crate::metrics::MetricSpec;
use crate::plugin::PostShiftRule;

/// Unweighted argmax of `η̂`.
pub fn argmax_baseline(probs: &ProbabilityModel) -> PostShiftRule {
    PostShiftRule::argmax(probs.n_classes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSearch {
    pub rule: PostShiftRule,
    /// Selected `ζ` per searched class, anchor excluded.
    pub zetas: Vec<f64>,
    /// Classes whose best `ζ` was 1, with the ratio capped at `1/spacing`.
    pub capped: Vec<usize>,
    pub queries: usize,
    /// Validation metric of the returned rule.
    pub value: f64,
}

/// Number of grid points `{0, spacing, …, 1}`.
pub fn grid_len(spacing: f64) -> usize {
    (1.0 / spacing).round() as usize + 1
}

/// Coordinate-wise search over per-class weights of `argmax_i w_i η̂_i`,
/// anchored at `w_m = 1`. For `j = 1..m−1` in order, class `j` is scored
/// `ζ η̂_j` against `(1−ζ) w_k η̂_k` for the others, `ζ` is line-searched on
/// the validation metric and `w_j = ζ*/(1−ζ*)`. With two classes this is
/// exactly the pairwise search between class 1 and class 2.
pub fn coordinate_search_plugin(
    probs: &ProbabilityModel,
    val: &Dataset,
    metric: &MetricSpec,
    spacing: f64,
) -> Result<CoordinateSearch> {
    if !(spacing > 0.0 && spacing <= 0.5) {
        return Err(Error::InvalidArgument(format!("spacing must lie in (0, 0.5], got {spacing}")));
    }
    let m = probs.n_classes();
    if m < 2 || val.n_classes() != m || probs.len() != val.len() {
        return Err(Error::SizeMismatch("probabilities and validation sample disagree".into()));
    }
    let steps = grid_len(spacing) - 1;
    let anchor = m - 1;
    let mut weights = vec![1.0; m];
    let mut zetas = Vec::with_capacity(anchor);
    let mut capped = Vec::new();
    let mut queries = 0;
    let mut value = f64::NEG_INFINITY;
    for j in 0..anchor {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 0..=steps {
            let zeta = k as f64 / steps as f64;
            let assignment: Vec<usize> = (0..probs.len())
                .map(|x| {
                    let p = probs.row(x);
                    let scores: Vec<f64> = (0..m)
                        .map(|c| if c == j { zeta * p[c] } else { (1.0 - zeta) * weights[c] * p[c] })
                        .collect();
                    argmax_lowest(&scores)
                })
                .collect();
            let v = metric.evaluate(val, &SoftPredictions::from_assignment(&assignment, m)?)?;
            queries += 1;
            if !v.is_finite() {
                return Err(Error::NonFiniteMetric { probe: queries - 1, value: v });
            }
            if v > best.0 {
                best = (v, zeta);
            }
        }
        let (v, zeta) = best;
        weights[j] = if zeta >= 1.0 {
            capped.push(j);
            log::warn!("coordinate search for class {j} hit zeta = 1; capping the weight ratio at {}", 1.0 / spacing);
            1.0 / spacing
        } else {
            zeta / (1.0 - zeta)
        };
        zetas.push(zeta);
        value = v;
    }
    let total: f64 = weights.iter().sum();
    let weights = weights.iter().map(|w| w / total).collect();
    Ok(CoordinateSearch { rule: PostShiftRule::from_class_weights(weights)?, zetas, capped, queries, value })
}
