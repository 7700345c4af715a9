//! Evaluation metrics over confusion statistics, their gradients with respect
//! to the diagonal entries, and opaque query oracles.

use std::fmt;
use std::sync::Arc;

use crate::classifier::SoftPredictions;
use crate::confusion::{confusion, ConfusionStats};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Diagonal entries below this are clamped before taking the G-mean gradient.
pub const GRADIENT_FLOOR: f64 = 1e-6;

/// A metric value, flagged when it was taken at a degenerate point
/// (zero recall, empty group, ...).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub degenerate: bool,
}

impl MetricValue {
    fn ok(value: f64) -> Self {
        Self { value, degenerate: false }
    }

    fn degenerate(value: f64) -> Self {
        Self { value, degenerate: true }
    }
}

/// A metric that can only be queried.
pub trait MetricOracle: Send + Sync {
    fn name(&self) -> String;
    /// Metric value of `predictions` on `data`. Must be deterministic.
    fn query(&self, data: &Dataset, predictions: &SoftPredictions) -> Result<f64>;
}

#[derive(Clone)]
pub struct OracleHandle(Arc<dyn MetricOracle>);

impl OracleHandle {
    pub fn new(oracle: impl MetricOracle + 'static) -> Self {
        Self(Arc::new(oracle))
    }

    pub fn query(&self, data: &Dataset, predictions: &SoftPredictions) -> Result<f64> {
        self.0.query(data, predictions)
    }

    pub fn name(&self) -> String {
        self.0.name()
    }
}

impl fmt::Debug for OracleHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OracleHandle({})", self.0.name())
    }
}

#[derive(Debug, Clone)]
pub enum MetricSpec {
    /// `Σ_i β_i C_ii`.
    Linear { weights: Vec<f64> },
    /// `Σ_ij L_ij C_ij` with `costs` row-major `m × m`.
    LinearFull { costs: Vec<f64> },
    /// `(Π_i C_ii / π_i)^{1/m}`.
    GMean,
    /// Mean over classes of `2 C_ii / (Σ_j C_ij + Σ_j C_ji)`.
    FMeasureMacro,
    /// F1 of one class.
    FMeasureBinary { positive: usize },
    Oracle(OracleHandle),
}

impl MetricSpec {
    pub fn accuracy(n_classes: usize) -> Self {
        MetricSpec::Linear { weights: vec![1.0; n_classes] }
    }

    pub fn name(&self) -> String {
        match self {
            MetricSpec::Linear { .. } => "linear".into(),
            MetricSpec::LinearFull { .. } => "linear-full".into(),
            MetricSpec::GMean => "gmean".into(),
            MetricSpec::FMeasureMacro => "fmeasure-macro".into(),
            MetricSpec::FMeasureBinary { .. } => "fmeasure-binary".into(),
            MetricSpec::Oracle(h) => format!("oracle:{}", h.name()),
        }
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self, MetricSpec::Oracle(_))
    }

    /// Closed-form value from a confusion matrix.
    pub fn value_from_stats(&self, stats: &ConfusionStats) -> Result<MetricValue> {
        let m = stats.n_classes();
        match self {
            MetricSpec::Linear { .. } | MetricSpec::GMean | MetricSpec::FMeasureBinary { .. } => {
                self.value_from_diag(&stats.diag(), &stats.priors())
            }
            MetricSpec::LinearFull { costs } => {
                if costs.len() != m * m {
                    return Err(Error::SizeMismatch(format!("{} costs for {m} classes", costs.len())));
                }
                Ok(MetricValue::ok(costs.iter().zip(stats.full()).map(|(l, c)| l * c).sum()))
            }
            MetricSpec::FMeasureMacro => {
                let rows = stats.priors();
                let cols = stats.predicted();
                let mut degenerate = false;
                let total: f64 = (0..m)
                    .map(|i| {
                        let denom = rows[i] + cols[i];
                        if denom > 0.0 {
                            2.0 * stats.get(i, i) / denom
                        } else {
                            degenerate = true;
                            0.0
                        }
                    })
                    .sum();
                Ok(MetricValue { value: total / m as f64, degenerate })
            }
            MetricSpec::Oracle(_) => Err(Error::InvalidArgument(
                "oracle metrics are evaluated on predictions, not confusion statistics".into(),
            )),
        }
    }

    /// Value as a function of the diagonal confusion entries and the class
    /// priors (row sums), for metrics that admit this form.
    pub fn value_from_diag(&self, diag: &[f64], priors: &[f64]) -> Result<MetricValue> {
        let m = diag.len();
        if priors.len() != m {
            return Err(Error::SizeMismatch("diag and priors differ in length".into()));
        }
        match self {
            MetricSpec::Linear { weights } => {
                if weights.len() != m {
                    return Err(Error::SizeMismatch(format!("{} weights for {m} classes", weights.len())));
                }
                Ok(MetricValue::ok(weights.iter().zip(diag).map(|(b, c)| b * c).sum()))
            }
            MetricSpec::GMean => {
                if diag.iter().zip(priors).any(|(c, p)| !(*c > 0.0) || !(*p > 0.0)) {
                    return Ok(MetricValue::degenerate(0.0));
                }
                let log_mean = diag.iter().zip(priors).map(|(c, p)| (c / p).ln()).sum::<f64>() / m as f64;
                Ok(MetricValue::ok(log_mean.exp()))
            }
            MetricSpec::FMeasureBinary { positive } => {
                let (pos, neg) = binary_pair(*positive, m)?;
                let denom = priors[pos] + diag[pos] + priors[neg] - diag[neg];
                if denom > 0.0 {
                    Ok(MetricValue::ok(2.0 * diag[pos] / denom))
                } else {
                    Ok(MetricValue::degenerate(0.0))
                }
            }
            MetricSpec::FMeasureMacro => {
                if m != 2 {
                    return Err(Error::InvalidArgument(
                        "macro F-measure depends on off-diagonal entries when m > 2".into(),
                    ));
                }
                let total = priors[0] + priors[1];
                let f = |a: usize, b: usize| {
                    let denom = total + diag[a] - diag[b];
                    if denom > 0.0 { 2.0 * diag[a] / denom } else { 0.0 }
                };
                let degenerate = total + diag[0] - diag[1] <= 0.0 || total + diag[1] - diag[0] <= 0.0;
                Ok(MetricValue { value: 0.5 * (f(0, 1) + f(1, 0)), degenerate })
            }
            MetricSpec::LinearFull { .. } => Err(Error::InvalidArgument(
                "full linear metrics depend on off-diagonal entries".into(),
            )),
            MetricSpec::Oracle(_) => Err(Error::InvalidArgument("oracle metrics have no closed form".into())),
        }
    }

    /// `∇ψ` with respect to the diagonal entries.
    pub fn gradient(&self, diag: &[f64], priors: &[f64]) -> Result<Vec<f64>> {
        let m = diag.len();
        if priors.len() != m {
            return Err(Error::SizeMismatch("diag and priors differ in length".into()));
        }
        match self {
            MetricSpec::Linear { weights } => {
                if weights.len() != m {
                    return Err(Error::SizeMismatch(format!("{} weights for {m} classes", weights.len())));
                }
                Ok(weights.clone())
            }
            MetricSpec::GMean => {
                let clamped: Vec<f64> = diag
                    .iter()
                    .map(|&c| {
                        if c < GRADIENT_FLOOR {
                            log::debug!("clamping diagonal entry {c} to {GRADIENT_FLOOR} for the G-mean gradient");
                            GRADIENT_FLOOR
                        } else {
                            c
                        }
                    })
                    .collect();
                let psi = MetricSpec::GMean.value_from_diag(&clamped, priors)?.value;
                Ok(clamped.iter().map(|c| psi / (m as f64 * c)).collect())
            }
            MetricSpec::FMeasureBinary { positive } => {
                let (pos, neg) = binary_pair(*positive, m)?;
                let denom = priors[pos] + diag[pos] + priors[neg] - diag[neg];
                let mut g = vec![0.0; 2];
                g[pos] = 2.0 * (priors[pos] + priors[neg] - diag[neg]) / (denom * denom);
                g[neg] = 2.0 * diag[pos] / (denom * denom);
                Ok(g)
            }
            MetricSpec::FMeasureMacro => {
                if m != 2 {
                    return Err(Error::InvalidArgument(
                        "macro F-measure gradient over the diagonal needs m = 2".into(),
                    ));
                }
                let total = priors[0] + priors[1];
                let da = total + diag[0] - diag[1];
                let db = total + diag[1] - diag[0];
                let g0 = 2.0 * (total - diag[1]) / (da * da) + 2.0 * diag[1] / (db * db);
                let g1 = 2.0 * diag[0] / (da * da) + 2.0 * (total - diag[0]) / (db * db);
                Ok(vec![0.5 * g0, 0.5 * g1])
            }
            MetricSpec::LinearFull { .. } | MetricSpec::Oracle(_) => Err(Error::UnsupportedGradient(self.name())),
        }
    }

    /// Metric value of `predictions` on `data`, querying the oracle if needed.
    pub fn evaluate(&self, data: &Dataset, predictions: &SoftPredictions) -> Result<f64> {
        match self {
            MetricSpec::Oracle(handle) => handle.query(data, predictions),
            _ => Ok(self.value_from_stats(&confusion(data, predictions)?)?.value),
        }
    }
}

fn binary_pair(positive: usize, m: usize) -> Result<(usize, usize)> {
    if m != 2 || positive > 1 {
        return Err(Error::InvalidArgument(format!(
            "binary F-measure needs 2 classes and positive class 0 or 1 (m = {m}, positive = {positive})"
        )));
    }
    Ok((positive, 1 - positive))
}

/// Geometric mean of the true-positive and true-negative rates computed
/// separately within two protected groups. Class 1 is the positive class.
pub fn fairness_metric(predictions: &SoftPredictions, labels: &[usize], protected: &[usize]) -> Result<MetricValue> {
    if predictions.len() != labels.len() || protected.len() != labels.len() {
        return Err(Error::SizeMismatch("predictions, labels and protected ids differ in length".into()));
    }
    if predictions.n_classes() != 2 {
        return Err(Error::InvalidArgument("fairness metric needs binary labels".into()));
    }
    let mut groups: Vec<usize> = protected.to_vec();
    groups.sort_unstable();
    groups.dedup();
    if groups.len() > 2 {
        return Err(Error::InvalidArgument(format!("expected 2 protected groups, found {}", groups.len())));
    }
    let mut product = 1.0;
    let mut degenerate = groups.len() < 2;
    for &g in &groups {
        for class in [1, 0] {
            let (mut hit, mut count) = (0.0, 0usize);
            for i in 0..labels.len() {
                if protected[i] == g && labels[i] == class {
                    hit += predictions.row(i)[class];
                    count += 1;
                }
            }
            if count == 0 {
                degenerate = true;
            } else {
                product *= hit / count as f64;
            }
        }
    }
    if degenerate {
        return Ok(MetricValue::degenerate(0.0));
    }
    Ok(MetricValue::ok(product.powf(0.25)))
}

/// The fairness metric behind an opaque handle; reads the protected
/// attribute from the queried sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct FairnessOracle;

impl MetricOracle for FairnessOracle {
    fn name(&self) -> String {
        "fairness".into()
    }

    fn query(&self, data: &Dataset, predictions: &SoftPredictions) -> Result<f64> {
        let protected = data
            .protected()
            .ok_or_else(|| Error::InvalidArgument("fairness oracle needs the protected attribute".into()))?;
        let v = fairness_metric(predictions, data.labels(), protected)?;
        if v.degenerate {
            log::warn!("fairness oracle evaluated with an empty group/class cell; returning 0");
        }
        Ok(v.value)
    }
}

/// A closed-form metric hidden behind the oracle interface.
#[derive(Debug, Clone)]
pub struct BlackBox(pub MetricSpec);

impl MetricOracle for BlackBox {
    fn name(&self) -> String {
        format!("blackbox-{}", self.0.name())
    }

    fn query(&self, data: &Dataset, predictions: &SoftPredictions) -> Result<f64> {
        self.0.evaluate(data, predictions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn gmean_value_and_gradient() {
        let v = MetricSpec::GMean.value_from_diag(&[0.3, 0.2], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(v.value, 0.24f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(v.value, 0.489898, epsilon = 1e-6);
        let g = MetricSpec::GMean.gradient(&[0.3, 0.2], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(g[0], 0.816497, epsilon = 1e-6);
        assert_abs_diff_eq!(g[1], 1.224745, epsilon = 1e-6);
    }

    #[test]
    fn gmean_zero_entry_is_flagged() {
        let v = MetricSpec::GMean.value_from_diag(&[0.0, 0.2], &[0.5, 0.5]).unwrap();
        assert_eq!(v, MetricValue { value: 0.0, degenerate: true });
        let g = MetricSpec::GMean.gradient(&[0.0, 0.2], &[0.5, 0.5]).unwrap();
        assert!(g.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn binary_f1() {
        let stats = ConfusionStats::from_full(vec![0.4, 0.1, 0.2, 0.3], 2).unwrap();
        let v = MetricSpec::FMeasureBinary { positive: 0 }.value_from_stats(&stats).unwrap();
        assert_abs_diff_eq!(v.value, 0.8 / 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(v.value, 0.727273, epsilon = 1e-6);
        let g = MetricSpec::FMeasureBinary { positive: 0 }.gradient(&[0.4, 0.3], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(g[0], 1.157025, epsilon = 1e-6);
        assert_abs_diff_eq!(g[1], 0.661157, epsilon = 1e-6);
    }

    #[test]
    fn macro_f_matches_full_formula_for_two_classes() {
        let stats = ConfusionStats::from_full(vec![0.4, 0.1, 0.2, 0.3], 2).unwrap();
        let full = MetricSpec::FMeasureMacro.value_from_stats(&stats).unwrap().value;
        let expected = 0.5 * (0.8 / (0.5 + 0.6) + 0.6 / (0.5 + 0.4));
        assert_abs_diff_eq!(full, expected, epsilon = 1e-12);
        let from_diag = MetricSpec::FMeasureMacro.value_from_diag(&[0.4, 0.3], &[0.5, 0.5]).unwrap().value;
        assert_abs_diff_eq!(full, from_diag, epsilon = 1e-12);
    }

    #[test]
    fn accuracy_is_a_sum() {
        let v = MetricSpec::accuracy(2).value_from_diag(&[0.45, 0.10], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(v.value, 0.55, epsilon = 1e-15);
        let g = MetricSpec::Linear { weights: vec![2.0, 3.0] }.gradient(&[0.1, 0.2], &[0.5, 0.5]).unwrap();
        assert_eq!(g, vec![2.0, 3.0]);
    }

    #[test]
    fn oracle_has_no_gradient() {
        let spec = MetricSpec::Oracle(OracleHandle::new(FairnessOracle));
        assert!(matches!(spec.gradient(&[0.1, 0.1], &[0.5, 0.5]), Err(Error::UnsupportedGradient(_))));
    }

    fn fairness_case(rates: [f64; 4]) -> f64 {
        // group 0: one positive, one negative; group 1 likewise.
        // rates = (TP_g0, TN_g0, TP_g1, TN_g1)
        let labels = vec![1, 0, 1, 0];
        let protected = vec![0, 0, 1, 1];
        let preds = SoftPredictions::from_rows(&[
            vec![1.0 - rates[0], rates[0]],
            vec![rates[1], 1.0 - rates[1]],
            vec![1.0 - rates[2], rates[2]],
            vec![rates[3], 1.0 - rates[3]],
        ])
        .unwrap();
        fairness_metric(&preds, &labels, &protected).unwrap().value
    }

    #[test]
    fn fairness_examples() {
        assert_abs_diff_eq!(fairness_case([1.0, 1.0, 1.0, 1.0]), 1.0, epsilon = 1e-15);
        assert_eq!(fairness_case([1.0, 1.0, 1.0, 0.0]), 0.0);
        assert_abs_diff_eq!(fairness_case([0.8, 0.6, 0.9, 0.5]), 0.216f64.powf(0.25), epsilon = 1e-12);
        assert_abs_diff_eq!(fairness_case([0.8, 0.6, 0.9, 0.5]), 0.681732, epsilon = 1e-6);
    }

    #[test]
    fn fairness_empty_cell_is_flagged() {
        let preds = SoftPredictions::uniform(2, 2);
        let v = fairness_metric(&preds, &[1, 1], &[0, 1]).unwrap();
        assert!(v.degenerate);
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn oracle_is_deterministic_and_hides_protected_ids() {
        let d = Dataset::new(vec![vec![0.0]; 4], vec![1, 0, 1, 0], 2).unwrap().with_protected(vec![0, 0, 1, 1]).unwrap();
        let spec = MetricSpec::Oracle(OracleHandle::new(FairnessOracle));
        let p = SoftPredictions::from_rows(&[vec![0.2, 0.8], vec![0.6, 0.4], vec![0.1, 0.9], vec![0.5, 0.5]]).unwrap();
        let a = spec.evaluate(&d, &p).unwrap();
        assert_eq!(a, spec.evaluate(&d, &p).unwrap());
        assert!(spec.evaluate(&d.without_protected(), &p).is_err());
    }

    fn fd_gradient(spec: &MetricSpec, diag: &[f64], priors: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..diag.len())
            .map(|i| {
                let mut up = diag.to_vec();
                let mut down = diag.to_vec();
                up[i] += h;
                down[i] -= h;
                let f = |d: &[f64]| spec.value_from_diag(d, priors).unwrap().value;
                (f(&up) - f(&down)) / (2.0 * h)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn gmean_gradient_matches_finite_differences(
            p0 in 0.15f64..0.85, m3 in any::<bool>(), u in prop::collection::vec(0.0f64..1.0, 3)
        ) {
            let priors = if m3 {
                let rest = 1.0 - p0;
                vec![p0, rest * 0.5, rest * 0.5]
            } else {
                vec![p0, 1.0 - p0]
            };
            prop_assume!(priors.iter().all(|p| *p > 0.1 + 1e-3));
            let diag: Vec<f64> = priors.iter().zip(&u).map(|(p, t)| 0.05 + t * (p - 0.1)).collect();
            let g = MetricSpec::GMean.gradient(&diag, &priors).unwrap();
            let fd = fd_gradient(&MetricSpec::GMean, &diag, &priors);
            for (a, b) in g.iter().zip(&fd) {
                prop_assert!(((a - b) / b).abs() < 1e-5);
            }
        }

        #[test]
        fn gmean_is_concave(
            a in prop::collection::vec(0.05f64..0.45, 2),
            b in prop::collection::vec(0.05f64..0.45, 2),
            lambda in 0.0f64..1.0,
        ) {
            let priors = [0.5, 0.5];
            let f = |d: &[f64]| MetricSpec::GMean.value_from_diag(d, &priors).unwrap().value;
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
            prop_assert!(f(&mid) >= lambda * f(&a) + (1.0 - lambda) * f(&b) - 1e-12);
        }

        #[test]
        fn linear_metric_is_homogeneous(
            beta in prop::collection::vec(-3.0f64..3.0, 3),
            c in prop::collection::vec(0.0f64..0.3, 3),
            lambda in 0.0f64..2.0,
        ) {
            let spec = MetricSpec::Linear { weights: beta };
            let priors = [0.3, 0.3, 0.4];
            let scaled: Vec<f64> = c.iter().map(|x| lambda * x).collect();
            let a = spec.value_from_diag(&scaled, &priors).unwrap().value;
            let b = spec.value_from_diag(&c, &priors).unwrap().value;
            prop_assert!((a - lambda * b).abs() < 1e-12);
        }
    }
}
