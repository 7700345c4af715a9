//! Minimal multinomial logistic regression, for supplying `η̂` when a
//! dataset has no probability columns.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ProbabilityModel, Standardizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self { iterations: 300, learning_rate: 0.5, l2: 1e-4 }
    }
}

/// Softmax regression on standardized features, fit by full-batch
/// gradient descent from zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    standardizer: Standardizer,
    /// Row `k`: bias followed by `d` coefficients for class `k`.
    coefficients: Vec<Vec<f64>>,
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter_mut().for_each(|x| *x = (*x - max).exp());
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

impl LogisticRegression {
    pub fn fit(data: &Dataset, config: &LogRegConfig) -> Result<Self> {
        if !(config.learning_rate > 0.0) || !(config.l2 >= 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive and l2 nonnegative".into()));
        }
        let standardizer = Standardizer::fit(data);
        let x = standardizer.transform(data)?;
        let (n, d, m) = (x.len(), x.n_features(), x.n_classes());
        let mut w = vec![vec![0.0; d + 1]; m];
        let mut probs = vec![0.0; m];
        for _ in 0..config.iterations {
            let mut grad = vec![vec![0.0; d + 1]; m];
            for i in 0..n {
                let row = x.row(i);
                for (k, p) in probs.iter_mut().enumerate() {
                    *p = w[k][0] + w[k][1..].iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                }
                softmax_in_place(&mut probs);
                let y = x.label(i);
                for (k, g) in grad.iter_mut().enumerate() {
                    let r = probs[k] - f64::from(u8::from(k == y));
                    g[0] += r;
                    g[1..].iter_mut().zip(row).for_each(|(gj, xj)| *gj += r * xj);
                }
            }
            for (wk, gk) in w.iter_mut().zip(&grad) {
                for (j, (a, g)) in wk.iter_mut().zip(gk).enumerate() {
                    let penalty = if j == 0 { 0.0 } else { config.l2 * *a };
                    *a -= config.learning_rate * (g / n as f64 + penalty);
                }
            }
        }
        Ok(Self { standardizer, coefficients: w })
    }

    pub fn predict(&self, data: &Dataset) -> Result<ProbabilityModel> {
        let d = self.coefficients[0].len() - 1;
        if data.n_features() != d {
            return Err(Error::SizeMismatch(format!("model has {d} features, data has {}", data.n_features())));
        }
        let m = self.coefficients.len();
        let mut out = Vec::with_capacity(data.len() * m);
        for i in 0..data.len() {
            let row = self.standardizer.transform_row(data.row(i));
            let mut s: Vec<f64> = self
                .coefficients
                .iter()
                .map(|wk| wk[0] + wk[1..].iter().zip(&row).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            softmax_in_place(&mut s);
            out.extend(s);
        }
        ProbabilityModel::normalized(out, m)
    }
}
