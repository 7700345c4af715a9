//! Confusion statistics and their basis-weighted (φ-transformed) variants.

use serde::{Deserialize, Serialize};

use crate::basis::BasisMatrix;
use crate::classifier::SoftPredictions;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Empirical confusion matrix, `full[i*m + j] = (1/n) Σ 1(y=i) h_j(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionStats {
    n_classes: usize,
    full: Vec<f64>,
}

impl ConfusionStats {
    pub fn from_full(full: Vec<f64>, n_classes: usize) -> Result<Self> {
        if full.len() != n_classes * n_classes {
            return Err(Error::SizeMismatch(format!(
                "{} confusion entries for {n_classes} classes",
                full.len()
            )));
        }
        Ok(Self { n_classes, full })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.full[i * self.n_classes + j]
    }

    pub fn full(&self) -> &[f64] {
        &self.full
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n_classes).map(|i| self.get(i, i)).collect()
    }

    /// Row sums, i.e. the empirical class frequencies.
    pub fn priors(&self) -> Vec<f64> {
        self.full.chunks(self.n_classes).map(|r| r.iter().sum()).collect()
    }

    /// Column sums, i.e. the predicted-class frequencies.
    pub fn predicted(&self) -> Vec<f64> {
        (0..self.n_classes).map(|j| (0..self.n_classes).map(|i| self.get(i, j)).sum()).collect()
    }
}

fn check(data: &Dataset, h: &SoftPredictions) -> Result<()> {
    if h.len() != data.len() || h.n_classes() != data.n_classes() {
        return Err(Error::SizeMismatch(format!(
            "predictions are {}x{}, dataset is {}x{}",
            h.len(),
            h.n_classes(),
            data.len(),
            data.n_classes()
        )));
    }
    Ok(())
}

/// Confusion matrix of a randomized classifier, computed exactly.
pub fn confusion(data: &Dataset, h: &SoftPredictions) -> Result<ConfusionStats> {
    check(data, h)?;
    let m = data.n_classes();
    let mut full = vec![0.0; m * m];
    for (i, &y) in data.labels().iter().enumerate() {
        for (acc, p) in full[y * m..(y + 1) * m].iter_mut().zip(h.row(i)) {
            *acc += p;
        }
    }
    let n = data.len() as f64;
    full.iter_mut().for_each(|v| *v /= n);
    Ok(ConfusionStats { n_classes: m, full })
}

/// φ-transformed diagonal confusions, flattened basis-major:
/// `values[l*m + i] = (1/n) Σ φ^l(x) 1(y=i) h_i(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiConfusions {
    pub n_basis: usize,
    pub n_classes: usize,
    pub values: Vec<f64>,
}

impl PhiConfusions {
    pub fn get(&self, l: usize, i: usize) -> f64 {
        self.values[l * self.n_classes + i]
    }
}

fn check_basis(data: &Dataset, basis: &BasisMatrix) -> Result<()> {
    if basis.len() != data.len() {
        return Err(Error::SizeMismatch(format!(
            "basis evaluated on {} rows, dataset has {}",
            basis.len(),
            data.len()
        )));
    }
    Ok(())
}

pub fn phi_confusions(data: &Dataset, basis: &BasisMatrix, h: &SoftPredictions) -> Result<PhiConfusions> {
    check(data, h)?;
    check_basis(data, basis)?;
    let m = data.n_classes();
    let l = basis.n_basis();
    let mut values = vec![0.0; l * m];
    for (i, &y) in data.labels().iter().enumerate() {
        let hy = h.row(i)[y];
        if hy == 0.0 {
            continue;
        }
        for (b, phi) in basis.row(i).iter().enumerate() {
            values[b * m + y] += phi * hy;
        }
    }
    let n = data.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(PhiConfusions { n_basis: l, n_classes: m, values })
}

/// Full φ-transformed confusions, `values[(l*m + i)*m + j] = (1/n) Σ φ^l(x) 1(y=i) h_j(x)`.
pub fn phi_confusions_full(data: &Dataset, basis: &BasisMatrix, h: &SoftPredictions) -> Result<Vec<f64>> {
    check(data, h)?;
    check_basis(data, basis)?;
    let m = data.n_classes();
    let l = basis.n_basis();
    let mut values = vec![0.0; l * m * m];
    for (i, &y) in data.labels().iter().enumerate() {
        for (b, phi) in basis.row(i).iter().enumerate() {
            if *phi == 0.0 {
                continue;
            }
            let base = (b * m + y) * m;
            for (j, p) in h.row(i).iter().enumerate() {
                values[base + j] += phi * p;
            }
        }
    }
    let n = data.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(values)
}
