//! Basis functions `φ: X → [0,1]` that parameterize the example-weight model.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BasisKind {
    /// `φ(x) = 1`.
    Constant,
    /// `φ(x) = 1(g(x) = cluster)` using the dataset's group ids.
    Cluster { cluster: usize },
    /// `φ(x) = 1(x[column] = 1)`.
    BinaryFeature { column: usize },
    /// `φ(x) = exp(-‖x - center‖ / 2σ²)`; distances are taken on
    /// standardized features when the set carries a standardizer.
    Rbf { center: Vec<f64>, width: f64 },
}

impl BasisKind {
    fn validate(&self) -> Result<()> {
        match self {
            BasisKind::Rbf { width, .. } if !(*width > 0.0) => {
                Err(Error::InvalidArgument(format!("rbf width must be positive, got {width}")))
            }
            _ => Ok(()),
        }
    }
}

/// An ordered list of basis functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    kinds: Vec<BasisKind>,
    #[serde(default)]
    standardizer: Option<Standardizer>,
}

impl BasisSet {
    pub fn new(kinds: Vec<BasisKind>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::InvalidArgument("basis set is empty".into()));
        }
        kinds.iter().try_for_each(BasisKind::validate)?;
        Ok(Self { kinds, standardizer: None })
    }

    pub fn constant() -> Self {
        Self { kinds: vec![BasisKind::Constant], standardizer: None }
    }

    /// One indicator per listed cluster id.
    pub fn clusters(ids: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::new(ids.into_iter().map(|cluster| BasisKind::Cluster { cluster }).collect())
    }

    pub fn with_standardizer(mut self, standardizer: Standardizer) -> Self {
        self.standardizer = Some(standardizer);
        self
    }

    pub fn kinds(&self) -> &[BasisKind] {
        &self.kinds
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// True when every basis is a cluster indicator (so they are disjoint).
    pub fn is_disjoint_clusters(&self) -> bool {
        let ids: Vec<usize> = self
            .kinds
            .iter()
            .filter_map(|k| match k {
                BasisKind::Cluster { cluster } => Some(*cluster),
                _ => None,
            })
            .collect();
        let mut dedup = ids.clone();
        dedup.sort_unstable();
        dedup.dedup();
        ids.len() == self.kinds.len() && dedup.len() == ids.len()
    }

    /// Evaluates every basis on every row.
    pub fn evaluate(&self, data: &Dataset) -> Result<BasisMatrix> {
        let n = data.len();
        let l = self.len();
        let mut values = vec![0.0; n * l];
        for (col, kind) in self.kinds.iter().enumerate() {
            match kind {
                BasisKind::Constant => (0..n).for_each(|i| values[i * l + col] = 1.0),
                BasisKind::Cluster { cluster } => {
                    let groups = data.groups().ok_or_else(|| {
                        Error::InvalidArgument("cluster basis needs group ids on the dataset".into())
                    })?;
                    for (i, g) in groups.iter().enumerate() {
                        values[i * l + col] = if g == cluster { 1.0 } else { 0.0 };
                    }
                }
                BasisKind::BinaryFeature { column } => {
                    if *column >= data.n_features() {
                        return Err(Error::InvalidArgument(format!(
                            "binary-feature column {column} out of range"
                        )));
                    }
                    for i in 0..n {
                        values[i * l + col] = if data.row(i)[*column] == 1.0 { 1.0 } else { 0.0 };
                    }
                }
                BasisKind::Rbf { center, width } => {
                    if center.len() != data.n_features() {
                        return Err(Error::SizeMismatch(format!(
                            "rbf center has {} coordinates, data has {}",
                            center.len(),
                            data.n_features()
                        )));
                    }
                    for i in 0..n {
                        let dist = match &self.standardizer {
                            Some(s) => euclidean(&s.transform_row(data.row(i)), &s.transform_row(center)),
                            None => euclidean(data.row(i), center),
                        };
                        values[i * l + col] = rbf(dist, *width);
                    }
                }
            }
        }
        Ok(BasisMatrix { values, n_basis: l })
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Radial basis value for a distance; note the distance is not squared.
pub fn rbf(distance: f64, width: f64) -> f64 {
    (-distance / (2.0 * width * width)).exp()
}

/// `n × L` evaluated basis values.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    values: Vec<f64>,
    n_basis: usize,
}

impl BasisMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let l = rows.first().map_or(0, Vec::len);
        if l == 0 || rows.iter().any(|r| r.len() != l) {
            return Err(Error::InvalidArgument("ragged or empty basis rows".into()));
        }
        if rows.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("basis values must lie in [0,1]".into()));
        }
        Ok(Self { values: rows.concat(), n_basis: l })
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.n_basis
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_basis..(i + 1) * self.n_basis]
    }

    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.values[i * self.n_basis + l]
    }

    /// For indicator bases: index of the (unique) active basis per row.
    pub fn hard_assignment(&self) -> Result<Vec<Option<usize>>> {
        (0..self.len())
            .map(|i| {
                let row = self.row(i);
                if row.iter().any(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::InvalidArgument("basis is not an indicator basis".into()));
                }
                let active: Vec<usize> = (0..self.n_basis).filter(|&l| row[l] == 1.0).collect();
                match active.len() {
                    0 => Ok(None),
                    1 => Ok(Some(active[0])),
                    _ => Err(Error::InvalidArgument(format!("row {i} lies in several clusters"))),
                }
            })
            .collect()
    }
}
