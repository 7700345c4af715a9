//! Dense solves for the elicitation system with conditioning diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Systems whose condition number exceeds this raise a warning.
pub const ILL_CONDITIONED: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub alpha: Vec<f64>,
    /// `σ_max / σ_min` over the retained singular values.
    pub condition_number: f64,
    /// `‖Σα − rhs‖₂`, recomputed after solving.
    pub residual: f64,
    pub ill_conditioned: bool,
    pub rank: usize,
}

fn matrix(sigma: &[f64], k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || sigma.len() != k * k {
        return Err(Error::SizeMismatch(format!("system matrix has {} entries, expected {k}x{k}", sigma.len())));
    }
    Ok(DMatrix::from_row_slice(k, k, sigma))
}

fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Condition number `σ_max/σ_min` of a row-major `k × k` matrix
/// (infinite when singular).
pub fn condition_number(sigma: &[f64], k: usize) -> Result<f64> {
    let s = singular_values(&matrix(sigma, k)?);
    Ok(ratio(s[0], s[k - 1]))
}

/// Condition number over the leading `rank` singular values.
pub fn condition_number_rank(sigma: &[f64], k: usize, rank: usize) -> Result<f64> {
    if rank == 0 || rank > k {
        return Err(Error::InvalidArgument(format!("rank {rank} outside 1..={k}")));
    }
    let s = singular_values(&matrix(sigma, k)?);
    Ok(ratio(s[0], s[rank - 1]))
}

/// Number of singular values above `σ_max · EPS · k`, the same cutoff the
/// plain solve uses to declare a system singular.
pub fn numerical_rank(sigma: &[f64], k: usize) -> Result<usize> {
    let s = singular_values(&matrix(sigma, k)?);
    Ok(s.iter().filter(|v| **v > s[0] * f64::EPSILON * k as f64).count())
}

fn ratio(max: f64, min: f64) -> f64 {
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn residual(a: &DMatrix<f64>, alpha: &DVector<f64>, rhs: &DVector<f64>) -> f64 {
    (a * alpha - rhs).norm()
}

fn finish(a: &DMatrix<f64>, alpha: DVector<f64>, rhs: &DVector<f64>, condition_number: f64, rank: usize) -> Solution {
    let ill_conditioned = condition_number > ILL_CONDITIONED;
    if ill_conditioned {
        log::warn!("elicitation system is ill-conditioned (condition number {condition_number:e})");
    }
    Solution {
        residual: residual(a, &alpha, rhs),
        alpha: alpha.iter().copied().collect(),
        condition_number,
        ill_conditioned,
        rank,
    }
}

/// Solves `Σα = rhs` by LU when `reg = 0`, otherwise the ridge system
/// `(ΣᵀΣ + reg·I)α = Σᵀrhs`.
pub fn solve(sigma: &[f64], k: usize, rhs: &[f64], reg: f64) -> Result<Solution> {
    let a = matrix(sigma, k)?;
    if rhs.len() != k {
        return Err(Error::SizeMismatch(format!("rhs has {} entries, expected {k}", rhs.len())));
    }
    if !(reg >= 0.0) {
        return Err(Error::InvalidArgument(format!("regularization must be nonnegative, got {reg}")));
    }
    let b = DVector::from_column_slice(rhs);
    let s = singular_values(&a);
    let cond = ratio(s[0], s[k - 1]);
    if reg == 0.0 {
        if !(s[k - 1] > s[0] * f64::EPSILON * k as f64) {
            log::warn!("elicitation system is singular; a base classifier that is constant on several clusters or an empty cell makes it so");
            return Err(Error::Singular { condition: cond });
        }
        let alpha = a.clone().lu().solve(&b).ok_or(Error::Singular { condition: cond })?;
        return Ok(finish(&a, alpha, &b, cond, k));
    }
    let normal = a.transpose() * &a + DMatrix::identity(k, k) * reg;
    let alpha = normal
        .cholesky()
        .map(|c| c.solve(&(a.transpose() * &b)))
        .ok_or(Error::Singular { condition: cond })?;
    Ok(finish(&a, alpha, &b, cond, k))
}

/// Minimum-norm least-squares solution using the leading `rank` singular
/// triplets; the condition number is taken over those triplets.
pub fn solve_truncated(sigma: &[f64], k: usize, rhs: &[f64], rank: usize) -> Result<Solution> {
    let a = matrix(sigma, k)?;
    if rhs.len() != k {
        return Err(Error::SizeMismatch(format!("rhs has {} entries, expected {k}", rhs.len())));
    }
    if rank == 0 || rank > k {
        return Err(Error::InvalidArgument(format!("rank {rank} outside 1..={k}")));
    }
    let b = DVector::from_column_slice(rhs);
    let svd = a.clone().svd(true, true);
    let (u, v_t) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let kept = &order[..rank];
    let (max, min) = (svd.singular_values[kept[0]], svd.singular_values[kept[rank - 1]]);
    let cond = ratio(max, min);
    if !(min > max * f64::EPSILON * k as f64) {
        return Err(Error::Singular { condition: cond });
    }
    let mut alpha = DVector::zeros(k);
    for &j in kept {
        let coef = u.column(j).dot(&b) / svd.singular_values[j];
        alpha += v_t.row(j).transpose() * coef;
    }
    Ok(finish(&a, alpha, &b, cond, rank))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_by_two_hand_solve() {
        let sol = solve(&[0.45, 0.10, 0.15, 0.30], 2, &[0.55, 0.45], 0.0).unwrap();
        assert_abs_diff_eq!(sol.alpha[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.alpha[1], 1.0, epsilon = 1e-12);
        assert!(sol.residual < 1e-12);
        assert!(sol.condition_number >= 1.0);
    }

    #[test]
    fn identity_returns_rhs() {
        let sol = solve(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], 3, &[0.3, -2.0, 5.0], 0.0).unwrap();
        assert_eq!(sol.alpha, vec![0.3, -2.0, 5.0]);
        assert_eq!(sol.condition_number, 1.0);
        assert!(!sol.ill_conditioned);
    }

    #[test]
    fn singular_system_errors_without_ridge() {
        let sigma = [1.0, 2.0, 2.0, 4.0];
        assert!(matches!(solve(&sigma, 2, &[1.0, 2.0], 0.0), Err(Error::Singular { .. })));
        let ridge = solve(&sigma, 2, &[1.0, 2.0], 1e-3).unwrap();
        assert!(ridge.alpha.iter().all(|a| a.is_finite()));
        assert!(ridge.residual < 1e-2);
    }

    #[test]
    fn ill_conditioning_flag() {
        let sol = solve(&[1.0, 0.0, 0.0, 1e-9], 2, &[1.0, 1e-9], 0.0).unwrap();
        assert!(sol.ill_conditioned);
        assert_abs_diff_eq!(sol.condition_number, 1e9, epsilon = 1.0);
    }

    #[test]
    fn truncated_solve_is_min_norm() {
        // rank-1 system [[1,1],[1,1]] α = (2,2): min-norm solution (1,1)
        let sol = solve_truncated(&[1.0, 1.0, 1.0, 1.0], 2, &[2.0, 2.0], 1).unwrap();
        assert_abs_diff_eq!(sol.alpha[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.alpha[1], 1.0, epsilon = 1e-12);
        assert_eq!(sol.rank, 1);
        assert_abs_diff_eq!(sol.condition_number, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn truncated_full_rank_matches_lu() {
        let sigma = [2.0, 1.0, 0.5, 0.3, 3.0, 0.2, 0.1, 0.4, 1.5];
        let rhs = [1.0, 2.0, 3.0];
        let a = solve(&sigma, 3, &rhs, 0.0).unwrap();
        let b = solve_truncated(&sigma, 3, &rhs, 3).unwrap();
        for (x, y) in a.alpha.iter().zip(&b.alpha) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }
}
