//! Ridge-stabilised normal equations for the template regression.
//!
//! The system `A = G + R` is solved in diagonally scaled coordinates,
//! `Ã = D⁻¹AD⁻¹` with `D = diag(A)^(1/2)`, because the template channels
//! span many orders of magnitude in energy.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shrinkage added to the diagonal of the Gram matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ridge {
    /// Each diagonal entry `G_ii` is inflated to `(1 + relative)·G_ii`.
    pub relative: f64,
    /// Variance added to every template-channel diagonal entry (not the
    /// intercept).
    pub noise: NoiseRidge,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseRidge {
    Off,
    /// Squared noise level estimated from the field being scanned.
    Auto,
    Fixed(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge {
            relative: 1e-10,
            noise: NoiseRidge::Auto,
        }
    }
}

impl Ridge {
    pub fn exact() -> Self {
        Ridge {
            relative: 0.0,
            noise: NoiseRidge::Off,
        }
    }

    /// Diagonal increments for a `dim × dim` Gram whose last row is the
    /// intercept, given the noise variance estimate of the current field.
    pub fn diagonal(&self, gram: &DMatrix<f64>, noise_var: f64) -> Vec<f64> {
        let dim = gram.nrows();
        let lambda = match self.noise {
            NoiseRidge::Off => 0.0,
            NoiseRidge::Auto => noise_var,
            NoiseRidge::Fixed(v) => v,
        };
        (0..dim)
            .map(|i| {
                let base = self.relative * gram[(i, i)];
                if i + 1 < dim {
                    base + lambda
                } else {
                    base
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |v: f64| !v.is_finite() || v < 0.0;
        if bad(self.relative) {
            return Err(Error::Spec(format!("relative ridge {} must be ≥ 0", self.relative)));
        }
        if let NoiseRidge::Fixed(v) = self.noise {
            if bad(v) {
                return Err(Error::Spec(format!("noise ridge {v} must be ≥ 0")));
            }
        }
        Ok(())
    }
}

/// Inverse of a ridge-stabilised Gram matrix.
#[derive(Clone, Debug)]
pub struct NormalSolver {
    gram: DMatrix<f64>,
    ridge: Vec<f64>,
    inverse: DMatrix<f64>,
    condition: f64,
}

impl NormalSolver {
    pub fn new(gram: &DMatrix<f64>, ridge_diag: &[f64]) -> Result<Self> {
        let dim = gram.nrows();
        assert_eq!(ridge_diag.len(), dim);
        let mut a = gram.clone();
        for (i, r) in ridge_diag.iter().enumerate() {
            a[(i, i)] += r;
        }
        let scaled = diagonal_scaling(&a);
        let condition = condition_number(&scaled);
        let inv_d: Vec<f64> = (0..dim).map(|i| 1.0 / a[(i, i)].sqrt()).collect();
        if inv_d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "normal matrix has a non-positive diagonal entry (condition {condition:e})"
            )));
        }
        let chol = scaled.cholesky().ok_or_else(|| {
            Error::Numeric(format!(
                "normal matrix is not positive definite (scaled condition {condition:e}); \
                 increase the ridge"
            ))
        })?;
        let mut inverse = chol.inverse();
        for i in 0..dim {
            for j in 0..dim {
                inverse[(i, j)] *= inv_d[i] * inv_d[j];
            }
        }
        Ok(NormalSolver {
            gram: gram.clone(),
            ridge: ridge_diag.to_vec(),
            inverse,
            condition,
        })
    }

    /// Unregularised Gram matrix.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Diagonal of `R`.
    pub fn ridge(&self) -> &[f64] {
        &self.ridge
    }

    /// `(G + R)⁻¹`
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// 2-norm condition number of the diagonally scaled system.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        &self.inverse * rhs
    }
}

/// `D⁻¹AD⁻¹` with `D = diag(A)^(1/2)`; zero diagonals leave their row and
/// column at zero.
pub fn diagonal_scaling(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d: Vec<f64> = (0..a.nrows())
        .map(|i| {
            let v = a[(i, i)];
            if v > 0.0 {
                1.0 / v.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * d[i] * d[j])
}

/// 2-norm condition number of a symmetric matrix; `+∞` when singular.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(a.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v.abs()), hi.max(v.abs())));
    let min_signed = eig.eigenvalues.min();
    if hi == 0.0 || min_signed <= hi * f64::EPSILON * a.nrows() as f64 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_condition_is_one() {
        assert!((condition_number(&DMatrix::identity(5, 5)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_condition_is_infinite() {
        let mut a = DMatrix::identity(4, 4);
        a[(2, 2)] = 0.0;
        assert_eq!(condition_number(&a), f64::INFINITY);
        assert_eq!(condition_number(&diagonal_scaling(&a)), f64::INFINITY);
    }

    #[test]
    fn badly_scaled_system_inverts_accurately() {
        let dim = 5;
        let base = DMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { 0.3 });
        let s: Vec<f64> = (0..dim).map(|i| 10f64.powi(-(3 * i as i32))).collect();
        let g = DMatrix::from_fn(dim, dim, |i, j| base[(i, j)] * s[i] * s[j]);
        let solver = NormalSolver::new(&g, &vec![0.0; dim]).unwrap();
        let want = base.try_inverse().unwrap();
        for i in 0..dim {
            for j in 0..dim {
                let got = solver.inverse()[(i, j)] * s[i] * s[j];
                assert!((got - want[(i, j)]).abs() < 1e-12 * want[(i, j)].abs().max(1.0));
            }
        }
        assert!(solver.condition() < 10.0);
    }

    #[test]
    fn singular_gram_is_a_numeric_error() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(NormalSolver::new(&g, &[0.0, 0.0]), Err(Error::Numeric(_))));
        assert!(NormalSolver::new(&g, &[1e-3, 1e-3]).is_ok());
    }

    #[test]
    fn ridge_diagonal_spares_intercept() {
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 4.0, 100.0]));
        let r = Ridge {
            relative: 0.5,
            noise: NoiseRidge::Fixed(0.25),
        };
        assert_eq!(r.diagonal(&g, 9.0), vec![1.25, 2.25, 50.0]);
        let auto = Ridge {
            relative: 0.0,
            noise: NoiseRidge::Auto,
        };
        assert_eq!(auto.diagonal(&g, 9.0), vec![9.0, 9.0, 0.0]);
    }
}
