//! Dense reference solver used to check [`super::nnlasso`] on small problems.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const MAX_ORACLE_COLUMNS: usize = 256;
const MAX_ITERATIONS: usize = 1_000_000;
const STATIONARITY: f64 = 1e-12;

/// `(1/2N) ||y - A beta||^2 + r sum beta` for a dense `A` with `N` rows.
pub fn dense_objective(a: &DMatrix<f64>, y: &[f64], r: f64, beta: &[f64]) -> f64 {
    let res = DVector::from_column_slice(y) - a * DVector::from_column_slice(beta);
    res.norm_squared() / (2.0 * a.nrows() as f64) + r * beta.iter().sum::<f64>()
}

/// Accelerated projected gradient on the non-negative LASSO with step `1/L`,
/// `L` the largest eigenvalue of `A^T A / N`. Stops once
/// `max_n |min(beta_n, grad_n)| <= 1e-12`.
pub fn brute_force_oracle(a: &DMatrix<f64>, y: &[f64], r: f64) -> Result<Vec<f64>> {
    let cols = a.ncols();
    if cols > MAX_ORACLE_COLUMNS {
        return Err(Error::Oracle(format!("{cols} columns exceed the oracle limit")));
    }
    if a.nrows() != y.len() {
        return Err(Error::Oracle("row count does not match y".into()));
    }
    let n = a.nrows() as f64;
    let gram = a.transpose() * a / n;
    let b = a.transpose() * DVector::from_column_slice(y) / n;
    let lipschitz = SymmetricEigen::new(gram.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max);
    if lipschitz <= 0.0 {
        return Ok(vec![0.0; cols]);
    }
    let step = 1.0 / lipschitz;
    let grad = |x: &DVector<f64>| &gram * x - &b + DVector::from_element(cols, r);
    let project = |v: DVector<f64>| v.map(|e| e.max(0.0));

    let mut x = DVector::zeros(cols);
    let mut z = x.clone();
    let mut t = 1.0f64;
    for it in 0..MAX_ITERATIONS {
        let next = project(&z - grad(&z) * step);
        // Gradient-based adaptive restart.
        let restart = (&z - &next).dot(&(&next - &x)) > 0.0;
        let t_next = if restart {
            1.0
        } else {
            (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
        };
        z = if restart {
            next.clone()
        } else {
            &next + (&next - &x) * ((t - 1.0) / t_next)
        };
        x = next;
        t = t_next;
        if it % 16 == 0 {
            let g = grad(&x);
            let stat = x
                .iter()
                .zip(g.iter())
                .map(|(xi, gi)| xi.min(*gi).abs())
                .fold(0.0, f64::max);
            if stat <= STATIONARITY {
                return Ok(x.iter().copied().collect());
            }
        }
    }
    Err(Error::Oracle(format!(
        "projected gradient hit the {MAX_ITERATIONS}-iteration cap"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_signal() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(brute_force_oracle(&a, &[0.0; 3], 0.1).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn orthogonal_columns_soft_threshold() {
        // A = sqrt(N) I: beta_n = max(0, y_n / sqrt(N) - r).
        let n = 4.0f64;
        let a = DMatrix::identity(4, 4) * n.sqrt();
        let y = [4.0, 1.0, -2.0, 0.2];
        let beta = brute_force_oracle(&a, &y, 0.3).unwrap();
        for (b, yi) in beta.iter().zip(y) {
            let want = (yi / n.sqrt() - 0.3).max(0.0);
            assert!((b - want).abs() < 1e-10);
        }
    }

    #[test]
    fn too_many_columns() {
        let a = DMatrix::zeros(2, 300);
        assert!(matches!(brute_force_oracle(&a, &[0.0; 2], 0.1), Err(Error::Oracle(_))));
    }
}
