//! Stationary laws of irreducible finite Markov chains.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Accepted `‖pᵀP − pᵀ‖_∞` for a stationary vector.
pub const STATIONARY_RESIDUAL: f64 = 1e-10;
const FALLBACK_ITERATIONS: usize = 1_000_000;

/// Unique stationary vector of an irreducible row-stochastic matrix.
///
/// Solves `(Pᵀ − I) p = 0` with the last equation replaced by `Σ p = 1`.
/// If that system is singular or its solution fails the residual check,
/// iterates the lazy chain `(P + I) / 2`, which has the same stationary
/// vector and is aperiodic even when `P` is not.
pub fn stationary_law(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    if n == 0 || p.ncols() != n {
        return Err(Error::Numerical("stationary law of a non-square or empty matrix".into()));
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    if let Some(x) = direct_solve(p) {
        if residual(p, &x) < STATIONARY_RESIDUAL {
            return Ok(x);
        }
    }
    lazy_iteration(p)
}

fn direct_solve(p: &DMatrix<f64>) -> Option<Vec<f64>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b)?;
    if x.iter().any(|v| !v.is_finite() || *v < -STATIONARY_RESIDUAL) {
        return None;
    }
    Some(normalize(x.iter().map(|v| v.max(0.0)).collect()))
}

fn lazy_iteration(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    let lazy = (p + DMatrix::identity(n, n)) * 0.5;
    let mut x = DVector::from_element(n, 1.0 / n as f64).transpose();
    for _ in 0..FALLBACK_ITERATIONS {
        let next = &x * &lazy;
        let diff = (&next - &x).amax();
        x = next;
        if diff < 1e-15 {
            break;
        }
    }
    let out = normalize(x.iter().copied().collect());
    let r = residual(p, &out);
    if r < STATIONARY_RESIDUAL {
        Ok(out)
    } else {
        Err(Error::Numerical(format!("stationary residual {r:e} after fallback iteration")))
    }
}

fn normalize(mut x: Vec<f64>) -> Vec<f64> {
    let total: f64 = x.iter().sum();
    for v in &mut x {
        *v /= total;
    }
    x
}

/// `‖xᵀP − xᵀ‖_∞`.
pub fn residual(p: &DMatrix<f64>, x: &[f64]) -> f64 {
    let row = DVector::from_column_slice(x).transpose();
    (&row * p - &row).amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_symmetric() {
        let p = DMatrix::from_row_slice(2, 2, &[0.3, 0.7, 0.7, 0.3]);
        let x = stationary_law(&p).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-14 && (x[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn periodic_cycle() {
        let p = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let x = stationary_law(&p).unwrap();
        assert!(x.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-14));
    }

    #[test]
    fn lazy_fallback_agrees_with_direct() {
        let p = DMatrix::from_row_slice(3, 3, &[0.1, 0.6, 0.3, 0.5, 0.0, 0.5, 0.2, 0.2, 0.6]);
        let direct = stationary_law(&p).unwrap();
        let lazy = lazy_iteration(&p).unwrap();
        for (a, b) in direct.iter().zip(&lazy) {
            assert!((a - b).abs() < 1e-12);
        }
        // balance check written out for the first state
        let first = direct[0] * 0.1 + direct[1] * 0.5 + direct[2] * 0.2;
        assert!((first - direct[0]).abs() < 1e-14);
    }
}
