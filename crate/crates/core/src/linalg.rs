//! Dense symmetric positive-definite solves for the small normal-equation
//! systems over a support set.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition estimates above this value are logged.
pub const CONDITION_WARNING: f64 = 1e12;

/// Solves `A x = b` for symmetric positive-definite `A` by Cholesky
/// factorization followed by `refinements` steps of iterative refinement.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, refinements: usize) -> Result<DVector<f64>> {
    let p = a.nrows();
    let chol = a.clone().cholesky().ok_or_else(|| Error::Singular {
        size: p,
        detail: "matrix is not positive definite".into(),
    })?;

    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    if lo <= 0.0 || !lo.is_finite() {
        return Err(Error::Singular {
            size: p,
            detail: "zero pivot".into(),
        });
    }
    // (max/min pivot)² is a cheap lower bound on the 2-norm condition number.
    let cond = (hi / lo).powi(2);
    if cond > CONDITION_WARNING {
        warn!("normal equations over {p} support points are ill-conditioned (estimate {cond:.2e})");
    }

    let mut x = chol.solve(b);
    for _ in 0..refinements {
        let r = b - a * &x;
        x += chol.solve(&r);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular {
            size: p,
            detail: "non-finite solution".into(),
        });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = solve_spd(&a, &b, 1).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-15);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(solve_spd(&a, &b, 0), Err(Error::Singular { .. })));
    }
}
