//! Small dense solves shared by the combiner and statistics code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::{CMatrix, CVector};

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn spd_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// Solves `a x = b` for Hermitian positive definite `a`.
pub fn hpd_solve(a: CMatrix, b: &CVector) -> Result<CVector> {
    let chol = a.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// (X + X^H) / 2.
pub fn hermitian_part(x: &CMatrix) -> CMatrix {
    (x + x.adjoint()) * crate::C64::from(0.5)
}

/// Ratio of extreme singular values, `inf` for a singular matrix.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// x^T K^{-1} x given x and a Cholesky-factored K, without forming K^{-1} x twice.
pub fn inverse_quadratic_form(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>, x: &DVector<f64>) -> f64 {
    let y = chol.l_dirty().solve_lower_triangular(x).expect("Cholesky factor has a positive diagonal");
    y.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    #[test]
    fn solves_spd_system() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(alloc::vec![1.0, 2.0]);
        let x = spd_solve(a.clone(), &b).unwrap();
        assert!((a * x - b).norm() < 1e-14);
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(spd_solve(a, &DVector::zeros(2)), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn quadratic_form_matches_solve() {
        let a = DMatrix::from_row_slice(3, 3, &[5.0, 1.0, 0.5, 1.0, 4.0, 0.2, 0.5, 0.2, 3.0]);
        let x = DVector::from_vec(alloc::vec![1.0, -2.0, 0.5]);
        let direct = x.dot(&spd_solve(a.clone(), &x).unwrap());
        let chol = a.cholesky().unwrap();
        assert!((inverse_quadratic_form(&chol, &x) - direct).abs() < 1e-14);
    }

    #[test]
    fn hermitian_part_is_hermitian() {
        let x = CMatrix::from_fn(3, 3, |i, j| C64::new(i as f64, j as f64 * 2.0));
        let h = hermitian_part(&x);
        assert_eq!(h, h.adjoint());
    }

    #[test]
    fn identity_is_well_conditioned() {
        assert!((condition_number(&DMatrix::identity(4, 4)) - 1.0).abs() < 1e-12);
    }
}
