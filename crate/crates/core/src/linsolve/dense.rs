use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues of the Hermitian pencil `A x = lambda M x`, ascending.
///
/// `M` must be Hermitian positive definite.
pub fn gen_eig_hermitian(a: &DMatrix<Complex64>, m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "generalized eigenproblem",
            expected: n,
            found: m.nrows(),
        });
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Eigen("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let scale = l.diagonal().iter().fold(0.0f64, |m, d| m.max(d.norm()));
    if l.diagonal().iter().any(|d| !(d.re > 0.0) || d.im.abs() > 1e-12 * scale) {
        return Err(Error::Eigen("mass matrix is not positive definite".into()));
    }
    // C = L^{-1} A L^{-H}
    let y = l.solve_lower_triangular(a).ok_or_else(|| Error::Eigen("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&y.adjoint())
        .ok_or_else(|| Error::Eigen("triangular solve failed".into()))?
        .adjoint();
    let c = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = c.symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(vals)
}

/// Dense LU solve used for small or pivot-breaking systems.
pub fn lu_solve(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let lu = a.clone().lu();
    let x = lu
        .solve(&DVector::from_column_slice(b))
        .ok_or(Error::Singular {
            pivot: 0,
            hint: "matrix is singular to working precision",
        })?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular {
            pivot: 0,
            hint: "matrix is singular to working precision",
        });
    }
    Ok(x.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pencil_of_diagonals() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(6.0, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(4.0, 0.0),
        ]));
        let v = gen_eig_hermitian(&a, &m).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-14 && (v[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_offdiagonal() {
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        let a = DMatrix::from_row_slice(2, 2, &[2.0 * one, i, -i, 2.0 * one]);
        let m = DMatrix::identity(2, 2);
        let v = gen_eig_hermitian(&a, &m).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-13 && (v[1] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn indefinite_mass_rejected() {
        let a = DMatrix::<Complex64>::identity(2, 2);
        let mut m = DMatrix::<Complex64>::identity(2, 2);
        m[(1, 1)] = Complex64::new(-1.0, 0.0);
        assert!(gen_eig_hermitian(&a, &m).is_err());
    }
}
