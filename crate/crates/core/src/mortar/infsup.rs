use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Coupling, HarmonicSet};
use crate::error::{Error, Result};
use crate::linsolve::{gen_eig_hermitian, CsrMatrix, Factorization};

/// `m_lk = int_{theta0}^{theta1} exp(-i k theta) exp(i l theta) d theta`.
pub fn harmonic_mass(set: &HarmonicSet, theta0: f64, theta1: f64) -> DMatrix<Complex64> {
    let o = set.orders();
    DMatrix::from_fn(o.len(), o.len(), |a, b| {
        let d = (o[a] - o[b]) as f64;
        if d == 0.0 {
            Complex64::new(theta1 - theta0, 0.0)
        } else {
            let i = Complex64::i();
            ((i * d * theta1).exp() - (i * d * theta0).exp()) / (i * d)
        }
    })
}

/// Discrete inf-sup constant and the full singular value spectrum.
#[derive(Clone, Debug)]
pub struct InfSup {
    pub beta: f64,
    /// `sigma`, ascending.
    pub sigmas: Vec<f64>,
}

/// Smallest `sigma` of `sum_s G_s^H K_s^{-1} G_s x = sigma^2 M x` over the given blocks.
///
/// Every block contributes one SPD solve per harmonic column; `K^{-1}` is never formed.
pub fn infsup_constant(blocks: &[(&CsrMatrix<f64>, &Coupling)], m: &DMatrix<Complex64>) -> Result<InfSup> {
    let n = m.nrows();
    let mut a = DMatrix::<Complex64>::zeros(n, n);
    for (k, g) in blocks {
        if g.harmonics().len() != n || g.n_dof() != k.nrows() {
            return Err(Error::DimensionMismatch {
                what: "inf-sup block",
                expected: n,
                found: g.harmonics().len(),
            });
        }
        let f = Factorization::spd(k)?;
        let cols: Vec<Vec<Complex64>> = (0..n).map(|c| g.column(c)).collect();
        for (c, col) in cols.iter().enumerate() {
            let re: Vec<f64> = col.iter().map(|z| z.re).collect();
            let im: Vec<f64> = col.iter().map(|z| z.im).collect();
            let (xr, _) = f.solve(&re)?;
            let (xi, _) = f.solve(&im)?;
            for (r, row) in cols.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &d in g.dofs() {
                    acc += row[d].conj() * Complex64::new(xr[d], xi[d]);
                }
                a[(r, c)] += acc;
            }
        }
    }
    let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let ev = gen_eig_hermitian(&a, m)?;
    let sigmas: Vec<f64> = ev.iter().map(|&v| v.max(0.0).sqrt()).collect();
    Ok(InfSup {
        beta: sigmas[0],
        sigmas,
    })
}
