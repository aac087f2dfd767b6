//! Sparse storage and direct solvers.
//!
//! Symmetric systems are factored with a fill-reducing LDL^T. Saddle-point systems keep the
//! multiplier block last, are equilibrated first, and fall back to dense LU if a zero pivot
//! appears. All solves are followed by iterative refinement and a backward-error check.

mod dense;
mod ldl;
mod sparse;

pub use dense::{gen_eig_hermitian, lu_solve};
pub use ldl::{amd_order, saddle_order, LdlFactor, PivotRule, PIVOT_TOL};
pub use sparse::{CsrMatrix, Scalar};

use crate::error::{Error, Result};

/// Normwise backward error accepted after refinement.
pub const RESIDUAL_TOL: f64 = 1e-10;
const MAX_REFINE: usize = 3;
const RUIZ_SWEEPS: usize = 8;
/// Largest system handed to the dense fallback.
pub const DENSE_LIMIT: usize = 6000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    SparseLdl,
    DenseLu,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveStats {
    pub method: Method,
    pub backward_error: f64,
    pub refinements: usize,
}

#[derive(Debug)]
enum Kernel {
    Ldl(LdlFactor),
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// A reusable factorization of a real symmetric matrix.
#[derive(Debug)]
pub struct Factorization {
    a: CsrMatrix<f64>,
    scaling: Vec<f64>,
    kernel: Kernel,
    a_norm: f64,
}

fn ruiz_scaling(a: &CsrMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut d = vec![1.0; n];
    for _ in 0..RUIZ_SWEEPS {
        let s = a.scale_symmetric(&d);
        let mut row_max = vec![0.0f64; n];
        for (r, m) in row_max.iter_mut().enumerate() {
            for (_, v) in s.row(r) {
                *m = m.max(v.abs());
            }
        }
        let mut done = true;
        for (di, m) in d.iter_mut().zip(&row_max) {
            if *m > 0.0 {
                if (m - 1.0).abs() > 1e-3 {
                    done = false;
                }
                *di /= m.sqrt();
            }
        }
        if done {
            break;
        }
    }
    d
}

fn inf_norm(a: &CsrMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|r| a.row(r).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

impl Factorization {
    /// Factor a symmetric positive definite matrix.
    pub fn spd(a: &CsrMatrix<f64>) -> Result<Self> {
        let perm = amd_order(a);
        let kernel = Kernel::Ldl(LdlFactor::factor(a, perm, PivotRule::Positive)?);
        Ok(Factorization {
            a: a.clone(),
            scaling: vec![1.0; a.nrows()],
            kernel,
            a_norm: inf_norm(a),
        })
    }

    /// Factor a symmetric indefinite matrix whose trailing `n - n_primal` unknowns are
    /// multipliers.
    pub fn saddle(a: &CsrMatrix<f64>, n_primal: usize) -> Result<Self> {
        let n = a.nrows();
        if n_primal > n {
            return Err(Error::DimensionMismatch {
                what: "primal block size",
                expected: n,
                found: n_primal,
            });
        }
        let scaling = ruiz_scaling(a);
        let scaled = a.scale_symmetric(&scaling);
        let perm = saddle_order(&scaled, n_primal);
        let kernel = match LdlFactor::factor(&scaled, perm, PivotRule::NonZero) {
            Ok(f) => Kernel::Ldl(f),
            Err(Error::Singular { pivot, .. }) if n <= DENSE_LIMIT => {
                log::debug!("zero pivot at {pivot}, using dense LU on {n} unknowns");
                let lu = scaled.to_dense().lu();
                if !lu.is_invertible() {
                    return Err(Error::Singular {
                        pivot,
                        hint: "the constraint block may be rank deficient; use fewer harmonics or a finer mesh",
                    });
                }
                Kernel::Dense(lu)
            }
            Err(e) => return Err(e),
        };
        Ok(Factorization {
            a: a.clone(),
            scaling,
            kernel,
            a_norm: inf_norm(a),
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn method(&self) -> Method {
        match self.kernel {
            Kernel::Ldl(_) => Method::SparseLdl,
            Kernel::Dense(_) => Method::DenseLu,
        }
    }

    fn apply_kernel(&self, rhs: &[f64]) -> Vec<f64> {
        let bs: Vec<f64> = rhs.iter().zip(&self.scaling).map(|(b, d)| b * d).collect();
        let ys = match &self.kernel {
            Kernel::Ldl(f) => f.solve(&bs),
            Kernel::Dense(lu) => lu
                .solve(&nalgebra::DVector::from_vec(bs))
                .map(|v| v.as_slice().to_vec())
                .unwrap_or_else(|| vec![f64::NAN; rhs.len()]),
        };
        ys.iter().zip(&self.scaling).map(|(y, d)| y * d).collect()
    }

    /// Solve with refinement; fails with [`Error::Inaccurate`] if the backward error stays large.
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "right-hand side",
                expected: self.dim(),
                found: b.len(),
            });
        }
        let mut x = self.apply_kernel(b);
        let b_norm = max_abs(b);
        let mut err = f64::INFINITY;
        let mut refinements = 0;
        for it in 0..=MAX_REFINE {
            let ax = self.a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let denom = self.a_norm * max_abs(&x) + b_norm;
            err = if denom > 0.0 { max_abs(&r) / denom } else { 0.0 };
            if !err.is_finite() || err < 1e-15 || it == MAX_REFINE {
                break;
            }
            let dx = self.apply_kernel(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
            refinements += 1;
        }
        if !(err < RESIDUAL_TOL) {
            return Err(Error::Inaccurate {
                residual: err,
                tolerance: RESIDUAL_TOL,
            });
        }
        Ok((
            x,
            SolveStats {
                method: self.method(),
                backward_error: err,
                refinements,
            },
        ))
    }
}

/// One-shot SPD solve.
pub fn solve_spd(a: &CsrMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    Ok(Factorization::spd(a)?.solve(b)?.0)
}

/// One-shot saddle-point solve.
pub fn solve_saddle(a: &CsrMatrix<f64>, b: &[f64], n_primal: usize) -> Result<(Vec<f64>, SolveStats)> {
    Factorization::saddle(a, n_primal)?.solve(b)
}
