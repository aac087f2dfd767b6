use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{rotation_matrix, Coupling, HarmonicSet, InterfaceSide};
use crate::error::{Error, Result};
use crate::linsolve::{CsrMatrix, Factorization};

/// Coupled system `[K_rt 0 G_rt; 0 K_st G_st R; G_rt^H R^H G_st^H 0]` in the ordering
/// `(u_rt, u_st, lambda)`.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub k_rt: CsrMatrix<f64>,
    pub k_st: CsrMatrix<f64>,
    pub g_rt: Coupling,
    pub g_st: Coupling,
    pub alpha: f64,
    pub j_rt: Vec<f64>,
    pub j_st: Vec<f64>,
}

fn check_pair(g_rt: &Coupling, g_st: &Coupling) -> Result<()> {
    if g_rt.side() != InterfaceSide::Rotor || g_st.side() != InterfaceSide::Stator {
        return Err(Error::InvalidHarmonics("coupling sides are swapped".into()));
    }
    if g_rt.harmonics() != g_st.harmonics() {
        return Err(Error::InvalidHarmonics("rotor and stator use different harmonic sets".into()));
    }
    Ok(())
}

fn dim_check(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { what, expected, found });
    }
    Ok(())
}

impl SaddleSystem {
    pub fn assemble(
        k_rt: CsrMatrix<f64>,
        k_st: CsrMatrix<f64>,
        g_rt: Coupling,
        g_st: Coupling,
        alpha: f64,
        j_rt: Vec<f64>,
        j_st: Vec<f64>,
    ) -> Result<Self> {
        check_pair(&g_rt, &g_st)?;
        let n_rt = k_rt.nrows();
        let n_st = k_st.nrows();
        dim_check("rotor stiffness columns", n_rt, k_rt.ncols())?;
        dim_check("stator stiffness columns", n_st, k_st.ncols())?;
        dim_check("rotor coupling rows", n_rt, g_rt.n_dof())?;
        dim_check("stator coupling rows", n_st, g_st.n_dof())?;
        dim_check("rotor right-hand side", n_rt, j_rt.len())?;
        dim_check("stator right-hand side", n_st, j_st.len())?;
        Ok(SaddleSystem {
            k_rt,
            k_st,
            g_rt,
            g_st,
            alpha,
            j_rt,
            j_st,
        })
    }

    pub fn harmonics(&self) -> &HarmonicSet {
        self.g_rt.harmonics()
    }

    pub fn n_rt(&self) -> usize {
        self.k_rt.nrows()
    }

    pub fn n_st(&self) -> usize {
        self.k_st.nrows()
    }

    /// Same blocks at another rotor angle.
    pub fn rotated(&self, alpha: f64) -> Self {
        SaddleSystem {
            alpha,
            ..self.clone()
        }
    }

    /// The complex hermitian matrix.
    pub fn to_complex(&self) -> Result<CsrMatrix<Complex64>> {
        let (n_rt, n_st, m) = (self.n_rt(), self.n_st(), self.harmonics().len());
        let n = n_rt + n_st + m;
        let r = rotation_matrix(self.harmonics(), self.alpha);
        let c = |x: f64| Complex64::new(x, 0.0);
        let mut t: Vec<(usize, usize, Complex64)> = Vec::new();
        t.extend(self.k_rt.triplets().into_iter().map(|(i, j, v)| (i, j, c(v))));
        t.extend(
            self.k_st
                .triplets()
                .into_iter()
                .map(|(i, j, v)| (n_rt + i, n_rt + j, c(v))),
        );
        for (off, g, rot) in [(0, &self.g_rt, false), (n_rt, &self.g_st, true)] {
            for (row, &d) in g.dofs().iter().enumerate() {
                for (k, rk) in r.iter().enumerate() {
                    let mut v = g.values()[(row, k)];
                    if rot {
                        v *= rk;
                    }
                    t.push((off + d, n_rt + n_st + k, v));
                    t.push((n_rt + n_st + k, off + d, v.conj()));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    /// `max |S - S^H| / max |S|`.
    pub fn hermitian_defect(&self) -> Result<f64> {
        let s = self.to_complex()?;
        Ok(s.hermitian_defect() / s.max_abs())
    }

    /// Weak continuity residual `|G_rt^H u_rt + R^H G_st^H u_st|`, relative to its two terms.
    pub fn continuity_residual(&self, u_rt: &[f64], u_st: &[f64]) -> f64 {
        let r = rotation_matrix(self.harmonics(), self.alpha);
        let a = self.g_rt.adjoint_apply(u_rt);
        let b: Vec<Complex64> = self
            .g_st
            .adjoint_apply(u_st)
            .into_iter()
            .zip(&r)
            .map(|(x, rk)| rk.conj() * x)
            .collect();
        let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let sum: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let scale = norm(&a) + norm(&b);
        if scale > 0.0 {
            norm(&sum) / scale
        } else {
            0.0
        }
    }

    /// Dense complex LU solve; a cross-check for small systems.
    pub fn solve_complex_dense(&self) -> Result<(Vec<f64>, Vec<f64>, Vec<Complex64>)> {
        let a = self.to_complex()?.to_dense();
        let (n_rt, n_st) = (self.n_rt(), self.n_st());
        let mut b = DVector::zeros(a.nrows());
        for (i, v) in self.j_rt.iter().chain(&self.j_st).enumerate() {
            b[i] = Complex64::new(*v, 0.0);
        }
        let x = a.lu().solve(&b).ok_or(Error::Singular {
            pivot: 0,
            hint: "the coupled system is singular; use fewer harmonics or a finer mesh",
        })?;
        Ok((
            x.rows(0, n_rt).iter().map(|z| z.re).collect(),
            x.rows(n_rt, n_st).iter().map(|z| z.re).collect(),
            x.rows(n_rt + n_st, x.len() - n_rt - n_st).iter().copied().collect(),
        ))
    }
}

/// Real trigonometric coupling columns at rotor angle `alpha`.
///
/// Order zero contributes one column, every positive order a cosine and a sine column, so that
/// `H(theta) = a_0 + sum_l (a_l cos(l theta) + b_l sin(l theta))`.
fn real_columns(g: &Coupling, alpha: f64) -> Vec<Vec<f64>> {
    let s = g.side().sign();
    let mut out = Vec::new();
    for (l, c, sn) in g.trig_moments() {
        if l == 0 {
            out.push(c.iter().map(|v| s * v).collect());
            continue;
        }
        let (sa, ca) = (l as f64 * alpha).sin_cos();
        out.push(c.iter().zip(&sn).map(|(x, y)| s * (ca * x + sa * y)).collect());
        out.push(c.iter().zip(&sn).map(|(x, y)| s * (ca * y - sa * x)).collect());
    }
    out
}

/// The realified coupled system; real symmetric and indefinite.
#[derive(Clone, Debug)]
pub struct RealSaddle {
    pub matrix: CsrMatrix<f64>,
    pub rhs: Vec<f64>,
    pub n_rt: usize,
    pub n_st: usize,
    harmonics: HarmonicSet,
}

impl RealSaddle {
    pub fn n_primal(&self) -> usize {
        self.n_rt + self.n_st
    }

    /// Complex multipliers: `lambda_0 = a_0`, `lambda_l = (a_l + i b_l) / 2` and
    /// `lambda_{-l} = (a_l - i b_l) / 2` for `l > 0`.
    pub fn multipliers_to_complex(&self, real: &[f64]) -> Vec<Complex64> {
        multipliers_to_complex(&self.harmonics, real)
    }

    pub fn multipliers_to_real(&self, lambda: &[Complex64]) -> Vec<f64> {
        multipliers_to_real(&self.harmonics, lambda)
    }
}

pub(crate) fn multipliers_to_complex(h: &HarmonicSet, real: &[f64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); h.len()];
    let mut k = 0;
    for l in h.magnitudes() {
        if l == 0 {
            out[h.index_of(0).expect("present")] = Complex64::new(real[k], 0.0);
            k += 1;
        } else {
            let (a, b) = (real[k], real[k + 1]);
            out[h.index_of(l).expect("present")] = Complex64::new(a / 2.0, b / 2.0);
            out[h.index_of(-l).expect("present")] = Complex64::new(a / 2.0, -b / 2.0);
            k += 2;
        }
    }
    out
}

pub(crate) fn multipliers_to_real(h: &HarmonicSet, lambda: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(h.real_len());
    for l in h.magnitudes() {
        let z = lambda[h.index_of(l).expect("present")];
        if l == 0 {
            out.push(z.re);
        } else {
            out.push(2.0 * z.re);
            out.push(2.0 * z.im);
        }
    }
    out
}

/// Replace every `(l, -l)` multiplier pair by cosine and sine unknowns.
pub fn realify(sys: &SaddleSystem) -> Result<RealSaddle> {
    let h = sys.harmonics();
    for &l in h.orders() {
        if h.index_of(-l).is_none() {
            return Err(Error::InvalidHarmonics(format!("order {l} has no partner {}", -l)));
        }
    }
    let (n_rt, n_st) = (sys.n_rt(), sys.n_st());
    let n_primal = n_rt + n_st;
    let m = h.real_len();
    let n = n_primal + m;
    let mut t: Vec<(usize, usize, f64)> = sys.k_rt.triplets();
    t.extend(
        sys.k_st
            .triplets()
            .into_iter()
            .map(|(i, j, v)| (n_rt + i, n_rt + j, v)),
    );
    for (off, g, alpha) in [(0, &sys.g_rt, 0.0), (n_rt, &sys.g_st, sys.alpha)] {
        for (k, col) in real_columns(g, alpha).into_iter().enumerate() {
            for &d in g.dofs() {
                let v = col[d];
                if v != 0.0 {
                    t.push((off + d, n_primal + k, v));
                    t.push((n_primal + k, off + d, v));
                }
            }
        }
    }
    let mut rhs = sys.j_rt.clone();
    rhs.extend_from_slice(&sys.j_st);
    rhs.resize(n, 0.0);
    Ok(RealSaddle {
        matrix: CsrMatrix::from_triplets(n, n, &t)?,
        rhs,
        n_rt,
        n_st,
        harmonics: h.clone(),
    })
}

/// Solution of a coupled solve.
#[derive(Clone, Debug)]
pub struct CoupledSolution {
    pub u_rt: Vec<f64>,
    pub u_st: Vec<f64>,
    /// Complex multipliers in the order of the harmonic set.
    pub lambda: Vec<Complex64>,
    /// Normwise backward error of the final solve.
    pub backward_error: f64,
    /// Relative weak-continuity residual.
    pub continuity: f64,
}

/// Direct solve of the realified system.
pub fn solve_coupled(sys: &SaddleSystem) -> Result<CoupledSolution> {
    let real = realify(sys)?;
    let f = Factorization::saddle(&real.matrix, real.n_primal())?;
    let (x, stats) = f.solve(&real.rhs)?;
    let (n_rt, n_p) = (real.n_rt, real.n_primal());
    let u_rt = x[..n_rt].to_vec();
    let u_st = x[n_rt..n_p].to_vec();
    let lambda = real.multipliers_to_complex(&x[n_p..]);
    let continuity = sys.continuity_residual(&u_rt, &u_st);
    Ok(CoupledSolution {
        u_rt,
        u_st,
        lambda,
        backward_error: stats.backward_error,
        continuity,
    })
}

/// Schur-complement solver for rotor-angle sweeps.
///
/// Both stiffness blocks are factored once. The stator columns at any angle are rotations of
/// fixed cosine and sine moments, so each angle only costs a small dense solve.
#[derive(Debug)]
pub struct SchurSolver {
    harmonics: HarmonicSet,
    g_rt: Coupling,
    g_st: Coupling,
    x_rt: Vec<f64>,
    x_st: Vec<f64>,
    /// `K_rt^{-1} B_rt`.
    y_rt: Vec<Vec<f64>>,
    /// `K_st^{-1} V` for the unsigned stator moments `V`.
    z_st: Vec<Vec<f64>>,
    s_rt: DMatrix<f64>,
    p_st: DMatrix<f64>,
    b_rt_x: DVector<f64>,
    v_st_x: DVector<f64>,
    backward_error: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SchurSolver {
    pub fn new(
        k_rt: &CsrMatrix<f64>,
        k_st: &CsrMatrix<f64>,
        g_rt: &Coupling,
        g_st: &Coupling,
        j_rt: &[f64],
        j_st: &[f64],
    ) -> Result<Self> {
        check_pair(g_rt, g_st)?;
        dim_check("rotor right-hand side", k_rt.nrows(), j_rt.len())?;
        dim_check("stator right-hand side", k_st.nrows(), j_st.len())?;
        let f_rt = Factorization::spd(k_rt)?;
        let f_st = Factorization::spd(k_st)?;
        let mut be: f64 = 0.0;
        let mut solve = |f: &Factorization, b: &[f64]| -> Result<Vec<f64>> {
            let (x, s) = f.solve(b)?;
            be = be.max(s.backward_error);
            Ok(x)
        };
        let x_rt = solve(&f_rt, j_rt)?;
        let x_st = solve(&f_st, j_st)?;
        let b_rt = real_columns(g_rt, 0.0);
        let v_st: Vec<Vec<f64>> = g_st
            .trig_moments()
            .into_iter()
            .flat_map(|(l, c, s)| if l == 0 { vec![c] } else { vec![c, s] })
            .collect();
        let y_rt = b_rt.iter().map(|b| solve(&f_rt, b)).collect::<Result<Vec<_>>>()?;
        let z_st = v_st.iter().map(|v| solve(&f_st, v)).collect::<Result<Vec<_>>>()?;
        let m = b_rt.len();
        let s_rt = DMatrix::from_fn(m, m, |i, j| 0.5 * (dot(&b_rt[i], &y_rt[j]) + dot(&b_rt[j], &y_rt[i])));
        let p_st = DMatrix::from_fn(m, m, |i, j| 0.5 * (dot(&v_st[i], &z_st[j]) + dot(&v_st[j], &z_st[i])));
        let b_rt_x = DVector::from_fn(m, |i, _| dot(&b_rt[i], &x_rt));
        let v_st_x = DVector::from_fn(m, |i, _| dot(&v_st[i], &x_st));
        Ok(SchurSolver {
            harmonics: g_rt.harmonics().clone(),
            g_rt: g_rt.clone(),
            g_st: g_st.clone(),
            x_rt,
            x_st,
            y_rt,
            z_st,
            s_rt,
            p_st,
            b_rt_x,
            v_st_x,
            backward_error: be,
        })
    }

    /// Map from real multipliers to coefficients of the unsigned stator moments.
    fn transfer(&self, alpha: f64) -> DMatrix<f64> {
        let m = self.harmonics.real_len();
        let mut t = DMatrix::zeros(m, m);
        let mut k = 0;
        for l in self.harmonics.magnitudes() {
            if l == 0 {
                t[(k, k)] = -1.0;
                k += 1;
            } else {
                let (sa, ca) = (l as f64 * alpha).sin_cos();
                t[(k, k)] = -ca;
                t[(k + 1, k)] = -sa;
                t[(k, k + 1)] = sa;
                t[(k + 1, k + 1)] = -ca;
                k += 2;
            }
        }
        t
    }

    pub fn solve(&self, alpha: f64) -> Result<CoupledSolution> {
        let t = self.transfer(alpha);
        let s = &self.s_rt + t.transpose() * &self.p_st * &t;
        let rhs = &self.b_rt_x + t.transpose() * &self.v_st_x;
        let lam = s
            .clone()
            .cholesky()
            .ok_or(Error::Singular {
                pivot: 0,
                hint: "the multiplier Schur complement is singular; use fewer harmonics or a finer mesh",
            })?
            .solve(&rhs);
        let mut u_rt = self.x_rt.clone();
        for (y, l) in self.y_rt.iter().zip(lam.iter()) {
            u_rt.iter_mut().zip(y).for_each(|(u, v)| *u -= l * v);
        }
        let coef = &t * &lam;
        let mut u_st = self.x_st.clone();
        for (z, c) in self.z_st.iter().zip(coef.iter()) {
            u_st.iter_mut().zip(z).for_each(|(u, v)| *u -= c * v);
        }
        let lambda = multipliers_to_complex(&self.harmonics, lam.as_slice());
        let probe = SaddleSystem {
            k_rt: CsrMatrix::identity(0),
            k_st: CsrMatrix::identity(0),
            g_rt: self.g_rt.clone(),
            g_st: self.g_st.clone(),
            alpha,
            j_rt: Vec::new(),
            j_st: Vec::new(),
        };
        let continuity = probe.continuity_residual(&u_rt, &u_st);
        Ok(CoupledSolution {
            u_rt,
            u_st,
            lambda,
            backward_error: self.backward_error,
            continuity,
        })
    }
}
