//! Field evaluation, error norms and machine quantities.

mod emf;

pub use emf::{emf_spectrum, flux_linkage, thd, Spectrum};

use num_complex::Complex64;

use crate::assembly::{integrate, QuadratureRule};
use crate::error::{Error, Result};
use crate::linsolve::CsrMatrix;
use crate::mortar::HarmonicSet;
use crate::multipatch::{DiscreteSpace, MultiPatchDomain, TraceSpace};
use crate::quadrature::GaussLegendre;

/// Coefficients of a discrete field together with the space they live in.
#[derive(Clone, Debug)]
pub struct SolutionField<'a> {
    domain: &'a MultiPatchDomain,
    space: &'a DiscreteSpace,
    local: Vec<Vec<f64>>,
}

impl<'a> SolutionField<'a> {
    pub fn new(domain: &'a MultiPatchDomain, space: &'a DiscreteSpace, u: &[f64]) -> Result<Self> {
        if u.len() != space.n_dof() {
            return Err(Error::DimensionMismatch {
                what: "field coefficients",
                expected: space.n_dof(),
                found: u.len(),
            });
        }
        let local = (0..domain.n_patches())
            .map(|k| space.patch_coefficients(k, u))
            .collect();
        Ok(SolutionField { domain, space, local })
    }

    pub fn domain(&self) -> &MultiPatchDomain {
        self.domain
    }

    pub fn space(&self) -> &DiscreteSpace {
        self.space
    }

    /// Patch-local coefficients.
    pub fn patch_coefficients(&self, patch: usize) -> &[f64] {
        &self.local[patch]
    }

    /// Value and physical gradient at a parametric point of `patch`.
    pub fn eval_param(&self, patch: usize, xi: f64, eta: f64) -> (f64, [f64; 2]) {
        let b = self.space.space(patch).basis(xi, eta);
        let c = &self.local[patch];
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for ((&l, &bv), bg) in b.local.iter().zip(&b.value).zip(&b.grad) {
            v += c[l] * bv;
            g[0] += c[l] * bg[0];
            g[1] += c[l] * bg[1];
        }
        let map = self.domain.patch(patch).sample(xi, eta);
        (v, map.physical_gradient(g))
    }

    /// Patch and parameters of a physical point.
    pub fn locate(&self, point: [f64; 2]) -> Result<(usize, f64, f64)> {
        for (k, p) in self.domain.patches().iter().enumerate() {
            let (lo, hi) = p.bounding_box();
            let scale = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
            let slack = 1e-9 * scale;
            if point[0] < lo[0] - slack || point[0] > hi[0] + slack || point[1] < lo[1] - slack || point[1] > hi[1] + slack {
                continue;
            }
            let mut guess = (0.5, 0.5);
            let mut best = f64::INFINITY;
            for i in 0..=4 {
                for j in 0..=4 {
                    let (u, v) = (i as f64 / 4.0, j as f64 / 4.0);
                    let x = p.sample(u, v).point;
                    let d = (x[0] - point[0]).hypot(x[1] - point[1]);
                    if d < best {
                        best = d;
                        guess = (u, v);
                    }
                }
            }
            if let Ok((xi, eta)) = p.inverse_map(point, guess, 1e-12 * scale) {
                return Ok((k, xi, eta));
            }
        }
        Err(Error::OutsideDomain {
            x: point[0],
            y: point[1],
        })
    }

    pub fn value(&self, point: [f64; 2]) -> Result<f64> {
        let (k, xi, eta) = self.locate(point)?;
        Ok(self.eval_param(k, xi, eta).0)
    }

    /// `B = (dA/dy, -dA/dx)`.
    pub fn flux_density(&self, point: [f64; 2]) -> Result<[f64; 2]> {
        let (k, xi, eta) = self.locate(point)?;
        let g = self.eval_param(k, xi, eta).1;
        Ok([g[1], -g[0]])
    }

    /// Values at many points; failures are reported per point.
    pub fn eval_field(&self, points: &[[f64; 2]]) -> Vec<Result<f64>> {
        points.iter().map(|&p| self.value(p)).collect()
    }

    pub fn eval_b(&self, points: &[[f64; 2]]) -> Vec<Result<[f64; 2]>> {
        points.iter().map(|&p| self.flux_density(p)).collect()
    }

    /// Field value at a quadrature point of the assembly loop.
    fn at(&self, q: &crate::assembly::QuadPoint) -> f64 {
        let c = &self.local[q.patch];
        q.basis.local.iter().zip(&q.basis.value).map(|(&l, &v)| c[l] * v).sum()
    }

    /// `int u` over the listed patches.
    pub fn integral(&self, patches: &[usize], rule: QuadratureRule) -> Result<f64> {
        integrate(self.domain, self.space, patches, rule, |q| self.at(q) * q.jxw)
    }
}

/// `sqrt(int (u - u*)^2)` with two Gauss points more than assembly.
pub fn error_l2<F>(field: &SolutionField, exact: F) -> Result<f64>
where
    F: Fn([f64; 2]) -> f64 + Sync,
{
    let all: Vec<usize> = (0..field.domain.n_patches()).collect();
    let e2 = integrate(field.domain, field.space, &all, QuadratureRule::Extra(2), |q| {
        let d = field.at(q) - exact(q.point);
        d * d * q.jxw
    })?;
    Ok(e2.sqrt())
}

/// `sqrt(int u*^2)`, for relative errors.
pub fn norm_l2<F>(field: &SolutionField, f: F) -> Result<f64>
where
    F: Fn([f64; 2]) -> f64 + Sync,
{
    let all: Vec<usize> = (0..field.domain.n_patches()).collect();
    Ok(integrate(field.domain, field.space, &all, QuadratureRule::Extra(2), |q| {
        let v = f(q.point);
        v * v * q.jxw
    })?
    .sqrt())
}

/// `u^T K u`.
pub fn energy(k: &CsrMatrix<f64>, u: &[f64]) -> f64 {
    k.mul_vec(u).iter().zip(u).map(|(a, b)| a * b).sum()
}

/// `sqrt(int (u_rt - u_st)^2 d theta)` over the common arc, integrated on the union of both
/// knot partitions.
pub fn error_jump(rt: &TraceSpace, u_rt: &[f64], st: &TraceSpace, u_st: &[f64]) -> Result<f64> {
    let (a0, a1) = rt.theta_range();
    let (b0, b1) = st.theta_range();
    if (a0 - b0).abs() > 1e-10 || (a1 - b1).abs() > 1e-10 {
        return Err(Error::InvalidGeometry(format!(
            "trace ranges differ: [{a0}, {a1}] vs [{b0}, {b1}]"
        )));
    }
    let mut breaks: Vec<f64> = rt.breakpoint_angles().into_iter().chain(st.breakpoint_angles()).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let p = rt
        .segments()
        .iter()
        .chain(st.segments())
        .map(|s| s.knots.degree())
        .max()
        .unwrap_or(1);
    let g = GaussLegendre::new(p + 3);
    let mut acc = 0.0;
    for w in breaks.windows(2) {
        for (theta, wt) in g.on_interval(w[0], w[1]) {
            let missing = || Error::InvalidGeometry(format!("angle {theta} outside a trace"));
            let d = rt.eval(u_rt, theta).ok_or_else(missing)? - st.eval(u_st, theta).ok_or_else(missing)?;
            acc += wt * d * d;
        }
    }
    Ok(acc.sqrt())
}

/// `sqrt(int (g - sum_l lambda_l exp(-i l theta))^2 d theta)` for exact flux data `g(theta)`.
pub fn error_multiplier<F>(harmonics: &HarmonicSet, lambda: &[Complex64], theta0: f64, theta1: f64, exact: F) -> f64
where
    F: Fn(f64) -> f64,
{
    let n = 64 * (1 + harmonics.orders().iter().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0));
    let g = GaussLegendre::new(8);
    let h = (theta1 - theta0) / n as f64;
    let mut acc = 0.0;
    for k in 0..n {
        let a = theta0 + k as f64 * h;
        for (theta, w) in g.on_interval(a, a + h) {
            let d = exact(theta) - harmonics.synthesize(lambda, theta).re;
            acc += w * d * d;
        }
    }
    acc.sqrt()
}

/// Least-squares slope of `log(e)` against `log(h)`.
pub fn fitted_slope(h: &[f64], e: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(e)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multipatch::{glue_c0, trace_on_airgap, uniform_spaces, BoundaryTag};
    use crate::splines::NurbsPatch;

    fn sector() -> MultiPatchDomain {
        let mut d = MultiPatchDomain::new(vec![NurbsPatch::annular_sector(1.0, 2.0, 0.2, 1.2).unwrap()]);
        d.tag_remaining(|_, _, c| {
            let x = c.eval(0.5).unwrap();
            Ok(if (x[0].hypot(x[1]) - 2.0).abs() < 1e-12 {
                BoundaryTag::Airgap
            } else {
                BoundaryTag::Dirichlet
            })
        })
        .unwrap();
        d
    }

    /// L2 projection of `f`.
    fn project(d: &MultiPatchDomain, s: &DiscreteSpace, f: impl Fn([f64; 2]) -> f64 + Sync) -> Vec<f64> {
        let m = crate::assembly::assemble_mass(d, s, QuadratureRule::Extra(2)).unwrap();
        let b = crate::assembly::assemble_load(d, s, QuadratureRule::Extra(2), |_, x| f(x)).unwrap();
        crate::linsolve::solve_spd(&m, &b).unwrap()
    }

    #[test]
    fn constant_field_has_no_flux_density() {
        let d = sector();
        let s = glue_c0(&d, uniform_spaces(&d, 2, 3).unwrap()).unwrap();
        let u = vec![2.5; s.n_dof()];
        let f = SolutionField::new(&d, &s, &u).unwrap();
        for p in [[1.2, 0.5], [0.6, 1.5], [1.0, 1.0]] {
            assert!((f.value(p).unwrap() - 2.5).abs() < 1e-12);
            let b = f.flux_density(p).unwrap();
            assert!(b[0].abs() < 1e-10 && b[1].abs() < 1e-10);
        }
        assert!(matches!(f.value([5.0, 5.0]), Err(Error::OutsideDomain { .. })));
        assert!(error_l2(&f, |_| 2.5).unwrap() < 1e-12);
    }

    #[test]
    fn integrals_are_area_weighted() {
        let d = sector();
        let area = 0.5 * (4.0 - 1.0) * 1.0;
        for n in [1, 4] {
            let s = glue_c0(&d, uniform_spaces(&d, 2, n).unwrap()).unwrap();
            let f = SolutionField::new(&d, &s, &vec![2.0; s.n_dof()]).unwrap();
            assert!((f.integral(&[0], QuadratureRule::Fixed(12)).unwrap() - 2.0 * area).abs() < 1e-12);
            // the norms use a fixed extra-two rule, inexact for the rational Jacobian of one element
            assert!((norm_l2(&f, |_| 1.0).unwrap() - area.sqrt()).abs() < 1e-8);
            assert!((error_l2(&f, |_| 1.0).unwrap() - area.sqrt()).abs() < 1e-8);
        }
    }

    #[test]
    fn b_matches_finite_differences() {
        let d = sector();
        let s = glue_c0(&d, uniform_spaces(&d, 3, 4).unwrap()).unwrap();
        let u = project(&d, &s, |x| (x[0] * x[1]).sin() + x[0] * x[0]);
        let f = SolutionField::new(&d, &s, &u).unwrap();
        let h = 1e-6;
        for p in [[1.1, 0.7], [0.8, 1.2], [1.3, 1.1]] {
            let b = f.flux_density(p).unwrap();
            let dy = (f.value([p[0], p[1] + h]).unwrap() - f.value([p[0], p[1] - h]).unwrap()) / (2.0 * h);
            let dx = (f.value([p[0] + h, p[1]]).unwrap() - f.value([p[0] - h, p[1]]).unwrap()) / (2.0 * h);
            assert!((b[0] - dy).abs() < 1e-6 && (b[1] + dx).abs() < 1e-6);
        }
    }

    #[test]
    fn jump_of_two_constants() {
        let d = sector();
        let s = glue_c0(&d, uniform_spaces(&d, 2, 3).unwrap()).unwrap();
        let t = trace_on_airgap(&s, &d).unwrap();
        let a = vec![1.0; s.n_dof()];
        let b = vec![3.5; s.n_dof()];
        let j = error_jump(&t, &a, &t, &b).unwrap();
        assert!((j - 2.5 * 1.0f64.sqrt()).abs() < 1e-12);
        assert!(error_jump(&t, &a, &t, &a).unwrap() < 1e-14);
    }

    #[test]
    fn multiplier_projection_remainder() {
        use crate::mortar::{select_harmonics, Symmetry};
        use std::f64::consts::TAU;
        let h = select_harmonics(Symmetry::Periodic, TAU, 2).unwrap();
        // exact = cos(theta) + 0.5 sin(3 theta); the projection keeps the first term
        let mut lambda = vec![Complex64::new(0.0, 0.0); h.len()];
        lambda[h.index_of(1).unwrap()] = Complex64::new(0.5, 0.0);
        lambda[h.index_of(-1).unwrap()] = Complex64::new(0.5, 0.0);
        let e = error_multiplier(&h, &lambda, 0.0, TAU, |t| t.cos() + 0.5 * (3.0 * t).sin());
        assert!((e - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let zero = vec![Complex64::new(0.0, 0.0); h.len()];
        assert_eq!(error_multiplier(&h, &zero, 0.0, TAU, |_| 0.0), 0.0);
    }

    #[test]
    fn slopes() {
        let h = [0.5, 0.25, 0.125];
        let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powi(3)).collect();
        assert!((fitted_slope(&h, &e).unwrap() - 3.0).abs() < 1e-12);
        assert!(fitted_slope(&h[..1], &e[..1]).is_none());
    }
}
