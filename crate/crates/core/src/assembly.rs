//! Galerkin assembly of the magnetostatic operator and its sources.
//!
//! Integration runs over the union of solution and geometry knot lines in each patch, so every
//! cell sees a smooth integrand. Patches are processed in parallel and merged in patch order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linsolve::{CsrMatrix, Factorization};
use crate::multipatch::{DiscreteSpace, MultiPatchDomain, TensorBasis};
use crate::quadrature::GaussLegendre;

/// Material data attached to one patch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    /// Reluctivity in m/H.
    pub nu: f64,
    /// Axial current density in A/m^2.
    pub current: f64,
    /// Magnet source field strength in A/m.
    pub h_pm: [f64; 2],
}

impl Material {
    pub fn linear(nu: f64) -> Self {
        Material {
            nu,
            current: 0.0,
            h_pm: [0.0, 0.0],
        }
    }
}

/// Per-patch material assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialMap {
    patches: Vec<Material>,
}

impl MaterialMap {
    pub fn new(patches: Vec<Material>) -> Result<Self> {
        if let Some(k) = patches.iter().position(|m| !(m.nu > 0.0 && m.nu.is_finite())) {
            return Err(Error::InvalidGeometry(format!(
                "patch {k} has non-positive reluctivity {}",
                patches[k].nu
            )));
        }
        Ok(MaterialMap { patches })
    }

    pub fn uniform(n_patches: usize, nu: f64) -> Result<Self> {
        MaterialMap::new(vec![Material::linear(nu); n_patches])
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn get(&self, patch: usize) -> &Material {
        &self.patches[patch]
    }

    pub fn get_mut(&mut self, patch: usize) -> &mut Material {
        &mut self.patches[patch]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Material> {
        self.patches.iter()
    }

    /// Copy with every reluctivity multiplied by `c`.
    pub fn scaled_nu(&self, c: f64) -> Result<Self> {
        MaterialMap::new(
            self.patches
                .iter()
                .map(|m| Material { nu: m.nu * c, ..*m })
                .collect(),
        )
    }
}

/// Gauss rule selection per patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum QuadratureRule {
    /// `p + 1 + extra` points per direction, `p` the patch's highest solution degree.
    #[default]
    Default,
    Extra(usize),
    Fixed(usize),
}

impl QuadratureRule {
    pub fn points(self, degree: usize) -> usize {
        match self {
            QuadratureRule::Default => degree + 1,
            QuadratureRule::Extra(e) => degree + 1 + e,
            QuadratureRule::Fixed(n) => n.max(1),
        }
    }
}

/// Quadrature point with the supported functions mapped to physical space.
#[derive(Clone, Debug)]
pub struct QuadPoint {
    pub patch: usize,
    pub element: (usize, usize),
    pub reference: (f64, f64),
    pub point: [f64; 2],
    /// Gauss weight times the Jacobian determinant.
    pub jxw: f64,
    /// Local indices, values and physical gradients.
    pub basis: TensorBasis,
}

fn merged_breaks(a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = a.into_iter().chain(b).collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    v
}

/// Visit every quadrature point of one patch.
pub fn for_each_point<F>(
    domain: &MultiPatchDomain,
    space: &DiscreteSpace,
    patch: usize,
    rule: QuadratureRule,
    mut f: F,
) -> Result<()>
where
    F: FnMut(&QuadPoint),
{
    let geo = domain.patch(patch);
    let ps = space.space(patch);
    let p = ps.knots_u().degree().max(ps.knots_v().degree());
    let g = GaussLegendre::new(rule.points(p));
    let bu = merged_breaks(ps.knots_u().breakpoints(), geo.knots_u().breakpoints());
    let bv = merged_breaks(ps.knots_v().breakpoints(), geo.knots_v().breakpoints());
    for (ev, v) in bv.windows(2).enumerate() {
        let qv: Vec<(f64, f64)> = g.on_interval(v[0], v[1]).collect();
        for (eu, u) in bu.windows(2).enumerate() {
            for (xi, wu) in g.on_interval(u[0], u[1]) {
                for &(eta, wv) in &qv {
                    let map = geo.sample(xi, eta);
                    if !(map.det > 0.0) {
                        return Err(Error::SingularJacobian {
                            patch,
                            element: (eu, ev),
                            det: map.det,
                        });
                    }
                    let mut basis = ps.basis(xi, eta);
                    for gr in basis.grad.iter_mut() {
                        *gr = map.physical_gradient(*gr);
                    }
                    f(&QuadPoint {
                        patch,
                        element: (eu, ev),
                        reference: (xi, eta),
                        point: map.point,
                        jxw: wu * wv * map.det,
                        basis,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Sum of `f` over all quadrature points of the listed patches.
pub fn integrate<F>(
    domain: &MultiPatchDomain,
    space: &DiscreteSpace,
    patches: &[usize],
    rule: QuadratureRule,
    f: F,
) -> Result<f64>
where
    F: Fn(&QuadPoint) -> f64 + Sync,
{
    let parts: Vec<Result<f64>> = patches
        .par_iter()
        .map(|&k| {
            let mut acc = 0.0;
            for_each_point(domain, space, k, rule, |q| acc += f(q))?;
            Ok(acc)
        })
        .collect();
    parts.into_iter().try_fold(0.0, |a, r| Ok(a + r?))
}

fn check_sizes(domain: &MultiPatchDomain, space: &DiscreteSpace, materials: Option<&MaterialMap>) -> Result<()> {
    if space.spaces().len() != domain.n_patches() {
        return Err(Error::DimensionMismatch {
            what: "patch spaces",
            expected: domain.n_patches(),
            found: space.spaces().len(),
        });
    }
    if let Some(m) = materials {
        if m.len() != domain.n_patches() {
            return Err(Error::DimensionMismatch {
                what: "material map",
                expected: domain.n_patches(),
                found: m.len(),
            });
        }
    }
    Ok(())
}

/// `k_ij = int nu grad w_i . grad w_j`.
pub fn assemble_stiffness(
    domain: &MultiPatchDomain,
    space: &DiscreteSpace,
    materials: &MaterialMap,
    rule: QuadratureRule,
) -> Result<CsrMatrix<f64>> {
    check_sizes(domain, space, Some(materials))?;
    assemble_matrix(domain, space, rule, |q, elem| {
        let nu = materials.get(q.patch).nu;
        let g = &q.basis.grad;
        let n = g.len();
        for (i, gi) in g.iter().enumerate() {
            for (j, gj) in g.iter().enumerate() {
                elem[i * n + j] += nu * (gi[0] * gj[0] + gi[1] * gj[1]) * q.jxw;
            }
        }
    })
}

/// `m_ij = int w_i w_j`.
pub fn assemble_mass(domain: &MultiPatchDomain, space: &DiscreteSpace, rule: QuadratureRule) -> Result<CsrMatrix<f64>> {
    check_sizes(domain, space, None)?;
    assemble_matrix(domain, space, rule, |q, elem| {
        let v = &q.basis.value;
        let n = v.len();
        for (i, vi) in v.iter().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                elem[i * n + j] += vi * vj * q.jxw;
            }
        }
    })
}

fn assemble_matrix<F>(domain: &MultiPatchDomain, space: &DiscreteSpace, rule: QuadratureRule, kernel: F) -> Result<CsrMatrix<f64>>
where
    F: Fn(&QuadPoint, &mut [f64]) + Sync,
{
    let parts: Vec<Result<Vec<(usize, usize, f64)>>> = (0..domain.n_patches())
        .into_par_iter()
        .map(|k| {
            let map = space.patch_map(k);
            let mut trip = Vec::new();
            // cells never straddle a solution knot, so the supported set is fixed per cell
            let mut local: Vec<usize> = Vec::new();
            let mut elem: Vec<f64> = Vec::new();
            let flush = |local: &[usize], elem: &mut Vec<f64>, trip: &mut Vec<(usize, usize, f64)>| {
                let n = local.len();
                for (a, &la) in local.iter().enumerate() {
                    for (b, &lb) in local.iter().enumerate() {
                        if let (Some((ga, sa)), Some((gb, sb))) = (map[la], map[lb]) {
                            trip.push((ga, gb, sa * sb * elem[a * n + b]));
                        }
                    }
                }
                elem.clear();
            };
            let mut current = None;
            for_each_point(domain, space, k, rule, |q| {
                let b = &q.basis;
                if current != Some(q.element) || local != b.local {
                    if !local.is_empty() {
                        flush(&local, &mut elem, &mut trip);
                    }
                    current = Some(q.element);
                    local.clone_from(&b.local);
                    elem.resize(local.len() * local.len(), 0.0);
                }
                kernel(q, &mut elem);
            })?;
            if !local.is_empty() {
                flush(&local, &mut elem, &mut trip);
            }
            Ok(trip)
        })
        .collect();
    let mut all = Vec::new();
    for p in parts {
        all.extend(p?);
    }
    CsrMatrix::from_triplets(space.n_dof(), space.n_dof(), &all)
}

/// `j_i = int f w_i` for a pointwise source `f(patch, x)`.
pub fn assemble_load<F>(
    domain: &MultiPatchDomain,
    space: &DiscreteSpace,
    rule: QuadratureRule,
    f: F,
) -> Result<Vec<f64>>
where
    F: Fn(usize, [f64; 2]) -> f64 + Sync,
{
    check_sizes(domain, space, None)?;
    assemble_vector(domain, space, rule, |q, out| {
        let s = f(q.patch, q.point);
        if s != 0.0 {
            for (&l, &v) in q.basis.local.iter().zip(&q.basis.value) {
                out.push((l, s * v * q.jxw));
            }
        }
    })
}

fn assemble_vector<F>(domain: &MultiPatchDomain, space: &DiscreteSpace, rule: QuadratureRule, f: F) -> Result<Vec<f64>>
where
    F: Fn(&QuadPoint, &mut Vec<(usize, f64)>) + Sync,
{
    let parts: Vec<Result<Vec<f64>>> = (0..domain.n_patches())
        .into_par_iter()
        .map(|k| {
            let mut local = vec![0.0; space.space(k).len()];
            let mut buf = Vec::new();
            for_each_point(domain, space, k, rule, |q| {
                buf.clear();
                f(q, &mut buf);
                for &(l, v) in &buf {
                    local[l] += v;
                }
            })?;
            Ok(local)
        })
        .collect();
    let mut out = vec![0.0; space.n_dof()];
    for (k, part) in parts.into_iter().enumerate() {
        for (m, v) in space.patch_map(k).iter().zip(part?) {
            if let Some((g, s)) = m {
                out[*g] += s * v;
            }
        }
    }
    Ok(out)
}

/// `j_i = int J w_i` with the per-patch current densities.
pub fn assemble_current(
    domain: &MultiPatchDomain,
    space: &DiscreteSpace,
    materials: &MaterialMap,
    rule: QuadratureRule,
) -> Result<Vec<f64>> {
    check_sizes(domain, space, Some(materials))?;
    assemble_load(domain, space, rule, |k, _| materials.get(k).current)
}

/// `j_i = int (H_x dw_i/dy - H_y dw_i/dx)`.
pub fn assemble_pm(
    domain: &MultiPatchDomain,
    space: &DiscreteSpace,
    materials: &MaterialMap,
    rule: QuadratureRule,
) -> Result<Vec<f64>> {
    check_sizes(domain, space, Some(materials))?;
    assemble_vector(domain, space, rule, |q, out| {
        let h = materials.get(q.patch).h_pm;
        if h != [0.0, 0.0] {
            for (&l, g) in q.basis.local.iter().zip(&q.basis.grad) {
                out.push((l, (h[0] * g[1] - h[1] * g[0]) * q.jxw));
            }
        }
    })
}

/// Stiffness matrix and right-hand side on one constrained space.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub k: CsrMatrix<f64>,
    pub j: Vec<f64>,
}

impl LinearSystem {
    /// Assemble `K` and `j_src + j_pm`.
    pub fn assemble(
        domain: &MultiPatchDomain,
        space: &DiscreteSpace,
        materials: &MaterialMap,
        rule: QuadratureRule,
    ) -> Result<Self> {
        let k = assemble_stiffness(domain, space, materials, rule)?;
        let mut j = assemble_current(domain, space, materials, rule)?;
        for (a, b) in j.iter_mut().zip(assemble_pm(domain, space, materials, rule)?) {
            *a += b;
        }
        Ok(LinearSystem { k, j })
    }

    pub fn dim(&self) -> usize {
        self.j.len()
    }

    /// Solve `K u = j`; fails when `K` is singular or the residual check does not pass.
    pub fn solve_reduced(&self) -> Result<Vec<f64>> {
        let f = Factorization::spd(&self.k)?;
        let (u, _) = f.solve(&self.j)?;
        Ok(u)
    }

    /// `||K u - j|| / ||j||` in the Euclidean norm.
    pub fn relative_residual(&self, u: &[f64]) -> f64 {
        let ku = self.k.mul_vec(u);
        let r: f64 = ku.iter().zip(&self.j).map(|(a, b)| (a - b) * (a - b)).sum();
        let n: f64 = self.j.iter().map(|b| b * b).sum();
        if n > 0.0 {
            (r / n).sqrt()
        } else {
            r.sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multipatch::{glue_c0, uniform_spaces, BoundaryTag};
    use crate::splines::{NurbsPatch, Side};

    fn unit_square() -> MultiPatchDomain {
        MultiPatchDomain::new(vec![NurbsPatch::bilinear([
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 1.0],
        ])])
    }

    fn free_space(domain: &MultiPatchDomain, p: usize, n: usize) -> DiscreteSpace {
        glue_c0(domain, uniform_spaces(domain, p, n).unwrap()).unwrap()
    }

    #[test]
    fn bilinear_element_matrix() {
        let d = unit_square();
        let s = free_space(&d, 1, 1);
        let k = assemble_stiffness(&d, &s, &MaterialMap::uniform(1, 1.0).unwrap(), QuadratureRule::Default)
            .unwrap();
        let k = k.to_dense();
        // local order (0,0), (1,0), (0,1), (1,1)
        for i in 0..4 {
            assert!((k[(i, i)] - 2.0 / 3.0).abs() < 1e-14);
        }
        assert!((k[(0, 1)] + 1.0 / 6.0).abs() < 1e-14);
        assert!((k[(0, 2)] + 1.0 / 6.0).abs() < 1e-14);
        assert!((k[(0, 3)] + 1.0 / 3.0).abs() < 1e-14);
        assert!((k[(1, 2)] + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn mass_sums_to_area() {
        let d = MultiPatchDomain::new(vec![NurbsPatch::annular_sector(1.0, 2.0, 0.0, 1.0).unwrap()]);
        let s = free_space(&d, 2, 2);
        let m = assemble_mass(&d, &s, QuadratureRule::Extra(2)).unwrap();
        let ones = vec![1.0; s.n_dof()];
        let total: f64 = m.mul_vec(&ones).iter().sum();
        assert!((total - 1.5).abs() < 1e-10);
    }

    #[test]
    fn row_sums_vanish_and_nu_scales() {
        let d = MultiPatchDomain::new(vec![NurbsPatch::annular_sector(1.0, 2.0, 0.1, 1.3).unwrap()]);
        let s = free_space(&d, 2, 3);
        let m = MaterialMap::uniform(1, 1.0).unwrap();
        let k = assemble_stiffness(&d, &s, &m, QuadratureRule::Default).unwrap();
        let ones = vec![1.0; s.n_dof()];
        let scale = k.max_abs();
        assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12 * scale));
        assert!(k.hermitian_defect() < 1e-12 * scale);
        let k3 = assemble_stiffness(&d, &s, &m.scaled_nu(4.0).unwrap(), QuadratureRule::Default).unwrap();
        for ((_, _, a), (_, _, b)) in k.triplets().iter().zip(k3.triplets()) {
            assert_eq!(4.0 * a, b);
        }
    }

    #[test]
    fn current_integrates_sector_area() {
        let (t0, t1) = (0.2, 1.9);
        let d = MultiPatchDomain::new(vec![NurbsPatch::annular_sector(1.0, 2.5, t0, t1).unwrap()]);
        let s = free_space(&d, 2, 4);
        let mut m = MaterialMap::uniform(1, 1.0).unwrap();
        m.get_mut(0).current = 3.0;
        let j = assemble_current(&d, &s, &m, QuadratureRule::Extra(2)).unwrap();
        let area = 0.5 * (t1 - t0) * (2.5f64.powi(2) - 1.0);
        assert!((j.iter().sum::<f64>() - 3.0 * area).abs() < 1e-10);
    }

    #[test]
    fn constant_magnetization_telescopes() {
        let d = MultiPatchDomain::new(vec![NurbsPatch::annular_sector(1.0, 2.0, 0.0, 0.8).unwrap()]);
        let s = free_space(&d, 2, 2);
        let mut m = MaterialMap::uniform(1, 1.0).unwrap();
        m.get_mut(0).h_pm = [0.7, -1.1];
        let j = assemble_pm(&d, &s, &m, QuadratureRule::Default).unwrap();
        assert!(j.iter().sum::<f64>().abs() < 1e-13);
        assert!(j.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn floating_domain_is_singular() {
        let d = unit_square();
        let s = free_space(&d, 1, 2);
        let sys = LinearSystem::assemble(&d, &s, &MaterialMap::uniform(1, 1.0).unwrap(), QuadratureRule::Default)
            .unwrap();
        assert!(sys.solve_reduced().is_err());
    }

    #[test]
    fn inverted_patch_reported() {
        let d = MultiPatchDomain::new(vec![NurbsPatch::bilinear([
            [0.0, 0.0],
            [0.0, 1.0],
            [1.0, 0.0],
            [1.0, 1.0],
        ])]);
        let s = free_space(&d, 1, 1);
        let e = assemble_stiffness(&d, &s, &MaterialMap::uniform(1, 1.0).unwrap(), QuadratureRule::Default);
        assert!(matches!(e, Err(Error::SingularJacobian { patch: 0, .. })));
    }

    #[test]
    fn dirichlet_square_solves() {
        let mut d = unit_square();
        for side in Side::ALL {
            d.set_tag(0, side, BoundaryTag::Dirichlet).unwrap();
        }
        let s = free_space(&d, 2, 4).apply_dirichlet(&d);
        let sys = LinearSystem::assemble(&d, &s, &MaterialMap::uniform(1, 1.0).unwrap(), QuadratureRule::Default)
            .unwrap();
        let sys = LinearSystem {
            j: assemble_load(&d, &s, QuadratureRule::Default, |_, _| 1.0).unwrap(),
            ..sys
        };
        let u = sys.solve_reduced().unwrap();
        assert!(sys.relative_residual(&u) < 1e-10);
        // centre value of the unit-square torsion problem is about 0.0737
        let mid = s.patch_coefficients(0, &u);
        assert!(mid.iter().cloned().fold(0.0, f64::max) > 0.05);
    }
}
