use serde::{Deserialize, Serialize};

use super::curve::{dehomogenize, insert_knot_homogeneous, NurbsCurve};
use super::knots::KnotVector;
use super::rational::Weights;
use crate::error::{Error, Result};

/// Side of the reference square. `West` is `u = 0`, `East` is `u = 1`,
/// `South` is `v = 0` and `North` is `v = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    /// Whether the side runs along `u` (south and north edges).
    pub fn runs_along_u(self) -> bool {
        matches!(self, Side::South | Side::North)
    }

    /// Reference coordinates of the edge point at edge parameter `t`.
    pub fn reference_point(self, t: f64) -> (f64, f64) {
        match self {
            Side::West => (0.0, t),
            Side::East => (1.0, t),
            Side::South => (t, 0.0),
            Side::North => (t, 1.0),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Geometry map and its first derivatives at one reference point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapSample {
    pub point: [f64; 2],
    /// `jacobian[r][c] = d x_r / d xi_c`.
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
}

impl MapSample {
    /// Inverse-transpose Jacobian applied to a reference gradient.
    pub fn physical_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let j = &self.jacobian;
        [
            (j[1][1] * g[0] - j[1][0] * g[1]) / self.det,
            (-j[0][1] * g[0] + j[0][0] * g[1]) / self.det,
        ]
    }
}

/// Tensor-product NURBS surface. Control points are stored with `u` running fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct NurbsPatch {
    knots_u: KnotVector,
    knots_v: KnotVector,
    control_net: Vec<[f64; 2]>,
    weights: Weights,
}

pub const INVERSE_MAX_ITER: usize = 50;
pub const INVERSE_TOL: f64 = 1e-12;

impl NurbsPatch {
    pub fn new(
        knots_u: KnotVector,
        knots_v: KnotVector,
        control_net: Vec<[f64; 2]>,
        weights: Weights,
    ) -> Result<Self> {
        let n = knots_u.dim() * knots_v.dim();
        if control_net.len() != n {
            return Err(Error::DimensionMismatch {
                what: "patch control net",
                expected: n,
                found: control_net.len(),
            });
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                what: "patch weights",
                expected: n,
                found: weights.len(),
            });
        }
        Ok(NurbsPatch {
            knots_u,
            knots_v,
            control_net,
            weights,
        })
    }

    /// Bilinear patch from corners ordered `(0,0), (1,0), (0,1), (1,1)`.
    pub fn bilinear(corners: [[f64; 2]; 4]) -> Self {
        let kv = KnotVector::open_uniform(1, 1).expect("valid");
        NurbsPatch::new(kv.clone(), kv, corners.to_vec(), Weights::ones(4)).expect("sizes")
    }

    /// Annular sector with `u` running radially outward and `v` counter-clockwise.
    pub fn annular_sector(r_in: f64, r_out: f64, theta0: f64, theta1: f64) -> Result<Self> {
        if !(r_in > 0.0 && r_out > r_in) {
            return Err(Error::InvalidGeometry(format!(
                "annular sector needs 0 < r_in < r_out (got {r_in}, {r_out})"
            )));
        }
        let arc = super::arc::make_circular_arc(1.0, theta0, theta1, [0.0, 0.0])?;
        let mut net = Vec::with_capacity(2 * arc.control_points().len());
        let mut w = Vec::with_capacity(net.capacity());
        for (p, &wj) in arc.control_points().iter().zip(arc.weights()) {
            for r in [r_in, r_out] {
                net.push([r * p[0], r * p[1]]);
                w.push(wj);
            }
        }
        NurbsPatch::new(
            KnotVector::open_uniform(1, 1)?,
            arc.knots().clone(),
            net,
            Weights::new(w)?,
        )
    }

    /// Biquadratic Coons patch spanned by four single-segment quadratic edges.
    ///
    /// `south`/`north` run along `u`, `west`/`east` along `v`; corners must coincide.
    /// The interior point is the bilinearly blended Coons point in homogeneous coordinates.
    pub fn from_edges(
        south: &NurbsCurve<2>,
        north: &NurbsCurve<2>,
        west: &NurbsCurve<2>,
        east: &NurbsCurve<2>,
    ) -> Result<Self> {
        let hom = |c: &NurbsCurve<2>| -> Result<Vec<[f64; 3]>> {
            if c.knots().degree() != 2 || c.knots().dim() != 3 {
                return Err(Error::InvalidGeometry(
                    "Coons edges must be single-segment quadratic curves".into(),
                ));
            }
            let w = c.weights();
            if (w[0] - 1.0).abs() > 1e-12 || (w[2] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidGeometry(
                    "Coons edges need unit end weights".into(),
                ));
            }
            Ok(c.control_points()
                .iter()
                .zip(c.weights())
                .map(|(p, &w)| [p[0] * w, p[1] * w, w])
                .collect())
        };
        let (s, n, w, e) = (hom(south)?, hom(north)?, hom(west)?, hom(east)?);
        let scale = s
            .iter()
            .chain(&n)
            .map(|h| (h[0] / h[2]).hypot(h[1] / h[2]))
            .fold(0.0, f64::max)
            .max(1e-300);
        let corner_pairs = [(s[0], w[0]), (s[2], e[0]), (n[0], w[2]), (n[2], e[2])];
        for (a, b) in corner_pairs {
            let d = (a[0] / a[2] - b[0] / b[2]).hypot(a[1] / a[2] - b[1] / b[2]);
            if d > 1e-10 * scale {
                return Err(Error::InvalidGeometry(format!(
                    "Coons edges do not meet at a corner (gap {d:.3e})"
                )));
            }
        }
        let mut h = [[0.0; 3]; 9];
        let at = |i: usize, j: usize| i + 3 * j;
        for i in 0..3 {
            h[at(i, 0)] = s[i];
            h[at(i, 2)] = n[i];
            h[at(0, i)] = w[i];
            h[at(2, i)] = e[i];
        }
        for c in 0..3 {
            let edges = h[at(0, 1)][c] + h[at(2, 1)][c] + h[at(1, 0)][c] + h[at(1, 2)][c];
            let corners = h[at(0, 0)][c] + h[at(2, 0)][c] + h[at(0, 2)][c] + h[at(2, 2)][c];
            h[at(1, 1)][c] = edges / 2.0 - corners / 4.0;
        }
        if h[at(1, 1)][2] <= 0.0 {
            return Err(Error::InvalidGeometry(
                "Coons blending produced a non-positive weight".into(),
            ));
        }
        let hv: Vec<Vec<f64>> = h.iter().map(|x| x.to_vec()).collect();
        let (net, wts) = dehomogenize::<2>(&hv);
        let kv = KnotVector::open_uniform(2, 1)?;
        NurbsPatch::new(kv.clone(), kv, net, Weights::new(wts)?)
    }

    pub fn knots_u(&self) -> &KnotVector {
        &self.knots_u
    }

    pub fn knots_v(&self) -> &KnotVector {
        &self.knots_v
    }

    pub fn control_net(&self) -> &[[f64; 2]] {
        &self.control_net
    }

    pub fn weights(&self) -> &[f64] {
        self.weights.as_slice()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.knots_u.dim(), self.knots_v.dim())
    }

    /// Map and Jacobian at `(xi, eta)`; errors outside the unit square.
    pub fn eval(&self, xi: f64, eta: f64) -> Result<MapSample> {
        self.knots_u.find_span(xi)?;
        self.knots_v.find_span(eta)?;
        Ok(self.sample(xi, eta))
    }

    /// Map and Jacobian with the reference point clamped into the unit square.
    pub fn sample(&self, xi: f64, eta: f64) -> MapSample {
        let bu = self.knots_u.eval_clamped(xi, 1);
        let bv = self.knots_v.eval_clamped(eta, 1);
        let nu = self.knots_u.dim();
        let w = self.weights.as_slice();
        // homogeneous sums: value, d/du, d/dv for (x w, y w, w)
        let mut s = [[0.0; 3]; 3];
        for (b, (&nv0, &nv1)) in bv.ders[0].iter().zip(&bv.ders[1]).enumerate() {
            let j = bv.first + b;
            for (a, (&nu0, &nu1)) in bu.ders[0].iter().zip(&bu.ders[1]).enumerate() {
                let k = bu.first + a + nu * j;
                let p = self.control_net[k];
                let h = [p[0] * w[k], p[1] * w[k], w[k]];
                let f = [nu0 * nv0, nu1 * nv0, nu0 * nv1];
                for (d, fd) in f.iter().enumerate() {
                    for c in 0..3 {
                        s[d][c] += fd * h[c];
                    }
                }
            }
        }
        let wt = s[0][2];
        let x = [s[0][0] / wt, s[0][1] / wt];
        let mut jac = [[0.0; 2]; 2];
        for d in 0..2 {
            for r in 0..2 {
                jac[r][d] = (s[d + 1][r] - s[d + 1][2] * x[r]) / wt;
            }
        }
        MapSample {
            point: x,
            jacobian: jac,
            det: jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0],
        }
    }

    /// The map restricted to one side, as a curve in the side's own parameter.
    pub fn boundary_curve(&self, side: Side) -> NurbsCurve<2> {
        let (nu, nv) = self.dims();
        let w = self.weights.as_slice();
        let idx: Vec<usize> = match side {
            Side::West => (0..nv).map(|j| nu * j).collect(),
            Side::East => (0..nv).map(|j| nu - 1 + nu * j).collect(),
            Side::South => (0..nu).collect(),
            Side::North => (0..nu).map(|i| i + nu * (nv - 1)).collect(),
        };
        let kv = if side.runs_along_u() {
            self.knots_u.clone()
        } else {
            self.knots_v.clone()
        };
        NurbsCurve::new(
            kv,
            idx.iter().map(|&k| self.control_net[k]).collect(),
            Weights::new(idx.iter().map(|&k| w[k]).collect()).expect("patch weights positive"),
        )
        .expect("consistent sizes")
    }

    /// Knot insertion in both directions; the map is unchanged.
    pub fn insert_knots(&self, in_u: &[f64], in_v: &[f64]) -> Result<Self> {
        let (mut nu, mut nv) = self.dims();
        let w = self.weights.as_slice();
        let mut hom: Vec<Vec<f64>> = self
            .control_net
            .iter()
            .zip(w)
            .map(|(p, &w)| vec![p[0] * w, p[1] * w, w])
            .collect();
        let mut ku = self.knots_u.clone();
        for &x in in_u {
            let mut out = Vec::new();
            let mut new_kv = ku.clone();
            for j in 0..nv {
                let (k, row) = insert_knot_homogeneous(&ku, &hom[nu * j..nu * (j + 1)], x)?;
                new_kv = k;
                out.push(row);
            }
            ku = new_kv;
            nu += 1;
            hom = out.into_iter().flatten().collect();
        }
        let mut kv = self.knots_v.clone();
        for &y in in_v {
            let mut cols = Vec::with_capacity(nu);
            let mut new_kv = kv.clone();
            for i in 0..nu {
                let col: Vec<Vec<f64>> = (0..nv).map(|j| hom[i + nu * j].clone()).collect();
                let (k, c) = insert_knot_homogeneous(&kv, &col, y)?;
                new_kv = k;
                cols.push(c);
            }
            kv = new_kv;
            nv += 1;
            hom = (0..nv)
                .flat_map(|j| cols.iter().map(move |c| c[j].clone()))
                .collect();
        }
        let (net, wts) = dehomogenize::<2>(&hom);
        NurbsPatch::new(ku, kv, net, Weights::new(wts)?)
    }

    /// Damped Newton inversion of the map, starting at `guess`.
    ///
    /// Steps are halved while the residual grows; the iterate stays inside the unit square.
    pub fn inverse_map(&self, point: [f64; 2], guess: (f64, f64), tol: f64) -> Result<(f64, f64)> {
        let clamp = |v: f64| v.clamp(0.0, 1.0);
        let mut x = (clamp(guess.0), clamp(guess.1));
        let residual = |s: &MapSample| [s.point[0] - point[0], s.point[1] - point[1]];
        let mut s = self.sample(x.0, x.1);
        let mut r = residual(&s);
        let mut rn = r[0].hypot(r[1]);
        for _ in 0..INVERSE_MAX_ITER {
            if rn < tol {
                return Ok(x);
            }
            if s.det.abs() < 1e-300 {
                break;
            }
            let j = &s.jacobian;
            let dx = -(j[1][1] * r[0] - j[0][1] * r[1]) / s.det;
            let dy = -(-j[1][0] * r[0] + j[0][0] * r[1]) / s.det;
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-6 {
                let trial = (clamp(x.0 + step * dx), clamp(x.1 + step * dy));
                let st = self.sample(trial.0, trial.1);
                let rt = residual(&st);
                let rtn = rt[0].hypot(rt[1]);
                if rtn < rn {
                    x = trial;
                    s = st;
                    r = rt;
                    rn = rtn;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if rn < tol {
            return Ok(x);
        }
        Err(Error::InverseMapFailed {
            iterations: INVERSE_MAX_ITER,
            residual: rn,
        })
    }

    /// Axis-aligned bounding box of the control net (contains the image).
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.control_net {
            for c in 0..2 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn unit_square() -> NurbsPatch {
        NurbsPatch::bilinear([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    }

    fn area(p: &NurbsPatch) -> f64 {
        let g = GaussLegendre::new(8);
        let mut a = 0.0;
        for u in p.knots_u().breakpoints().windows(2) {
            for v in p.knots_v().breakpoints().windows(2) {
                for (x, wx) in g.on_interval(u[0], u[1]) {
                    for (y, wy) in g.on_interval(v[0], v[1]) {
                        a += p.sample(x, y).det * wx * wy;
                    }
                }
            }
        }
        a
    }

    #[test]
    fn identity_patch() {
        let p = unit_square();
        let s = p.eval(0.3, 0.8).unwrap();
        assert!((s.point[0] - 0.3).abs() < 1e-15 && (s.point[1] - 0.8).abs() < 1e-15);
        let id = [[1.0, 0.0], [0.0, 1.0]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((s.jacobian[r][c] - id[r][c]).abs() < 1e-15);
            }
        }
        assert!((s.det - 1.0).abs() < 1e-15);
        assert!(p.eval(1.2, 0.5).is_err());
    }

    #[test]
    fn annulus_jacobian_matches_finite_differences() {
        let p = NurbsPatch::annular_sector(1.0, 2.0, 0.0, FRAC_PI_2).unwrap();
        let h = 1e-6;
        for i in 1..10 {
            for j in 1..10 {
                let (x, y) = (i as f64 / 10.0, j as f64 / 10.0);
                let s = p.sample(x, y);
                let du = [
                    (p.sample(x + h, y).point[0] - p.sample(x - h, y).point[0]) / (2.0 * h),
                    (p.sample(x + h, y).point[1] - p.sample(x - h, y).point[1]) / (2.0 * h),
                ];
                let dv = [
                    (p.sample(x, y + h).point[0] - p.sample(x, y - h).point[0]) / (2.0 * h),
                    (p.sample(x, y + h).point[1] - p.sample(x, y - h).point[1]) / (2.0 * h),
                ];
                for r in 0..2 {
                    assert!((s.jacobian[r][0] - du[r]).abs() < 1e-8);
                    assert!((s.jacobian[r][1] - dv[r]).abs() < 1e-8);
                }
                assert!(s.det > 0.0);
            }
        }
    }

    #[test]
    fn sector_area_and_radius() {
        let p = NurbsPatch::annular_sector(1.0, 2.0, 0.2, 0.2 + 2.0 * PI / 3.0).unwrap();
        assert!((area(&p) - 0.5 * 3.0 * 2.0 * PI / 3.0).abs() < 1e-12);
        for k in 0..=100 {
            let s = p.sample(1.0, k as f64 / 100.0);
            assert!((s.point[0].hypot(s.point[1]) - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn coons_reproduces_annular_sector() {
        use crate::splines::arc::{make_circular_arc, make_line};
        let (r0, r1, t0, t1): (f64, f64, f64, f64) = (1.0, 1.7, 0.1, 0.1 + FRAC_PI_4);
        let south = make_line([r0 * t0.cos(), r0 * t0.sin()], [r1 * t0.cos(), r1 * t0.sin()]);
        let north = make_line([r0 * t1.cos(), r0 * t1.sin()], [r1 * t1.cos(), r1 * t1.sin()]);
        let west = make_circular_arc(r0, t0, t1, [0.0, 0.0]).unwrap();
        let east = make_circular_arc(r1, t0, t1, [0.0, 0.0]).unwrap();
        let c = NurbsPatch::from_edges(&south, &north, &west, &east).unwrap();
        let exact = 0.5 * (r1 * r1 - r0 * r0) * (t1 - t0);
        assert!((area(&c) - exact).abs() < 1e-12);
        assert!(c.sample(0.5, 0.5).det > 0.0);
        for i in 0..=10 {
            for j in 0..=10 {
                let s = c.sample(i as f64 / 10.0, j as f64 / 10.0);
                let r = s.point[0].hypot(s.point[1]);
                assert!(r > r0 - 1e-14 && r < r1 + 1e-14);
            }
        }
        let mid = c.sample(0.5, 0.5).point;
        assert!((mid[0].hypot(mid[1]) - 0.5 * (r0 + r1)).abs() < 1e-14);
    }

    #[test]
    fn refinement_preserves_the_map() {
        let p = NurbsPatch::annular_sector(1.0, 2.0, 0.0, 1.2).unwrap();
        let r = p.insert_knots(&[0.25, 0.5], &[0.3, 0.5, 0.5, 0.9]).unwrap();
        assert_eq!(r.dims(), (p.dims().0 + 2, p.dims().1 + 4));
        let same = p.insert_knots(&[], &[]).unwrap();
        assert_eq!(same, p);
        let mut worst: f64 = 0.0;
        for i in 0..=40 {
            for j in 0..=25 {
                let (x, y) = (i as f64 / 40.0, j as f64 / 25.0);
                let a = p.sample(x, y).point;
                let b = r.sample(x, y).point;
                worst = worst.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        assert!(worst < 1e-12);
        assert!(p.insert_knots(&[0.5, 0.5], &[]).is_err());
    }

    #[test]
    fn inverse_map_round_trip() {
        let sq = unit_square();
        let (x, y) = sq.inverse_map([0.3, 0.7], (0.5, 0.5), INVERSE_TOL).unwrap();
        assert!((x - 0.3).abs() < 1e-12 && (y - 0.7).abs() < 1e-12);

        let p = NurbsPatch::annular_sector(1.0, 2.0, 0.0, FRAC_PI_2).unwrap();
        let target = [1.5 * FRAC_PI_4.cos(), 1.5 * FRAC_PI_4.sin()];
        let (x, y) = p.inverse_map(target, (0.5, 0.5), INVERSE_TOL).unwrap();
        let back = p.sample(x, y).point;
        assert!((back[0] - target[0]).hypot(back[1] - target[1]) < 1e-12);
        assert!((x - 0.5).abs() < 1e-12 && (y - 0.5).abs() < 1e-12);

        assert!(p.inverse_map([10.0, -4.0], (0.5, 0.5), INVERSE_TOL).is_err());
    }

    #[test]
    fn boundary_curves_follow_sides() {
        let p = NurbsPatch::annular_sector(1.0, 2.0, 0.0, FRAC_PI_2).unwrap();
        for side in Side::ALL {
            let c = p.boundary_curve(side);
            for k in 0..=10 {
                let t = k as f64 / 10.0;
                let (x, y) = side.reference_point(t);
                let a = c.eval(t).unwrap();
                let b = p.sample(x, y).point;
                assert!((a[0] - b[0]).hypot(a[1] - b[1]) < 1e-14);
            }
        }
    }
}
