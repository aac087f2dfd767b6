use super::domain::{BoundaryTag, MultiPatchDomain};
use super::space::DiscreteSpace;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::splines::{KnotVector, NurbsCurve, Side};

/// One patch edge lying on the air-gap circle.
#[derive(Clone, Debug)]
pub struct TraceSegment {
    pub patch: usize,
    pub side: Side,
    pub curve: NurbsCurve<2>,
    /// Solution knots along the edge parameter.
    pub knots: KnotVector,
    /// Trace index and sign of each edge function (edge order); `None` when constrained.
    pub dofs: Vec<Option<(usize, f64)>>,
    /// Angles at edge parameter 0 and 1.
    pub theta0: f64,
    pub theta1: f64,
}

/// Global functions restricted to the air-gap arc, parametrized by angle.
#[derive(Clone, Debug)]
pub struct TraceSpace {
    radius: f64,
    segments: Vec<TraceSegment>,
    dofs: Vec<usize>,
}

/// Trace quadrature node with its nonzero trace functions.
#[derive(Clone, Debug)]
pub struct TracePoint {
    pub segment: usize,
    pub t: f64,
    pub theta: f64,
    /// Gauss weight times `|d theta / d t|`.
    pub weight: f64,
    pub point: [f64; 2],
    /// `(trace index, signed value)`.
    pub basis: Vec<(usize, f64)>,
}

fn wrap_near(theta: f64, reference: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut t = theta;
    while t - reference > PI {
        t -= TAU;
    }
    while t - reference < -PI {
        t += TAU;
    }
    t
}

impl TraceSegment {
    /// Angle and its derivative with respect to the edge parameter.
    pub fn theta(&self, t: f64) -> (f64, f64) {
        let (x, dx) = self.curve.eval_with_derivative(t);
        let r2 = x[0] * x[0] + x[1] * x[1];
        let th = wrap_near(x[1].atan2(x[0]), self.theta0);
        (th, (x[0] * dx[1] - x[1] * dx[0]) / r2)
    }

    pub fn theta_range(&self) -> (f64, f64) {
        (self.theta0.min(self.theta1), self.theta0.max(self.theta1))
    }

    /// Edge parameter at angle `theta` (Newton safeguarded by bisection).
    pub fn param(&self, theta: f64) -> f64 {
        let increasing = self.theta1 > self.theta0;
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut t = ((theta - self.theta0) / (self.theta1 - self.theta0)).clamp(0.0, 1.0);
        for _ in 0..100 {
            let (th, d) = self.theta(t);
            let f = th - theta;
            if f.abs() < 1e-15 {
                break;
            }
            if (f < 0.0) == increasing {
                lo = t;
            } else {
                hi = t;
            }
            let mut next = t - f / d;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() < 1e-16 {
                t = next;
                break;
            }
            t = next;
        }
        t
    }

    /// Nonzero trace functions at edge parameter `t`.
    pub fn basis(&self, t: f64) -> Vec<(usize, f64)> {
        let b = self.knots.eval_clamped(t, 0);
        b.ders[0]
            .iter()
            .enumerate()
            .filter_map(|(k, &v)| self.dofs[b.first + k].map(|(i, s)| (i, s * v)))
            .collect()
    }

    /// Unconstrained edge functions at `t` as `(edge index, value)`.
    pub fn local_basis(&self, t: f64) -> Vec<(usize, f64)> {
        let b = self.knots.eval_clamped(t, 0);
        b.ders[0].iter().enumerate().map(|(k, &v)| (b.first + k, v)).collect()
    }
}

impl TraceSpace {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn segments(&self) -> &[TraceSegment] {
        &self.segments
    }

    /// Global indices of the trace functions, ordered by increasing angle.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn theta_range(&self) -> (f64, f64) {
        let lo = self.segments.first().map_or(0.0, |s| s.theta_range().0);
        let hi = self.segments.last().map_or(0.0, |s| s.theta_range().1);
        (lo, hi)
    }

    pub fn extent(&self) -> f64 {
        let (a, b) = self.theta_range();
        b - a
    }

    /// Segment containing `theta`, if any.
    pub fn locate(&self, theta: f64) -> Option<usize> {
        let tol = 1e-13 * (1.0 + theta.abs());
        self.segments.iter().position(|s| {
            let (a, b) = s.theta_range();
            theta >= a - tol && theta <= b + tol
        })
    }

    /// Trace value of a global coefficient vector at `theta`.
    pub fn eval(&self, u: &[f64], theta: f64) -> Option<f64> {
        let k = self.locate(theta)?;
        let seg = &self.segments[k];
        let t = seg.param(theta);
        Some(seg.basis(t).iter().map(|&(i, v)| v * u[self.dofs[i]]).sum())
    }

    /// Knot-line angles of all segments, sorted and deduplicated.
    pub fn breakpoint_angles(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .segments
            .iter()
            .flat_map(|s| s.knots.breakpoints().into_iter().map(move |t| s.theta(t).0))
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        out
    }

    /// Gauss points on every trace element with `nq` points each.
    pub fn quadrature(&self, nq: usize) -> Vec<TracePoint> {
        let g = GaussLegendre::new(nq);
        let mut out = Vec::new();
        for (k, seg) in self.segments.iter().enumerate() {
            for w in seg.knots.breakpoints().windows(2) {
                for (t, wt) in g.on_interval(w[0], w[1]) {
                    let (theta, d) = seg.theta(t);
                    out.push(TracePoint {
                        segment: k,
                        t,
                        theta,
                        weight: wt * d.abs(),
                        point: seg.curve.eval_with_derivative(t).0,
                        basis: seg.basis(t),
                    });
                }
            }
        }
        out
    }

    /// Mass matrix `int w_i w_j d theta` over the trace (dense, trace ordering).
    pub fn mass_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        let p = self.segments.iter().map(|s| s.knots.degree()).max().unwrap_or(1);
        for q in self.quadrature(p + 2) {
            for &(i, vi) in &q.basis {
                for &(j, vj) in &q.basis {
                    m[(i, j)] += q.weight * vi * vj;
                }
            }
        }
        m
    }
}

/// Collect the air-gap sides of `domain` into a trace space of `space`.
pub fn trace_on_airgap(space: &DiscreteSpace, domain: &MultiPatchDomain) -> Result<TraceSpace> {
    let sides = domain.sides_with(BoundaryTag::Airgap);
    if sides.is_empty() {
        return Err(Error::InvalidGeometry("no air-gap sides tagged".into()));
    }
    let mut radius: Option<f64> = None;
    let mut segments = Vec::with_capacity(sides.len());
    for (patch, side) in sides {
        let curve = domain.patch(patch).boundary_curve(side);
        for k in 0..=8 {
            let x = curve.eval_with_derivative(k as f64 / 8.0).0;
            let r = x[0].hypot(x[1]);
            match radius {
                None => radius = Some(r),
                Some(r0) if (r - r0).abs() > 1e-10 * r0 => {
                    return Err(Error::InvalidGeometry(format!(
                        "air-gap side {side:?} of patch {patch} leaves the circle r = {r0} (found {r})"
                    )))
                }
                _ => {}
            }
        }
        let p0 = curve.eval_with_derivative(0.0).0;
        let p1 = curve.eval_with_derivative(1.0).0;
        let theta0 = p0[1].atan2(p0[0]);
        let theta1 = wrap_near(p1[1].atan2(p1[0]), theta0);
        let ps = space.space(patch);
        let dofs_local = ps.side_dofs(side);
        segments.push((
            TraceSegment {
                patch,
                side,
                curve,
                knots: ps.side_knots(side).clone(),
                dofs: Vec::new(),
                theta0,
                theta1,
            },
            dofs_local,
        ));
    }
    segments.sort_by(|a, b| a.0.theta_range().0.total_cmp(&b.0.theta_range().0));
    let mut dofs: Vec<usize> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut out = Vec::with_capacity(segments.len());
    for (mut seg, local) in segments {
        let mut order: Vec<usize> = (0..local.len()).collect();
        if seg.theta1 < seg.theta0 {
            order.reverse();
        }
        let mut map = vec![None; local.len()];
        for k in order {
            if let Some((g, s)) = space.global(seg.patch, local[k]) {
                let i = *index.entry(g).or_insert_with(|| {
                    dofs.push(g);
                    dofs.len() - 1
                });
                map[k] = Some((i, s));
            }
        }
        seg.dofs = map;
        out.push(seg);
    }
    Ok(TraceSpace {
        radius: radius.unwrap_or(0.0),
        segments: out,
        dofs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multipatch::{glue_c0, uniform_spaces};
    use crate::splines::NurbsPatch;
    use std::f64::consts::FRAC_PI_2;

    fn quarter(n: usize, p: usize) -> (MultiPatchDomain, DiscreteSpace) {
        let mut d =
            MultiPatchDomain::new(vec![NurbsPatch::annular_sector(1.0, 2.0, 0.0, FRAC_PI_2).unwrap()]);
        d.set_tag(0, Side::East, BoundaryTag::Airgap).unwrap();
        d.tag_remaining(|_, _, _| Ok(BoundaryTag::Neumann)).unwrap();
        let s = glue_c0(&d, uniform_spaces(&d, p, n).unwrap()).unwrap();
        (d, s)
    }

    #[test]
    fn single_arc_dimension_and_partition() {
        let (d, s) = quarter(4, 2);
        let t = trace_on_airgap(&s, &d).unwrap();
        assert_eq!(t.len(), 6);
        assert!((t.radius() - 2.0).abs() < 1e-14);
        assert!((t.extent() - FRAC_PI_2).abs() < 1e-14);
        for k in 0..100 {
            let th = FRAC_PI_2 * (k as f64 + 0.5) / 100.0;
            let seg = &t.segments()[t.locate(th).unwrap()];
            let tp = seg.param(th);
            assert!((seg.theta(tp).0 - th).abs() < 1e-13);
            let sum: f64 = seg.basis(tp).iter().map(|b| b.1).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_evaluation_matches_the_surface() {
        let (d, s) = quarter(3, 3);
        let t = trace_on_airgap(&s, &d).unwrap();
        let u: Vec<f64> = (0..s.n_dof()).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
        let coeffs = s.patch_coefficients(0, &u);
        for k in 0..=50 {
            let th = FRAC_PI_2 * k as f64 / 50.0;
            let seg = &t.segments()[t.locate(th).unwrap()];
            let eta = seg.param(th);
            let b = s.space(0).basis(1.0, eta);
            let direct: f64 = b.local.iter().zip(&b.value).map(|(&l, v)| v * coeffs[l]).sum();
            assert!((t.eval(&u, th).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_measures_the_arc() {
        let (d, s) = quarter(5, 2);
        let t = trace_on_airgap(&s, &d).unwrap();
        let len: f64 = t.quadrature(4).iter().map(|q| q.weight).sum();
        assert!((len - FRAC_PI_2).abs() < 1e-12);
        let m = t.mass_matrix();
        assert!((m.sum() - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_radii_rejected() {
        let mut d = MultiPatchDomain::new(vec![NurbsPatch::annular_sector(1.0, 2.0, 0.0, FRAC_PI_2).unwrap()]);
        d.set_tag(0, Side::East, BoundaryTag::Airgap).unwrap();
        d.set_tag(0, Side::West, BoundaryTag::Airgap).unwrap();
        d.tag_remaining(|_, _, _| Ok(BoundaryTag::Neumann)).unwrap();
        let s = glue_c0(&d, uniform_spaces(&d, 2, 2).unwrap()).unwrap();
        assert!(trace_on_airgap(&s, &d).is_err());
    }
}
