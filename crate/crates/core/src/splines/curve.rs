use super::knots::KnotVector;
use super::rational::{rationalize, Weights};
use crate::error::{Error, Result};

/// Rational B-spline curve in `D` dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct NurbsCurve<const D: usize = 2> {
    knots: KnotVector,
    control_points: Vec<[f64; D]>,
    weights: Weights,
}

impl<const D: usize> NurbsCurve<D> {
    pub fn new(knots: KnotVector, control_points: Vec<[f64; D]>, weights: Weights) -> Result<Self> {
        let n = knots.dim();
        if control_points.len() != n {
            return Err(Error::DimensionMismatch {
                what: "curve control points",
                expected: n,
                found: control_points.len(),
            });
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                what: "curve weights",
                expected: n,
                found: weights.len(),
            });
        }
        Ok(NurbsCurve {
            knots,
            control_points,
            weights,
        })
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn control_points(&self) -> &[[f64; D]] {
        &self.control_points
    }

    pub fn weights(&self) -> &[f64] {
        self.weights.as_slice()
    }

    pub fn eval(&self, t: f64) -> Result<[f64; D]> {
        self.knots.find_span(t)?;
        Ok(self.eval_with_derivative(t).0)
    }

    /// Point and first derivative; `t` is clamped to `[0, 1]`.
    pub fn eval_with_derivative(&self, t: f64) -> ([f64; D], [f64; D]) {
        let b = self.knots.eval_clamped(t, 1);
        let n = rationalize(&b, self.weights.as_slice());
        let mut x = [0.0; D];
        let mut dx = [0.0; D];
        for (j, (v, d)) in n.ders[0].iter().zip(&n.ders[1]).enumerate() {
            let p = &self.control_points[n.first + j];
            for c in 0..D {
                x[c] += v * p[c];
                dx[c] += d * p[c];
            }
        }
        (x, dx)
    }

    /// Same curve traversed from `t = 1` to `t = 0`.
    pub fn reversed(&self) -> Self {
        let mut cp = self.control_points.clone();
        cp.reverse();
        let mut w = self.weights.as_slice().to_vec();
        w.reverse();
        NurbsCurve {
            knots: self.knots.reversed(),
            control_points: cp,
            weights: Weights::new(w).expect("weights stay positive"),
        }
    }

    /// Knot insertion; the curve is unchanged as a point set and as a parametrization.
    pub fn insert_knots(&self, new_knots: &[f64]) -> Result<Self> {
        let mut kv = self.knots.clone();
        let mut hom: Vec<Vec<f64>> = self
            .control_points
            .iter()
            .zip(self.weights.as_slice())
            .map(|(p, &w)| p.iter().map(|c| c * w).chain([w]).collect())
            .collect();
        for &u in new_knots {
            let (k, h) = insert_knot_homogeneous(&kv, &hom, u)?;
            kv = k;
            hom = h;
        }
        let (cp, w) = dehomogenize::<D>(&hom);
        NurbsCurve::new(kv, cp, Weights::new(w)?)
    }
}

pub(crate) fn dehomogenize<const D: usize>(hom: &[Vec<f64>]) -> (Vec<[f64; D]>, Vec<f64>) {
    hom.iter()
        .map(|h| {
            let w = h[D];
            let mut p = [0.0; D];
            for c in 0..D {
                p[c] = h[c] / w;
            }
            (p, w)
        })
        .unzip()
}

/// Single knot insertion (Boehm) on homogeneous control points.
pub(crate) fn insert_knot_homogeneous(
    kv: &KnotVector,
    points: &[Vec<f64>],
    u: f64,
) -> Result<(KnotVector, Vec<Vec<f64>>)> {
    let new_kv = kv.with_inserted(&[u])?;
    let p = kv.degree();
    let k = kv.span_unchecked(u);
    let s = kv.multiplicity(u);
    let knots = kv.knots();
    let n = points.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        if i + p <= k {
            out.push(points[i].clone());
        } else if i + s <= k {
            let alpha = (u - knots[i]) / (knots[i + p] - knots[i]);
            out.push(
                points[i]
                    .iter()
                    .zip(&points[i - 1])
                    .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                    .collect(),
            );
        } else {
            out.push(points[i - 1].clone());
        }
    }
    Ok((new_kv, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wavy() -> NurbsCurve<2> {
        let kv = KnotVector::new(2, vec![0., 0., 0., 0.5, 1., 1., 1.]).unwrap();
        NurbsCurve::new(
            kv,
            vec![[0.0, 0.0], [1.0, 2.0], [2.0, -1.0], [3.0, 0.5]],
            Weights::new(vec![1.0, 0.7, 1.6, 1.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn insertion_preserves_the_map() {
        let c = wavy();
        let r = c.insert_knots(&[0.25, 0.5, 0.8]).unwrap();
        assert_eq!(r.knots().dim(), c.knots().dim() + 3);
        for s in 0..=1000 {
            let t = s as f64 / 1000.0;
            let a = c.eval(t).unwrap();
            let b = r.eval(t).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn reversal_flips_parameter() {
        let c = wavy();
        let r = c.reversed();
        for s in 0..=20 {
            let t = s as f64 / 20.0;
            let a = c.eval(t).unwrap();
            let b = r.eval(1.0 - t).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let c = wavy();
        let h = 1e-6;
        for s in 1..30 {
            let t = s as f64 / 30.0 + 0.001;
            let (_, d) = c.eval_with_derivative(t);
            let (p, _) = c.eval_with_derivative(t + h);
            let (m, _) = c.eval_with_derivative(t - h);
            for k in 0..2 {
                let fd = (p[k] - m[k]) / (2.0 * h);
                assert!((fd - d[k]).abs() <= 1e-6 * d[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let kv = KnotVector::open_uniform(1, 1).unwrap();
        assert!(NurbsCurve::new(kv, vec![[0.0, 0.0]], Weights::ones(2)).is_err());
    }
}
