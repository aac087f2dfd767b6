use std::f64::consts::{FRAC_PI_2, TAU};

use super::curve::NurbsCurve;
use super::knots::KnotVector;
use super::rational::Weights;
use crate::error::{Error, Result};

/// Exact quadratic rational arc of `radius` around `center`, counter-clockwise from `theta0` to `theta1`.
///
/// Arcs wider than 90 degrees are split into equal segments joined by double knots.
pub fn make_circular_arc(
    radius: f64,
    theta0: f64,
    theta1: f64,
    center: [f64; 2],
) -> Result<NurbsCurve<2>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::OutOfDomain {
            what: "arc radius",
            value: radius,
            domain: "(0, inf)",
        });
    }
    let sweep = theta1 - theta0;
    if !(sweep > 0.0 && sweep <= TAU + 1e-12) {
        return Err(Error::OutOfDomain {
            what: "arc sweep",
            value: sweep,
            domain: "(0, 2 pi]",
        });
    }
    let segments = ((sweep / FRAC_PI_2) - 1e-9).ceil().max(1.0) as usize;
    let dtheta = sweep / segments as f64;
    let w_mid = (dtheta / 2.0).cos();
    let on_circle = |a: f64| [center[0] + radius * a.cos(), center[1] + radius * a.sin()];

    let mut points = vec![on_circle(theta0)];
    let mut weights = vec![1.0];
    let mut knots = vec![0.0; 3];
    for s in 0..segments {
        let a0 = theta0 + s as f64 * dtheta;
        let am = a0 + dtheta / 2.0;
        let rm = radius / w_mid;
        points.push([center[0] + rm * am.cos(), center[1] + rm * am.sin()]);
        weights.push(w_mid);
        points.push(on_circle(a0 + dtheta));
        weights.push(1.0);
        if s + 1 < segments {
            let k = (s + 1) as f64 / segments as f64;
            knots.extend([k, k]);
        }
    }
    knots.extend([1.0; 3]);
    NurbsCurve::new(KnotVector::new(2, knots)?, points, Weights::new(weights)?)
}

/// Straight segment as a degree-2 curve with uniform speed.
pub fn make_line(a: [f64; 2], b: [f64; 2]) -> NurbsCurve<2> {
    let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    NurbsCurve::new(
        KnotVector::open_uniform(2, 1).expect("valid"),
        vec![a, mid, b],
        Weights::ones(3),
    )
    .expect("consistent sizes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn radius_error(c: &NurbsCurve<2>, center: [f64; 2], r: f64) -> f64 {
        (0..=1000)
            .map(|s| {
                let p = c.eval(s as f64 / 1000.0).unwrap();
                ((p[0] - center[0]).hypot(p[1] - center[1]) - r).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn quarter_circle() {
        let c = make_circular_arc(1.0, 0.0, FRAC_PI_2, [0.0, 0.0]).unwrap();
        let cp = c.control_points();
        assert!((cp[1][0] - 1.0).abs() < 1e-15 && (cp[1][1] - 1.0).abs() < 1e-15);
        assert!((c.weights()[1] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(radius_error(&c, [0.0, 0.0], 1.0) < 1e-14);
        let m = c.eval(0.5).unwrap();
        assert!((m[0] - FRAC_1_SQRT_2).abs() < 1e-15 && (m[1] - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn wide_arcs_use_segments() {
        let c = make_circular_arc(2.5, 0.3, 0.3 + 1.5 * PI, [1.0, -2.0]).unwrap();
        assert_eq!(c.knots().n_elements(), 3);
        assert!(radius_error(&c, [1.0, -2.0], 2.5) < 1e-13);
        let end = c.eval(1.0).unwrap();
        let a = 0.3 + 1.5 * PI;
        assert!((end[0] - (1.0 + 2.5 * a.cos())).abs() < 1e-13);
    }

    #[test]
    fn refinement_keeps_circle() {
        let c = make_circular_arc(1.0, 0.0, FRAC_PI_2, [0.0, 0.0]).unwrap();
        let r = c.insert_knots(&[0.5]).unwrap();
        assert!(radius_error(&r, [0.0, 0.0], 1.0) < 1e-14);
    }

    #[test]
    fn degenerate_arcs_rejected() {
        assert!(make_circular_arc(1.0, 0.4, 0.4, [0.0, 0.0]).is_err());
        assert!(make_circular_arc(0.0, 0.0, 1.0, [0.0, 0.0]).is_err());
        assert!(make_circular_arc(-1.0, 0.0, 1.0, [0.0, 0.0]).is_err());
    }
}
