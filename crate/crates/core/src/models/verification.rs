//! Quarter-ring benchmark with a closed-form solution.
//!
//! The ring `1 <= r <= 2`, `0 <= theta <= pi/2` is cut at `r = r_split`. The inner part uses two
//! angular patches and the outer part three, so the two interface partitions never match.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::multipatch::{glue_c0, uniform_spaces, BoundaryTag, DiscreteSpace, MultiPatchDomain};
use crate::splines::NurbsPatch;

pub const R_INNER: f64 = 1.0;
pub const R_OUTER: f64 = 2.0;
pub const DEFAULT_SPLIT: f64 = 1.5;

/// Both halves of the quarter ring.
#[derive(Clone, Debug)]
pub struct VerificationModel {
    pub r_split: f64,
    pub rt: MultiPatchDomain,
    pub st: MultiPatchDomain,
}

/// Constrained spaces of one refinement level.
#[derive(Clone, Debug)]
pub struct VerificationSpaces {
    pub degree: usize,
    pub level: u32,
    pub rt: DiscreteSpace,
    pub st: DiscreteSpace,
}

fn ring(r0: f64, r1: f64, cuts: &[f64], interface_at: f64) -> Result<MultiPatchDomain> {
    let patches = cuts
        .windows(2)
        .map(|w| NurbsPatch::annular_sector(r0, r1, w[0], w[1]))
        .collect::<Result<Vec<_>>>()?;
    let mut d = MultiPatchDomain::new(patches);
    d.detect_interfaces()?;
    d.tag_remaining(|_, _, c| {
        let m = c.eval(0.5)?;
        let r = m[0].hypot(m[1]);
        Ok(if (r - interface_at).abs() < 1e-12 * interface_at {
            BoundaryTag::Airgap
        } else {
            BoundaryTag::Dirichlet
        })
    })?;
    d.validate()?;
    Ok(d)
}

/// Split the ring at `r_split`.
pub fn build_quarter_ring(r_split: f64) -> Result<VerificationModel> {
    if !(r_split > R_INNER && r_split < R_OUTER) {
        return Err(Error::OutOfDomain {
            what: "split radius",
            value: r_split,
            domain: "(1, 2)",
        });
    }
    let deg = std::f64::consts::PI / 180.0;
    let rt = ring(R_INNER, r_split, &[0.0, 45.0 * deg, FRAC_PI_2], r_split)?;
    let st = ring(r_split, R_OUTER, &[0.0, 30.0 * deg, 60.0 * deg, FRAC_PI_2], r_split)?;
    Ok(VerificationModel { r_split, rt, st })
}

impl VerificationModel {
    /// Degree `p` with `2^level` elements per patch direction, Dirichlet applied.
    pub fn discretize(&self, degree: usize, level: u32) -> Result<VerificationSpaces> {
        let n = 1usize << level;
        let rt = glue_c0(&self.rt, uniform_spaces(&self.rt, degree, n)?)?.apply_dirichlet(&self.rt);
        let st = glue_c0(&self.st, uniform_spaces(&self.st, degree, n)?)?.apply_dirichlet(&self.st);
        Ok(VerificationSpaces {
            degree,
            level,
            rt,
            st,
        })
    }

    /// Both halves in one domain, glued strongly along the split circle.
    pub fn glued(&self) -> Result<MultiPatchDomain> {
        let patches = self.rt.patches().iter().chain(self.st.patches()).cloned().collect();
        let mut d = MultiPatchDomain::new(patches);
        d.detect_interfaces()?;
        d.tag_remaining(|_, _, _| Ok(BoundaryTag::Dirichlet))?;
        d.validate()?;
        Ok(d)
    }
}

/// One patch per side; the interface partitions match.
pub fn build_conforming_ring(r_split: f64) -> Result<VerificationModel> {
    if !(r_split > R_INNER && r_split < R_OUTER) {
        return Err(Error::OutOfDomain {
            what: "split radius",
            value: r_split,
            domain: "(1, 2)",
        });
    }
    let rt = ring(R_INNER, r_split, &[0.0, FRAC_PI_2], r_split)?;
    let st = ring(r_split, R_OUTER, &[0.0, FRAC_PI_2], r_split)?;
    Ok(VerificationModel { r_split, rt, st })
}

/// `f = 2x(22x^2y^2 + 21y^4 - 45y^2 + x^4 - 5x^2 + 4)`.
pub fn manufactured_rhs(x: f64, y: f64) -> f64 {
    let (x2, y2) = (x * x, y * y);
    2.0 * x * (22.0 * x2 * y2 + 21.0 * y2 * y2 - 45.0 * y2 + x2 * x2 - 5.0 * x2 + 4.0)
}

/// `u* = -x y^2 (r^2 - 1)(r^2 - 4)`.
pub fn manufactured_solution(x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    -x * y * y * (r2 - 1.0) * (r2 - 4.0)
}

/// Gradient of [`manufactured_solution`].
pub fn manufactured_gradient(x: f64, y: f64) -> [f64; 2] {
    let r2 = x * x + y * y;
    let q = r2 * r2 - 5.0 * r2 + 4.0;
    let dq = 4.0 * r2 - 10.0;
    [
        -y * y * (q + x * x * dq),
        -x * y * (2.0 * q + y * y * dq),
    ]
}

/// Largest deviation of the fourth-order finite-difference `-Laplacian(u*)` from `f` over an
/// `n x n` grid covering the ring's bounding box.
pub fn laplacian_gate(n: usize) -> f64 {
    let h = 1e-3;
    let d2 = |g: &dyn Fn(f64) -> f64| {
        (-g(2.0 * h) + 16.0 * g(h) - 30.0 * g(0.0) + 16.0 * g(-h) - g(-2.0 * h)) / (12.0 * h * h)
    };
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = R_OUTER * i as f64 / (n - 1) as f64;
            let y = R_OUTER * j as f64 / (n - 1) as f64;
            let lap = d2(&|s| manufactured_solution(x + s, y)) + d2(&|s| manufactured_solution(x, y + s));
            worst = worst.max((-lap - manufactured_rhs(x, y)).abs());
        }
    }
    worst
}
