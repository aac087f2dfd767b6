use std::collections::BTreeSet;
use std::fmt;

use super::domain::{trace_gap, BoundaryTag, MultiPatchDomain, GLUE_TOL};
use crate::error::{Error, Result};
use crate::splines::{KnotVector, NurbsCurve, Side};

/// Scalar B-spline space on one patch's reference square (`u` fastest numbering).
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSpace {
    ku: KnotVector,
    kv: KnotVector,
}

/// Nonzero tensor-product basis functions at one reference point.
#[derive(Clone, Debug, Default)]
pub struct TensorBasis {
    pub local: Vec<usize>,
    pub value: Vec<f64>,
    /// Gradients with respect to `(xi, eta)`.
    pub grad: Vec<[f64; 2]>,
}

impl PatchSpace {
    pub fn new(ku: KnotVector, kv: KnotVector) -> Self {
        PatchSpace { ku, kv }
    }

    /// Open uniform space of degree `p` with `n_u x n_v` elements.
    pub fn uniform(p: usize, n_u: usize, n_v: usize) -> Result<Self> {
        Ok(PatchSpace {
            ku: KnotVector::open_uniform(p, n_u)?,
            kv: KnotVector::open_uniform(p, n_v)?,
        })
    }

    pub fn knots_u(&self) -> &KnotVector {
        &self.ku
    }

    pub fn knots_v(&self) -> &KnotVector {
        &self.kv
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.ku.dim(), self.kv.dim())
    }

    pub fn len(&self) -> usize {
        self.ku.dim() * self.kv.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Each element split into `parts` equal pieces per direction.
    pub fn refined(&self, parts: usize) -> Result<Self> {
        Ok(PatchSpace {
            ku: self.ku.with_inserted(&self.ku.uniform_insertions(parts))?,
            kv: self.kv.with_inserted(&self.kv.uniform_insertions(parts))?,
        })
    }

    /// Local indices of the functions that do not vanish on `side`, in edge order.
    pub fn side_dofs(&self, side: Side) -> Vec<usize> {
        let (nu, nv) = self.dims();
        match side {
            Side::West => (0..nv).map(|j| nu * j).collect(),
            Side::East => (0..nv).map(|j| nu - 1 + nu * j).collect(),
            Side::South => (0..nu).collect(),
            Side::North => (0..nu).map(|i| i + nu * (nv - 1)).collect(),
        }
    }

    pub fn side_knots(&self, side: Side) -> &KnotVector {
        if side.runs_along_u() {
            &self.ku
        } else {
            &self.kv
        }
    }

    /// Element boxes `([u0, u1], [v0, v1])`, `u` fastest.
    pub fn elements(&self) -> Vec<([f64; 2], [f64; 2])> {
        let bu = self.ku.breakpoints();
        let bv = self.kv.breakpoints();
        let mut out = Vec::with_capacity((bu.len() - 1) * (bv.len() - 1));
        for v in bv.windows(2) {
            for u in bu.windows(2) {
                out.push(([u[0], u[1]], [v[0], v[1]]));
            }
        }
        out
    }

    pub fn n_elements(&self) -> (usize, usize) {
        (self.ku.n_elements(), self.kv.n_elements())
    }

    /// Values and reference gradients of the supported functions; clamps to the square.
    pub fn basis(&self, xi: f64, eta: f64) -> TensorBasis {
        let bu = self.ku.eval_clamped(xi, 1);
        let bv = self.kv.eval_clamped(eta, 1);
        let nu = self.ku.dim();
        let n = bu.ders[0].len() * bv.ders[0].len();
        let mut out = TensorBasis {
            local: Vec::with_capacity(n),
            value: Vec::with_capacity(n),
            grad: Vec::with_capacity(n),
        };
        for (b, (&v0, &v1)) in bv.ders[0].iter().zip(&bv.ders[1]).enumerate() {
            for (a, (&u0, &u1)) in bu.ders[0].iter().zip(&bu.ders[1]).enumerate() {
                out.local.push(bu.first + a + nu * (bv.first + b));
                out.value.push(u0 * v0);
                out.grad.push([u1 * v0, u0 * v1]);
            }
        }
        out
    }
}

/// Counts of the constraints behind a [`DiscreteSpace`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConstraintReport {
    pub local_dofs: usize,
    pub glue_links: usize,
    pub antiperiodic_links: usize,
    pub dirichlet_dofs: usize,
    pub sign_conflicts: usize,
    pub global_dofs: usize,
}

impl fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "local dofs          {}", self.local_dofs)?;
        writeln!(f, "glue links          {}", self.glue_links)?;
        writeln!(f, "anti-periodic links {}", self.antiperiodic_links)?;
        writeln!(f, "dirichlet dofs      {}", self.dirichlet_dofs)?;
        writeln!(f, "sign conflicts      {}", self.sign_conflicts)?;
        write!(f, "global dofs         {}", self.global_dofs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum LinkKind {
    Glue,
    Antiperiodic,
}

/// Global scalar space over a multipatch domain.
///
/// Local functions are identified through links `value(b) = sign * value(a)`;
/// classes touching a Dirichlet function, or carrying contradictory signs, are zero.
#[derive(Clone, Debug)]
pub struct DiscreteSpace {
    spaces: Vec<PatchSpace>,
    offsets: Vec<usize>,
    links: BTreeSet<(LinkKind, usize, usize, i8)>,
    dirichlet: BTreeSet<usize>,
    l2g: Vec<Option<(usize, f64)>>,
    n_dof: usize,
    conflicts: usize,
}

impl DiscreteSpace {
    fn from_parts(spaces: Vec<PatchSpace>) -> Self {
        let mut offsets = Vec::with_capacity(spaces.len() + 1);
        let mut acc = 0;
        for s in &spaces {
            offsets.push(acc);
            acc += s.len();
        }
        offsets.push(acc);
        let mut out = DiscreteSpace {
            spaces,
            offsets,
            links: BTreeSet::new(),
            dirichlet: BTreeSet::new(),
            l2g: Vec::new(),
            n_dof: 0,
            conflicts: 0,
        };
        out.renumber();
        out
    }

    pub fn spaces(&self) -> &[PatchSpace] {
        &self.spaces
    }

    pub fn space(&self, patch: usize) -> &PatchSpace {
        &self.spaces[patch]
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn n_local(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Global index and sign of a local function; `None` when constrained to zero.
    pub fn global(&self, patch: usize, local: usize) -> Option<(usize, f64)> {
        self.l2g[self.offsets[patch] + local]
    }

    /// Local-to-global map of one patch.
    pub fn patch_map(&self, patch: usize) -> &[Option<(usize, f64)>] {
        &self.l2g[self.offsets[patch]..self.offsets[patch + 1]]
    }

    /// Local coefficients of one patch for a global coefficient vector.
    pub fn patch_coefficients(&self, patch: usize, u: &[f64]) -> Vec<f64> {
        self.patch_map(patch)
            .iter()
            .map(|m| m.map_or(0.0, |(g, s)| s * u[g]))
            .collect()
    }

    pub fn report(&self) -> ConstraintReport {
        let count = |k| self.links.iter().filter(|l| l.0 == k).count();
        ConstraintReport {
            local_dofs: self.n_local(),
            glue_links: count(LinkKind::Glue),
            antiperiodic_links: count(LinkKind::Antiperiodic),
            dirichlet_dofs: self.dirichlet.len(),
            sign_conflicts: self.conflicts,
            global_dofs: self.n_dof,
        }
    }

    /// Same gluing, no Dirichlet or anti-periodic constraints.
    pub fn glue_only(&self) -> Self {
        let mut s = self.clone();
        s.dirichlet.clear();
        s.links.retain(|l| l.0 == LinkKind::Glue);
        s.renumber();
        s
    }

    fn renumber(&mut self) {
        let n = self.n_local();
        let mut parent: Vec<usize> = (0..n).collect();
        let mut parity = vec![1i8; n];
        fn find(parent: &mut [usize], parity: &mut [i8], x: usize) -> (usize, i8) {
            let mut path = Vec::new();
            let mut r = x;
            while parent[r] != r {
                path.push(r);
                r = parent[r];
            }
            // compress, accumulating signs from the root downward
            for &node in path.iter().rev() {
                let p = parent[node];
                if p != r {
                    parity[node] *= parity[p];
                }
                parent[node] = r;
            }
            (r, if x == r { 1 } else { parity[x] })
        }
        let mut bad = vec![false; n];
        let mut conflicts = 0;
        for &(_, a, b, s) in &self.links {
            let (ra, sa) = find(&mut parent, &mut parity, a);
            let (rb, sb) = find(&mut parent, &mut parity, b);
            if ra == rb {
                if s * sa * sb != 1 {
                    if !bad[ra] {
                        conflicts += 1;
                    }
                    bad[ra] = true;
                }
            } else {
                parent[rb] = ra;
                parity[rb] = s * sa * sb;
                if bad[rb] {
                    bad[ra] = true;
                }
            }
        }
        for &d in &self.dirichlet {
            let (r, _) = find(&mut parent, &mut parity, d);
            bad[r] = true;
        }
        let mut number = vec![usize::MAX; n];
        let mut next = 0;
        let mut l2g = Vec::with_capacity(n);
        for x in 0..n {
            let (r, s) = find(&mut parent, &mut parity, x);
            if bad[r] {
                l2g.push(None);
                continue;
            }
            if number[r] == usize::MAX {
                number[r] = next;
                next += 1;
            }
            l2g.push(Some((number[r], s as f64)));
        }
        self.l2g = l2g;
        self.n_dof = next;
        self.conflicts = conflicts;
    }

    fn flat(&self, patch: usize, local: usize) -> usize {
        self.offsets[patch] + local
    }

    /// Zero every function supported on a Dirichlet side.
    pub fn apply_dirichlet(&self, domain: &MultiPatchDomain) -> Self {
        let mut s = self.clone();
        for (p, side) in domain.sides_with(BoundaryTag::Dirichlet) {
            for l in s.spaces[p].side_dofs(side) {
                let f = s.flat(p, l);
                s.dirichlet.insert(f);
            }
        }
        s.renumber();
        s
    }

    /// Identify each left-cut function with its partner on the right cut, with sign -1.
    ///
    /// Partners are found geometrically: right traces rotated by `-pitch` must coincide
    /// with left traces.
    pub fn apply_antiperiodic(&self, domain: &MultiPatchDomain, pitch: f64) -> Result<Self> {
        let left = domain.sides_with(BoundaryTag::AntiperiodicLeft);
        let right = domain.sides_with(BoundaryTag::AntiperiodicRight);
        if left.len() != right.len() {
            return Err(Error::Constraint(format!(
                "{} left and {} right anti-periodic sides",
                left.len(),
                right.len()
            )));
        }
        let (c, s) = ((-pitch).cos(), (-pitch).sin());
        let rotate = |curve: &NurbsCurve<2>| {
            let pts = curve
                .control_points()
                .iter()
                .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
                .collect();
            NurbsCurve::new(
                curve.knots().clone(),
                pts,
                crate::splines::Weights::new(curve.weights().to_vec()).expect("positive"),
            )
            .expect("sizes")
        };
        let scale = domain
            .patches()
            .iter()
            .map(|p| {
                let (lo, hi) = p.bounding_box();
                lo[0].abs().max(lo[1].abs()).max(hi[0].abs()).max(hi[1].abs())
            })
            .fold(0.0, f64::max);
        let tol = GLUE_TOL * scale.max(1e-300);
        let mut out = self.clone();
        for &(pr, sr) in &right {
            let cr = rotate(&domain.patch(pr).boundary_curve(sr));
            let mut partner = None;
            for &(pl, sl) in &left {
                let cl = domain.patch(pl).boundary_curve(sl);
                for reversed in [false, true] {
                    if trace_gap(&cl, &cr, reversed, 11) <= tol {
                        partner = Some((pl, sl, reversed));
                    }
                }
            }
            let (pl, sl, reversed) = partner.ok_or_else(|| {
                Error::Constraint(format!(
                    "right cut side {sr:?} of patch {pr} has no rotated partner on the left cut"
                ))
            })?;
            let kl = self.spaces[pl].side_knots(sl);
            let kr = self.spaces[pr].side_knots(sr);
            let kr = if reversed { kr.reversed() } else { kr.clone() };
            if !kl.matches(&kr, 1e-12) {
                return Err(Error::NonConforming {
                    patch_a: pl,
                    patch_b: pr,
                    reason: "anti-periodic traces use different knot vectors".into(),
                });
            }
            let dl = self.spaces[pl].side_dofs(sl);
            let mut dr = self.spaces[pr].side_dofs(sr);
            if reversed {
                dr.reverse();
            }
            for (a, b) in dl.into_iter().zip(dr) {
                let (fa, fb) = (out.flat(pl, a), out.flat(pr, b));
                out.links.insert((LinkKind::Antiperiodic, fa, fb, -1));
            }
        }
        out.renumber();
        Ok(out)
    }
}

/// Identify the functions on every glued side pair (C0 gluing).
pub fn glue_c0(domain: &MultiPatchDomain, spaces: Vec<PatchSpace>) -> Result<DiscreteSpace> {
    if spaces.len() != domain.n_patches() {
        return Err(Error::DimensionMismatch {
            what: "patch spaces",
            expected: domain.n_patches(),
            found: spaces.len(),
        });
    }
    let mut out = DiscreteSpace::from_parts(spaces);
    for i in domain.interfaces() {
        let ka = out.spaces[i.patch_a].side_knots(i.side_a);
        let kb = out.spaces[i.patch_b].side_knots(i.side_b);
        let kb = if i.reversed { kb.reversed() } else { kb.clone() };
        if !ka.matches(&kb, 1e-12) {
            return Err(Error::NonConforming {
                patch_a: i.patch_a,
                patch_b: i.patch_b,
                reason: "glued sides carry different solution knot vectors".into(),
            });
        }
        let da = out.spaces[i.patch_a].side_dofs(i.side_a);
        let mut db = out.spaces[i.patch_b].side_dofs(i.side_b);
        if i.reversed {
            db.reverse();
        }
        for (a, b) in da.into_iter().zip(db) {
            let (fa, fb) = (out.flat(i.patch_a, a), out.flat(i.patch_b, b));
            out.links.insert((LinkKind::Glue, fa, fb, 1));
        }
    }
    out.renumber();
    Ok(out)
}

/// Uniform spaces of degree `p` with `n` elements per direction on every patch.
pub fn uniform_spaces(domain: &MultiPatchDomain, p: usize, n: usize) -> Result<Vec<PatchSpace>> {
    (0..domain.n_patches())
        .map(|_| PatchSpace::uniform(p, n, n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splines::NurbsPatch;

    fn strip() -> MultiPatchDomain {
        let mut d = MultiPatchDomain::new(vec![
            NurbsPatch::bilinear([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]),
            NurbsPatch::bilinear([[1.0, 0.0], [2.0, 0.0], [1.0, 1.0], [2.0, 1.0]]),
        ]);
        d.detect_interfaces().unwrap();
        d
    }

    #[test]
    fn shared_edge_counted_once() {
        let d = strip();
        let s = glue_c0(&d, uniform_spaces(&d, 1, 2).unwrap()).unwrap();
        assert_eq!(s.n_dof(), 2 * 9 - 3);
        assert_eq!(s.report().glue_links, 3);
    }

    #[test]
    fn dirichlet_counting_and_removal() {
        let mut d = MultiPatchDomain::new(vec![NurbsPatch::bilinear([
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 1.0],
        ])]);
        d.tag_remaining(|_, _, _| Ok(BoundaryTag::Dirichlet)).unwrap();
        let s = glue_c0(&d, uniform_spaces(&d, 1, 3).unwrap()).unwrap();
        let c = s.apply_dirichlet(&d);
        assert_eq!(c.n_dof(), 4);
        assert_eq!(c.apply_dirichlet(&d).patch_map(0), c.patch_map(0));
        assert_eq!(c.glue_only().n_dof(), 16);
    }

    #[test]
    fn reversed_interface_pairs_in_opposite_order() {
        let mut d = MultiPatchDomain::new(vec![
            NurbsPatch::bilinear([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]),
            NurbsPatch::bilinear([[1.0, 1.0], [2.0, 1.0], [1.0, 0.0], [2.0, 0.0]]),
        ]);
        d.detect_interfaces().unwrap();
        let s = glue_c0(&d, uniform_spaces(&d, 2, 3).unwrap()).unwrap();
        let east = s.space(0).side_dofs(Side::East);
        let mut west = s.space(1).side_dofs(Side::West);
        west.reverse();
        for (a, b) in east.into_iter().zip(west) {
            assert_eq!(s.global(0, a), s.global(1, b));
        }
    }

    #[test]
    fn non_conforming_glue_rejected() {
        let d = strip();
        let spaces = vec![
            PatchSpace::uniform(1, 2, 2).unwrap(),
            PatchSpace::uniform(1, 2, 3).unwrap(),
        ];
        match glue_c0(&d, spaces) {
            Err(Error::NonConforming { patch_a, patch_b, .. }) => {
                assert_eq!((patch_a, patch_b), (0, 1))
            }
            other => panic!("expected non-conforming error, got {other:?}"),
        }
    }

    #[test]
    fn antiperiodic_pairs_with_negative_sign() {
        use std::f64::consts::FRAC_PI_3;
        let mut d = MultiPatchDomain::new(vec![
            NurbsPatch::annular_sector(1.0, 2.0, 0.0, FRAC_PI_3 / 2.0).unwrap(),
            NurbsPatch::annular_sector(1.0, 2.0, FRAC_PI_3 / 2.0, FRAC_PI_3).unwrap(),
        ]);
        d.detect_interfaces().unwrap();
        d.set_tag(0, Side::South, BoundaryTag::AntiperiodicLeft).unwrap();
        d.set_tag(1, Side::North, BoundaryTag::AntiperiodicRight).unwrap();
        d.tag_remaining(|_, _, _| Ok(BoundaryTag::Neumann)).unwrap();
        let s = glue_c0(&d, uniform_spaces(&d, 2, 3).unwrap()).unwrap();
        let before = s.n_dof();
        let a = s.apply_antiperiodic(&d, FRAC_PI_3).unwrap();
        assert_eq!(a.n_dof(), before - 5);
        let l = a.space(0).side_dofs(Side::South);
        let r = a.space(1).side_dofs(Side::North);
        for (x, y) in l.into_iter().zip(r) {
            let (gx, sx) = a.global(0, x).unwrap();
            let (gy, sy) = a.global(1, y).unwrap();
            assert_eq!(gx, gy);
            assert_eq!(sx * sy, -1.0);
        }
        let again = a.apply_antiperiodic(&d, FRAC_PI_3).unwrap();
        assert_eq!(again.patch_map(1), a.patch_map(1));
        assert!(s.apply_antiperiodic(&d, 1.0).is_err());
    }

    #[test]
    fn single_patch_cut_identification() {
        use std::f64::consts::PI;
        let mut d = MultiPatchDomain::new(vec![NurbsPatch::annular_sector(1.0, 2.0, 0.0, PI / 2.0).unwrap()]);
        d.set_tag(0, Side::South, BoundaryTag::AntiperiodicLeft).unwrap();
        d.set_tag(0, Side::North, BoundaryTag::AntiperiodicRight).unwrap();
        d.tag_remaining(|_, _, _| Ok(BoundaryTag::Neumann)).unwrap();
        let s = glue_c0(&d, uniform_spaces(&d, 1, 1).unwrap()).unwrap();
        let a = s.apply_antiperiodic(&d, PI / 2.0).unwrap();
        assert_eq!(a.n_dof(), 2);
        assert_eq!(a.report().sign_conflicts, 0);
    }
}
