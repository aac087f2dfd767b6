use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splines::exchange::{AdjacencyRecord, BoundaryRecord, PatchFile, PatchRecord};
use crate::splines::{NurbsCurve, NurbsPatch, Side};

/// Boundary condition carried by an unglued patch side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    Dirichlet,
    AntiperiodicLeft,
    AntiperiodicRight,
    Airgap,
    /// Natural (homogeneous Neumann) boundary.
    Neumann,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Dirichlet => "dirichlet",
            BoundaryTag::AntiperiodicLeft => "antiperiodic_left",
            BoundaryTag::AntiperiodicRight => "antiperiodic_right",
            BoundaryTag::Airgap => "airgap",
            BoundaryTag::Neumann => "neumann",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "dirichlet" => BoundaryTag::Dirichlet,
            "antiperiodic_left" => BoundaryTag::AntiperiodicLeft,
            "antiperiodic_right" => BoundaryTag::AntiperiodicRight,
            "airgap" => BoundaryTag::Airgap,
            "neumann" => BoundaryTag::Neumann,
            other => return Err(Error::Parse(format!("unknown boundary tag `{other}`"))),
        })
    }
}

/// Two glued patch sides. With `reversed`, side `b` runs opposite to side `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interface {
    pub patch_a: usize,
    pub side_a: Side,
    pub patch_b: usize,
    pub side_b: Side,
    pub reversed: bool,
}

/// Patches, their conforming interfaces and boundary tags.
#[derive(Clone, Debug)]
pub struct MultiPatchDomain {
    patches: Vec<NurbsPatch>,
    regions: Vec<String>,
    interfaces: Vec<Interface>,
    tags: BTreeMap<(usize, Side), BoundaryTag>,
}

/// Coincidence tolerance for glued traces, relative to the domain size.
pub const GLUE_TOL: f64 = 1e-10;

impl MultiPatchDomain {
    pub fn new(patches: Vec<NurbsPatch>) -> Self {
        let regions = vec![String::new(); patches.len()];
        MultiPatchDomain {
            patches,
            regions,
            interfaces: Vec::new(),
            tags: BTreeMap::new(),
        }
    }

    pub fn with_regions(mut self, regions: Vec<String>) -> Result<Self> {
        if regions.len() != self.patches.len() {
            return Err(Error::DimensionMismatch {
                what: "region labels",
                expected: self.patches.len(),
                found: regions.len(),
            });
        }
        self.regions = regions;
        Ok(self)
    }

    pub fn patches(&self) -> &[NurbsPatch] {
        &self.patches
    }

    pub fn patch(&self, k: usize) -> &NurbsPatch {
        &self.patches[k]
    }

    pub fn n_patches(&self) -> usize {
        self.patches.len()
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    pub fn tags(&self) -> impl Iterator<Item = (usize, Side, BoundaryTag)> + '_ {
        self.tags.iter().map(|(&(p, s), &t)| (p, s, t))
    }

    pub fn tag(&self, patch: usize, side: Side) -> Option<BoundaryTag> {
        self.tags.get(&(patch, side)).copied()
    }

    /// Sides carrying `tag`, in patch order.
    pub fn sides_with(&self, tag: BoundaryTag) -> Vec<(usize, Side)> {
        self.tags
            .iter()
            .filter(|(_, &t)| t == tag)
            .map(|(&k, _)| k)
            .collect()
    }

    pub fn is_glued(&self, patch: usize, side: Side) -> bool {
        self.interfaces.iter().any(|i| {
            (i.patch_a == patch && i.side_a == side) || (i.patch_b == patch && i.side_b == side)
        })
    }

    fn length_scale(&self) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.patches {
            let (a, b) = p.bounding_box();
            for c in 0..2 {
                lo[c] = lo[c].min(a[c]);
                hi[c] = hi[c].max(b[c]);
            }
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1]).max(1e-300)
    }

    pub fn add_interface(&mut self, iface: Interface) -> Result<()> {
        for (p, s) in [(iface.patch_a, iface.side_a), (iface.patch_b, iface.side_b)] {
            if p >= self.patches.len() {
                return Err(Error::InvalidGeometry(format!("interface refers to missing patch {p}")));
            }
            if self.is_glued(p, s) || self.tags.contains_key(&(p, s)) {
                return Err(Error::InvalidGeometry(format!(
                    "side {s:?} of patch {p} is already glued or tagged"
                )));
            }
        }
        let tol = GLUE_TOL * self.length_scale();
        let ca = self.patches[iface.patch_a].boundary_curve(iface.side_a);
        let cb = self.patches[iface.patch_b].boundary_curve(iface.side_b);
        let gap = trace_gap(&ca, &cb, iface.reversed, 21);
        if gap > tol {
            return Err(Error::NonConforming {
                patch_a: iface.patch_a,
                patch_b: iface.patch_b,
                reason: format!("glued traces differ by {gap:.3e}"),
            });
        }
        self.interfaces.push(iface);
        Ok(())
    }

    pub fn set_tag(&mut self, patch: usize, side: Side, tag: BoundaryTag) -> Result<()> {
        if self.is_glued(patch, side) {
            return Err(Error::InvalidGeometry(format!(
                "side {side:?} of patch {patch} is glued and cannot carry a boundary tag"
            )));
        }
        self.tags.insert((patch, side), tag);
        Ok(())
    }

    /// Glue every pair of sides whose traces coincide under matching parametrization.
    pub fn detect_interfaces(&mut self) -> Result<usize> {
        let tol = GLUE_TOL * self.length_scale();
        let sides: Vec<(usize, Side, NurbsCurve<2>, [[f64; 2]; 3])> = (0..self.patches.len())
            .flat_map(|p| Side::ALL.into_iter().map(move |s| (p, s)))
            .filter(|&(p, s)| !self.is_glued(p, s) && !self.tags.contains_key(&(p, s)))
            .map(|(p, s)| {
                let c = self.patches[p].boundary_curve(s);
                let probe = [
                    c.eval_with_derivative(0.0).0,
                    c.eval_with_derivative(0.5).0,
                    c.eval_with_derivative(1.0).0,
                ];
                (p, s, c, probe)
            })
            .collect();
        let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]) <= tol;
        let mut used = vec![false; sides.len()];
        let mut found = Vec::new();
        for i in 0..sides.len() {
            if used[i] {
                continue;
            }
            for j in i + 1..sides.len() {
                if used[j] || sides[i].0 == sides[j].0 {
                    continue;
                }
                let (a, b) = (&sides[i].3, &sides[j].3);
                if !close(a[1], b[1]) {
                    continue;
                }
                let reversed = if close(a[0], b[0]) && close(a[2], b[2]) {
                    false
                } else if close(a[0], b[2]) && close(a[2], b[0]) {
                    true
                } else {
                    continue;
                };
                if trace_gap(&sides[i].2, &sides[j].2, reversed, 21) > tol {
                    continue;
                }
                used[i] = true;
                used[j] = true;
                found.push(Interface {
                    patch_a: sides[i].0,
                    side_a: sides[i].1,
                    patch_b: sides[j].0,
                    side_b: sides[j].1,
                    reversed,
                });
                break;
            }
        }
        let n = found.len();
        self.interfaces.extend(found);
        Ok(n)
    }

    /// Tag every side that is neither glued nor tagged yet.
    pub fn tag_remaining(
        &mut self,
        mut classify: impl FnMut(usize, Side, &NurbsCurve<2>) -> Result<BoundaryTag>,
    ) -> Result<()> {
        for p in 0..self.patches.len() {
            for s in Side::ALL {
                if self.is_glued(p, s) || self.tags.contains_key(&(p, s)) {
                    continue;
                }
                let c = self.patches[p].boundary_curve(s);
                let tag = classify(p, s, &c)?;
                self.tags.insert((p, s), tag);
            }
        }
        Ok(())
    }

    /// Every side is glued or tagged, never both; glued traces coincide.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for (k, i) in self.interfaces.iter().enumerate() {
            for key in [(i.patch_a, i.side_a), (i.patch_b, i.side_b)] {
                if seen.insert(key, k).is_some() || self.tags.contains_key(&key) {
                    return Err(Error::InvalidGeometry(format!(
                        "side {:?} of patch {} appears twice",
                        key.1, key.0
                    )));
                }
            }
        }
        let tol = GLUE_TOL * self.length_scale();
        for i in &self.interfaces {
            let gap = trace_gap(
                &self.patches[i.patch_a].boundary_curve(i.side_a),
                &self.patches[i.patch_b].boundary_curve(i.side_b),
                i.reversed,
                21,
            );
            if gap > tol {
                return Err(Error::NonConforming {
                    patch_a: i.patch_a,
                    patch_b: i.patch_b,
                    reason: format!("glued traces differ by {gap:.3e}"),
                });
            }
        }
        Ok(())
    }

    pub fn to_exchange(&self) -> PatchFile {
        PatchFile {
            patch: self
                .patches
                .iter()
                .zip(&self.regions)
                .map(|(p, r)| PatchRecord::from_patch(p, (!r.is_empty()).then(|| r.clone())))
                .collect(),
            interface: self
                .interfaces
                .iter()
                .map(|i| AdjacencyRecord {
                    patch_a: i.patch_a,
                    side_a: i.side_a,
                    patch_b: i.patch_b,
                    side_b: i.side_b,
                    reversed: i.reversed,
                })
                .collect(),
            boundary: self
                .tags
                .iter()
                .map(|(&(patch, side), t)| BoundaryRecord {
                    patch,
                    side,
                    tag: t.as_str().to_string(),
                })
                .collect(),
        }
    }

    pub fn from_exchange(file: &PatchFile) -> Result<Self> {
        let patches = file.patches()?;
        let regions = file
            .patch
            .iter()
            .map(|r| r.region.clone().unwrap_or_default())
            .collect();
        let mut d = MultiPatchDomain::new(patches).with_regions(regions)?;
        for r in &file.interface {
            d.add_interface(Interface {
                patch_a: r.patch_a,
                side_a: r.side_a,
                patch_b: r.patch_b,
                side_b: r.side_b,
                reversed: r.reversed,
            })?;
        }
        for r in &file.boundary {
            d.set_tag(r.patch, r.side, BoundaryTag::parse(&r.tag)?)?;
        }
        d.validate()?;
        Ok(d)
    }
}

/// Largest distance between two traces sampled at `n` matching parameters.
pub(crate) fn trace_gap(a: &NurbsCurve<2>, b: &NurbsCurve<2>, reversed: bool, n: usize) -> f64 {
    (0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            let pa = a.eval_with_derivative(t).0;
            let pb = b.eval_with_derivative(if reversed { 1.0 - t } else { t }).0;
            (pa[0] - pb[0]).hypot(pa[1] - pb[1])
        })
        .fold(0.0, f64::max)
}
