//! One pole of a six-pole permanent-magnet synchronous machine with a buried magnet.
//!
//! Coordinates are global, in meters. The pole spans `0 <= theta <= pitch`; the rotor is
//! symmetric about the mid-line `theta = pitch / 2` and the magnet is magnetized along it.
//! The rotor reaches out to the air-gap circle through a thin air ring, so both sides own an
//! exact arc at `R_ag`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use super::units::{Dimension, Quantity};
use crate::assembly::{Material, MaterialMap};
use crate::error::{Error, Result};
use crate::multipatch::{BoundaryTag, MultiPatchDomain};
use crate::quadrature::GaussLegendre;
use crate::splines::{make_circular_arc, make_line, NurbsCurve, NurbsPatch};

/// Vacuum permeability.
pub const MU_0: f64 = 4.0e-7 * PI;

/// Slots per pole; fixed by the three-phase double-layer winding with two slots per phase.
pub const SLOTS_PER_POLE: usize = 6;

/// Every geometry and material parameter of the machine, in SI units.
#[derive(Clone, Debug, PartialEq)]
pub struct MachineModel {
    pub rotor_inner_radius: f64,
    pub rotor_outer_radius: f64,
    /// Magnet width `d1`, across the mid-line.
    pub magnet_width: f64,
    /// Magnet height `d2`, along the mid-line.
    pub magnet_height: f64,
    /// Iron between the magnet top and the rotor surface, `d3`.
    pub magnet_depth: f64,
    /// Opening angle `delta1` of the iron below the magnet at the shaft.
    pub inner_opening: f64,
    /// Opening angle `delta2` of the iron above the magnet at the rotor surface.
    pub outer_opening: f64,
    pub stator_inner_radius: f64,
    pub stator_outer_radius: f64,
    pub turns_per_half_slot: f64,
    /// Angular width `delta3` of the upper coil layer.
    pub slot_width: f64,
    /// Angular width `delta4` of the lower coil layer.
    pub lower_slot_width: f64,
    /// Angular width `delta5` of the slot opening.
    pub slot_opening: f64,
    /// Radial depth `l1` of the tooth tips.
    pub tooth_tip_depth: f64,
    /// Radial depth `l2` of the lower coil layer.
    pub lower_layer_depth: f64,
    /// `l3`; kept for completeness, the slot body is `l2 + l4`.
    pub slot_body_depth: f64,
    /// Radial depth `l4` of the upper coil layer.
    pub upper_layer_depth: f64,
    pub airgap_radius: f64,
    pub axial_length: f64,
    pub poles: usize,
    pub skew: f64,
    pub mu_r_iron: f64,
    pub mu_r_copper: f64,
    pub mu_r_magnet: f64,
    pub remanence: f64,
    /// Conductivities of iron, copper and magnet; inert in magnetostatics.
    pub sigma_iron: f64,
    pub sigma_copper: f64,
    pub sigma_magnet: f64,
}

impl Default for MachineModel {
    fn default() -> Self {
        let mm = 1e-3;
        let deg = PI / 180.0;
        MachineModel {
            rotor_inner_radius: 16.0 * mm,
            rotor_outer_radius: 44.0 * mm,
            magnet_width: 19.0 * mm,
            magnet_height: 7.0 * mm,
            magnet_depth: 7.0 * mm,
            inner_opening: 8.5 * deg,
            outer_opening: 42.0 * deg,
            stator_inner_radius: 45.0 * mm,
            stator_outer_radius: 67.5 * mm,
            turns_per_half_slot: 12.0,
            slot_width: 7.0 * deg,
            lower_slot_width: 5.7 * deg,
            slot_opening: 4.0 * deg,
            tooth_tip_depth: 0.6 * mm,
            lower_layer_depth: 5.4 * mm,
            slot_body_depth: 5.0 * mm,
            upper_layer_depth: 8.2 * mm,
            airgap_radius: 44.7 * mm,
            axial_length: 0.1,
            poles: 6,
            skew: 0.0,
            mu_r_iron: 500.0,
            mu_r_copper: 1.0,
            mu_r_magnet: 1.5,
            remanence: 0.94,
            sigma_iron: 0.0,
            sigma_copper: 5.77e7,
            sigma_magnet: 0.0,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRotor {
    inner_radius: Option<Quantity>,
    outer_radius: Option<Quantity>,
    magnet_width: Option<Quantity>,
    magnet_height: Option<Quantity>,
    magnet_depth: Option<Quantity>,
    inner_opening: Option<Quantity>,
    outer_opening: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStator {
    inner_radius: Option<Quantity>,
    outer_radius: Option<Quantity>,
    turns_per_half_slot: Option<Quantity>,
    slot_width: Option<Quantity>,
    lower_slot_width: Option<Quantity>,
    slot_opening: Option<Quantity>,
    tooth_tip_depth: Option<Quantity>,
    lower_layer_depth: Option<Quantity>,
    slot_body_depth: Option<Quantity>,
    upper_layer_depth: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMachine {
    airgap_radius: Option<Quantity>,
    axial_length: Option<Quantity>,
    poles: Option<usize>,
    skew: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterials {
    mu_r_iron: Option<Quantity>,
    mu_r_copper: Option<Quantity>,
    mu_r_magnet: Option<Quantity>,
    remanence: Option<Quantity>,
    sigma_iron: Option<Quantity>,
    sigma_copper: Option<Quantity>,
    sigma_magnet: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default)]
    machine: RawMachine,
    #[serde(default)]
    rotor: RawRotor,
    #[serde(default)]
    stator: RawStator,
    #[serde(default)]
    materials: RawMaterials,
}

fn set(target: &mut f64, q: &Option<Quantity>, field: &str, dim: Dimension) -> Result<()> {
    if let Some(q) = q {
        *target = q.to_si(field, dim)?;
    }
    Ok(())
}

impl MachineModel {
    /// Read a model from TOML. Missing keys keep their defaults.
    ///
    /// ```toml
    /// [rotor]
    /// inner_radius = "16 mm"
    /// inner_opening = "8.5 deg"
    /// [materials]
    /// remanence = "0.94 T"
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawModel = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_raw(&raw)
    }

    /// Parse an already-decoded TOML table, e.g. a `[model]` section of a run file.
    pub fn from_toml_value(value: toml::Value) -> Result<Self> {
        let raw: RawModel = value.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        Self::from_raw(&raw)
    }

    fn from_raw(raw: &RawModel) -> Result<Self> {
        use Dimension::*;
        let mut m = MachineModel::default();
        let r = &raw.rotor;
        set(&mut m.rotor_inner_radius, &r.inner_radius, "rotor.inner_radius", Length)?;
        set(&mut m.rotor_outer_radius, &r.outer_radius, "rotor.outer_radius", Length)?;
        set(&mut m.magnet_width, &r.magnet_width, "rotor.magnet_width", Length)?;
        set(&mut m.magnet_height, &r.magnet_height, "rotor.magnet_height", Length)?;
        set(&mut m.magnet_depth, &r.magnet_depth, "rotor.magnet_depth", Length)?;
        set(&mut m.inner_opening, &r.inner_opening, "rotor.inner_opening", Angle)?;
        set(&mut m.outer_opening, &r.outer_opening, "rotor.outer_opening", Angle)?;
        let s = &raw.stator;
        set(&mut m.stator_inner_radius, &s.inner_radius, "stator.inner_radius", Length)?;
        set(&mut m.stator_outer_radius, &s.outer_radius, "stator.outer_radius", Length)?;
        set(&mut m.turns_per_half_slot, &s.turns_per_half_slot, "stator.turns_per_half_slot", Dimensionless)?;
        set(&mut m.slot_width, &s.slot_width, "stator.slot_width", Angle)?;
        set(&mut m.lower_slot_width, &s.lower_slot_width, "stator.lower_slot_width", Angle)?;
        set(&mut m.slot_opening, &s.slot_opening, "stator.slot_opening", Angle)?;
        set(&mut m.tooth_tip_depth, &s.tooth_tip_depth, "stator.tooth_tip_depth", Length)?;
        set(&mut m.lower_layer_depth, &s.lower_layer_depth, "stator.lower_layer_depth", Length)?;
        set(&mut m.slot_body_depth, &s.slot_body_depth, "stator.slot_body_depth", Length)?;
        set(&mut m.upper_layer_depth, &s.upper_layer_depth, "stator.upper_layer_depth", Length)?;
        let g = &raw.machine;
        set(&mut m.airgap_radius, &g.airgap_radius, "machine.airgap_radius", Length)?;
        set(&mut m.axial_length, &g.axial_length, "machine.axial_length", Length)?;
        set(&mut m.skew, &g.skew, "machine.skew", Angle)?;
        if let Some(p) = g.poles {
            m.poles = p;
        }
        let t = &raw.materials;
        set(&mut m.mu_r_iron, &t.mu_r_iron, "materials.mu_r_iron", Dimensionless)?;
        set(&mut m.mu_r_copper, &t.mu_r_copper, "materials.mu_r_copper", Dimensionless)?;
        set(&mut m.mu_r_magnet, &t.mu_r_magnet, "materials.mu_r_magnet", Dimensionless)?;
        set(&mut m.remanence, &t.remanence, "materials.remanence", FluxDensity)?;
        set(&mut m.sigma_iron, &t.sigma_iron, "materials.sigma_iron", Conductivity)?;
        set(&mut m.sigma_copper, &t.sigma_copper, "materials.sigma_copper", Conductivity)?;
        set(&mut m.sigma_magnet, &t.sigma_magnet, "materials.sigma_magnet", Conductivity)?;
        if m.skew != 0.0 {
            log::warn!("skew of {:.3} deg ignored: the model is two-dimensional", m.skew.to_degrees());
        }
        m.validate()?;
        Ok(m)
    }

    /// Angular extent of one pole.
    pub fn pole_pitch(&self) -> f64 {
        2.0 * PI / self.poles as f64
    }

    pub fn slot_pitch(&self) -> f64 {
        self.pole_pitch() / SLOTS_PER_POLE as f64
    }

    /// Stator ring radii from the air gap outwards: air, tooth tips, lower layer, upper layer, yoke.
    pub fn stator_radii(&self) -> [f64; 6] {
        let r1 = self.stator_inner_radius;
        let r2 = r1 + self.tooth_tip_depth;
        let r3 = r2 + self.lower_layer_depth;
        let r4 = r3 + self.upper_layer_depth;
        [self.airgap_radius, r1, r2, r3, r4, self.stator_outer_radius]
    }

    /// Cross-section of one coil side of the given layer (0 lower, 1 upper).
    pub fn half_slot_area(&self, layer: usize) -> f64 {
        let r = self.stator_radii();
        if layer == 0 {
            0.5 * self.lower_slot_width * (r[3] * r[3] - r[2] * r[2])
        } else {
            0.5 * self.slot_width * (r[4] * r[4] - r[3] * r[3])
        }
    }

    /// `|H_pm| = B_r / (mu_0 mu_r)`.
    pub fn magnet_field_strength(&self) -> f64 {
        self.remanence / (MU_0 * self.mu_r_magnet)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rotor.inner_radius", self.rotor_inner_radius),
            ("rotor.outer_radius", self.rotor_outer_radius),
            ("rotor.magnet_width", self.magnet_width),
            ("rotor.magnet_height", self.magnet_height),
            ("rotor.magnet_depth", self.magnet_depth),
            ("rotor.inner_opening", self.inner_opening),
            ("rotor.outer_opening", self.outer_opening),
            ("stator.inner_radius", self.stator_inner_radius),
            ("stator.outer_radius", self.stator_outer_radius),
            ("stator.turns_per_half_slot", self.turns_per_half_slot),
            ("stator.slot_width", self.slot_width),
            ("stator.lower_slot_width", self.lower_slot_width),
            ("stator.slot_opening", self.slot_opening),
            ("stator.tooth_tip_depth", self.tooth_tip_depth),
            ("stator.lower_layer_depth", self.lower_layer_depth),
            ("stator.upper_layer_depth", self.upper_layer_depth),
            ("machine.airgap_radius", self.airgap_radius),
            ("machine.axial_length", self.axial_length),
            ("materials.mu_r_iron", self.mu_r_iron),
            ("materials.mu_r_copper", self.mu_r_copper),
            ("materials.mu_r_magnet", self.mu_r_magnet),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if self.remanence < 0.0 {
            return Err(Error::config("materials.remanence", "must not be negative"));
        }
        if self.poles < 2 || !self.poles.is_multiple_of(2) {
            return Err(Error::config("machine.poles", "must be even and at least 2"));
        }
        if !(self.rotor_outer_radius < self.airgap_radius && self.airgap_radius < self.stator_inner_radius) {
            return Err(Error::config(
                "machine.airgap_radius",
                "must lie strictly between the rotor and stator surfaces",
            ));
        }
        if self.rotor_inner_radius >= self.rotor_outer_radius {
            return Err(Error::config("rotor.inner_radius", "must be below the outer radius"));
        }
        let r = self.stator_radii();
        if r[4] >= r[5] {
            return Err(Error::config("stator.outer_radius", "leaves no room for the yoke"));
        }
        let half = self.pole_pitch() / 2.0;
        let x_top = self.rotor_outer_radius - self.magnet_depth;
        let x_bot = x_top - self.magnet_height;
        let h = self.magnet_width / 2.0;
        let a_in = self.inner_opening / 2.0;
        let a_out = self.outer_opening / 2.0;
        if a_in >= half || a_out >= half {
            return Err(Error::config("rotor.outer_opening", "openings must fit inside one pole"));
        }
        if x_bot <= self.rotor_inner_radius * a_in.cos() + 1e-9 * x_top {
            return Err(Error::config("rotor.magnet_depth", "magnet reaches into the shaft"));
        }
        let corner_angle = h.atan2(x_bot).max(h.atan2(x_top));
        if corner_angle >= half || h <= self.rotor_inner_radius * a_in.sin() {
            return Err(Error::config("rotor.magnet_width", "magnet does not fit the pole"));
        }
        if x_top.hypot(h) >= self.rotor_outer_radius || h >= self.rotor_outer_radius * a_out.sin() {
            return Err(Error::config("rotor.outer_opening", "magnet corners must lie inside the top opening"));
        }
        let sp = self.slot_pitch();
        for (field, w) in [
            ("stator.slot_width", self.slot_width),
            ("stator.lower_slot_width", self.lower_slot_width),
            ("stator.slot_opening", self.slot_opening),
        ] {
            if w >= sp {
                return Err(Error::config(field, "wider than the slot pitch"));
            }
        }
        Ok(())
    }
}

/// Winding phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Phase and orientation of the coil side in each slot, per layer.
pub fn winding_layout() -> [[(Phase, f64); SLOTS_PER_POLE]; 2] {
    use Phase::*;
    [
        [(A, 1.0), (A, 1.0), (C, -1.0), (C, -1.0), (B, 1.0), (B, 1.0)],
        [(B, -1.0), (A, 1.0), (A, 1.0), (C, -1.0), (C, -1.0), (B, 1.0)],
    ]
}

/// Material region of a patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Iron,
    Magnet,
    Air,
    Coil { layer: usize, slot: usize },
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Iron => f.write_str("iron"),
            Region::Magnet => f.write_str("magnet"),
            Region::Air => f.write_str("air"),
            Region::Coil { layer, slot } => write!(f, "coil-{layer}-{slot}"),
        }
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iron" => Ok(Region::Iron),
            "magnet" => Ok(Region::Magnet),
            "air" => Ok(Region::Air),
            _ => {
                let bad = || Error::Parse(format!("unknown region {s:?}"));
                let rest = s.strip_prefix("coil-").ok_or_else(bad)?;
                let (l, k) = rest.split_once('-').ok_or_else(bad)?;
                Ok(Region::Coil {
                    layer: l.parse().map_err(|_| bad())?,
                    slot: k.parse().map_err(|_| bad())?,
                })
            }
        }
    }
}

/// Built pole: rotor and stator domains with one region per patch.
#[derive(Clone, Debug)]
pub struct PmsmPole {
    pub model: MachineModel,
    pub rt: MultiPatchDomain,
    pub st: MultiPatchDomain,
    pub rt_regions: Vec<Region>,
    pub st_regions: Vec<Region>,
}

fn polar(r: f64, a: f64) -> [f64; 2] {
    [r * a.cos(), r * a.sin()]
}

/// Arc of radius `r` traversed from angle `a` to angle `b`, in either direction.
fn arc(r: f64, a: f64, b: f64) -> Result<NurbsCurve<2>> {
    if a < b {
        make_circular_arc(r, a, b, [0.0, 0.0])
    } else {
        Ok(make_circular_arc(r, b, a, [0.0, 0.0])?.reversed())
    }
}

/// Coons patch with positive orientation; the parameter directions are swapped if needed.
fn coons(s: &NurbsCurve<2>, n: &NurbsCurve<2>, w: &NurbsCurve<2>, e: &NurbsCurve<2>) -> Result<NurbsPatch> {
    let p = NurbsPatch::from_edges(s, n, w, e)?;
    if p.sample(0.5, 0.5).det > 0.0 {
        Ok(p)
    } else {
        NurbsPatch::from_edges(w, e, s, n)
    }
}

fn straight(s: [f64; 2], n: [f64; 2], w: [f64; 2], e: [f64; 2]) -> NurbsPatch {
    // corners (0,0), (1,0), (0,1), (1,1) of a quadrilateral given as SW, SE, NW, NE
    let p = NurbsPatch::bilinear([s, n, w, e]);
    if p.sample(0.5, 0.5).det > 0.0 {
        p
    } else {
        NurbsPatch::bilinear([s, w, n, e])
    }
}

fn build_rotor(m: &MachineModel) -> Result<(Vec<NurbsPatch>, Vec<Region>)> {
    let mid = m.pole_pitch() / 2.0;
    let half = mid;
    let x_top = m.rotor_outer_radius - m.magnet_depth;
    let x_bot = x_top - m.magnet_height;
    let h = m.magnet_width / 2.0;
    let (ri, ro) = (m.rotor_inner_radius, m.rotor_outer_radius);
    let r1 = x_bot.hypot(h);
    let r2 = x_top.hypot(h);
    let local = |x: f64, y: f64| {
        let (c, s) = (mid.cos(), mid.sin());
        [c * x - s * y, s * x + c * y]
    };

    let mut patches = Vec::with_capacity(12);
    let mut regions = Vec::with_capacity(12);

    // Centre column, shared between both flanks.
    let a_in = m.inner_opening / 2.0;
    let a_out = m.outer_opening / 2.0;
    let m1 = |sg: f64| local(x_bot, sg * h);
    let m2 = |sg: f64| local(x_top, sg * h);
    let a = |sg: f64| polar(ri, mid + sg * a_in);
    let t = |sg: f64| polar(ro, mid + sg * a_out);

    let bottom_side = |sg: f64| make_line(a(sg), m1(sg));
    let top_side = |sg: f64| make_line(m2(sg), t(sg));
    patches.push(coons(
        &arc(ri, mid - a_in, mid + a_in)?,
        &make_line(m1(-1.0), m1(1.0)),
        &bottom_side(-1.0),
        &bottom_side(1.0),
    )?);
    regions.push(Region::Iron);
    patches.push(straight(m1(-1.0), m1(1.0), m2(-1.0), m2(1.0)));
    regions.push(Region::Magnet);
    patches.push(coons(
        &make_line(m2(-1.0), m2(1.0)),
        &arc(ro, mid - a_out, mid + a_out)?,
        &top_side(-1.0),
        &top_side(1.0),
    )?);
    regions.push(Region::Iron);

    // Flanks: sg = +1 towards the right cut, -1 towards the left cut.
    let phi1 = h.atan2(x_bot);
    let phi2 = h.atan2(x_top);
    for sg in [-1.0, 1.0] {
        let ray = mid + sg * half;
        let at = |phi: f64| mid + sg * phi;
        let b1 = polar(r1, ray);
        let b2 = polar(r2, ray);
        let inner = arc(r1, at(phi1), ray)?;
        let outer = arc(r2, at(phi2), ray)?;
        patches.push(coons(
            &arc(ri, at(a_in), ray)?,
            &inner,
            &bottom_side(sg),
            &make_line(polar(ri, ray), b1),
        )?);
        regions.push(Region::Iron);
        patches.push(coons(
            &inner,
            &outer,
            &make_line(m1(sg), m2(sg)),
            &make_line(b1, b2),
        )?);
        regions.push(Region::Air);
        patches.push(coons(
            &outer,
            &arc(ro, at(a_out), ray)?,
            &top_side(sg),
            &make_line(b2, polar(ro, ray)),
        )?);
        regions.push(Region::Iron);
    }

    // Air ring up to the interface.
    let cuts = [0.0, mid - a_out, mid + a_out, 2.0 * mid];
    for w in cuts.windows(2) {
        patches.push(NurbsPatch::annular_sector(ro, m.airgap_radius, w[0], w[1])?);
        regions.push(Region::Air);
    }
    Ok((patches, regions))
}

fn stator_breaks(m: &MachineModel) -> Vec<f64> {
    let sp = m.slot_pitch();
    let mut breaks = vec![0.0, m.pole_pitch()];
    for s in 0..SLOTS_PER_POLE {
        let c = (s as f64 + 0.5) * sp;
        for w in [m.slot_opening, m.lower_slot_width, m.slot_width] {
            breaks.push(c - w / 2.0);
            breaks.push(c + w / 2.0);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    breaks
}

fn build_stator(m: &MachineModel) -> Result<(Vec<NurbsPatch>, Vec<Region>)> {
    let radii = m.stator_radii();
    let breaks = stator_breaks(m);
    let sp = m.slot_pitch();
    let mut patches = Vec::new();
    let mut regions = Vec::new();
    for ring in 0..5 {
        for w in breaks.windows(2) {
            let centre = 0.5 * (w[0] + w[1]);
            let slot = ((centre / sp).floor() as usize).min(SLOTS_PER_POLE - 1);
            let offset = (centre - (slot as f64 + 0.5) * sp).abs();
            let region = match ring {
                0 => Region::Air,
                1 if offset < m.slot_opening / 2.0 => Region::Air,
                2 if offset < m.lower_slot_width / 2.0 => Region::Coil { layer: 0, slot },
                3 if offset < m.slot_width / 2.0 => Region::Coil { layer: 1, slot },
                _ => Region::Iron,
            };
            patches.push(NurbsPatch::annular_sector(radii[ring], radii[ring + 1], w[0], w[1])?);
            regions.push(region);
        }
    }
    Ok((patches, regions))
}

fn finish(
    patches: Vec<NurbsPatch>,
    regions: &[Region],
    pitch: f64,
    dirichlet_radius: f64,
    airgap_radius: f64,
) -> Result<MultiPatchDomain> {
    let labels = regions.iter().map(Region::to_string).collect();
    let mut d = MultiPatchDomain::new(patches).with_regions(labels)?;
    d.detect_interfaces()?;
    let tol = 1e-9 * airgap_radius;
    d.tag_remaining(|patch, side, c| {
        let p = c.eval(0.5)?;
        let r = p[0].hypot(p[1]);
        let theta = p[1].atan2(p[0]);
        if (r - dirichlet_radius).abs() < tol {
            Ok(BoundaryTag::Dirichlet)
        } else if (r - airgap_radius).abs() < tol {
            Ok(BoundaryTag::Airgap)
        } else if theta.abs() < 1e-9 {
            Ok(BoundaryTag::AntiperiodicLeft)
        } else if (theta - pitch).abs() < 1e-9 {
            Ok(BoundaryTag::AntiperiodicRight)
        } else {
            Err(Error::InvalidGeometry(format!(
                "side {side:?} of patch {patch} is an unmatched inner boundary"
            )))
        }
    })?;
    d.validate()?;
    Ok(d)
}

/// Reject patches whose Jacobian comes close to degenerate anywhere.
pub fn check_jacobians(domain: &MultiPatchDomain, n: usize) -> Result<()> {
    let g = GaussLegendre::new(n);
    let pts: Vec<(f64, f64)> = g.on_interval(0.0, 1.0).collect();
    for (k, p) in domain.patches().iter().enumerate() {
        let (lo, hi) = p.bounding_box();
        let scale = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
        for (i, &(xi, _)) in pts.iter().enumerate() {
            for (j, &(eta, _)) in pts.iter().enumerate() {
                let det = p.sample(xi, eta).det;
                if det <= 1e-10 * scale * scale {
                    return Err(Error::SingularJacobian {
                        patch: k,
                        element: (i, j),
                        det,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Build rotor and stator of one pole.
pub fn build_pmsm_pole(model: &MachineModel) -> Result<PmsmPole> {
    model.validate()?;
    let pitch = model.pole_pitch();
    let (rp, rt_regions) = build_rotor(model)?;
    let (sp, st_regions) = build_stator(model)?;
    let rt = finish(rp, &rt_regions, pitch, model.rotor_inner_radius, model.airgap_radius)?;
    let st = finish(sp, &st_regions, pitch, model.stator_outer_radius, model.airgap_radius)?;
    check_jacobians(&rt, 6)?;
    check_jacobians(&st, 6)?;
    Ok(PmsmPole {
        model: model.clone(),
        rt,
        st,
        rt_regions,
        st_regions,
    })
}

/// Magnetization source field of the magnet, along the pole mid-line.
pub fn magnet_excitation(model: &MachineModel) -> [f64; 2] {
    let h = model.magnet_field_strength();
    let mid = model.pole_pitch() / 2.0;
    [h * mid.cos(), h * mid.sin()]
}

/// Source current density of every half slot, indexed `[layer][slot]`.
pub fn winding_excitation(currents: [f64; 3], model: &MachineModel) -> [[f64; SLOTS_PER_POLE]; 2] {
    let layout = winding_layout();
    let mut j = [[0.0; SLOTS_PER_POLE]; 2];
    for layer in 0..2 {
        let area = model.half_slot_area(layer);
        for slot in 0..SLOTS_PER_POLE {
            let (phase, sign) = layout[layer][slot];
            j[layer][slot] = sign * model.turns_per_half_slot * currents[phase.index()] / area;
        }
    }
    j
}

impl PmsmPole {
    fn material(&self, region: Region, currents: &[[f64; SLOTS_PER_POLE]; 2]) -> Material {
        let m = &self.model;
        let nu0 = 1.0 / MU_0;
        match region {
            Region::Iron => Material::linear(nu0 / m.mu_r_iron),
            Region::Air => Material::linear(nu0),
            Region::Magnet => Material {
                h_pm: magnet_excitation(m),
                ..Material::linear(nu0 / m.mu_r_magnet)
            },
            Region::Coil { layer, slot } => Material {
                current: currents[layer][slot],
                ..Material::linear(nu0 / m.mu_r_copper)
            },
        }
    }

    /// Rotor and stator material maps for the given phase currents.
    pub fn materials(&self, currents: [f64; 3]) -> Result<(MaterialMap, MaterialMap)> {
        let j = winding_excitation(currents, &self.model);
        let rt = self.rt_regions.iter().map(|&r| self.material(r, &j)).collect();
        let st = self.st_regions.iter().map(|&r| self.material(r, &j)).collect();
        Ok((MaterialMap::new(rt)?, MaterialMap::new(st)?))
    }

    /// Stator patches of each half slot, indexed `[layer][slot]`.
    pub fn coil_patches(&self) -> [[Vec<usize>; SLOTS_PER_POLE]; 2] {
        let mut out: [[Vec<usize>; SLOTS_PER_POLE]; 2] = Default::default();
        for (k, r) in self.st_regions.iter().enumerate() {
            if let Region::Coil { layer, slot } = *r {
                out[layer][slot].push(k);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{integrate, QuadratureRule};
    use crate::multipatch::{glue_c0, uniform_spaces};

    fn pole() -> PmsmPole {
        build_pmsm_pole(&MachineModel::default()).unwrap()
    }

    #[test]
    fn patch_counts_and_regions() {
        let p = pole();
        assert_eq!(p.rt.n_patches(), 12);
        assert_eq!(p.st.n_patches(), 185);
        assert_eq!(p.rt_regions.iter().filter(|r| **r == Region::Magnet).count(), 1);
        let coils = p.coil_patches();
        assert!(coils.iter().flatten().all(|c| !c.is_empty()));
        assert_eq!(p.rt.sides_with(BoundaryTag::AntiperiodicLeft).len(), 4);
        assert_eq!(p.rt.sides_with(BoundaryTag::AntiperiodicRight).len(), 4);
        assert_eq!(p.st.sides_with(BoundaryTag::AntiperiodicLeft).len(), 5);
        assert_eq!(p.rt.sides_with(BoundaryTag::Airgap).len(), 3);
        assert_eq!(p.st.sides_with(BoundaryTag::Airgap).len(), 37);
    }

    #[test]
    fn airgap_points_on_circle() {
        let p = pole();
        let r_ag = p.model.airgap_radius;
        for d in [&p.rt, &p.st] {
            for (k, side) in d.sides_with(BoundaryTag::Airgap) {
                let c = d.patch(k).boundary_curve(side);
                for (t, _) in GaussLegendre::new(5).on_interval(0.0, 1.0) {
                    let x = c.eval(t).unwrap();
                    assert!((x[0].hypot(x[1]) / r_ag - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn total_area_is_annular_sector() {
        let p = pole();
        let m = &p.model;
        let area = |d: &MultiPatchDomain| {
            let s = glue_c0(d, uniform_spaces(d, 1, 1).unwrap()).unwrap();
            let all: Vec<usize> = (0..d.n_patches()).collect();
            integrate(d, &s, &all, QuadratureRule::Fixed(12), |q| q.jxw).unwrap()
        };
        let total = area(&p.rt) + area(&p.st);
        let exact = 0.5 * m.pole_pitch() * (m.stator_outer_radius.powi(2) - m.rotor_inner_radius.powi(2));
        assert!((total / exact - 1.0).abs() < 1e-8, "{total} vs {exact}");
        let magnet = {
            let s = glue_c0(&p.rt, uniform_spaces(&p.rt, 1, 1).unwrap()).unwrap();
            integrate(&p.rt, &s, &[1], QuadratureRule::Fixed(4), |q| q.jxw).unwrap()
        };
        assert!((magnet - m.magnet_width * m.magnet_height).abs() < 1e-15);
    }

    #[test]
    fn mirror_symmetric_about_mid_line() {
        let p = pole();
        let mid = p.model.pole_pitch() / 2.0;
        let (c, s) = ((2.0 * mid).cos(), (2.0 * mid).sin());
        let reflect = |x: [f64; 2]| [c * x[0] + s * x[1], s * x[0] - c * x[1]];
        for d in [&p.rt, &p.st] {
            let vertices: Vec<[f64; 2]> = d
                .patches()
                .iter()
                .flat_map(|q| {
                    [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)].map(|(u, v)| q.sample(u, v).point)
                })
                .collect();
            for v in &vertices {
                let r = reflect(*v);
                assert!(vertices.iter().any(|w| (w[0] - r[0]).hypot(w[1] - r[1]) < 1e-10));
            }
        }
    }

    #[test]
    fn antiperiodic_cuts_pair_up() {
        let p = pole();
        for d in [&p.rt, &p.st] {
            let s = glue_c0(d, uniform_spaces(d, 2, 2).unwrap()).unwrap();
            let s = s.apply_dirichlet(d).apply_antiperiodic(d, p.model.pole_pitch()).unwrap();
            assert!(s.n_dof() > 0);
        }
    }

    #[test]
    fn jacobians_are_positive() {
        let p = pole();
        check_jacobians(&p.rt, 10).unwrap();
        check_jacobians(&p.st, 4).unwrap();
    }

    #[test]
    fn magnet_field_magnitude() {
        let m = MachineModel::default();
        let h = magnet_excitation(&m);
        assert!((h[0].hypot(h[1]) - 4.987e5).abs() < 1e2);
        let zero = MachineModel {
            remanence: 0.0,
            ..m
        };
        assert_eq!(magnet_excitation(&zero), [0.0, 0.0]);
    }

    #[test]
    fn winding_bookkeeping() {
        let m = MachineModel::default();
        assert!(winding_excitation([0.0; 3], &m).iter().flatten().all(|&j| j == 0.0));
        let j = winding_excitation([1.0, 0.0, 0.0], &m);
        let mut turns = 0.0;
        for layer in 0..2 {
            for slot in 0..SLOTS_PER_POLE {
                let at = j[layer][slot] * m.half_slot_area(layer);
                assert!(at == 0.0 || (at.abs() - 12.0).abs() < 1e-9);
                turns += at;
            }
        }
        assert!((turns - 48.0).abs() < 1e-9);
    }

    #[test]
    fn config_round_trip_and_errors() {
        let m = MachineModel::from_toml_str(
            "[rotor]\ninner_radius = \"16 mm\"\ninner_opening = \"8.5 deg\"\n[materials]\nremanence = \"0.94 T\"\n",
        )
        .unwrap();
        assert_eq!(m, MachineModel::default());
        let bad = MachineModel::from_toml_str("[machine]\nairgap_radius = \"50 mm\"\n");
        assert!(matches!(bad, Err(Error::Config { field, .. }) if field == "machine.airgap_radius"));
        assert!(MachineModel::from_toml_str("[rotor]\nradius = 1.0\n").is_err());
        let wide = MachineModel::from_toml_str("[stator]\nslot_width = \"12 deg\"\n");
        assert!(wide.is_err());
    }

    #[test]
    fn region_labels_parse_back() {
        for r in [Region::Iron, Region::Magnet, Region::Air, Region::Coil { layer: 1, slot: 4 }] {
            assert_eq!(r.to_string().parse::<Region>().unwrap(), r);
        }
        assert!("coil-x".parse::<Region>().is_err());
        let p = pole();
        assert_eq!(p.rt.regions()[1], "magnet");
    }
}
