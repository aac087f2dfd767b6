//! TOML patch exchange format.
//!
//! ```toml
//! [[patch]]
//! degree_u = 1
//! degree_v = 2
//! knots_u = [0.0, 0.0, 1.0, 1.0]
//! knots_v = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]
//! control_points = [[1.0, 0.0], [2.0, 0.0], ...]   # u runs fastest
//! weights = [1.0, 1.0, ...]
//! region = "air"                                    # optional
//!
//! [[interface]]
//! patch_a = 0
//! side_a = "north"
//! patch_b = 1
//! side_b = "south"
//! reversed = false
//!
//! [[boundary]]
//! patch = 0
//! side = "west"
//! tag = "dirichlet"
//! ```
//!
//! Unknown keys are rejected so that typos surface as errors.

use serde::{Deserialize, Serialize};

use super::knots::KnotVector;
use super::patch::{NurbsPatch, Side};
use super::rational::Weights;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchRecord {
    pub degree_u: usize,
    pub degree_v: usize,
    pub knots_u: Vec<f64>,
    pub knots_v: Vec<f64>,
    pub control_points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjacencyRecord {
    pub patch_a: usize,
    pub side_a: Side,
    pub patch_b: usize,
    pub side_b: Side,
    pub reversed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryRecord {
    pub patch: usize,
    pub side: Side,
    pub tag: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchFile {
    #[serde(default)]
    pub patch: Vec<PatchRecord>,
    #[serde(default)]
    pub interface: Vec<AdjacencyRecord>,
    #[serde(default)]
    pub boundary: Vec<BoundaryRecord>,
}

impl PatchRecord {
    pub fn from_patch(p: &NurbsPatch, region: Option<String>) -> Self {
        PatchRecord {
            degree_u: p.knots_u().degree(),
            degree_v: p.knots_v().degree(),
            knots_u: p.knots_u().knots().to_vec(),
            knots_v: p.knots_v().knots().to_vec(),
            control_points: p.control_net().to_vec(),
            weights: p.weights().to_vec(),
            region,
        }
    }

    pub fn to_patch(&self) -> Result<NurbsPatch> {
        NurbsPatch::new(
            KnotVector::new(self.degree_u, self.knots_u.clone())?,
            KnotVector::new(self.degree_v, self.knots_v.clone())?,
            self.control_points.clone(),
            Weights::new(self.weights.clone())?,
        )
    }
}

impl PatchFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: PatchFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        for r in &file.interface {
            for p in [r.patch_a, r.patch_b] {
                if p >= file.patch.len() {
                    return Err(Error::Parse(format!("interface refers to missing patch {p}")));
                }
            }
        }
        for r in &file.boundary {
            if r.patch >= file.patch.len() {
                return Err(Error::Parse(format!(
                    "boundary record refers to missing patch {}",
                    r.patch
                )));
            }
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn patches(&self) -> Result<Vec<NurbsPatch>> {
        self.patch.iter().map(PatchRecord::to_patch).collect()
    }
}
