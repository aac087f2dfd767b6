//! Run configuration: TOML on disk, validated into SI values.
//!
//! ```toml
//! study = "emf"
//! degree = 2
//! levels = [4]
//! max_order = 15
//! speed = "1500 rpm"
//! n_alpha = 60
//!
//! [machine.materials]    # or: machine = "pmsm.toml"
//! remanence = "0.94 T"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use igahc::assembly::QuadratureRule;
use igahc::models::{Dimension, MachineModel, Quantity};
use igahc::mortar::{select_harmonics, Symmetry};
use igahc::substructuring::DnConfig;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Study {
    Verify,
    InfSup,
    Solve,
    Emf,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Verify => "verify",
            Study::InfSup => "infsup",
            Study::Solve => "solve",
            Study::Emf => "emf",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Verification,
    Machine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    Harmonic,
    Dn,
    Both,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDn {
    relax: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    study: Option<String>,
    model: Option<String>,
    machine: Option<toml::Value>,
    degree: Option<usize>,
    degrees: Option<Vec<usize>>,
    levels: Option<Vec<u32>>,
    max_order: Option<i32>,
    max_orders: Option<Vec<i32>>,
    symmetry: Option<String>,
    alpha: Option<Quantity>,
    coupling: Option<String>,
    dn: Option<RawDn>,
    quadrature: Option<String>,
    n_alpha: Option<usize>,
    speed: Option<Quantity>,
    currents: Option<[f64; 3]>,
    out: Option<PathBuf>,
}

/// Validated settings for one command.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: ModelKind,
    pub machine: MachineModel,
    pub degrees: Vec<usize>,
    pub levels: Vec<u32>,
    pub max_orders: Vec<i32>,
    pub alpha: f64,
    pub coupling: Coupling,
    pub dn: DnConfig,
    pub rule: QuadratureRule,
    pub n_alpha: usize,
    /// Mechanical angular speed in rad/s.
    pub speed: Option<f64>,
    pub currents: [f64; 3],
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn degree(&self) -> usize {
        self.degrees[0]
    }

    pub fn level(&self) -> u32 {
        self.levels[0]
    }

    pub fn max_order(&self) -> i32 {
        self.max_orders[0]
    }

    /// Read `path`, or use the defaults of `study` when no file is given.
    pub fn load(study: Study, path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Self::resolve(study, RawConfig::default(), None);
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(study, &text, path.parent())
    }

    /// Parse `text`; relative paths inside are taken from `base`.
    pub fn from_toml_str(study: Study, text: &str, base: Option<&Path>) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::config("config", e.message().to_string()))?;
        Self::resolve(study, raw, base)
    }

    fn resolve(study: Study, raw: RawConfig, base: Option<&Path>) -> Result<Self, CliError> {
        if let Some(s) = &raw.study {
            if s != study.name() {
                return Err(CliError::config("study", format!("file is for {s:?} but the command is {:?}", study.name())));
            }
        }
        let model = match raw.model.as_deref() {
            None if matches!(study, Study::Verify | Study::InfSup) => ModelKind::Verification,
            None => ModelKind::Machine,
            Some("verification") => ModelKind::Verification,
            Some("machine") => ModelKind::Machine,
            Some(other) => return Err(CliError::config("model", format!("expected \"verification\" or \"machine\", got {other:?}"))),
        };
        match (study, model) {
            (Study::Verify | Study::InfSup, ModelKind::Machine) => {
                return Err(CliError::config("model", format!("the {} study runs on the verification model", study.name())))
            }
            (Study::Emf, ModelKind::Verification) => {
                return Err(CliError::config("model", "the emf study needs the machine model"))
            }
            _ => {}
        }

        let machine = match raw.machine {
            None => MachineModel::default(),
            Some(toml::Value::String(p)) => {
                let p = base.map_or_else(|| PathBuf::from(&p), |b| b.join(&p));
                let text = fs::read_to_string(&p)
                    .map_err(|e| CliError::config("machine", format!("cannot read {}: {e}", p.display())))?;
                MachineModel::from_toml_str(&text)?
            }
            Some(v @ toml::Value::Table(_)) => MachineModel::from_toml_value(v)?,
            Some(_) => return Err(CliError::config("machine", "expected a file path or a table")),
        };

        let degrees = match (raw.degree, raw.degrees) {
            (Some(_), Some(_)) => return Err(CliError::config("degrees", "give either degree or degrees, not both")),
            (Some(p), None) => vec![p],
            (None, Some(d)) => d,
            (None, None) if study == Study::Verify => vec![1, 2, 3],
            (None, None) => vec![2],
        };
        if degrees.is_empty() {
            return Err(CliError::config("degrees", "must not be empty"));
        }
        if let Some(p) = degrees.iter().find(|&&p| !(1..=5).contains(&p)) {
            return Err(CliError::config("degrees", format!("degree {p} outside 1..=5")));
        }

        let levels = raw.levels.unwrap_or_else(|| match study {
            Study::Verify => vec![2, 3, 4, 5, 6],
            Study::InfSup => vec![2, 3, 4, 5],
            Study::Emf => vec![4],
            Study::Solve => vec![3],
        });
        if levels.is_empty() {
            return Err(CliError::config("levels", "must not be empty"));
        }
        let first = if model == ModelKind::Machine { 1 } else { 0 };
        if let Some(l) = levels.iter().find(|&&l| l < first || l > 8) {
            return Err(CliError::config("levels", format!("level {l} outside {first}..=8")));
        }
        if matches!(study, Study::Solve | Study::Emf) && levels.len() != 1 {
            return Err(CliError::config("levels", format!("the {} study takes exactly one level", study.name())));
        }
        if study != Study::Verify && degrees.len() != 1 {
            return Err(CliError::config("degrees", format!("the {} study takes exactly one degree", study.name())));
        }

        let (symmetry, pitch) = match model {
            ModelKind::Verification => (Symmetry::Periodic, std::f64::consts::TAU),
            ModelKind::Machine => (Symmetry::Antiperiodic, machine.pole_pitch()),
        };
        if let Some(s) = raw.symmetry.as_deref() {
            let wanted = match s {
                "periodic" => Symmetry::Periodic,
                "antiperiodic" | "anti-periodic" => Symmetry::Antiperiodic,
                other => return Err(CliError::config("symmetry", format!("expected \"periodic\" or \"antiperiodic\", got {other:?}"))),
            };
            if wanted != symmetry {
                return Err(CliError::config("symmetry", format!("the {model:?} model fixes {symmetry:?} harmonics")));
            }
        }
        let max_orders = match (raw.max_order, raw.max_orders) {
            (Some(_), Some(_)) => return Err(CliError::config("max_orders", "give either max_order or max_orders, not both")),
            (Some(m), None) => vec![m],
            (None, Some(m)) => m,
            (None, None) => match (study, model) {
                (Study::InfSup, _) => vec![0, 1, 2, 3, 4, 5],
                (_, ModelKind::Verification) => vec![3],
                (_, ModelKind::Machine) => vec![15],
            },
        };
        if max_orders.is_empty() {
            return Err(CliError::config("max_orders", "must not be empty"));
        }
        if study != Study::InfSup && max_orders.len() != 1 {
            return Err(CliError::config("max_orders", "only the infsup study sweeps several orders"));
        }
        for &m in &max_orders {
            if m < 0 {
                return Err(CliError::config("max_order", format!("{m} is negative")));
            }
            select_harmonics(symmetry, pitch, m)
                .map_err(|e| CliError::config("max_order", format!("empty harmonic set: {e}")))?;
        }

        let alpha = match &raw.alpha {
            Some(q) => q.to_si("alpha", Dimension::Angle)?,
            None => 0.0,
        };
        if model == ModelKind::Verification && alpha != 0.0 {
            return Err(CliError::config("alpha", "the verification model is solved unrotated"));
        }

        let coupling = match raw.coupling.as_deref() {
            None | Some("harmonic") => Coupling::Harmonic,
            Some("dn") => Coupling::Dn,
            Some("both") => Coupling::Both,
            Some(other) => return Err(CliError::config("coupling", format!("expected \"harmonic\", \"dn\" or \"both\", got {other:?}"))),
        };
        if matches!(study, Study::Verify | Study::InfSup) && coupling != Coupling::Harmonic {
            return Err(CliError::config("coupling", format!("the {} study uses harmonic coupling", study.name())));
        }
        if study == Study::Emf && coupling == Coupling::Both {
            return Err(CliError::config("coupling", "the emf study runs one method at a time"));
        }

        let d = raw.dn.unwrap_or_default();
        let defaults = DnConfig::default();
        let dn = DnConfig {
            relax: d.relax.unwrap_or(defaults.relax),
            tol: d.tol.unwrap_or(defaults.tol),
            max_iter: d.max_iter.unwrap_or(defaults.max_iter),
        };
        dn.validate()?;

        let rule = match raw.quadrature.as_deref() {
            None => match study {
                Study::Verify | Study::InfSup => QuadratureRule::Extra(1),
                _ => QuadratureRule::Default,
            },
            Some(s) => parse_rule(s)?,
        };

        let n_alpha = raw.n_alpha.unwrap_or(60);
        if n_alpha < 4 {
            return Err(CliError::config("n_alpha", format!("{n_alpha} angles are too few, need at least 4")));
        }
        let speed = raw.speed.as_ref().map(|q| q.to_si("speed", Dimension::AngularSpeed)).transpose()?;
        match speed {
            None if study == Study::Emf => return Err(CliError::config("speed", "the emf study needs the nominal speed")),
            Some(w) if !(w > 0.0) => return Err(CliError::config("speed", format!("must be positive, got {w} rad/s"))),
            _ => {}
        }
        let currents = raw.currents.unwrap_or([0.0; 3]);
        if currents.iter().any(|c| !c.is_finite()) {
            return Err(CliError::config("currents", "must be finite"));
        }

        Ok(RunConfig {
            model,
            machine,
            degrees,
            levels,
            max_orders,
            alpha,
            coupling,
            dn,
            rule,
            n_alpha,
            speed,
            currents,
            out: raw.out.map(|p| base.map_or_else(|| p.clone(), |b| b.join(&p))),
        })
    }
}

/// `"default"`, `"extra:N"` or `"fixed:N"`.
fn parse_rule(s: &str) -> Result<QuadratureRule, CliError> {
    let bad = || CliError::config("quadrature", format!("expected \"default\", \"extra:N\" or \"fixed:N\", got {s:?}"));
    match s.split_once(':') {
        None if s == "default" => Ok(QuadratureRule::Default),
        Some(("extra", n)) => n.parse().map(QuadratureRule::Extra).map_err(|_| bad()),
        Some(("fixed", n)) => match n.parse() {
            Ok(0) | Err(_) => Err(bad()),
            Ok(n) => Ok(QuadratureRule::Fixed(n)),
        },
        _ => Err(bad()),
    }
}
