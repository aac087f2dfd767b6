//! Quantities with unit suffixes, as written in configuration files.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical dimension expected for a configuration value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Angle,
    FluxDensity,
    Conductivity,
    AngularSpeed,
    Dimensionless,
}

impl Dimension {
    fn factor(self, unit: &str) -> Option<f64> {
        use std::f64::consts::PI;
        let f = match (self, unit) {
            (Dimension::Length, "m") => 1.0,
            (Dimension::Length, "cm") => 1e-2,
            (Dimension::Length, "mm") => 1e-3,
            (Dimension::Angle, "rad") => 1.0,
            (Dimension::Angle, "deg" | "°") => PI / 180.0,
            (Dimension::FluxDensity, "T") => 1.0,
            (Dimension::FluxDensity, "mT") => 1e-3,
            (Dimension::Conductivity, "S/m") => 1.0,
            (Dimension::Conductivity, "MS/m") => 1e6,
            (Dimension::AngularSpeed, "rad/s") => 1.0,
            (Dimension::AngularSpeed, "rpm" | "1/min") => 2.0 * PI / 60.0,
            (Dimension::Dimensionless, "") => 1.0,
            _ => return None,
        };
        Some(f)
    }

    /// Unit assumed for bare numbers.
    fn si_unit(self) -> &'static str {
        match self {
            Dimension::Length => "m",
            Dimension::Angle => "rad",
            Dimension::FluxDensity => "T",
            Dimension::Conductivity => "S/m",
            Dimension::AngularSpeed => "rad/s",
            Dimension::Dimensionless => "",
        }
    }
}

/// A number, or a string such as `"16 mm"` or `"8.5 deg"`. Bare numbers are SI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    pub fn to_si(&self, field: &str, dim: Dimension) -> Result<f64> {
        let (value, unit) = match self {
            Quantity::Number(v) => (*v, dim.si_unit().to_string()),
            Quantity::Text(s) => split_unit(s).ok_or_else(|| Error::Config {
                field: field.to_string(),
                message: format!("cannot read a number from {s:?}"),
            })?,
        };
        let f = dim.factor(&unit).ok_or_else(|| Error::Config {
            field: field.to_string(),
            message: format!("unit {unit:?} does not fit a {dim:?} value"),
        })?;
        if !value.is_finite() {
            return Err(Error::Config {
                field: field.to_string(),
                message: "value is not finite".into(),
            });
        }
        Ok(value * f)
    }
}

fn split_unit(s: &str) -> Option<(f64, String)> {
    let s = s.trim();
    let end = s
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit() || matches!(c, '.' | '+' | '-') || (matches!(c, 'e' | 'E') && i > 0 && {
                let rest = &s[i + 1..];
                rest.starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+')
            }))
        })
        .map_or(s.len(), |(i, _)| i);
    let value = s[..end].parse().ok()?;
    Some((value, s[end..].trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        let q = |s: &str| Quantity::Text(s.into());
        assert!((q("16 mm").to_si("r", Dimension::Length).unwrap() - 0.016).abs() < 1e-15);
        assert!((q("8.5 deg").to_si("a", Dimension::Angle).unwrap() - 8.5f64.to_radians()).abs() < 1e-15);
        assert!((q("0.94 T").to_si("b", Dimension::FluxDensity).unwrap() - 0.94).abs() < 1e-15);
        assert!((q("1.2e-3 m").to_si("l", Dimension::Length).unwrap() - 1.2e-3).abs() < 1e-18);
        assert!((q("3000 rpm").to_si("w", Dimension::AngularSpeed).unwrap() - 100.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(Quantity::Number(0.1).to_si("l", Dimension::Length).unwrap(), 0.1);
    }

    #[test]
    fn rejects_wrong_units() {
        let e = Quantity::Text("5 deg".into()).to_si("rotor.inner_radius", Dimension::Length);
        assert!(matches!(e, Err(Error::Config { field, .. }) if field == "rotor.inner_radius"));
        assert!(Quantity::Text("mm".into()).to_si("x", Dimension::Length).is_err());
    }
}
