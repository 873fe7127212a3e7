//! Frequency strings.
//!
//! Accepted forms:
//!
//! * `2pi*1.36MHz` (also `2π*`): angular frequency `2 pi x 1.36 MHz`;
//! * `1.36MHz`: ordinary frequency, stored as the same angular value;
//! * `8.5e6rad/s` (also `krad/s`, `Mrad/s`): angular frequency as is;
//! * `0.01`: dimensionless, in units of the trap frequency.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

/// Planck constant over 2 pi, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frequency {
    /// Ratio to the trap frequency.
    Dimensionless(f64),
    /// Angular frequency in rad/s.
    Angular(f64),
}

impl Frequency {
    pub fn angular(&self) -> Option<f64> {
        match *self {
            Frequency::Angular(w) => Some(w),
            Frequency::Dimensionless(_) => None,
        }
    }
}

fn hz_scale(unit: &str) -> Option<f64> {
    match unit {
        "Hz" | "hz" => Some(1.0),
        "kHz" | "khz" => Some(1e3),
        "MHz" | "mhz" => Some(1e6),
        "GHz" | "ghz" => Some(1e9),
        _ => None,
    }
}

fn rad_scale(unit: &str) -> Option<f64> {
    match unit {
        "rad/s" => Some(1.0),
        "krad/s" => Some(1e3),
        "Mrad/s" => Some(1e6),
        "Grad/s" => Some(1e9),
        _ => None,
    }
}

/// Split `1.36MHz` into `(1.36, "MHz")`.
fn split_number(s: &str) -> Result<(f64, &str), CliError> {
    let cut = s
        .char_indices()
        .find(|&(i, c)| {
            c.is_ascii_alphabetic() && !((c == 'e' || c == 'E') && s[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+'))
        })
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(cut);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse a number from '{s}'")))?;
    if !value.is_finite() {
        return Err(CliError::Config(format!("frequency '{s}' is not finite")));
    }
    Ok((value, unit.trim()))
}

impl FromStr for Frequency {
    type Err = CliError;

    fn from_str(raw: &str) -> Result<Self, CliError> {
        let s = raw.trim();
        let angular_prefix = ["2pi*", "2π*", "2*pi*", "2PI*"].iter().find_map(|p| s.strip_prefix(p));
        if let Some(rest) = angular_prefix {
            let (value, unit) = split_number(rest)?;
            let scale = hz_scale(unit).ok_or_else(|| {
                CliError::Config(format!("'{raw}': expected a Hz unit after '2pi*', got '{unit}'"))
            })?;
            return Ok(Frequency::Angular(TAU * (value * scale)));
        }
        let (value, unit) = split_number(s)?;
        if unit.is_empty() {
            return Ok(Frequency::Dimensionless(value));
        }
        if let Some(scale) = hz_scale(unit) {
            return Ok(Frequency::Angular(TAU * (value * scale)));
        }
        if let Some(scale) = rad_scale(unit) {
            return Ok(Frequency::Angular(value * scale));
        }
        Err(CliError::Config(format!("'{raw}': unknown frequency unit '{unit}'")))
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Frequency::Dimensionless(v) => write!(f, "{v:?}"),
            Frequency::Angular(w) => write!(f, "2pi*{:?}Hz", w / TAU),
        }
    }
}

impl Serialize for Frequency {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Frequency::Dimensionless(v) => s.serialize_f64(v),
            Frequency::Angular(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Frequency {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Frequency::Dimensionless(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Mass in kg from `6.64e-26`, `6.64e-26kg` or `40u` / `40amu`.
pub fn parse_mass(raw: &str) -> Result<f64, CliError> {
    let (value, unit) = split_number(raw.trim())?;
    let kg = match unit {
        "" | "kg" => value,
        "u" | "amu" | "Da" => value * AMU,
        other => return Err(CliError::Config(format!("unknown mass unit '{other}'"))),
    };
    if kg <= 0.0 {
        return Err(CliError::Config(format!("mass must be positive, got '{raw}'")));
    }
    Ok(kg)
}

/// `eta = k_L sqrt(hbar / (2 m omega_T))`.
pub fn lamb_dicke(k_laser: f64, mass_kg: f64, omega_t: f64) -> f64 {
    k_laser * (HBAR / (2.0 * mass_kg * omega_t)).sqrt()
}
