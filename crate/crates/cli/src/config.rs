//! Run configuration: per-command defaults, an optional JSON file and
//! command-line flags, merged in that order of increasing priority.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use vbshift::{LdParam, SidebandId};

use crate::error::CliError;
use crate::units::{lamb_dicke, parse_mass, Frequency};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Shift,
    Sweep,
    ScanEta,
    Sidebands,
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Dimensionless,
    Physical,
}

/// Every optional setting, as read from a JSON file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub trap_freq: Option<Frequency>,
    pub rabi: Option<Frequency>,
    pub eta: Option<f64>,
    /// Laser wavenumber along the trap axis, 1/m.
    pub k_laser: Option<f64>,
    /// Ion mass: kg, or with a `u` suffix.
    pub mass: Option<String>,
    pub ng: Option<usize>,
    pub ne: Option<usize>,
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
    pub points: Option<usize>,
    pub eta_min: Option<f64>,
    pub eta_max: Option<f64>,
    pub nmax: Option<usize>,
    pub kmax: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub bare: Option<bool>,
    pub units: Option<Units>,
    pub ld: Option<bool>,
    pub levels: Option<usize>,
    pub orders: Option<usize>,
    pub tolerance_scale: Option<f64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_json_file(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// `self` overridden by every field set in `flags`. A Lamb-Dicke
    /// parameter given one way on the command line discards the other way
    /// from the file.
    pub fn overlaid_with(mut self, flags: &RunConfig) -> Self {
        if flags.eta.is_some() {
            self.k_laser = None;
            self.mass = None;
        }
        if flags.k_laser.is_some() || flags.mass.is_some() {
            self.eta = None;
        }
        overlay!(self, flags;
            trap_freq, rabi, eta, k_laser, mass, ng, ne, delta_min, delta_max, points,
            eta_min, eta_max, nmax, kmax, format, out, bare, units, ld, levels, orders, tolerance_scale);
        self
    }
}

const RIEBE_TRAP: Frequency = Frequency::Angular(std::f64::consts::TAU * 1.36e6);
const RIEBE_RABI: Frequency = Frequency::Angular(std::f64::consts::TAU * 53e3);
const RIEBE_ETA: f64 = 0.083;

/// Defaults that reproduce the figure each command generates data for.
pub fn defaults(command: Command) -> RunConfig {
    let mut c = RunConfig { format: Some(Format::Csv), nmax: None, kmax: None, ..Default::default() };
    match command {
        Command::Shift | Command::Sidebands => {
            c.trap_freq = Some(RIEBE_TRAP);
            c.rabi = Some(RIEBE_RABI);
            c.eta = Some(RIEBE_ETA);
            c.ng = Some(0);
            c.ne = Some(1);
            c.orders = Some(3);
        }
        Command::Sweep => {
            c.rabi = Some(Frequency::Dimensionless(0.3));
            c.eta = Some(0.4);
            c.delta_min = Some(-2.5);
            c.delta_max = Some(2.5);
            c.points = Some(501);
            c.levels = Some(3);
        }
        Command::ScanEta => {
            c.rabi = Some(Frequency::Dimensionless(0.01));
            c.eta_min = Some(0.0);
            c.eta_max = Some(0.3);
            c.points = Some(31);
            c.ng = Some(1);
            c.ne = Some(0);
        }
        Command::Check => {
            c.tolerance_scale = Some(1.0);
        }
    }
    c
}

/// Fully validated settings for one run. Frequencies are in units of the
/// trap frequency; `trap_angular` carries the physical scale when known.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Resolved {
    pub command: Command,
    pub trap_freq: Option<Frequency>,
    #[serde(skip)]
    pub trap_angular: Option<f64>,
    pub rabi_ratio: f64,
    pub eta: f64,
    #[serde(skip)]
    pub ld: LdParam,
    pub ng: usize,
    pub ne: usize,
    pub delta_min: f64,
    pub delta_max: f64,
    pub points: usize,
    pub eta_min: f64,
    pub eta_max: f64,
    pub nmax: Option<usize>,
    pub kmax: Option<usize>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub bare: bool,
    pub units: Units,
    pub require_ld: bool,
    pub levels: usize,
    pub orders: usize,
    pub tolerance_scale: f64,
}

impl Resolved {
    pub fn sideband(&self) -> SidebandId {
        SidebandId::new(self.ng, self.ne)
    }

    pub fn physical(&self) -> bool {
        self.units == Units::Physical
    }

    /// Dimensionless frequency to Hz (ordinary frequency).
    pub fn to_hz(&self, x: f64) -> Option<f64> {
        self.trap_angular.map(|w| x * w / std::f64::consts::TAU)
    }
}

fn finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("--{name} must be finite, got {v}")))
    }
}

/// Merge defaults, file and flags, then validate.
pub fn resolve(command: Command, file: Option<RunConfig>, flags: &RunConfig) -> Result<Resolved, CliError> {
    let user = file.unwrap_or_default().overlaid_with(flags);
    let mut merged = defaults(command);
    if user.eta.is_some() || user.k_laser.is_some() || user.mass.is_some() {
        merged.eta = None;
    }
    let merged = merged.overlaid_with(&user);

    let trap_angular = match merged.trap_freq {
        None => None,
        Some(Frequency::Angular(w)) if w > 0.0 => Some(w),
        Some(Frequency::Angular(w)) => {
            return Err(CliError::Config(format!("trap frequency must be positive, got {w} rad/s")))
        }
        Some(Frequency::Dimensionless(1.0)) => None,
        Some(Frequency::Dimensionless(v)) => {
            return Err(CliError::Config(format!(
                "a bare trap frequency is the unit of frequency and must be 1, got {v}; give a unit such as 1.36MHz"
            )))
        }
    };

    let rabi_ratio = match merged.rabi.unwrap_or(Frequency::Dimensionless(0.01)) {
        Frequency::Dimensionless(v) => v,
        Frequency::Angular(w) => {
            let trap = trap_angular.ok_or_else(|| {
                CliError::Config("a Rabi frequency with units needs --trap-freq with units".into())
            })?;
            w / trap
        }
    };
    if !(rabi_ratio.is_finite() && rabi_ratio >= 0.0) {
        return Err(CliError::Config(format!("Rabi frequency must be >= 0, got {rabi_ratio}")));
    }

    let eta = match (merged.eta, merged.k_laser, merged.mass.as_deref()) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(CliError::Config("give either --eta or --k-laser with --mass, not both".into()))
        }
        (Some(e), None, None) => e,
        (None, Some(k), Some(m)) => {
            let trap = trap_angular.ok_or_else(|| {
                CliError::Config("deriving eta from --k-laser and --mass needs --trap-freq with units".into())
            })?;
            lamb_dicke(finite("k-laser", k)?, parse_mass(m)?, trap)
        }
        (None, Some(_), None) | (None, None, Some(_)) => {
            return Err(CliError::Config("--k-laser and --mass must be given together".into()))
        }
        (None, None, None) => 0.1,
    };
    let ld = LdParam::new(eta).map_err(|e| CliError::Config(e.to_string()))?;

    let units = match merged.units {
        Some(Units::Physical) if trap_angular.is_none() => {
            return Err(CliError::Config("--units physical needs --trap-freq with units".into()))
        }
        Some(u) => u,
        None if trap_angular.is_some() => Units::Physical,
        None => Units::Dimensionless,
    };

    let delta_min = finite("delta-min", merged.delta_min.unwrap_or(-2.5))?;
    let delta_max = finite("delta-max", merged.delta_max.unwrap_or(2.5))?;
    let eta_min = finite("eta-min", merged.eta_min.unwrap_or(0.0))?;
    let eta_max = finite("eta-max", merged.eta_max.unwrap_or(0.3))?;
    let points = merged.points.unwrap_or(101);
    if matches!(command, Command::Sweep) && delta_max <= delta_min {
        return Err(CliError::Config(format!("--delta-max ({delta_max}) must exceed --delta-min ({delta_min})")));
    }
    if matches!(command, Command::ScanEta) && (eta_min < 0.0 || eta_max < eta_min) {
        return Err(CliError::Config(format!("need 0 <= --eta-min <= --eta-max, got [{eta_min}, {eta_max}]")));
    }
    if matches!(command, Command::Sweep | Command::ScanEta) && points < 2 {
        return Err(CliError::Config(format!("--points must be at least 2, got {points}")));
    }
    let tolerance_scale = merged.tolerance_scale.unwrap_or(1.0);
    if !(tolerance_scale.is_finite() && tolerance_scale > 0.0) {
        return Err(CliError::Config(format!("--tolerance-scale must be > 0, got {tolerance_scale}")));
    }

    Ok(Resolved {
        command,
        trap_freq: trap_angular.map(Frequency::Angular),
        trap_angular,
        rabi_ratio,
        eta,
        ld,
        ng: merged.ng.unwrap_or(0),
        ne: merged.ne.unwrap_or(1),
        delta_min,
        delta_max,
        points,
        eta_min,
        eta_max,
        nmax: merged.nmax,
        kmax: merged.kmax,
        format: merged.format.unwrap_or_default(),
        out: merged.out,
        bare: merged.bare.unwrap_or(false),
        units,
        require_ld: merged.ld.unwrap_or(false),
        levels: merged.levels.unwrap_or(3),
        orders: merged.orders.unwrap_or(3),
        tolerance_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_defaults_are_riebe() {
        let r = resolve(Command::Shift, None, &RunConfig::default()).unwrap();
        assert!((r.rabi_ratio - 53.0 / 1360.0).abs() < 1e-15);
        assert_eq!(r.eta, 0.083);
        assert_eq!(r.units, Units::Physical);
        assert_eq!(r.sideband(), SidebandId::new(0, 1));
    }

    #[test]
    fn flags_win_over_file() {
        let file = RunConfig { eta: Some(0.2), ng: Some(2), ..Default::default() };
        let flags = RunConfig { eta: Some(0.05), ..Default::default() };
        let r = resolve(Command::ScanEta, Some(file), &flags).unwrap();
        assert_eq!(r.eta, 0.05);
        assert_eq!(r.ng, 2);
    }

    #[test]
    fn eta_xor_k_laser() {
        let both = RunConfig { eta: Some(0.1), k_laser: Some(8.6e6), mass: Some("40u".into()), ..Default::default() };
        assert!(matches!(resolve(Command::Shift, None, &both), Err(CliError::Config(_))));

        let file = RunConfig { eta: Some(0.3), ..Default::default() };
        let flags = RunConfig { k_laser: Some(std::f64::consts::TAU / 729e-9), mass: Some("40u".into()), ..Default::default() };
        let r = resolve(Command::Shift, Some(file), &flags).unwrap();
        assert!((r.eta - 0.083).abs() < 0.01);

        let lonely = RunConfig { k_laser: Some(1.0), ..Default::default() };
        assert!(resolve(Command::Shift, None, &lonely).is_err());
    }

    #[test]
    fn rejects_negative_eta_and_bad_units() {
        let neg = RunConfig { eta: Some(-0.1), ..Default::default() };
        assert!(matches!(resolve(Command::Check, None, &neg), Err(CliError::Config(_))));
        let phys = RunConfig { units: Some(Units::Physical), ..Default::default() };
        assert!(resolve(Command::ScanEta, None, &phys).is_err());
        let rabi_hz = RunConfig { rabi: Some("2pi*53kHz".parse().unwrap()), ..Default::default() };
        assert!(resolve(Command::ScanEta, None, &rabi_hz).is_err());
    }

    #[test]
    fn json_config_parses() {
        let text = r#"{"trap-freq": "2pi*1.36MHz", "rabi": "2pi*53kHz", "eta": 0.083, "ng": 1, "ne": 0, "format": "json"}"#;
        let c: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.ng, Some(1));
        assert_eq!(c.format, Some(Format::Json));
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
