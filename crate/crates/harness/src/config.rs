//! Sweep configuration read from TOML.
//!
//! Every key is optional; a missing key takes its default. Angles are in
//! degrees, lengths in meters, powers in dBm.

use std::path::Path;

use mmwave_peb::channel::{EnvironmentConfig, EnvironmentLayout, LinkDirection, ScenarioKind};
use mmwave_peb::geometry::Orientation;
use mmwave_peb::signal::{PulseSpec, Sector, WeffConvention};
use mmwave_peb::SPEED_OF_LIGHT;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config value `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Direction {
    #[serde(rename = "ul")]
    Uplink,
    #[default]
    #[serde(rename = "dl")]
    Downlink,
}

impl Direction {
    pub fn link(self) -> LinkDirection {
        match self {
            Direction::Uplink => LinkDirection::Uplink,
            Direction::Downlink => LinkDirection::Downlink,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::Uplink => "ul",
            Direction::Downlink => "dl",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ul" | "uplink" => Ok(Direction::Uplink),
            "dl" | "downlink" => Ok(Direction::Downlink),
            other => Err(format!("unknown direction `{other}` (expected ul or dl)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Axis {
    #[default]
    #[serde(rename = "none")]
    None,
    #[serde(rename = "n_b")]
    Beams,
    #[serde(rename = "n_r")]
    ReceiveElements,
    #[serde(rename = "n_t")]
    TransmitElements,
    /// Value in degrees, applied to both orientation angles.
    #[serde(rename = "orientation")]
    Orientation,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::None => "none",
            Axis::Beams => "n_b",
            Axis::ReceiveElements => "n_r",
            Axis::TransmitElements => "n_t",
            Axis::Orientation => "orientation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Convention {
    #[serde(rename = "nominal")]
    Nominal,
    #[default]
    #[serde(rename = "paper")]
    Stretched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub es_ts_dbm: f64,
    pub n0_dbm_hz: f64,
    pub pilots: usize,
    /// Elements of the square BS array.
    pub n_bs: usize,
    /// Elements of the square UE array.
    pub n_ue: usize,
    pub spacing_wavelengths: f64,
    pub n_beams: usize,
    pub weff_convention: Convention,
    /// Optional sampled PSD as `[frequency_hz, density]` pairs.
    pub psd: Option<Vec<[f64; 2]>>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 38e9,
            bandwidth_hz: 125e6,
            es_ts_dbm: 0.0,
            n0_dbm_hz: -170.0,
            pilots: 16,
            n_bs: 144,
            n_ue: 144,
            spacing_wavelengths: 0.5,
            n_beams: 25,
            weff_convention: Convention::Stretched,
            psd: None,
        }
    }
}

impl SystemConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    pub fn pulse(&self) -> Result<PulseSpec, ConfigError> {
        let convention = match self.weff_convention {
            Convention::Nominal => WeffConvention::Nominal,
            Convention::Stretched => WeffConvention::Paper,
        };
        let p = match &self.psd {
            None => PulseSpec::ideal_sinc(self.bandwidth_hz),
            Some(s) => PulseSpec::sampled(self.bandwidth_hz, s.iter().map(|x| (x[0], x[1])).collect())
                .map_err(|e| invalid("system.psd", e.to_string()))?,
        };
        let p = p.with_convention(convention);
        p.validate().map_err(|e| invalid("system.psd", e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrientationConfig {
    pub theta0_deg: f64,
    pub phi0_deg: f64,
}

impl Default for OrientationConfig {
    fn default() -> Self {
        Self {
            theta0_deg: 0.0,
            phi0_deg: 0.0,
        }
    }
}

impl OrientationConfig {
    pub fn orientation(&self) -> Orientation {
        Orientation::from_degrees(self.theta0_deg, self.phi0_deg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectorConfig {
    pub radius: f64,
    pub height: f64,
    pub span_deg: f64,
    pub center_azimuth_deg: f64,
    pub min_range: f64,
}

impl Default for SectorConfig {
    fn default() -> Self {
        let s = Sector::default();
        Self {
            radius: s.radius,
            height: s.height,
            span_deg: s.span.to_degrees(),
            center_azimuth_deg: s.center_azimuth.to_degrees(),
            min_range: s.min_range,
        }
    }
}

impl SectorConfig {
    pub fn sector(&self) -> Sector {
        Sector {
            radius: self.radius,
            height: self.height,
            span: self.span_deg.to_radians(),
            center_azimuth: self.center_azimuth_deg.to_radians(),
            min_range: self.min_range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub radial_steps: usize,
    pub azimuth_steps: usize,
    /// Explicit UE positions; when present they replace the sector grid.
    pub points: Option<Vec<[f64; 3]>>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            radial_steps: 50,
            azimuth_steps: 60,
            points: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSection {
    pub n_reflectors: usize,
    pub reflector_offset: f64,
    pub reflector_top: f64,
    pub n_scatterers: usize,
    pub sigma_rcs: f64,
    pub gamma_r: f64,
    pub power_threshold: f64,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        let l = EnvironmentLayout::default();
        let e = EnvironmentConfig::default();
        Self {
            n_reflectors: l.n_reflectors,
            reflector_offset: l.reflector_offset,
            reflector_top: l.reflector_top,
            n_scatterers: l.n_scatterers,
            sigma_rcs: e.sigma_rcs,
            gamma_r: e.gamma_r,
            power_threshold: e.power_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub seed: u64,
    pub direction: Direction,
    pub scenario: String,
    pub system: SystemConfig,
    pub orientation: OrientationConfig,
    pub sector: SectorConfig,
    pub grid: GridConfig,
    pub environment: EnvironmentSection,
    pub sweep: SweepSection,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            direction: Direction::Downlink,
            scenario: "los".into(),
            system: SystemConfig::default(),
            orientation: OrientationConfig::default(),
            sector: SectorConfig::default(),
            grid: GridConfig::default(),
            environment: EnvironmentSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

fn is_square(n: usize) -> bool {
    let r = (n as f64).sqrt().round() as usize;
    r * r == n
}

impl SweepConfig {
    pub fn scenario_kind(&self) -> Result<ScenarioKind, ConfigError> {
        self.scenario
            .parse()
            .map_err(|e: mmwave_peb::Error| invalid("scenario", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.system;
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(key, format!("must be positive, got {v}")))
            }
        };
        positive("system.frequency_hz", s.frequency_hz)?;
        positive("system.bandwidth_hz", s.bandwidth_hz)?;
        positive("system.spacing_wavelengths", s.spacing_wavelengths)?;
        for (key, v) in [("system.es_ts_dbm", s.es_ts_dbm), ("system.n0_dbm_hz", s.n0_dbm_hz)] {
            if !v.is_finite() {
                return Err(invalid(key, "must be finite"));
            }
        }
        if s.pilots == 0 {
            return Err(invalid("system.pilots", "must be at least 1"));
        }
        if s.n_beams == 0 {
            return Err(invalid("system.n_beams", "must be at least 1"));
        }
        for (key, n) in [("system.n_bs", s.n_bs), ("system.n_ue", s.n_ue)] {
            if n == 0 || !is_square(n) {
                return Err(invalid(key, format!("square array needs a perfect square, got {n}")));
            }
        }
        s.pulse()?;
        self.scenario_kind()?;
        self.sector
            .sector()
            .validate()
            .map_err(|e| invalid("sector", e.to_string()))?;
        match &self.grid.points {
            Some(p) if p.is_empty() => return Err(invalid("grid.points", "empty point list")),
            Some(p) => {
                if p.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(invalid("grid.points", "non-finite coordinate"));
                }
            }
            None => {
                if self.grid.radial_steps == 0 || self.grid.azimuth_steps == 0 {
                    return Err(invalid("grid", "grid must be non-empty"));
                }
            }
        }
        self.environment_config(0).map(|_| ())?;
        let v = &self.sweep.values;
        if v.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("sweep.values", "values must be strictly increasing"));
        }
        if self.sweep.axis != Axis::None && v.is_empty() {
            return Err(invalid("sweep.values", "axis needs at least one value"));
        }
        match self.sweep.axis {
            Axis::Beams | Axis::ReceiveElements | Axis::TransmitElements => {
                for x in v {
                    if !(*x >= 1.0) || x.fract() != 0.0 {
                        return Err(invalid("sweep.values", format!("{x} is not a positive integer")));
                    }
                    if self.sweep.axis != Axis::Beams && !is_square(*x as usize) {
                        return Err(invalid("sweep.values", format!("{x} is not a perfect square")));
                    }
                }
            }
            Axis::Orientation => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(invalid("sweep.values", "non-finite orientation"));
                }
            }
            Axis::None => {}
        }
        Ok(())
    }

    pub fn layout(&self) -> EnvironmentLayout {
        EnvironmentLayout {
            n_reflectors: self.environment.n_reflectors,
            reflector_offset: self.environment.reflector_offset,
            reflector_top: self.environment.reflector_top,
            n_scatterers: self.environment.n_scatterers,
        }
    }

    /// Generated environment reduced to the configured scenario kind.
    pub fn environment_config(&self, seed: u64) -> Result<EnvironmentConfig, ConfigError> {
        let kind = self.scenario_kind()?;
        let mut env = EnvironmentConfig::generate(&self.sector.sector(), &self.layout(), seed)
            .map_err(|e| invalid("environment", e.to_string()))?;
        env.sigma_rcs = self.environment.sigma_rcs;
        env.gamma_r = self.environment.gamma_r;
        env.power_threshold = self.environment.power_threshold;
        env.validate().map_err(|e| invalid("environment", e.to_string()))?;
        Ok(env.for_kind(kind))
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).unwrap_or_default();
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Parses and validates a TOML config; an empty text gives the defaults.
pub fn parse_config(text: &str) -> Result<SweepConfig, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse {
        path: String::from("."),
        message: e.to_string(),
    })?;
    let cfg: SweepConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SweepConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, SweepConfig::default());
        assert_eq!(c.system.frequency_hz, 38e9);
        assert_eq!(c.system.bandwidth_hz, 125e6);
        assert_eq!(c.system.es_ts_dbm, 0.0);
        assert_eq!(c.system.n0_dbm_hz, -170.0);
        assert_eq!(c.system.pilots, 16);
        assert_eq!((c.system.n_bs, c.system.n_ue, c.system.n_beams), (144, 144, 25));
        assert_eq!(c.sector.height, 10.0);
        assert_eq!(c.sector.radius, 50.0);
        assert_eq!(c.environment.sigma_rcs, 50.0);
        assert_eq!(c.environment.gamma_r, 0.7);
        assert_eq!(c.environment.power_threshold, 0.1);
        assert_eq!(c.direction, Direction::Downlink);
    }

    #[test]
    fn overrides() {
        let c = parse_config("[system]\nn_beams = 16\n").unwrap();
        assert_eq!(c.system.n_beams, 16);
        let c = parse_config("direction = \"ul\"\nscenario = \"los+c\"\n[sweep]\naxis = \"n_r\"\nvalues = [16, 36]\n")
            .unwrap();
        assert_eq!(c.direction, Direction::Uplink);
        assert_eq!(c.sweep.axis, Axis::ReceiveElements);
    }

    #[test]
    fn errors_name_the_key() {
        let e = parse_config("[system]\nn_beams = \"many\"\n").unwrap_err().to_string();
        assert!(e.contains("system.n_beams"), "{e}");
        let e = parse_config("[system]\nbogus = 1\n").unwrap_err().to_string();
        assert!(e.contains("bogus"), "{e}");
        let e = parse_config("[grid]\nradial_steps = 0\n").unwrap_err().to_string();
        assert!(e.contains("grid"), "{e}");
        let e = parse_config("[sweep]\naxis = \"n_b\"\nvalues = [25, 16]\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("sweep.values"), "{e}");
        let e = parse_config("[system]\nn_bs = 10\n").unwrap_err().to_string();
        assert!(e.contains("system.n_bs"), "{e}");
        assert!(parse_config("scenario = \"urban\"").is_err());
        assert!(parse_config("[sector]\nspan_deg = -1.0\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse_config("").unwrap();
        let b = parse_config("seed = 2").unwrap();
        assert_eq!(a.hash(), SweepConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
