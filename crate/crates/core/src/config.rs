//! Platform configuration file (TOML).
//!
//! Sections: `platform`, `chiplets` (array), `devices`, `engine` and
//! `monolithic`. Every section except `chiplets` falls back to defaults, and
//! unknown keys are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::DeviceParams;
use crate::engine::SimOptions;
use crate::platform::{MacKind, PlatformKind};

/// Shipped configuration reproducing the modeled 2.5D platform.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../config/default.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatformSection {
    pub kind: PlatformKind,
    pub wavelengths: u32,
    pub link_rate_bps: f64,
    pub gateway_freq_hz: f64,
    pub noc_width_bits: u32,
    pub noc_freq_hz: f64,
    pub interposer_side_mm: f64,
    /// Placement grid as `[rows, cols]`; also the electrical mesh shape.
    pub grid: [usize; 2],
    pub router_latency_cycles: u32,
    pub elec_congestion_factor: f64,
    pub noc_energy_pj_per_bit_hop: f64,
}

impl Default for PlatformSection {
    fn default() -> Self {
        PlatformSection {
            kind: PlatformKind::Siph,
            wavelengths: 64,
            link_rate_bps: 12e9,
            gateway_freq_hz: 2e9,
            noc_width_bits: 128,
            noc_freq_hz: 2e9,
            interposer_side_mm: 24.0,
            grid: [3, 3],
            router_latency_cycles: 3,
            elec_congestion_factor: 2.0,
            noc_energy_pj_per_bit_hop: 1.0,
        }
    }
}

/// Single-die baseline: one homogeneous MAC array behind an off-chip
/// memory interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonolithicSection {
    pub macs: u64,
    pub vector_len: u64,
    pub offchip_bandwidth_bps: f64,
    pub offchip_energy_pj_per_bit: f64,
    pub access_overhead_cycles: u32,
    /// MAC symbol rate of the monolithic array; `engine.mac_rate_hz` when unset.
    pub mac_rate_hz: Option<f64>,
}

impl Default for MonolithicSection {
    fn default() -> Self {
        MonolithicSection {
            macs: 128,
            vector_len: 25,
            offchip_bandwidth_bps: 256e9,
            offchip_energy_pj_per_bit: 4.0,
            access_overhead_cycles: 4,
            mac_rate_hz: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChipletRole {
    Compute,
    Memory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipletConfig {
    pub id: String,
    pub role: ChipletRole,
    /// One of `conv3x3`, `conv5x5`, `conv7x7`, `dense100`, or a custom name
    /// together with `vector_len` and `mac_kind`.
    pub mac_type: Option<String>,
    pub vector_len: Option<u64>,
    pub mac_kind: Option<MacKind>,
    #[serde(default)]
    pub macs: u64,
    pub macs_per_gateway: Option<u64>,
    pub gateways: Option<u64>,
    /// Number of identical chiplets this entry stands for.
    #[serde(default = "one")]
    pub count: u64,
    /// Explicit `[row, col]` placement.
    pub grid_pos: Option<[usize; 2]>,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformConfig {
    #[serde(default)]
    pub platform: PlatformSection,
    #[serde(default)]
    pub chiplets: Vec<ChipletConfig>,
    #[serde(default)]
    pub devices: DeviceParams,
    #[serde(default)]
    pub engine: SimOptions,
    #[serde(default)]
    pub monolithic: MonolithicSection,
}

impl PlatformConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: PlatformConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// The shipped default configuration.
    pub fn shipped() -> Self {
        Self::from_toml(DEFAULT_CONFIG_TOML).expect("shipped config is valid")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.platform;
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if p.wavelengths == 0 {
            return invalid("platform.wavelengths must be >= 1");
        }
        for (name, v) in [
            ("platform.link_rate_bps", p.link_rate_bps),
            ("platform.gateway_freq_hz", p.gateway_freq_hz),
            ("platform.noc_freq_hz", p.noc_freq_hz),
            ("platform.interposer_side_mm", p.interposer_side_mm),
            (
                "monolithic.offchip_bandwidth_bps",
                self.monolithic.offchip_bandwidth_bps,
            ),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!("{name} must be > 0")));
            }
        }
        if p.noc_width_bits == 0 {
            return invalid("platform.noc_width_bits must be >= 1");
        }
        if p.grid[0] == 0 || p.grid[1] == 0 {
            return invalid("platform.grid dimensions must be >= 1");
        }
        if p.elec_congestion_factor < 1.0 {
            return invalid("platform.elec_congestion_factor must be >= 1");
        }
        if p.noc_energy_pj_per_bit_hop < 0.0 || self.monolithic.offchip_energy_pj_per_bit < 0.0 {
            return invalid("energies must be >= 0");
        }
        if self.monolithic.macs == 0 || self.monolithic.vector_len == 0 {
            return invalid("monolithic.macs and monolithic.vector_len must be >= 1");
        }
        if let Some(r) = self.monolithic.mac_rate_hz {
            if !(r > 0.0) {
                return invalid("monolithic.mac_rate_hz must be > 0");
            }
        }
        self.devices.validate().map_err(ConfigError::Invalid)?;
        self.engine.validate().map_err(ConfigError::Invalid)?;
        for c in &self.chiplets {
            if c.count == 0 {
                return Err(ConfigError::Invalid(format!(
                    "chiplet {}: count must be >= 1",
                    c.id
                )));
            }
        }
        Ok(())
    }
}
