//! Analytical photonic device models: phase-change couplers, insertion-loss
//! chains, laser power, MR tuning, serialization and conversion energy.
//!
//! Loss figures are in dB, optical powers in mW internally, and every
//! function that returns a power or energy uses W or J.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DeviceError {
    #[error("target cross fraction {0} outside [0, 1]")]
    SplitOutOfRange(f64),
    #[error("laser power needs at least one optical path")]
    NoPaths,
    #[error("wavelength count must be >= 1")]
    NoWavelengths,
}

/// Phase of a phase-change-material coupler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "phase", content = "cross")]
pub enum PcmcPhase {
    /// All light to the bar port.
    Crystalline,
    /// Fraction `t` of the light to the cross port, `1 - t` to bar.
    PartiallyCrystalline(f64),
    /// All light to the cross port.
    Amorphous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcmcState {
    pub phase: PcmcPhase,
    pub excess_loss_db: f64,
    /// CL_am / CL_cr of the coupler geometry. Recorded only; the split is
    /// set directly through the phase.
    pub cl_ratio: f64,
}

impl PcmcState {
    pub fn new(phase: PcmcPhase) -> Self {
        PcmcState {
            phase,
            excess_loss_db: 0.0,
            cl_ratio: 1.0,
        }
    }

    /// Cross fraction before excess loss.
    pub fn ideal_cross(&self) -> f64 {
        match self.phase {
            PcmcPhase::Crystalline => 0.0,
            PcmcPhase::PartiallyCrystalline(t) => t,
            PcmcPhase::Amorphous => 1.0,
        }
    }
}

/// Returns `(bar, cross)` power fractions.
pub fn pcmc_transfer(state: &PcmcState) -> (f64, f64) {
    let kept = db_to_ratio(-state.excess_loss_db);
    let cross = state.ideal_cross();
    ((1.0 - cross) * kept, cross * kept)
}

/// Coupler state whose lossless cross fraction equals `target_cross`.
pub fn pcmc_for_split(target_cross: f64) -> Result<PcmcState, DeviceError> {
    if !(0.0..=1.0).contains(&target_cross) {
        return Err(DeviceError::SplitOutOfRange(target_cross));
    }
    let phase = if target_cross == 0.0 {
        PcmcPhase::Crystalline
    } else if target_cross == 1.0 {
        PcmcPhase::Amorphous
    } else {
        PcmcPhase::PartiallyCrystalline(target_cross)
    };
    Ok(PcmcState::new(phase))
}

/// Device constants. Defaults are calibration values, not measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceParams {
    pub coupler_loss_db: f64,
    pub propagation_loss_db_per_mm: f64,
    pub mr_through_loss_db: f64,
    pub mr_drop_loss_db: f64,
    pub splitter_excess_db: f64,
    pub pd_sensitivity_dbm: f64,
    pub laser_efficiency: f64,
    pub mr_tuning_mw: f64,
    pub modulator_energy_pj_per_bit: f64,
    pub filter_pd_energy_pj_per_bit: f64,
    pub gateway_elec_energy_pj_per_bit: f64,
    pub dac_energy_pj: f64,
    pub adc_energy_pj: f64,
    pub pcm_transition_s: f64,
    pub group_velocity_mm_per_s: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            coupler_loss_db: 1.0,
            propagation_loss_db_per_mm: 0.1,
            mr_through_loss_db: 0.005,
            mr_drop_loss_db: 0.5,
            splitter_excess_db: 0.1,
            pd_sensitivity_dbm: -20.0,
            laser_efficiency: 0.1,
            mr_tuning_mw: 0.5,
            modulator_energy_pj_per_bit: 0.5,
            filter_pd_energy_pj_per_bit: 0.5,
            gateway_elec_energy_pj_per_bit: 1.0,
            dac_energy_pj: 0.5,
            adc_energy_pj: 2.0,
            pcm_transition_s: 1e-6,
            // c / 4 (group index ~4 in silicon strip waveguides)
            group_velocity_mm_per_s: 7.5e10,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<(), String> {
        let non_negative = [
            ("coupler_loss_db", self.coupler_loss_db),
            (
                "propagation_loss_db_per_mm",
                self.propagation_loss_db_per_mm,
            ),
            ("mr_through_loss_db", self.mr_through_loss_db),
            ("mr_drop_loss_db", self.mr_drop_loss_db),
            ("splitter_excess_db", self.splitter_excess_db),
            ("mr_tuning_mw", self.mr_tuning_mw),
            (
                "modulator_energy_pj_per_bit",
                self.modulator_energy_pj_per_bit,
            ),
            (
                "filter_pd_energy_pj_per_bit",
                self.filter_pd_energy_pj_per_bit,
            ),
            (
                "gateway_elec_energy_pj_per_bit",
                self.gateway_elec_energy_pj_per_bit,
            ),
            ("dac_energy_pj", self.dac_energy_pj),
            ("adc_energy_pj", self.adc_energy_pj),
            ("pcm_transition_s", self.pcm_transition_s),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("devices.{name} must be a finite value >= 0"));
            }
        }
        if !(self.laser_efficiency > 0.0 && self.laser_efficiency <= 1.0) {
            return Err("devices.laser_efficiency must lie in (0, 1]".into());
        }
        if !(self.group_velocity_mm_per_s > 0.0) {
            return Err("devices.group_velocity_mm_per_s must be > 0".into());
        }
        if !self.pd_sensitivity_dbm.is_finite() {
            return Err("devices.pd_sensitivity_dbm must be finite".into());
        }
        Ok(())
    }
}

/// Element counts along one laser-to-detector path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalPath {
    pub length_mm: f64,
    pub mrs_passed: u64,
    pub drop_stages: u64,
    pub split_fanout: u64,
    pub couplers: u64,
}

impl Default for OpticalPath {
    fn default() -> Self {
        OpticalPath {
            length_mm: 0.0,
            mrs_passed: 0,
            drop_stages: 0,
            split_fanout: 1,
            couplers: 0,
        }
    }
}

impl OpticalPath {
    /// Concatenation of two unsplit paths.
    pub fn then(&self, next: &OpticalPath) -> OpticalPath {
        OpticalPath {
            length_mm: self.length_mm + next.length_mm,
            mrs_passed: self.mrs_passed + next.mrs_passed,
            drop_stages: self.drop_stages + next.drop_stages,
            split_fanout: self.split_fanout * next.split_fanout,
            couplers: self.couplers + next.couplers,
        }
    }
}

pub fn db_to_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Splitting is an ideal `1/fanout` division on a binary tree, each tree
/// stage adding `splitter_excess_db`.
pub fn path_insertion_loss(path: &OpticalPath, params: &DeviceParams) -> f64 {
    let fanout = path.split_fanout.max(1);
    let split_db = if fanout > 1 {
        let stages = 64 - (fanout - 1).leading_zeros();
        10.0 * (fanout as f64).log10() + f64::from(stages) * params.splitter_excess_db
    } else {
        0.0
    };
    path.couplers as f64 * params.coupler_loss_db
        + path.length_mm * params.propagation_loss_db_per_mm
        + path.mrs_passed as f64 * params.mr_through_loss_db
        + path.drop_stages as f64 * params.mr_drop_loss_db
        + split_db
}

/// Wall-plug laser power in W that puts `pd_sensitivity_dbm` on every
/// wavelength at the end of every path.
pub fn required_laser_power(
    paths: &[OpticalPath],
    n_wavelengths: u32,
    params: &DeviceParams,
) -> Result<f64, DeviceError> {
    if paths.is_empty() {
        return Err(DeviceError::NoPaths);
    }
    if n_wavelengths == 0 {
        return Err(DeviceError::NoWavelengths);
    }
    let per_wavelength_mw: f64 = paths
        .iter()
        .map(|p| db_to_ratio(params.pd_sensitivity_dbm + path_insertion_loss(p, params)))
        .sum();
    let optical_mw = f64::from(n_wavelengths) * per_wavelength_mw;
    Ok(optical_mw / params.laser_efficiency / 1e3)
}

pub fn serialization_time(bits: u64, n_wavelengths: u32, rate_bps: f64) -> f64 {
    bits as f64 / (f64::from(n_wavelengths) * rate_bps)
}

pub fn mr_tuning_power(active_mrs: u64, params: &DeviceParams) -> f64 {
    active_mrs as f64 * params.mr_tuning_mw / 1e3
}

/// Modulation, detection and gateway electronics for `bits` bits, in J.
pub fn conversion_energy(bits: u64, params: &DeviceParams) -> f64 {
    let pj_per_bit = params.modulator_energy_pj_per_bit
        + params.filter_pd_energy_pj_per_bit
        + params.gateway_elec_energy_pj_per_bit;
    bits as f64 * pj_per_bit * 1e-12
}
