//! Epoch-based gateway controller for the photonic interposer.
//!
//! Each epoch the controller sizes the number of active gateways on every
//! chiplet to its bandwidth demand, re-taps the PCMC chain so each active
//! writer receives an equal share of the laser output, and retunes the
//! laser to the sum of the active routes' requirements.

use serde::Serialize;

use crate::devices::{
    mr_tuning_power, pcmc_for_split, pcmc_transfer, required_laser_power, DeviceParams, PcmcState,
};
use crate::platform::{gateway_peak_bandwidth, GatewayRef, PlatformTopology, Role};

use super::EngineError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerState {
    pub epoch_s: f64,
    /// Active gateway count per chiplet, indexed like `topology.chiplets`.
    pub active_gateways: Vec<u64>,
    /// One coupler per route, indexed like `topology.routes`, in chain order.
    pub pcmc_settings: Vec<PcmcState>,
    pub current_laser_w: f64,
    pub reconfig_count: u64,
}

impl ControllerState {
    /// Controller at the minimum activation (`all_active = false`) or with
    /// every gateway switched on.
    pub fn new(
        topology: &PlatformTopology,
        params: &DeviceParams,
        epoch_s: f64,
        all_active: bool,
    ) -> Result<Self, EngineError> {
        gateway_peak_bandwidth(topology)?;
        let active = topology
            .chiplets
            .iter()
            .map(|c| {
                if all_active {
                    c.gateways
                } else {
                    c.gateways.min(1)
                }
            })
            .collect();
        Self::with_active(topology, params, epoch_s, active, 0)
    }

    fn with_active(
        topology: &PlatformTopology,
        params: &DeviceParams,
        epoch_s: f64,
        active_gateways: Vec<u64>,
        reconfig_count: u64,
    ) -> Result<Self, EngineError> {
        let mut state = ControllerState {
            epoch_s,
            active_gateways,
            pcmc_settings: Vec::new(),
            current_laser_w: 0.0,
            reconfig_count,
        };
        let live: Vec<bool> = topology
            .routes
            .iter()
            .map(|r| state.is_active(r.writer_gateway))
            .collect();
        state.pcmc_settings = pcmc_chain(&live)?;
        state.current_laser_w = active_route_laser_power(&state, topology, params)?;
        Ok(state)
    }

    pub fn is_active(&self, gw: GatewayRef) -> bool {
        (gw.gateway as u64) < self.active_gateways[gw.chiplet]
    }

    pub fn active_routes<'a>(
        &'a self,
        topology: &'a PlatformTopology,
    ) -> impl Iterator<Item = &'a crate::platform::WaveguideRoute> + 'a {
        topology
            .routes
            .iter()
            .filter(move |r| self.is_active(r.writer_gateway))
    }

    /// Tuned interposer microrings: both rows of each active compute
    /// gateway, the modulator row of each active memory gateway, and the
    /// memory-side filter row of each active compute writer.
    pub fn active_interposer_mrs(&self, topology: &PlatformTopology) -> u64 {
        let n = u64::from(topology.n_wavelengths);
        topology
            .chiplets
            .iter()
            .zip(&self.active_gateways)
            .map(|(c, &a)| match c.role {
                Role::Compute => 3 * a * n,
                Role::Memory => a * n,
            })
            .sum()
    }

    pub fn tuning_power_w(&self, topology: &PlatformTopology, params: &DeviceParams) -> f64 {
        mr_tuning_power(self.active_interposer_mrs(topology), params)
    }
}

/// Couplers along one laser bus. The k-th of n live taps sends
/// `1 / (n - k)` of what reaches it to its writer, so every live writer
/// gets `1 / n` of the input; dead taps stay crystalline and pass
/// everything on.
pub fn pcmc_chain(live: &[bool]) -> Result<Vec<PcmcState>, EngineError> {
    let mut remaining = live.iter().filter(|&&l| l).count();
    live.iter()
        .map(|&l| {
            if l {
                let t = 1.0 / remaining as f64;
                remaining -= 1;
                pcmc_for_split(t).map_err(EngineError::from)
            } else {
                pcmc_for_split(0.0).map_err(EngineError::from)
            }
        })
        .collect()
}

/// Fraction of the laser input each coupler in the chain hands to its writer.
pub fn delivered_fractions(settings: &[PcmcState]) -> Vec<f64> {
    let mut remaining = 1.0;
    settings
        .iter()
        .map(|s| {
            let (bar, cross) = pcmc_transfer(s);
            let out = remaining * cross;
            remaining *= bar;
            out
        })
        .collect()
}

fn active_route_laser_power(
    state: &ControllerState,
    topology: &PlatformTopology,
    params: &DeviceParams,
) -> Result<f64, EngineError> {
    let paths: Vec<_> = state.active_routes(topology).map(|r| r.path).collect();
    if paths.is_empty() {
        return Ok(0.0);
    }
    Ok(required_laser_power(
        &paths,
        topology.n_wavelengths,
        params,
    )?)
}

/// Laser power recomputed from scratch over the active routes equals the
/// controller's bookkeeping, and the PCMC chain feeds exactly those routes.
pub fn laser_audit(
    state: &ControllerState,
    topology: &PlatformTopology,
    params: &DeviceParams,
) -> bool {
    let Ok(expected) = active_route_laser_power(state, topology, params) else {
        return false;
    };
    let live = state.active_routes(topology).count();
    let fractions = delivered_fractions(&state.pcmc_settings);
    let taps_ok = topology.routes.iter().zip(&fractions).all(|(r, &f)| {
        if state.is_active(r.writer_gateway) {
            (f - 1.0 / live as f64).abs() <= 1e-12
        } else {
            f == 0.0
        }
    });
    taps_ok && fractions.len() == topology.routes.len() && expected == state.current_laser_w
}

/// One controller epoch: size each chiplet's active gateways to
/// `ceil(demand / per-gateway bandwidth)`, clamped to `[1, gateways]`.
/// `reconfig_count` advances only when the active set changes.
pub fn reconfigure_epoch(
    demand_bps: &[f64],
    state: &ControllerState,
    topology: &PlatformTopology,
    params: &DeviceParams,
) -> Result<ControllerState, EngineError> {
    let peak = gateway_peak_bandwidth(topology)?;
    if demand_bps.len() != topology.chiplets.len() {
        return Err(EngineError::PlanMismatch(format!(
            "demand vector has {} entries for {} chiplets",
            demand_bps.len(),
            topology.chiplets.len()
        )));
    }
    let active: Vec<u64> = topology
        .chiplets
        .iter()
        .zip(demand_bps)
        .map(|(c, &d)| {
            let d = if d.is_finite() && d > 0.0 { d } else { 0.0 };
            let wanted = (d / peak).ceil();
            // float -> int saturates for huge demands
            (wanted as u64).clamp(1, c.gateways.max(1))
        })
        .collect();
    let changed = active != state.active_gateways;
    ControllerState::with_active(
        topology,
        params,
        state.epoch_s,
        active,
        state.reconfig_count + u64::from(changed),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::default_platform;
    use proptest::prelude::*;

    fn conv3_chiplet(t: &PlatformTopology) -> usize {
        t.chiplets.iter().position(|c| c.id == "conv3x3.0").unwrap()
    }

    #[test]
    fn zero_demand_floors_at_one() {
        let t = default_platform();
        let p = DeviceParams::default();
        let s = ControllerState::new(&t, &p, 5e-6, true).unwrap();
        let next = reconfigure_epoch(&vec![0.0; t.chiplets.len()], &s, &t, &p).unwrap();
        assert!(next.active_gateways.iter().all(|&a| a == 1));
        assert_eq!(next.reconfig_count, 1);
        assert!(laser_audit(&next, &t, &p));
    }

    #[test]
    fn clamp_examples() {
        let t = default_platform();
        let p = DeviceParams::default();
        let c = conv3_chiplet(&t);
        let s = ControllerState::new(&t, &p, 5e-6, false).unwrap();
        let mut demand = vec![0.0; t.chiplets.len()];
        demand[c] = 1.6e12;
        let next = reconfigure_epoch(&demand, &s, &t, &p).unwrap();
        assert_eq!(next.active_gateways[c], 3);
        demand[c] = 10e12;
        let next = reconfigure_epoch(&demand, &next, &t, &p).unwrap();
        assert_eq!(next.active_gateways[c], 4);
        assert_eq!(next.reconfig_count, 2);
        // unchanged demand: no reconfiguration charged
        let again = reconfigure_epoch(&demand, &next, &t, &p).unwrap();
        assert_eq!(again.reconfig_count, 2);
    }

    #[test]
    fn minimum_state_uses_fewer_routes_and_less_laser() {
        let t = default_platform();
        let p = DeviceParams::default();
        let lo = ControllerState::new(&t, &p, 5e-6, false).unwrap();
        let hi = ControllerState::new(&t, &p, 5e-6, true).unwrap();
        assert_eq!(lo.active_routes(&t).count(), 9);
        assert_eq!(hi.active_routes(&t).count(), 36);
        assert!(lo.current_laser_w < hi.current_laser_w);
        assert_eq!(
            hi.active_interposer_mrs(&t),
            t.total_mrs(),
            "everything on means every MR is tuned"
        );
    }

    #[test]
    fn chain_taps_split_evenly() {
        let live = [true, false, true, true, false];
        let chain = pcmc_chain(&live).unwrap();
        let f = delivered_fractions(&chain);
        for (l, x) in live.iter().zip(&f) {
            if *l {
                assert!((x - 1.0 / 3.0).abs() < 1e-12);
            } else {
                assert_eq!(*x, 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn activation_monotone_and_clamped(base in proptest::collection::vec(0.0..5e12f64, 10),
                                           bump in proptest::collection::vec(0.0..5e12f64, 10)) {
            let t = default_platform();
            let p = DeviceParams::default();
            let s = ControllerState::new(&t, &p, 5e-6, false).unwrap();
            let base = &base[..t.chiplets.len()];
            let more: Vec<f64> = base.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let lo = reconfigure_epoch(base, &s, &t, &p).unwrap();
            let hi = reconfigure_epoch(&more, &s, &t, &p).unwrap();
            for (i, c) in t.chiplets.iter().enumerate() {
                prop_assert!(lo.active_gateways[i] >= 1 && lo.active_gateways[i] <= c.gateways);
                prop_assert!(hi.active_gateways[i] >= lo.active_gateways[i]);
            }
            prop_assert!(laser_audit(&lo, &t, &p));
            prop_assert!(laser_audit(&hi, &t, &p));
            prop_assert!(hi.current_laser_w >= lo.current_laser_w);
        }
    }
}
