//! Layer-by-layer execution model.
//!
//! Layers run strictly in sequence. Within a layer, compute, the read
//! stream (weights and inputs from memory) and the write stream (outputs to
//! memory) overlap by default, so the layer takes the slowest of the three
//! plus any reconfiguration stall.

mod controller;

pub use controller::{
    delivered_fractions, laser_audit, pcmc_chain, reconfigure_epoch, ControllerState,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::{DeviceError, DeviceParams};
use crate::mapper::{map_model, LayerAssignment, MapError, MappingPlan};
use crate::platform::{
    gateway_peak_bandwidth, hops_between, PlatformError, PlatformKind, PlatformTopology, Role,
    WaveguideRoute,
};
use crate::workload::{layer_traffic, model_total_bits, DnnModelSpec, TrafficVolume};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("plan does not match model/topology: {0}")]
    PlanMismatch(String),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// How the controller estimates next-epoch bandwidth demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandMode {
    /// The upcoming layer's traffic, known statically.
    Oracle,
    /// Traffic observed during the previous layer.
    Trailing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub mac_rate_hz: f64,
    pub epoch_s: f64,
    /// Store-and-forward buffering at each gateway, in gateway cycles.
    pub gateway_overhead_cycles: u32,
    pub weight_refetch_factor: f64,
    pub overlap: bool,
    pub resipi: bool,
    pub demand: DemandMode,
    pub controller_power_w: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            mac_rate_hz: 2e9,
            epoch_s: 5e-6,
            gateway_overhead_cycles: 4,
            weight_refetch_factor: 1.0,
            overlap: true,
            resipi: true,
            demand: DemandMode::Oracle,
            controller_power_w: 0.05,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.mac_rate_hz > 0.0) {
            return Err("engine.mac_rate_hz must be > 0".into());
        }
        if !(self.epoch_s > 0.0) {
            return Err("engine.epoch_s must be > 0".into());
        }
        if !(self.weight_refetch_factor >= 0.0 && self.weight_refetch_factor.is_finite()) {
            return Err("engine.weight_refetch_factor must be >= 0".into());
        }
        if !(self.controller_power_w >= 0.0) {
            return Err("engine.controller_power_w must be >= 0".into());
        }
        Ok(())
    }
}

/// Energy in joules by where it is spent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub laser: f64,
    pub tuning: f64,
    pub conversion: f64,
    pub mac: f64,
    pub gateway_elec: f64,
    pub controller: f64,
    /// Electrical data movement: mesh links and routers, or the off-chip
    /// memory interface on the single-die platform.
    pub electrical_noc: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.laser
            + self.tuning
            + self.conversion
            + self.mac
            + self.gateway_elec
            + self.controller
            + self.electrical_noc
    }

    pub fn accumulate(&mut self, other: &EnergyBreakdown) {
        self.laser += other.laser;
        self.tuning += other.tuning;
        self.conversion += other.conversion;
        self.mac += other.mac;
        self.gateway_elec += other.gateway_elec;
        self.controller += other.controller;
        self.electrical_noc += other.electrical_noc;
    }

    pub fn scaled(&self, k: f64) -> EnergyBreakdown {
        EnergyBreakdown {
            laser: self.laser * k,
            tuning: self.tuning * k,
            conversion: self.conversion * k,
            mac: self.mac * k,
            gateway_elec: self.gateway_elec * k,
            controller: self.controller * k,
            electrical_noc: self.electrical_noc * k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerResult {
    pub layer_index: usize,
    pub compute_s: f64,
    pub read_s: f64,
    pub write_s: f64,
    pub overhead_s: f64,
    pub layer_latency_s: f64,
    pub energy_j: EnergyBreakdown,
    pub bits_moved: u64,
    /// Laser output held during the layer (photonic interposer only).
    pub laser_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub platform: PlatformKind,
    pub model: String,
    pub total_latency_s: f64,
    pub total_energy_j: f64,
    pub energy_j: EnergyBreakdown,
    pub avg_power_w: f64,
    pub total_bits: u64,
    pub epb_j_per_bit: f64,
    pub reconfig_count: u64,
    pub per_layer: Vec<LayerResult>,
}

/// `ceil(invocations / total_macs)` MAC cycles.
pub fn compute_time(assignment: &LayerAssignment, mac_rate_hz: f64) -> f64 {
    cycles_time(assignment.invocations, assignment.total_macs, mac_rate_hz)
}

fn cycles_time(invocations: u64, macs: u64, rate_hz: f64) -> f64 {
    invocations.div_ceil(macs) as f64 / rate_hz
}

/// Serialization at the slower end, time of flight along the waveguide,
/// and gateway buffering.
pub fn transfer_time_photonic(
    bits: u64,
    writer_bw: f64,
    reader_bw: f64,
    route: &WaveguideRoute,
    params: &DeviceParams,
    gateway_freq_hz: f64,
    overhead_cycles: u32,
) -> f64 {
    let effective = writer_bw.min(reader_bw);
    bits as f64 / effective
        + route.length_mm / params.group_velocity_mm_per_s
        + f64::from(overhead_cycles) / gateway_freq_hz
}

/// Router pipeline latency per hop plus link serialization; serialization
/// is stretched by the congestion factor when several chiplets contend for
/// the memory port in the same phase.
pub fn transfer_time_electrical(
    bits: u64,
    hops: u32,
    topology: &PlatformTopology,
    contended: bool,
) -> f64 {
    let f = topology.noc_freq_hz;
    let header = f64::from(hops) * f64::from(topology.electrical.router_latency_cycles) / f;
    let congestion = if contended {
        topology.electrical.congestion_factor
    } else {
        1.0
    };
    header + congestion * bits as f64 / (f64::from(topology.noc_width_bits) * f)
}

fn pj(x: f64) -> f64 {
    x * 1e-12
}

fn mac_energy(a: &LayerAssignment, params: &DeviceParams) -> f64 {
    pj(a.invocations as f64
        * (params.dac_energy_pj * a.mac_type.vector_len as f64 + params.adc_energy_pj))
}

/// Weight and activation banks: two MRs per vector lane.
fn mac_mrs(a: &LayerAssignment) -> u64 {
    2 * a.total_macs * a.mac_type.vector_len
}

fn refetched_weights(t: &TrafficVolume, options: &SimOptions) -> u64 {
    (t.weight_bits as f64 * options.weight_refetch_factor).round() as u64
}

fn combine(compute: f64, read: f64, write: f64, overhead: f64, overlap: bool) -> f64 {
    if overlap {
        compute.max(read).max(write) + overhead
    } else {
        compute + read + write + overhead
    }
}

fn check_plan(
    model: &DnnModelSpec,
    topology: &PlatformTopology,
    plan: &MappingPlan,
) -> Result<(), EngineError> {
    let mismatch = |m: String| Err(EngineError::PlanMismatch(m));
    if plan.model_name != model.name || plan.assignments.len() != model.layers.len() {
        return mismatch(format!(
            "plan for `{}` ({} layers) vs model `{}` ({} layers)",
            plan.model_name,
            plan.assignments.len(),
            model.name,
            model.layers.len()
        ));
    }
    for (a, layer) in plan.assignments.iter().zip(&model.layers) {
        if a.layer_index != layer.index {
            return mismatch(format!("assignment order broken at layer {}", layer.index));
        }
        let macs: Option<u64> = a
            .chiplet_indices
            .iter()
            .map(|&i| {
                topology
                    .chiplets
                    .get(i)
                    .filter(|c| c.role == Role::Compute)
                    .map(|c| c.macs)
            })
            .sum();
        match macs {
            Some(m) if m == a.total_macs && m > 0 => {}
            _ => {
                return mismatch(format!(
                    "layer {} names chiplets not in topology",
                    a.layer_index
                ))
            }
        }
    }
    Ok(())
}

/// Runs `plan` for `model` on `topology`.
pub fn simulate_model(
    model: &DnnModelSpec,
    topology: &PlatformTopology,
    plan: &MappingPlan,
    params: &DeviceParams,
    options: &SimOptions,
) -> Result<RunMetrics, EngineError> {
    check_plan(model, topology, plan)?;
    let (per_layer, reconfig_count) = match topology.kind {
        PlatformKind::Siph => run_photonic(model, topology, plan, params, options)?,
        PlatformKind::Elec => (run_electrical(model, topology, plan, params, options)?, 0),
        PlatformKind::Mono => (run_monolithic(model, topology, plan, params, options)?, 0),
    };
    Ok(finish(topology.kind, model, per_layer, reconfig_count))
}

/// Maps and runs `model` on the single-die baseline.
pub fn simulate_monolithic(
    model: &DnnModelSpec,
    topology: &PlatformTopology,
    params: &DeviceParams,
    options: &SimOptions,
) -> Result<RunMetrics, EngineError> {
    if topology.kind != PlatformKind::Mono {
        return Err(PlatformError::WrongKind {
            expected: PlatformKind::Mono,
            actual: topology.kind,
        }
        .into());
    }
    simulate(model, topology, params, options)
}

/// Maps `model` onto `topology` and runs it.
pub fn simulate(
    model: &DnnModelSpec,
    topology: &PlatformTopology,
    params: &DeviceParams,
    options: &SimOptions,
) -> Result<RunMetrics, EngineError> {
    let plan = map_model(model, topology)?;
    simulate_model(model, topology, &plan, params, options)
}

fn finish(
    platform: PlatformKind,
    model: &DnnModelSpec,
    per_layer: Vec<LayerResult>,
    reconfig_count: u64,
) -> RunMetrics {
    let total_latency_s: f64 = per_layer.iter().map(|l| l.layer_latency_s).sum();
    let mut energy = EnergyBreakdown::default();
    for l in &per_layer {
        energy.accumulate(&l.energy_j);
    }
    let total_energy_j = energy.total();
    let total_bits = model_total_bits(model);
    RunMetrics {
        platform,
        model: model.name.clone(),
        total_latency_s,
        total_energy_j,
        energy_j: energy,
        avg_power_w: total_energy_j / total_latency_s,
        total_bits,
        epb_j_per_bit: total_energy_j / total_bits as f64,
        reconfig_count,
        per_layer,
    }
}

fn run_photonic(
    model: &DnnModelSpec,
    topo: &PlatformTopology,
    plan: &MappingPlan,
    params: &DeviceParams,
    options: &SimOptions,
) -> Result<(Vec<LayerResult>, u64), EngineError> {
    let peak = gateway_peak_bandwidth(topo)?;
    let overhead_cycles = options.gateway_overhead_cycles;
    // the controller comes out of reset with every gateway on; the first
    // epoch sizes it down
    let mut state = ControllerState::new(topo, params, options.epoch_s, true)?;
    let n_chiplets = topo.chiplets.len();
    let mut trailing = vec![0.0; n_chiplets];
    let memory_gateways: u64 = topo.memory_gateway_count();
    let mut results = Vec::with_capacity(model.layers.len());

    for (layer, a) in model.layers.iter().zip(&plan.assignments) {
        let t = layer_traffic(layer);
        let weights = refetched_weights(&t, options);
        let read_bits = weights + t.input_bits;
        let write_bits = t.output_bits;
        let n = a.chiplet_indices.len() as u64;
        let compute_s = compute_time(a, options.mac_rate_hz);

        // Bits each chiplet moves this layer: memory streams everything;
        // inputs are broadcast, weights and outputs are partitioned.
        let mut chiplet_bits = vec![0.0; n_chiplets];
        for (i, c) in topo.chiplets.iter().enumerate() {
            if c.role == Role::Memory {
                chiplet_bits[i] = (read_bits + write_bits) as f64;
            }
        }
        for &i in &a.chiplet_indices {
            chiplet_bits[i] = t.input_bits as f64 + (weights as f64 + write_bits as f64) / n as f64;
        }

        let mut overhead_s = 0.0;
        if options.resipi {
            let demand = match options.demand {
                DemandMode::Oracle => {
                    let assigned_gw: u64 = a
                        .chiplet_indices
                        .iter()
                        .map(|&i| topo.chiplets[i].gateways)
                        .sum();
                    let estimate = compute_s
                        .max(read_bits as f64 / (assigned_gw.min(memory_gateways) as f64 * peak))
                        .max(write_bits as f64 / (assigned_gw as f64 * peak));
                    let window = estimate.max(options.epoch_s);
                    chiplet_bits.iter().map(|b| b / window).collect()
                }
                DemandMode::Trailing => trailing.clone(),
            };
            let next = reconfigure_epoch(&demand, &state, topo, params)?;
            if next.reconfig_count != state.reconfig_count {
                overhead_s = params.pcm_transition_s;
            }
            state = next;
        }

        let active_on = |chiplets: &mut dyn Iterator<Item = usize>| -> u64 {
            chiplets.map(|i| state.active_gateways[i]).sum()
        };
        let active_memory = active_on(&mut topo.memory_chiplets().map(|(i, _)| i));
        let active_assigned = active_on(&mut a.chiplet_indices.iter().copied());
        let longest = |pred: &dyn Fn(&WaveguideRoute) -> bool| {
            state
                .active_routes(topo)
                .filter(|r| pred(r))
                .max_by(|x, y| x.length_mm.total_cmp(&y.length_mm))
        };
        let read_route = longest(&|r| topo.chiplets[r.writer_gateway.chiplet].role == Role::Memory)
            .expect("memory keeps one gateway active");
        let write_route = longest(&|r| a.chiplet_indices.contains(&r.writer_gateway.chiplet))
            .expect("assigned chiplets keep one gateway active");

        let read_s = transfer_time_photonic(
            read_bits,
            active_memory as f64 * peak,
            active_assigned as f64 * peak,
            read_route,
            params,
            topo.gateway_freq_hz,
            overhead_cycles,
        );
        // Each compute writer lands on its own memory filter row.
        let write_s = transfer_time_photonic(
            write_bits,
            active_assigned as f64 * peak,
            active_assigned as f64 * peak,
            write_route,
            params,
            topo.gateway_freq_hz,
            overhead_cycles,
        );
        let latency = combine(compute_s, read_s, write_s, overhead_s, options.overlap);

        let bits_moved = read_bits + write_bits;
        let tuning_w = state.tuning_power_w(topo, params)
            + crate::devices::mr_tuning_power(mac_mrs(a), params);
        let energy = EnergyBreakdown {
            laser: state.current_laser_w * latency,
            tuning: tuning_w * latency,
            conversion: pj(bits_moved as f64
                * (params.modulator_energy_pj_per_bit + params.filter_pd_energy_pj_per_bit)),
            mac: mac_energy(a, params),
            gateway_elec: pj(bits_moved as f64 * params.gateway_elec_energy_pj_per_bit),
            controller: if options.resipi {
                options.controller_power_w * latency
            } else {
                0.0
            },
            electrical_noc: 0.0,
        };
        trailing = chiplet_bits
            .iter()
            .map(|b| b / latency.max(options.epoch_s))
            .collect();
        results.push(LayerResult {
            layer_index: layer.index,
            compute_s,
            read_s,
            write_s,
            overhead_s,
            layer_latency_s: latency,
            energy_j: energy,
            bits_moved,
            laser_w: state.current_laser_w,
        });
    }
    Ok((results, state.reconfig_count))
}

fn run_electrical(
    model: &DnnModelSpec,
    topo: &PlatformTopology,
    plan: &MappingPlan,
    params: &DeviceParams,
    options: &SimOptions,
) -> Result<Vec<LayerResult>, EngineError> {
    let (memory, _) = topo
        .memory_chiplets()
        .next()
        .ok_or(PlatformError::NoMemory)?;
    let mut results = Vec::with_capacity(model.layers.len());
    for (layer, a) in model.layers.iter().zip(&plan.assignments) {
        let t = layer_traffic(layer);
        let weights = refetched_weights(&t, options);
        let n = a.chiplet_indices.len() as u64;
        let contended = n > 1;
        let compute_s = compute_time(a, options.mac_rate_hz);

        // Unicasts go out chiplet by chiplet through the memory router: each
        // gets the full input plus its share of weights and outputs.
        let per_read = weights.div_ceil(n) + t.input_bits;
        let per_write = t.output_bits.div_ceil(n);
        let mut read_s: f64 = 0.0;
        let mut write_s: f64 = 0.0;
        let mut bits_moved = 0;
        let mut bit_hops = 0.0;
        for &c in &a.chiplet_indices {
            let hops = hops_between(topo, memory, c);
            read_s += transfer_time_electrical(per_read, hops, topo, contended);
            write_s += transfer_time_electrical(per_write, hops, topo, contended);
            bits_moved += per_read + per_write;
            bit_hops += (per_read + per_write) as f64 * f64::from(hops);
        }
        let latency = combine(compute_s, read_s, write_s, 0.0, options.overlap);
        let energy = EnergyBreakdown {
            tuning: crate::devices::mr_tuning_power(mac_mrs(a), params) * latency,
            mac: mac_energy(a, params),
            gateway_elec: pj(bits_moved as f64 * params.gateway_elec_energy_pj_per_bit),
            electrical_noc: pj(bit_hops * topo.electrical.energy_pj_per_bit_hop),
            ..EnergyBreakdown::default()
        };
        results.push(LayerResult {
            layer_index: layer.index,
            compute_s,
            read_s,
            write_s,
            overhead_s: 0.0,
            layer_latency_s: latency,
            energy_j: energy,
            bits_moved,
            laser_w: 0.0,
        });
    }
    Ok(results)
}

fn run_monolithic(
    model: &DnnModelSpec,
    topo: &PlatformTopology,
    plan: &MappingPlan,
    params: &DeviceParams,
    options: &SimOptions,
) -> Result<Vec<LayerResult>, EngineError> {
    let mono = topo.monolithic.as_ref().ok_or(PlatformError::WrongKind {
        expected: PlatformKind::Mono,
        actual: topo.kind,
    })?;
    let rate = mono.mac_rate_hz.unwrap_or(options.mac_rate_hz);
    let access_s = f64::from(mono.access_overhead_cycles) / topo.gateway_freq_hz;
    // The whole die stays tuned; there is no chiplet to power down.
    let array_mrs = 2 * mono.macs * mono.vector_len;
    let mut results = Vec::with_capacity(model.layers.len());
    for (layer, a) in model.layers.iter().zip(&plan.assignments) {
        let t = layer_traffic(layer);
        let read_bits = refetched_weights(&t, options) + t.input_bits;
        let write_bits = t.output_bits;
        let compute_s = cycles_time(a.invocations, a.total_macs, rate);
        let read_s = read_bits as f64 / mono.offchip_bandwidth_bps + access_s;
        let write_s = write_bits as f64 / mono.offchip_bandwidth_bps + access_s;
        let latency = combine(compute_s, read_s, write_s, 0.0, options.overlap);
        let bits_moved = read_bits + write_bits;
        let energy = EnergyBreakdown {
            tuning: crate::devices::mr_tuning_power(array_mrs, params) * latency,
            mac: mac_energy(a, params),
            electrical_noc: pj(bits_moved as f64 * mono.offchip_energy_pj_per_bit),
            ..EnergyBreakdown::default()
        };
        results.push(LayerResult {
            layer_index: layer.index,
            compute_s,
            read_s,
            write_s,
            overhead_s: 0.0,
            layer_latency_s: latency,
            energy_j: energy,
            bits_moved,
            laser_w: 0.0,
        });
    }
    Ok(results)
}
