//! Platform topologies: the photonic-interposer and electrical-mesh 2.5D
//! variants and the single-die baseline.
//!
//! In the photonic variant every compute gateway owns a microring group
//! (MRG) with one filter row and one modulator row. Reads leave memory on one
//! SWMR waveguide per memory gateway, broadcast to every compute gateway.
//! Writes return on one SWSR waveguide per compute gateway, landing on a
//! dedicated filter row of a memory gateway (compute gateways are dealt
//! round-robin over memory gateways).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ChipletConfig, ChipletRole, MonolithicSection, PlatformConfig};
use crate::devices::OpticalPath;

#[derive(Debug, Error, PartialEq)]
pub enum PlatformError {
    #[error("invalid chiplet {chiplet}: {reason}")]
    Chiplet { chiplet: String, reason: String },
    #[error("chiplet {chiplet}: {macs} MACs not divisible by {per_gateway} MACs per gateway")]
    Divisibility {
        chiplet: String,
        macs: u64,
        per_gateway: u64,
    },
    #[error("{chiplets} chiplets exceed placement grid capacity {capacity}")]
    PlacementOverflow { chiplets: usize, capacity: usize },
    #[error("grid cell ({0}, {1}) is out of range or already occupied")]
    PlacementConflict(usize, usize),
    #[error("unknown chiplet `{0}`")]
    UnknownChiplet(String),
    #[error("operation needs a {expected} topology, got {actual}")]
    WrongKind {
        expected: PlatformKind,
        actual: PlatformKind,
    },
    #[error("platform has no memory chiplet with gateways")]
    NoMemory,
    #[error("platform has no compute chiplets")]
    NoCompute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlatformKind {
    #[serde(rename = "siph", alias = "siph_interposer")]
    Siph,
    #[serde(rename = "elec", alias = "elec_interposer")]
    Elec,
    #[serde(rename = "mono", alias = "monolithic")]
    Mono,
}

impl PlatformKind {
    pub const ALL: [PlatformKind; 3] = [PlatformKind::Siph, PlatformKind::Elec, PlatformKind::Mono];

    pub fn name(self) -> &'static str {
        match self {
            PlatformKind::Siph => "siph",
            PlatformKind::Elec => "elec",
            PlatformKind::Mono => "mono",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "siph" | "siph_interposer" => Some(PlatformKind::Siph),
            "elec" | "elec_interposer" => Some(PlatformKind::Elec),
            "mono" | "monolithic" => Some(PlatformKind::Mono),
            _ => None,
        }
    }
}

impl fmt::Display for PlatformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MacKind {
    Conv,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MacUnitType {
    pub name: String,
    pub vector_len: u64,
    pub kind: MacKind,
}

impl MacUnitType {
    pub fn new(name: impl Into<String>, vector_len: u64, kind: MacKind) -> Self {
        MacUnitType {
            name: name.into(),
            vector_len,
            kind,
        }
    }

    /// `conv3x3`, `conv5x5`, `conv7x7` and `dense100`.
    pub fn builtin(name: &str) -> Option<Self> {
        let (len, kind) = match name {
            "conv3x3" => (9, MacKind::Conv),
            "conv5x5" => (25, MacKind::Conv),
            "conv7x7" => (49, MacKind::Conv),
            "dense100" => (100, MacKind::Dense),
            _ => return None,
        };
        Some(MacUnitType::new(name, len, kind))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Compute,
    Memory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChipletSpec {
    pub id: String,
    pub role: Role,
    pub mac_type: Option<MacUnitType>,
    pub macs: u64,
    pub macs_per_gateway: u64,
    pub gateways: u64,
    /// `(row, col)` cell on the placement grid.
    pub grid: (usize, usize),
    /// `(x_mm, y_mm)` on the interposer.
    pub position: (f64, f64),
}

/// A gateway, addressed by chiplet index and gateway index on that chiplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GatewayRef {
    pub chiplet: usize,
    pub gateway: usize,
}

impl fmt::Display for GatewayRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}.g{}", self.chiplet, self.gateway)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mrg {
    pub owner_gateway: GatewayRef,
    pub filter_rows: u64,
    pub modulator_rows: u64,
    pub mrs_per_row: u64,
}

impl Mrg {
    pub fn mr_count(&self) -> u64 {
        (self.filter_rows + self.modulator_rows) * self.mrs_per_row
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Protocol {
    #[serde(rename = "SWSR")]
    Swsr,
    #[serde(rename = "SWMR")]
    Swmr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveguideRoute {
    pub writer_gateway: GatewayRef,
    pub protocol: Protocol,
    pub readers: Vec<GatewayRef>,
    pub length_mm: f64,
    pub path: OpticalPath,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElectricalParams {
    pub router_latency_cycles: u32,
    pub congestion_factor: f64,
    pub energy_pj_per_bit_hop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlatformTopology {
    pub kind: PlatformKind,
    pub chiplets: Vec<ChipletSpec>,
    /// Photonic variant only.
    pub mrgs: Vec<Mrg>,
    /// Photonic variant only; static for the topology's lifetime.
    pub routes: Vec<WaveguideRoute>,
    /// Electrical variant only.
    pub mesh_dims: Option<(usize, usize)>,
    pub n_wavelengths: u32,
    pub link_rate_bps: f64,
    pub gateway_freq_hz: f64,
    pub noc_width_bits: u32,
    pub noc_freq_hz: f64,
    pub interposer_side_mm: f64,
    pub electrical: ElectricalParams,
    /// Single-die variant only.
    pub monolithic: Option<MonolithicSection>,
}

impl PlatformTopology {
    pub fn chiplet_index(&self, id: &str) -> Result<usize, PlatformError> {
        self.chiplets
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| PlatformError::UnknownChiplet(id.to_string()))
    }

    pub fn compute_chiplets(&self) -> impl Iterator<Item = (usize, &ChipletSpec)> {
        self.chiplets
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == Role::Compute)
    }

    pub fn memory_chiplets(&self) -> impl Iterator<Item = (usize, &ChipletSpec)> {
        self.chiplets
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == Role::Memory)
    }

    pub fn compute_gateway_count(&self) -> u64 {
        self.compute_chiplets().map(|(_, c)| c.gateways).sum()
    }

    pub fn memory_gateway_count(&self) -> u64 {
        self.memory_chiplets().map(|(_, c)| c.gateways).sum()
    }

    /// Distinct MAC types in chiplet order.
    pub fn mac_types(&self) -> Vec<MacUnitType> {
        let mut types: Vec<MacUnitType> = Vec::new();
        for (_, c) in self.compute_chiplets() {
            if let Some(t) = &c.mac_type {
                if !types.iter().any(|x| x.name == t.name) {
                    types.push(t.clone());
                }
            }
        }
        types
    }

    pub fn total_mrs(&self) -> u64 {
        self.mrgs.iter().map(Mrg::mr_count).sum()
    }

    pub fn route_of_writer(&self, writer: GatewayRef) -> Option<&WaveguideRoute> {
        self.routes.iter().find(|r| r.writer_gateway == writer)
    }

    fn require(&self, expected: PlatformKind) -> Result<(), PlatformError> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(PlatformError::WrongKind {
                expected,
                actual: self.kind,
            })
        }
    }
}

/// Table-driven default: one memory chiplet with four gateways and the
/// eight heterogeneous compute chiplets of the shipped config.
pub fn default_platform() -> PlatformTopology {
    build_topology(&PlatformConfig::shipped(), PlatformKind::Siph).expect("shipped config builds")
}

/// Manhattan distance to the farthest reader plus a trunk allowance of
/// 10% of the interposer side.
pub fn route_length(src: (f64, f64), dst_set: &[(f64, f64)], side_mm: f64) -> f64 {
    let farthest = dst_set
        .iter()
        .map(|d| (src.0 - d.0).abs() + (src.1 - d.1).abs())
        .fold(0.0, f64::max);
    farthest + 0.1 * side_mm
}

/// Per-gateway peak optical bandwidth in bits/s.
pub fn gateway_peak_bandwidth(topology: &PlatformTopology) -> Result<f64, PlatformError> {
    topology.require(PlatformKind::Siph)?;
    Ok(f64::from(topology.n_wavelengths) * topology.link_rate_bps)
}

/// Mesh hops between two chiplets' routers, counting one local
/// injection/ejection hop.
pub fn electrical_hops(
    src_chiplet: &str,
    dst_chiplet: &str,
    topology: &PlatformTopology,
) -> Result<u32, PlatformError> {
    let a = topology.chiplet_index(src_chiplet)?;
    let b = topology.chiplet_index(dst_chiplet)?;
    Ok(hops_between(topology, a, b))
}

pub(crate) fn hops_between(topology: &PlatformTopology, a: usize, b: usize) -> u32 {
    let (ra, ca) = topology.chiplets[a].grid;
    let (rb, cb) = topology.chiplets[b].grid;
    (ra.abs_diff(rb) + ca.abs_diff(cb)) as u32 + 1
}

fn expand_chiplet(cfg: &ChipletConfig) -> Result<Vec<ChipletSpec>, PlatformError> {
    let bad = |reason: &str| PlatformError::Chiplet {
        chiplet: cfg.id.clone(),
        reason: reason.to_string(),
    };
    let (role, mac_type, macs, macs_per_gateway, gateways) = match cfg.role {
        ChipletRole::Memory => {
            if cfg.macs != 0 {
                return Err(bad("memory chiplets carry no MACs"));
            }
            let gateways = cfg.gateways.unwrap_or(1);
            if gateways == 0 {
                return Err(bad("memory chiplets need at least one gateway"));
            }
            (Role::Memory, None, 0, 0, gateways)
        }
        ChipletRole::Compute => {
            let name = cfg
                .mac_type
                .as_deref()
                .ok_or_else(|| bad("compute chiplets need mac_type"))?;
            let mut mac = match MacUnitType::builtin(name) {
                Some(t) => t,
                None => MacUnitType::new(
                    name,
                    cfg.vector_len
                        .ok_or_else(|| bad("custom mac_type needs vector_len"))?,
                    cfg.mac_kind.unwrap_or(MacKind::Conv),
                ),
            };
            if let Some(len) = cfg.vector_len {
                mac.vector_len = len;
            }
            if let Some(kind) = cfg.mac_kind {
                mac.kind = kind;
            }
            if mac.vector_len == 0 {
                return Err(bad("vector_len must be >= 1"));
            }
            if cfg.macs == 0 {
                return Err(bad("compute chiplets need macs >= 1"));
            }
            let per_gw = cfg
                .macs_per_gateway
                .ok_or_else(|| bad("compute chiplets need macs_per_gateway"))?;
            if per_gw == 0 || !cfg.macs.is_multiple_of(per_gw) {
                return Err(PlatformError::Divisibility {
                    chiplet: cfg.id.clone(),
                    macs: cfg.macs,
                    per_gateway: per_gw,
                });
            }
            let gateways = cfg.macs / per_gw;
            if cfg.gateways.is_some_and(|g| g != gateways) {
                return Err(bad("gateways must equal macs / macs_per_gateway"));
            }
            (Role::Compute, Some(mac), cfg.macs, per_gw, gateways)
        }
    };
    Ok((0..cfg.count)
        .map(|i| ChipletSpec {
            id: if cfg.count > 1 {
                format!("{}.{}", cfg.id, i)
            } else {
                cfg.id.clone()
            },
            role,
            mac_type: mac_type.clone(),
            macs,
            macs_per_gateway,
            gateways,
            grid: (0, 0),
            position: (0.0, 0.0),
        })
        .collect())
}

/// Explicit `grid_pos` first, then the first memory chiplet in the centre
/// cell, then everything else row-major over free cells.
fn place(
    chiplets: &mut [ChipletSpec],
    explicit: &[Option<[usize; 2]>],
    grid: [usize; 2],
    side_mm: f64,
) -> Result<(), PlatformError> {
    let [rows, cols] = grid;
    let capacity = rows * cols;
    if chiplets.len() > capacity {
        return Err(PlatformError::PlacementOverflow {
            chiplets: chiplets.len(),
            capacity,
        });
    }
    let mut taken = vec![false; capacity];
    let mut cell: Vec<Option<(usize, usize)>> = vec![None; chiplets.len()];
    for (i, pos) in explicit.iter().enumerate() {
        if let Some([r, c]) = *pos {
            if r >= rows || c >= cols || taken[r * cols + c] {
                return Err(PlatformError::PlacementConflict(r, c));
            }
            taken[r * cols + c] = true;
            cell[i] = Some((r, c));
        }
    }
    let centre = (rows / 2) * cols + cols / 2;
    if let Some(m) = chiplets.iter().position(|c| c.role == Role::Memory) {
        if cell[m].is_none() && !taken[centre] {
            taken[centre] = true;
            cell[m] = Some((rows / 2, cols / 2));
        }
    }
    let mut free = (0..capacity).filter(|&k| !taken[k]);
    for slot in cell.iter_mut().filter(|s| s.is_none()) {
        let k = free.next().expect("capacity checked above");
        *slot = Some((k / cols, k % cols));
    }
    let pitch_x = side_mm / cols as f64;
    let pitch_y = side_mm / rows as f64;
    for (chiplet, slot) in chiplets.iter_mut().zip(cell) {
        let (r, c) = slot.expect("every chiplet placed");
        chiplet.grid = (r, c);
        chiplet.position = (c as f64 * pitch_x, r as f64 * pitch_y);
    }
    Ok(())
}

fn monolithic_topology(config: &PlatformConfig) -> PlatformTopology {
    let m = &config.monolithic;
    let p = &config.platform;
    let mac = MacUnitType::new(format!("mono{}", m.vector_len), m.vector_len, MacKind::Conv);
    PlatformTopology {
        kind: PlatformKind::Mono,
        chiplets: vec![ChipletSpec {
            id: "mono".into(),
            role: Role::Compute,
            mac_type: Some(mac),
            macs: m.macs,
            macs_per_gateway: m.macs,
            gateways: 1,
            grid: (0, 0),
            position: (0.0, 0.0),
        }],
        mrgs: Vec::new(),
        routes: Vec::new(),
        mesh_dims: None,
        n_wavelengths: p.wavelengths,
        link_rate_bps: p.link_rate_bps,
        gateway_freq_hz: p.gateway_freq_hz,
        noc_width_bits: p.noc_width_bits,
        noc_freq_hz: p.noc_freq_hz,
        interposer_side_mm: p.interposer_side_mm,
        electrical: electrical_params(config),
        monolithic: Some(m.clone()),
    }
}

fn electrical_params(config: &PlatformConfig) -> ElectricalParams {
    ElectricalParams {
        router_latency_cycles: config.platform.router_latency_cycles,
        congestion_factor: config.platform.elec_congestion_factor,
        energy_pj_per_bit_hop: config.platform.noc_energy_pj_per_bit_hop,
    }
}

/// Builds and wires a topology of the requested kind from `config`.
pub fn build_topology(
    config: &PlatformConfig,
    kind: PlatformKind,
) -> Result<PlatformTopology, PlatformError> {
    if kind == PlatformKind::Mono {
        return Ok(monolithic_topology(config));
    }
    let p = &config.platform;
    let mut chiplets = Vec::new();
    let mut explicit = Vec::new();
    for c in &config.chiplets {
        let expanded = expand_chiplet(c)?;
        for (i, _) in expanded.iter().enumerate() {
            explicit.push(if i == 0 { c.grid_pos } else { None });
        }
        chiplets.extend(expanded);
    }
    place(&mut chiplets, &explicit, p.grid, p.interposer_side_mm)?;

    let mut topo = PlatformTopology {
        kind,
        chiplets,
        mrgs: Vec::new(),
        routes: Vec::new(),
        mesh_dims: (kind == PlatformKind::Elec).then_some((p.grid[0], p.grid[1])),
        n_wavelengths: p.wavelengths,
        link_rate_bps: p.link_rate_bps,
        gateway_freq_hz: p.gateway_freq_hz,
        noc_width_bits: p.noc_width_bits,
        noc_freq_hz: p.noc_freq_hz,
        interposer_side_mm: p.interposer_side_mm,
        electrical: electrical_params(config),
        monolithic: None,
    };
    if topo.compute_chiplets().next().is_none() {
        return Err(PlatformError::NoCompute);
    }
    if topo.memory_gateway_count() == 0 {
        return Err(PlatformError::NoMemory);
    }
    if kind == PlatformKind::Siph {
        wire_photonic(&mut topo);
    }
    Ok(topo)
}

fn wire_photonic(topo: &mut PlatformTopology) {
    let n_wl = u64::from(topo.n_wavelengths);
    let side = topo.interposer_side_mm;
    let gateways_of = |role: Role| -> Vec<GatewayRef> {
        topo.chiplets
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == role)
            .flat_map(|(i, c)| {
                (0..c.gateways as usize).map(move |g| GatewayRef {
                    chiplet: i,
                    gateway: g,
                })
            })
            .collect()
    };
    let compute_gws = gateways_of(Role::Compute);
    let memory_gws = gateways_of(Role::Memory);
    let pos = |g: &GatewayRef| topo.chiplets[g.chiplet].position;

    let mut mrgs = Vec::new();
    let mut routes = Vec::new();
    for gw in &compute_gws {
        mrgs.push(Mrg {
            owner_gateway: *gw,
            filter_rows: 1,
            modulator_rows: 1,
            mrs_per_row: n_wl,
        });
    }
    for (m, gw) in memory_gws.iter().enumerate() {
        let fan_in = (m..compute_gws.len()).step_by(memory_gws.len()).count() as u64;
        mrgs.push(Mrg {
            owner_gateway: *gw,
            filter_rows: fan_in,
            modulator_rows: 1,
            mrs_per_row: n_wl,
        });
    }
    // Writes: compute gateway -> one filter row on a memory gateway.
    for (j, gw) in compute_gws.iter().enumerate() {
        let target = memory_gws[j % memory_gws.len()];
        let length_mm = route_length(pos(gw), &[pos(&target)], side);
        routes.push(WaveguideRoute {
            writer_gateway: *gw,
            protocol: Protocol::Swsr,
            readers: vec![target],
            length_mm,
            path: OpticalPath {
                length_mm,
                mrs_passed: n_wl,
                drop_stages: 1,
                split_fanout: 1,
                couplers: 1,
            },
        });
    }
    // Reads: memory gateway -> every compute gateway. Light passes the
    // writer's modulator row and every reader filter row ahead of the last.
    let reader_pos: Vec<_> = compute_gws.iter().map(pos).collect();
    for gw in &memory_gws {
        let length_mm = route_length(pos(gw), &reader_pos, side);
        let readers = compute_gws.len() as u64;
        routes.push(WaveguideRoute {
            writer_gateway: *gw,
            protocol: Protocol::Swmr,
            readers: compute_gws.clone(),
            length_mm,
            path: OpticalPath {
                length_mm,
                mrs_passed: n_wl * readers,
                drop_stages: 1,
                split_fanout: readers,
                couplers: 1,
            },
        });
    }
    topo.mrgs = mrgs;
    topo.routes = routes;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn compute(id: &str, mac: &str, macs: u64, per_gw: u64) -> ChipletConfig {
        ChipletConfig {
            id: id.into(),
            role: ChipletRole::Compute,
            mac_type: Some(mac.into()),
            vector_len: None,
            mac_kind: None,
            macs,
            macs_per_gateway: Some(per_gw),
            gateways: None,
            count: 1,
            grid_pos: None,
        }
    }

    fn memory(gateways: u64) -> ChipletConfig {
        ChipletConfig {
            id: "mem".into(),
            role: ChipletRole::Memory,
            mac_type: None,
            vector_len: None,
            mac_kind: None,
            macs: 0,
            macs_per_gateway: None,
            gateways: Some(gateways),
            count: 1,
            grid_pos: None,
        }
    }

    fn config(chiplets: Vec<ChipletConfig>) -> PlatformConfig {
        PlatformConfig {
            chiplets,
            ..PlatformConfig::shipped()
        }
    }

    #[test]
    fn default_counts() {
        let t = default_platform();
        assert_eq!(t.compute_gateway_count(), 32);
        let conv3: Vec<_> = t
            .compute_chiplets()
            .filter(|(_, c)| c.mac_type.as_ref().unwrap().name == "conv3x3")
            .collect();
        assert_eq!(conv3.len(), 3);
        assert!(conv3.iter().all(|(_, c)| c.macs == 44));
        let mem_filters: u64 = t
            .mrgs
            .iter()
            .filter(|m| t.chiplets[m.owner_gateway.chiplet].role == Role::Memory)
            .map(|m| m.filter_rows)
            .sum();
        assert_eq!(mem_filters, 32);
        assert_eq!(t.routes.len(), 36);
    }

    #[test]
    fn six_gateway_example() {
        // one memory gateway, six compute gateways over five chiplets
        let mut chips = vec![memory(1)];
        chips.push(compute("a", "conv3x3", 2, 1));
        for id in ["b", "c", "d", "e"] {
            chips.push(compute(id, "conv5x5", 1, 1));
        }
        let t = build_topology(&config(chips), PlatformKind::Siph).unwrap();
        let mem = t
            .mrgs
            .iter()
            .find(|m| t.chiplets[m.owner_gateway.chiplet].role == Role::Memory)
            .unwrap();
        assert_eq!((mem.filter_rows, mem.modulator_rows), (6, 1));
    }

    #[test]
    fn divisibility_error() {
        let err = build_topology(
            &config(vec![memory(1), compute("x", "conv3x3", 5, 2)]),
            PlatformKind::Siph,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            PlatformError::Divisibility {
                macs: 5,
                per_gateway: 2,
                ..
            }
        ));
    }

    #[test]
    fn placement_overflow() {
        let mut c = compute("x", "conv3x3", 1, 1);
        c.count = 9;
        let err = build_topology(&config(vec![memory(1), c]), PlatformKind::Elec).unwrap_err();
        assert_eq!(
            err,
            PlatformError::PlacementOverflow {
                chiplets: 10,
                capacity: 9
            }
        );
    }

    #[test]
    fn explicit_placement_conflict() {
        let mut a = compute("a", "conv3x3", 1, 1);
        a.grid_pos = Some([0, 0]);
        let mut b = compute("b", "conv3x3", 1, 1);
        b.grid_pos = Some([0, 0]);
        assert_eq!(
            build_topology(&config(vec![memory(1), a, b]), PlatformKind::Siph).unwrap_err(),
            PlatformError::PlacementConflict(0, 0)
        );
    }

    #[test]
    fn missing_memory_or_compute() {
        assert_eq!(
            build_topology(
                &config(vec![compute("a", "conv3x3", 1, 1)]),
                PlatformKind::Siph
            )
            .unwrap_err(),
            PlatformError::NoMemory
        );
        assert_eq!(
            build_topology(&config(vec![memory(2)]), PlatformKind::Siph).unwrap_err(),
            PlatformError::NoCompute
        );
    }

    #[test]
    fn custom_mac_type_needs_length() {
        let c = compute("a", "conv11x11", 1, 1);
        assert!(matches!(
            build_topology(&config(vec![memory(1), c.clone()]), PlatformKind::Siph),
            Err(PlatformError::Chiplet { .. })
        ));
        let c = ChipletConfig {
            vector_len: Some(121),
            ..c
        };
        let t = build_topology(&config(vec![memory(1), c]), PlatformKind::Siph).unwrap();
        assert_eq!(t.mac_types()[0].vector_len, 121);
    }

    #[test]
    fn route_length_examples() {
        assert!((route_length((0.0, 0.0), &[(0.0, 0.0)], 24.0) - 2.4).abs() < 1e-12);
        assert!((route_length((0.0, 0.0), &[(8.0, 8.0)], 24.0) - 18.4).abs() < 1e-12);
        assert!((route_length((0.0, 0.0), &[(8.0, 8.0), (16.0, 0.0)], 24.0) - 18.4).abs() < 1e-12);
    }

    #[test]
    fn peak_bandwidth() {
        let mut t = default_platform();
        assert_eq!(gateway_peak_bandwidth(&t).unwrap(), 768e9);
        t.n_wavelengths = 1;
        assert_eq!(gateway_peak_bandwidth(&t).unwrap(), 12e9);
        t.n_wavelengths = 32;
        assert_eq!(gateway_peak_bandwidth(&t).unwrap(), 384e9);
        let e = build_topology(&PlatformConfig::shipped(), PlatformKind::Elec).unwrap();
        assert!(matches!(
            gateway_peak_bandwidth(&e),
            Err(PlatformError::WrongKind { .. })
        ));
    }

    #[test]
    fn hop_examples() {
        let mut a = compute("a", "conv3x3", 1, 1);
        a.grid_pos = Some([0, 0]);
        let mut b = compute("b", "conv3x3", 1, 1);
        b.grid_pos = Some([2, 2]);
        let mut c = compute("c", "conv3x3", 1, 1);
        c.grid_pos = Some([0, 1]);
        let t = build_topology(&config(vec![memory(1), a, b, c]), PlatformKind::Elec).unwrap();
        assert_eq!(t.mesh_dims, Some((3, 3)));
        assert_eq!(electrical_hops("a", "a", &t).unwrap(), 1);
        assert_eq!(electrical_hops("a", "b", &t).unwrap(), 5);
        assert_eq!(electrical_hops("a", "c", &t).unwrap(), 2);
        assert_eq!(
            electrical_hops("a", "zz", &t).unwrap_err(),
            PlatformError::UnknownChiplet("zz".into())
        );
    }

    #[test]
    fn memory_sits_in_centre() {
        let t = default_platform();
        let (_, mem) = t.memory_chiplets().next().unwrap();
        assert_eq!(mem.grid, (1, 1));
        assert_eq!(mem.position, (8.0, 8.0));
    }

    #[test]
    fn construction_audit() {
        let t = default_platform();
        let n = u64::from(t.n_wavelengths);
        let cg = t.compute_gateway_count();
        let mg = t.memory_gateway_count();
        assert_eq!(t.total_mrs(), (3 * cg + mg) * n);
        let swsr = t.routes.iter().filter(|r| r.protocol == Protocol::Swsr);
        assert_eq!(swsr.clone().count() as u64, cg);
        assert!(swsr.clone().all(|r| r.readers.len() == 1));
        for r in t.routes.iter().filter(|r| r.protocol == Protocol::Swmr) {
            assert_eq!(r.readers.len() as u64, cg);
            assert_eq!(r.path.split_fanout, cg);
        }
        for m in &t.mrgs {
            if t.chiplets[m.owner_gateway.chiplet].role == Role::Compute {
                assert_eq!((m.filter_rows, m.modulator_rows), (1, 1));
            }
        }
    }

    proptest! {
        #[test]
        fn route_length_symmetric(a in (0.0..24.0f64, 0.0..24.0f64), b in (0.0..24.0f64, 0.0..24.0f64)) {
            prop_assert!((route_length(a, &[b], 24.0) - route_length(b, &[a], 24.0)).abs() < 1e-12);
        }

        #[test]
        fn route_length_monotone(src in (0.0..24.0f64, 0.0..24.0f64),
                                 readers in proptest::collection::vec((0.0..24.0f64, 0.0..24.0f64), 1..8),
                                 extra in (0.0..24.0f64, 0.0..24.0f64)) {
            let before = route_length(src, &readers, 24.0);
            let mut more = readers.clone();
            more.push(extra);
            prop_assert!(route_length(src, &more, 24.0) >= before);
        }

        #[test]
        fn audit_holds_for_random_platforms(mem_gw in 1u64..6, gws in proptest::collection::vec(1u64..6, 1..8)) {
            let mut chips = vec![memory(mem_gw)];
            for (i, g) in gws.iter().enumerate() {
                chips.push(compute(&format!("c{i}"), "conv3x3", g * 2, 2));
            }
            let t = build_topology(&config(chips), PlatformKind::Siph).unwrap();
            let cg = t.compute_gateway_count();
            let n = u64::from(t.n_wavelengths);
            prop_assert_eq!(cg, gws.iter().sum::<u64>());
            prop_assert_eq!(t.total_mrs(), (3 * cg + mem_gw) * n);
            let mem_filters: u64 = t.mrgs.iter()
                .filter(|m| t.chiplets[m.owner_gateway.chiplet].role == Role::Memory)
                .map(|m| m.filter_rows).sum();
            prop_assert_eq!(mem_filters, cg);
            prop_assert_eq!(t.routes.len() as u64, cg + mem_gw);
        }
    }
}
