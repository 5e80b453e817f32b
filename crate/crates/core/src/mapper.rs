//! Layer-to-chiplet mapping.
//!
//! Each layer runs on every chiplet carrying its selected MAC type; layers
//! execute one after another. Dot products longer than a MAC's vector are
//! split into chunks whose partial sums are accumulated electronically.

use serde::Serialize;
use thiserror::Error;

use crate::platform::{MacKind, MacUnitType, PlatformKind, PlatformTopology};
use crate::workload::{layer_traffic, DnnModelSpec, LayerKind, LayerSpec};

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("topology has no compute chiplets with MAC units")]
    NoComputeResources,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerAssignment {
    pub layer_index: usize,
    pub mac_type: MacUnitType,
    pub chiplet_ids: Vec<String>,
    #[serde(skip)]
    pub chiplet_indices: Vec<usize>,
    pub total_macs: u64,
    pub chunks_per_dot: u64,
    pub invocations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingPlan {
    pub model_name: String,
    pub assignments: Vec<LayerAssignment>,
}

pub fn chunks_per_dot(dot_length: u64, vector_len: u64) -> u64 {
    dot_length.div_ceil(vector_len)
}

/// Picks the MAC type for `layer`.
///
/// fc layers take the widest dense type (else the widest type). Conv layers
/// take an exact `K_h*K_w` conv type, else the narrowest conv type that
/// holds the kernel, else the widest type of any kind. Equal candidates
/// resolve to the one listed first.
///
/// Panics if `available` is empty.
pub fn select_mac_type(layer: &LayerSpec, available: &[MacUnitType]) -> MacUnitType {
    assert!(!available.is_empty(), "no MAC types to choose from");
    let widest = |kind: Option<MacKind>| {
        available
            .iter()
            .filter(|t| kind.is_none_or(|k| t.kind == k))
            .fold(None::<&MacUnitType>, |best, t| match best {
                Some(b) if b.vector_len >= t.vector_len => Some(b),
                _ => Some(t),
            })
    };
    let chosen = match layer.kind {
        LayerKind::Fc => widest(Some(MacKind::Dense)).or_else(|| widest(None)),
        LayerKind::Conv => {
            let window = layer.kernel_h * layer.kernel_w;
            let convs = || available.iter().filter(|t| t.kind == MacKind::Conv);
            convs()
                .find(|t| t.vector_len == window)
                .or_else(|| {
                    convs().filter(|t| t.vector_len >= window).fold(
                        None::<&MacUnitType>,
                        |best, t| match best {
                            Some(b) if b.vector_len <= t.vector_len => Some(b),
                            _ => Some(t),
                        },
                    )
                })
                .or_else(|| widest(None))
        }
    };
    chosen.expect("non-empty type list").clone()
}

pub fn map_model(
    model: &DnnModelSpec,
    topology: &PlatformTopology,
) -> Result<MappingPlan, MapError> {
    let types = topology.mac_types();
    if types.is_empty() {
        return Err(MapError::NoComputeResources);
    }
    let assignments = model
        .layers
        .iter()
        .map(|layer| {
            let mac_type = if topology.kind == PlatformKind::Mono {
                types[0].clone()
            } else {
                select_mac_type(layer, &types)
            };
            let (chiplet_indices, chiplet_ids): (Vec<usize>, Vec<String>) = topology
                .compute_chiplets()
                .filter(|(_, c)| c.mac_type.as_ref().is_some_and(|t| t.name == mac_type.name))
                .map(|(i, c)| (i, c.id.clone()))
                .unzip();
            let total_macs = chiplet_indices
                .iter()
                .map(|&i| topology.chiplets[i].macs)
                .sum();
            let traffic = layer_traffic(layer);
            let chunks = chunks_per_dot(traffic.dot_length, mac_type.vector_len);
            LayerAssignment {
                layer_index: layer.index,
                chunks_per_dot: chunks,
                invocations: traffic.dot_products * chunks,
                mac_type,
                chiplet_ids,
                chiplet_indices,
                total_macs,
            }
        })
        .collect();
    Ok(MappingPlan {
        model_name: model.name.clone(),
        assignments,
    })
}
