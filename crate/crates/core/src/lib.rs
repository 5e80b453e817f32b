//! Performance model for 2.5D chiplet DNN accelerators that compute with
//! microring-based photonic MAC units and communicate over a reconfigurable
//! silicon-photonic interposer, with electrical-mesh and single-die
//! baselines for comparison.
//!
//! The pipeline is: load a model descriptor ([`workload`]), build a platform
//! ([`platform`]), map layers onto MAC types ([`mapper`]), run the layer loop
//! ([`engine`]) and tabulate the results ([`report`]).

pub mod cli;
pub mod config;
pub mod devices;
pub mod engine;
pub mod mapper;
pub mod platform;
pub mod report;
pub mod workload;

pub use config::PlatformConfig;
pub use devices::DeviceParams;
pub use engine::{simulate, simulate_model, RunMetrics, SimOptions};
pub use mapper::{map_model, MappingPlan};
pub use platform::{build_topology, default_platform, PlatformKind, PlatformTopology};
pub use workload::{load_model, DnnModelSpec};
