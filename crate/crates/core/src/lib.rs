//! Lane placement on multi-accelerator clusters.
//!
//! A network organized as data-independent lanes can run each lane on a
//! different accelerator. This crate models a lane's cost as
//! `width² × depth × time_factor`, calibrates device time factors from probe
//! runtimes, assigns lanes to devices (largest-first greedy, random,
//! round-robin, exact branch and bound), and simulates per-epoch training
//! time for model-parallel and data-parallel execution.
//!
//! Modules:
//!
//! * [`lane_model`]: lanes, devices, clusters, cost model and calibration
//! * [`partitioner`]: assignment strategies and load metrics
//! * [`simulator`]: epoch timing, speedup curves, overhead fitting
//! * [`workload`]: lane generators and preset scenarios
//! * [`analysis`]: Pearson correlation and strategy comparison campaigns

pub mod analysis;
pub mod error;
pub mod lane_model;
pub mod partitioner;
pub mod simulator;
pub mod workload;

pub use error::{Error, Result};
pub use lane_model::{ClusterSpec, DeviceSpec, LaneSpec, ProbeResult};
pub use partitioner::{Assignment, GreedyRule, LoadReport, Strategy};
pub use simulator::{EpochReport, Mode, TrainConfig};
pub use workload::Scenario;
