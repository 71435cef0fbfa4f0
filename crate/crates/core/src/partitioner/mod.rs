//! Lane-to-device assignment.
//!
//! Every strategy returns a total [`Assignment`]: each input lane placed on
//! exactly one device of the cluster. Strategies work on device indices
//! internally (`Vec<usize>` in lane input order); [`Assignment`] carries
//! the ids for serialization.

mod exact;

use std::collections::HashMap;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lane_model::{effective_time, lane_work, validate_lanes, ClusterSpec, LaneSpec};

pub use exact::{exact_indices, exact_partition, DEFAULT_EXACT_LIMIT};

/// How greedy compares candidate devices for the next lane.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreedyRule {
    /// Minimize the device's load after adding the lane.
    #[default]
    Increment,
    /// Pick the device with the smallest current load.
    Emptiest,
}

impl GreedyRule {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Increment => "increment",
            Self::Emptiest => "emptiest",
        }
    }
}

/// A partitioning strategy with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Greedy(GreedyRule),
    Random { seed: u64 },
    RoundRobin,
    Exact { limit: usize },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Greedy(_) => "greedy",
            Self::Random { .. } => "random",
            Self::RoundRobin => "roundrobin",
            Self::Exact { .. } => "exact",
        }
    }

    pub fn indices(&self, lanes: &[LaneSpec], cluster: &ClusterSpec) -> Result<Vec<usize>> {
        match *self {
            Self::Greedy(rule) => greedy_indices(lanes, cluster, rule),
            Self::Random { seed } => random_indices(lanes, cluster, seed),
            Self::RoundRobin => round_robin_indices(lanes, cluster),
            Self::Exact { limit } => exact_indices(lanes, cluster, limit),
        }
    }

    pub fn partition(&self, lanes: &[LaneSpec], cluster: &ClusterSpec) -> Result<Assignment> {
        let seed = match *self {
            Self::Random { seed } => Some(seed),
            _ => None,
        };
        let indices = self.indices(lanes, cluster)?;
        Ok(Assignment::from_indices(self.name(), seed, lanes, cluster, &indices))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub lane_id: String,
    pub device_id: String,
}

/// One partition of the lane set into device bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub strategy: String,
    pub seed: Option<u64>,
    pub placements: Vec<Placement>,
}

impl Assignment {
    /// `indices[i]` is the device index of `lanes[i]`.
    pub fn from_indices(
        strategy: impl Into<String>,
        seed: Option<u64>,
        lanes: &[LaneSpec],
        cluster: &ClusterSpec,
        indices: &[usize],
    ) -> Self {
        let placements = lanes
            .iter()
            .zip(indices)
            .map(|(lane, &d)| Placement { lane_id: lane.id.clone(), device_id: cluster.devices[d].id.clone() })
            .collect();
        Self { strategy: strategy.into(), seed, placements }
    }

    /// Resolves the assignment to device indices in lane input order,
    /// checking that it is total over `lanes` and references only known
    /// lanes and devices.
    pub fn device_indices(&self, lanes: &[LaneSpec], cluster: &ClusterSpec) -> Result<Vec<usize>> {
        let lane_pos: HashMap<&str, usize> = lanes.iter().enumerate().map(|(i, l)| (l.id.as_str(), i)).collect();
        let mut indices = vec![usize::MAX; lanes.len()];
        for p in &self.placements {
            let &lane = lane_pos.get(p.lane_id.as_str()).ok_or_else(|| Error::UnknownLane(p.lane_id.clone()))?;
            let device = cluster.device_index(&p.device_id).ok_or_else(|| Error::UnknownDevice(p.device_id.clone()))?;
            if indices[lane] != usize::MAX {
                return Err(Error::DuplicateAssignment(p.lane_id.clone()));
            }
            indices[lane] = device;
        }
        if let Some(missing) = indices.iter().position(|&d| d == usize::MAX) {
            return Err(Error::UnassignedLane(lanes[missing].id.clone()));
        }
        Ok(indices)
    }
}

/// Per-device loads and balance metrics of an assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    /// Device id → summed effective time, in cluster order.
    pub per_device_load: IndexMap<String, f64>,
    pub makespan: f64,
    /// Makespan lower bound the imbalance is measured against.
    pub lower_bound: f64,
    pub imbalance: f64,
}

/// On-disk form of an assignment together with its loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentFile {
    pub strategy: String,
    pub seed: Option<u64>,
    pub assignment: Vec<Placement>,
    pub makespan: f64,
    pub per_device_load: IndexMap<String, f64>,
}

impl AssignmentFile {
    pub fn new(assignment: &Assignment, report: &LoadReport) -> Self {
        Self {
            strategy: assignment.strategy.clone(),
            seed: assignment.seed,
            assignment: assignment.placements.clone(),
            makespan: report.makespan,
            per_device_load: report.per_device_load.clone(),
        }
    }

    pub fn to_assignment(&self) -> Assignment {
        Assignment { strategy: self.strategy.clone(), seed: self.seed, placements: self.assignment.clone() }
    }
}

pub(crate) fn check_inputs(lanes: &[LaneSpec], cluster: &ClusterSpec) -> Result<()> {
    validate_lanes(lanes)?;
    cluster.validate()
}

/// Lane indices by non-increasing work; equal works keep input order.
pub(crate) fn lpt_order(lanes: &[LaneSpec]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lanes.len()).collect();
    order.sort_by(|&a, &b| lane_work(&lanes[b]).total_cmp(&lane_work(&lanes[a])));
    order
}

/// Largest-work-first greedy. Ties between devices go to the smaller
/// time factor, then the lower device index.
pub fn greedy_indices(lanes: &[LaneSpec], cluster: &ClusterSpec, rule: GreedyRule) -> Result<Vec<usize>> {
    check_inputs(lanes, cluster)?;
    let devices = &cluster.devices;
    let mut loads = vec![0.0_f64; devices.len()];
    let mut indices = vec![0; lanes.len()];
    for lane_idx in lpt_order(lanes) {
        let lane = &lanes[lane_idx];
        let score = |d: usize| match rule {
            GreedyRule::Increment => loads[d] + effective_time(lane, &devices[d], 0.0),
            GreedyRule::Emptiest => loads[d],
        };
        let chosen = (0..devices.len())
            .min_by(|&a, &b| {
                score(a)
                    .total_cmp(&score(b))
                    .then(devices[a].time_factor.total_cmp(&devices[b].time_factor))
                    .then(a.cmp(&b))
            })
            .expect("cluster is non-empty");
        loads[chosen] += effective_time(lane, &devices[chosen], 0.0);
        indices[lane_idx] = chosen;
    }
    Ok(indices)
}

pub fn greedy_partition(lanes: &[LaneSpec], cluster: &ClusterSpec, rule: GreedyRule) -> Result<Assignment> {
    Strategy::Greedy(rule).partition(lanes, cluster)
}

/// Each lane independently and uniformly over devices, from a ChaCha8
/// stream seeded with `seed`.
pub fn random_indices(lanes: &[LaneSpec], cluster: &ClusterSpec, seed: u64) -> Result<Vec<usize>> {
    check_inputs(lanes, cluster)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(lanes.iter().map(|_| rng.random_range(0..cluster.len())).collect())
}

pub fn random_partition(lanes: &[LaneSpec], cluster: &ClusterSpec, seed: u64) -> Result<Assignment> {
    Strategy::Random { seed }.partition(lanes, cluster)
}

pub fn round_robin_indices(lanes: &[LaneSpec], cluster: &ClusterSpec) -> Result<Vec<usize>> {
    check_inputs(lanes, cluster)?;
    Ok((0..lanes.len()).map(|i| i % cluster.len()).collect())
}

pub fn round_robin_partition(lanes: &[LaneSpec], cluster: &ClusterSpec) -> Result<Assignment> {
    Strategy::RoundRobin.partition(lanes, cluster)
}

/// Per-device loads, summed in lane input order.
pub fn device_loads(indices: &[usize], lanes: &[LaneSpec], cluster: &ClusterSpec, per_lane_overhead: f64) -> Vec<f64> {
    let mut loads = vec![0.0; cluster.len()];
    for (lane, &d) in lanes.iter().zip(indices) {
        loads[d] += effective_time(lane, &cluster.devices[d], per_lane_overhead);
    }
    loads
}

pub fn makespan(indices: &[usize], lanes: &[LaneSpec], cluster: &ClusterSpec, per_lane_overhead: f64) -> f64 {
    device_loads(indices, lanes, cluster, per_lane_overhead).into_iter().fold(0.0, f64::max)
}

/// Lower bound on any assignment's makespan:
///
/// `max(W / Σ_d 1/f_d, w_max × f_min)` where `W` is the total lane work
/// (overhead included), `w_max` the largest single lane and `f` the device
/// time factors. The first term spreads the work fluidly over all devices in
/// proportion to their speed; the second places the largest lane alone on
/// the fastest device.
pub fn makespan_lower_bound(lanes: &[LaneSpec], cluster: &ClusterSpec, per_lane_overhead: f64) -> f64 {
    let works = lanes.iter().map(|l| lane_work(l) + per_lane_overhead);
    let (total, largest) = works.fold((0.0, 0.0_f64), |(t, m), w| (t + w, m.max(w)));
    let capacity: f64 = cluster.devices.iter().map(|d| 1.0 / d.time_factor).sum();
    (total / capacity).max(largest * cluster.fastest_factor())
}

pub fn load_report(
    assignment: &Assignment,
    lanes: &[LaneSpec],
    cluster: &ClusterSpec,
    per_lane_overhead: f64,
) -> Result<LoadReport> {
    let indices = assignment.device_indices(lanes, cluster)?;
    Ok(load_report_from_indices(&indices, lanes, cluster, per_lane_overhead))
}

pub fn load_report_from_indices(
    indices: &[usize],
    lanes: &[LaneSpec],
    cluster: &ClusterSpec,
    per_lane_overhead: f64,
) -> LoadReport {
    let loads = device_loads(indices, lanes, cluster, per_lane_overhead);
    let makespan = loads.iter().copied().fold(0.0, f64::max);
    let lower_bound = makespan_lower_bound(lanes, cluster, per_lane_overhead);
    let per_device_load = cluster.devices.iter().map(|d| d.id.clone()).zip(loads).collect();
    // rounding can put makespan a hair under the bound
    let imbalance = (makespan / lower_bound).max(1.0);
    LoadReport { per_device_load, makespan, lower_bound, imbalance }
}
