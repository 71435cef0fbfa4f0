//! Lane generators and the preset scenario catalog.
//!
//! Presets are fixed values: lane sets come from [`gen_uniform_lanes`] with
//! the seeds listed below, so dumping a preset twice gives identical
//! documents.
//!
//! | preset        | lanes                              | cluster                |
//! |---------------|------------------------------------|------------------------|
//! | `homog-4xK80` | 24 uniform lanes, seed 24          | 4 × K80, one host      |
//! | `hetero-4gpu` | 24 uniform lanes, seed 24          | V100, P100, M40, K80 on four hosts |
//! | `lanes-N`     | N uniform lanes, seed N (N = 6, 9, 12, 24) | 4 × K80, one host |
//! | `fig3-8lane`  | 8 lanes of width 4, depth 2        | 8 × K80, one host      |
//! | `batch-sweep` | as `fig3-8lane`                    | batch sizes 100, 150, 300, 600 |
//!
//! Uniform lanes draw width and depth from `[1, 5]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lane_model::{
    factors_from_speedups, lane_work, validate_lanes, ClusterSpec, DeviceSpec, LaneSpec, TimeFactors,
};
use crate::simulator::{AllreduceCost, TrainConfig};

/// Lanes, cluster and training configuration bundled under a name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub lanes: Vec<LaneSpec>,
    pub cluster: ClusterSpec,
    pub train: TrainConfig,
    pub seed: u64,
    /// Data-parallel allreduce cost per step.
    #[serde(default)]
    pub allreduce: AllreduceCost,
    /// Batch sizes simulated by default; empty means `train.batch_size` only.
    #[serde(default)]
    pub batch_sizes: Vec<u64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidScenario("empty name".into()));
        }
        validate_lanes(&self.lanes)?;
        self.cluster.validate()?;
        self.train.validate()?;
        self.allreduce.validate()?;
        for &b in &self.batch_sizes {
            self.train.with_batch(b).validate()?;
        }
        Ok(())
    }

    /// Total work of the whole model, per-lane overhead included.
    pub fn total_work(&self) -> f64 {
        self.lanes.iter().map(|l| lane_work(l) + self.train.per_lane_overhead).sum()
    }

    pub fn batches(&self) -> Vec<u64> {
        if self.batch_sizes.is_empty() {
            vec![self.train.batch_size]
        } else {
            self.batch_sizes.clone()
        }
    }

    pub fn with_cluster(&self, cluster: ClusterSpec) -> Self {
        Self { cluster, ..self.clone() }
    }

    pub fn with_lanes(&self, lanes: Vec<LaneSpec>) -> Self {
        Self { lanes, ..self.clone() }
    }
}

/// `n` lanes with width and depth uniform over the inclusive ranges, drawn
/// from a ChaCha8 stream (width then depth, lane by lane). Ids are
/// `lane-0` … `lane-{n-1}`.
pub fn gen_uniform_lanes(n: usize, width: (u32, u32), depth: (u32, u32), seed: u64) -> Result<Vec<LaneSpec>> {
    if n == 0 {
        return Err(Error::EmptyLanes);
    }
    for (what, (min, max)) in [("width", width), ("depth", depth)] {
        if min < 1 || min > max {
            return Err(Error::InvalidRange { what, min, max });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|i| {
            let w = rng.random_range(width.0..=width.1);
            let d = rng.random_range(depth.0..=depth.1);
            LaneSpec { id: format!("lane-{i}"), width: w, depth: d }
        })
        .collect())
}

/// Width and depth range of generated lanes in the lane-count presets.
pub const LANE_RANGE: (u32, u32) = (1, 5);
pub const LANE_COUNTS: [usize; 4] = [6, 9, 12, 24];
pub const BATCH_SWEEP: [u64; 4] = [100, 150, 300, 600];

/// Published speedups relative to K80.
pub const GPU_SPEEDUPS: [(&str, f64); 4] = [("k80", 1.0), ("m40", 3.1), ("p100", 4.2), ("v100", 6.0)];

const K80_SYNC: f64 = 2.0;
const HETERO_INTER_HOST: f64 = 50.0;
// 256 / (32 + 3.65) ≈ 7.18 at 8 devices
const FIG3_SYNC: f64 = 3.65;
// 256 / (32 + 39.3) ≈ 3.59 at 8 devices
const FIG3_ALLREDUCE: f64 = 39.3;

pub fn catalog() -> Vec<String> {
    let mut names = vec!["homog-4xK80".to_string(), "hetero-4gpu".to_string()];
    names.extend(LANE_COUNTS.iter().map(|n| format!("lanes-{n}")));
    names.extend(["fig3-8lane".to_string(), "batch-sweep".to_string()]);
    names
}

/// `n` K80s (factor 1.0) on one host.
pub fn k80_cluster(n: usize) -> ClusterSpec {
    let devices = (0..n).map(|i| DeviceSpec::new(format!("k80-{i}"), 1.0, "host-0")).collect();
    ClusterSpec { devices, intra_host_sync: K80_SYNC, inter_host_penalty: 0.0 }
}

/// One V100, P100, M40 and K80, each on its own host, fastest first.
pub fn hetero_cluster() -> ClusterSpec {
    let speedups: TimeFactors = GPU_SPEEDUPS.iter().map(|&(id, s)| (id.to_string(), s)).collect();
    let factors = factors_from_speedups(&speedups, "k80").expect("published speedups are valid");
    let devices = ["v100", "p100", "m40", "k80"]
        .iter()
        .map(|id| DeviceSpec::new(*id, factors[*id], format!("host-{id}")))
        .collect();
    ClusterSpec { devices, intra_host_sync: K80_SYNC, inter_host_penalty: HETERO_INTER_HOST }
}

fn uniform_lanes(n: usize, seed: u64) -> Vec<LaneSpec> {
    gen_uniform_lanes(n, LANE_RANGE, LANE_RANGE, seed).expect("preset ranges are valid")
}

fn base(name: &str, lanes: Vec<LaneSpec>, cluster: ClusterSpec, seed: u64) -> Scenario {
    Scenario {
        name: name.to_string(),
        lanes,
        cluster,
        train: TrainConfig::default(),
        seed,
        allreduce: AllreduceCost { base: K80_SYNC, per_device: 0.0 },
        batch_sizes: vec![],
    }
}

pub fn preset_scenario(name: &str) -> Result<Scenario> {
    let scenario = match name {
        "homog-4xK80" => base(name, uniform_lanes(24, 24), k80_cluster(4), 24),
        "hetero-4gpu" => base(name, uniform_lanes(24, 24), hetero_cluster(), 24),
        "fig3-8lane" | "batch-sweep" => {
            let lanes = (0..8).map(|i| LaneSpec { id: format!("lane-{i}"), width: 4, depth: 2 }).collect();
            let mut cluster = k80_cluster(8);
            cluster.intra_host_sync = FIG3_SYNC;
            let mut s = base(name, lanes, cluster, 0);
            s.allreduce = AllreduceCost { base: FIG3_ALLREDUCE, per_device: 0.0 };
            if name == "batch-sweep" {
                s.batch_sizes = BATCH_SWEEP.to_vec();
            }
            s
        }
        _ => match name.strip_prefix("lanes-").and_then(|n| n.parse::<usize>().ok()) {
            Some(n) if LANE_COUNTS.contains(&n) => base(name, uniform_lanes(n, n as u64), k80_cluster(4), n as u64),
            _ => return Err(Error::UnknownScenario { name: name.to_string(), catalog: catalog() }),
        },
    };
    Ok(scenario)
}
