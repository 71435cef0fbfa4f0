//! Analytic per-epoch training time for model-parallel and data-parallel
//! execution.
//!
//! One training step costs `compute + sync + network`:
//!
//! * model-parallel: `compute` is the assignment makespan scaled by
//!   `batch / reference_batch`; `sync` is `intra_host_sync` once more than
//!   one device holds lanes; `network` is `inter_host_penalty × (hosts - 1)`
//!   over the hosts holding lanes.
//! * data-parallel: `compute` is `total_work × batch / reference_batch / G`
//!   on the slowest replica; `sync` is an allreduce costing
//!   `base + per_device × (G - 1)` for `G > 1`; there is no separate network
//!   term.
//!
//! Communication constants are per step and batch-independent, so larger
//! batches amortize them. An epoch is `ceil(samples / batch)` steps; the last
//! partial batch is charged as a full one.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lane_model::{ClusterSpec, LaneSpec};
use crate::partitioner::{device_loads, greedy_indices, Assignment, GreedyRule};
use crate::workload::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    DataParallel,
    ModelParallel,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DataParallel => "data-parallel",
            Self::ModelParallel => "model-parallel",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub samples_per_epoch: u64,
    pub batch_size: u64,
    /// Batch size at which lane work is measured.
    pub reference_batch: u64,
    pub per_lane_overhead: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { samples_per_epoch: 60_000, batch_size: 100, reference_batch: 100, per_lane_overhead: 0.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidTrainConfig(msg));
        if self.samples_per_epoch == 0 || self.batch_size == 0 || self.reference_batch == 0 {
            return bad("samples_per_epoch, batch_size and reference_batch must be >= 1".into());
        }
        if self.batch_size > self.samples_per_epoch {
            return bad(format!("batch_size {} exceeds samples_per_epoch {}", self.batch_size, self.samples_per_epoch));
        }
        if !(self.per_lane_overhead.is_finite() && self.per_lane_overhead >= 0.0) {
            return bad(format!("per_lane_overhead {} must be >= 0", self.per_lane_overhead));
        }
        Ok(())
    }

    pub fn with_batch(&self, batch_size: u64) -> Self {
        Self { batch_size, ..self.clone() }
    }

    pub fn steps(&self) -> u64 {
        self.samples_per_epoch.div_ceil(self.batch_size)
    }

    pub fn batch_scale(&self) -> f64 {
        self.batch_size as f64 / self.reference_batch as f64
    }
}

/// Allreduce cost of one data-parallel step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllreduceCost {
    pub base: f64,
    pub per_device: f64,
}

impl AllreduceCost {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("allreduce.base", self.base), ("allreduce.per_device", self.per_device)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidCommunication { name, value });
            }
        }
        Ok(())
    }

    pub fn step_cost(&self, devices: usize) -> f64 {
        if devices > 1 {
            self.base + self.per_device * (devices - 1) as f64
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub mode: Mode,
    pub device_count: usize,
    pub batch_size: u64,
    pub steps: u64,
    pub step_time: f64,
    pub epoch_time: f64,
    pub compute_time: f64,
    pub sync_time: f64,
    pub network_time: f64,
}

impl EpochReport {
    fn new(mode: Mode, device_count: usize, cfg: &TrainConfig, compute: f64, sync: f64, network: f64) -> Self {
        let steps = cfg.steps();
        let step_time = compute + sync + network;
        Self {
            mode,
            device_count,
            batch_size: cfg.batch_size,
            steps,
            step_time,
            epoch_time: steps as f64 * step_time,
            compute_time: compute,
            sync_time: sync,
            network_time: network,
        }
    }
}

pub fn sim_model_parallel(
    lanes: &[LaneSpec],
    cluster: &ClusterSpec,
    assignment: &Assignment,
    cfg: &TrainConfig,
) -> Result<EpochReport> {
    let indices = assignment.device_indices(lanes, cluster)?;
    sim_model_parallel_indices(lanes, cluster, &indices, cfg)
}

/// Model-parallel step from device indices in lane input order.
pub fn sim_model_parallel_indices(
    lanes: &[LaneSpec],
    cluster: &ClusterSpec,
    indices: &[usize],
    cfg: &TrainConfig,
) -> Result<EpochReport> {
    cluster.validate()?;
    cfg.validate()?;
    if indices.len() != lanes.len() || indices.iter().any(|&d| d >= cluster.len()) {
        return Err(Error::InvalidArgument("assignment does not match lanes and cluster".into()));
    }
    let loads = device_loads(indices, lanes, cluster, cfg.per_lane_overhead);
    let makespan = loads.iter().copied().fold(0.0, f64::max);
    let used: Vec<usize> = (0..cluster.len()).filter(|&d| indices.contains(&d)).collect();
    let hosts: HashSet<&str> = used.iter().map(|&d| cluster.devices[d].host.as_str()).collect();
    let sync = if used.len() > 1 { cluster.intra_host_sync } else { 0.0 };
    let network = cluster.inter_host_penalty * hosts.len().saturating_sub(1) as f64;
    Ok(EpochReport::new(Mode::ModelParallel, cluster.len(), cfg, makespan * cfg.batch_scale(), sync, network))
}

/// Data-parallel step: the batch splits evenly over all `G` replicas and
/// the slowest replica gates the step.
pub fn sim_data_parallel(
    total_work: f64,
    cluster: &ClusterSpec,
    cfg: &TrainConfig,
    allreduce: &AllreduceCost,
) -> Result<EpochReport> {
    cluster.validate()?;
    cfg.validate()?;
    allreduce.validate()?;
    if !(total_work.is_finite() && total_work > 0.0) {
        return Err(Error::InvalidArgument(format!("total work {total_work} must be > 0")));
    }
    let g = cluster.len();
    let compute = total_work * cfg.batch_scale() / g as f64 * cluster.slowest_factor();
    Ok(EpochReport::new(Mode::DataParallel, g, cfg, compute, allreduce.step_cost(g), 0.0))
}

/// Simulates a scenario on its first `devices` devices. Model-parallel runs
/// place lanes with the greedy partitioner.
pub fn simulate(scenario: &Scenario, mode: Mode, devices: usize, batch_size: u64) -> Result<EpochReport> {
    let cluster = scenario.cluster.truncated(devices)?;
    let cfg = scenario.train.with_batch(batch_size);
    match mode {
        Mode::ModelParallel => {
            let indices = greedy_indices(&scenario.lanes, &cluster, GreedyRule::Increment)?;
            sim_model_parallel_indices(&scenario.lanes, &cluster, &indices, &cfg)
        }
        Mode::DataParallel => sim_data_parallel(scenario.total_work(), &cluster, &cfg, &scenario.allreduce),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub devices: usize,
    pub speedup: f64,
    pub report: EpochReport,
}

impl CurvePoint {
    pub fn efficiency(&self) -> f64 {
        self.speedup / self.devices as f64
    }
}

/// Speedup of each device count over one device, at the scenario's batch.
pub fn speedup_curve(scenario: &Scenario, device_counts: &[usize], mode: Mode) -> Result<Vec<CurvePoint>> {
    speedup_curve_at(scenario, device_counts, mode, scenario.train.batch_size)
}

pub fn speedup_curve_at(
    scenario: &Scenario,
    device_counts: &[usize],
    mode: Mode,
    batch_size: u64,
) -> Result<Vec<CurvePoint>> {
    let baseline = simulate(scenario, mode, 1, batch_size)?.epoch_time;
    device_counts
        .iter()
        .map(|&devices| {
            let report = simulate(scenario, mode, devices, batch_size)?;
            Ok(CurvePoint { devices, speedup: baseline / report.epoch_time, report })
        })
        .collect()
}

/// Observed speedup at a device count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub devices: usize,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedConstant {
    pub name: String,
    pub value: f64,
    /// The search ended on the edge of the allowed range.
    pub at_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub devices: usize,
    pub observed: f64,
    pub predicted: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadFit {
    pub mode: Mode,
    pub constants: Vec<FittedConstant>,
    pub residuals: Vec<Residual>,
    pub rmse: f64,
}

impl OverheadFit {
    /// The scenario with the fitted constants written in.
    pub fn apply(&self, scenario: &Scenario) -> Scenario {
        let mut out = scenario.clone();
        for c in &self.constants {
            set_param(&mut out, &c.name, c.value);
        }
        out
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|c| c.name == name).map(|c| c.value)
    }
}

fn set_param(scenario: &mut Scenario, name: &str, value: f64) {
    match name {
        "intra_host_sync" => scenario.cluster.intra_host_sync = value,
        "inter_host_penalty" => scenario.cluster.inter_host_penalty = value,
        "allreduce.base" => scenario.allreduce.base = value,
        "allreduce.per_device" => scenario.allreduce.per_device = value,
        _ => unreachable!("unknown parameter {name}"),
    }
}

const GRID_1D: usize = 2001;
const GRID_2D: usize = 101;
const MAX_EVALS: usize = 200_000;

fn grid(points: usize, upper: f64) -> impl Iterator<Item = f64> + Clone {
    (0..points).map(move |i| upper * i as f64 / (points - 1) as f64)
}

/// Grid search over `[0, upper]^dims` followed by a compass search from the
/// best grid point. Moves try every direction in `{-1, 0, 1}^dims`; the step
/// doubles after a successful move and halves after a failed sweep.
fn minimize(f: impl Fn(&[f64]) -> f64, dims: usize, upper: f64) -> Vec<f64> {
    let points = if dims == 1 { GRID_1D } else { GRID_2D };
    let candidates: Vec<Vec<f64>> = match dims {
        1 => grid(points, upper).map(|x| vec![x]).collect(),
        2 => grid(points, upper).flat_map(|x| grid(points, upper).map(move |y| vec![x, y])).collect(),
        _ => unreachable!("at most two free constants"),
    };
    let (mut best_val, mut best) =
        candidates.into_iter().map(|c| (f(&c), c)).min_by(|a, b| a.0.total_cmp(&b.0)).expect("non-empty grid");

    let directions: Vec<Vec<f64>> = (0..3usize.pow(dims as u32))
        .map(|code| (0..dims).map(|k| (code / 3usize.pow(k as u32) % 3) as f64 - 1.0).collect::<Vec<f64>>())
        .filter(|dir| dir.iter().any(|&v| v != 0.0))
        .collect();
    let mut step = upper / (points - 1) as f64;
    let min_step = upper * 1e-15;
    let mut evals = 0;
    while step > min_step && evals < MAX_EVALS {
        let mut moved = false;
        for dir in &directions {
            let trial: Vec<f64> = best.iter().zip(dir).map(|(x, d)| (x + d * step).clamp(0.0, upper)).collect();
            evals += 1;
            let value = f(&trial);
            if value < best_val {
                (best_val, best) = (value, trial);
                moved = true;
                break;
            }
        }
        step = if moved { step * 2.0 } else { step / 2.0 };
    }
    best
}

/// Least-squares fit of the mode's communication constants to observed
/// speedups.
///
/// Free constants: the sync (model) or allreduce base (data) term always;
/// the second term (`inter_host_penalty` or `allreduce.per_device`) only
/// with two or more observations, and for model-parallel only when some
/// observed device count spans more than one host. Other constants keep the
/// scenario's values.
///
/// Search is deterministic: a uniform grid over `[0, upper]` per constant,
/// then a compass search from the best grid point, where `upper` is ten
/// times the single-device step compute time. A fit that cannot reproduce the
/// observations is still returned; its residuals and `at_bound` flags say so.
pub fn fit_overheads(observed: &[Observation], scenario: &Scenario, mode: Mode) -> Result<OverheadFit> {
    if observed.is_empty() {
        return Err(Error::NoObservations);
    }
    scenario.validate()?;
    for o in observed {
        if o.devices == 0 || o.devices > scenario.cluster.len() {
            return Err(Error::InvalidObservation(format!(
                "{} devices outside 1..={}",
                o.devices,
                scenario.cluster.len()
            )));
        }
        if !(o.speedup.is_finite() && o.speedup > 0.0) {
            return Err(Error::InvalidObservation(format!("speedup {} must be > 0", o.speedup)));
        }
    }

    let mut names: Vec<&'static str> = match mode {
        Mode::ModelParallel => vec!["intra_host_sync"],
        Mode::DataParallel => vec!["allreduce.base"],
    };
    if observed.len() >= 2 {
        match mode {
            Mode::ModelParallel if spans_hosts(scenario, observed)? => names.push("inter_host_penalty"),
            Mode::ModelParallel => {}
            Mode::DataParallel => names.push("allreduce.per_device"),
        }
    }

    let single = simulate(scenario, mode, 1, scenario.train.batch_size)?;
    let upper = 10.0 * single.compute_time;
    let objective = |params: &[f64]| -> f64 {
        let mut trial = scenario.clone();
        for (name, &v) in names.iter().zip(params) {
            set_param(&mut trial, name, v);
        }
        predictions(&trial, mode, observed)
            .map(|p| p.iter().zip(observed).map(|(p, o)| (p - o.speedup).powi(2)).sum())
            .unwrap_or(f64::INFINITY)
    };

    let best = minimize(objective, names.len(), upper);

    let mut fitted = scenario.clone();
    let constants = names
        .iter()
        .zip(&best)
        .map(|(name, &value)| {
            set_param(&mut fitted, name, value);
            FittedConstant { name: name.to_string(), value, at_bound: value <= 0.0 || value >= upper }
        })
        .collect();
    let predicted = predictions(&fitted, mode, observed)?;
    let residuals: Vec<Residual> = observed
        .iter()
        .zip(&predicted)
        .map(|(o, &p)| Residual { devices: o.devices, observed: o.speedup, predicted: p, residual: p - o.speedup })
        .collect();
    let rmse = (residuals.iter().map(|r| r.residual.powi(2)).sum::<f64>() / residuals.len() as f64).sqrt();
    Ok(OverheadFit { mode, constants, residuals, rmse })
}

fn spans_hosts(scenario: &Scenario, observed: &[Observation]) -> Result<bool> {
    for o in observed {
        let cluster = scenario.cluster.truncated(o.devices)?;
        let indices = greedy_indices(&scenario.lanes, &cluster, GreedyRule::Increment)?;
        let hosts: HashSet<&str> = indices.iter().map(|&d| cluster.devices[d].host.as_str()).collect();
        if hosts.len() > 1 {
            return Ok(true);
        }
    }
    Ok(false)
}

fn predictions(scenario: &Scenario, mode: Mode, observed: &[Observation]) -> Result<Vec<f64>> {
    let counts: Vec<usize> = observed.iter().map(|o| o.devices).collect();
    Ok(speedup_curve(scenario, &counts, mode)?.into_iter().map(|p| p.speedup).collect())
}
