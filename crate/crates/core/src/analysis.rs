//! Statistics and comparison campaigns.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lane_model::{effective_time, lane_work, ClusterSpec, DeviceSpec, LaneSpec};
use crate::partitioner::{
    exact_indices, greedy_indices, makespan, random_indices, round_robin_indices, GreedyRule, DEFAULT_EXACT_LIMIT,
};
use crate::simulator::{sim_model_parallel_indices, TrainConfig};
use crate::workload::{gen_uniform_lanes, Scenario, LANE_RANGE};

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("xs"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("ys"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Correlation between the cost model's predictions and synthetic
/// measurements `effective_time × exp(N(0, σ))`.
pub fn validate_cost_model(lanes: &[LaneSpec], device: &DeviceSpec, noise_sigma: f64, seed: u64) -> Result<f64> {
    if lanes.len() < 10 {
        return Err(Error::DegenerateSample(format!("need at least 10 lanes, got {}", lanes.len())));
    }
    let distinct: BTreeSet<u64> = lanes.iter().map(|l| lane_work(l) as u64).collect();
    if distinct.len() < 3 {
        return Err(Error::DegenerateSample(format!("need at least 3 distinct works, got {}", distinct.len())));
    }
    device.validate()?;
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let predicted: Vec<f64> = lanes.iter().map(|l| effective_time(l, device, 0.0)).collect();
    let measured: Vec<f64> = predicted.iter().map(|p| p * noise.sample(&mut rng).exp()).collect();
    pearson(&predicted, &measured)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    /// Number of random assignments (K).
    pub random_seeds: usize,
    /// Random assignment seeds are `first_seed .. first_seed + K`.
    pub first_seed: u64,
    /// Overhead charged when measuring loads. Planning ignores it.
    pub per_lane_overhead: f64,
}

impl CampaignConfig {
    pub fn new(random_seeds: usize) -> Self {
        Self { random_seeds, first_seed: 0, per_lane_overhead: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub lanes: usize,
    pub devices: usize,
    pub greedy_makespan: f64,
    pub round_robin_makespan: f64,
    pub exact_makespan: Option<f64>,
    pub random_mean: f64,
    pub random_stddev: f64,
    pub random_min: f64,
    pub random_max: f64,
    pub ratio_random_over_greedy: f64,
    pub random_seeds: usize,
    /// Only one random seed: the standard deviation is reported as 0.
    pub single_seed: bool,
    /// Wall-clock time of the greedy planner. Not deterministic, so never
    /// serialized.
    #[serde(skip)]
    pub plan_time_secs: f64,
}

/// One strategy evaluation within a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRun {
    pub scenario: String,
    pub strategy: String,
    pub seed: Option<u64>,
    pub makespan: f64,
    pub step_time: f64,
    /// makespan ÷ greedy makespan.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub report: ComparisonReport,
    /// greedy, roundrobin, exact (when run), then random by seed.
    pub runs: Vec<StrategyRun>,
}

/// Greedy vs round-robin vs K random assignments (and exact when the lane
/// count is within the exact solver's limit) on the scenario's cluster.
pub fn compare_strategies(scenario: &Scenario, config: &CampaignConfig) -> Result<Comparison> {
    if config.random_seeds == 0 {
        return Err(Error::InvalidArgument("need at least one random seed".into()));
    }
    scenario.validate()?;
    let (lanes, cluster) = (&scenario.lanes, &scenario.cluster);
    let overhead = config.per_lane_overhead;
    let train = TrainConfig { per_lane_overhead: overhead, ..scenario.train.clone() };
    let run = |strategy: &str, seed: Option<u64>, indices: &[usize]| -> Result<StrategyRun> {
        let report = sim_model_parallel_indices(lanes, cluster, indices, &train)?;
        Ok(StrategyRun {
            scenario: scenario.name.clone(),
            strategy: strategy.to_string(),
            seed,
            makespan: makespan(indices, lanes, cluster, overhead),
            step_time: report.step_time,
            ratio: 0.0,
        })
    };

    let started = Instant::now();
    let greedy = greedy_indices(lanes, cluster, GreedyRule::Increment)?;
    let plan_time_secs = started.elapsed().as_secs_f64();

    let mut runs = vec![run("greedy", None, &greedy)?, run("roundrobin", None, &round_robin_indices(lanes, cluster)?)?];
    if lanes.len() <= DEFAULT_EXACT_LIMIT {
        runs.push(run("exact", None, &exact_indices(lanes, cluster, DEFAULT_EXACT_LIMIT)?)?);
    }
    let random: Vec<StrategyRun> = (0..config.random_seeds as u64)
        .into_par_iter()
        .map(|i| {
            let seed = config.first_seed + i;
            run("random", Some(seed), &random_indices(lanes, cluster, seed)?)
        })
        .collect::<Result<_>>()?;
    runs.extend(random);

    let greedy_makespan = runs[0].makespan;
    for r in &mut runs {
        r.ratio = r.makespan / greedy_makespan;
    }
    let stats = Summary::of(runs.iter().filter(|r| r.strategy == "random").map(|r| r.makespan));
    let report = ComparisonReport {
        scenario: scenario.name.clone(),
        lanes: lanes.len(),
        devices: cluster.len(),
        greedy_makespan,
        round_robin_makespan: runs[1].makespan,
        exact_makespan: runs.iter().find(|r| r.strategy == "exact").map(|r| r.makespan),
        random_mean: stats.mean,
        random_stddev: stats.stddev,
        random_min: stats.min,
        random_max: stats.max,
        ratio_random_over_greedy: stats.mean / greedy_makespan,
        random_seeds: config.random_seeds,
        single_seed: config.random_seeds == 1,
        plan_time_secs,
    };
    Ok(Comparison { report, runs })
}

/// Mean, sample standard deviation (0 for a single value) and extrema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let values: Vec<f64> = values.into_iter().collect();
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let stddev = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { count, mean, stddev, min, max }
    }
}

/// `random mean ÷ greedy` for freshly generated uniform lane sets, one per
/// workload seed, on a fixed cluster.
pub fn ratio_over_workload_seeds(
    lane_count: usize,
    cluster: &ClusterSpec,
    workload_seeds: impl IntoIterator<Item = u64>,
    config: &CampaignConfig,
) -> Result<Vec<f64>> {
    let seeds: Vec<u64> = workload_seeds.into_iter().collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let lanes = gen_uniform_lanes(lane_count, LANE_RANGE, LANE_RANGE, seed)?;
            let greedy = makespan(
                &greedy_indices(&lanes, cluster, GreedyRule::Increment)?,
                &lanes,
                cluster,
                config.per_lane_overhead,
            );
            let mut total = 0.0;
            for i in 0..config.random_seeds as u64 {
                let idx = random_indices(&lanes, cluster, config.first_seed + i)?;
                total += makespan(&idx, &lanes, cluster, config.per_lane_overhead);
            }
            Ok(total / config.random_seeds as f64 / greedy)
        })
        .collect()
}
