//! Command execution. Every command maps a resolved [`CommandConfig`] to
//! output file bodies; nothing here touches the filesystem.

use std::path::{Path, PathBuf};

use lanebal_core::analysis::{compare_strategies, CampaignConfig, Comparison};
use lanebal_core::lane_model::calibrate;
use lanebal_core::partitioner::{load_report_from_indices, AssignmentFile, Strategy};
use lanebal_core::simulator::{sim_model_parallel, simulate, EpochReport};
use lanebal_core::{Assignment, GreedyRule, Mode, Scenario};

use crate::error::{CliError, Result};
use crate::manifest::{CommandConfig, PlanStrategy};
use crate::output::{csv_bytes, g6, json_bytes};

pub const EPOCH_HEADER: [&str; 11] = [
    "scenario",
    "mode",
    "devices",
    "batch",
    "steps",
    "step_time",
    "epoch_time",
    "compute",
    "sync",
    "network",
    "speedup",
];
pub const SEED_HEADER: [&str; 6] = ["scenario", "strategy", "seed", "makespan", "step_time", "ratio"];
pub const SUMMARY_HEADER: [&str; 13] = [
    "scenario",
    "lanes",
    "devices",
    "greedy_makespan",
    "round_robin_makespan",
    "exact_makespan",
    "random_mean",
    "random_stddev",
    "random_min",
    "random_max",
    "ratio_random_over_greedy",
    "random_seeds",
    "single_seed",
];

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(PathBuf, Vec<u8>)>,
    pub stdout: String,
    pub notes: Vec<String>,
}

pub fn execute(config: &CommandConfig) -> Result<Outcome> {
    match config {
        CommandConfig::Calibrate { probes, out, .. } => {
            let factors = calibrate(probes)?;
            Ok(Outcome { files: vec![(out.to_path_buf(), json_bytes(&factors))], ..Outcome::default() })
        }
        CommandConfig::Plan { scenario, strategy, seed, greedy_rule, limit, out } => {
            plan(scenario, *strategy, *seed, *greedy_rule, *limit, out)
        }
        CommandConfig::Simulate { scenario, mode, devices, batches, assignment, out, json } => {
            simulate_rows(scenario, *mode, *devices, batches, assignment.as_ref(), out, json.as_deref())
        }
        CommandConfig::Sweep { scenario, gpus, batches, modes, out } => sweep(scenario, gpus, batches, modes, out),
        CommandConfig::BenchPartition { scenarios, random_seeds, first_seed, per_lane_overhead, out, detail, json } => {
            let campaign = CampaignConfig {
                random_seeds: *random_seeds,
                first_seed: *first_seed,
                per_lane_overhead: *per_lane_overhead,
            };
            bench(scenarios, &campaign, out, detail, json.as_deref())
        }
        CommandConfig::ScenarioDump { scenario, out } => {
            scenario.validate()?;
            Ok(Outcome { files: vec![(out.to_path_buf(), json_bytes(scenario))], ..Outcome::default() })
        }
    }
}

pub fn strategy_of(strategy: PlanStrategy, seed: u64, rule: GreedyRule, limit: usize) -> Strategy {
    match strategy {
        PlanStrategy::Greedy => Strategy::Greedy(rule),
        PlanStrategy::Random => Strategy::Random { seed },
        PlanStrategy::Roundrobin => Strategy::RoundRobin,
        PlanStrategy::Exact => Strategy::Exact { limit },
    }
}

fn plan(
    scenario: &Scenario,
    strategy: PlanStrategy,
    seed: u64,
    rule: GreedyRule,
    limit: usize,
    out: &Path,
) -> Result<Outcome> {
    scenario.validate()?;
    let strategy = strategy_of(strategy, seed, rule, limit);
    let indices = strategy.indices(&scenario.lanes, &scenario.cluster)?;
    let assignment = Assignment::from_indices(
        strategy.name(),
        matches!(strategy, Strategy::Random { .. }).then_some(seed),
        &scenario.lanes,
        &scenario.cluster,
        &indices,
    );
    let report =
        load_report_from_indices(&indices, &scenario.lanes, &scenario.cluster, scenario.train.per_lane_overhead);
    let stdout = format!(
        "makespan {}\nlower_bound {}\nimbalance {}\n",
        g6(report.makespan),
        g6(report.lower_bound),
        g6(report.imbalance)
    );
    let file = AssignmentFile::new(&assignment, &report);
    Ok(Outcome { files: vec![(out.to_path_buf(), json_bytes(&file))], stdout, notes: vec![] })
}

fn epoch_row(scenario: &str, report: &EpochReport, speedup: f64) -> Vec<String> {
    vec![
        scenario.to_string(),
        report.mode.to_string(),
        report.device_count.to_string(),
        report.batch_size.to_string(),
        report.steps.to_string(),
        g6(report.step_time),
        g6(report.epoch_time),
        g6(report.compute_time),
        g6(report.sync_time),
        g6(report.network_time),
        g6(speedup),
    ]
}

fn simulate_rows(
    scenario: &Scenario,
    mode: Mode,
    devices: usize,
    batches: &[u64],
    assignment: Option<&AssignmentFile>,
    out: &Path,
    json: Option<&Path>,
) -> Result<Outcome> {
    scenario.validate()?;
    let mut notes = vec![];
    if assignment.is_some() && mode == Mode::DataParallel {
        return Err(CliError::Usage("an assignment applies only to model-parallel simulation".into()));
    }
    if assignment.is_none() && mode == Mode::ModelParallel {
        notes.push("no assignment given: lanes placed by greedy (increment rule)".to_string());
    }
    let mut rows = vec![];
    let mut reports = vec![];
    for &batch in batches {
        let baseline = simulate(scenario, mode, 1, batch)?.epoch_time;
        let report = match assignment {
            Some(file) => {
                let cluster = scenario.cluster.truncated(devices)?;
                sim_model_parallel(&scenario.lanes, &cluster, &file.to_assignment(), &scenario.train.with_batch(batch))?
            }
            None => simulate(scenario, mode, devices, batch)?,
        };
        rows.push(epoch_row(&scenario.name, &report, baseline / report.epoch_time));
        reports.push(report);
    }
    let mut files = vec![(out.to_path_buf(), csv_bytes(&EPOCH_HEADER, &rows)?)];
    if let Some(path) = json {
        files.push((path.to_path_buf(), json_bytes(&reports)));
    }
    Ok(Outcome { files, stdout: String::new(), notes })
}

fn sweep(scenario: &Scenario, gpus: &[usize], batches: &[u64], modes: &[Mode], out: &Path) -> Result<Outcome> {
    scenario.validate()?;
    if gpus.is_empty() || batches.is_empty() || modes.is_empty() {
        return Err(CliError::Usage("sweep lists must be non-empty".into()));
    }
    let mut gpus = gpus.to_vec();
    gpus.push(1);
    gpus.sort_unstable();
    gpus.dedup();
    let mut batches = batches.to_vec();
    batches.sort_unstable();
    batches.dedup();
    let mut modes = modes.to_vec();
    modes.sort_unstable();
    modes.dedup();

    let mut rows = vec![];
    for &mode in &modes {
        for &g in &gpus {
            for &batch in &batches {
                let baseline = simulate(scenario, mode, 1, batch)?.epoch_time;
                let report = simulate(scenario, mode, g, batch)?;
                rows.push(epoch_row(&scenario.name, &report, baseline / report.epoch_time));
            }
        }
    }
    Ok(Outcome { files: vec![(out.to_path_buf(), csv_bytes(&EPOCH_HEADER, &rows)?)], ..Outcome::default() })
}

fn bench(
    scenarios: &[Scenario],
    campaign: &CampaignConfig,
    out: &Path,
    detail: &Path,
    json: Option<&Path>,
) -> Result<Outcome> {
    if scenarios.is_empty() {
        return Err(CliError::Usage("no scenarios to benchmark".into()));
    }
    let comparisons: Vec<Comparison> =
        scenarios.iter().map(|s| compare_strategies(s, campaign)).collect::<Result<_, _>>()?;

    let summary: Vec<Vec<String>> = comparisons
        .iter()
        .map(|c| {
            let r = &c.report;
            vec![
                r.scenario.clone(),
                r.lanes.to_string(),
                r.devices.to_string(),
                g6(r.greedy_makespan),
                g6(r.round_robin_makespan),
                r.exact_makespan.map(g6).unwrap_or_default(),
                g6(r.random_mean),
                g6(r.random_stddev),
                g6(r.random_min),
                g6(r.random_max),
                g6(r.ratio_random_over_greedy),
                r.random_seeds.to_string(),
                r.single_seed.to_string(),
            ]
        })
        .collect();
    let seeds: Vec<Vec<String>> = comparisons
        .iter()
        .flat_map(|c| &c.runs)
        .map(|run| {
            vec![
                run.scenario.clone(),
                run.strategy.clone(),
                run.seed.map(|s| s.to_string()).unwrap_or_default(),
                g6(run.makespan),
                g6(run.step_time),
                g6(run.ratio),
            ]
        })
        .collect();

    let mut files = vec![
        (out.to_path_buf(), csv_bytes(&SUMMARY_HEADER, &summary)?),
        (detail.to_path_buf(), csv_bytes(&SEED_HEADER, &seeds)?),
    ];
    if let Some(path) = json {
        let reports: Vec<_> = comparisons.iter().map(|c| &c.report).collect();
        files.push((path.to_path_buf(), json_bytes(&reports)));
    }
    let stdout = comparisons
        .iter()
        .map(|c| format!("{} ratio_random_over_greedy {}\n", c.report.scenario, g6(c.report.ratio_random_over_greedy)))
        .collect();
    Ok(Outcome { files, stdout, notes: vec![] })
}
