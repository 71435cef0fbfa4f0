use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use lanebal_core::partitioner::AssignmentFile;
use lanebal_core::{GreedyRule, Mode, ProbeResult, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlanStrategy {
    Greedy,
    Random,
    Roundrobin,
    Exact,
}

/// Fully resolved inputs of one command. Everything a rerun needs is in
/// here, input file contents included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CommandConfig {
    Calibrate {
        probes_file: PathBuf,
        probes: Vec<ProbeResult>,
        out: PathBuf,
    },
    Plan {
        scenario: Scenario,
        strategy: PlanStrategy,
        seed: u64,
        greedy_rule: GreedyRule,
        limit: usize,
        out: PathBuf,
    },
    Simulate {
        scenario: Scenario,
        mode: Mode,
        devices: usize,
        batches: Vec<u64>,
        assignment: Option<AssignmentFile>,
        out: PathBuf,
        json: Option<PathBuf>,
    },
    Sweep {
        scenario: Scenario,
        gpus: Vec<usize>,
        batches: Vec<u64>,
        modes: Vec<Mode>,
        out: PathBuf,
    },
    BenchPartition {
        scenarios: Vec<Scenario>,
        random_seeds: usize,
        first_seed: u64,
        per_lane_overhead: f64,
        out: PathBuf,
        detail: PathBuf,
        json: Option<PathBuf>,
    },
    ScenarioDump {
        scenario: Scenario,
        out: PathBuf,
    },
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Calibrate { .. } => "calibrate",
            Self::Plan { .. } => "plan",
            Self::Simulate { .. } => "simulate",
            Self::Sweep { .. } => "sweep",
            Self::BenchPartition { .. } => "bench-partition",
            Self::ScenarioDump { .. } => "scenario-dump",
        }
    }

    /// The output the manifest is written next to.
    pub fn primary_output(&self) -> &Path {
        match self {
            Self::Calibrate { out, .. }
            | Self::Plan { out, .. }
            | Self::Simulate { out, .. }
            | Self::Sweep { out, .. }
            | Self::BenchPartition { out, .. }
            | Self::ScenarioDump { out, .. } => out,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match self {
            Self::Calibrate { .. } => vec![],
            Self::Plan { scenario, strategy, seed, .. } => match strategy {
                PlanStrategy::Random => vec![scenario.seed, *seed],
                _ => vec![scenario.seed],
            },
            Self::Simulate { scenario, .. } | Self::Sweep { scenario, .. } | Self::ScenarioDump { scenario, .. } => {
                vec![scenario.seed]
            }
            Self::BenchPartition { scenarios, random_seeds, first_seed, .. } => {
                let mut seeds: Vec<u64> = scenarios.iter().map(|s| s.seed).collect();
                seeds.extend(*first_seed..*first_seed + *random_seeds as u64);
                seeds
            }
        }
    }

    /// Moves every output path into `dir`, keeping file names.
    pub fn rebase_outputs(&mut self, dir: &Path) {
        let move_into = |p: &mut PathBuf| {
            if let Some(name) = p.file_name() {
                *p = dir.join(name);
            }
        };
        match self {
            Self::Calibrate { out, .. }
            | Self::Plan { out, .. }
            | Self::Sweep { out, .. }
            | Self::ScenarioDump { out, .. } => move_into(out),
            Self::Simulate { out, json, .. } => {
                move_into(out);
                json.iter_mut().for_each(move_into);
            }
            Self::BenchPartition { out, detail, json, .. } => {
                move_into(out);
                move_into(detail);
                json.iter_mut().for_each(move_into);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: CommandConfig,
    pub seeds: Vec<u64>,
    pub outputs: Vec<PathBuf>,
    #[serde(default)]
    pub notes: Vec<String>,
    pub created_unix_secs: u64,
}

impl RunManifest {
    pub fn new(config: &CommandConfig, outputs: Vec<PathBuf>, notes: Vec<String>) -> Self {
        let created_unix_secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: config.name().into(),
            config: config.clone(),
            seeds: config.seeds(),
            outputs,
            notes,
            created_unix_secs,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| CliError::Parse { path: path.into(), source })
    }
}
