//! Argument parsing and resolution of flags into command configs.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lanebal_core::lane_model::TimeFactors;
use lanebal_core::partitioner::{AssignmentFile, DEFAULT_EXACT_LIMIT};
use lanebal_core::simulator::AllreduceCost;
use lanebal_core::workload::{catalog, preset_scenario};
use lanebal_core::{ClusterSpec, GreedyRule, LaneSpec, Mode, ProbeResult, Scenario, TrainConfig};
use serde::de::DeserializeOwned;

use crate::commands::{execute, Outcome};
use crate::error::{CliError, Result};
use crate::manifest::{CommandConfig, PlanStrategy, RunManifest};
use crate::output::{json_bytes, manifest_path, write_atomic};

#[derive(Parser)]
#[command(name = "lanebal", version, about = "Plan lane placement on accelerator clusters and simulate training time")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Turn probe runtimes into device time factors.
    Calibrate {
        /// JSON list of {"device_id", "runtime"}.
        #[arg(long)]
        probes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign lanes to devices.
    Plan(PlanArgs),
    /// Per-epoch timing for each batch size of a scenario.
    Simulate(SimulateArgs),
    /// Timing over a grid of device counts, batch sizes and modes.
    Sweep(SweepArgs),
    /// Greedy vs round-robin vs random (and exact when small) per scenario.
    BenchPartition(BenchArgs),
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Rerun a command from its manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Write outputs here instead of the recorded paths.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
pub enum ScenarioCommand {
    /// Print the preset names.
    List,
    /// Write a preset as JSON.
    Dump {
        #[arg(long)]
        name: String,
        /// Standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
pub struct ScenarioArgs {
    /// Preset name or scenario JSON file.
    #[arg(long)]
    scenario: Option<String>,
    /// JSON list of lanes; replaces the scenario's lanes.
    #[arg(long)]
    lanes: Option<PathBuf>,
    /// Preset name (its cluster) or cluster JSON file.
    #[arg(long)]
    cluster: Option<String>,
    /// Calibrated time factors to apply to the cluster.
    #[arg(long)]
    factors: Option<PathBuf>,
    /// Per-lane overhead in work units.
    #[arg(long)]
    overhead: Option<f64>,
}

#[derive(Args)]
pub struct PlanArgs {
    #[command(flatten)]
    input: ScenarioArgs,
    /// Use only the first N devices.
    #[arg(long)]
    devices: Option<usize>,
    #[arg(long, value_enum, default_value = "greedy")]
    strategy: PlanStrategy,
    #[arg(long, env = "LANEBAL_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_rule, default_value = "increment")]
    greedy_rule: GreedyRule,
    /// Largest lane count the exact solver accepts.
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    limit: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    input: ScenarioArgs,
    #[arg(long, value_parser = parse_mode, default_value = "model-parallel")]
    mode: Mode,
    /// Assignment file from `plan`. Greedy is used when absent.
    #[arg(long)]
    assignment: Option<PathBuf>,
    #[arg(long)]
    devices: Option<usize>,
    /// Batch sizes; defaults to the scenario's.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
    batch: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the epoch reports as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    input: ScenarioArgs,
    /// Device counts; defaults to powers of two up to the cluster size.
    #[arg(long, value_delimiter = ',')]
    gpus: Vec<usize>,
    /// Batch sizes; defaults to the scenario's.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
    batches: Vec<u64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_mode, default_value = "data-parallel,model-parallel")]
    modes: Vec<Mode>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "lanes-6,lanes-9,lanes-12,lanes-24")]
    scenarios: Vec<String>,
    /// Run every scenario on this cluster (preset name or JSON file).
    #[arg(long)]
    cluster: Option<String>,
    /// Random assignments per scenario.
    #[arg(short = 'k', long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    random_seeds: u64,
    /// Random assignment seeds are first_seed .. first_seed + k.
    #[arg(long, env = "LANEBAL_SEED", default_value_t = 0)]
    first_seed: u64,
    #[arg(long, default_value_t = 0.0)]
    overhead: f64,
    /// Summary CSV, one row per scenario.
    #[arg(long)]
    out: PathBuf,
    /// Per-seed CSV; defaults to `<out>.seeds.csv`.
    #[arg(long)]
    detail: Option<PathBuf>,
    /// Summary as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    match s {
        "model-parallel" | "model" => Ok(Mode::ModelParallel),
        "data-parallel" | "data" => Ok(Mode::DataParallel),
        _ => Err(format!("unknown mode '{s}' (model-parallel, data-parallel)")),
    }
}

fn parse_rule(s: &str) -> std::result::Result<GreedyRule, String> {
    match s {
        "increment" => Ok(GreedyRule::Increment),
        "emptiest" => Ok(GreedyRule::Emptiest),
        _ => Err(format!("unknown greedy rule '{s}' (increment, emptiest)")),
    }
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Parse { path: path.into(), source })
}

fn is_preset(name: &str) -> bool {
    catalog().iter().any(|n| n == name)
}

fn resolve_scenario(spec: &str) -> Result<Scenario> {
    if is_preset(spec) || !Path::new(spec).exists() {
        return Ok(preset_scenario(spec)?);
    }
    load_json(Path::new(spec))
}

fn resolve_cluster(spec: &str) -> Result<(String, ClusterSpec)> {
    if is_preset(spec) || !Path::new(spec).exists() {
        return Ok((spec.to_string(), preset_scenario(spec)?.cluster));
    }
    let path = Path::new(spec);
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| spec.to_string());
    Ok((name, load_json(path)?))
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<Scenario> {
        let mut scenario = match (&self.scenario, &self.lanes, &self.cluster) {
            (Some(spec), _, _) => resolve_scenario(spec)?,
            (None, Some(lanes), Some(cluster)) => Scenario {
                name: lanes.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "custom".into()),
                lanes: vec![],
                cluster: resolve_cluster(cluster)?.1,
                train: TrainConfig::default(),
                seed: 0,
                allreduce: AllreduceCost::default(),
                batch_sizes: vec![],
            },
            _ => return Err(CliError::Usage("give --scenario, or --lanes together with --cluster".into())),
        };
        if let Some(path) = &self.lanes {
            scenario.lanes = load_json::<Vec<LaneSpec>>(path)?;
        }
        if let (Some(_), Some(spec)) = (&self.scenario, &self.cluster) {
            let (name, cluster) = resolve_cluster(spec)?;
            scenario.name = format!("{}@{name}", scenario.name);
            scenario.cluster = cluster;
        }
        if let Some(path) = &self.factors {
            scenario.cluster = scenario.cluster.with_factors(&load_json::<TimeFactors>(path)?)?;
        }
        if let Some(overhead) = self.overhead {
            scenario.train.per_lane_overhead = overhead;
        }
        scenario.validate()?;
        Ok(scenario)
    }
}

fn truncate(mut scenario: Scenario, devices: Option<usize>) -> Result<Scenario> {
    if let Some(n) = devices {
        scenario.cluster = scenario.cluster.truncated(n)?;
    }
    Ok(scenario)
}

/// Runs the config, writes its outputs and manifest, returns stdout text.
pub fn run_config(config: &CommandConfig) -> Result<String> {
    let Outcome { files, stdout, notes } = execute(config)?;
    for (path, bytes) in &files {
        write_atomic(path, bytes)?;
    }
    let outputs = files.into_iter().map(|(p, _)| p).collect();
    let manifest = RunManifest::new(config, outputs, notes);
    write_atomic(&manifest_path(config.primary_output()), &json_bytes(&manifest))?;
    Ok(stdout)
}

pub fn dispatch(command: Command) -> Result<String> {
    let config = match command {
        Command::Calibrate { probes, out } => {
            let list: Vec<ProbeResult> = load_json(&probes)?;
            CommandConfig::Calibrate { probes_file: probes, probes: list, out }
        }
        Command::Plan(a) => CommandConfig::Plan {
            scenario: truncate(a.input.resolve()?, a.devices)?,
            strategy: a.strategy,
            seed: a.seed,
            greedy_rule: a.greedy_rule,
            limit: a.limit,
            out: a.out,
        },
        Command::Simulate(a) => {
            let scenario = a.input.resolve()?;
            let devices = a.devices.unwrap_or(scenario.cluster.len());
            let batches = if a.batch.is_empty() { scenario.batches() } else { a.batch };
            let assignment = a.assignment.as_deref().map(load_json::<AssignmentFile>).transpose()?;
            CommandConfig::Simulate { scenario, mode: a.mode, devices, batches, assignment, out: a.out, json: a.json }
        }
        Command::Sweep(a) => {
            let scenario = a.input.resolve()?;
            let gpus = if a.gpus.is_empty() {
                (0..).map(|k| 1usize << k).take_while(|&g| g <= scenario.cluster.len()).collect()
            } else {
                a.gpus
            };
            let batches = if a.batches.is_empty() { scenario.batches() } else { a.batches };
            CommandConfig::Sweep { scenario, gpus, batches, modes: a.modes, out: a.out }
        }
        Command::BenchPartition(a) => {
            let cluster = a.cluster.as_deref().map(resolve_cluster).transpose()?;
            let scenarios = a
                .scenarios
                .iter()
                .map(|spec| {
                    let mut s = resolve_scenario(spec)?;
                    if let Some((name, cluster)) = &cluster {
                        s.name = format!("{}@{name}", s.name);
                        s.cluster = cluster.clone();
                    }
                    Ok(s)
                })
                .collect::<Result<Vec<_>>>()?;
            let detail = a.detail.unwrap_or_else(|| a.out.with_extension("seeds.csv"));
            CommandConfig::BenchPartition {
                scenarios,
                random_seeds: a.random_seeds as usize,
                first_seed: a.first_seed,
                per_lane_overhead: a.overhead,
                out: a.out,
                detail,
                json: a.json,
            }
        }
        Command::Scenario(ScenarioCommand::List) => return Ok(catalog().join("\n") + "\n"),
        Command::Scenario(ScenarioCommand::Dump { name, out }) => {
            let scenario = preset_scenario(&name)?;
            match out {
                Some(out) => CommandConfig::ScenarioDump { scenario, out },
                None => return Ok(String::from_utf8(json_bytes(&scenario)).expect("json is utf-8")),
            }
        }
        Command::Replay { manifest, out_dir } => {
            let mut config = RunManifest::load(&manifest)?.config;
            if let Some(dir) = out_dir {
                config.rebase_outputs(&dir);
            }
            config
        }
    };
    run_config(&config)
}

/// Parses `args` (program name first) and runs the command. Returns the
/// text meant for standard output.
pub fn run<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    dispatch(cli.command)
}
