use thiserror::Error;

/// Errors produced by the lane model, partitioners, simulator and campaigns.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no probes")]
    NoProbes,
    #[error("duplicate probe for device `{0}`")]
    DuplicateProbe(String),
    #[error("invalid runtime {runtime} for device `{device_id}`")]
    InvalidRuntime { device_id: String, runtime: f64 },

    #[error("missing reference device `{0}`")]
    MissingReference(String),
    #[error("invalid speedup {speedup} for device `{device_id}`")]
    InvalidSpeedup { device_id: String, speedup: f64 },

    #[error("invalid lane `{id}`: width and depth must be >= 1 (got {width}x{depth})")]
    InvalidLane { id: String, width: u32, depth: u32 },
    #[error("duplicate lane id `{0}`")]
    DuplicateLane(String),
    #[error("empty lane list")]
    EmptyLanes,

    #[error("invalid device `{id}`: time_factor must be finite and > 0 (got {time_factor})")]
    InvalidDevice { id: String, time_factor: f64 },
    #[error("duplicate device id `{0}`")]
    DuplicateDevice(String),
    #[error("cluster has no devices")]
    EmptyCluster,
    #[error("invalid communication constant `{name}` = {value}: must be finite and >= 0")]
    InvalidCommunication { name: &'static str, value: f64 },
    #[error("requested {requested} devices but the cluster only has {available}")]
    TooFewDevices { requested: usize, available: usize },

    #[error("instance too large for exact solver ({lanes} lanes, limit {limit})")]
    InstanceTooLarge { lanes: usize, limit: usize },
    #[error("assignment references unknown lane `{0}`")]
    UnknownLane(String),
    #[error("assignment references unknown device `{0}`")]
    UnknownDevice(String),
    #[error("lane `{0}` is assigned more than once")]
    DuplicateAssignment(String),
    #[error("lane `{0}` is not assigned to any device")]
    UnassignedLane(String),

    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),
    #[error("no observations to fit")]
    NoObservations,
    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("invalid range [{min}, {max}] for {what}")]
    InvalidRange { what: &'static str, min: u32, max: u32 },
    #[error("unknown scenario `{name}`; available: {}", catalog.join(", "))]
    UnknownScenario { name: String, catalog: Vec<String> },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
