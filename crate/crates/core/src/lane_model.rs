//! Lanes, devices and the lane cost model.
//!
//! A lane's device-independent work is `width² × depth`. Running it on a
//! device multiplies that work by the device's `time_factor`, a relative
//! slowness where the fastest device in a cluster is exactly `1.0`.
//!
//! Time factors come either from probing every device with the same tiny
//! workload ([`calibrate`]) or from published speedup constants
//! ([`factors_from_speedups`]). Work units are abstract: only ratios carry
//! meaning.

use std::collections::{BTreeMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Device id → time factor.
pub type TimeFactors = BTreeMap<String, f64>;

/// One lane: the unit of work placed on a device.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneSpec {
    pub id: String,
    /// Convolution filters per lane.
    pub width: u32,
    /// Convolutional steps.
    pub depth: u32,
}

impl LaneSpec {
    pub fn new(id: impl Into<String>, width: u32, depth: u32) -> Result<Self> {
        let lane = Self { id: id.into(), width, depth };
        lane.validate()?;
        Ok(lane)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.depth == 0 {
            return Err(Error::InvalidLane { id: self.id.clone(), width: self.width, depth: self.depth });
        }
        Ok(())
    }

    pub fn work(&self) -> f64 {
        lane_work(self)
    }
}

/// Checks every lane and id uniqueness. An empty set is rejected.
pub fn validate_lanes(lanes: &[LaneSpec]) -> Result<()> {
    if lanes.is_empty() {
        return Err(Error::EmptyLanes);
    }
    let mut seen = HashSet::with_capacity(lanes.len());
    for lane in lanes {
        lane.validate()?;
        if !seen.insert(lane.id.as_str()) {
            return Err(Error::DuplicateLane(lane.id.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub id: String,
    /// Relative slowness; 1.0 is the fastest device.
    pub time_factor: f64,
    pub host: String,
}

impl DeviceSpec {
    pub fn new(id: impl Into<String>, time_factor: f64, host: impl Into<String>) -> Self {
        Self { id: id.into(), time_factor, host: host.into() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time_factor.is_finite() && self.time_factor > 0.0) {
            return Err(Error::InvalidDevice { id: self.id.clone(), time_factor: self.time_factor });
        }
        Ok(())
    }
}

/// A set of devices plus the per-step communication constants used by the
/// simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub devices: Vec<DeviceSpec>,
    /// Synchronization cost per step whenever more than one device works.
    pub intra_host_sync: f64,
    /// Extra cost per step for every additional host spanned.
    pub inter_host_penalty: f64,
}

impl ClusterSpec {
    pub fn new(devices: Vec<DeviceSpec>, intra_host_sync: f64, inter_host_penalty: f64) -> Result<Self> {
        let cluster = Self { devices, intra_host_sync, inter_host_penalty };
        cluster.validate()?;
        Ok(cluster)
    }

    /// `n` devices with factor 1.0 on one host and no communication cost.
    pub fn identical(n: usize) -> Self {
        let devices = (0..n).map(|i| DeviceSpec::new(format!("gpu-{i}"), 1.0, "host-0")).collect();
        Self { devices, intra_host_sync: 0.0, inter_host_penalty: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.devices.is_empty() {
            return Err(Error::EmptyCluster);
        }
        let mut seen = HashSet::with_capacity(self.devices.len());
        for device in &self.devices {
            device.validate()?;
            if !seen.insert(device.id.as_str()) {
                return Err(Error::DuplicateDevice(device.id.clone()));
            }
        }
        for (name, value) in
            [("intra_host_sync", self.intra_host_sync), ("inter_host_penalty", self.inter_host_penalty)]
        {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidCommunication { name, value });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn device_index(&self, id: &str) -> Option<usize> {
        self.devices.iter().position(|d| d.id == id)
    }

    pub fn fastest_factor(&self) -> f64 {
        self.devices.iter().map(|d| d.time_factor).fold(f64::INFINITY, f64::min)
    }

    pub fn slowest_factor(&self) -> f64 {
        self.devices.iter().map(|d| d.time_factor).fold(0.0, f64::max)
    }

    /// The first `count` devices, keeping the communication constants.
    pub fn truncated(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.devices.len() {
            return Err(Error::TooFewDevices { requested: count, available: self.devices.len() });
        }
        Ok(Self { devices: self.devices[..count].to_vec(), ..self.clone() })
    }

    /// Same cluster with every factor divided by the smallest one.
    pub fn normalized(&self) -> Self {
        let fastest = self.fastest_factor();
        let devices =
            self.devices.iter().map(|d| DeviceSpec { time_factor: d.time_factor / fastest, ..d.clone() }).collect();
        Self { devices, ..self.clone() }
    }

    /// Replaces factors of the devices named in `factors`; others keep theirs.
    pub fn with_factors(&self, factors: &TimeFactors) -> Result<Self> {
        for id in factors.keys() {
            if self.device_index(id).is_none() {
                return Err(Error::UnknownDevice(id.clone()));
            }
        }
        let devices = self
            .devices
            .iter()
            .map(|d| DeviceSpec { time_factor: factors.get(&d.id).copied().unwrap_or(d.time_factor), ..d.clone() })
            .collect();
        let cluster = Self { devices, ..self.clone() };
        cluster.validate()?;
        Ok(cluster)
    }
}

/// Measured runtime of the probe workload on one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeResult {
    pub device_id: String,
    pub runtime: f64,
}

/// `width² × depth`.
pub fn lane_work(lane: &LaneSpec) -> f64 {
    let width = f64::from(lane.width);
    width * width * f64::from(lane.depth)
}

/// `(lane_work + per_lane_overhead) × time_factor`.
pub fn effective_time(lane: &LaneSpec, device: &DeviceSpec, per_lane_overhead: f64) -> f64 {
    (lane_work(lane) + per_lane_overhead) * device.time_factor
}

/// Normalizes probe runtimes by the fastest one.
pub fn calibrate(probes: &[ProbeResult]) -> Result<TimeFactors> {
    if probes.is_empty() {
        return Err(Error::NoProbes);
    }
    let mut runtimes = TimeFactors::new();
    for probe in probes {
        if !(probe.runtime.is_finite() && probe.runtime > 0.0) {
            return Err(Error::InvalidRuntime { device_id: probe.device_id.clone(), runtime: probe.runtime });
        }
        if runtimes.insert(probe.device_id.clone(), probe.runtime).is_some() {
            return Err(Error::DuplicateProbe(probe.device_id.clone()));
        }
    }
    let fastest = runtimes.values().copied().fold(f64::INFINITY, f64::min);
    Ok(runtimes.into_iter().map(|(id, runtime)| (id, runtime / fastest)).collect())
}

/// Converts speedups (larger is faster, reference device at 1.0) into time
/// factors by reciprocal normalization: `max_speedup / speedup`.
pub fn factors_from_speedups(speedups: &TimeFactors, reference_id: &str) -> Result<TimeFactors> {
    match speedups.get(reference_id) {
        None => return Err(Error::MissingReference(reference_id.to_string())),
        Some(&s) if s != 1.0 => return Err(Error::InvalidSpeedup { device_id: reference_id.to_string(), speedup: s }),
        Some(_) => {}
    }
    for (id, &speedup) in speedups {
        if !(speedup.is_finite() && speedup > 0.0) {
            return Err(Error::InvalidSpeedup { device_id: id.clone(), speedup });
        }
    }
    let fastest = speedups.values().copied().fold(0.0, f64::max);
    Ok(speedups.iter().map(|(id, &s)| (id.clone(), fastest / s)).collect())
}

/// Synthetic probe workload used in place of real hardware.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Probe size in work units. A 1×1 lane is 1.0.
    pub work: f64,
    /// Standard deviation of the log-normal multiplicative noise per run.
    pub noise_sigma: f64,
    /// Runs averaged per device.
    pub repeats: u32,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { work: 1.0, noise_sigma: 0.05, repeats: 10 }
    }
}

/// Simulates probing each device: every run takes
/// `work × true_factor × exp(N(0, σ))` and the reported runtime is the mean
/// over `repeats` runs.
pub fn synthetic_probes(true_factors: &[(String, f64)], config: &ProbeConfig, seed: u64) -> Result<Vec<ProbeResult>> {
    if config.repeats == 0 || !(config.work.is_finite() && config.work > 0.0) {
        return Err(Error::InvalidArgument("probe work must be > 0 and repeats >= 1".into()));
    }
    let noise =
        Normal::new(0.0, config.noise_sigma).map_err(|e| Error::InvalidArgument(format!("probe noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    true_factors
        .iter()
        .map(|(id, factor)| {
            if !(factor.is_finite() && *factor > 0.0) {
                return Err(Error::InvalidDevice { id: id.clone(), time_factor: *factor });
            }
            let total: f64 = (0..config.repeats).map(|_| config.work * factor * noise.sample(&mut rng).exp()).sum();
            Ok(ProbeResult { device_id: id.clone(), runtime: total / f64::from(config.repeats) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lane(w: u32, d: u32) -> LaneSpec {
        LaneSpec::new("l", w, d).unwrap()
    }

    fn probes(pairs: &[(&str, f64)]) -> Vec<ProbeResult> {
        pairs.iter().map(|(id, r)| ProbeResult { device_id: id.to_string(), runtime: *r }).collect()
    }

    #[test]
    fn lane_work_examples() {
        assert_eq!(lane_work(&lane(1, 1)), 1.0);
        assert_eq!(lane_work(&lane(4, 2)), 32.0);
        assert_eq!(lane_work(&lane(5, 5)), 125.0);
    }

    #[test]
    fn effective_time_examples() {
        let fast = DeviceSpec::new("a", 1.0, "h");
        let slow = DeviceSpec::new("b", 2.0, "h");
        assert_eq!(effective_time(&lane(2, 3), &fast, 0.0), 12.0);
        assert_eq!(effective_time(&lane(2, 3), &slow, 0.0), 24.0);
        assert_eq!(effective_time(&lane(2, 3), &fast, 0.5), 12.5);
    }

    #[test]
    fn zero_width_or_depth_rejected() {
        assert!(matches!(LaneSpec::new("x", 0, 1), Err(Error::InvalidLane { .. })));
        assert!(matches!(LaneSpec::new("x", 1, 0), Err(Error::InvalidLane { .. })));
    }

    #[test]
    fn duplicate_lane_ids_rejected() {
        let lanes = vec![lane(1, 1), lane(2, 2)];
        assert_eq!(validate_lanes(&lanes), Err(Error::DuplicateLane("l".into())));
        assert_eq!(validate_lanes(&[]), Err(Error::EmptyLanes));
    }

    #[test]
    fn calibrate_examples() {
        let f = calibrate(&probes(&[("a", 10.0), ("b", 10.0)])).unwrap();
        assert_eq!(f["a"], 1.0);
        assert_eq!(f["b"], 1.0);

        let f = calibrate(&probes(&[("v100", 10.0), ("p100", 14.29), ("m40", 19.35), ("k80", 60.0)])).unwrap();
        assert_eq!(f["v100"], 1.0);
        assert!((f["p100"] - 1.429).abs() < 1e-12);
        assert!((f["m40"] - 1.935).abs() < 1e-12);
        assert!((f["k80"] - 6.0).abs() < 1e-12);

        let f = calibrate(&probes(&[("x", 5.0)])).unwrap();
        assert_eq!(f["x"], 1.0);
    }

    #[test]
    fn calibrate_errors() {
        assert_eq!(calibrate(&[]), Err(Error::NoProbes));
        assert_eq!(calibrate(&probes(&[("a", 1.0), ("a", 2.0)])), Err(Error::DuplicateProbe("a".into())));
        assert!(matches!(calibrate(&probes(&[("a", 0.0)])), Err(Error::InvalidRuntime { .. })));
        assert!(matches!(calibrate(&probes(&[("a", -3.0)])), Err(Error::InvalidRuntime { .. })));
        assert!(matches!(calibrate(&probes(&[("a", f64::NAN)])), Err(Error::InvalidRuntime { .. })));
    }

    #[test]
    fn speedup_conversion() {
        let speedups: TimeFactors =
            [("k80", 1.0), ("m40", 3.1), ("p100", 4.2), ("v100", 6.0)].map(|(k, v)| (k.to_string(), v)).into();
        let f = factors_from_speedups(&speedups, "k80").unwrap();
        assert_eq!(f["k80"], 6.0);
        assert!((f["m40"] - 1.9355).abs() < 1e-4);
        assert!((f["p100"] - 1.4286).abs() < 1e-4);
        assert_eq!(f["v100"], 1.0);

        let single: TimeFactors = [("a".to_string(), 1.0)].into();
        assert_eq!(factors_from_speedups(&single, "a").unwrap()["a"], 1.0);

        let pair: TimeFactors = [("a".to_string(), 1.0), ("b".to_string(), 2.0)].into();
        let f = factors_from_speedups(&pair, "a").unwrap();
        assert_eq!((f["a"], f["b"]), (2.0, 1.0));
    }

    #[test]
    fn speedup_conversion_errors() {
        let pair: TimeFactors = [("a".to_string(), 1.0), ("b".to_string(), 0.0)].into();
        assert!(matches!(factors_from_speedups(&pair, "a"), Err(Error::InvalidSpeedup { .. })));
        assert_eq!(factors_from_speedups(&pair, "zz"), Err(Error::MissingReference("zz".into())));
    }

    #[test]
    fn cluster_validation() {
        assert_eq!(ClusterSpec::new(vec![], 0.0, 0.0), Err(Error::EmptyCluster));
        let dup = vec![DeviceSpec::new("a", 1.0, "h"), DeviceSpec::new("a", 2.0, "h")];
        assert_eq!(ClusterSpec::new(dup, 0.0, 0.0), Err(Error::DuplicateDevice("a".into())));
        let one = vec![DeviceSpec::new("a", 1.0, "h")];
        assert!(matches!(ClusterSpec::new(one.clone(), -1.0, 0.0), Err(Error::InvalidCommunication { .. })));
        assert!(matches!(
            ClusterSpec::new(vec![DeviceSpec::new("a", 0.0, "h")], 0.0, 0.0),
            Err(Error::InvalidDevice { .. })
        ));
        assert!(ClusterSpec::new(one, 0.0, 0.0).is_ok());
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let ok: Vec<LaneSpec> = serde_json::from_str(r#"[{"id":"a","width":2,"depth":3}]"#).unwrap();
        assert_eq!(ok[0].work(), 12.0);
        assert!(serde_json::from_str::<Vec<LaneSpec>>(r#"[{"id":"a","width":2,"depth":3,"kind":1}]"#).is_err());
        assert!(serde_json::from_str::<Vec<ProbeResult>>(r#"[{"device_id":"a","runtime":1,"x":0}]"#).is_err());
        assert!(serde_json::from_str::<Vec<DeviceSpec>>(r#"[{"id":"a","time_factor":1.0}]"#).is_err());
    }

    #[test]
    fn noiseless_synthetic_probes_recover_factors() {
        let truth = vec![("a".to_string(), 3.0), ("b".to_string(), 1.5)];
        let config = ProbeConfig { noise_sigma: 0.0, ..ProbeConfig::default() };
        let f = calibrate(&synthetic_probes(&truth, &config, 9).unwrap()).unwrap();
        assert!((f["a"] - 2.0).abs() < 1e-12);
        assert_eq!(f["b"], 1.0);
    }
}
