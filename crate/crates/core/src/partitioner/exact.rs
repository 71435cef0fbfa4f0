//! Exact minimum-makespan assignment by depth-first branch and bound.
//!
//! Two passes:
//!
//! 1. Find the optimal makespan. Lanes are visited largest first, the greedy
//!    solution is the initial incumbent, and a node is pruned when its lower
//!    bound cannot beat the incumbent.
//! 2. Walk assignments in lexicographic order (lanes in input order, devices
//!    by index) and stop at the first one reaching the optimum. This picks
//!    the lexicographically smallest optimal assignment.
//!
//! The lower bound at a node is the largest of the current maximum load,
//! the water level obtained by pouring the remaining work into the devices
//! above their current loads (capacity of device `d` up to level `T` is
//! `(T - load_d) / f_d`), and the cheapest placement of the largest remaining
//! lane.
//!
//! Among devices with equal time factor that are still empty, only the first
//! is tried: swapping the future contents of two such devices changes
//! nothing but the labels, and the lower index is lexicographically smaller.

use super::{check_inputs, greedy_indices, lpt_order, Assignment, GreedyRule};
use crate::error::{Error, Result};
use crate::lane_model::{lane_work, ClusterSpec, LaneSpec};

pub const DEFAULT_EXACT_LIMIT: usize = 16;

// Relative slack for floating-point comparisons against the optimum.
const REL_EPS: f64 = 1e-9;

pub fn exact_partition(lanes: &[LaneSpec], cluster: &ClusterSpec, limit: usize) -> Result<Assignment> {
    let indices = exact_indices(lanes, cluster, limit)?;
    Ok(Assignment::from_indices("exact", None, lanes, cluster, &indices))
}

pub fn exact_indices(lanes: &[LaneSpec], cluster: &ClusterSpec, limit: usize) -> Result<Vec<usize>> {
    check_inputs(lanes, cluster)?;
    if lanes.len() > limit {
        return Err(Error::InstanceTooLarge { lanes: lanes.len(), limit });
    }
    let factors: Vec<f64> = cluster.devices.iter().map(|d| d.time_factor).collect();
    let works: Vec<f64> = lanes.iter().map(lane_work).collect();

    // pass 1: optimal value
    let greedy = greedy_indices(lanes, cluster, GreedyRule::Increment)?;
    let mut greedy_loads = vec![0.0; factors.len()];
    for (w, &d) in works.iter().zip(&greedy) {
        greedy_loads[d] += w * factors[d];
    }
    let incumbent = greedy_loads.into_iter().fold(0.0, f64::max);
    let order = lpt_order(lanes);
    let sorted: Vec<f64> = order.iter().map(|&i| works[i]).collect();
    let mut search = Search::new(&sorted, &factors, Goal::Improve { best: incumbent });
    search.run(0);
    let optimum = match search.goal {
        Goal::Improve { best } => best,
        Goal::Reach { .. } => unreachable!(),
    };

    // pass 2: lexicographically first assignment at the optimum
    let mut search = Search::new(&works, &factors, Goal::Reach { target: optimum * (1.0 + REL_EPS) });
    assert!(search.run(0), "an assignment at the optimum exists");
    Ok(search.found.expect("pass 2 records its solution"))
}

enum Goal {
    /// Minimize; prune nodes whose bound cannot beat `best`.
    Improve { best: f64 },
    /// Stop at the first complete assignment with makespan <= `target`.
    Reach { target: f64 },
}

struct Search<'a> {
    works: &'a [f64],
    factors: &'a [f64],
    inv_factors: Vec<f64>,
    /// Remaining work from position i onward.
    suffix_work: Vec<f64>,
    /// Largest single work from position i onward.
    suffix_max: Vec<f64>,
    loads: Vec<f64>,
    counts: Vec<usize>,
    current: Vec<usize>,
    goal: Goal,
    found: Option<Vec<usize>>,
    scratch: Vec<(f64, f64)>,
}

impl<'a> Search<'a> {
    fn new(works: &'a [f64], factors: &'a [f64], goal: Goal) -> Self {
        let n = works.len();
        let mut suffix_work = vec![0.0_f64; n + 1];
        let mut suffix_max = vec![0.0_f64; n + 1];
        for i in (0..n).rev() {
            suffix_work[i] = suffix_work[i + 1] + works[i];
            suffix_max[i] = suffix_max[i + 1].max(works[i]);
        }
        Self {
            works,
            factors,
            inv_factors: factors.iter().map(|f| 1.0 / f).collect(),
            suffix_work,
            suffix_max,
            loads: vec![0.0; factors.len()],
            counts: vec![0; factors.len()],
            current: vec![0; n],
            goal,
            found: None,
            scratch: Vec::with_capacity(factors.len()),
        }
    }

    /// Returns true once a `Reach` goal is met.
    fn run(&mut self, pos: usize) -> bool {
        if pos == self.works.len() {
            let span = self.loads.iter().copied().fold(0.0, f64::max);
            match &mut self.goal {
                Goal::Improve { best } => {
                    if span < *best {
                        *best = span;
                    }
                    return false;
                }
                Goal::Reach { target } => {
                    if span <= *target {
                        self.found = Some(self.current.clone());
                        return true;
                    }
                    return false;
                }
            }
        }
        if self.pruned(pos) {
            return false;
        }
        for d in 0..self.factors.len() {
            if self.counts[d] == 0 && self.earlier_twin_is_empty(d) {
                continue;
            }
            let added = self.works[pos] * self.factors[d];
            let before = self.loads[d];
            self.loads[d] = before + added;
            self.counts[d] += 1;
            self.current[pos] = d;
            let done = self.run(pos + 1);
            self.loads[d] = before;
            self.counts[d] -= 1;
            if done {
                return true;
            }
        }
        false
    }

    fn earlier_twin_is_empty(&self, d: usize) -> bool {
        (0..d).any(|e| self.counts[e] == 0 && self.factors[e] == self.factors[d])
    }

    fn pruned(&mut self, pos: usize) -> bool {
        let bound = self.lower_bound(pos);
        match self.goal {
            Goal::Improve { best } => bound >= best * (1.0 - REL_EPS),
            Goal::Reach { target } => bound > target,
        }
    }

    fn lower_bound(&mut self, pos: usize) -> f64 {
        let current_max = self.loads.iter().copied().fold(0.0, f64::max);
        let largest = self.suffix_max[pos];
        let cheapest_largest =
            self.loads.iter().zip(self.factors).map(|(l, f)| l + largest * f).fold(f64::INFINITY, f64::min);
        current_max.max(cheapest_largest).max(self.water_level(self.suffix_work[pos]))
    }

    /// Smallest level `T` with `Σ_d max(0, T - load_d) / f_d >= remaining`.
    fn water_level(&mut self, remaining: f64) -> f64 {
        self.scratch.clear();
        self.scratch.extend(self.loads.iter().copied().zip(self.inv_factors.iter().copied()));
        self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut weighted, mut capacity) = (0.0, 0.0);
        for k in 0..self.scratch.len() {
            let (load, inv) = self.scratch[k];
            weighted += load * inv;
            capacity += inv;
            let level = (remaining + weighted) / capacity;
            if k + 1 == self.scratch.len() || level <= self.scratch[k + 1].0 {
                return level;
            }
        }
        unreachable!("cluster is non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lane_model::DeviceSpec;
    use crate::partitioner::makespan;

    fn cost_lanes(costs: &[u32]) -> Vec<LaneSpec> {
        costs.iter().enumerate().map(|(i, &c)| LaneSpec::new(format!("lane-{i}"), 1, c).unwrap()).collect()
    }

    /// Every one of the m^n assignments, lexicographic order.
    fn brute_force(lanes: &[LaneSpec], cluster: &ClusterSpec) -> (f64, Vec<usize>) {
        let (n, m) = (lanes.len(), cluster.len());
        let mut best = (f64::INFINITY, vec![]);
        let mut idx = vec![0usize; n];
        loop {
            let span = makespan(&idx, lanes, cluster, 0.0);
            if span < best.0 {
                best = (span, idx.clone());
            }
            // odometer increment, last lane fastest
            let mut k = n;
            loop {
                if k == 0 {
                    return best;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < m {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    #[test]
    fn small_examples_match_brute_force() {
        let lanes = cost_lanes(&[5, 4, 3, 3, 3]);
        let two = ClusterSpec::identical(2);
        let idx = exact_indices(&lanes, &two, 16).unwrap();
        assert_eq!(makespan(&idx, &lanes, &two, 0.0), 9.0);
        assert_eq!(brute_force(&lanes, &two).0, 9.0);
        assert_eq!(idx, brute_force(&lanes, &two).1);

        let lanes = cost_lanes(&[4, 2]);
        let cluster =
            ClusterSpec::new(vec![DeviceSpec::new("fast", 1.0, "h"), DeviceSpec::new("slow", 2.0, "h")], 0.0, 0.0)
                .unwrap();
        let idx = exact_indices(&lanes, &cluster, 16).unwrap();
        assert_eq!(makespan(&idx, &lanes, &cluster, 0.0), 4.0);
        assert_eq!(brute_force(&lanes, &cluster), (4.0, idx));
    }

    #[test]
    fn identical_lanes_spread_one_per_device() {
        for n in 1..=6 {
            let lanes: Vec<LaneSpec> = (0..n).map(|i| LaneSpec::new(format!("l{i}"), 2, 3).unwrap()).collect();
            let cluster = ClusterSpec::identical(n);
            let idx = exact_indices(&lanes, &cluster, 16).unwrap();
            assert_eq!(idx, (0..n).collect::<Vec<_>>());
            assert_eq!(makespan(&idx, &lanes, &cluster, 0.0), 12.0);
        }
    }

    #[test]
    fn limit_enforced() {
        let lanes = cost_lanes(&[1; 17]);
        let err = exact_indices(&lanes, &ClusterSpec::identical(2), DEFAULT_EXACT_LIMIT).unwrap_err();
        assert_eq!(err, Error::InstanceTooLarge { lanes: 17, limit: 16 });
        assert!(err.to_string().contains("instance too large for exact solver"));
    }

    #[test]
    fn lexicographic_optimum_on_heterogeneous_devices() {
        let lanes = cost_lanes(&[3, 7, 2, 2, 5, 1]);
        let cluster = ClusterSpec::new(
            vec![DeviceSpec::new("a", 1.5, "h"), DeviceSpec::new("b", 1.0, "h"), DeviceSpec::new("c", 1.5, "h")],
            0.0,
            0.0,
        )
        .unwrap();
        let idx = exact_indices(&lanes, &cluster, 16).unwrap();
        assert_eq!((makespan(&idx, &lanes, &cluster, 0.0), idx), brute_force(&lanes, &cluster));
    }

    #[test]
    fn sixteen_lanes_on_four_devices_finish() {
        let costs: Vec<u32> = (0..16).map(|i| (i * 37 % 23) + 1).collect();
        let lanes = cost_lanes(&costs);
        let cluster = ClusterSpec::new(
            (0..4).map(|i| DeviceSpec::new(format!("d{i}"), 1.0 + i as f64 * 0.5, "h")).collect(),
            0.0,
            0.0,
        )
        .unwrap();
        let idx = exact_indices(&lanes, &cluster, 16).unwrap();
        let greedy = greedy_indices(&lanes, &cluster, GreedyRule::Increment).unwrap();
        assert!(makespan(&idx, &lanes, &cluster, 0.0) <= makespan(&greedy, &lanes, &cluster, 0.0));
    }
}
