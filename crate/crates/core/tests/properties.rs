use lanebal_core::analysis::pearson;
use lanebal_core::lane_model::{calibrate, effective_time, lane_work, synthetic_probes, ProbeConfig};
use lanebal_core::partitioner::{
    exact_indices, greedy_indices, makespan, random_indices, round_robin_indices, Strategy as Plan,
};
use lanebal_core::simulator::{simulate, speedup_curve_at, AllreduceCost, Mode, TrainConfig};
use lanebal_core::workload::{preset_scenario, Scenario};
use lanebal_core::{ClusterSpec, DeviceSpec, GreedyRule, LaneSpec, ProbeResult};
use proptest::prelude::*;

fn lanes_from(dims: &[(u32, u32)]) -> Vec<LaneSpec> {
    dims.iter().enumerate().map(|(i, &(w, d))| LaneSpec::new(format!("l{i}"), w, d).unwrap()).collect()
}

fn cluster_from(factors: &[f64]) -> ClusterSpec {
    let devices = factors.iter().enumerate().map(|(i, &f)| DeviceSpec::new(format!("d{i}"), f, "h")).collect();
    ClusterSpec::new(devices, 0.0, 0.0).unwrap()
}

fn lane_dims(max_len: usize) -> impl Strategy<Value = Vec<(u32, u32)>> {
    prop::collection::vec((1u32..=5, 1u32..=5), 1..=max_len)
}

// factors with short binary expansions keep load sums exact
fn dyadic_factor() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![1.0, 1.25, 1.5, 2.0, 2.5, 4.0, 6.0])
}

fn all_strategies(seed: u64) -> Vec<Plan> {
    vec![
        Plan::Greedy(GreedyRule::Increment),
        Plan::Greedy(GreedyRule::Emptiest),
        Plan::Random { seed },
        Plan::RoundRobin,
        Plan::Exact { limit: 16 },
    ]
}

fn model_scenario(lanes: Vec<LaneSpec>, cluster: ClusterSpec, overhead: f64) -> Scenario {
    Scenario {
        name: "prop".into(),
        lanes,
        cluster,
        train: TrainConfig { per_lane_overhead: overhead, ..TrainConfig::default() },
        seed: 0,
        allreduce: AllreduceCost::default(),
        batch_sizes: vec![],
    }
}

proptest! {
    #[test]
    fn lane_work_scaling(w in 1u32..1000, d in 1u32..1000) {
        let base = lane_work(&LaneSpec::new("a", w, d).unwrap());
        prop_assert_eq!(lane_work(&LaneSpec::new("a", 2 * w, d).unwrap()), 4.0 * base);
        prop_assert_eq!(lane_work(&LaneSpec::new("a", w, 2 * d).unwrap()), 2.0 * base);
    }

    #[test]
    fn effective_time_strictly_increasing(
        w in 1u32..50, d in 1u32..50, f in 0.5f64..10.0, o in 0.0f64..10.0,
    ) {
        let lane = LaneSpec::new("a", w, d).unwrap();
        let dev = DeviceSpec::new("d", f, "h");
        let t = effective_time(&lane, &dev, o);
        prop_assert!(effective_time(&LaneSpec::new("a", w + 1, d).unwrap(), &dev, o) > t);
        prop_assert!(effective_time(&LaneSpec::new("a", w, d + 1).unwrap(), &dev, o) > t);
        prop_assert!(effective_time(&lane, &DeviceSpec::new("d", f * 1.01, "h"), o) > t);
        prop_assert!(effective_time(&lane, &dev, o + 0.01) > t);
    }

    #[test]
    fn calibrate_one_unit_factor_and_scale_free(
        runtimes in prop::collection::vec(0.01f64..100.0, 1..8),
        scale in prop::sample::select(vec![0.25, 0.5, 2.0, 8.0, 1024.0]),
    ) {
        let probes: Vec<ProbeResult> = runtimes
            .iter()
            .enumerate()
            .map(|(i, &r)| ProbeResult { device_id: format!("d{i}"), runtime: r })
            .collect();
        let factors = calibrate(&probes).unwrap();
        prop_assert_eq!(factors.len(), runtimes.len());
        let min = runtimes.iter().copied().fold(f64::INFINITY, f64::min);
        let ones = runtimes.iter().filter(|&&r| r == min).count();
        prop_assert_eq!(factors.values().filter(|&&f| f == 1.0).count(), ones);
        prop_assert!(factors.values().all(|&f| f >= 1.0));

        let scaled: Vec<ProbeResult> =
            probes.iter().map(|p| ProbeResult { runtime: p.runtime * scale, ..p.clone() }).collect();
        prop_assert_eq!(calibrate(&scaled).unwrap(), factors);
    }

    #[test]
    fn noiseless_probes_recover_factors(factors in prop::collection::vec(1.0f64..8.0, 1..6)) {
        let mut truth: Vec<(String, f64)> = factors.iter().enumerate().map(|(i, &f)| (format!("d{i}"), f)).collect();
        truth.push(("fastest".into(), 0.9));
        let config = ProbeConfig { noise_sigma: 0.0, ..ProbeConfig::default() };
        let got = calibrate(&synthetic_probes(&truth, &config, 7).unwrap()).unwrap();
        for (id, f) in &truth {
            prop_assert!((got[id] - f / 0.9).abs() <= 1e-12 * got[id]);
        }
    }

    #[test]
    fn every_strategy_is_total(
        dims in lane_dims(12),
        factors in prop::collection::vec(dyadic_factor(), 1..5),
        seed in any::<u64>(),
    ) {
        let lanes = lanes_from(&dims);
        let cluster = cluster_from(&factors);
        for strategy in all_strategies(seed) {
            let assignment = strategy.partition(&lanes, &cluster).unwrap();
            prop_assert_eq!(assignment.placements.len(), lanes.len());
            for (placement, lane) in assignment.placements.iter().zip(&lanes) {
                prop_assert_eq!(&placement.lane_id, &lane.id);
                prop_assert!(cluster.device_index(&placement.device_id).is_some());
            }
        }
    }

    #[test]
    fn exact_is_a_floor(
        dims in lane_dims(10),
        factors in prop::collection::vec(dyadic_factor(), 1..4),
        seed in any::<u64>(),
    ) {
        let lanes = lanes_from(&dims);
        let cluster = cluster_from(&factors);
        let best = makespan(&exact_indices(&lanes, &cluster, 16).unwrap(), &lanes, &cluster, 0.0);
        for strategy in all_strategies(seed) {
            let span = makespan(&strategy.indices(&lanes, &cluster).unwrap(), &lanes, &cluster, 0.0);
            prop_assert!(span >= best, "{} {span} < exact {best}", strategy.name());
        }
    }

    #[test]
    fn lpt_within_four_thirds_on_identical_devices(dims in lane_dims(12), m in 2usize..=4) {
        let lanes = lanes_from(&dims);
        let cluster = ClusterSpec::identical(m);
        let greedy = makespan(&greedy_indices(&lanes, &cluster, GreedyRule::Increment).unwrap(), &lanes, &cluster, 0.0);
        let best = makespan(&exact_indices(&lanes, &cluster, 16).unwrap(), &lanes, &cluster, 0.0);
        prop_assert!(3.0 * greedy <= 4.0 * best);
    }

    #[test]
    fn greedy_within_twice_exact_on_mixed_devices(
        dims in lane_dims(10),
        factors in prop::collection::vec(0.5f64..8.0, 1..=3),
    ) {
        let lanes = lanes_from(&dims);
        let cluster = cluster_from(&factors);
        let greedy = makespan(&greedy_indices(&lanes, &cluster, GreedyRule::Increment).unwrap(), &lanes, &cluster, 0.0);
        let best = makespan(&exact_indices(&lanes, &cluster, 16).unwrap(), &lanes, &cluster, 0.0);
        prop_assert!(greedy <= 2.0 * best);
    }

    #[test]
    fn greedy_choice_ignores_work_scale(
        dims in lane_dims(16),
        factors in prop::collection::vec(dyadic_factor(), 1..5),
        k in 2u32..=7,
        rule in prop::sample::select(vec![GreedyRule::Increment, GreedyRule::Emptiest]),
    ) {
        let lanes = lanes_from(&dims);
        let scaled: Vec<(u32, u32)> = dims.iter().map(|&(w, d)| (w, d * k)).collect();
        let cluster = cluster_from(&factors);
        prop_assert_eq!(
            greedy_indices(&lanes, &cluster, rule).unwrap(),
            greedy_indices(&lanes_from(&scaled), &cluster, rule).unwrap()
        );
    }

    #[test]
    fn relabeling_identical_devices_relabels_assignment(
        dims in lane_dims(16),
        perm in Just((0..4usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let lanes = lanes_from(&dims);
        let cluster = ClusterSpec::identical(4);
        let permuted = ClusterSpec::new(
            perm.iter().map(|&p| cluster.devices[p].clone()).collect(),
            cluster.intra_host_sync,
            cluster.inter_host_penalty,
        )
        .unwrap();
        let a = Plan::Greedy(GreedyRule::Increment).partition(&lanes, &cluster).unwrap();
        let b = Plan::Greedy(GreedyRule::Increment).partition(&lanes, &permuted).unwrap();
        for (pa, pb) in a.placements.iter().zip(&b.placements) {
            let da = cluster.device_index(&pa.device_id).unwrap();
            prop_assert_eq!(&pb.device_id, &permuted.devices[da].id);
        }
    }

    #[test]
    fn round_robin_and_random_are_deterministic(dims in lane_dims(20), m in 1usize..6, seed in any::<u64>()) {
        let lanes = lanes_from(&dims);
        let cluster = ClusterSpec::identical(m);
        prop_assert_eq!(random_indices(&lanes, &cluster, seed).unwrap(), random_indices(&lanes, &cluster, seed).unwrap());
        let rr = round_robin_indices(&lanes, &cluster).unwrap();
        prop_assert!(rr.iter().enumerate().all(|(i, &d)| d == i % m));
    }

    #[test]
    fn pearson_bounded_symmetric_affine(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..40),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
    ) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(xs.iter().any(|&x| x != xs[0]) && ys.iter().any(|&y| y != ys[0]));
        let r = pearson(&xs, &ys).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert!((pearson(&ys, &xs).unwrap() - r).abs() < 1e-12);
        let moved: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        prop_assert!((pearson(&moved, &ys).unwrap() - r).abs() < 1e-9);
        prop_assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_time_decomposes(
        dims in lane_dims(16),
        g in 1usize..=8,
        batch in 1u64..1000,
        sync in 0.0f64..20.0,
        base in 0.0f64..20.0,
        per_device in 0.0f64..5.0,
    ) {
        let mut scenario = preset_scenario("hetero-4gpu").unwrap().with_lanes(lanes_from(&dims));
        scenario.cluster = ClusterSpec::new(
            (0..8).map(|i| DeviceSpec::new(format!("d{i}"), 1.0 + (i % 3) as f64, format!("h{}", i / 2))).collect(),
            sync,
            3.0,
        )
        .unwrap();
        scenario.allreduce = AllreduceCost { base, per_device };
        for mode in [Mode::ModelParallel, Mode::DataParallel] {
            let r = simulate(&scenario, mode, g, batch).unwrap();
            prop_assert!(r.compute_time >= 0.0 && r.sync_time >= 0.0 && r.network_time >= 0.0);
            prop_assert_eq!(r.compute_time + r.sync_time + r.network_time, r.step_time);
            prop_assert_eq!(r.epoch_time, r.steps as f64 * r.step_time);
        }
    }

    #[test]
    fn model_parallel_speedup_ceiling(dims in lane_dims(16), g in 1usize..=8, sync in 0.0f64..10.0) {
        let lanes = lanes_from(&dims);
        let mut cluster = ClusterSpec::identical(8);
        cluster.intra_host_sync = sync;
        let scenario = model_scenario(lanes.clone(), cluster, 0.0);
        let s = speedup_curve_at(&scenario, &[g], Mode::ModelParallel, 100).unwrap()[0].speedup;
        let total: f64 = lanes.iter().map(lane_work).sum();
        let largest = lanes.iter().map(lane_work).fold(0.0, f64::max);
        prop_assert!(s <= g as f64 * (1.0 + 1e-12));
        prop_assert!(s <= total / largest * (1.0 + 1e-12));
    }

    #[test]
    fn free_communication_gives_linear_speedup(k in 1usize..=4, w in 1u32..=5, d in 1u32..=5) {
        for g in [1usize, 2, 4, 8] {
            let lanes = lanes_from(&vec![(w, d); g * k]);
            let scenario = model_scenario(lanes, ClusterSpec::identical(8), 0.0);
            let scenario = Scenario { allreduce: AllreduceCost { base: 0.0, per_device: 0.0 }, ..scenario };
            for mode in [Mode::ModelParallel, Mode::DataParallel] {
                let s = speedup_curve_at(&scenario, &[g], mode, 100).unwrap()[0].speedup;
                prop_assert!((s - g as f64).abs() < 1e-12 * g as f64, "{mode} g={g} speedup {s}");
            }
        }
    }

    #[test]
    fn larger_batches_never_lose_efficiency(
        dims in lane_dims(16),
        g in 2usize..=8,
        sync in 0.01f64..50.0,
        base in 0.01f64..50.0,
        per_device in 0.0f64..5.0,
        batches in prop::collection::vec(1u64..2000, 2..6),
    ) {
        let mut cluster = ClusterSpec::identical(8);
        cluster.intra_host_sync = sync;
        let scenario = Scenario { allreduce: AllreduceCost { base, per_device }, ..model_scenario(lanes_from(&dims), cluster, 0.0) };
        let mut batches = batches;
        batches.sort_unstable();
        for mode in [Mode::ModelParallel, Mode::DataParallel] {
            let eff: Vec<f64> = batches
                .iter()
                .map(|&b| speedup_curve_at(&scenario, &[g], mode, b).unwrap()[0].efficiency())
                .collect();
            for pair in eff.windows(2) {
                prop_assert!(pair[1] >= pair[0] * (1.0 - 1e-12), "{mode}: {eff:?} over {batches:?}");
            }
        }
    }

    #[test]
    fn splitting_work_into_more_lanes_costs_overhead(
        base_dims in prop::sample::select(vec![(1u32, 60u32), (2, 30), (1, 120), (4, 15)]),
        overhead in 0.001f64..10.0,
    ) {
        let (w, d) = base_dims;
        let total_depth = d;
        let mut previous = 0.0;
        for k in (1..=total_depth).filter(|k| total_depth % k == 0) {
            let lanes = lanes_from(&vec![(w, total_depth / k); k as usize]);
            let scenario = model_scenario(lanes, ClusterSpec::identical(1), overhead);
            let epoch = simulate(&scenario, Mode::ModelParallel, 1, 100).unwrap().epoch_time;
            prop_assert!(epoch >= previous);
            previous = epoch;
        }
    }
}
