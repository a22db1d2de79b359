mod common;

use common::{joint_rsp_brute_force, min_cover, rsp_instance};
use kiva_core::model::balance_counts;
use kiva_core::rsp::{
    rsp, rsp_consolidate, rsp_sequential, solve_joint_rsp, solve_single_station_rsp, theta_from_rsp, RspMode,
    RspOptions,
};
use kiva_core::Instance;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn k_subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if items.len() < k {
        return vec![];
    }
    let mut with: Vec<Vec<usize>> = k_subsets(&items[1..], k - 1)
        .into_iter()
        .map(|mut s| {
            s.insert(0, items[0]);
            s
        })
        .collect();
    with.extend(k_subsets(&items[1..], k));
    with
}

fn exact() -> RspOptions {
    RspOptions::with_mode(RspMode::Exact)
}

#[test]
fn joint_exact_matches_brute_force() {
    for seed in 0..50u64 {
        let inst = rsp_instance(seed);
        let pool: Vec<usize> = (0..inst.rack_count()).collect();
        let joint = solve_joint_rsp(&inst, &pool, &exact()).unwrap().expect("exact mode has no budget");
        assert_eq!(joint.total_racks(), joint_rsp_brute_force(&inst), "seed {seed}");
        assert!(joint.covers(&inst));
    }
}

#[test]
fn single_station_exact_matches_brute_force() {
    for seed in 0..50u64 {
        let inst = rsp_instance(seed);
        let all: Vec<usize> = (0..inst.order_count()).collect();
        for k in 1..=inst.order_count() {
            let pick = solve_single_station_rsp(&inst, &all, k, &exact()).unwrap();
            let best = k_subsets(&all, k).iter().map(|s| min_cover(&inst, s)).min().unwrap();
            assert_eq!(pick.orders.len(), k);
            assert_eq!(pick.racks.len(), best, "seed {seed} k {k}");
            assert_eq!(min_cover(&inst, &pick.orders), best);
        }
    }
}

#[test]
fn pipeline_properties_in_every_mode() {
    for seed in 0..50u64 {
        let inst = rsp_instance(seed);
        let sizes = balance_counts(inst.order_count(), inst.stations()).unwrap();
        for mode in [RspMode::Exact, RspMode::Greedy, RspMode::Auto] {
            let opts = RspOptions::with_mode(mode);
            let seq = rsp_sequential(&inst, &opts).unwrap();
            assert_eq!(seq.solves, inst.stations());
            let full = rsp_consolidate(&inst, &seq, &opts).unwrap();
            assert!(full.total_racks() <= seq.total_racks(), "seed {seed} {mode:?}");
            assert_eq!(full.solves, inst.stations() + 1);
            assert_eq!(rsp(&inst, &opts).unwrap().solves, inst.stations() + 1);
            for a in [&seq, &full] {
                assert!(a.covers(&inst));
                let got: Vec<usize> = a.orders.iter().map(Vec::len).collect();
                assert_eq!(got, sizes);
                let mut all: Vec<usize> = a.orders.iter().flatten().copied().collect();
                all.sort_unstable();
                assert_eq!(all, (0..inst.order_count()).collect::<Vec<_>>());
            }
            if mode == RspMode::Exact {
                assert!(full.total_racks() >= joint_rsp_brute_force(&inst));
            }
        }
    }
}

#[test]
fn consolidation_recovers_shared_rack() {
    // SKUs A, B, C; racks {B,C}, {A}. Station 1 alone takes {C},{B,C} with
    // one rack, forcing both {A,C} orders onto stations needing two racks
    // each. Pairing each {A,C} order with a C-only partner does better.
    let inst = Instance::new(
        3,
        vec![vec![2], vec![1, 2], vec![0, 2], vec![0, 2]],
        vec![vec![1, 2], vec![0]],
        3,
        2,
    )
    .unwrap();
    let seq = rsp_sequential(&inst, &exact()).unwrap();
    let full = rsp_consolidate(&inst, &seq, &exact()).unwrap();
    assert_eq!(seq.total_racks(), 5);
    assert_eq!(full.total_racks(), 4);
    assert_eq!(full.total_racks(), joint_rsp_brute_force(&inst));
}

proptest! {
    #[test]
    fn theta_is_a_seeded_shuffle(seed in any::<u64>(), shuffle in any::<u64>()) {
        let inst = rsp_instance(seed);
        let a = rsp(&inst, &RspOptions::default()).unwrap();
        let t1 = theta_from_rsp(&a, &mut ChaCha8Rng::seed_from_u64(shuffle));
        let t2 = theta_from_rsp(&a, &mut ChaCha8Rng::seed_from_u64(shuffle));
        prop_assert_eq!(&t1, &t2);
        for (seq, set) in t1.stations().iter().zip(&a.orders) {
            let (mut x, mut y) = (seq.clone(), set.clone());
            x.sort_unstable();
            y.sort_unstable();
            prop_assert_eq!(x, y);
        }
    }
}

