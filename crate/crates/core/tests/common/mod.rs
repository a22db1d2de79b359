#![allow(dead_code)]

use kiva_core::eval::{check_trace_solution, replay_station, trace_solution, ConstraintId, TraceSolution};
use kiva_core::model::balance_counts;
use kiva_core::{Instance, Solution};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random instance within the oracle envelope: up to 6 orders, 2 stations,
/// 5 racks, bench capacity 2, 8 SKUs. Every demanded SKU is stocked.
pub fn tiny_instance(seed: u64) -> Instance {
    random_instance(seed, 6, 2, 5, 2)
}

/// Random instance with up to `n_max` orders, `m_max` stations, `r_max`
/// racks, capacity `c_max` and 8 SKUs.
pub fn random_instance(seed: u64, n_max: usize, m_max: usize, r_max: usize, c_max: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skus = rng.gen_range(3..=8);
    let m = rng.gen_range(1..=m_max);
    let n = rng.gen_range(m.max(2)..=n_max);
    let r = rng.gen_range(2..=r_max);
    let c = rng.gen_range(1..=c_max);
    tiny_with(&mut rng, skus, n, m, r, c)
}

/// As [`tiny_instance`] but sized for joint RSP checks (up to 8 orders, 6 racks).
pub fn rsp_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let skus = rng.gen_range(3..=8);
    let m = rng.gen_range(1..=3);
    let n = rng.gen_range(m.max(2)..=8);
    let r = rng.gen_range(2..=6);
    tiny_with(&mut rng, skus, n, m, r, 2)
}

fn tiny_with(rng: &mut ChaCha8Rng, skus: usize, n: usize, m: usize, r: usize, c: usize) -> Instance {
    let all: Vec<usize> = (0..skus).collect();
    let orders: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let size = rng.gen_range(1..=2.min(skus));
            let mut o: Vec<usize> = all.choose_multiple(rng, size).copied().collect();
            o.sort_unstable();
            o
        })
        .collect();
    let mut racks: Vec<Vec<usize>> = (0..r)
        .map(|_| {
            let size = rng.gen_range(1..=3.min(skus));
            all.choose_multiple(rng, size).copied().collect()
        })
        .collect();
    for &s in orders.iter().flatten() {
        if !racks.iter().any(|rk| rk.contains(&s)) {
            let k = rng.gen_range(0..racks.len());
            racks[k].push(s);
        }
    }
    for rk in &mut racks {
        rk.sort_unstable();
        rk.dedup();
    }
    Instance::new(skus, orders, racks, m, c).unwrap()
}

/// Shortest rack sequence finishing `theta_p`, by iterative deepening over
/// rack sequences replayed through the trace simulator. Visits that pick
/// nothing are never extended.
pub fn enumerate_min_visits(instance: &Instance, theta_p: &[usize]) -> usize {
    if theta_p.is_empty() {
        return 0;
    }
    let cap = theta_p.len() * 2;
    for depth in 1..=cap {
        let mut seq = Vec::with_capacity(depth);
        if dfs(instance, theta_p, depth, &mut seq) {
            return depth;
        }
    }
    panic!("no rack sequence of length <= {cap}");
}

fn dfs(instance: &Instance, theta_p: &[usize], depth: usize, seq: &mut Vec<usize>) -> bool {
    for r in 0..instance.rack_count() {
        seq.push(r);
        let replay = replay_station(instance, theta_p, seq).unwrap();
        let useful = !replay.wasteful_visits.contains(&(seq.len() - 1));
        if useful {
            if replay.outstanding.is_empty() {
                return true;
            }
            if seq.len() < depth && dfs(instance, theta_p, depth, seq) {
                return true;
            }
        }
        seq.pop();
    }
    false
}

pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Every balanced assignment of orders to stations (station sets sorted).
pub fn balanced_partitions(n: usize, m: usize) -> Vec<Vec<Vec<usize>>> {
    let sizes = balance_counts(n, m).unwrap();
    let mut out = Vec::new();
    let mut cur = vec![Vec::new(); m];
    fn rec(o: usize, n: usize, sizes: &[usize], cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if o == n {
            out.push(cur.clone());
            return;
        }
        for p in 0..sizes.len() {
            if cur[p].len() < sizes[p] {
                cur[p].push(o);
                rec(o + 1, n, sizes, cur, out);
                cur[p].pop();
            }
        }
    }
    rec(0, n, &sizes, &mut cur, &mut out);
    out
}

/// Fewest racks (by subset enumeration) covering the demand of `orders`.
pub fn min_cover(instance: &Instance, orders: &[usize]) -> usize {
    let demand: Vec<usize> = {
        let mut d: Vec<usize> = orders.iter().flat_map(|&o| instance.order(o).skus.iter()).collect();
        d.sort_unstable();
        d.dedup();
        d
    };
    if demand.is_empty() {
        return 0;
    }
    let r = instance.rack_count();
    (1u32..(1 << r))
        .filter(|mask| {
            demand
                .iter()
                .all(|&s| (0..r).any(|k| mask & (1 << k) != 0 && instance.rack(k).skus.contains(s)))
        })
        .map(|mask| mask.count_ones() as usize)
        .min()
        .expect("every demanded SKU is stocked")
}

/// Joint rack-count optimum over all balanced assignments.
pub fn joint_rsp_brute_force(instance: &Instance) -> usize {
    balanced_partitions(instance.order_count(), instance.stations())
        .iter()
        .map(|part| part.iter().map(|set| min_cover(instance, set)).sum())
        .min()
        .unwrap()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                out[idx[k]] = avg;
            }
            i = j + 1;
        }
        out
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Two stations, one bin each. Rack 0 = {0,1} serves orders 0 then 1 at
/// station 0; rack 1 = {2,3} serves orders 2 then 3 at station 1. Rack 2 =
/// {0,2} is unused.
pub fn two_station() -> (Instance, Solution) {
    let inst = Instance::new(
        4,
        vec![vec![0], vec![1], vec![2], vec![3]],
        vec![vec![0, 1], vec![2, 3], vec![0, 2]],
        2,
        1,
    )
    .unwrap();
    let sol = Solution::new(vec![vec![0, 1], vec![2, 3]], vec![vec![0], vec![1]]);
    (inst, sol)
}

pub fn base() -> (Instance, TraceSolution) {
    let (inst, sol) = two_station();
    let (ts, warnings) = trace_solution(&inst, &sol).unwrap();
    assert!(warnings.is_empty());
    assert!(check_trace_solution(&inst, &ts).feasible());
    (inst, ts)
}

pub fn mutation(family: ConstraintId) -> TraceSolution {
    use ConstraintId::*;
    let (_, mut ts) = base();
    match family {
        Balance => {
            let o = ts.orders[0].pop().unwrap();
            ts.orders[1].push(o);
        }
        UniqueAssignment => ts.orders[1].push(0),
        ActiveRequiresAssignment => ts.traces[1].slots[0].active = vec![0],
        AssignedOrderProcessed => {
            for slot in &mut ts.traces[0].slots {
                slot.active.retain(|&o| o != 1);
                slot.deliveries.retain(|&(o, _)| o != 1);
            }
        }
        BenchCapacity => ts.traces[0].slots[0].active.push(1),
        SingleRack => ts.traces[0].slots[0].racks.push(2),
        VisitRequiresAssignment => ts.traces[0].slots[1].racks = vec![2],
        AssignedRackVisits => ts.racks[0].push(2),
        SkuDelivered => ts.traces[0].slots[1].deliveries.clear(),
        DeliveryWitness => ts.traces[1].slots[0].deliveries.push((0, 0)),
        Contiguity => {
            let mut again = ts.traces[0].slots[0].clone();
            again.deliveries.clear();
            again.rack_change = false;
            ts.traces[0].slots.push(again);
        }
        RackChange => ts.traces[0].slots[0].rack_change = false,
        Structure => unreachable!(),
    }
    ts
}
