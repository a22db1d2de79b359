//! Brute-force ground truth for tiny instances.
//!
//! Enumerates every balanced assignment and, per station, every order
//! permutation, searching rack sequences by iterative deepening. Only usable
//! for a handful of orders; the limits are checked before any work starts.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::model::{balance_counts, ensure_valid, Instance, OrderSchedule, RackSchedule, Solution};
use crate::sku::SkuSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_orders: usize,
    pub max_racks: usize,
    pub max_capacity: usize,
    pub max_stations: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_orders: 6,
            max_racks: 5,
            max_capacity: 3,
            max_stations: 2,
        }
    }
}

impl OracleLimits {
    fn check(&self, orders: usize, instance: &Instance, stations: usize) -> Result<()> {
        let over = |what: &str, got: usize, max: usize| {
            Err(Error::LimitsExceeded(format!("{what} {got} > {max}")))
        };
        if orders > self.max_orders {
            return over("orders", orders, self.max_orders);
        }
        if instance.rack_count() > self.max_racks {
            return over("racks", instance.rack_count(), self.max_racks);
        }
        if instance.capacity() > self.max_capacity {
            return over("capacity", instance.capacity(), self.max_capacity);
        }
        if stations > self.max_stations {
            return over("stations", stations, self.max_stations);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StationOptimum {
    pub visits: usize,
    pub sequence: Vec<usize>,
    pub racks: Vec<usize>,
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
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

/// Bench replay written independently of the station search.
#[derive(Clone)]
struct Bench {
    active: Vec<SkuSet>,
    next: usize,
}

impl Bench {
    fn start(seq: &[usize], instance: &Instance) -> Bench {
        let take = seq.len().min(instance.capacity());
        Bench {
            active: seq[..take].iter().map(|&o| instance.order(o).skus.clone()).collect(),
            next: take,
        }
    }

    fn done(&self) -> bool {
        self.active.is_empty()
    }

    /// Brings `rack`; completed bins are refilled from `seq` and the new
    /// order picks from the same rack. None when nothing is delivered.
    fn visit(&self, rack: &SkuSet, seq: &[usize], instance: &Instance) -> Option<Bench> {
        if !self.active.iter().any(|res| res.intersects(rack)) {
            return None;
        }
        let mut active = Vec::with_capacity(self.active.len());
        let mut next = self.next;
        let mut queue: Vec<SkuSet> = self.active.clone();
        while let Some(res) = queue.pop() {
            let left = res.difference(rack);
            if left.is_empty() {
                if next < seq.len() {
                    queue.push(instance.order(seq[next]).skus.clone());
                    next += 1;
                }
            } else {
                active.push(left);
            }
        }
        Some(Bench { active, next })
    }

    fn outstanding(&self, seq: &[usize], instance: &Instance) -> SkuSet {
        let mut all = SkuSet::empty(instance.sku_count());
        for res in &self.active {
            all.union_with(res);
        }
        for &o in &seq[self.next..] {
            all.union_with(&instance.order(o).skus);
        }
        all
    }
}

fn finish_within(
    bench: &Bench,
    seq: &[usize],
    instance: &Instance,
    depth: usize,
    widest: usize,
    path: &mut Vec<usize>,
) -> bool {
    if bench.done() {
        return true;
    }
    if depth == 0 || bench.outstanding(seq, instance).len() > depth * widest {
        return false;
    }
    for (r, rack) in instance.racks().iter().enumerate() {
        if let Some(after) = bench.visit(&rack.skus, seq, instance) {
            path.push(r);
            if finish_within(&after, seq, instance, depth - 1, widest, path) {
                return true;
            }
            path.pop();
        }
    }
    false
}

fn station_optimum_unchecked(order_set: &[usize], instance: &Instance) -> Result<StationOptimum> {
    let mut sorted = order_set.to_vec();
    sorted.sort_unstable();
    if let Some(sku) = instance.first_uncoverable(&sorted) {
        return Err(Error::UncoverableSku { sku });
    }
    let perms = permutations(&sorted);
    let widest = instance.racks().iter().map(|r| r.skus.len()).max().unwrap_or(0);
    let cap = sorted.len() * instance.max_order_size().max(1);
    for depth in 0..=cap {
        for seq in &perms {
            let mut path = Vec::new();
            if finish_within(&Bench::start(seq, instance), seq, instance, depth, widest, &mut path) {
                return Ok(StationOptimum {
                    visits: path.len(),
                    sequence: seq.clone(),
                    racks: path,
                });
            }
        }
    }
    unreachable!("every useful visit delivers at least one SKU")
}

/// Minimum visits for one station holding `order_set`, over every order sequence.
pub fn exact_station_optimum(
    order_set: &[usize],
    instance: &Instance,
    limits: &OracleLimits,
) -> Result<StationOptimum> {
    limits.check(order_set.len(), instance, 1)?;
    station_optimum_unchecked(order_set, instance)
}

/// Optimal solution by exhaustive enumeration.
pub fn brute_force_solve(instance: &Instance, limits: &OracleLimits) -> Result<(Solution, usize)> {
    limits.check(instance.order_count(), instance, instance.stations())?;
    ensure_valid(instance)?;
    let sizes = balance_counts(instance.order_count(), instance.stations())?;
    let mut memo: FxHashMap<Vec<usize>, StationOptimum> = FxHashMap::default();
    let mut best: Option<(Vec<StationOptimum>, usize)> = None;
    let mut stations: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
    enumerate(instance, &sizes, 0, &mut stations, &mut memo, &mut best)?;
    let (parts, objective) = best.expect("balanced partition exists");
    let solution = Solution {
        theta: OrderSchedule(parts.iter().map(|p| p.sequence.clone()).collect()),
        mu: RackSchedule(parts.into_iter().map(|p| p.racks).collect()),
    };
    Ok((solution, objective))
}

fn enumerate(
    instance: &Instance,
    sizes: &[usize],
    order: usize,
    stations: &mut Vec<Vec<usize>>,
    memo: &mut FxHashMap<Vec<usize>, StationOptimum>,
    best: &mut Option<(Vec<StationOptimum>, usize)>,
) -> Result<()> {
    if order == instance.order_count() {
        let mut parts = Vec::with_capacity(stations.len());
        for set in stations.iter() {
            if !memo.contains_key(set) {
                memo.insert(set.clone(), station_optimum_unchecked(set, instance)?);
            }
            parts.push(memo[set].clone());
        }
        let total = parts.iter().map(|p| p.visits).sum();
        if best.as_ref().is_none_or(|(_, b)| total < *b) {
            *best = Some((parts, total));
        }
        return Ok(());
    }
    for p in 0..stations.len() {
        if stations[p].len() < sizes[p] {
            stations[p].push(order);
            enumerate(instance, sizes, order + 1, stations, memo, best)?;
            stations[p].pop();
        }
    }
    Ok(())
}

/// A single-station case with known optimum: five orders over SKUs A..G
/// (ids 0..6), racks {A,B}, {C,F}, {E,G}, a bench of three bins, and the
/// sequence `[4, 1, 3, 0, 2]` = {E}, {G}, {C}, {F}, {A,B}. Bringing racks
/// {E,G}, {C,F}, {A,B} in that order finishes all orders in three visits.
#[derive(Debug, Clone)]
pub struct ReferenceCase {
    pub instance: Instance,
    pub theta: Vec<usize>,
    pub mu: Vec<usize>,
}

pub fn reference_case() -> ReferenceCase {
    const A: usize = 0;
    const B: usize = 1;
    const C: usize = 2;
    const E: usize = 4;
    const F: usize = 5;
    const G: usize = 6;
    let orders = vec![vec![F], vec![G], vec![A, B], vec![C], vec![E]];
    let racks = vec![vec![A, B], vec![C, F], vec![E, G]];
    ReferenceCase {
        instance: Instance::new(7, orders, racks, 1, 3).expect("static instance"),
        theta: vec![4, 1, 3, 0, 2],
        mu: vec![2, 1, 0],
    }
}
