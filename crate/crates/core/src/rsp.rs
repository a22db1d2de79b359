//! Rack selection: choose, per station, a balanced set of orders and a set of
//! racks that stocks all of their SKUs, minimising the number of racks.
//!
//! Stations are solved one after another on the orders still unassigned,
//! then a final joint solve over all stations revisits the result using
//! only the racks chosen so far. That is `m + 1` solves in total. The
//! outcome seeds the annealing search with an order assignment θ₀.
//!
//! Each solve is an exact branch-and-bound when its node budget allows and
//! falls back to a greedy cover otherwise.

use rand::seq::SliceRandom;
use rand::Rng;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::model::{balance_counts, ensure_valid, Instance, OrderSchedule};
use crate::sku::SkuSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RspMode {
    /// Branch-and-bound without a node budget.
    Exact,
    /// Overlap clustering plus greedy set cover only.
    Greedy,
    /// Branch-and-bound within the node budget, greedy when it runs out.
    Auto,
}

impl std::str::FromStr for RspMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(RspMode::Exact),
            "greedy" => Ok(RspMode::Greedy),
            "auto" => Ok(RspMode::Auto),
            other => Err(Error::InvalidParams(format!("unknown RSP mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RspOptions {
    pub mode: RspMode,
    /// Search nodes allowed per solve in `Auto` mode.
    pub node_budget: u64,
}

impl Default for RspOptions {
    fn default() -> Self {
        RspOptions {
            mode: RspMode::Auto,
            node_budget: 1_000_000,
        }
    }
}

impl RspOptions {
    pub fn with_mode(mode: RspMode) -> Self {
        RspOptions {
            mode,
            ..Default::default()
        }
    }

    fn budget(&self) -> u64 {
        match self.mode {
            RspMode::Exact => u64::MAX,
            RspMode::Greedy => 0,
            RspMode::Auto => self.node_budget,
        }
    }
}

/// Orders and racks chosen for one station.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StationPick {
    pub orders: Vec<usize>,
    pub racks: Vec<usize>,
    /// The branch-and-bound finished, so the rack count is minimal.
    pub proven_optimal: bool,
}

/// Per-station order and rack sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RspAssignment {
    pub orders: Vec<Vec<usize>>,
    pub racks: Vec<Vec<usize>>,
    /// Number of optimisation problems solved to produce this assignment.
    pub solves: usize,
}

impl RspAssignment {
    pub fn total_racks(&self) -> usize {
        self.racks.iter().map(Vec::len).sum()
    }

    /// Every station's racks stock every SKU its orders demand.
    pub fn covers(&self, instance: &Instance) -> bool {
        self.orders.iter().zip(&self.racks).all(|(orders, racks)| {
            let mut stocked = SkuSet::empty(instance.sku_count());
            racks.iter().for_each(|&r| stocked.union_with(&instance.rack(r).skus));
            instance.demand_of(orders).is_subset(&stocked)
        })
    }

    /// Distinct racks used by any station.
    pub fn rack_pool(&self) -> Vec<usize> {
        let mut pool: Vec<usize> = self.racks.iter().flatten().copied().collect();
        pool.sort_unstable();
        pool.dedup();
        pool
    }
}

/// Node counter shared by one solve.
struct Budget {
    left: u64,
}

impl Budget {
    fn tick(&mut self) -> bool {
        if self.left == 0 {
            return false;
        }
        self.left -= 1;
        true
    }
}

/// Set-cover machinery over a fixed rack pool.
struct Cover<'a> {
    instance: &'a Instance,
    pool: Vec<usize>,
    memo: FxHashMap<SkuSet, Vec<usize>>,
}

impl<'a> Cover<'a> {
    fn new(instance: &'a Instance, pool: Vec<usize>) -> Self {
        Cover {
            instance,
            pool,
            memo: FxHashMap::default(),
        }
    }

    fn skus(&self, r: usize) -> &SkuSet {
        &self.instance.rack(r).skus
    }

    /// `ceil(|demand| / best single-rack coverage)`; valid lower bound.
    fn lower_bound(&self, demand: &SkuSet) -> usize {
        let size = demand.len();
        if size == 0 {
            return 0;
        }
        let best = self
            .pool
            .iter()
            .map(|&r| self.skus(r).intersection_len(demand))
            .max()
            .unwrap_or(0);
        if best == 0 {
            usize::MAX
        } else {
            size.div_ceil(best)
        }
    }

    /// Largest-uncovered-count rack first, ties to the lowest rack index.
    fn greedy(&self, demand: &SkuSet) -> Option<Vec<usize>> {
        let mut uncovered = demand.clone();
        let mut chosen = Vec::new();
        while !uncovered.is_empty() {
            let (gain, r) = self
                .pool
                .iter()
                .map(|&r| (self.skus(r).intersection_len(&uncovered), r))
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))?;
            if gain == 0 {
                return None;
            }
            uncovered.difference_with(self.skus(r));
            chosen.push(r);
        }
        chosen.sort_unstable();
        Some(chosen)
    }

    /// Minimum cover of `demand`, or `None` if the budget ran out first.
    fn exact(&mut self, demand: &SkuSet, budget: &mut Budget) -> Option<Vec<usize>> {
        if let Some(hit) = self.memo.get(demand) {
            return Some(hit.clone());
        }
        let mut best = self.greedy(demand)?;
        let mut chosen = Vec::new();
        let mut ok = true;
        self.branch(demand, &mut chosen, &mut best, budget, &mut ok);
        if !ok {
            return None;
        }
        best.sort_unstable();
        self.memo.insert(demand.clone(), best.clone());
        Some(best)
    }

    fn branch(
        &self,
        uncovered: &SkuSet,
        chosen: &mut Vec<usize>,
        best: &mut Vec<usize>,
        budget: &mut Budget,
        ok: &mut bool,
    ) {
        if !*ok {
            return;
        }
        if !budget.tick() {
            *ok = false;
            return;
        }
        if uncovered.is_empty() {
            if chosen.len() < best.len() {
                *best = chosen.clone();
            }
            return;
        }
        let lb = self.lower_bound(uncovered);
        if lb == usize::MAX || chosen.len() + lb >= best.len() {
            return;
        }
        // Branch on the SKU with the fewest stocking racks.
        let (_, pivot) = uncovered
            .iter()
            .map(|s| (self.pool.iter().filter(|&&r| self.skus(r).contains(s)).count(), s))
            .min()
            .expect("uncovered is nonempty");
        let mut options: Vec<(usize, usize)> = self
            .pool
            .iter()
            .filter(|&&r| self.skus(r).contains(pivot))
            .map(|&r| (self.skus(r).intersection_len(uncovered), r))
            .collect();
        options.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, r) in options {
            chosen.push(r);
            let rest = uncovered.difference(self.skus(r));
            self.branch(&rest, chosen, best, budget, ok);
            chosen.pop();
            if !*ok {
                return;
            }
        }
    }
}

fn check_coverable(instance: &Instance, orders: &[usize], pool: &[usize]) -> Result<()> {
    let mut stocked = SkuSet::empty(instance.sku_count());
    pool.iter().for_each(|&r| stocked.union_with(&instance.rack(r).skus));
    match instance.demand_of(orders).difference(&stocked).iter().next() {
        Some(sku) => Err(Error::UncoverableSku { sku }),
        None => Ok(()),
    }
}

/// Overlap clustering: start from the lowest-indexed candidate, then keep
/// adding the order sharing the most SKUs with the demand so far (ties: fewer
/// new SKUs, then lowest index).
fn cluster_orders(instance: &Instance, candidates: &[usize], k: usize) -> Vec<usize> {
    let mut pending: Vec<usize> = candidates.to_vec();
    pending.sort_unstable();
    let mut chosen = Vec::with_capacity(k);
    let mut demand = SkuSet::empty(instance.sku_count());
    while chosen.len() < k && !pending.is_empty() {
        let pos = if chosen.is_empty() {
            0
        } else {
            let mut best = 0;
            let mut best_key = (0usize, usize::MAX);
            for (i, &o) in pending.iter().enumerate() {
                let skus = &instance.order(o).skus;
                let shared = skus.intersection_len(&demand);
                let key = (shared, skus.len() - shared);
                if i == 0 || key.0 > best_key.0 || (key.0 == best_key.0 && key.1 < best_key.1) {
                    best = i;
                    best_key = key;
                }
            }
            best
        };
        let o = pending.remove(pos);
        demand.union_with(&instance.order(o).skus);
        chosen.push(o);
    }
    chosen.sort_unstable();
    chosen
}

fn solve_station_in_pool(
    instance: &Instance,
    candidates: &[usize],
    k: usize,
    pool: &[usize],
    options: &RspOptions,
) -> Result<StationPick> {
    if k > candidates.len() {
        return Err(Error::InvalidInput(format!(
            "cannot pick {k} orders from {} candidates",
            candidates.len()
        )));
    }
    check_coverable(instance, candidates, pool)?;
    let mut cover = Cover::new(instance, pool.to_vec());

    let greedy_orders = cluster_orders(instance, candidates, k);
    let greedy_racks = cover
        .greedy(&instance.demand_of(&greedy_orders))
        .expect("coverage checked");
    let greedy = StationPick {
        orders: greedy_orders,
        racks: greedy_racks,
        proven_optimal: false,
    };
    let mut budget = Budget {
        left: options.budget(),
    };
    if budget.left == 0 {
        return Ok(greedy);
    }

    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    let mut search = SubsetSearch {
        instance,
        candidates: &sorted,
        k,
        cover: &mut cover,
        budget: &mut budget,
        // Look for anything as good as greedy so the lexicographically first
        // optimum wins ties.
        bound: greedy.racks.len() + 1,
        best: None,
        exhausted: false,
    };
    let mut chosen = Vec::with_capacity(k);
    let demand = SkuSet::empty(instance.sku_count());
    search.descend(0, &mut chosen, &demand);
    let exhausted = search.exhausted;
    match search.best.take() {
        Some((orders, racks)) if !exhausted || racks.len() < greedy.racks.len() => Ok(StationPick {
            orders,
            racks,
            proven_optimal: !exhausted,
        }),
        _ => Ok(StationPick {
            proven_optimal: false,
            ..greedy
        }),
    }
}

struct SubsetSearch<'s, 'a> {
    instance: &'a Instance,
    candidates: &'s [usize],
    k: usize,
    cover: &'s mut Cover<'a>,
    budget: &'s mut Budget,
    /// Only solutions with fewer racks than this are recorded.
    bound: usize,
    best: Option<(Vec<usize>, Vec<usize>)>,
    exhausted: bool,
}

impl SubsetSearch<'_, '_> {
    fn descend(&mut self, from: usize, chosen: &mut Vec<usize>, demand: &SkuSet) {
        if self.exhausted {
            return;
        }
        if !self.budget.tick() {
            self.exhausted = true;
            return;
        }
        if self.cover.lower_bound(demand) >= self.bound {
            return;
        }
        if chosen.len() == self.k {
            match self.cover.exact(demand, self.budget) {
                Some(racks) => {
                    if racks.len() < self.bound {
                        self.bound = racks.len();
                        self.best = Some((chosen.clone(), racks));
                    }
                }
                None => self.exhausted = true,
            }
            return;
        }
        let need = self.k - chosen.len();
        for i in from..self.candidates.len() {
            if self.candidates.len() - i < need {
                break;
            }
            let o = self.candidates[i];
            let mut next = demand.clone();
            next.union_with(&self.instance.order(o).skus);
            chosen.push(o);
            self.descend(i + 1, chosen, &next);
            chosen.pop();
            if self.exhausted {
                return;
            }
        }
    }
}

/// Picks `k` of `candidate_orders` and a rack set covering them with as few
/// racks as possible.
pub fn solve_single_station_rsp(
    instance: &Instance,
    candidate_orders: &[usize],
    k: usize,
    options: &RspOptions,
) -> Result<StationPick> {
    let pool: Vec<usize> = (0..instance.rack_count()).collect();
    solve_station_in_pool(instance, candidate_orders, k, &pool, options)
}

/// Stations in index order, each taking its balanced share of the orders
/// still unassigned.
pub fn rsp_sequential(instance: &Instance, options: &RspOptions) -> Result<RspAssignment> {
    let pool: Vec<usize> = (0..instance.rack_count()).collect();
    sequential_in_pool(instance, &pool, options)
}

fn sequential_in_pool(
    instance: &Instance,
    pool: &[usize],
    options: &RspOptions,
) -> Result<RspAssignment> {
    let sizes = balance_counts(instance.order_count(), instance.stations())?;
    let mut remaining: Vec<usize> = (0..instance.order_count()).collect();
    let mut out = RspAssignment {
        orders: Vec::with_capacity(sizes.len()),
        racks: Vec::with_capacity(sizes.len()),
        solves: 0,
    };
    for &k in &sizes {
        let pick = solve_station_in_pool(instance, &remaining, k, pool, options)?;
        remaining.retain(|o| !pick.orders.contains(o));
        out.orders.push(pick.orders);
        out.racks.push(pick.racks);
        out.solves += 1;
    }
    Ok(out)
}

/// Exact joint rack selection over all stations, restricted to `pool`.
/// Returns `None` if the node budget runs out before optimality is proven.
pub fn solve_joint_rsp(
    instance: &Instance,
    pool: &[usize],
    options: &RspOptions,
) -> Result<Option<RspAssignment>> {
    let sizes = balance_counts(instance.order_count(), instance.stations())?;
    let all: Vec<usize> = (0..instance.order_count()).collect();
    check_coverable(instance, &all, pool)?;
    let mut cover = Cover::new(instance, pool.to_vec());
    let mut budget = Budget {
        left: options.budget(),
    };
    if budget.left == 0 {
        return Ok(None);
    }
    let mut joint = JointSearch {
        instance,
        sizes: &sizes,
        cover: &mut cover,
        budget: &mut budget,
        bound: usize::MAX,
        best: None,
        exhausted: false,
    };
    let mut stations: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
    let mut demands = vec![SkuSet::empty(instance.sku_count()); sizes.len()];
    joint.assign(0, &mut stations, &mut demands);
    if joint.exhausted {
        return Ok(None);
    }
    Ok(joint.best.take().map(|(orders, racks)| RspAssignment {
        orders,
        racks,
        solves: 1,
    }))
}

struct JointSearch<'s, 'a> {
    instance: &'a Instance,
    sizes: &'s [usize],
    cover: &'s mut Cover<'a>,
    budget: &'s mut Budget,
    bound: usize,
    best: Option<(Vec<Vec<usize>>, Vec<Vec<usize>>)>,
    exhausted: bool,
}

impl JointSearch<'_, '_> {
    fn assign(&mut self, order: usize, stations: &mut Vec<Vec<usize>>, demands: &mut Vec<SkuSet>) {
        if self.exhausted {
            return;
        }
        if !self.budget.tick() {
            self.exhausted = true;
            return;
        }
        let lb: usize = demands
            .iter()
            .map(|d| self.cover.lower_bound(d))
            .fold(0usize, |a, b| a.saturating_add(b));
        if lb >= self.bound {
            return;
        }
        if order == self.instance.order_count() {
            let mut racks = Vec::with_capacity(stations.len());
            let mut total = 0;
            for d in demands.iter() {
                match self.cover.exact(d, self.budget) {
                    Some(c) => {
                        total += c.len();
                        racks.push(c);
                    }
                    None => {
                        self.exhausted = true;
                        return;
                    }
                }
            }
            if total < self.bound {
                self.bound = total;
                self.best = Some((stations.clone(), racks));
            }
            return;
        }
        let skus = self.instance.order(order).skus.clone();
        for p in 0..stations.len() {
            if stations[p].len() >= self.sizes[p] {
                continue;
            }
            // Empty stations of equal size are interchangeable; try only the first.
            if stations[p].is_empty()
                && (0..p).any(|q| stations[q].is_empty() && self.sizes[q] == self.sizes[p])
            {
                continue;
            }
            let saved = demands[p].clone();
            demands[p].union_with(&skus);
            stations[p].push(order);
            self.assign(order + 1, stations, demands);
            stations[p].pop();
            demands[p] = saved;
            if self.exhausted {
                return;
            }
        }
    }
}

/// Joint re-solve over all stations restricted to the racks chosen by the
/// sequential pass. Never returns a worse assignment than its input.
pub fn rsp_consolidate(
    instance: &Instance,
    assignment: &RspAssignment,
    options: &RspOptions,
) -> Result<RspAssignment> {
    let pool = assignment.rack_pool();
    let mut best = assignment.clone();
    best.solves = assignment.solves + 1;
    if instance.stations() <= 1 {
        return Ok(best);
    }
    let candidate = match solve_joint_rsp(instance, &pool, options)? {
        Some(joint) => Some(joint),
        // Budget exhausted or greedy mode: rerun the sequential pass on the pool.
        None => {
            let greedy = RspOptions::with_mode(RspMode::Greedy);
            Some(sequential_in_pool(instance, &pool, &greedy)?)
        }
    };
    if let Some(c) = candidate {
        if c.total_racks() < best.total_racks() {
            best.orders = c.orders;
            best.racks = c.racks;
        }
    }
    Ok(best)
}

/// Sequential pass plus consolidation: `m + 1` solves.
pub fn rsp(instance: &Instance, options: &RspOptions) -> Result<RspAssignment> {
    ensure_valid(instance)?;
    let seq = rsp_sequential(instance, options)?;
    rsp_consolidate(instance, &seq, options)
}

/// θ₀: each station's order set in uniformly random order.
pub fn theta_from_rsp<R: Rng + ?Sized>(assignment: &RspAssignment, rng: &mut R) -> OrderSchedule {
    OrderSchedule(
        assignment
            .orders
            .iter()
            .map(|orders| {
                let mut seq = orders.clone();
                seq.sort_unstable();
                seq.shuffle(rng);
                seq
            })
            .collect(),
    )
}
