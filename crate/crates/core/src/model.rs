//! Domain types shared by every solver: instances, schedules, solutions and
//! solver parameters, plus the workload-balance and time-slot bound formulas.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rsp::RspOptions;
use crate::sa::{ExtremaRule, Operator};
use crate::sku::SkuSet;
use crate::station::BeamWidth;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Order {
    pub skus: SkuSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rack {
    pub skus: SkuSet,
}

/// A problem instance: orders and racks over a SKU universe, `stations`
/// picking stations each with a bench of `capacity` order bins.
///
/// Instances are immutable once built; solvers work on their own copies of
/// schedules and share the instance by reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct Instance {
    sku_count: usize,
    orders: Vec<Order>,
    racks: Vec<Rack>,
    stations: usize,
    capacity: usize,
}

/// On-disk layout of an instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub sku_count: usize,
    pub stations: usize,
    pub capacity: usize,
    pub orders: Vec<Vec<usize>>,
    pub racks: Vec<Vec<usize>>,
}

impl Instance {
    /// Builds an instance from SKU id lists. Only structural problems (ids
    /// outside the universe) are rejected here; semantic problems are left to
    /// [`validate_instance`] so they can be reported together.
    pub fn new(
        sku_count: usize,
        orders: Vec<Vec<usize>>,
        racks: Vec<Vec<usize>>,
        stations: usize,
        capacity: usize,
    ) -> Result<Self> {
        let to_set = |what: &str, idx: usize, ids: &[usize]| -> Result<SkuSet> {
            if let Some(bad) = ids.iter().find(|&&id| id >= sku_count) {
                return Err(Error::InvalidInstance(format!(
                    "{what} {idx} references SKU {bad} outside universe of {sku_count}"
                )));
            }
            Ok(SkuSet::from_ids(sku_count, ids.iter().copied()))
        };
        let orders = orders
            .iter()
            .enumerate()
            .map(|(i, ids)| to_set("order", i, ids).map(|skus| Order { skus }))
            .collect::<Result<Vec<_>>>()?;
        let racks = racks
            .iter()
            .enumerate()
            .map(|(i, ids)| to_set("rack", i, ids).map(|skus| Rack { skus }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Instance {
            sku_count,
            orders,
            racks,
            stations,
            capacity,
        })
    }

    pub fn sku_count(&self) -> usize {
        self.sku_count
    }

    pub fn orders(&self) -> &[Order] {
        &self.orders
    }

    pub fn racks(&self) -> &[Rack] {
        &self.racks
    }

    pub fn order(&self, idx: usize) -> &Order {
        &self.orders[idx]
    }

    pub fn rack(&self, idx: usize) -> &Rack {
        &self.racks[idx]
    }

    pub fn order_count(&self) -> usize {
        self.orders.len()
    }

    pub fn rack_count(&self) -> usize {
        self.racks.len()
    }

    pub fn stations(&self) -> usize {
        self.stations
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn max_order_size(&self) -> usize {
        self.orders.iter().map(|o| o.skus.len()).max().unwrap_or(0)
    }

    /// Copy of this instance with a different station count.
    pub fn with_stations(&self, stations: usize) -> Instance {
        Instance {
            stations,
            ..self.clone()
        }
    }

    /// Racks stocking `sku` (the set R_i).
    pub fn racks_with(&self, sku: usize) -> impl Iterator<Item = usize> + '_ {
        self.racks
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.skus.contains(sku))
            .map(|(i, _)| i)
    }

    /// Union of the SKUs demanded by `orders`.
    pub fn demand_of<'a, I: IntoIterator<Item = &'a usize>>(&self, orders: I) -> SkuSet {
        let mut demand = SkuSet::empty(self.sku_count);
        for &o in orders {
            demand.union_with(&self.orders[o].skus);
        }
        demand
    }

    /// First demanded SKU among `orders` that no rack stocks.
    pub fn first_uncoverable<'a, I: IntoIterator<Item = &'a usize>>(
        &self,
        orders: I,
    ) -> Option<usize> {
        let mut stocked = SkuSet::empty(self.sku_count);
        for r in &self.racks {
            stocked.union_with(&r.skus);
        }
        self.demand_of(orders).difference(&stocked).iter().next()
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile::from(self.clone())
    }
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        Instance::new(f.sku_count, f.orders, f.racks, f.stations, f.capacity)
    }
}

impl From<Instance> for InstanceFile {
    fn from(inst: Instance) -> Self {
        InstanceFile {
            sku_count: inst.sku_count,
            stations: inst.stations,
            capacity: inst.capacity,
            orders: inst.orders.iter().map(|o| o.skus.to_vec()).collect(),
            racks: inst.racks.iter().map(|r| r.skus.to_vec()).collect(),
        }
    }
}

/// Per-station order counts that keep workloads balanced: the first `n % m`
/// stations take `ceil(n/m)` orders, the rest `floor(n/m)`.
pub fn balance_counts(n: usize, m: usize) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::InvalidInstance("station count must be at least 1".into()));
    }
    if n < m {
        return Err(Error::InvalidInstance(format!(
            "fewer orders ({n}) than stations ({m})"
        )));
    }
    let (base, extra) = (n / m, n % m);
    Ok((0..m).map(|p| base + usize::from(p < extra)).collect())
}

/// Trivial bound on the number of time slots: `ceil(n/m) * max|o| * |R|`.
pub fn time_slot_upper_bound(instance: &Instance) -> usize {
    let m = instance.stations().max(1);
    instance.order_count().div_ceil(m) * instance.max_order_size() * instance.rack_count()
}

/// The same bound restricted to one station holding `station_orders` orders.
pub fn station_slot_bound(instance: &Instance, station_orders: usize) -> usize {
    station_orders * instance.max_order_size() * instance.rack_count()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstanceViolation {
    EmptyOrder { order: usize },
    EmptyRack { rack: usize },
    UncoverableSku { sku: usize, order: usize },
    FewerOrdersThanStations { orders: usize, stations: usize },
    NoStations,
    ZeroCapacity,
}

impl fmt::Display for InstanceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceViolation::EmptyOrder { order } => write!(f, "empty order {order}"),
            InstanceViolation::EmptyRack { rack } => write!(f, "empty rack {rack}"),
            InstanceViolation::UncoverableSku { sku, order } => {
                write!(f, "uncoverable SKU {sku} demanded by order {order}")
            }
            InstanceViolation::FewerOrdersThanStations { orders, stations } => write!(
                f,
                "fewer orders than stations ({orders} orders, {stations} stations)"
            ),
            InstanceViolation::NoStations => write!(f, "no stations"),
            InstanceViolation::ZeroCapacity => write!(f, "bench capacity below 1"),
        }
    }
}

/// Collects every semantic problem with an instance. An empty list means the
/// instance is solvable by every solver in this crate.
pub fn validate_instance(instance: &Instance) -> Vec<InstanceViolation> {
    let mut out = Vec::new();
    for (i, o) in instance.orders().iter().enumerate() {
        if o.skus.is_empty() {
            out.push(InstanceViolation::EmptyOrder { order: i });
        }
    }
    for (i, r) in instance.racks().iter().enumerate() {
        if r.skus.is_empty() {
            out.push(InstanceViolation::EmptyRack { rack: i });
        }
    }
    let mut stocked = SkuSet::empty(instance.sku_count());
    for r in instance.racks() {
        stocked.union_with(&r.skus);
    }
    let mut reported = SkuSet::empty(instance.sku_count());
    for (i, o) in instance.orders().iter().enumerate() {
        for sku in o.skus.difference(&stocked).iter() {
            if !reported.contains(sku) {
                reported.insert(sku);
                out.push(InstanceViolation::UncoverableSku { sku, order: i });
            }
        }
    }
    if instance.stations() == 0 {
        out.push(InstanceViolation::NoStations);
    } else if instance.order_count() < instance.stations() {
        out.push(InstanceViolation::FewerOrdersThanStations {
            orders: instance.order_count(),
            stations: instance.stations(),
        });
    }
    if instance.capacity() < 1 {
        out.push(InstanceViolation::ZeroCapacity);
    }
    out
}

/// Turns a non-empty violation list into an error.
pub fn ensure_valid(instance: &Instance) -> Result<()> {
    let violations = validate_instance(instance);
    // Pure coverage failures are infeasibility, not malformed input.
    if let Some(InstanceViolation::UncoverableSku { sku, .. }) = violations.first() {
        if violations
            .iter()
            .all(|v| matches!(v, InstanceViolation::UncoverableSku { .. }))
        {
            return Err(Error::UncoverableSku { sku: *sku });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        let msg = violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidInstance(msg))
    }
}

/// Order schedule θ: one ordered sequence of order indices per station.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderSchedule(pub Vec<Vec<usize>>);

impl OrderSchedule {
    pub fn stations(&self) -> &[Vec<usize>] {
        &self.0
    }

    pub fn station(&self, p: usize) -> &[usize] {
        &self.0[p]
    }

    pub fn segment_sizes(&self) -> Vec<usize> {
        self.0.iter().map(Vec::len).collect()
    }

    pub fn flatten(&self) -> Vec<usize> {
        self.0.iter().flatten().copied().collect()
    }

    /// Re-splits a flat token list by fixed segment sizes.
    pub fn from_tokens(tokens: &[usize], sizes: &[usize]) -> Self {
        debug_assert_eq!(tokens.len(), sizes.iter().sum::<usize>());
        let mut out = Vec::with_capacity(sizes.len());
        let mut at = 0;
        for &s in sizes {
            out.push(tokens[at..at + s].to_vec());
            at += s;
        }
        OrderSchedule(out)
    }

    /// Checks that θ partitions `0..n` and matches the balanced sizes for `m` stations.
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.0.len() != m {
            return Err(Error::InvalidInput(format!(
                "order schedule has {} stations, expected {m}",
                self.0.len()
            )));
        }
        let expected = balance_counts(n, m)?;
        if self.segment_sizes() != expected {
            return Err(Error::InvalidInput(format!(
                "station sizes {:?} differ from balanced sizes {expected:?}",
                self.segment_sizes()
            )));
        }
        let mut seen = vec![false; n];
        for &o in self.0.iter().flatten() {
            if o >= n || std::mem::replace(&mut seen[o], true) {
                return Err(Error::InvalidInput(format!(
                    "order {o} is out of range or scheduled twice"
                )));
            }
        }
        Ok(())
    }
}

/// Rack schedule μ: one ordered sequence of rack indices per station. Racks
/// may repeat within and across stations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RackSchedule(pub Vec<Vec<usize>>);

impl RackSchedule {
    pub fn stations(&self) -> &[Vec<usize>] {
        &self.0
    }

    pub fn station(&self, p: usize) -> &[usize] {
        &self.0[p]
    }

    /// Total number of rack visits.
    pub fn visits(&self) -> usize {
        self.0.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub theta: OrderSchedule,
    pub mu: RackSchedule,
}

impl Solution {
    pub fn new(theta: Vec<Vec<usize>>, mu: Vec<Vec<usize>>) -> Self {
        Solution {
            theta: OrderSchedule(theta),
            mu: RackSchedule(mu),
        }
    }

    pub fn objective(&self) -> usize {
        self.mu.visits()
    }
}

/// Controls for the annealing search and its station evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// A candidate this fraction worse than the initial fitness is accepted
    /// with probability 0.5 at the starting temperature.
    pub w: f64,
    /// Cooling factor applied after every epoch.
    pub alpha: f64,
    /// Initial epoch length.
    pub k0: usize,
    pub max_iterations: usize,
    pub tau_floor: f64,
    pub time_limit_seconds: Option<f64>,
    /// Ascending beam widths for the iterated beam search.
    pub gamma: Vec<BeamWidth>,
    pub rng_seed: u64,
    pub rsp: RspOptions,
    pub extrema: ExtremaRule,
    /// Neighborhood operators drawn uniformly each iteration.
    pub operators: Vec<Operator>,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            w: 0.05,
            alpha: 0.95,
            k0: 10,
            max_iterations: 5000,
            tau_floor: 0.01,
            time_limit_seconds: None,
            gamma: BeamWidth::default_ladder(),
            rng_seed: 0,
            rsp: RspOptions::default(),
            extrema: ExtremaRule::AllObserved,
            operators: Operator::ALL.to_vec(),
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParams(format!(
                "cooling rate must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if self.w <= 0.0 || !self.w.is_finite() {
            return Err(Error::InvalidParams(format!("w must be positive, got {}", self.w)));
        }
        if self.k0 < 1 {
            return Err(Error::InvalidParams("initial epoch length must be >= 1".into()));
        }
        if self.gamma.is_empty() {
            return Err(Error::InvalidParams("beam width list is empty".into()));
        }
        if self.gamma.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidParams(format!(
                "beam widths must be strictly increasing: {:?}",
                self.gamma
            )));
        }
        if self.gamma.iter().any(|&b| b == BeamWidth::Limited(0)) {
            return Err(Error::InvalidParams("beam width must be >= 1".into()));
        }
        Ok(())
    }
}
