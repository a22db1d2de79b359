//! Execution-trace semantics of a schedule.
//!
//! A station's bench holds up to `C` orders. Racks arrive one at a time; each
//! visit removes the rack's SKUs from every active order's residual demand.
//! A completed order is replaced by the next pending order in θᵖ, and the
//! replacement picks from the rack that is still present. Replacement
//! cascades: if the newcomer is also fully served by the current rack it
//! completes too, and the next order moves up.
//!
//! A time slot is a maximal interval with a fixed active-order set and a
//! fixed rack, so one rack visit spans one slot plus one more per cascade
//! round. The checker verifies the time-indexed model constraints on such
//! traces; [`ConstraintId`] names each family.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{balance_counts, Instance, Solution};
use crate::sku::SkuSet;

/// Objective value: total rack visits over all stations.
pub fn evaluate_fitness(solution: &Solution) -> usize {
    solution.mu.visits()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeSlot {
    /// Position in μᵖ of the visit this slot belongs to.
    pub visit: usize,
    /// Racks present during the slot. A replayed trace always has exactly one.
    pub racks: Vec<usize>,
    /// A new rack arrived at the start of this slot.
    pub rack_change: bool,
    /// Orders on the bench, in bench-position order.
    pub active: Vec<usize>,
    /// `(order, sku)` pairs picked during the slot.
    pub deliveries: Vec<(usize, usize)>,
    /// Residual demand of each active order at the end of the slot.
    pub remaining: Vec<SkuSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StationTrace {
    pub slots: Vec<TimeSlot>,
}

impl StationTrace {
    /// Number of slots that start a new rack visit.
    pub fn rack_changes(&self) -> usize {
        self.slots.iter().filter(|s| s.rack_change).count()
    }

    /// Line-oriented export, one slot per line.
    pub fn write_lines(&self, station: usize, out: &mut impl fmt::Write) -> fmt::Result {
        for (t, slot) in self.slots.iter().enumerate() {
            let rack = slot
                .racks
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(",");
            let active = slot
                .active
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(",");
            writeln!(out, "station {station} slot {t} rack {rack} active [{active}]")?;
        }
        Ok(())
    }
}

/// Result of replaying one station, whether or not it finished.
#[derive(Debug, Clone)]
pub struct Replay {
    pub trace: StationTrace,
    /// Orders still unfinished when the rack sequence ran out, loaded or not.
    pub outstanding: Vec<usize>,
    /// Visits that removed nothing from the bench.
    pub wasteful_visits: Vec<usize>,
}

fn check_indices(instance: &Instance, orders: &[usize], racks: &[usize]) -> Result<()> {
    if let Some(o) = orders.iter().find(|&&o| o >= instance.order_count()) {
        return Err(Error::InvalidInput(format!("unknown order index {o}")));
    }
    if let Some(r) = racks.iter().find(|&&r| r >= instance.rack_count()) {
        return Err(Error::InvalidInput(format!("unknown rack index {r}")));
    }
    Ok(())
}

/// Replays a station's bench and records every time slot.
pub fn replay_station(
    instance: &Instance,
    order_sequence: &[usize],
    rack_sequence: &[usize],
) -> Result<Replay> {
    check_indices(instance, order_sequence, rack_sequence)?;
    let capacity = instance.capacity().max(1);
    let mut bench: Vec<Option<(usize, SkuSet)>> = vec![None; capacity];
    let mut next = 0;
    for slot in bench.iter_mut() {
        if next < order_sequence.len() {
            let o = order_sequence[next];
            *slot = Some((o, instance.order(o).skus.clone()));
            next += 1;
        }
    }

    let mut trace = StationTrace::default();
    let mut wasteful = Vec::new();
    for (visit, &r) in rack_sequence.iter().enumerate() {
        let rack = &instance.rack(r).skus;
        let mut first = true;
        // Orders loaded in this round; in the first round, everyone on the bench.
        let mut fresh: Vec<bool> = bench.iter().map(Option::is_some).collect();
        loop {
            let mut slot = TimeSlot {
                visit,
                racks: vec![r],
                rack_change: first,
                active: Vec::new(),
                deliveries: Vec::new(),
                remaining: Vec::new(),
            };
            for (pos, entry) in bench.iter_mut().enumerate() {
                if let Some((o, residual)) = entry {
                    if fresh[pos] {
                        for sku in residual.intersection(rack).iter() {
                            slot.deliveries.push((*o, sku));
                        }
                        residual.difference_with(rack);
                    }
                    slot.active.push(*o);
                    slot.remaining.push(residual.clone());
                }
            }
            if first && slot.deliveries.is_empty() {
                wasteful.push(visit);
            }
            trace.slots.push(slot);

            fresh.iter_mut().for_each(|f| *f = false);
            let mut refilled = false;
            for (pos, entry) in bench.iter_mut().enumerate() {
                if entry.as_ref().is_some_and(|(_, res)| res.is_empty()) {
                    *entry = None;
                    if next < order_sequence.len() {
                        let o = order_sequence[next];
                        *entry = Some((o, instance.order(o).skus.clone()));
                        fresh[pos] = true;
                        next += 1;
                        refilled = true;
                    }
                }
            }
            if !refilled {
                break;
            }
            first = false;
        }
    }

    let mut outstanding: Vec<usize> = bench
        .iter()
        .flatten()
        .filter(|(_, res)| !res.is_empty())
        .map(|(o, _)| *o)
        .collect();
    outstanding.extend_from_slice(&order_sequence[next..]);
    Ok(Replay {
        trace,
        outstanding,
        wasteful_visits: wasteful,
    })
}

/// Replays a station and fails if any order is left unfinished.
pub fn simulate_station(
    instance: &Instance,
    order_sequence: &[usize],
    rack_sequence: &[usize],
) -> Result<StationTrace> {
    let replay = replay_station(instance, order_sequence, rack_sequence)?;
    if replay.outstanding.is_empty() {
        Ok(replay.trace)
    } else {
        Err(Error::InvalidInput(format!(
            "rack sequence leaves orders {:?} unsatisfied",
            replay.outstanding
        )))
    }
}

/// Constraint families of the time-indexed model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintId {
    /// Station workloads follow the balanced counts.
    Balance,
    /// An order is assigned to at most one station.
    UniqueAssignment,
    /// An order may only be processed at the station it is assigned to.
    ActiveRequiresAssignment,
    /// An assigned order is processed in at least one slot.
    AssignedOrderProcessed,
    /// At most `C` orders are active per slot.
    BenchCapacity,
    /// At most one rack is present per slot.
    SingleRack,
    /// A rack may only visit a station it is assigned to.
    VisitRequiresAssignment,
    /// An assigned rack visits at least once.
    AssignedRackVisits,
    /// Every SKU of every assigned order is delivered.
    SkuDelivered,
    /// A delivery needs the order active and a stocking rack present.
    DeliveryWitness,
    /// An order's active slots are contiguous.
    Contiguity,
    /// A rack arriving at a slot is recorded as a rack change.
    RackChange,
    /// Malformed input: wrong station count or an out-of-range index.
    Structure,
}

impl ConstraintId {
    pub const MODEL_FAMILIES: [ConstraintId; 12] = [
        ConstraintId::Balance,
        ConstraintId::UniqueAssignment,
        ConstraintId::ActiveRequiresAssignment,
        ConstraintId::AssignedOrderProcessed,
        ConstraintId::BenchCapacity,
        ConstraintId::SingleRack,
        ConstraintId::VisitRequiresAssignment,
        ConstraintId::AssignedRackVisits,
        ConstraintId::SkuDelivered,
        ConstraintId::DeliveryWitness,
        ConstraintId::Contiguity,
        ConstraintId::RackChange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstraintId::Balance => "balance",
            ConstraintId::UniqueAssignment => "unique-assignment",
            ConstraintId::ActiveRequiresAssignment => "active-requires-assignment",
            ConstraintId::AssignedOrderProcessed => "assigned-order-processed",
            ConstraintId::BenchCapacity => "bench-capacity",
            ConstraintId::SingleRack => "single-rack",
            ConstraintId::VisitRequiresAssignment => "visit-requires-assignment",
            ConstraintId::AssignedRackVisits => "assigned-rack-visits",
            ConstraintId::SkuDelivered => "sku-delivered",
            ConstraintId::DeliveryWitness => "delivery-witness",
            ConstraintId::Contiguity => "contiguity",
            ConstraintId::RackChange => "rack-change",
            ConstraintId::Structure => "structure",
        }
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub station: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.station {
            Some(p) => write!(f, "[{}] station {p}: {}", self.constraint, self.detail),
            None => write!(f, "[{}] {}", self.constraint, self.detail),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
    /// Legal but pointless events, e.g. a rack visit that picks nothing.
    pub warnings: Vec<String>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, id: ConstraintId) -> bool {
        self.violations.iter().any(|v| v.constraint == id)
    }

    fn push(&mut self, constraint: ConstraintId, station: Option<usize>, detail: String) {
        self.violations.push(Violation {
            constraint,
            station,
            detail,
        });
    }
}

/// Model-level view of a schedule: the assignment variables plus one trace
/// per station. Built by replay from a [`Solution`], or by hand to test the
/// checker against arbitrary variable settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceSolution {
    /// Orders assigned to each station.
    pub orders: Vec<Vec<usize>>,
    /// Racks assigned to each station.
    pub racks: Vec<Vec<usize>>,
    pub traces: Vec<StationTrace>,
}

/// Verifies every constraint family on a trace-level solution.
pub fn check_trace_solution(instance: &Instance, sol: &TraceSolution) -> FeasibilityReport {
    use ConstraintId::*;
    let mut report = FeasibilityReport::default();
    let n = instance.order_count();
    let m = instance.stations();
    if sol.orders.len() != m || sol.racks.len() != m || sol.traces.len() != m {
        report.push(
            Structure,
            None,
            format!(
                "expected {m} stations, got {} order sets, {} rack sets, {} traces",
                sol.orders.len(),
                sol.racks.len(),
                sol.traces.len()
            ),
        );
        return report;
    }
    let bad_order = sol.orders.iter().flatten().any(|&o| o >= n)
        || sol.traces.iter().any(|t| {
            t.slots.iter().any(|s| {
                s.active.iter().any(|&o| o >= n) || s.deliveries.iter().any(|&(o, _)| o >= n)
            })
        });
    let bad_rack = sol.racks.iter().flatten().any(|&r| r >= instance.rack_count())
        || sol
            .traces
            .iter()
            .any(|t| t.slots.iter().flat_map(|s| &s.racks).any(|&r| r >= instance.rack_count()));
    if bad_order || bad_rack {
        report.push(Structure, None, "order or rack index out of range".into());
        return report;
    }

    if let Ok(expected) = balance_counts(n, m) {
        for (p, (orders, &want)) in sol.orders.iter().zip(&expected).enumerate() {
            if orders.len() != want {
                report.push(
                    Balance,
                    Some(p),
                    format!("{} orders assigned, balanced count is {want}", orders.len()),
                );
            }
        }
    } else {
        report.push(Balance, None, format!("{n} orders cannot be spread over {m} stations"));
    }

    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (p, orders) in sol.orders.iter().enumerate() {
        for &o in orders {
            match owner[o] {
                Some(q) => report.push(
                    UniqueAssignment,
                    Some(p),
                    format!("order {o} also assigned to station {q}"),
                ),
                None => owner[o] = Some(p),
            }
        }
    }

    for (p, trace) in sol.traces.iter().enumerate() {
        let assigned: Vec<bool> = {
            let mut v = vec![false; n];
            sol.orders[p].iter().for_each(|&o| v[o] = true);
            v
        };
        let rack_assigned: Vec<bool> = {
            let mut v = vec![false; instance.rack_count()];
            sol.racks[p].iter().for_each(|&r| v[r] = true);
            v
        };
        let mut active_slots: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut delivered: Vec<SkuSet> = vec![SkuSet::empty(instance.sku_count()); n];
        let mut rack_seen = vec![false; instance.rack_count()];

        for (t, slot) in trace.slots.iter().enumerate() {
            if slot.active.len() > instance.capacity() {
                report.push(
                    BenchCapacity,
                    Some(p),
                    format!("slot {t} has {} active orders, capacity {}", slot.active.len(), instance.capacity()),
                );
            }
            if slot.racks.len() > 1 {
                report.push(
                    SingleRack,
                    Some(p),
                    format!("slot {t} has racks {:?}", slot.racks),
                );
            }
            for &o in &slot.active {
                if !assigned[o] {
                    report.push(
                        ActiveRequiresAssignment,
                        Some(p),
                        format!("order {o} active in slot {t} but not assigned here"),
                    );
                }
                active_slots[o].push(t);
            }
            for &r in &slot.racks {
                rack_seen[r] = true;
                if !rack_assigned[r] {
                    report.push(
                        VisitRequiresAssignment,
                        Some(p),
                        format!("rack {r} visits in slot {t} but is not assigned here"),
                    );
                }
                let arrived = t == 0 || !trace.slots[t - 1].racks.contains(&r);
                if arrived && !slot.rack_change {
                    report.push(
                        RackChange,
                        Some(p),
                        format!("rack {r} arrives in slot {t} without a recorded rack change"),
                    );
                }
            }
            for &(o, sku) in &slot.deliveries {
                let witnessed = slot.active.contains(&o)
                    && slot.racks.iter().any(|&r| instance.rack(r).skus.contains(sku));
                if !witnessed {
                    report.push(
                        DeliveryWitness,
                        Some(p),
                        format!("SKU {sku} of order {o} delivered in slot {t} without active order and stocking rack"),
                    );
                }
                delivered[o].insert(sku);
            }
        }

        for &o in &sol.orders[p] {
            let slots = &active_slots[o];
            if slots.is_empty() {
                report.push(
                    AssignedOrderProcessed,
                    Some(p),
                    format!("order {o} is never on the bench"),
                );
            } else if slots.last().unwrap() - slots.first().unwrap() + 1 != slots.len() {
                report.push(
                    Contiguity,
                    Some(p),
                    format!("order {o} active in non-contiguous slots {slots:?}"),
                );
            }
            let missing = instance.order(o).skus.difference(&delivered[o]);
            if !missing.is_empty() {
                report.push(
                    SkuDelivered,
                    Some(p),
                    format!("unsatisfied residual {:?} for order {o}", missing.to_vec()),
                );
            }
        }
        for &r in &sol.racks[p] {
            if !rack_seen[r] {
                report.push(
                    AssignedRackVisits,
                    Some(p),
                    format!("rack {r} assigned but never visits"),
                );
            }
        }
    }
    report
}

/// Replays every station and builds the trace-level view of a solution.
pub fn trace_solution(instance: &Instance, solution: &Solution) -> Result<(TraceSolution, Vec<String>)> {
    let m = solution.theta.stations().len();
    if solution.mu.stations().len() != m {
        return Err(Error::InvalidInput(format!(
            "θ has {m} stations but μ has {}",
            solution.mu.stations().len()
        )));
    }
    let mut traces = Vec::with_capacity(m);
    let mut racks = Vec::with_capacity(m);
    let mut warnings = Vec::new();
    for p in 0..m {
        let replay = replay_station(instance, solution.theta.station(p), solution.mu.station(p))?;
        for v in &replay.wasteful_visits {
            warnings.push(format!("station {p}: wasteful visit {v} removes nothing"));
        }
        let mut assigned: Vec<usize> = solution.mu.station(p).to_vec();
        assigned.sort_unstable();
        assigned.dedup();
        racks.push(assigned);
        traces.push(replay.trace);
    }
    Ok((
        TraceSolution {
            orders: solution.theta.stations().to_vec(),
            racks,
            traces,
        },
        warnings,
    ))
}

/// Full feasibility check of `(θ, μ)` against the instance.
pub fn check_solution_feasibility(instance: &Instance, solution: &Solution) -> FeasibilityReport {
    let m = instance.stations();
    let mut report = FeasibilityReport::default();
    if solution.theta.stations().len() != m || solution.mu.stations().len() != m {
        report.push(
            ConstraintId::Structure,
            None,
            format!(
                "expected {m} stations, θ has {} and μ has {}",
                solution.theta.stations().len(),
                solution.mu.stations().len()
            ),
        );
        return report;
    }
    match trace_solution(instance, solution) {
        Ok((traced, warnings)) => {
            let mut report = check_trace_solution(instance, &traced);
            report.warnings = warnings;
            for (p, trace) in traced.traces.iter().enumerate() {
                if trace.rack_changes() != solution.mu.station(p).len() {
                    report.push(
                        ConstraintId::RackChange,
                        Some(p),
                        format!(
                            "{} rack changes for {} scheduled visits",
                            trace.rack_changes(),
                            solution.mu.station(p).len()
                        ),
                    );
                }
            }
            report
        }
        Err(e) => {
            report.push(ConstraintId::Structure, None, e.to_string());
            report
        }
    }
}
