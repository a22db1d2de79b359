//! Rack sequencing for one station with a fixed order sequence θᵖ.
//!
//! States are bench configurations `(residuals, ψ, stage)`; a transition
//! brings one rack, strips its SKUs from every residual and refills freed
//! bench positions from θᵖ (cascading, see [`crate::eval`]). The shortest
//! path from the initial state to an empty bench with ψ past the end is the
//! station's minimum number of rack visits.
//!
//! [`beam_search`] walks that graph stage by stage, keeping only the best
//! `BW` states per stage, and [`iterated_beam_search`] runs a ladder of
//! widths where each run is bounded by the previous incumbent. With an
//! unbounded width the search is an exact breadth-first DP.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::model::{station_slot_bound, Instance};
use crate::sku::SkuSet;

/// Number of states kept per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BeamWidth {
    Limited(usize),
    /// Keep every state: exact search.
    Unbounded,
}

impl BeamWidth {
    pub fn default_ladder() -> Vec<BeamWidth> {
        [1, 4, 16, 64].into_iter().map(BeamWidth::Limited).collect()
    }

    fn limit(self) -> usize {
        match self {
            BeamWidth::Limited(w) => w,
            BeamWidth::Unbounded => usize::MAX,
        }
    }
}

impl fmt::Display for BeamWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BeamWidth::Limited(w) => write!(f, "{w}"),
            BeamWidth::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for BeamWidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "unbounded" | "∞" => Ok(BeamWidth::Unbounded),
            t => t
                .parse::<usize>()
                .ok()
                .filter(|&w| w >= 1)
                .map(BeamWidth::Limited)
                .ok_or_else(|| Error::InvalidParams(format!("bad beam width {s:?}"))),
        }
    }
}

/// Parses a comma separated ladder such as `1,4,16,inf`.
pub fn parse_ladder(s: &str) -> Result<Vec<BeamWidth>> {
    s.split(',').map(str::parse).collect()
}

/// A bench configuration. `residuals` has one entry per bench position;
/// vacant positions hold the empty set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchState {
    pub residuals: Vec<SkuSet>,
    /// Number of orders of θᵖ loaded so far; the 1-based pointer ψ is `next + 1`.
    pub next: usize,
    /// Racks dispatched so far.
    pub stage: usize,
}

impl BenchState {
    pub fn psi(&self) -> usize {
        self.next + 1
    }

    pub fn is_terminal(&self, theta_len: usize) -> bool {
        self.next == theta_len && self.residuals.iter().all(SkuSet::is_empty)
    }

    /// `|∪ residuals|`, the filtering tie-breaker.
    pub fn remaining_skus(&self) -> usize {
        let mut it = self.residuals.iter();
        let Some(first) = it.next() else { return 0 };
        let mut union = first.clone();
        it.for_each(|r| union.union_with(r));
        union.len()
    }
}

pub fn initial_state(theta_p: &[usize], instance: &Instance) -> BenchState {
    let c = instance.capacity().max(1);
    let loaded = c.min(theta_p.len());
    let mut residuals: Vec<SkuSet> = theta_p[..loaded]
        .iter()
        .map(|&o| instance.order(o).skus.clone())
        .collect();
    residuals.resize(c, SkuSet::empty(instance.sku_count()));
    BenchState {
        residuals,
        next: loaded,
        stage: 0,
    }
}

/// Brings `rack` to the bench. Returns `None` when the rack removes nothing,
/// since such a visit can always be dropped from a sequence.
pub fn transition(
    state: &BenchState,
    rack: usize,
    theta_p: &[usize],
    instance: &Instance,
) -> Option<BenchState> {
    let rack_skus = &instance.rack(rack).skus;
    if !state.residuals.iter().any(|r| r.intersects(rack_skus)) {
        return None;
    }
    let mut residuals = state.residuals.clone();
    let mut next = state.next;
    for res in residuals.iter_mut() {
        if res.is_empty() {
            continue;
        }
        res.difference_with(rack_skus);
        while res.is_empty() && next < theta_p.len() {
            *res = instance.order(theta_p[next]).skus.difference(rack_skus);
            next += 1;
        }
    }
    Some(BenchState {
        residuals,
        next,
        stage: state.stage + 1,
    })
}

/// Filtering order: fewer unprocessed orders first, then fewer SKUs left on
/// the bench, then earlier insertion.
pub fn rank_states(states: &[BenchState], theta_len: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..states.len()).collect();
    let keys: Vec<(usize, usize)> = states
        .iter()
        .map(|s| (theta_len.saturating_sub(s.next), s.remaining_skus()))
        .collect();
    idx.sort_by_key(|&i| keys[i]);
    idx
}

/// One station's sequencing problem, compiled to a station-local SKU universe.
///
/// Only SKUs demanded by θᵖ matter, so orders and racks are projected onto
/// them; racks with identical projections are interchangeable and only the
/// lowest-indexed one is kept.
pub struct StationSearch<'a> {
    theta: &'a [usize],
    capacity: usize,
    words: usize,
    /// Flat order bitsets, `words` per order, in θᵖ order.
    orders: Vec<u64>,
    /// Flat rack bitsets, `words` per rack.
    racks: Vec<u64>,
    rack_ids: Vec<usize>,
    /// `suffix[k]` = demand of θᵖ[k..], `words` per entry.
    suffix: Vec<u64>,
    max_rack: usize,
    stage_cap: usize,
}

#[derive(Clone, Copy)]
struct Node {
    parent: u32,
    rack: u32,
    next: u32,
}

#[derive(Clone, Copy)]
struct Candidate {
    parent: u32,
    rack: u32,
    next: u32,
    unprocessed: u32,
    remaining: u32,
}

impl<'a> StationSearch<'a> {
    pub fn new(theta_p: &'a [usize], instance: &Instance) -> Result<Self> {
        if let Some(&o) = theta_p.iter().find(|&&o| o >= instance.order_count()) {
            return Err(Error::InvalidInput(format!("unknown order index {o}")));
        }
        if let Some(sku) = instance.first_uncoverable(theta_p) {
            return Err(Error::UncoverableSku { sku });
        }
        let demand = instance.demand_of(theta_p);
        let local: Vec<usize> = demand.to_vec();
        let mut map = vec![usize::MAX; instance.sku_count()];
        for (i, &g) in local.iter().enumerate() {
            map[g] = i;
        }
        let words = local.len().div_ceil(64).max(1);
        let project = |set: &SkuSet, out: &mut Vec<u64>| {
            let start = out.len();
            out.resize(start + words, 0);
            for g in set.iter() {
                let l = map[g];
                if l != usize::MAX {
                    out[start + l / 64] |= 1 << (l % 64);
                }
            }
        };

        let mut orders = Vec::with_capacity(theta_p.len() * words);
        for &o in theta_p {
            project(&instance.order(o).skus, &mut orders);
        }

        let mut racks = Vec::new();
        let mut rack_ids = Vec::new();
        let mut seen: FxHashSet<Vec<u64>> = FxHashSet::default();
        let mut max_rack = 1;
        for (r, rack) in instance.racks().iter().enumerate() {
            let mut proj = Vec::with_capacity(words);
            project(&rack.skus, &mut proj);
            if proj.iter().all(|&w| w == 0) || !seen.insert(proj.clone()) {
                continue;
            }
            max_rack = max_rack.max(popcount(&proj));
            racks.extend_from_slice(&proj);
            rack_ids.push(r);
        }

        let mut suffix = vec![0u64; (theta_p.len() + 1) * words];
        for k in (0..theta_p.len()).rev() {
            for w in 0..words {
                suffix[k * words + w] = suffix[(k + 1) * words + w] | orders[k * words + w];
            }
        }

        Ok(StationSearch {
            theta: theta_p,
            capacity: instance.capacity().max(1),
            words,
            orders,
            racks,
            rack_ids,
            suffix,
            max_rack,
            stage_cap: station_slot_bound(instance, theta_p.len()).max(1),
        })
    }

    fn stride(&self) -> usize {
        self.capacity * self.words
    }

    /// Best possible result for this station; no search can beat it.
    pub fn root_lower_bound(&self) -> usize {
        if self.theta.is_empty() {
            return 0;
        }
        popcount(&self.suffix[..self.words]).div_ceil(self.max_rack)
    }

    fn initial(&self) -> (Vec<u64>, usize) {
        let stride = self.stride();
        let mut res = vec![0u64; stride];
        let loaded = self.capacity.min(self.theta.len());
        res[..loaded * self.words].copy_from_slice(&self.orders[..loaded * self.words]);
        canonicalize(&mut res, self.words);
        (res, loaded)
    }

    /// Applies local rack `r` to `src`, writing the successor into `dst`
    /// (positions not canonicalized) and the union of its residuals into
    /// `union`. Returns the new `next`. The caller guarantees the rack is useful.
    #[inline(always)]
    fn apply<const W: usize>(&self, src: &[u64], next: usize, r: usize, dst: &mut [u64], union: &mut [u64]) -> usize {
        let w = self.width::<W>();
        let rack = &self.racks[r * w..(r + 1) * w];
        let mut next = next;
        union.fill(0);
        for slot in 0..self.capacity {
            let cell = &mut dst[slot * w..(slot + 1) * w];
            let src_cell = &src[slot * w..(slot + 1) * w];
            if src_cell.iter().all(|&x| x == 0) {
                cell.fill(0);
                continue;
            }
            let mut empty = true;
            for i in 0..w {
                cell[i] = src_cell[i] & !rack[i];
                empty &= cell[i] == 0;
            }
            while empty && next < self.theta.len() {
                let order = &self.orders[next * w..(next + 1) * w];
                empty = true;
                for i in 0..w {
                    cell[i] = order[i] & !rack[i];
                    empty &= cell[i] == 0;
                }
                next += 1;
            }
            for i in 0..w {
                union[i] |= cell[i];
            }
        }
        next
    }

    /// Lower bound on visits still needed from a state whose residual union
    /// is `union` with `next` orders loaded: every outstanding SKU needs a
    /// visit and no rack covers more than `max_rack` of them.
    #[inline(always)]
    fn bound_from_union<const W: usize>(&self, union: &[u64], next: usize) -> usize {
        let w = self.width::<W>();
        let count: usize = (0..w)
            .map(|i| (union[i] | self.suffix[next * w + i]).count_ones() as usize)
            .sum();
        count.div_ceil(self.max_rack)
    }

    /// One beam search run. Returns a rack sequence (global rack indices)
    /// strictly shorter than `upper_bound`, or `None` if the beam found none.
    pub fn beam(&self, width: BeamWidth, upper_bound: Option<usize>) -> Result<Option<Vec<usize>>> {
        match self.words {
            1 => self.beam_words::<1>(width, upper_bound),
            2 => self.beam_words::<2>(width, upper_bound),
            3 => self.beam_words::<3>(width, upper_bound),
            4 => self.beam_words::<4>(width, upper_bound),
            _ => self.beam_words::<0>(width, upper_bound),
        }
    }

    /// Word count known at compile time for `W > 0`, read at run time for 0.
    #[inline(always)]
    fn width<const W: usize>(&self) -> usize {
        if W == 0 {
            self.words
        } else {
            W
        }
    }

    fn beam_words<const W: usize>(&self, width: BeamWidth, upper_bound: Option<usize>) -> Result<Option<Vec<usize>>> {
        if self.theta.is_empty() {
            return Ok((upper_bound != Some(0)).then(Vec::new));
        }
        let ub = upper_bound.unwrap_or(usize::MAX);
        let limit = width.limit();
        let stride = self.stride();
        let w = self.width::<W>();
        let n_racks = self.rack_ids.len();

        let (root, root_next) = self.initial();
        let mut nodes = vec![Node {
            parent: u32::MAX,
            rack: u32::MAX,
            next: root_next as u32,
        }];
        let mut store = root.clone();
        let mut visited: FxHashSet<Box<[u64]>> = FxHashSet::default();
        visited.insert(state_key(&root, root_next));
        let mut layer: Vec<u32> = vec![0];

        let mut cand_res: Vec<u64> = Vec::new();
        let mut cands: Vec<Candidate> = Vec::new();
        let mut order: Vec<u32> = Vec::new();
        let mut union = vec![0u64; w];
        let mut child_union = vec![0u64; w];
        let mut child = vec![0u64; stride];

        let mut stage = 0usize;
        loop {
            if stage + 1 >= ub {
                return Ok(None);
            }
            if stage >= self.stage_cap {
                return Err(Error::StageBoundExceeded {
                    bound: self.stage_cap,
                });
            }
            cand_res.clear();
            cands.clear();
            for &id in &layer {
                let node = nodes[id as usize];
                let res = &store[id as usize * stride..(id as usize + 1) * stride];
                union.fill(0);
                for slot in 0..self.capacity {
                    for i in 0..w {
                        union[i] |= res[slot * w + i];
                    }
                }
                for r in 0..n_racks {
                    let rack = &self.racks[r * w..(r + 1) * w];
                    if !union.iter().zip(rack).any(|(a, b)| a & b != 0) {
                        continue;
                    }
                    let next = self.apply::<W>(res, node.next as usize, r, &mut child, &mut child_union);
                    if next == self.theta.len() && child_union.iter().all(|&x| x == 0) {
                        let mut path = vec![self.rack_ids[r]];
                        let mut at = id;
                        while at != 0 {
                            let n = nodes[at as usize];
                            path.push(self.rack_ids[n.rack as usize]);
                            at = n.parent;
                        }
                        path.reverse();
                        return Ok(Some(path));
                    }
                    if stage + 1 + self.bound_from_union::<W>(&child_union, next) >= ub {
                        continue;
                    }
                    let remaining = child_union.iter().map(|x| x.count_ones()).sum();
                    cands.push(Candidate {
                        parent: id,
                        rack: r as u32,
                        next: next as u32,
                        unprocessed: (self.theta.len() - next) as u32,
                        remaining,
                    });
                    cand_res.extend_from_slice(&child);
                }
            }
            if cands.is_empty() {
                return Ok(None);
            }

            order.clear();
            order.extend(0..cands.len() as u32);
            let cmp = |a: &u32, b: &u32| rank_cmp(&cands[*a as usize], &cands[*b as usize], *a, *b);
            // Rank only a prefix; duplicates may force ranking the rest later.
            let mut ranked = cands.len();
            if limit < cands.len() {
                ranked = limit.saturating_mul(2).min(cands.len());
                if ranked < cands.len() {
                    order.select_nth_unstable_by(ranked - 1, cmp);
                }
                order[..ranked].sort_unstable_by(cmp);
            }

            layer.clear();
            let mut pos = 0;
            while pos < order.len() && layer.len() < limit {
                if pos == ranked {
                    order[ranked..].sort_unstable_by(cmp);
                    ranked = order.len();
                }
                let ci = order[pos];
                pos += 1;
                let c = cands[ci as usize];
                child.copy_from_slice(&cand_res[ci as usize * stride..(ci as usize + 1) * stride]);
                canonicalize(&mut child, w);
                let res = &child[..];
                if !visited.insert(state_key(res, c.next as usize)) {
                    continue;
                }
                let id = nodes.len() as u32;
                nodes.push(Node {
                    parent: c.parent,
                    rack: c.rack,
                    next: c.next,
                });
                store.extend_from_slice(res);
                layer.push(id);
            }
            if layer.is_empty() {
                return Ok(None);
            }
            stage += 1;
        }
    }

    /// Runs the beam ladder, each run bounded by the best sequence so far.
    pub fn iterated(&self, gamma: &[BeamWidth]) -> Result<Vec<usize>> {
        let floor = self.root_lower_bound();
        let mut best: Option<Vec<usize>> = None;
        for &width in gamma {
            let ub = best.as_ref().map(Vec::len);
            if ub.is_some_and(|u| u <= floor) {
                break;
            }
            if let Some(seq) = self.beam(width, ub)? {
                best = Some(seq);
            }
        }
        match best {
            Some(seq) => Ok(seq),
            // Only reachable with an empty ladder; fall back to a greedy single beam.
            None => Ok(self.beam(BeamWidth::Limited(1), None)?.unwrap_or_default()),
        }
    }
}

fn rank_cmp(a: &Candidate, b: &Candidate, ia: u32, ib: u32) -> Ordering {
    (a.unprocessed, a.remaining, ia).cmp(&(b.unprocessed, b.remaining, ib))
}

fn popcount(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

/// Sorts bench positions so equal multisets of residuals share one layout.
fn canonicalize(res: &mut [u64], w: usize) {
    match w {
        1 => res.sort_unstable_by(|a, b| b.cmp(a)),
        2 => sort_slots::<2>(res),
        3 => sort_slots::<3>(res),
        4 => sort_slots::<4>(res),
        _ => {
            let slots = res.len() / w;
            for i in 1..slots {
                let mut j = i;
                while j > 0 && res[(j - 1) * w..j * w] < res[j * w..(j + 1) * w] {
                    for k in 0..w {
                        res.swap((j - 1) * w + k, j * w + k);
                    }
                    j -= 1;
                }
            }
        }
    }
}

fn sort_slots<const W: usize>(res: &mut [u64]) {
    let (slots, rest) = res.as_chunks_mut::<W>();
    debug_assert!(rest.is_empty());
    slots.sort_unstable_by(|a, b| b.cmp(a));
}

fn state_key(res: &[u64], next: usize) -> Box<[u64]> {
    let mut key = Vec::with_capacity(res.len() + 1);
    key.extend_from_slice(res);
    key.push(next as u64);
    key.into_boxed_slice()
}

/// Beam search over the station DP. See [`StationSearch::beam`].
pub fn beam_search(
    theta_p: &[usize],
    instance: &Instance,
    width: BeamWidth,
    upper_bound: Option<usize>,
) -> Result<Option<Vec<usize>>> {
    StationSearch::new(theta_p, instance)?.beam(width, upper_bound)
}

/// Iterated beam search over an ascending width ladder.
pub fn iterated_beam_search(
    theta_p: &[usize],
    instance: &Instance,
    gamma: &[BeamWidth],
) -> Result<Vec<usize>> {
    StationSearch::new(theta_p, instance)?.iterated(gamma)
}

/// Exact minimum rack sequence for a fixed order sequence.
pub fn exact_sequence(theta_p: &[usize], instance: &Instance) -> Result<Vec<usize>> {
    Ok(beam_search(theta_p, instance, BeamWidth::Unbounded, None)?.unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::simulate_station;

    // SKUs A=0, B=1, C=2
    fn abc() -> Instance {
        Instance::new(3, vec![vec![0], vec![1], vec![2]], vec![vec![0, 1], vec![2]], 1, 2).unwrap()
    }

    fn set(ids: &[usize]) -> SkuSet {
        SkuSet::from_ids(3, ids.iter().copied())
    }

    #[test]
    fn initial_state_loads_bench() {
        let inst = abc();
        let s = initial_state(&[0, 1, 2], &inst);
        assert_eq!(s.residuals, vec![set(&[0]), set(&[1])]);
        assert_eq!(s.psi(), 3);
        assert_eq!(s.stage, 0);

        let roomy = inst.clone();
        let roomy = Instance::new(3, vec![vec![0]], roomy.to_file().racks, 1, 3).unwrap();
        let s = initial_state(&[0], &roomy);
        assert_eq!(s.residuals, vec![set(&[0]), set(&[]), set(&[])]);
        assert_eq!(s.psi(), 2);
    }

    #[test]
    fn transition_examples() {
        let inst = abc();
        let s = initial_state(&[0, 1, 2], &inst);
        let t = transition(&s, 0, &[0, 1, 2], &inst).unwrap();
        let mut res = t.residuals.clone();
        res.sort();
        assert_eq!(res, vec![set(&[]), set(&[2])]);
        assert_eq!(t.psi(), 4);
        assert_eq!(t.stage, 1);

        // useless rack
        let one = Instance::new(2, vec![vec![0]], vec![vec![1], vec![0]], 1, 1).unwrap();
        let s = initial_state(&[0], &one);
        assert!(transition(&s, 0, &[0], &one).is_none());

        // partial coverage keeps ψ
        let ab = Instance::new(2, vec![vec![0, 1]], vec![vec![0]], 1, 1).unwrap();
        let s = initial_state(&[0], &ab);
        let t = transition(&s, 0, &[0], &ab).unwrap();
        assert_eq!(t.residuals, vec![SkuSet::from_ids(2, [1])]);
        assert_eq!(t.psi(), s.psi());
        assert_eq!(t.stage, 1);
    }

    #[test]
    fn rank_states_examples() {
        let mk = |next, res: &[&[usize]]| BenchState {
            residuals: res.iter().map(|r| SkuSet::from_ids(8, r.iter().copied())).collect(),
            next,
            stage: 1,
        };
        // ψ = 5 beats ψ = 3
        let s = [mk(2, &[&[0]]), mk(4, &[&[0, 1, 2]])];
        assert_eq!(rank_states(&s, 6), vec![1, 0]);
        // equal ψ: fewer remaining SKUs first
        let s = [mk(3, &[&[0, 1], &[2, 3]]), mk(3, &[&[0], &[0, 1]])];
        assert_eq!(rank_states(&s, 6), vec![1, 0]);
        // full tie keeps insertion order
        let s = [mk(3, &[&[0]]), mk(3, &[&[1]]), mk(3, &[&[2]])];
        assert_eq!(rank_states(&s, 6), vec![0, 1, 2]);
    }

    #[test]
    fn beam_search_examples() {
        let inst = abc();
        let seq = beam_search(&[0, 1, 2], &inst, BeamWidth::Unbounded, None)
            .unwrap()
            .unwrap();
        assert_eq!(seq.len(), 2);
        simulate_station(&inst, &[0, 1, 2], &seq).unwrap();

        let single = Instance::new(1, vec![vec![0]], vec![vec![0]], 1, 1).unwrap();
        assert_eq!(exact_sequence(&[0], &single).unwrap(), vec![0]);
    }

    #[test]
    fn upper_bound_is_strict() {
        let inst = abc();
        assert!(beam_search(&[0, 1, 2], &inst, BeamWidth::Unbounded, Some(2))
            .unwrap()
            .is_none());
        assert!(beam_search(&[0, 1, 2], &inst, BeamWidth::Unbounded, Some(3))
            .unwrap()
            .is_some());
    }

    #[test]
    fn uncoverable_sku_is_infeasible() {
        let inst = Instance::new(2, vec![vec![0], vec![1]], vec![vec![0]], 1, 1).unwrap();
        let err = beam_search(&[0, 1], &inst, BeamWidth::Limited(1), None).unwrap_err();
        assert!(matches!(err, Error::UncoverableSku { sku: 1 }));
        assert!(iterated_beam_search(&[0, 1], &inst, &BeamWidth::default_ladder()).is_err());
    }

    #[test]
    fn empty_station_needs_no_racks() {
        let inst = abc();
        assert_eq!(iterated_beam_search(&[], &inst, &BeamWidth::default_ladder()).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn width_parsing() {
        assert_eq!(
            parse_ladder("1,4,inf").unwrap(),
            vec![BeamWidth::Limited(1), BeamWidth::Limited(4), BeamWidth::Unbounded]
        );
        assert!(parse_ladder("0").is_err());
        assert!(BeamWidth::Limited(1000) < BeamWidth::Unbounded);
    }

    #[test]
    fn canonical_layout_sorts_slots() {
        let mut a = vec![1, 0, 5, 0, 3, 0];
        let mut b = vec![5, 0, 3, 0, 1, 0];
        canonicalize(&mut a, 2);
        canonicalize(&mut b, 2);
        assert_eq!(a, b);
    }
}
