//! Simulated annealing over order schedules.
//!
//! The search state is θ flattened into one token list with fixed station
//! segment sizes; moves permute tokens and the list is re-split by the same
//! sizes, so workloads stay balanced while orders migrate between stations.
//! Each candidate θ′ is scored by running the iterated beam search on the
//! stations whose segments changed.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::model::{ensure_valid, Instance, OrderSchedule, RackSchedule, Solution, SolverParams};
use crate::rsp::{rsp, theta_from_rsp};
use crate::station::{BeamWidth, StationSearch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    /// Exchange two tokens.
    Swap,
    /// Move a block of tokens to just after a later position.
    Shift,
    /// Reverse a range of tokens.
    Inversion,
}

impl Operator {
    pub const ALL: [Operator; 3] = [Operator::Swap, Operator::Shift, Operator::Inversion];
}

/// How the epoch-local fitness extremes feeding the epoch-length update are
/// collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremaRule {
    /// Minimum and maximum over every fitness seen in the epoch, including
    /// the solution the epoch started from.
    AllObserved,
    /// Minimum over improving candidates, maximum over the rest.
    BranchSplit,
}

/// Whether moves may cross station boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveScope {
    AcrossStations,
    /// Both ends of every move fall inside one uniformly chosen station.
    WithinStation,
}

/// Starting temperature: a candidate `w * f0` worse is accepted with
/// probability one half.
pub fn init_temperature(f0: f64, w: f64) -> f64 {
    -w * f0 / 0.5f64.ln()
}

/// `K + floor(K * (1 - exp((f_min - f_max) / f_max)))`; unchanged when `f_max` is zero.
pub fn epoch_length_update(k: usize, f_min: f64, f_max: f64) -> usize {
    if f_max <= 0.0 {
        return k;
    }
    let growth = (k as f64 * (1.0 - ((f_min - f_max) / f_max).exp())).floor();
    k + growth.max(0.0) as usize
}

pub fn acceptance_probability(delta_f: f64, tau: f64) -> f64 {
    if delta_f < 0.0 {
        1.0
    } else {
        (-delta_f / tau).exp()
    }
}

/// Improvements are always taken; anything else costs one uniform draw.
pub fn accept<R: Rng + ?Sized>(delta_f: f64, tau: f64, rng: &mut R) -> bool {
    if delta_f < 0.0 {
        return true;
    }
    rng.gen::<f64>() < acceptance_probability(delta_f, tau)
}

pub fn swap_positions(tokens: &mut [usize], i: usize, j: usize) {
    tokens.swap(i, j);
}

/// Moves `tokens[a..=b]` to just after position `c` (`a <= b < c`).
pub fn shift_block(tokens: &mut [usize], a: usize, b: usize, c: usize) {
    debug_assert!(a <= b && b < c && c < tokens.len());
    tokens[a..=c].rotate_left(b - a + 1);
}

/// Reverses `tokens[a..=b]`.
pub fn invert_range(tokens: &mut [usize], a: usize, b: usize) {
    tokens[a..=b].reverse();
}

/// Applies a random move of type `op` inside `tokens[lo..hi]` and returns the
/// touched position range, or `None` if the window is too small.
fn random_move<R: Rng + ?Sized>(
    tokens: &mut [usize],
    lo: usize,
    hi: usize,
    op: Operator,
    rng: &mut R,
) -> Option<(usize, usize)> {
    let len = hi - lo;
    if len < 2 {
        return None;
    }
    match op {
        Operator::Swap => {
            let picks = rand::seq::index::sample(rng, len, 2);
            let (i, j) = (lo + picks.index(0), lo + picks.index(1));
            swap_positions(tokens, i, j);
            Some((i.min(j), i.max(j)))
        }
        Operator::Inversion => {
            let picks = rand::seq::index::sample(rng, len, 2);
            let (a, b) = (lo + picks.index(0), lo + picks.index(1));
            let (a, b) = (a.min(b), a.max(b));
            invert_range(tokens, a, b);
            Some((a, b))
        }
        Operator::Shift => {
            // 3-subsets of 0..=len map one-to-one onto triples a <= b < c.
            let mut picks = rand::seq::index::sample(rng, len + 1, 3).into_vec();
            picks.sort_unstable();
            let (a, b, c) = (lo + picks[0], lo + picks[1] - 1, lo + picks[2] - 1);
            shift_block(tokens, a, b, c);
            Some((a, c))
        }
    }
}

fn apply_move<R: Rng + ?Sized>(
    tokens: &mut [usize],
    offsets: &[usize],
    op: Operator,
    scope: MoveScope,
    rng: &mut R,
) -> Option<(usize, usize)> {
    match scope {
        MoveScope::AcrossStations => random_move(tokens, 0, tokens.len(), op, rng),
        MoveScope::WithinStation => {
            let eligible: Vec<usize> = (0..offsets.len() - 1)
                .filter(|&p| offsets[p + 1] - offsets[p] >= 2)
                .collect();
            let &p = eligible.choose(rng)?;
            random_move(tokens, offsets[p], offsets[p + 1], op, rng)
        }
    }
}

fn flat_move<R: Rng + ?Sized>(theta: &OrderSchedule, op: Operator, rng: &mut R) -> OrderSchedule {
    let sizes = theta.segment_sizes();
    let mut tokens = theta.flatten();
    let len = tokens.len();
    random_move(&mut tokens, 0, len, op, rng);
    OrderSchedule::from_tokens(&tokens, &sizes)
}

/// Swap two random tokens of the flattened schedule.
pub fn neighbor_swap<R: Rng + ?Sized>(theta: &OrderSchedule, rng: &mut R) -> OrderSchedule {
    flat_move(theta, Operator::Swap, rng)
}

/// Relocate a random block of the flattened schedule.
pub fn neighbor_shift<R: Rng + ?Sized>(theta: &OrderSchedule, rng: &mut R) -> OrderSchedule {
    flat_move(theta, Operator::Shift, rng)
}

/// Reverse a random range of the flattened schedule.
pub fn neighbor_inversion<R: Rng + ?Sized>(theta: &OrderSchedule, rng: &mut R) -> OrderSchedule {
    flat_move(theta, Operator::Inversion, rng)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SaStats {
    pub iterations: usize,
    pub epochs: usize,
    pub initial_tau: f64,
    pub final_tau: f64,
    pub initial_fitness: usize,
    pub best_fitness: usize,
    pub accepted: usize,
    pub wall_seconds: f64,
    /// Incumbent fitness after each iteration.
    pub best_trace: Vec<usize>,
    pub final_epoch_length: usize,
}

#[derive(Debug, Clone)]
pub struct SaOutcome {
    pub solution: Solution,
    pub initial: Solution,
    pub stats: SaStats,
}

/// Memoised station evaluator.
struct Evaluator<'a> {
    instance: &'a Instance,
    gamma: &'a [BeamWidth],
    cache: FxHashMap<Vec<usize>, Vec<usize>>,
}

const CACHE_LIMIT: usize = 50_000;

impl<'a> Evaluator<'a> {
    fn station(&mut self, seq: &[usize]) -> Result<Vec<usize>> {
        if let Some(mu) = self.cache.get(seq) {
            return Ok(mu.clone());
        }
        let mu = StationSearch::new(seq, self.instance)?.iterated(self.gamma)?;
        if self.cache.len() >= CACHE_LIMIT {
            self.cache.clear();
        }
        self.cache.insert(seq.to_vec(), mu.clone());
        Ok(mu)
    }
}

struct Extrema {
    rule: ExtremaRule,
    lo: Option<f64>,
    hi: Option<f64>,
    start: f64,
}

impl Extrema {
    fn new(rule: ExtremaRule, start: f64) -> Self {
        let seed = matches!(rule, ExtremaRule::AllObserved).then_some(start);
        Extrema {
            rule,
            lo: seed,
            hi: seed,
            start,
        }
    }

    fn observe(&mut self, candidate: f64, improved: bool) {
        let lo = |v: &mut Option<f64>| *v = Some(v.map_or(candidate, |x: f64| x.min(candidate)));
        let hi = |v: &mut Option<f64>| *v = Some(v.map_or(candidate, |x: f64| x.max(candidate)));
        match self.rule {
            ExtremaRule::AllObserved => {
                lo(&mut self.lo);
                hi(&mut self.hi);
            }
            ExtremaRule::BranchSplit if improved => lo(&mut self.lo),
            ExtremaRule::BranchSplit => hi(&mut self.hi),
        }
    }

    fn bounds(&self) -> (f64, f64) {
        let lo = self.lo.unwrap_or(self.start);
        let hi = self.hi.unwrap_or(self.start);
        (lo.min(hi), hi)
    }
}

/// Runs the annealing loop from `theta0`.
pub fn anneal(
    instance: &Instance,
    theta0: &OrderSchedule,
    params: &SolverParams,
    scope: MoveScope,
    rng: &mut ChaCha8Rng,
    started: Instant,
) -> Result<SaOutcome> {
    params.validate()?;
    theta0.validate(instance.order_count(), instance.stations())?;
    let sizes = theta0.segment_sizes();
    let mut offsets = vec![0];
    for s in &sizes {
        offsets.push(offsets.last().unwrap() + s);
    }
    let station_of = |pos: usize| offsets.partition_point(|&o| o <= pos) - 1;
    let timed_out = || {
        params
            .time_limit_seconds
            .is_some_and(|lim| started.elapsed().as_secs_f64() >= lim)
    };

    let mut eval = Evaluator {
        instance,
        gamma: &params.gamma,
        cache: FxHashMap::default(),
    };
    let mut tokens = theta0.flatten();
    let mut mus: Vec<Vec<usize>> = (0..sizes.len())
        .map(|p| eval.station(&tokens[offsets[p]..offsets[p + 1]]))
        .collect::<Result<_>>()?;
    let mut fitness: usize = mus.iter().map(Vec::len).sum();

    let initial = Solution {
        theta: theta0.clone(),
        mu: RackSchedule(mus.clone()),
    };
    let mut best_tokens = tokens.clone();
    let mut best_mus = mus.clone();
    let mut best_fitness = fitness;

    let tau0 = init_temperature(fitness as f64, params.w);
    let mut stats = SaStats {
        initial_tau: tau0,
        final_tau: tau0,
        initial_fitness: fitness,
        best_fitness: fitness,
        final_epoch_length: params.k0,
        ..Default::default()
    };

    if fitness > 0 && !params.operators.is_empty() {
        let mut tau = tau0;
        let mut k = params.k0;
        let mut cand = tokens.clone();
        'search: loop {
            if stats.iterations >= params.max_iterations || tau < params.tau_floor || timed_out() {
                break;
            }
            let mut extrema = Extrema::new(params.extrema, fitness as f64);
            for _ in 0..k {
                if stats.iterations >= params.max_iterations || timed_out() {
                    break 'search;
                }
                stats.iterations += 1;
                let op = *params.operators.choose(rng).expect("nonempty");
                cand.copy_from_slice(&tokens);
                let Some((lo, hi)) = apply_move(&mut cand, &offsets, op, scope, rng) else {
                    stats.best_trace.push(best_fitness);
                    continue;
                };
                let mut changed: Vec<(usize, Vec<usize>)> = Vec::new();
                for p in station_of(lo)..=station_of(hi) {
                    let seg = offsets[p]..offsets[p + 1];
                    if cand[seg.clone()] != tokens[seg.clone()] {
                        changed.push((p, eval.station(&cand[seg])?));
                    }
                }
                let cand_fitness = changed
                    .iter()
                    .fold(fitness, |f, (p, mu)| f - mus[*p].len() + mu.len());
                let delta = cand_fitness as f64 - fitness as f64;
                let improved = delta < 0.0;
                extrema.observe(cand_fitness as f64, improved);
                if accept(delta, tau, rng) {
                    stats.accepted += 1;
                    std::mem::swap(&mut tokens, &mut cand);
                    for (p, mu) in changed {
                        mus[p] = mu;
                    }
                    fitness = cand_fitness;
                    if fitness < best_fitness {
                        best_fitness = fitness;
                        best_tokens.copy_from_slice(&tokens);
                        best_mus.clone_from(&mus);
                    }
                }
                stats.best_trace.push(best_fitness);
            }
            stats.epochs += 1;
            let (f_min, f_max) = extrema.bounds();
            k = epoch_length_update(k, f_min, f_max);
            tau = tau0 * params.alpha.powi(stats.epochs as i32);
        }
        stats.final_tau = tau;
        stats.final_epoch_length = k;
    }

    stats.best_fitness = best_fitness;
    stats.wall_seconds = started.elapsed().as_secs_f64();
    Ok(SaOutcome {
        solution: Solution {
            theta: OrderSchedule::from_tokens(&best_tokens, &sizes),
            mu: RackSchedule(best_mus),
        },
        initial,
        stats,
    })
}

/// The full method: rack selection for θ₀, then annealing with moves that
/// may cross stations.
pub fn sa_solve(instance: &Instance, params: &SolverParams) -> Result<SaOutcome> {
    let started = Instant::now();
    ensure_valid(instance)?;
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let assignment = rsp(instance, &params.rsp)?;
    let theta0 = theta_from_rsp(&assignment, &mut rng);
    anneal(instance, &theta0, params, MoveScope::AcrossStations, &mut rng, started)
}

/// Best of `restarts` independent runs seeded `rng_seed, rng_seed + 1, ...`.
pub fn sa_solve_restarts(instance: &Instance, params: &SolverParams, restarts: usize) -> Result<SaOutcome> {
    if restarts == 0 {
        return Err(Error::InvalidParams("at least one restart is required".into()));
    }
    let mut best: Option<SaOutcome> = None;
    for i in 0..restarts {
        let mut p = params.clone();
        p.rng_seed = params.rng_seed.wrapping_add(i as u64);
        let out = sa_solve(instance, &p)?;
        if best
            .as_ref()
            .is_none_or(|b| out.stats.best_fitness < b.stats.best_fitness)
        {
            best = Some(out);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn temperature_examples() {
        let tau = init_temperature(100.0, 0.05);
        assert!((tau - 5.0 / std::f64::consts::LN_2).abs() < 1e-12);
        assert!((tau - 7.2135).abs() < 1e-4);
        assert!((acceptance_probability(0.05 * 100.0, tau) - 0.5).abs() < 1e-12);
        assert!((init_temperature(200.0, 0.05) - 2.0 * tau).abs() < 1e-12);
    }

    #[test]
    fn epoch_length_examples() {
        assert_eq!(epoch_length_update(10, 70.0, 70.0), 10);
        assert_eq!(epoch_length_update(10, 50.0, 100.0), 13);
        assert_eq!(epoch_length_update(20, 0.0, 80.0), 32);
        assert_eq!(epoch_length_update(10, 0.0, 0.0), 10);
    }

    #[test]
    fn acceptance_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(accept(-1.0, 0.5, &mut rng));
        assert_eq!(acceptance_probability(0.0, 3.0), 1.0);
        assert!((acceptance_probability(2.0, 2.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn operator_examples() {
        let mut t = vec![5, 2, 4, 1, 3];
        swap_positions(&mut t, 1, 4);
        assert_eq!(t, vec![5, 3, 4, 1, 2]);

        let mut t = vec![1, 2, 3, 4, 5];
        shift_block(&mut t, 0, 1, 3);
        assert_eq!(t, vec![3, 4, 1, 2, 5]);

        let mut t = vec![1, 2, 3, 4, 5];
        shift_block(&mut t, 1, 1, 3);
        assert_eq!(t, vec![1, 3, 4, 2, 5]);

        let mut t = vec![1, 2, 3, 4, 5];
        invert_range(&mut t, 1, 3);
        assert_eq!(t, vec![1, 4, 3, 2, 5]);

        let mut t = vec![1, 2, 3, 4, 5];
        invert_range(&mut t, 2, 3);
        assert_eq!(t, vec![1, 2, 4, 3, 5]);

        let mut t = vec![1, 2, 3, 4, 5];
        invert_range(&mut t, 0, 4);
        invert_range(&mut t, 0, 4);
        assert_eq!(t, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn within_station_moves_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let offsets = [0, 3, 6];
        for _ in 0..500 {
            for op in Operator::ALL {
                let mut t: Vec<usize> = (0..6).collect();
                apply_move(&mut t, &offsets, op, MoveScope::WithinStation, &mut rng);
                let mut a = t[..3].to_vec();
                a.sort_unstable();
                assert_eq!(a, vec![0, 1, 2]);
            }
        }
    }

    #[test]
    fn tiny_window_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = vec![0, 1];
        assert!(apply_move(&mut t, &[0, 1, 2], Operator::Swap, MoveScope::WithinStation, &mut rng).is_none());
    }

    proptest! {
        #[test]
        fn neighbors_preserve_tokens_and_sizes(seed in any::<u64>(), sizes in proptest::collection::vec(1usize..5, 1..4)) {
            let n: usize = sizes.iter().sum();
            prop_assume!(n >= 3);
            let tokens: Vec<usize> = (0..n).rev().collect();
            let theta = OrderSchedule::from_tokens(&tokens, &sizes);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for next in [
                neighbor_swap(&theta, &mut rng),
                neighbor_shift(&theta, &mut rng),
                neighbor_inversion(&theta, &mut rng),
            ] {
                prop_assert_eq!(next.segment_sizes(), sizes.clone());
                let mut flat = next.flatten();
                flat.sort_unstable();
                prop_assert_eq!(flat, (0..n).collect::<Vec<_>>());
            }
        }

        #[test]
        fn epoch_length_never_shrinks(k in 1usize..500, lo in 0.0f64..100.0, spread in 0.0f64..100.0) {
            prop_assert!(epoch_length_update(k, lo, lo + spread) >= k);
        }
    }
}
