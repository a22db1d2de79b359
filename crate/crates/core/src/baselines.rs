//! Comparison policies: a first-come-first-served rule and random order
//! assignment followed by station-local annealing.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{balance_counts, ensure_valid, Instance, OrderSchedule, Solution, SolverParams};
use crate::sa::{anneal, MoveScope, SaOutcome};
use crate::station::{initial_state, transition};

/// Round-robin assignment in arrival (index) order.
pub fn round_robin(n: usize, m: usize) -> OrderSchedule {
    let mut stations = vec![Vec::new(); m];
    for o in 0..n {
        stations[o % m].push(o);
    }
    OrderSchedule(stations)
}

/// Greedy rack choice for a fixed order sequence: each visit brings the rack
/// covering the most outstanding items of the active orders, lowest index on
/// ties.
pub fn greedy_racks(theta_p: &[usize], instance: &Instance) -> Result<Vec<usize>> {
    if let Some(sku) = instance.first_uncoverable(theta_p) {
        return Err(Error::UncoverableSku { sku });
    }
    let mut state = initial_state(theta_p, instance);
    let mut seq = Vec::new();
    while !state.is_terminal(theta_p.len()) {
        let (gain, rack) = instance
            .racks()
            .iter()
            .enumerate()
            .map(|(r, rack)| {
                let covered: usize = state
                    .residuals
                    .iter()
                    .map(|res| res.intersection_len(&rack.skus))
                    .sum();
                (covered, r)
            })
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
            .expect("instance has racks");
        debug_assert!(gain > 0);
        state = transition(&state, rack, theta_p, instance).expect("rack covers something");
        seq.push(rack);
    }
    Ok(seq)
}

/// Rule-based FCFS benchmark. Deterministic.
pub fn rb_solve(instance: &Instance) -> Result<Solution> {
    ensure_valid(instance)?;
    let theta = round_robin(instance.order_count(), instance.stations());
    let mu = theta
        .stations()
        .iter()
        .map(|seq| greedy_racks(seq, instance))
        .collect::<Result<Vec<_>>>()?;
    Ok(Solution {
        theta,
        mu: crate::model::RackSchedule(mu),
    })
}

/// Uniformly random balanced assignment with random per-station order.
pub fn random_assignment(instance: &Instance, rng: &mut ChaCha8Rng) -> Result<OrderSchedule> {
    let sizes = balance_counts(instance.order_count(), instance.stations())?;
    let mut tokens: Vec<usize> = (0..instance.order_count()).collect();
    tokens.shuffle(rng);
    Ok(OrderSchedule::from_tokens(&tokens, &sizes))
}

/// Random-assignment benchmark: orders never change station, only their
/// sequence within it is annealed.
pub fn roa_solve(instance: &Instance, params: &SolverParams) -> Result<SaOutcome> {
    let started = Instant::now();
    ensure_valid(instance)?;
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let theta0 = random_assignment(instance, &mut rng)?;
    anneal(instance, &theta0, params, MoveScope::WithinStation, &mut rng, started)
}
