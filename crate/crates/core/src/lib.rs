//! Joint order assignment and picking-station scheduling for KIVA-style
//! warehouses: a simulated-annealing matheuristic with beam-search station
//! evaluation, rack-selection initialisation, baselines, a brute-force oracle
//! and an experiment harness.

pub mod baselines;
pub mod bench;
pub mod error;
pub mod eval;
pub mod model;
pub mod oracle;
pub mod rsp;
pub mod sa;
pub mod sku;
pub mod station;

pub use baselines::{rb_solve, roa_solve};
pub use bench::{generate_instance, run_experiment, GenParams, Method, ResultRow};
pub use error::{Error, Result};
pub use eval::{check_solution_feasibility, evaluate_fitness, simulate_station, ConstraintId, FeasibilityReport};
pub use model::{Instance, OrderSchedule, RackSchedule, Solution, SolverParams};
pub use oracle::{brute_force_solve, exact_station_optimum, OracleLimits};
pub use rsp::{RspMode, RspOptions};
pub use sa::{sa_solve, SaOutcome, SaStats};
pub use sku::{SkuId, SkuSet};
pub use station::{iterated_beam_search, BeamWidth};
