//! Instance generation, comparison metrics and experiment grids.

use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample_weighted;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{rb_solve, roa_solve};
use crate::error::{Error, Result};
use crate::model::{Instance, Solution, SolverParams};
use crate::oracle::{brute_force_solve, OracleLimits};
use crate::sa::sa_solve;

fn default_min_order() -> usize {
    1
}

fn default_max_order() -> usize {
    2
}

fn default_skew() -> f64 {
    0.5
}

/// Knobs of the random instance generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: usize,
    pub m: usize,
    pub capacity: usize,
    /// SKUs per rack.
    pub beta: usize,
    /// Rack count; derived from demand when absent.
    #[serde(default)]
    pub racks: Option<usize>,
    pub skus: usize,
    #[serde(default = "default_min_order")]
    pub min_order_size: usize,
    #[serde(default = "default_max_order")]
    pub max_order_size: usize,
    #[serde(default = "default_skew")]
    pub skew: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GenParams {
    pub fn new(n: usize, m: usize, capacity: usize, beta: usize, skus: usize) -> Self {
        GenParams {
            n,
            m,
            capacity,
            beta,
            racks: None,
            skus,
            min_order_size: default_min_order(),
            max_order_size: default_max_order(),
            skew: default_skew(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn rack_count(&self) -> usize {
        self.racks.unwrap_or_else(|| {
            let mean = (self.min_order_size + self.max_order_size) as f64 / 2.0;
            let needed = (self.n as f64 * mean / self.beta as f64).ceil() as usize;
            (2 * self.m).max(needed * 2)
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.m == 0 || self.capacity == 0 {
            return bad("stations and capacity must be positive".into());
        }
        if self.n < self.m {
            return bad(format!("{} orders cannot fill {} stations", self.n, self.m));
        }
        if self.beta == 0 || self.beta > self.skus {
            return bad(format!("rack size {} must lie in 1..={}", self.beta, self.skus));
        }
        if self.min_order_size == 0 || self.max_order_size < self.min_order_size {
            return bad(format!(
                "order size range [{}, {}] is empty or starts at zero",
                self.min_order_size, self.max_order_size
            ));
        }
        if self.max_order_size > self.skus {
            return bad(format!("orders of {} SKUs exceed the universe", self.max_order_size));
        }
        if self.rack_count() == 0 {
            return bad("rack count must be positive".into());
        }
        if !(self.skew.is_finite() && self.skew >= 0.0) {
            return bad(format!("skew must be a finite non-negative rate, got {}", self.skew));
        }
        Ok(())
    }
}

/// Popularity weight per SKU id: exponential decay in rank, with the rank
/// rescaled to `[0, 10)` so the shape does not depend on the universe size.
pub fn sku_weights(sku_count: usize, skew: f64) -> Vec<f64> {
    (0..sku_count)
        .map(|k| (-skew * 10.0 * k as f64 / sku_count as f64).exp())
        .collect()
}

fn draw_skus(rng: &mut ChaCha8Rng, weights: &[f64], amount: usize) -> Vec<usize> {
    let mut ids = sample_weighted(rng, weights.len(), |i| weights[i], amount)
        .expect("positive weights and amount within range")
        .into_vec();
    ids.sort_unstable();
    ids
}

pub fn generate_instance(params: &GenParams) -> Result<Instance> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let weights = sku_weights(params.skus, params.skew);
    let orders: Vec<Vec<usize>> = (0..params.n)
        .map(|_| {
            let size = rng.gen_range(params.min_order_size..=params.max_order_size);
            draw_skus(&mut rng, &weights, size)
        })
        .collect();
    let mut racks: Vec<Vec<usize>> = (0..params.rack_count())
        .map(|_| draw_skus(&mut rng, &weights, params.beta))
        .collect();
    repair_coverage(&orders, &mut racks, params.skus, &mut rng)?;
    Instance::new(params.skus, orders, racks, params.m, params.capacity)
}

/// Puts every demanded but unstocked SKU on some rack, overwriting a slot
/// whose SKU stays available elsewhere (or is never demanded).
fn repair_coverage(
    orders: &[Vec<usize>],
    racks: &mut [Vec<usize>],
    sku_count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut demanded = vec![false; sku_count];
    for &s in orders.iter().flatten() {
        demanded[s] = true;
    }
    let mut stock = vec![0usize; sku_count];
    for &s in racks.iter().flatten() {
        stock[s] += 1;
    }
    for sku in 0..sku_count {
        if !demanded[sku] || stock[sku] > 0 {
            continue;
        }
        let slots: Vec<(usize, usize)> = racks
            .iter()
            .enumerate()
            .flat_map(|(r, rack)| rack.iter().enumerate().map(move |(i, &s)| (r, i, s)))
            .filter(|&(_, _, s)| !demanded[s] || stock[s] > 1)
            .map(|(r, i, _)| (r, i))
            .collect();
        if slots.is_empty() {
            return Err(Error::InvalidParams(format!(
                "too few rack slots to stock every demanded SKU (SKU {sku} left out)"
            )));
        }
        let (r, i) = slots[rng.gen_range(0..slots.len())];
        stock[racks[r][i]] -= 1;
        racks[r][i] = sku;
        stock[sku] += 1;
        racks[r].sort_unstable();
    }
    Ok(())
}

/// Relative difference of `f_a` over `f_b`, in percent.
pub fn rd_metric(f_a: f64, f_b: f64) -> Result<f64> {
    if f_b == 0.0 {
        return Err(Error::InvalidInput("relative difference against a zero reference".into()));
    }
    Ok((f_a / f_b - 1.0) * 100.0)
}

/// Orders fulfilled per rack visit.
pub fn of_metric(n: usize, sol: usize) -> Result<f64> {
    if sol == 0 {
        return Err(Error::InvalidInput("order fulfillment with zero rack visits".into()));
    }
    Ok(n as f64 / sol as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sa,
    Roa,
    Rb,
    Exact,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sa => "sa",
            Method::Roa => "roa",
            Method::Rb => "rb",
            Method::Exact => "exact",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sa" => Ok(Method::Sa),
            "roa" => Ok(Method::Roa),
            "rb" => Ok(Method::Rb),
            "exact" => Ok(Method::Exact),
            other => Err(Error::InvalidInput(format!("unknown method {other:?}"))),
        }
    }
}

/// Runs one method on an instance.
pub fn solve_with(method: Method, instance: &Instance, params: &SolverParams) -> Result<Solution> {
    match method {
        Method::Sa => sa_solve(instance, params).map(|o| o.solution),
        Method::Roa => roa_solve(instance, params).map(|o| o.solution),
        Method::Rb => rb_solve(instance),
        Method::Exact => brute_force_solve(instance, &OracleLimits::default()).map(|(s, _)| s),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "C")]
    pub capacity: usize,
    pub beta: usize,
    pub sol: Option<usize>,
    pub cpu_s: f64,
    pub rd: Option<f64>,
    pub of: Option<f64>,
    /// Why the run produced no solution. Not part of the CSV.
    #[serde(skip)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    /// Grid cells; each cell's own seed is ignored in favour of a derived one.
    pub cells: Vec<GenParams>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub time_limit_seconds: Option<f64>,
    #[serde(default)]
    pub w: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
}

fn default_repetitions() -> usize {
    10
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn solver_params(&self, seed: u64) -> SolverParams {
        let mut p = SolverParams {
            rng_seed: seed,
            time_limit_seconds: self.time_limit_seconds,
            ..Default::default()
        };
        if let Some(w) = self.w {
            p.w = w;
        }
        if let Some(alpha) = self.alpha {
            p.alpha = alpha;
        }
        p
    }
}

/// Per-run seed from the master seed and grid coordinates (splitmix64 mixing).
pub fn run_seed(master: u64, cell: usize, repetition: usize) -> u64 {
    let mut z = master
        ^ (cell as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (repetition as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    if config.methods.is_empty() {
        return Err(Error::InvalidParams("no methods requested".into()));
    }
    let mut rows = Vec::new();
    for (c, cell) in config.cells.iter().enumerate() {
        cell.validate()?;
        for rep in 0..config.repetitions {
            let seed = run_seed(config.master_seed, c, rep);
            rows.extend(run_cell(config, cell, seed));
        }
    }
    Ok(rows)
}

fn run_cell(config: &ExperimentConfig, cell: &GenParams, seed: u64) -> Vec<ResultRow> {
    let row = |method| ResultRow {
        method,
        seed,
        n: cell.n,
        m: cell.m,
        capacity: cell.capacity,
        beta: cell.beta,
        sol: None,
        cpu_s: 0.0,
        rd: None,
        of: None,
        error: None,
    };
    let instance = generate_instance(&cell.clone().with_seed(seed));
    let mut rows: Vec<ResultRow> = config
        .methods
        .iter()
        .map(|&method| {
            let mut r = row(method);
            let instance = match &instance {
                Ok(i) => i,
                Err(e) => {
                    r.error = Some(e.to_string());
                    return r;
                }
            };
            let started = Instant::now();
            match solve_with(method, instance, &config.solver_params(seed)) {
                Ok(sol) => {
                    r.sol = Some(sol.objective());
                    r.of = of_metric(cell.n, sol.objective()).ok();
                }
                Err(e) => r.error = Some(e.to_string()),
            }
            r.cpu_s = started.elapsed().as_secs_f64();
            r
        })
        .collect();
    let reference = rows
        .iter()
        .find(|r| r.method == Method::Sa)
        .and_then(|r| r.sol);
    if let Some(f_b) = reference {
        for r in &mut rows {
            r.rd = r.sol.and_then(|f_a| rd_metric(f_a as f64, f_b as f64).ok());
        }
    }
    rows
}

pub const CSV_HEADER: [&str; 10] = ["method", "seed", "n", "m", "C", "beta", "sol", "cpu_s", "rd", "of"];

fn fixed(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_default()
}

pub fn write_csv<W: io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.seed.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.capacity.to_string(),
            r.beta.to_string(),
            r.sol.map(|s| s.to_string()).unwrap_or_default(),
            fixed(Some(r.cpu_s)),
            fixed(r.rd),
            fixed(r.of),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_csv(rows, std::fs::File::create(path)?)
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in reader.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_instance;

    #[test]
    fn metric_examples() {
        assert_eq!(rd_metric(100.0, 100.0).unwrap(), 0.0);
        assert_eq!(rd_metric(150.0, 100.0).unwrap(), 50.0);
        assert!((rd_metric(1719.0, 146.0).unwrap() - 1077.4).abs() < 0.1);
        assert!(rd_metric(1.0, 0.0).is_err());
        assert_eq!(of_metric(100, 100).unwrap(), 1.0);
        assert!((of_metric(1500, 146).unwrap() - 10.27).abs() < 0.005);
        assert!(of_metric(1, 0).is_err());
    }

    #[test]
    fn generator_respects_params() {
        let p = GenParams::new(50, 2, 3, 6, 40).with_seed(3);
        let inst = generate_instance(&p).unwrap();
        assert_eq!(inst.order_count(), 50);
        assert_eq!(inst.rack_count(), p.rack_count());
        assert!(inst.racks().iter().all(|r| r.skus.len() == 6));
        assert!(inst.orders().iter().all(|o| (1..=2).contains(&o.skus.len())));
        assert!(validate_instance(&inst).is_empty());
        assert_eq!(inst, generate_instance(&p).unwrap());
    }

    #[test]
    fn singleton_orders() {
        let mut p = GenParams::new(30, 1, 2, 3, 20);
        p.max_order_size = 1;
        let inst = generate_instance(&p).unwrap();
        assert!(inst.orders().iter().all(|o| o.skus.len() == 1));
    }

    #[test]
    fn rejects_oversized_racks() {
        let p = GenParams::new(10, 1, 2, 30, 20);
        assert!(matches!(generate_instance(&p), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn default_rack_count() {
        // mean size 1.5: ceil(100 * 1.5 / 15) * 2 = 20
        assert_eq!(GenParams::new(100, 2, 10, 15, 200).rack_count(), 20);
        assert_eq!(GenParams::new(2, 3, 1, 15, 200).rack_count(), 6);
    }

    #[test]
    fn one_cell_one_rep_one_row() {
        let config = ExperimentConfig {
            methods: vec![Method::Rb],
            cells: vec![GenParams::new(8, 2, 2, 4, 12)],
            repetitions: 1,
            master_seed: 9,
            time_limit_seconds: None,
            w: None,
            alpha: None,
        };
        let rows = run_experiment(&config).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].sol.is_some());
        assert_eq!(rows[0].rd, None);
    }

    #[test]
    fn csv_shapes() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "method,seed,n,m,C,beta,sol,cpu_s,rd,of\n");

        let row = ResultRow {
            method: Method::Roa,
            seed: 42,
            n: 10,
            m: 2,
            capacity: 3,
            beta: 4,
            sol: Some(7),
            cpu_s: 0.5,
            rd: Some(16.666_666),
            of: Some(10.0 / 7.0),
            error: None,
        };
        let mut buf = Vec::new();
        write_csv(std::slice::from_ref(&row), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().nth(1).unwrap(), "roa,42,10,2,3,4,7,0.5000,16.6667,1.4286");
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back[0].method, row.method);
        assert_eq!(back[0].sol, row.sol);
        assert_eq!(back[0].rd, Some(16.6667));
    }
}
