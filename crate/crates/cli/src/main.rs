use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kiva_core::bench::{emit_csv, generate_instance, run_experiment, solve_with, ExperimentConfig, GenParams, Method};
use kiva_core::eval::{check_solution_feasibility, trace_solution};
use kiva_core::station::parse_ladder;
use kiva_core::{Error, Instance, RspMode, RspOptions, Solution, SolverParams};

#[derive(Parser)]
#[command(name = "kiva", version, about = "Order assignment and picking-station scheduling for KIVA warehouses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance as JSON.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        capacity: usize,
        /// SKUs per rack.
        #[arg(long)]
        beta: usize,
        /// Rack count (derived from demand when omitted).
        #[arg(long)]
        racks: Option<usize>,
        #[arg(long)]
        skus: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        min_order_size: usize,
        #[arg(long, default_value_t = 2)]
        max_order_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an instance and print the solution JSON.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "sa")]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Wall-clock limit in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        w: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Ascending beam widths, e.g. `1,4,16,inf`.
        #[arg(long)]
        bw_list: Option<String>,
        #[arg(long, default_value = "auto")]
        rsp_mode: RspMode,
        /// Print the per-slot station trace to stderr.
        #[arg(long)]
        trace: bool,
        /// Write the solution here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment grid and write CSV results.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a solution against an instance.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
}

enum Failure {
    Infeasible(String),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_infeasible() {
            Failure::Infeasible(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate {
            n,
            m,
            capacity,
            beta,
            racks,
            skus,
            seed,
            min_order_size,
            max_order_size,
            out,
        } => {
            let mut params = GenParams::new(n, m, capacity, beta, skus).with_seed(seed);
            params.racks = racks;
            params.min_order_size = min_order_size;
            params.max_order_size = max_order_size;
            let instance = generate_instance(&params)?;
            let json = serde_json::to_string_pretty(&instance).map_err(Error::from)?;
            write_text(&out, &json)?;
            eprintln!(
                "wrote {} orders, {} racks, {} SKUs to {}",
                instance.order_count(),
                instance.rack_count(),
                instance.sku_count(),
                out.display()
            );
        }
        Command::Solve {
            instance,
            method,
            seed,
            time_limit,
            w,
            alpha,
            bw_list,
            rsp_mode,
            trace,
            out,
        } => {
            let instance: Instance = read_json(&instance)?;
            let mut params = SolverParams {
                rng_seed: seed,
                time_limit_seconds: time_limit,
                rsp: RspOptions::with_mode(rsp_mode),
                ..Default::default()
            };
            if let Some(w) = w {
                params.w = w;
            }
            if let Some(alpha) = alpha {
                params.alpha = alpha;
            }
            if let Some(list) = bw_list {
                params.gamma = parse_ladder(&list)?;
            }
            params.validate()?;
            let solution = solve_with(method, &instance, &params)?;
            let report = check_solution_feasibility(&instance, &solution);
            if !report.feasible() {
                let msg = report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n");
                return Err(Failure::Infeasible(format!("solver produced an infeasible schedule:\n{msg}")));
            }
            if trace {
                let (traced, _) = trace_solution(&instance, &solution)?;
                let mut text = String::new();
                for (p, t) in traced.traces.iter().enumerate() {
                    t.write_lines(p, &mut text).expect("write to string");
                }
                eprint!("{text}");
            }
            eprintln!("{method}: {} rack visits", solution.objective());
            let json = serde_json::to_string(&solution).map_err(Error::from)?;
            match out {
                Some(path) => write_text(&path, &json)?,
                None => println!("{json}"),
            }
        }
        Command::Bench { config, out } => {
            let config = ExperimentConfig::from_json_file(&config)?;
            let rows = run_experiment(&config)?;
            for r in rows.iter().filter(|r| r.error.is_some()) {
                eprintln!("{} seed {}: {}", r.method, r.seed, r.error.as_deref().unwrap_or_default());
            }
            emit_csv(&rows, &out)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Verify { instance, solution } => {
            let instance: Instance = read_json(&instance)?;
            let solution: Solution = read_json(&solution)?;
            let report = check_solution_feasibility(&instance, &solution);
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if !report.feasible() {
                for v in &report.violations {
                    println!("{v}");
                }
                return Err(Failure::Infeasible(format!("{} violations", report.violations.len())));
            }
            println!("feasible, {} rack visits", solution.objective());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
