//! `secfuse`: run attack-resilient fusion scenarios, fuse one-shot stacks,
//! and validate scenario files.
//!
//! Exit codes: 0 success, 1 I/O or usage failure, 2 configuration error,
//! 3 runtime guarantee violation (e.g. an attack budget the estimator
//! cannot absorb, or too little redundancy under the fail policy).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use secfuse::config::{self, ConfigError, ScenarioConfig};
use secfuse::pipeline::{self, PipelineError, RunTrace};
use secfuse::sim::{self, WorldState};
use secfuse::stack::VehicleId;
use secfuse::trace::{self, StepStacks};
use secfuse::{fusion, rng::RngSeed};

/// Seed used when neither `--seed` nor `SECFUSE_SEED` is given.
const DEFAULT_SEED: u64 = 7;
const SEED_ENV: &str = "SECFUSE_SEED";

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "secfuse",
    version,
    about = "Attack-resilient sensor fusion and malicious-uploader isolation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write trace CSVs.
    Run {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Master seed (falls back to SECFUSE_SEED, then 7).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for trace_estimates.csv, trace_isolation.csv,
        /// run_meta.json.
        #[arg(long)]
        out: PathBuf,
        /// Also write trace_stacks.csv with every raw measurement stack.
        #[arg(long)]
        dump_stacks: bool,
        /// Also write trace_truth.csv with ground-truth positions.
        #[arg(long)]
        dump_truth: bool,
    },
    /// Fuse a single stack file (header `source_id,value`) and print the
    /// estimate, the selected sources, and the spread.
    Fuse {
        #[arg(long)]
        stack: PathBuf,
        /// Attack budget: how many readings may be corrupted.
        #[arg(long)]
        q: usize,
    },
    /// Run a built-in scenario (example1 or example2).
    Builtin {
        /// Scenario name: example1 | example2.
        name: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dump_stacks: bool,
        #[arg(long)]
        dump_truth: bool,
        /// Also write the scenario itself as a JSON file.
        #[arg(long)]
        emit_scenario: Option<PathBuf>,
    },
    /// Parse and validate a scenario file without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn resolve_seed(cli_seed: Option<u64>) -> Result<u64, String> {
    if let Some(seed) = cli_seed {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .parse()
            .map_err(|e| format!("bad {SEED_ENV} value `{text}`: {e}")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn config_exit(err: &ConfigError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(EXIT_CONFIG)
}

fn pipeline_exit(err: &PipelineError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(EXIT_RUNTIME)
}

fn io_exit(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_IO)
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig, ExitCode> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_exit(format!("cannot read {}: {e}", path.display())))?;
    config::parse_scenario(&text).map_err(|e| config_exit(&e))
}

type TruthRows = Vec<(u64, VehicleId, f64, f64)>;

/// Re-derives the per-step stacks and ground truth of a finished run. The
/// draws come from derived substreams, so this reproduces exactly what the
/// run saw.
fn replay_world(
    cfg: &ScenarioConfig,
    seed: u64,
) -> Result<(Vec<(u64, StepStacks)>, TruthRows), PipelineError> {
    let specs = cfg.spec_map();
    let seed = RngSeed(seed);
    let mut world = WorldState::initial(&specs);
    let mut stacks = Vec::new();
    let mut truth_rows = Vec::new();
    for k in 1..=cfg.horizon {
        let inputs = pipeline::gather_step_inputs(&world, cfg, &specs, seed)?;
        for (&id, pos) in world.positions() {
            truth_rows.push((k, id, pos.lateral, pos.longitudinal));
        }
        stacks.push((k, inputs.uploads.stacks));
        if k < cfg.horizon {
            world = sim::step_world(&world, &specs, cfg.dt, seed);
        }
    }
    Ok((stacks, truth_rows))
}

fn run_to_dir(
    cfg: &ScenarioConfig,
    seed: u64,
    out: &Path,
    dump_stacks: bool,
    dump_truth: bool,
) -> ExitCode {
    let trace: RunTrace = match pipeline::run_scenario(cfg, seed) {
        Ok(trace) => trace,
        Err(e) => return pipeline_exit(&e),
    };
    if let Err(e) = trace::write_traces(&trace, out) {
        return io_exit(e);
    }
    if dump_stacks || dump_truth {
        let (stacks, truth_rows) = match replay_world(cfg, seed) {
            Ok(data) => data,
            Err(e) => return pipeline_exit(&e),
        };
        if dump_stacks {
            if let Err(e) = trace::write_aux(
                &out.join(trace::STACKS_FILE),
                &trace::render_stacks(&stacks),
            ) {
                return io_exit(e);
            }
        }
        if dump_truth {
            if let Err(e) =
                trace::write_aux(&out.join(trace::TRUTH_FILE), &trace::render_truth(&truth_rows))
            {
                return io_exit(e);
            }
        }
    }
    let flagged_steps = trace
        .steps
        .iter()
        .filter(|s| s.isolation.as_ref().is_some_and(|r| !r.flagged.is_empty()))
        .count();
    println!(
        "wrote {} steps to {} (seed {seed}, {flagged_steps} steps with flagged uploaders)",
        trace.steps.len(),
        out.display()
    );
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            seed,
            out,
            dump_stacks,
            dump_truth,
        } => {
            let cfg = match load_scenario(&scenario) {
                Ok(cfg) => cfg,
                Err(code) => return code,
            };
            let seed = match resolve_seed(seed) {
                Ok(seed) => seed,
                Err(message) => return io_exit(message),
            };
            run_to_dir(&cfg, seed, &out, dump_stacks, dump_truth)
        }
        Command::Builtin {
            name,
            seed,
            out,
            dump_stacks,
            dump_truth,
            emit_scenario,
        } => {
            let Some(cfg) = config::builtin(&name) else {
                eprintln!("error: unknown built-in scenario `{name}` (try example1 or example2)");
                return ExitCode::from(EXIT_CONFIG);
            };
            if let Some(path) = emit_scenario {
                let mut text = config::scenario_to_json(&cfg);
                text.push('\n');
                if let Err(e) = std::fs::write(&path, text) {
                    return io_exit(format!("cannot write {}: {e}", path.display()));
                }
            }
            let seed = match resolve_seed(seed) {
                Ok(seed) => seed,
                Err(message) => return io_exit(message),
            };
            run_to_dir(&cfg, seed, &out, dump_stacks, dump_truth)
        }
        Command::Fuse { stack, q } => {
            let stack = match trace::read_stack_csv(&stack) {
                Ok(stack) => stack,
                Err(e) => return io_exit(e),
            };
            match fusion::fuse(&stack, q) {
                Ok(outcome) => {
                    let sources = outcome
                        .selected
                        .sources(&stack)
                        .iter()
                        .map(|s| s.to_string())
                        .collect::<Vec<_>>()
                        .join(";");
                    println!("estimate {}", outcome.estimate);
                    println!("subset {sources}");
                    println!("spread {}", outcome.spread);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
        Command::Validate { scenario } => match load_scenario(&scenario) {
            Ok(cfg) => {
                println!(
                    "ok: {} vehicles, horizon {}, isolation {}",
                    cfg.vehicles.len(),
                    cfg.horizon,
                    if cfg.gamma.is_some() { "on" } else { "off" }
                );
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
    }
}
