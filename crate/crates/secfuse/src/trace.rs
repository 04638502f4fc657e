//! Trace serialization: CSV files, run metadata, and the one-shot stack
//! format consumed by `secfuse fuse`.
//!
//! Numeric columns are written with 17 significant digits so the files
//! replay bit-exactly. All writes go through a temp file and an atomic
//! rename.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::pipeline::RunTrace;
use crate::stack::{Channel, MeasurementStack, StackError, VehicleId};

pub const ESTIMATES_FILE: &str = "trace_estimates.csv";
pub const ISOLATION_FILE: &str = "trace_isolation.csv";
pub const STACKS_FILE: &str = "trace_stacks.csv";
pub const TRUTH_FILE: &str = "trace_truth.csv";
pub const META_FILE: &str = "run_meta.json";

pub const ESTIMATES_HEADER: &str = "step,vehicle,channel,truth,estimate,error,subset,spread,n,q";
pub const ISOLATION_HEADER: &str = "step,vehicle,flagged,max_residual,evidence_target,evidence_channel";
pub const STACKS_HEADER: &str = "step,target,channel,source,value";
pub const TRUTH_HEADER: &str = "step,vehicle,lateral,longitudinal";
pub const STACK_INPUT_HEADER: &str = "source_id,value";

/// The stacks of one step, keyed by (target, channel).
pub type StepStacks = BTreeMap<(VehicleId, Channel), MeasurementStack<f64>>;

/// Errors reading or writing trace files.
#[derive(Debug, Error)]
pub enum TraceError {
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Stack(#[from] StackError),
}

/// Formats a float with 17 significant digits (round-trips any f64).
pub fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), TraceError> {
    let wrap = |source| TraceError::Write {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp).map_err(wrap)?;
        file.write_all(contents.as_bytes()).map_err(wrap)?;
        file.sync_all().map_err(wrap)?;
    }
    fs::rename(&tmp, path).map_err(wrap)
}

/// Renders the estimate rows of a run, sorted by (step, vehicle, channel).
pub fn render_estimates(trace: &RunTrace) -> String {
    let mut out = String::from(ESTIMATES_HEADER);
    out.push('\n');
    for step in &trace.steps {
        for row in &step.rows {
            let subset = row
                .selected_sources
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(";");
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                step.step,
                row.vehicle,
                row.channel,
                format_float(row.truth),
                format_float(row.estimate),
                format_float(row.error),
                subset,
                format_float(row.spread),
                row.n,
                row.q_used,
            ));
        }
    }
    out
}

/// Renders the isolation rows of a run: one row per (step, member) when the
/// step ran isolation. The evidence columns carry the member's most damning
/// residual (largest relative to its channel threshold).
pub fn render_isolation(trace: &RunTrace) -> String {
    let mut out = String::from(ISOLATION_HEADER);
    out.push('\n');
    for step in &trace.steps {
        let Some(report) = &step.isolation else {
            continue;
        };
        for &member in &step.membership {
            let flagged = u8::from(report.flagged.contains(&member));
            match report.worst_evidence(member) {
                Some(evidence) => out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    step.step,
                    member,
                    flagged,
                    format_float(evidence.max_residual),
                    evidence.target,
                    evidence.channel,
                )),
                None => out.push_str(&format!("{},{},{},,,\n", step.step, member, flagged)),
            }
        }
    }
    out
}

/// Renders every generated stack of a run (step, target, channel, source,
/// value), the raw inputs fusion saw.
pub fn render_stacks(all: &[(u64, StepStacks)]) -> String {
    let mut out = String::from(STACKS_HEADER);
    out.push('\n');
    for (step, stacks) in all {
        for (&(target, channel), stack) in stacks {
            for (source, value) in stack.readings() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    step,
                    target,
                    channel,
                    source,
                    format_float(*value),
                ));
            }
        }
    }
    out
}

/// Renders the privileged ground-truth positions per step.
pub fn render_truth(rows: &[(u64, VehicleId, f64, f64)]) -> String {
    let mut out = String::from(TRUTH_HEADER);
    out.push('\n');
    for (step, vehicle, lateral, longitudinal) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            step,
            vehicle,
            format_float(*lateral),
            format_float(*longitudinal),
        ));
    }
    out
}

#[derive(Serialize)]
struct RunMeta<'a> {
    seed: u64,
    tool: &'static str,
    version: &'static str,
    format: u32,
    config: &'a crate::config::ScenarioConfig,
}

/// Renders `run_meta.json`: seed, versions, and the config echo.
pub fn render_meta(trace: &RunTrace) -> String {
    let meta = RunMeta {
        seed: trace.seed,
        tool: "secfuse",
        version: env!("CARGO_PKG_VERSION"),
        format: 1,
        config: &trace.config,
    };
    let mut text = serde_json::to_string_pretty(&meta).expect("meta always serializes");
    text.push('\n');
    text
}

/// Files produced by [`write_traces`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceFiles {
    pub estimates: PathBuf,
    pub isolation: PathBuf,
    pub meta: PathBuf,
}

/// Writes the estimate and isolation CSVs plus `run_meta.json` into
/// `out_dir` (created if missing). Empty traces produce headers-only CSVs.
pub fn write_traces(trace: &RunTrace, out_dir: &Path) -> Result<TraceFiles, TraceError> {
    fs::create_dir_all(out_dir).map_err(|source| TraceError::Write {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let files = TraceFiles {
        estimates: out_dir.join(ESTIMATES_FILE),
        isolation: out_dir.join(ISOLATION_FILE),
        meta: out_dir.join(META_FILE),
    };
    write_atomic(&files.estimates, &render_estimates(trace))?;
    write_atomic(&files.isolation, &render_isolation(trace))?;
    write_atomic(&files.meta, &render_meta(trace))?;
    Ok(files)
}

/// Writes one rendered auxiliary file atomically.
pub fn write_aux(path: &Path, contents: &str) -> Result<(), TraceError> {
    write_atomic(path, contents)
}

/// Reads a one-shot stack file: a `source_id,value` header followed by one
/// reading per line. Metadata (target, step, channel) is not part of the
/// format and defaults to placeholders — fusion does not consume it.
pub fn read_stack_csv(path: &Path) -> Result<MeasurementStack<f64>, TraceError> {
    let text = fs::read_to_string(path).map_err(|source| TraceError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let malformed = |line: usize, message: String| TraceError::Malformed {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == STACK_INPUT_HEADER => {}
        Some((_, header)) => {
            return Err(malformed(
                1,
                format!("expected header `{STACK_INPUT_HEADER}`, got `{header}`"),
            ))
        }
        None => return Err(malformed(1, "empty file".to_string())),
    }

    let mut readings = Vec::new();
    for (index, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let line_no = index + 1;
        let (id_text, value_text) = line
            .split_once(',')
            .ok_or_else(|| malformed(line_no, "expected `source_id,value`".to_string()))?;
        let source: u32 = id_text
            .trim()
            .parse()
            .map_err(|e| malformed(line_no, format!("bad source id `{id_text}`: {e}")))?;
        let value: f64 = value_text
            .trim()
            .parse()
            .map_err(|e| malformed(line_no, format!("bad value `{value_text}`: {e}")))?;
        if !value.is_finite() {
            return Err(malformed(line_no, format!("non-finite value {value}")));
        }
        readings.push((VehicleId(source), value));
    }
    Ok(MeasurementStack::new(
        VehicleId(0),
        0,
        Channel::Lateral,
        readings,
    )?)
}
