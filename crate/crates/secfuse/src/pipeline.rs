//! Per-step orchestration: membership, uploads, fusion, isolation, traces.
//!
//! A run produces one [`StepTrace`] per step `k = 1..=horizon`. Step `k`
//! observes the world after `k - 1` updates: the first step sees the
//! initial configuration, and a vehicle that closes to the membership range
//! after 20 updates appears in step 21.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::config::{QPolicy, RedundancyPolicy, ScenarioConfig};
use crate::fusion::{self, FusionError};
use crate::isolation::{self, GammaBounds, IsolationError, IsolationReport};
use crate::rng::{self, RngSeed};
use crate::sim::{self, SimError, UploadBatch, VehicleSpec, WorldState};
use crate::stack::{Channel, VehicleId};

/// Errors that abort a run.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Isolation(#[from] IsolationError),
    #[error("explicit attack budget q={q} is not reconstructible for a stack of {n} readings")]
    InvalidExplicitQ { n: usize, q: usize },
    #[error("vehicle {vehicle} has only {n} measurement sources at step {step} (need 3)")]
    InsufficientRedundancy { vehicle: VehicleId, n: usize, step: u64 },
}

/// Fusion result for one (vehicle, channel) at one step, with the
/// simulator's privileged truth column for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub vehicle: VehicleId,
    pub channel: Channel,
    /// Ground truth (test-only: comes from the simulator's privileged view,
    /// never from anything the cloud observes).
    pub truth: f64,
    pub estimate: f64,
    /// `estimate - truth`, recorded exactly.
    pub error: f64,
    /// Sources whose readings formed the estimate.
    pub selected_sources: Vec<VehicleId>,
    pub spread: f64,
    pub n: usize,
    pub q_used: usize,
    /// Whether at most `q_used` of this stack's readings carried a nonzero
    /// injected value (and `2q < N`), i.e. whether the error bound applies.
    pub assumption_held: bool,
}

/// Diagnostic for a member that could not be estimated this step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDiagnostic {
    pub vehicle: VehicleId,
    pub message: String,
}

/// Everything produced at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub step: u64,
    pub membership: BTreeSet<VehicleId>,
    /// One row per (member, channel), sorted by (vehicle, channel).
    pub rows: Vec<EstimateRow>,
    /// Present iff the scenario configures noise bounds.
    pub isolation: Option<IsolationReport<f64>>,
    pub diagnostics: Vec<StepDiagnostic>,
}

/// A complete run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub config: ScenarioConfig,
    pub seed: u64,
    /// Steps 1..=horizon, in order.
    pub steps: Vec<StepTrace>,
}

/// The data a single step works on, before fusion. Exposed so tests can
/// recompose the pipeline from its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInputs {
    pub step: u64,
    pub membership: BTreeSet<VehicleId>,
    pub truths: BTreeMap<(VehicleId, Channel), f64>,
    /// Uploaders that injected a nonzero value this step, per channel.
    pub attacks: BTreeMap<(VehicleId, Channel), f64>,
    pub uploads: UploadBatch,
}

/// Gathers membership, truths, attack values, and uploads for the step that
/// observes `world`.
pub fn gather_step_inputs(
    world: &WorldState,
    config: &ScenarioConfig,
    specs: &BTreeMap<VehicleId, VehicleSpec>,
    seed: RngSeed,
) -> Result<StepInputs, PipelineError> {
    let step = world.step() + 1;

    let (membership, truths, attackers) = match &config.single_target {
        Some(mode) => {
            let membership: BTreeSet<VehicleId> = specs.keys().copied().collect();
            let base = specs
                .get(&config.anchor)
                .map(|s| s.initial_lateral)
                .unwrap_or_default();
            let truth = if mode.truth_jitter > 0.0 {
                let jitter = rng::truth_stream(seed, config.anchor, step)
                    .gen_range(-mode.truth_jitter..mode.truth_jitter);
                base + jitter
            } else {
                base
            };
            let truths: BTreeMap<_, _> =
                [((config.anchor, Channel::Lateral), truth)].into_iter().collect();
            let attackers = sim::select_malicious(
                &mut rng::selection_stream(seed, step),
                &membership,
                mode.malicious_per_step,
            )?;
            (membership, truths, attackers)
        }
        None => {
            let membership = sim::neighborhood(world, config.anchor, config.range)?;
            let mut truths = BTreeMap::new();
            for &member in &membership {
                let pos = world.position(member).expect("members exist in the world");
                for &channel in config.channels() {
                    truths.insert((member, channel), pos.channel(channel));
                }
            }
            let attackers: BTreeSet<VehicleId> = membership
                .iter()
                .copied()
                .filter(|id| specs.get(id).is_some_and(|s| !s.attack.is_none()))
                .collect();
            (membership, truths, attackers)
        }
    };

    // In single-target mode the per-step selection decides who attacks and
    // the mode supplies the attack shape; otherwise each vehicle's own spec
    // applies whenever it is a member.
    let attacks = match &config.single_target {
        Some(mode) => {
            let mut values = BTreeMap::new();
            for &uploader in &attackers {
                for &channel in config.channels() {
                    let v = mode.attack.value(uploader, channel, step, seed);
                    if v != 0.0 {
                        values.insert((uploader, channel), v);
                    }
                }
            }
            values
        }
        None => sim::attack_values(specs, &attackers, config.channels(), step, seed),
    };

    let uploads = sim::generate_uploads(
        &truths,
        &membership,
        specs,
        &attacks,
        step,
        seed,
        config.noise_mode,
    )?;

    Ok(StepInputs {
        step,
        membership,
        truths,
        attacks,
        uploads,
    })
}

/// Runs fusion (and isolation, when configured) on the step that observes
/// `world`.
pub fn run_step(
    world: &WorldState,
    config: &ScenarioConfig,
    seed: RngSeed,
) -> Result<StepTrace, PipelineError> {
    let specs = config.spec_map();
    let inputs = gather_step_inputs(world, config, &specs, seed)?;
    fuse_step(&inputs, config)
}

/// Fusion + isolation over already-gathered step inputs.
pub fn fuse_step(inputs: &StepInputs, config: &ScenarioConfig) -> Result<StepTrace, PipelineError> {
    let step = inputs.step;
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut estimates: BTreeMap<(VehicleId, Channel), f64> = BTreeMap::new();
    let mut skipped = false;

    for (&(vehicle, channel), stack) in &inputs.uploads.stacks {
        let n = stack.len();
        if n < 3 {
            match config.on_insufficient_redundancy {
                RedundancyPolicy::Fail => {
                    return Err(PipelineError::InsufficientRedundancy { vehicle, n, step })
                }
                RedundancyPolicy::SkipWithDiagnostic => {
                    if channel == *config.channels().first().expect("at least one channel") {
                        diagnostics.push(StepDiagnostic {
                            vehicle,
                            message: format!("only {n} measurement sources (need 3); no estimate"),
                        });
                    }
                    skipped = true;
                    continue;
                }
            }
        }
        let q = config.q_policy.q_for(n);
        if let QPolicy::Explicit(_) = config.q_policy {
            if !fusion::check_reconstructible(n, q) {
                return Err(PipelineError::InvalidExplicitQ { n, q });
            }
        }
        let outcome = fusion::fuse(stack, q)?;
        let truth = inputs.truths[&(vehicle, channel)];
        let injected = stack
            .sources()
            .filter(|s| {
                inputs
                    .attacks
                    .get(&(*s, channel))
                    .is_some_and(|v| *v != 0.0)
            })
            .count();
        let assumption_held = injected <= q && fusion::check_reconstructible(n, q);
        estimates.insert((vehicle, channel), outcome.estimate);
        rows.push(EstimateRow {
            vehicle,
            channel,
            truth,
            estimate: outcome.estimate,
            error: outcome.estimate - truth,
            selected_sources: outcome.selected.sources(stack),
            spread: outcome.spread,
            n,
            q_used: q,
            assumption_held,
        });
    }

    // Residual test only when noise bounds are known and every member got
    // an estimate to be judged against.
    let isolation = match &config.gamma {
        Some(gamma) if !skipped => {
            let bounds = GammaBounds::new(gamma.clone())?;
            let neighborhoods: BTreeMap<VehicleId, BTreeSet<VehicleId>> = inputs
                .membership
                .iter()
                .map(|&m| (m, inputs.membership.clone()))
                .collect();
            Some(isolation::isolate_step(
                step,
                &estimates,
                &inputs.uploads.records,
                &bounds,
                &inputs.membership,
                &neighborhoods,
            )?)
        }
        _ => None,
    };

    rows.sort_by_key(|r| (r.vehicle, r.channel));
    Ok(StepTrace {
        step,
        membership: inputs.membership.clone(),
        rows,
        isolation,
        diagnostics,
    })
}

/// Runs a whole scenario: steps `1..=horizon`, each observing the world
/// advanced one Euler update further.
pub fn run_scenario(config: &ScenarioConfig, seed: u64) -> Result<RunTrace, PipelineError> {
    let specs = config.spec_map();
    let seed = RngSeed(seed);
    let mut world = WorldState::initial(&specs);
    let mut steps = Vec::with_capacity(config.horizon as usize);
    for k in 1..=config.horizon {
        let trace = run_step(&world, config, seed)?;
        debug_assert_eq!(trace.step, k);
        steps.push(trace);
        if k < config.horizon {
            world = sim::step_world(&world, &specs, config.dt, seed);
        }
    }
    Ok(RunTrace {
        config: config.clone(),
        seed: seed.0,
        steps,
    })
}
