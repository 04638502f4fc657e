//! Scenario configuration: the JSON schema, validation, and the built-in
//! scenarios shipped with the tool.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{AttackSpec, LaneChange, NoiseMode, SpeedProfile, VehicleSpec};
use crate::stack::{Channel, VehicleId};

/// How the per-stack attack budget `q` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QPolicy {
    /// The largest budget the estimator can absorb: `q = ceil(N/2) - 1`.
    #[default]
    DefaultMax,
    /// A fixed budget; the run refuses any stack with `2q >= N`.
    Explicit(usize),
}

impl QPolicy {
    /// The budget to use for a stack of `n` readings.
    pub fn q_for(&self, n: usize) -> usize {
        match self {
            QPolicy::DefaultMax => (n.saturating_sub(1)) / 2,
            QPolicy::Explicit(q) => *q,
        }
    }
}

/// What to do when a member has too few measurement sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RedundancyPolicy {
    /// Record a diagnostic, skip the estimate, continue the run.
    #[default]
    SkipWithDiagnostic,
    /// Abort the run.
    Fail,
}

/// Single-target mode: a static ground truth with fresh per-step
/// perturbation, measured by every vehicle, with the malicious pair
/// redrawn every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleTargetMode {
    /// Bound of the fresh uniform perturbation added to the anchor's
    /// lateral truth each step.
    pub truth_jitter: f64,
    /// How many uploaders turn malicious each step.
    pub malicious_per_step: usize,
    /// Corruption injected by the selected uploaders.
    pub attack: AttackSpec,
}

/// Full declarative description of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of trace steps.
    pub horizon: u64,
    /// Seconds between consecutive steps.
    pub dt: f64,
    /// Vehicle whose surroundings define cloud membership.
    pub anchor: VehicleId,
    /// Membership range around the anchor in meters.
    pub range: f64,
    /// Per-channel honest-noise bounds for isolation. When absent the run
    /// produces estimates only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<BTreeMap<Channel, f64>>,
    #[serde(default)]
    pub q_policy: QPolicy,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    #[serde(default)]
    pub on_insufficient_redundancy: RedundancyPolicy,
    /// When set, the run estimates only the anchor's lateral state with
    /// all vehicles as permanent members.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_target: Option<SingleTargetMode>,
    pub vehicles: Vec<VehicleSpec>,
}

/// One field-level validation failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    /// Path of the offending field, e.g. `vehicles[2].noise_bounds`.
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Errors from parsing or validating a scenario.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("scenario is not valid JSON: {0}")]
    Syntax(serde_json::Error),
    #[error("scenario does not match the schema: {0}")]
    Schema(serde_json::Error),
    #[error("scenario is semantically invalid:\n{}", format_field_errors(.0))]
    Semantic(Vec<FieldError>),
}

fn format_field_errors(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("  - {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl ScenarioConfig {
    /// Specs keyed by vehicle id.
    pub fn spec_map(&self) -> BTreeMap<VehicleId, VehicleSpec> {
        self.vehicles.iter().map(|v| (v.id, v.clone())).collect()
    }

    /// Channels the run fuses: only the anchor's lateral state in
    /// single-target mode, both position channels otherwise.
    pub fn channels(&self) -> &'static [Channel] {
        if self.single_target.is_some() {
            &[Channel::Lateral]
        } else {
            &Channel::ALL
        }
    }

    /// Collects every semantic violation, or confirms the config is usable.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let mut push = |path: &str, message: String| {
            errors.push(FieldError {
                path: path.to_string(),
                message,
            });
        };

        if self.dt.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !self.dt.is_finite() {
            push("dt", format!("must be a positive number of seconds, got {}", self.dt));
        }
        if self.range.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || !self.range.is_finite()
        {
            push("range", format!("must be a positive number of meters, got {}", self.range));
        }
        if self.vehicles.is_empty() {
            push("vehicles", "must list at least one vehicle".to_string());
        }

        let mut seen = BTreeMap::new();
        for (i, v) in self.vehicles.iter().enumerate() {
            if let Some(previous) = seen.insert(v.id, i) {
                push(
                    &format!("vehicles[{i}].id"),
                    format!("duplicate vehicle id {} (also used by vehicles[{previous}])", v.id),
                );
            }
        }
        if !seen.contains_key(&self.anchor) {
            push("anchor", format!("anchor vehicle {} is not in the vehicle list", self.anchor));
        }

        for (i, v) in self.vehicles.iter().enumerate() {
            let base = format!("vehicles[{i}]");
            for (&channel, &bound) in &v.noise_bounds {
                if bound < 0.0 || !bound.is_finite() {
                    push(
                        &format!("{base}.noise_bounds.{channel}"),
                        format!("noise bound must be >= 0, got {bound}"),
                    );
                }
            }
            for channel in self.channels() {
                if !v.noise_bounds.contains_key(channel) {
                    push(
                        &format!("{base}.noise_bounds"),
                        format!("missing bound for channel {channel}"),
                    );
                }
            }
            if v.lateral_jitter < 0.0 || !v.lateral_jitter.is_finite() {
                push(
                    &format!("{base}.lateral_jitter"),
                    format!("must be >= 0, got {}", v.lateral_jitter),
                );
            }
            if let AttackSpec::Gaussian { sigma } = v.attack {
                if sigma < 0.0 || !sigma.is_finite() {
                    push(&format!("{base}.attack.sigma"), format!("must be >= 0, got {sigma}"));
                }
            }
            let mut changes = v.lane_changes.clone();
            changes.sort_by_key(|c| c.start_step);
            for (j, c) in changes.iter().enumerate() {
                let path = format!("{base}.lane_changes[{j}]");
                if c.start_step >= c.end_step {
                    push(&path, format!("empty interval [{}, {})", c.start_step, c.end_step));
                }
                if c.end_step > self.horizon {
                    push(&path, format!("ends at step {} beyond horizon {}", c.end_step, self.horizon));
                }
                if j > 0 && c.start_step < changes[j - 1].end_step {
                    push(&path, "overlaps the previous lane change".to_string());
                }
            }
        }

        if let Some(gamma) = &self.gamma {
            for (&channel, &g) in gamma {
                if g.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !g.is_finite() {
                    push(&format!("gamma.{channel}"), format!("must be > 0, got {g}"));
                }
            }
            for channel in self.channels() {
                if !gamma.contains_key(channel) {
                    push("gamma", format!("missing bound for fused channel {channel}"));
                }
            }
        }

        if let Some(mode) = &self.single_target {
            if mode.truth_jitter < 0.0 || !mode.truth_jitter.is_finite() {
                push("single_target.truth_jitter", format!("must be >= 0, got {}", mode.truth_jitter));
            }
            if mode.malicious_per_step > self.vehicles.len() {
                push(
                    "single_target.malicious_per_step",
                    format!(
                        "cannot select {} malicious uploaders from {} vehicles",
                        mode.malicious_per_step,
                        self.vehicles.len()
                    ),
                );
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Semantic(errors))
        }
    }
}

/// Parses and validates a scenario from JSON text.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
        if e.is_syntax() || e.is_eof() {
            ConfigError::Syntax(e)
        } else {
            ConfigError::Schema(e)
        }
    })?;
    config.validate()?;
    Ok(config)
}

/// Serializes a scenario to pretty JSON.
pub fn scenario_to_json(config: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(config).expect("scenario configs always serialize")
}

fn both_channels(lateral: f64, longitudinal: f64) -> BTreeMap<Channel, f64> {
    [(Channel::Lateral, lateral), (Channel::Longitudinal, longitudinal)]
        .into_iter()
        .collect()
}

/// Built-in scenario 1: five vehicles all measuring the lateral position of
/// vehicle 1, whose truth is 1.5 m plus a fresh uniform perturbation within
/// 0.01 m each step. Vehicle `i` has noise bound `0.01 * i`; every step two
/// uploaders, redrawn at random, inject Gaussian corruption of standard
/// deviation 5. Twenty steps; no isolation (no known noise bound).
pub fn example1() -> ScenarioConfig {
    let vehicles = (1..=5u32)
        .map(|i| VehicleSpec {
            id: VehicleId(i),
            initial_lateral: 1.5,
            initial_longitudinal: 0.0,
            longitudinal_speed: SpeedProfile::constant(0.0),
            lateral_jitter: 0.0,
            lane_changes: vec![],
            noise_bounds: [(Channel::Lateral, 0.01 * f64::from(i))].into_iter().collect(),
            attack: AttackSpec::None,
        })
        .collect();
    ScenarioConfig {
        horizon: 20,
        dt: 1.0,
        anchor: VehicleId(1),
        range: 100.0,
        gamma: None,
        q_policy: QPolicy::DefaultMax,
        noise_mode: NoiseMode::Independent,
        on_insufficient_redundancy: RedundancyPolicy::SkipWithDiagnostic,
        single_target: Some(SingleTargetMode {
            truth_jitter: 0.01,
            malicious_per_step: 2,
            attack: AttackSpec::Gaussian { sigma: 5.0 },
        }),
        vehicles,
    }
}

/// Built-in scenario 2: five vehicles on a four-lane highway, cloud
/// membership within 100 m of vehicle 1, both position channels fused, and
/// isolation with noise bounds 0.005 m (lateral) / 0.5 m (longitudinal).
/// Vehicles 4 and 5 corrupt all their uploads with Gaussian(sigma = 5)
/// values. Vehicle 4 starts 200 m behind, closes at 5 m/s, joins the cloud
/// at step 21 and overtakes through the adjacent lane around steps 39-42.
/// Sixty steps of one second.
pub fn example2() -> ScenarioConfig {
    let vehicle = |id: u32,
                   lateral: f64,
                   longitudinal: f64,
                   base: f64,
                   amplitude: f64,
                   jitter: f64,
                   attack: AttackSpec,
                   lane_changes: Vec<LaneChange>| VehicleSpec {
        id: VehicleId(id),
        initial_lateral: lateral,
        initial_longitudinal: longitudinal,
        longitudinal_speed: SpeedProfile { base, amplitude },
        lateral_jitter: jitter,
        lane_changes,
        noise_bounds: both_channels(0.005, 0.5),
        attack,
    };
    let overtake = vec![
        LaneChange {
            start_step: 39,
            end_step: 40,
            target_lateral: 4.5,
        },
        LaneChange {
            start_step: 41,
            end_step: 42,
            target_lateral: 1.5,
        },
    ];
    ScenarioConfig {
        horizon: 60,
        dt: 1.0,
        anchor: VehicleId(1),
        range: 100.0,
        gamma: Some(both_channels(0.005, 0.5)),
        q_policy: QPolicy::DefaultMax,
        noise_mode: NoiseMode::Independent,
        on_insufficient_redundancy: RedundancyPolicy::SkipWithDiagnostic,
        single_target: None,
        vehicles: vec![
            vehicle(1, 1.5, 0.0, 30.0, 1.0, 0.01, AttackSpec::None, vec![]),
            vehicle(2, 4.5, 10.0, 30.0, 5.0, 0.02, AttackSpec::None, vec![]),
            vehicle(3, 7.5, 50.0, 30.0, -4.0, 0.04, AttackSpec::None, vec![]),
            vehicle(
                4,
                1.5,
                -200.0,
                35.0,
                1.0,
                0.01,
                AttackSpec::Gaussian { sigma: 5.0 },
                overtake,
            ),
            vehicle(5, 10.5, -50.0, 30.0, 3.0, 0.03, AttackSpec::Gaussian { sigma: 5.0 }, vec![]),
        ],
    }
}

/// Built-in scenarios by name.
pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    match name {
        "example1" => Some(example1()),
        "example2" => Some(example2()),
        _ => None,
    }
}
