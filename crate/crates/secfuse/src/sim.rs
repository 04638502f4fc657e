//! Deterministic discrete-time simulator: vehicle motion, range-based cloud
//! membership, and corrupted uploads.
//!
//! The world advances by explicit Euler steps (`dt` seconds each); state
//! index `s` counts applied updates, so the state at index `s` has been
//! advanced `s` times from the initial configuration. All randomness comes
//! from derived substreams ([`crate::rng`]), so a run is bit-reproducible
//! for a given seed.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isolation::UploadRecord;
use crate::rng::{self, RngSeed};
use crate::stack::{Channel, MeasurementStack, StackError, VehicleId};

/// Tolerance added to the membership range comparison.
///
/// A vehicle closing at a constant relative speed can sit mathematically
/// *exactly* on the range boundary at the step it enters; tiny lateral
/// jitter offsets and accumulated float rounding would otherwise resolve
/// that tie arbitrarily. One millimeter dominates both effects at highway
/// ranges while staying far below the per-step motion granularity.
pub const RANGE_BOUNDARY_TOLERANCE: f64 = 1e-3;

/// Errors from the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("anchor vehicle {0} does not exist in the world")]
    UnknownAnchor(VehicleId),
    #[error("cannot select {count} malicious uploaders from {available} members")]
    CountExceedsMembership { count: usize, available: usize },
    #[error("vehicle {0} has no spec")]
    MissingSpec(VehicleId),
    #[error("vehicle {vehicle} has no noise bound for channel {channel}")]
    MissingNoiseBound { vehicle: VehicleId, channel: Channel },
    #[error(transparent)]
    Stack(#[from] StackError),
}

/// Longitudinal speed profile `v(t) = base + amplitude * sin(t)` in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub base: f64,
    #[serde(default)]
    pub amplitude: f64,
}

impl SpeedProfile {
    pub fn constant(base: f64) -> Self {
        Self {
            base,
            amplitude: 0.0,
        }
    }

    pub fn velocity(&self, t: f64) -> f64 {
        self.base + self.amplitude * t.sin()
    }
}

/// Scripted lane change: while advancing from state index `start_step` up
/// to `end_step`, the lateral position moves linearly toward
/// `target_lateral`, landing on it exactly at `end_step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneChange {
    pub start_step: u64,
    pub end_step: u64,
    pub target_lateral: f64,
}

/// How a malicious uploader corrupts its uploads. The drawn value is added
/// to every record the uploader produces at that step (one draw per
/// channel per step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttackSpec {
    /// Honest uploader: contributes no corruption.
    None,
    /// Zero-mean Gaussian value with the given standard deviation.
    Gaussian { sigma: f64 },
    /// The same constant at every step.
    Constant { value: f64 },
    /// Explicit per-step values; steps beyond the list inject zero.
    Series { values: Vec<f64> },
}

impl AttackSpec {
    pub fn is_none(&self) -> bool {
        matches!(self, AttackSpec::None)
    }

    /// Attack value injected on `channel` at trace step `step` (1-based).
    pub fn value(&self, uploader: VehicleId, channel: Channel, step: u64, seed: RngSeed) -> f64 {
        match self {
            AttackSpec::None => 0.0,
            AttackSpec::Gaussian { sigma } => {
                if *sigma <= 0.0 {
                    return 0.0;
                }
                let normal = Normal::new(0.0, *sigma).expect("finite positive sigma");
                normal.sample(&mut rng::attack_stream(seed, uploader, channel, step))
            }
            AttackSpec::Constant { value } => *value,
            AttackSpec::Series { values } => {
                let index = step.saturating_sub(1) as usize;
                values.get(index).copied().unwrap_or(0.0)
            }
        }
    }
}

/// Static description of one simulated vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub id: VehicleId,
    /// Initial lateral position in meters.
    pub initial_lateral: f64,
    /// Initial longitudinal position in meters.
    pub initial_longitudinal: f64,
    pub longitudinal_speed: SpeedProfile,
    /// Bound of the uniform in-lane lateral speed jitter in m/s.
    #[serde(default)]
    pub lateral_jitter: f64,
    #[serde(default)]
    pub lane_changes: Vec<LaneChange>,
    /// Honest measurement disturbance bound per channel, in channel units.
    pub noise_bounds: BTreeMap<Channel, f64>,
    #[serde(default = "AttackSpec::default_none")]
    pub attack: AttackSpec,
}

impl AttackSpec {
    fn default_none() -> Self {
        AttackSpec::None
    }
}

impl VehicleSpec {
    fn active_lane_change(&self, step: u64) -> Option<&LaneChange> {
        self.lane_changes
            .iter()
            .find(|lc| lc.start_step <= step && step < lc.end_step)
    }
}

/// Planar position of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub lateral: f64,
    pub longitudinal: f64,
}

impl Position {
    pub fn distance_to(&self, other: &Position) -> f64 {
        let dx = self.lateral - other.lateral;
        let dy = self.longitudinal - other.longitudinal;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn channel(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Lateral => self.lateral,
            Channel::Longitudinal => self.longitudinal,
        }
    }
}

/// Ground-truth world at one state index. Only the simulator and the test
/// harness see it; fusion and isolation never do.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    step: u64,
    positions: BTreeMap<VehicleId, Position>,
}

impl WorldState {
    /// World at state index 0: every vehicle at its initial position.
    pub fn initial(specs: &BTreeMap<VehicleId, VehicleSpec>) -> Self {
        let positions = specs
            .iter()
            .map(|(&id, spec)| {
                (
                    id,
                    Position {
                        lateral: spec.initial_lateral,
                        longitudinal: spec.initial_longitudinal,
                    },
                )
            })
            .collect();
        Self { step: 0, positions }
    }

    /// Number of updates applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn position(&self, id: VehicleId) -> Option<&Position> {
        self.positions.get(&id)
    }

    pub fn vehicles(&self) -> impl Iterator<Item = VehicleId> + '_ {
        self.positions.keys().copied()
    }

    pub fn positions(&self) -> &BTreeMap<VehicleId, Position> {
        &self.positions
    }

    /// Ground truth per (vehicle, channel), the simulator's privileged view.
    pub fn truths(&self) -> BTreeMap<(VehicleId, Channel), f64> {
        let mut truths = BTreeMap::new();
        for (&id, pos) in &self.positions {
            for channel in Channel::ALL {
                truths.insert((id, channel), pos.channel(channel));
            }
        }
        truths
    }
}

/// Advances the world by one explicit Euler step of length `dt` seconds.
///
/// Longitudinal: `y += v(t) * dt` with the speed profile evaluated at the
/// left endpoint `t = step * dt`. Lateral: linear motion toward the scripted
/// lane-change target when one is active, otherwise a uniform jitter step
/// `x += u * dt`, `u ~ U(-b, b)`.
pub fn step_world(
    state: &WorldState,
    specs: &BTreeMap<VehicleId, VehicleSpec>,
    dt: f64,
    seed: RngSeed,
) -> WorldState {
    let s = state.step;
    let t = s as f64 * dt;
    let mut positions = BTreeMap::new();
    for (&id, pos) in &state.positions {
        let Some(spec) = specs.get(&id) else {
            positions.insert(id, *pos);
            continue;
        };
        let mut next = *pos;
        next.longitudinal += spec.longitudinal_speed.velocity(t) * dt;
        if let Some(lane) = spec.active_lane_change(s) {
            if s + 1 == lane.end_step {
                next.lateral = lane.target_lateral;
            } else {
                let remaining = (lane.end_step - s) as f64;
                next.lateral += (lane.target_lateral - next.lateral) / remaining;
            }
        } else if spec.lateral_jitter > 0.0 {
            let b = spec.lateral_jitter;
            let u: f64 = rng::jitter_stream(seed, id, s).gen_range(-b..b);
            next.lateral += u * dt;
        }
        positions.insert(id, next);
    }
    WorldState {
        step: s + 1,
        positions,
    }
}

/// Cloud membership: every vehicle whose planar distance to the anchor is
/// within `range` meters (the anchor itself included). The comparison
/// carries [`RANGE_BOUNDARY_TOLERANCE`] so exact boundary ties resolve as
/// "inside".
pub fn neighborhood(
    state: &WorldState,
    anchor: VehicleId,
    range: f64,
) -> Result<BTreeSet<VehicleId>, SimError> {
    let anchor_pos = state
        .position(anchor)
        .ok_or(SimError::UnknownAnchor(anchor))?;
    Ok(state
        .positions
        .iter()
        .filter(|(_, pos)| pos.distance_to(anchor_pos) <= range + RANGE_BOUNDARY_TOLERANCE)
        .map(|(&id, _)| id)
        .collect())
}

/// Uniformly random subset of `count` members, redrawn from the given
/// stream. Used to re-select the malicious uploaders each step.
pub fn select_malicious(
    rng: &mut impl Rng,
    membership: &BTreeSet<VehicleId>,
    count: usize,
) -> Result<BTreeSet<VehicleId>, SimError> {
    let mut pool: Vec<VehicleId> = membership.iter().copied().collect();
    if count > pool.len() {
        return Err(SimError::CountExceedsMembership {
            count,
            available: pool.len(),
        });
    }
    // Partial Fisher-Yates: the first `count` slots end up uniform.
    for i in 0..count {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    Ok(pool.into_iter().take(count).collect())
}

/// Whether measurement noise is drawn independently per upload or once per
/// uploader per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Independent draw per (uploader, target, channel, step).
    #[default]
    Independent,
    /// One draw per (uploader, channel, step), reused for every target.
    SharedPerUploader,
}

/// Attack values for trace step `step`: one value per (uploader, channel)
/// for every uploader in `active`, drawn from that uploader's spec.
/// Uploaders with [`AttackSpec::None`] contribute no entry.
pub fn attack_values(
    specs: &BTreeMap<VehicleId, VehicleSpec>,
    active: &BTreeSet<VehicleId>,
    channels: &[Channel],
    step: u64,
    seed: RngSeed,
) -> BTreeMap<(VehicleId, Channel), f64> {
    let mut values = BTreeMap::new();
    for &uploader in active {
        let Some(spec) = specs.get(&uploader) else {
            continue;
        };
        if spec.attack.is_none() {
            continue;
        }
        for &channel in channels {
            values.insert(
                (uploader, channel),
                spec.attack.value(uploader, channel, step, seed),
            );
        }
    }
    values
}

/// Stacks and upload records generated at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct UploadBatch {
    /// One stack per (target, channel), readings in canonical source order.
    pub stacks: BTreeMap<(VehicleId, Channel), MeasurementStack<f64>>,
    /// Flat record list, sorted by (uploader, target, channel).
    pub records: Vec<UploadRecord<f64>>,
}

/// Generates the uploads of one step: every member uploads, for every
/// `(target, channel)` present in `truths`, the value
/// `truth + noise + attack`, with noise uniform in the uploader's bound and
/// the attack value taken from `attacks` (zero when absent).
pub fn generate_uploads(
    truths: &BTreeMap<(VehicleId, Channel), f64>,
    membership: &BTreeSet<VehicleId>,
    specs: &BTreeMap<VehicleId, VehicleSpec>,
    attacks: &BTreeMap<(VehicleId, Channel), f64>,
    step: u64,
    seed: RngSeed,
    noise_mode: NoiseMode,
) -> Result<UploadBatch, SimError> {
    let mut stacks = BTreeMap::new();
    let mut records = Vec::new();
    for (&(target, channel), &truth) in truths {
        let mut readings = Vec::with_capacity(membership.len());
        for &uploader in membership {
            let spec = specs.get(&uploader).ok_or(SimError::MissingSpec(uploader))?;
            let bound = *spec
                .noise_bounds
                .get(&channel)
                .ok_or(SimError::MissingNoiseBound {
                    vehicle: uploader,
                    channel,
                })?;
            let noise = if bound > 0.0 {
                let target_key = match noise_mode {
                    NoiseMode::Independent => Some(target),
                    NoiseMode::SharedPerUploader => None,
                };
                rng::noise_stream(seed, uploader, target_key, channel, step)
                    .gen_range(-bound..bound)
            } else {
                0.0
            };
            let attack = attacks.get(&(uploader, channel)).copied().unwrap_or(0.0);
            let value = truth + noise + attack;
            readings.push((uploader, value));
            records.push(UploadRecord {
                uploader,
                target,
                channel,
                step,
                value,
            });
        }
        let stack = MeasurementStack::new(target, step, channel, readings)?;
        stacks.insert((target, channel), stack);
    }
    records.sort_by_key(|r| (r.uploader, r.target, r.channel));
    Ok(UploadBatch { stacks, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(id: u32, lateral: f64, longitudinal: f64, speed: SpeedProfile) -> VehicleSpec {
        VehicleSpec {
            id: VehicleId(id),
            initial_lateral: lateral,
            initial_longitudinal: longitudinal,
            longitudinal_speed: speed,
            lateral_jitter: 0.0,
            lane_changes: vec![],
            noise_bounds: [(Channel::Lateral, 0.0), (Channel::Longitudinal, 0.0)]
                .into_iter()
                .collect(),
            attack: AttackSpec::None,
        }
    }

    fn spec_map(specs: Vec<VehicleSpec>) -> BTreeMap<VehicleId, VehicleSpec> {
        specs.into_iter().map(|s| (s.id, s)).collect()
    }

    #[test]
    fn static_world_stays_put() {
        let specs = spec_map(vec![spec(1, 1.5, 0.0, SpeedProfile::constant(0.0))]);
        let world = WorldState::initial(&specs);
        let next = step_world(&world, &specs, 1.0, RngSeed(1));
        assert_eq!(next.position(VehicleId(1)), world.position(VehicleId(1)));
        assert_eq!(next.step(), 1);
    }

    #[test]
    fn one_euler_step_uses_left_endpoint() {
        let specs = spec_map(vec![spec(
            1,
            0.0,
            0.0,
            SpeedProfile {
                base: 30.0,
                amplitude: 1.0,
            },
        )]);
        let world = WorldState::initial(&specs);
        let next = step_world(&world, &specs, 1.0, RngSeed(1));
        // v(0) = 30 + sin(0) = 30, so one step of dt = 1 moves 30 m.
        assert_eq!(next.position(VehicleId(1)).unwrap().longitudinal, 30.0);
    }

    #[test]
    fn constant_speed_difference_closes_the_gap() {
        let specs = spec_map(vec![
            spec(
                1,
                1.5,
                0.0,
                SpeedProfile {
                    base: 30.0,
                    amplitude: 1.0,
                },
            ),
            spec(
                4,
                1.5,
                -200.0,
                SpeedProfile {
                    base: 35.0,
                    amplitude: 1.0,
                },
            ),
        ]);
        let mut world = WorldState::initial(&specs);
        for _ in 0..20 {
            world = step_world(&world, &specs, 1.0, RngSeed(1));
        }
        let gap = world.position(VehicleId(4)).unwrap().longitudinal
            - world.position(VehicleId(1)).unwrap().longitudinal;
        assert_abs_diff_eq!(gap, -100.0, epsilon = 1e-9);
    }

    #[test]
    fn lane_change_arrives_exactly() {
        let mut changing = spec(1, 1.5, 0.0, SpeedProfile::constant(0.0));
        changing.lane_changes = vec![LaneChange {
            start_step: 2,
            end_step: 5,
            target_lateral: 4.5,
        }];
        let specs = spec_map(vec![changing]);
        let mut world = WorldState::initial(&specs);
        let mut laterals = vec![world.position(VehicleId(1)).unwrap().lateral];
        for _ in 0..6 {
            world = step_world(&world, &specs, 1.0, RngSeed(1));
            laterals.push(world.position(VehicleId(1)).unwrap().lateral);
        }
        assert_eq!(laterals[0], 1.5);
        assert_eq!(laterals[1], 1.5);
        assert_eq!(laterals[2], 1.5);
        assert_abs_diff_eq!(laterals[3], 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(laterals[4], 3.5, epsilon = 1e-12);
        assert_eq!(laterals[5], 4.5);
        assert_eq!(laterals[6], 4.5);
    }

    #[test]
    fn neighborhood_excludes_far_vehicles() {
        let specs = spec_map(vec![
            spec(1, 1.5, 0.0, SpeedProfile::constant(0.0)),
            spec(4, 1.5, -200.0, SpeedProfile::constant(0.0)),
        ]);
        let world = WorldState::initial(&specs);
        let members = neighborhood(&world, VehicleId(1), 100.0).unwrap();
        assert_eq!(members, [VehicleId(1)].into_iter().collect());
    }

    #[test]
    fn neighborhood_includes_coincident_vehicles() {
        let specs = spec_map(vec![
            spec(1, 0.0, 0.0, SpeedProfile::constant(0.0)),
            spec(2, 0.0, 0.0, SpeedProfile::constant(0.0)),
            spec(3, 0.0, 0.0, SpeedProfile::constant(0.0)),
        ]);
        let world = WorldState::initial(&specs);
        let members = neighborhood(&world, VehicleId(2), 1.0).unwrap();
        assert_eq!(members.len(), 3);
        assert!(neighborhood(&world, VehicleId(9), 1.0).is_err());
    }

    #[test]
    fn select_malicious_edges() {
        let membership: BTreeSet<VehicleId> = (1..=5).map(VehicleId).collect();
        let mut r = rng::selection_stream(RngSeed(3), 1);
        assert!(select_malicious(&mut r, &membership, 0).unwrap().is_empty());
        assert_eq!(
            select_malicious(&mut r, &membership, 5).unwrap(),
            membership
        );
        assert!(matches!(
            select_malicious(&mut r, &membership, 6),
            Err(SimError::CountExceedsMembership { .. })
        ));
    }

    #[test]
    fn select_malicious_is_roughly_uniform() {
        let membership: BTreeSet<VehicleId> = (1..=5).map(VehicleId).collect();
        let mut hits: BTreeMap<VehicleId, u32> = membership.iter().map(|&v| (v, 0)).collect();
        let steps = 10_000;
        for step in 0..steps {
            let mut r = rng::selection_stream(RngSeed(42), step);
            for v in select_malicious(&mut r, &membership, 2).unwrap() {
                *hits.get_mut(&v).unwrap() += 1;
            }
        }
        for (&v, &count) in &hits {
            let rate = f64::from(count) / steps as f64;
            assert!(
                (rate - 0.4).abs() <= 0.02,
                "vehicle {v} selected at rate {rate}"
            );
        }
    }

    #[test]
    fn noiseless_upload_equals_truth() {
        let specs = spec_map(vec![spec(1, 1.5, 7.0, SpeedProfile::constant(0.0))]);
        let world = WorldState::initial(&specs);
        let membership: BTreeSet<VehicleId> = [VehicleId(1)].into_iter().collect();
        let batch = generate_uploads(
            &world.truths(),
            &membership,
            &specs,
            &BTreeMap::new(),
            1,
            RngSeed(1),
            NoiseMode::Independent,
        )
        .unwrap();
        assert_eq!(batch.records.len(), 2);
        let lateral = &batch.stacks[&(VehicleId(1), Channel::Lateral)];
        assert_eq!(lateral.value(0).unwrap(), 1.5);
        let longitudinal = &batch.stacks[&(VehicleId(1), Channel::Longitudinal)];
        assert_eq!(longitudinal.value(0).unwrap(), 7.0);
    }

    #[test]
    fn exactly_the_attacked_uploads_are_corrupted() {
        // Five uploaders with graded noise bounds, two of them attacking
        // with large Gaussians: exactly two readings leave the honest band.
        let truth_lateral = 1.5;
        let mut specs = Vec::new();
        for i in 1..=5u32 {
            let mut s = spec(i, truth_lateral, 0.0, SpeedProfile::constant(0.0));
            s.noise_bounds = [(Channel::Lateral, 0.01 * f64::from(i))].into_iter().collect();
            specs.push(s);
        }
        specs[3].attack = AttackSpec::Gaussian { sigma: 5.0 };
        specs[4].attack = AttackSpec::Gaussian { sigma: 5.0 };
        let specs = spec_map(specs);
        let membership: BTreeSet<VehicleId> = (1..=5).map(VehicleId).collect();
        let active: BTreeSet<VehicleId> = [VehicleId(4), VehicleId(5)].into_iter().collect();

        let truths: BTreeMap<_, _> =
            [((VehicleId(1), Channel::Lateral), truth_lateral)].into_iter().collect();
        let attacks = attack_values(&specs, &active, &[Channel::Lateral], 1, RngSeed(9));
        assert_eq!(attacks.len(), 2);

        let batch = generate_uploads(
            &truths,
            &membership,
            &specs,
            &attacks,
            1,
            RngSeed(9),
            NoiseMode::Independent,
        )
        .unwrap();
        let stack = &batch.stacks[&(VehicleId(1), Channel::Lateral)];
        assert_eq!(stack.len(), 5);
        let outliers = stack
            .values()
            .filter(|v| (v - truth_lateral).abs() > 0.05)
            .count();
        assert_eq!(outliers, 2);
    }

    #[test]
    fn honest_uploads_stay_within_their_bound() {
        let mut honest = spec(3, 2.0, 10.0, SpeedProfile::constant(0.0));
        honest.noise_bounds = [(Channel::Lateral, 0.02), (Channel::Longitudinal, 0.5)]
            .into_iter()
            .collect();
        let specs = spec_map(vec![honest]);
        let membership: BTreeSet<VehicleId> = [VehicleId(3)].into_iter().collect();
        let truths: BTreeMap<_, _> = [
            ((VehicleId(3), Channel::Lateral), 2.0),
            ((VehicleId(3), Channel::Longitudinal), 10.0),
        ]
        .into_iter()
        .collect();
        for step in 1..=10_000u64 {
            let batch = generate_uploads(
                &truths,
                &membership,
                &specs,
                &BTreeMap::new(),
                step,
                RngSeed(5),
                NoiseMode::Independent,
            )
            .unwrap();
            for r in &batch.records {
                let bound = match r.channel {
                    Channel::Lateral => 0.02,
                    Channel::Longitudinal => 0.5,
                };
                let truth = truths[&(r.target, r.channel)];
                assert!((r.value - truth).abs() <= bound);
            }
        }
    }

    #[test]
    fn shared_noise_mode_reuses_one_draw_per_uploader() {
        let mut a = spec(1, 0.0, 0.0, SpeedProfile::constant(0.0));
        a.noise_bounds = [(Channel::Lateral, 0.5)].into_iter().collect();
        let mut b = spec(2, 1.0, 0.0, SpeedProfile::constant(0.0));
        b.noise_bounds = [(Channel::Lateral, 0.5)].into_iter().collect();
        let specs = spec_map(vec![a, b]);
        let membership: BTreeSet<VehicleId> = [VehicleId(1), VehicleId(2)].into_iter().collect();
        let truths: BTreeMap<_, _> = [
            ((VehicleId(1), Channel::Lateral), 0.0),
            ((VehicleId(2), Channel::Lateral), 1.0),
        ]
        .into_iter()
        .collect();
        let batch = generate_uploads(
            &truths,
            &membership,
            &specs,
            &BTreeMap::new(),
            1,
            RngSeed(2),
            NoiseMode::SharedPerUploader,
        )
        .unwrap();
        // Each uploader's noise is identical across targets.
        let noise_of = |uploader: u32, target: u32| {
            let record = batch
                .records
                .iter()
                .find(|r| r.uploader == VehicleId(uploader) && r.target == VehicleId(target))
                .unwrap();
            record.value - truths[&(record.target, record.channel)]
        };
        assert_eq!(noise_of(1, 1), noise_of(1, 2));
        assert_eq!(noise_of(2, 1), noise_of(2, 2));
        assert_ne!(noise_of(1, 1), noise_of(2, 1));
    }

    #[test]
    fn series_attack_indexes_by_step() {
        let attack = AttackSpec::Series {
            values: vec![1.0, -2.0],
        };
        let seed = RngSeed(1);
        assert_eq!(attack.value(VehicleId(1), Channel::Lateral, 1, seed), 1.0);
        assert_eq!(attack.value(VehicleId(1), Channel::Lateral, 2, seed), -2.0);
        assert_eq!(attack.value(VehicleId(1), Channel::Lateral, 3, seed), 0.0);
    }
}
