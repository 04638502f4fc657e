//! Derived randomness substreams.
//!
//! Every random draw in a run comes from its own ChaCha stream, seeded by
//! mixing the master seed with the draw's identity (purpose, entity, step,
//! channel). Draws therefore do not depend on evaluation order, which makes
//! traces bit-reproducible regardless of how callers schedule the work.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::stack::{Channel, VehicleId};

/// Master seed of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSeed(pub u64);

/// What a substream is used for. Part of the stream identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    /// In-lane lateral speed jitter while advancing the world.
    LateralJitter,
    /// Fresh per-step perturbation of a static ground truth.
    TruthJitter,
    /// Honest measurement disturbance of an upload.
    MeasurementNoise,
    /// Attack value injected by a malicious uploader.
    AttackDraw,
    /// Per-step choice of which uploaders turn malicious.
    MaliciousSelect,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::LateralJitter => 1,
            StreamPurpose::TruthJitter => 2,
            StreamPurpose::MeasurementNoise => 3,
            StreamPurpose::AttackDraw => 4,
            StreamPurpose::MaliciousSelect => 5,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(seed: RngSeed, purpose: StreamPurpose, parts: &[u64]) -> u64 {
    let mut h = splitmix64(seed.0 ^ 0xA076_1D64_78BD_642F);
    h = splitmix64(h ^ purpose.tag());
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

fn channel_tag(channel: Channel) -> u64 {
    match channel {
        Channel::Lateral => 1,
        Channel::Longitudinal => 2,
    }
}

/// Stream for one vehicle's lateral jitter while advancing from world step
/// `step` to `step + 1`.
pub fn jitter_stream(seed: RngSeed, vehicle: VehicleId, step: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(
        seed,
        StreamPurpose::LateralJitter,
        &[u64::from(vehicle.0), step],
    ))
}

/// Stream for the fresh ground-truth perturbation of `vehicle` at trace
/// step `step`.
pub fn truth_stream(seed: RngSeed, vehicle: VehicleId, step: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(
        seed,
        StreamPurpose::TruthJitter,
        &[u64::from(vehicle.0), step],
    ))
}

/// Stream for the measurement noise of one upload. The `target` is part of
/// the identity only in independent-noise mode; shared mode passes `None`
/// so every upload of the same uploader reuses one draw.
pub fn noise_stream(
    seed: RngSeed,
    uploader: VehicleId,
    target: Option<VehicleId>,
    channel: Channel,
    step: u64,
) -> ChaCha8Rng {
    let target_tag = target.map_or(0, |t| 1 + u64::from(t.0));
    ChaCha8Rng::seed_from_u64(mix(
        seed,
        StreamPurpose::MeasurementNoise,
        &[u64::from(uploader.0), target_tag, channel_tag(channel), step],
    ))
}

/// Stream for the attack value of one uploader on one channel at one step.
pub fn attack_stream(seed: RngSeed, uploader: VehicleId, channel: Channel, step: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(
        seed,
        StreamPurpose::AttackDraw,
        &[u64::from(uploader.0), channel_tag(channel), step],
    ))
}

/// Stream for the per-step malicious-uploader selection.
pub fn selection_stream(seed: RngSeed, step: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, StreamPurpose::MaliciousSelect, &[step]))
}
