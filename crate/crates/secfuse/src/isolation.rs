//! Residual-based isolation of malicious uploaders.
//!
//! Once fused estimates exist for every tracked vehicle, each uploader is
//! judged by the residuals between its uploads and the estimates of the
//! corresponding targets. With honest noise bounded by a known per-channel
//! `gamma` and the fusion error bounded by `3 * gamma`, an honest uploader's
//! residuals never exceed `4 * gamma`; any residual strictly above that
//! threshold marks the uploader malicious. An injected corruption larger
//! than `8 * gamma` in magnitude forces a residual above the threshold, so
//! such uploads are always caught.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::scalar::Scalar;
use crate::stack::{Channel, VehicleId};

/// Errors from the isolation step.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IsolationError {
    #[error("no fused estimate for target {target} on channel {channel}")]
    MissingEstimate { target: VehicleId, channel: Channel },
    #[error("no noise bound configured for channel {0}")]
    MissingGamma(Channel),
    #[error("no measuring set provided for member {0}")]
    MissingNeighborhood(VehicleId),
    #[error("noise bound for channel {channel} must be positive, got {value}")]
    NonPositiveGamma { channel: Channel, value: f64 },
}

/// Known per-channel bounds on honest disturbance magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaBounds<S> {
    bounds: BTreeMap<Channel, S>,
}

impl<S: Scalar> GammaBounds<S> {
    /// Builds the bounds, requiring every value to be strictly positive.
    pub fn new(bounds: BTreeMap<Channel, S>) -> Result<Self, IsolationError> {
        for (&channel, &gamma) in &bounds {
            if gamma.partial_cmp(&S::zero()) != Some(std::cmp::Ordering::Greater) {
                return Err(IsolationError::NonPositiveGamma {
                    channel,
                    value: gamma.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self { bounds })
    }

    /// The bound for one channel, if configured.
    pub fn get(&self, channel: Channel) -> Option<S> {
        self.bounds.get(&channel).copied()
    }

    /// Channels with a configured bound.
    pub fn channels(&self) -> impl Iterator<Item = Channel> + '_ {
        self.bounds.keys().copied()
    }

    /// The flagging threshold `4 * gamma` for one channel.
    pub fn flag_threshold(&self, channel: Channel) -> Option<S> {
        let four = S::from_u8(4).expect("4 is representable");
        self.get(channel).map(|g| four * g)
    }
}

/// Per-channel magnitude `8 * gamma` above which an injected corruption is
/// guaranteed to be flagged at the step it occurs.
pub fn guaranteed_detection_threshold<S: Scalar>(bounds: &GammaBounds<S>) -> BTreeMap<Channel, S> {
    let eight = S::from_u8(8).expect("8 is representable");
    bounds
        .channels()
        .map(|c| (c, eight * bounds.get(c).expect("listed channel")))
        .collect()
}

/// One received upload: `uploader` reporting the state of `target` on
/// `channel` at `step` (its own state when `uploader == target`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UploadRecord<S> {
    pub uploader: VehicleId,
    pub target: VehicleId,
    pub channel: Channel,
    pub step: u64,
    pub value: S,
}

/// Worst residual one uploader produced on one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualEvidence<S> {
    pub channel: Channel,
    /// Target whose estimate the worst residual was measured against.
    pub target: VehicleId,
    pub max_residual: S,
    /// The `4 * gamma` threshold for this channel.
    pub threshold: S,
    pub exceeded: bool,
}

/// Outcome of isolating one step: which members were flagged as malicious,
/// with the worst residual per member and channel as evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationReport<S> {
    pub step: u64,
    pub flagged: BTreeSet<VehicleId>,
    /// Per member, the worst residual on each channel it uploaded (entries
    /// are sorted by channel). Members that uploaded nothing have no entries.
    pub evidence: BTreeMap<VehicleId, Vec<ResidualEvidence<S>>>,
}

impl<S: Scalar> IsolationReport<S> {
    /// The single most damning evidence entry for a member: the entry whose
    /// residual is largest relative to its channel threshold.
    pub fn worst_evidence(&self, vehicle: VehicleId) -> Option<&ResidualEvidence<S>> {
        self.evidence.get(&vehicle).and_then(|entries| {
            entries.iter().reduce(|best, e| {
                if e.max_residual * best.threshold > best.max_residual * e.threshold {
                    e
                } else {
                    best
                }
            })
        })
    }
}

/// Absolute difference between a fused estimate and an upload.
pub fn residual<S: Scalar>(estimate: S, upload: S) -> S {
    (estimate - upload).abs()
}

/// Judges every member of `membership` at one step.
///
/// A member is flagged iff one of its uploads about a target in its
/// measuring set has a residual strictly above `4 * gamma` for that
/// channel. Uploads from non-members, or about targets outside the
/// uploader's measuring set, are ignored.
pub fn isolate_step<S: Scalar>(
    step: u64,
    estimates: &BTreeMap<(VehicleId, Channel), S>,
    uploads: &[UploadRecord<S>],
    bounds: &GammaBounds<S>,
    membership: &BTreeSet<VehicleId>,
    neighborhoods: &BTreeMap<VehicleId, BTreeSet<VehicleId>>,
) -> Result<IsolationReport<S>, IsolationError> {
    let mut evidence: BTreeMap<VehicleId, BTreeMap<Channel, ResidualEvidence<S>>> = membership
        .iter()
        .map(|&m| (m, BTreeMap::new()))
        .collect();

    for member in membership {
        if !neighborhoods.contains_key(member) {
            return Err(IsolationError::MissingNeighborhood(*member));
        }
    }

    for upload in uploads {
        if !membership.contains(&upload.uploader) {
            continue;
        }
        let measures = &neighborhoods[&upload.uploader];
        if !measures.contains(&upload.target) {
            continue;
        }
        let threshold = bounds
            .flag_threshold(upload.channel)
            .ok_or(IsolationError::MissingGamma(upload.channel))?;
        let estimate = *estimates
            .get(&(upload.target, upload.channel))
            .ok_or(IsolationError::MissingEstimate {
                target: upload.target,
                channel: upload.channel,
            })?;
        let r = residual(estimate, upload.value);

        let per_channel = evidence.get_mut(&upload.uploader).expect("member present");
        match per_channel.get_mut(&upload.channel) {
            Some(entry) if r <= entry.max_residual => {}
            Some(entry) => {
                entry.max_residual = r;
                entry.target = upload.target;
                entry.exceeded = r > threshold;
            }
            None => {
                per_channel.insert(
                    upload.channel,
                    ResidualEvidence {
                        channel: upload.channel,
                        target: upload.target,
                        max_residual: r,
                        threshold,
                        exceeded: r > threshold,
                    },
                );
            }
        }
    }

    let mut flagged = BTreeSet::new();
    let evidence: BTreeMap<VehicleId, Vec<ResidualEvidence<S>>> = evidence
        .into_iter()
        .map(|(vehicle, per_channel)| {
            let entries: Vec<_> = per_channel.into_values().collect();
            if entries.iter().any(|e| e.exceeded) {
                flagged.insert(vehicle);
            }
            (vehicle, entries)
        })
        .collect();

    Ok(IsolationReport {
        step,
        flagged,
        evidence,
    })
}
