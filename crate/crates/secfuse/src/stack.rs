//! Core domain types: vehicle identities, state channels, measurement
//! stacks, and subset indices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Identifier of a vehicle (or any uploader identity) in the cloud.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl std::fmt::Display for VehicleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Scalar state channel of a vehicle. Positions are in meters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// Lateral (cross-lane) position.
    Lateral,
    /// Longitudinal (along-lane) position.
    Longitudinal,
}

impl Channel {
    /// Both channels, in canonical order.
    pub const ALL: [Channel; 2] = [Channel::Lateral, Channel::Longitudinal];

    pub fn name(&self) -> &'static str {
        match self {
            Channel::Lateral => "lateral",
            Channel::Longitudinal => "longitudinal",
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lateral" => Ok(Channel::Lateral),
            "longitudinal" => Ok(Channel::Longitudinal),
            other => Err(format!("unknown channel `{other}`")),
        }
    }
}

/// Error building a [`MeasurementStack`] or [`SubsetIndex`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StackError {
    #[error("a measurement stack needs at least one reading")]
    Empty,
    #[error("duplicate source {0} in measurement stack")]
    DuplicateSource(VehicleId),
    #[error("non-finite reading from source {0}")]
    NonFiniteReading(VehicleId),
    #[error("a subset index must have at least one member")]
    EmptySubset,
    #[error("duplicate member position {0} in subset index")]
    DuplicateMember(usize),
}

/// All received copies of one scalar state channel of one vehicle at one
/// time step: the vehicle's own upload plus the relative measurements its
/// neighbours uploaded.
///
/// Readings are kept in canonical order (ascending source id) so that subset
/// positions are reproducible across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementStack<S> {
    target: VehicleId,
    step: u64,
    channel: Channel,
    readings: Vec<(VehicleId, S)>,
}

impl<S: Scalar> MeasurementStack<S> {
    /// Builds a stack from `(source, value)` pairs, sorting them into
    /// canonical order. Fails on duplicate sources, non-finite values, or an
    /// empty list.
    pub fn new(
        target: VehicleId,
        step: u64,
        channel: Channel,
        mut readings: Vec<(VehicleId, S)>,
    ) -> Result<Self, StackError> {
        if readings.is_empty() {
            return Err(StackError::Empty);
        }
        readings.sort_by_key(|(source, _)| *source);
        for pair in readings.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(StackError::DuplicateSource(pair[0].0));
            }
        }
        if let Some((source, _)) = readings.iter().find(|(_, v)| !v.is_finite()) {
            return Err(StackError::NonFiniteReading(*source));
        }
        Ok(Self {
            target,
            step,
            channel,
            readings,
        })
    }

    /// Vehicle whose state this stack measures.
    pub fn target(&self) -> VehicleId {
        self.target
    }

    /// Time step the readings were collected at.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// State channel the readings belong to.
    pub fn channel(&self) -> Channel {
        self.channel
    }

    /// Number of readings `N`.
    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    /// Readings in canonical (ascending source id) order.
    pub fn readings(&self) -> &[(VehicleId, S)] {
        &self.readings
    }

    /// Value at a canonical position.
    pub fn value(&self, position: usize) -> Option<S> {
        self.readings.get(position).map(|(_, v)| *v)
    }

    /// Source at a canonical position.
    pub fn source(&self, position: usize) -> Option<VehicleId> {
        self.readings.get(position).map(|(s, _)| *s)
    }

    /// Values only, in canonical order.
    pub fn values(&self) -> impl Iterator<Item = S> + '_ {
        self.readings.iter().map(|(_, v)| *v)
    }

    /// Sources only, in canonical order.
    pub fn sources(&self) -> impl Iterator<Item = VehicleId> + '_ {
        self.readings.iter().map(|(s, _)| *s)
    }
}

/// Sorted set of zero-based positions into a stack's canonical readings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubsetIndex {
    members: Vec<usize>,
}

impl SubsetIndex {
    /// Builds a subset index, sorting the positions. Fails on duplicates or
    /// an empty list.
    pub fn new(mut members: Vec<usize>) -> Result<Self, StackError> {
        if members.is_empty() {
            return Err(StackError::EmptySubset);
        }
        members.sort_unstable();
        for pair in members.windows(2) {
            if pair[0] == pair[1] {
                return Err(StackError::DuplicateMember(pair[0]));
            }
        }
        Ok(Self { members })
    }

    /// Member positions in ascending order.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Number of members.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Largest position referenced.
    pub fn max_position(&self) -> usize {
        *self.members.last().expect("subset is never empty")
    }

    pub fn contains(&self, position: usize) -> bool {
        self.members.binary_search(&position).is_ok()
    }

    /// Maps positions through a stack to the source ids they select.
    pub fn sources<S: Scalar>(&self, stack: &MeasurementStack<S>) -> Vec<VehicleId> {
        self.members
            .iter()
            .filter_map(|&p| stack.source(p))
            .collect()
    }
}

impl std::fmt::Display for SubsetIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for m in &self.members {
            if !first {
                write!(f, ";")?;
            }
            write!(f, "{m}")?;
            first = false;
        }
        Ok(())
    }
}
