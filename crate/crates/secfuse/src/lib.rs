//! Resilient fusion of redundant vehicle-state uploads, isolation of
//! malicious uploaders, and a deterministic scenario simulator.
//!
//! A shared cloud collects several copies of each tracked vehicle's scalar
//! state per step: the vehicle's own upload plus relative measurements from
//! the vehicles around it. Some uploaders may corrupt everything they send
//! with arbitrary values. The crate provides:
//!
//! - [`fusion`]: the subset-spread estimator. Among all subsets of size
//!   `N - q` of a stack of `N` readings it picks the one whose readings
//!   cluster tightest around their own mean and returns that mean. Whenever
//!   at most `q` readings are corrupted and `2q < N`, the estimate lands
//!   within three times the worst honest-noise magnitude of the truth, no
//!   matter what the corrupted readings contain. [`fusion::construct_ambiguity`]
//!   shows the bound `2q < N` is tight: beyond it, two different states can
//!   explain identical observations.
//! - [`isolation`]: the residual test. With a known per-channel noise bound
//!   `gamma`, an uploader whose upload strays more than `4 * gamma` from the
//!   fused estimate of the corresponding target is flagged as malicious;
//!   honest uploaders never trip that threshold, and injected values above
//!   `8 * gamma` always do.
//! - [`sim`]: seeded, substream-derived simulation of vehicle motion,
//!   range-based cloud membership, and corrupted uploads.
//! - [`pipeline`]: per-step orchestration and whole-run traces.
//! - [`config`] / [`trace`]: scenario files, built-in scenarios, and CSV
//!   trace emission for the `secfuse` binary.
//!
//! Fusion and isolation are generic over the scalar type (see
//! [`scalar::Scalar`]); the simulator, pipeline, and CLI fix `f64`. The
//! aliases below name the double-precision instantiations.

pub mod config;
pub mod fusion;
pub mod isolation;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod stack;
pub mod trace;

pub use stack::{Channel, MeasurementStack, SubsetIndex, VehicleId};

/// Double-precision measurement stack, as produced by the simulator.
pub type MeasurementStack64 = stack::MeasurementStack<f64>;
/// Double-precision fusion outcome.
pub type FusionOutcome64 = fusion::FusionOutcome<f64>;
/// Double-precision ambiguity witness.
pub type AmbiguityWitness64 = fusion::AmbiguityWitness<f64>;
/// Double-precision per-channel noise bounds.
pub type GammaBounds64 = isolation::GammaBounds<f64>;
/// Double-precision upload record.
pub type UploadRecord64 = isolation::UploadRecord<f64>;
/// Double-precision isolation report.
pub type IsolationReport64 = isolation::IsolationReport<f64>;
