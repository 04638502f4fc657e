//! Scalar abstraction for the fusion and isolation math.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the estimator operates on (`f32` or `f64`).
///
/// All fusion and isolation routines are generic over this trait; the
/// simulator, pipeline, and CLI fix `f64`.
pub trait Scalar: Float + FromPrimitive + Debug + Display + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + Debug + Display + 'static {}
