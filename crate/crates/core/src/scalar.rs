//! Scalar abstraction for all probability, entropy, and rate arithmetic.

use core::fmt::{Debug, Display};
use core::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar used for probabilities, entropies (bits), and rates:
/// `f32` or `f64`. All core math is generic over this trait; concrete aliases
/// for the `f64` instantiation live at the crate root.
pub trait Real: Float + FromPrimitive + Sum + Debug + Display + 'static {}

impl<T> Real for T where T: Float + FromPrimitive + Sum + Debug + Display + 'static {}

/// Converts an `f64` constant into the working scalar type.
pub(crate) fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("f64 constant must be representable in the scalar type")
}

/// Tolerance for "sums to one" checks on probability vectors. `1e-12` for
/// `f64`; widened to a small multiple of the machine epsilon for coarser
/// scalar types where `1e-12` is unrepresentable slack.
pub(crate) fn stochastic_tolerance<F: Real>() -> F {
    real::<F>(1e-12).max(F::epsilon() * real(32.0))
}
