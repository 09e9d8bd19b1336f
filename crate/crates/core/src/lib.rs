//! Step-two Carnot groups: heat and Lévy-perturbed kernels, Ornstein–Uhlenbeck semigroups,
//! exact polynomial calculus, Weyl transforms and Monte Carlo paths.

// Quadrature tables keep their published digits; `!(x > 0.0)` is the NaN-rejecting idiom here.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod group;
pub mod hermite;
pub mod kernel;
pub mod levy;
pub mod mc;
pub mod poly;
pub mod quad;
pub mod semigroup;
pub mod spectral;

pub use error::{CarnotError, Result};
pub use group::{homogeneous_norm, CarnotGroup, GroupElement, GroupSpec};
pub use levy::{JumpSpec, LevyExponent, LevySpec};
pub use poly::{GradedPolynomial, RatPoly};
pub use spectral::{frame_at, SpectralFrame};
