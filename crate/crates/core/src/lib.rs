//! Point vortices on the catenoid.
//!
//! The catenoid of neck radius `a` is parametrised by height `v` and azimuth
//! `u`. Vortices move under the Hamiltonian built from the surface's Green
//! function; the crate integrates the N-vortex flow, reduces the same-sign
//! pair to a quadrature, and provides closed forms for the rigidly rotating
//! antipodal pair.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod geometry;
pub mod integrator;
pub mod numerics;
pub mod reduction;

pub use dynamics::{Invariants, PhaseVelocity, VortexSystem};
pub use error::{Error, Result};
pub use geometry::{CatenoidParams, EmbeddedPoint, SurfacePoint};
pub use integrator::{integrate, IntegratorSettings, Trajectory};
