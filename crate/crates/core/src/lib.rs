//! Observer-based space-time splitting for numerical general relativity.
//!
//! The crate maps what an observer sees on its past light cone into observer
//! coordinates `(cτ, x⃗)`, tracks relative motion in those coordinates, and
//! decomposes the resulting relative force into actual and pseudo forces.
//!
//! Layers, bottom up:
//! - [`lorentz`]: closed-form Lorentz-space linear algebra.
//! - [`spacetime`]: charts, metrics, connection and curvature.
//! - [`ode`]: adaptive Dormand–Prince integration with dense output.
//! - [`geodesic`]: geodesics, parallel transport, exp, Jacobi fields.
//! - [`observer`]: observer worldlines and Fermi–Walker frames.
//! - [`splitting`]: observer mappings, inversion, relative motion and forces.
//! - [`newtlimit`]: series in `1/c` and Newtonian-limit checks.
//! - [`cli`]: scenario files and the command implementations.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod geodesic;
pub mod lorentz;
pub mod newtlimit;
pub mod observer;
pub mod ode;
pub mod spacetime;
pub mod splitting;

pub use error::{Error, Result};
pub use lorentz::{Frame4, Mat4, Metric4, Vec4};
pub use spacetime::{Chart, Event, Minkowski, Schwarzschild};
