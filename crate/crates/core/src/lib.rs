//! Active element pattern (AEP) estimation for planar arrays.
//!
//! The crate estimates the per-port current distributions of an `Nx x Ny`
//! array from two one-dimensional full-wave solves. Each 1-D solve is
//! normalized by the isolated-element currents into per-mesh transfer
//! matrices; the u- and v-axis matrices are combined with a Kronecker
//! product and applied back to the isolated currents. The far field of the
//! estimated currents gives the AEPs.
//!
//! Alongside the estimator live the pieces needed to check it: a thin-wire
//! method-of-moments solver ([`mom`]) that also serves as the full 2-D
//! reference, far-field and beam-synthesis routines ([`farfield`]), and
//! error and cost metrics ([`metrics`]).
//!
//! Conventions used throughout:
//!
//! * time dependence `exp(+jωt)`; far-field phase `exp(+j k0 û·r)`;
//! * ports are 1-based and u-major, `k = (u-1)·ny + v`, so the flattened
//!   port vector matches `C_u ⊗ C_v`;
//! * the x axis is the u axis and y is the v axis.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomp;
pub mod error;
pub mod farfield;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod mom;
pub mod pipeline;
pub mod scenario;

pub use error::{Error, Result};
pub use geometry::{ArrayLattice, Axis, ElementMesh, Segment, SPEED_OF_LIGHT};
pub use nalgebra::Vector3;

/// Complex double used for every field, current and impedance value.
pub type C64 = num_complex::Complex<f64>;
