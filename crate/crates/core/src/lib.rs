//! Symbolic multibody modeling for real-time rail vehicle simulation.
//!
//! The crate is layered bottom-up:
//!
//! * [`symcore`]: hash-consed expressions, differentiation, evaluation tapes.
//! * [`mechkin`]: bases and points trees with recursive kinematic operators.
//! * [`contact`]: spline wheel/rail geometry, Hertz patch, Kalker creep.
//! * [`dynamics`]: virtual-power assembly and the exported model functions.
//! * [`integrator`]: IMEX stepping, projections and full-pivot LU.
//! * [`vehicle`]: config-driven model building and track description files.

// `!(x > 0.0)` rejects NaN on purpose; dense numerics read better indexed
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod contact;
pub mod dynamics;
pub mod integrator;
pub mod mechkin;
pub mod symcore;
pub mod vehicle;
