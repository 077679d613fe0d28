//! Wheel-rail contact: spline surfaces, contact constraints and frames,
//! Hertz patch and Kalker linear creep.

mod geometry;
mod patch;
mod runtime;
mod spline;
mod tables;

pub use geometry::{
    build_contact, ContactExprs, ContactFrames, ContactSetup, ContactSymbols, SymCubic,
};
pub use patch::{
    hertz_patch, kalker_entries, kalker_forces, kalker_matrix, saturation_scale, ContactPatch,
    Curvatures, Material, PatchError,
};
pub use runtime::{ContactProfiles, TrackGeometry};
pub use spline::{CubicSpline, SplineError, SplineEval};
pub use tables::{HertzTable, KalkerTable, MonotoneCubic, TableError};

/// Default creepage denominator cutoff, m/s.
pub const DEFAULT_V_MIN: f64 = 1e-3;
