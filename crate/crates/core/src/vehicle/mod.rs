//! Vehicle and track description files, and the model builder.

mod builder;
mod config;
mod track;

use thiserror::Error;

pub use builder::{build_model, BodyInfo, CompiledModel, TorqueInfo, WheelInfo};
pub use config::{
    Attach, BodyConfig, Dof, ForceConfig, MaterialConfig, ProfileConfig, VehicleConfig,
    WheelsetConfig,
};
pub use track::{Irregularity, Segment, TrackSpec};

use crate::dynamics::DynError;
use crate::symcore::SymError;

/// Bundled description files.
pub mod bundled {
    pub const WHEELSET: &str = include_str!("../../data/wheelset.toml");
    pub const LOCOMOTIVE: &str = include_str!("../../data/locomotive.toml");
    pub const STRAIGHT_TRACK: &str = include_str!("../../data/straight.track");
    pub const IRREGULAR_TRACK: &str = include_str!("../../data/irregular.track");
    pub const CURVED_TRACK: &str = include_str!("../../data/curved.track");
}

#[derive(Debug, Error)]
pub enum VehicleError {
    #[error("vehicle file: {0}")]
    Parse(String),
    #[error("track file line {line}: {msg}")]
    Track { line: usize, msg: String },
    #[error("vehicle model: {0}")]
    Schema(String),
    #[error(transparent)]
    Dynamics(#[from] DynError),
}

impl From<SymError> for VehicleError {
    fn from(e: SymError) -> Self {
        VehicleError::Dynamics(DynError::Sym(e))
    }
}
