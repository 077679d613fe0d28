//! Time integration: IMEX stepping, constraint projections and the dense
//! linear algebra they rely on.
mod linalg;
mod step;

pub use linalg::{FullPivLu, LuError, Matrix};
pub use step::{
    imex_system, Integrator, Phase, PhaseTimes, Plant, Scheme, SolverState, StepConfig, StepError,
    StepReport,
};
