#![allow(dead_code)]
pub mod checks;
pub mod oracle;

use std::sync::Arc;

use railsym::integrator::{Integrator, SolverState, StepConfig};
use railsym::vehicle::{build_model, bundled, CompiledModel, TrackSpec, VehicleConfig};

pub fn straight() -> Arc<railsym::contact::TrackGeometry> {
    Arc::new(
        TrackSpec::parse(bundled::STRAIGHT_TRACK)
            .unwrap()
            .compile()
            .unwrap(),
    )
}

pub fn wheelset_text() -> String {
    bundled::WHEELSET.to_string()
}

pub fn model_from(text: &str) -> CompiledModel {
    build_model(&VehicleConfig::from_toml(text).unwrap(), straight()).unwrap()
}

pub struct Desk {
    pub model: CompiledModel,
    pub int: Integrator,
}

impl Desk {
    pub fn new(config: StepConfig) -> Self {
        Self::from_text(&wheelset_text(), config)
    }

    pub fn from_text(text: &str, config: StepConfig) -> Self {
        let model = model_from(text);
        let int = Integrator::new(model.plant(), config);
        Desk { model, int }
    }

    pub fn q(&self, name: &str) -> usize {
        self.model.coord_index(&format!("wheelset.{name}")).unwrap()
    }

    /// Consistent state rolling at `speed` with the given lateral offset and
    /// yaw; the spin rate is `spin_factor · speed / r0`.
    pub fn state(&mut self, y: f64, yaw: f64, speed: f64, spin_factor: f64) -> SolverState {
        let sym = self.model.dynamics.symbols.clone();
        let mut x = self.model.reference.clone();
        x[sym.q[self.q("y")].index()] = y;
        x[sym.q[self.q("yaw")].index()] = yaw;
        x[sym.dq[self.q("x")].index()] = speed;
        x[sym.dq[self.q("spin")].index()] = spin_factor * speed / 0.45;
        self.int.initialize(x, 0.0).unwrap()
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
