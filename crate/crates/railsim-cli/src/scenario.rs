//! Scenario files: initial conditions, duration and the motor torque
//! schedule.

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Initial forward speed, m/s.
    #[serde(default)]
    pub speed: f64,
    /// Initial lateral offset of every free body, m.
    #[serde(default)]
    pub lateral_offset: f64,
    /// Simulated time, s.
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Write every n-th step.
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    #[serde(default, rename = "torque")]
    pub torques: Vec<TorqueSchedule>,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_decimation() -> usize {
    10
}

/// Torque `value` (N·m) applied from `start`, reached linearly over `ramp`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TorqueSchedule {
    pub name: String,
    pub value: f64,
    #[serde(default)]
    pub start: f64,
    #[serde(default)]
    pub ramp: f64,
}

impl TorqueSchedule {
    pub fn at(&self, t: f64) -> f64 {
        if t < self.start {
            0.0
        } else if self.ramp > 0.0 {
            self.value * ((t - self.start) / self.ramp).min(1.0)
        } else {
            self.value
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).context("scenario")?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            bail!("scenario: duration must be positive");
        }
        if !(self.dt > 0.0) {
            bail!("scenario: dt must be positive");
        }
        if self.decimation == 0 {
            bail!("scenario: decimation must be at least 1");
        }
        Ok(())
    }

    pub fn steps(&self, dt: f64) -> u64 {
        (self.duration / dt).round() as u64
    }
}
