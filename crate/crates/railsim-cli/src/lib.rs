//! Driver library behind the `railsim` binary: loads vehicle, track and
//! scenario files, runs the integrator and writes trajectories and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod report;
pub mod scenario;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use railsym::integrator::{Integrator, Scheme, SolverState, StepConfig};
use railsym::vehicle::{
    build_model, bundled, CompiledModel, Dof, ForceConfig, TrackSpec, VehicleConfig,
};

pub use report::{format_stats, stats_table, RunReport, StatsRow, REFERENCE_COUNTS};
pub use scenario::{Scenario, TorqueSchedule};

/// First line of every trajectory file. Bumped when columns change.
pub const TRAJECTORY_VERSION: &str = "# railsim-trajectory v1";

const BUNDLED_VEHICLES: [(&str, &str); 2] = [
    ("wheelset", bundled::WHEELSET),
    ("locomotive", bundled::LOCOMOTIVE),
];
const BUNDLED_TRACKS: [(&str, &str); 3] = [
    ("straight", bundled::STRAIGHT_TRACK),
    ("irregular", bundled::IRREGULAR_TRACK),
    ("curved", bundled::CURVED_TRACK),
];

/// Reads a file, or a bundled text when `spec` is `bundled:<name>`.
fn read_source(spec: &str, table: &[(&str, &str)]) -> Result<String> {
    if let Some(name) = spec.strip_prefix("bundled:") {
        return table
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| t.to_string())
            .ok_or_else(|| {
                let names: Vec<&str> = table.iter().map(|t| t.0).collect();
                anyhow!("no bundled file `{name}` (have: {})", names.join(", "))
            });
    }
    fs::read_to_string(spec).with_context(|| format!("reading {spec}"))
}

pub fn load_vehicle(spec: &str) -> Result<VehicleConfig> {
    let text = read_source(spec, &BUNDLED_VEHICLES)?;
    VehicleConfig::from_toml(&text).with_context(|| format!("vehicle {spec}"))
}

pub fn load_track(spec: &str) -> Result<TrackSpec> {
    let text = read_source(spec, &BUNDLED_TRACKS)?;
    TrackSpec::parse(&text).with_context(|| format!("track {spec}"))
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Scenario::from_toml(&text).with_context(|| format!("scenario {}", path.display()))
}

/// A compiled model with the description it came from.
#[derive(Clone, Debug)]
pub struct Built {
    pub config: VehicleConfig,
    pub model: CompiledModel,
    pub build_ms: f64,
}

pub fn build(vehicle: &VehicleConfig, track: &TrackSpec) -> Result<Built> {
    let t0 = Instant::now();
    let geometry = Arc::new(track.compile()?);
    let model = build_model(vehicle, geometry)?;
    Ok(Built {
        config: vehicle.clone(),
        model,
        build_ms: t0.elapsed().as_secs_f64() * 1e3,
    })
}

/// Reference configuration moved by the scenario's lateral offset, rolling
/// at its forward speed. Gear-meshed coordinates get rates that leave the
/// mesh unstrained.
pub fn initial_values(b: &Built, s: &Scenario) -> Result<Vec<f64>> {
    let m = &b.model;
    let sym = &m.dynamics.symbols;
    let mut x = m.reference.clone();
    for body in m.bodies.iter().filter(|b| b.parent.is_none()) {
        for (&c, &dof) in body.coords.iter().zip(&body.joint) {
            match dof {
                Dof::Tx => x[sym.dq[c].index()] = s.speed,
                Dof::Ty => x[sym.q[c].index()] += s.lateral_offset,
                _ => {}
            }
        }
    }
    for w in &m.wheels {
        x[sym.dq[w.spin].index()] = s.speed / w.r0;
    }
    for f in &b.config.forces {
        if let ForceConfig::Coordinate {
            name,
            terms,
            gear: true,
            ..
        } = f
        {
            let idx = |n: &str| {
                m.coord_index(n)
                    .ok_or_else(|| anyhow!("gear `{name}`: unknown coordinate `{n}`"))
            };
            let (first, c0) = &terms[0];
            let mut rate = 0.0;
            for (n, c) in &terms[1..] {
                rate += c * x[sym.dq[idx(n)?].index()];
            }
            x[sym.dq[idx(first)?].index()] = -rate / c0;
        }
    }
    for t in &s.torques {
        if !m.torques.iter().any(|k| k.name == t.name) {
            bail!(
                "scenario torque `{}` has no matching torque element",
                t.name
            );
        }
    }
    Ok(x)
}

/// Decimated trajectory kept in memory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub const CONTACT_COLUMNS: [&str; 7] = ["N", "xi_x", "xi_y", "phi_z", "f_x", "f_y", "m_z"];

fn header(m: &CompiledModel) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    if let Some(b) = m.bodies.first() {
        h.extend(b.coords.iter().map(|&c| m.coord_names[c].clone()));
    }
    for k in 0..m.contacts.len() {
        h.extend(CONTACT_COLUMNS.iter().map(|c| format!("c{k}.{c}")));
    }
    h
}

fn sample(
    m: &CompiledModel,
    int: &mut Integrator,
    st: &SolverState,
    scratch: &mut Vec<f64>,
) -> Result<Vec<f64>> {
    scratch.clone_from(&st.x);
    int.plant.load_profiles(scratch);
    int.plant.update_contacts(scratch, &st.normal)?;
    let sym = &m.dynamics.symbols;
    let mut row = vec![st.t];
    if let Some(b) = m.bodies.first() {
        row.extend(b.coords.iter().map(|&c| st.x[sym.q[c].index()]));
    }
    for (c, n) in int.plant.eval.contacts.iter().zip(&st.normal) {
        row.push(*n);
        row.extend(c.creep);
        row.extend(c.force);
    }
    Ok(row)
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Overrides the scenario's step size.
    pub dt: Option<f64>,
    pub scheme: Scheme,
    /// Directory for `trajectory.csv` and `report.txt`.
    pub out: Option<PathBuf>,
    pub tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            dt: None,
            scheme: Scheme::Imex,
            out: None,
            tol: StepConfig::default().tol,
        }
    }
}

fn write_csv(path: &Path, t: &Trajectory) -> Result<()> {
    let mut w = BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    writeln!(w, "{TRAJECTORY_VERSION}")?;
    writeln!(w, "{}", t.header.join(","))?;
    for r in &t.rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:.12e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a scenario. Integrator aborts are recorded in the report rather
/// than returned as errors.
pub fn run(b: &Built, s: &Scenario, opts: &RunOptions) -> Result<(RunReport, Trajectory)> {
    s.validate()?;
    let m = &b.model;
    let dt = opts.dt.unwrap_or(s.dt);
    let config = StepConfig {
        dt,
        tol: opts.tol,
        scheme: opts.scheme,
        ..Default::default()
    };
    let mut int = Integrator::new(m.plant(), config);
    let mut report = RunReport {
        model: m.name.clone(),
        dims: Some(m.dynamics.dims),
        scheme: opts.scheme.name().into(),
        dt,
        build_ms: b.build_ms,
        stats: stats_table(&m.dynamics),
        ..Default::default()
    };
    let mut traj = Trajectory {
        header: header(m),
        rows: vec![],
    };
    let torques: Vec<(usize, &TorqueSchedule)> = s
        .torques
        .iter()
        .map(|t| {
            (
                m.torques
                    .iter()
                    .position(|k| k.name == t.name)
                    .unwrap_or(usize::MAX),
                t,
            )
        })
        .collect();
    let x0 = initial_values(b, s)?;
    let mut scratch = vec![];
    let mut st = match int.initialize(x0, 0.0) {
        Ok(st) => st,
        Err(e) => {
            report.abort = Some((0, format!("initialization: {e}")));
            return Ok((report, traj));
        }
    };
    traj.rows.push(sample(m, &mut int, &st, &mut scratch)?);
    let n = s.steps(dt);
    let mut step_time = 0.0;
    for k in 1..=n {
        for (i, t) in &torques {
            if let Some(info) = m.torques.get(*i) {
                st.x[info.symbol.index()] = t.at(st.t);
            }
        }
        let t0 = Instant::now();
        let r = int.step(&mut st);
        step_time += t0.elapsed().as_secs_f64();
        match r {
            Ok(r) => report.record(&r),
            Err(e) => {
                report.abort = Some((k, e.to_string()));
                break;
            }
        }
        if k % s.decimation as u64 == 0 {
            match sample(m, &mut int, &st, &mut scratch) {
                Ok(row) => traj.rows.push(row),
                Err(e) => {
                    report.abort = Some((k, e.to_string()));
                    break;
                }
            }
        }
    }
    report.set_times(&int.times);
    report.step_mean_us = if report.steps > 0 {
        step_time * 1e6 / report.steps as f64
    } else {
        0.0
    };
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let csv = dir.join("trajectory.csv");
        write_csv(&csv, &traj)?;
        report.files.push(csv);
        let rep = dir.join("report.txt");
        report.files.push(rep.clone());
        fs::write(&rep, report.to_string())
            .with_context(|| format!("writing {}", rep.display()))?;
    }
    Ok((report, traj))
}
