//! Run report: timing per phase, tape statistics, Newton-Raphson
//! iteration histogram and constraint residual maxima.

use std::fmt;
use std::path::PathBuf;

use railsym::dynamics::{AssembledDynamics, Dims, Function};
use railsym::integrator::{Phase, PhaseTimes, StepReport};
use railsym::symcore::TapeStats;

/// Counts published for the original 60-coordinate, 8-contact locomotive,
/// `(atoms, operations)` in inventory order. Shown for comparison only.
pub const REFERENCE_COUNTS: [(usize, usize); 11] = [
    (1795, 10910),
    (3648, 19015),
    (425, 1709),
    (541, 2150),
    (784, 4116),
    (846, 6668),
    (964, 6574),
    (1113, 8437),
    (0, 0),
    (3779, 25870),
    (350, 1917),
];

#[derive(Clone, Debug, PartialEq)]
pub struct StatsRow {
    pub name: &'static str,
    pub stats: TapeStats,
    pub reference: (usize, usize),
}

pub fn stats_table(d: &AssembledDynamics) -> Vec<StatsRow> {
    Function::INVENTORY
        .iter()
        .zip(REFERENCE_COUNTS)
        .map(|(&f, reference)| StatsRow {
            name: f.name(),
            stats: d.stats(f),
            reference,
        })
        .collect()
}

pub fn format_stats(dims: Dims, rows: &[StatsRow]) -> String {
    let mut s = format!(
        "tape statistics (nq = {}, ns = {}, contacts = {})\n",
        dims.nq, dims.ns, dims.nc
    );
    s += &format!(
        "{:<16} {:>9} {:>11}   {:>9} {:>11}\n",
        "function", "atoms", "operations", "ref atoms", "ref ops"
    );
    for r in rows {
        s += &format!(
            "{:<16} {:>9} {:>11}   {:>9} {:>11}\n",
            r.name, r.stats.atoms, r.stats.operations, r.reference.0, r.reference.1
        );
    }
    s
}

/// Histogram buckets: 0, 1, 2, 3 or more solves.
pub type Histogram = [u64; 4];

fn bucket(h: &mut Histogram, n: u32) {
    h[(n as usize).min(3)] += 1;
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub model: String,
    pub dims: Option<Dims>,
    pub scheme: String,
    pub dt: f64,
    pub build_ms: f64,
    pub steps: u64,
    /// `(label, mean μs per step)`.
    pub phases: Vec<(&'static str, f64)>,
    /// Mean wall time of a whole step, μs.
    pub step_mean_us: f64,
    pub stats: Vec<StatsRow>,
    pub nr_s: Histogram,
    pub nr_q: Histogram,
    pub max_phi_n: f64,
    pub max_phi_d: f64,
    pub max_vel_n: f64,
    pub max_vel_d: f64,
    pub profile_clamped_steps: u64,
    pub table_clamped_steps: u64,
    pub saturated_steps: u64,
    pub separated_steps: u64,
    pub files: Vec<PathBuf>,
    /// Step index and cause of an abort.
    pub abort: Option<(u64, String)>,
}

impl RunReport {
    pub fn record(&mut self, r: &StepReport) {
        self.steps += 1;
        bucket(&mut self.nr_s, r.s_iters);
        bucket(&mut self.nr_q, r.q_iters);
        self.max_phi_n = self.max_phi_n.max(r.phi_n);
        self.max_phi_d = self.max_phi_d.max(r.phi_d);
        self.max_vel_n = self.max_vel_n.max(r.vel_n);
        self.max_vel_d = self.max_vel_d.max(r.vel_d);
        self.profile_clamped_steps += r.profile_clamped as u64;
        self.table_clamped_steps += r.table_clamped as u64;
        self.saturated_steps += r.saturated as u64;
        self.separated_steps += (r.separated > 0) as u64;
    }

    pub fn set_times(&mut self, t: &PhaseTimes) {
        self.phases = Phase::ALL
            .iter()
            .map(|&p| (p.label(), t.mean_us(p)))
            .collect();
    }

    pub fn phase_sum_us(&self) -> f64 {
        self.phases.iter().map(|p| p.1).sum()
    }

    /// Fraction of steps whose s- and q-projections took exactly one solve.
    pub fn single_iteration_fraction(&self) -> (f64, f64) {
        let n = self.steps.max(1) as f64;
        (self.nr_s[1] as f64 / n, self.nr_q[1] as f64 / n)
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model: {}", self.model)?;
        if let Some(d) = self.dims {
            writeln!(f, "nq = {}, ns = {}, contacts = {}", d.nq, d.ns, d.nc)?;
        }
        writeln!(
            f,
            "scheme {}, dt = {:e} s, {} steps, build {:.1} ms",
            self.scheme, self.dt, self.steps, self.build_ms
        )?;
        writeln!(f, "\nresults per time step")?;
        writeln!(f, "{:<82} {:>10}", "task", "CPU us")?;
        for (label, us) in &self.phases {
            writeln!(f, "{label:<82} {us:>10.1}")?;
        }
        writeln!(
            f,
            "{:<82} {:>10.1}",
            "Total (sum of phases)",
            self.phase_sum_us()
        )?;
        writeln!(
            f,
            "{:<82} {:>10.1}",
            "Total (measured step)", self.step_mean_us
        )?;
        writeln!(
            f,
            "\nNewton-Raphson solves per step      0        1        2       3+"
        )?;
        writeln!(
            f,
            "s-projection              {:>10} {:>8} {:>8} {:>8}",
            self.nr_s[0], self.nr_s[1], self.nr_s[2], self.nr_s[3]
        )?;
        writeln!(
            f,
            "q-projection              {:>10} {:>8} {:>8} {:>8}",
            self.nr_q[0], self.nr_q[1], self.nr_q[2], self.nr_q[3]
        )?;
        writeln!(f, "\nresidual maxima after projection")?;
        writeln!(
            f,
            "  |phi_n| {:.3e}  |phi_d| {:.3e}",
            self.max_phi_n, self.max_phi_d
        )?;
        writeln!(
            f,
            "  |phidot_n| {:.3e}  |phidot_d| {:.3e}",
            self.max_vel_n, self.max_vel_d
        )?;
        writeln!(
            f,
            "steps with clamped profile lookups {}, clamped Kalker lookups {}, saturated creep forces {}, separated contacts {}",
            self.profile_clamped_steps, self.table_clamped_steps, self.saturated_steps, self.separated_steps
        )?;
        if !self.stats.is_empty() {
            if let Some(d) = self.dims {
                writeln!(f)?;
                f.write_str(&format_stats(d, &self.stats))?;
            }
        }
        if !self.files.is_empty() {
            writeln!(f, "\noutputs")?;
            for p in &self.files {
                writeln!(f, "  {}", p.display())?;
            }
        }
        if let Some((k, cause)) = &self.abort {
            writeln!(f, "\nABORTED at step {k}: {cause}")?;
        }
        Ok(())
    }
}
