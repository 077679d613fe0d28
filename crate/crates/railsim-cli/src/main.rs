use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};
use railsim_cli::{
    build, format_stats, load_scenario, load_track, load_vehicle, run, stats_table, RunOptions,
};
use railsym::dynamics::Function;
use railsym::integrator::Scheme;

/// Railway vehicle dynamics on symbolic, atomized model functions.
///
/// Vehicle and track arguments take a path or `bundled:<name>`
/// (vehicles: wheelset, locomotive; tracks: straight, irregular, curved).
#[derive(Parser)]
#[command(name = "railsim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write trajectory.csv and report.txt.
    Simulate {
        #[arg(long)]
        vehicle: String,
        #[arg(long)]
        track: String,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        /// imex, explicit (forward Euler) or explicit-midpoint.
        #[arg(long, default_value = "imex")]
        scheme: String,
        /// Print the run report.
        #[arg(long)]
        report: bool,
    },
    /// Print atom and operation counts of the model functions.
    Stats {
        #[arg(long)]
        vehicle: String,
        #[arg(long, default_value = "bundled:straight")]
        track: String,
    },
    /// Print the instruction listing of one compiled function.
    InspectTape {
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "bundled:wheelset")]
        vehicle: String,
        #[arg(long, default_value = "bundled:straight")]
        track: String,
        /// Emit C source instead of the listing.
        #[arg(long)]
        c: bool,
    },
}

fn parse_scheme(s: &str) -> Result<Scheme> {
    match s {
        "explicit" => Ok(Scheme::ExplicitEuler),
        _ => Scheme::from_name(s).ok_or_else(|| anyhow!("unknown scheme `{s}`")),
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Simulate {
            vehicle,
            track,
            scenario,
            out,
            dt,
            scheme,
            report,
        } => {
            let scheme = parse_scheme(&scheme)?;
            let sc = load_scenario(&scenario)?;
            let b = build(&load_vehicle(&vehicle)?, &load_track(&track)?)?;
            let d = b.model.dynamics.dims;
            eprintln!(
                "model {}: nq = {}, ns = {}, contacts = {}",
                b.model.name, d.nq, d.ns, d.nc
            );
            let opts = RunOptions {
                dt,
                scheme,
                out: Some(out),
                ..Default::default()
            };
            let (rep, _) = run(&b, &sc, &opts)?;
            if report {
                print!("{rep}");
            }
            if let Some((k, cause)) = &rep.abort {
                eprintln!("aborted at step {k}: {cause}");
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Stats { vehicle, track } => {
            let b = build(&load_vehicle(&vehicle)?, &load_track(&track)?)?;
            print!(
                "{}",
                format_stats(b.model.dynamics.dims, &stats_table(&b.model.dynamics))
            );
        }
        Cmd::InspectTape {
            name,
            vehicle,
            track,
            c,
        } => {
            let f = Function::from_name(&name).ok_or_else(|| {
                let names: Vec<&str> = Function::ALL.iter().map(|f| f.name()).collect();
                anyhow!("unknown function `{name}` (have: {})", names.join(", "))
            })?;
            let b = build(&load_vehicle(&vehicle)?, &load_track(&track)?)?;
            let tape = b.model.dynamics.tape(f);
            if c {
                print!("{}", tape.to_c());
            } else {
                let s = tape.stats;
                println!(
                    "{}: {} atoms, {} operations",
                    f.name(),
                    s.atoms,
                    s.operations
                );
                print!("{}", tape.dump());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
