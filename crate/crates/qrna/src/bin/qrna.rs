//! Batch front-end: run scenarios, dump routing tables, replay traces.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qrna::harness::{self, Scenario};
use qrna::link::Mode;
use qrna::topology::Topology;
use qrna::trace::Trace;

#[derive(Parser)]
#[command(name = "qrna", about = "Recursive quantum repeater network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and print its report. Exit code 0 only if every
    /// request completed OK.
    Run {
        /// Topology file (overrides the scenario's `topology` directive).
        #[arg(long)]
        topology: Option<PathBuf>,
        /// Scenario file.
        #[arg(long)]
        scenario: PathBuf,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Mode override: deterministic or stochastic.
        #[arg(long)]
        mode: Option<String>,
        /// Write the event trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the report to this file as well as stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print every node's routing table, optionally checking them against a
    /// golden file.
    Routes {
        #[arg(long)]
        topology: PathBuf,
        /// Compare against this golden rendering instead of printing.
        #[arg(long)]
        check: Option<PathBuf>,
    },
    /// Replay a trace through the flat oracle and recheck every reported
    /// fidelity and entropy. Exit code 0 only if all match within 1e-9.
    Oracle {
        #[arg(long)]
        trace: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn dispatch(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run {
            topology,
            scenario,
            seed,
            mode,
            trace,
            report,
        } => {
            let mut sc = Scenario::parse(&read(&scenario)?)
                .map_err(|e| format!("{}: {e}", scenario.display()))?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            if let Some(mode) = mode {
                sc.mode =
                    Mode::from_token(&mode).ok_or_else(|| format!("unknown mode {mode:?}"))?;
            }
            let topo_path = topology
                .or_else(|| {
                    sc.topology
                        .as_ref()
                        .map(|rel| scenario.parent().unwrap_or(Path::new(".")).join(rel))
                })
                .ok_or("no topology given (flag --topology or scenario directive)")?;
            let topo = Topology::parse(&read(&topo_path)?)
                .map_err(|e| format!("{}: {e}", topo_path.display()))?;
            let out = harness::run(&topo, &sc).map_err(|e| e.to_string())?;
            if let Some(path) = trace {
                std::fs::write(&path, out.trace.render())
                    .map_err(|e| format!("{}: {e}", path.display()))?;
            }
            print!("{}", out.report);
            if let Some(path) = report {
                std::fs::write(&path, &out.report)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
            }
            Ok(if out.all_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Routes { topology, check } => {
            let topo = Topology::parse(&read(&topology)?)
                .map_err(|e| format!("{}: {e}", topology.display()))?;
            match check {
                None => {
                    print!(
                        "{}",
                        harness::render_routes(&topo).map_err(|e| e.to_string())?
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Some(golden_path) => match harness::check_tables(&topo, &read(&golden_path)?) {
                    Ok(()) => {
                        println!("routing tables match {}", golden_path.display());
                        Ok(ExitCode::SUCCESS)
                    }
                    Err(diff) => {
                        eprintln!("{diff}");
                        Ok(ExitCode::FAILURE)
                    }
                },
            }
        }
        Command::Oracle { trace } => {
            let parsed =
                Trace::parse(&read(&trace)?).map_err(|e| format!("{}: {e}", trace.display()))?;
            let rows = harness::replay(&parsed).map_err(|e| e.to_string())?;
            let mut all_ok = true;
            for row in &rows {
                match (row.oracle_f, row.oracle_s) {
                    (Some(f), Some(s)) => {
                        let dev = row.deviation();
                        let ok = dev <= 1e-9;
                        all_ok &= ok;
                        println!(
                            "request {} status={} reported f={} s={} replayed f={} s={} deviation={:.3e} {}",
                            row.request_id,
                            row.reported_status,
                            row.reported_f,
                            row.reported_s,
                            f,
                            s,
                            dev,
                            if ok { "ok" } else { "MISMATCH" },
                        );
                    }
                    _ => println!(
                        "request {} status={} (no delivered qubits to replay)",
                        row.request_id, row.reported_status
                    ),
                }
            }
            Ok(if all_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
