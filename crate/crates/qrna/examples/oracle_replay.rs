//! Verify a run by replaying its trace through the flat oracle.
//!
//! The trace records every physical operation; the oracle re-executes them
//! in one flat density matrix with no protocol bookkeeping and rechecks
//! every reported fidelity and entropy, plus the trace distance between the
//! delivered state and its replay. Run with
//! `cargo run --example oracle_replay`.

use qrna::engine::trace_distance;
use qrna::harness::{replay, run, Scenario};
use qrna::topology::Topology;

const TOPOLOGY: &str = include_str!(concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/fixtures/smallnet_f90.topo"
));
const SCENARIO: &str = include_str!(concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/fixtures/cluster_f90_nopurify.scn"
));

fn main() {
    let topo = Topology::parse(TOPOLOGY).unwrap();
    let scenario = Scenario::parse(SCENARIO).unwrap();
    let out = run(&topo, &scenario).expect("run completes");
    println!("engine report:\n{}", out.report);

    let rows = replay(&out.trace).expect("trace replays");
    println!("oracle replay of {} responses:", rows.len());
    for row in &rows {
        match (row.oracle_f, row.oracle_s) {
            (Some(f), Some(s)) => println!(
                "  request {}: replayed f={f:.12} s={s:.12}, deviation {:.3e}",
                row.request_id,
                row.deviation()
            ),
            _ => println!("  request {}: no delivered qubits", row.request_id),
        }
    }

    let root = rows.iter().find(|r| r.request_id == 1).unwrap();
    let d = trace_distance(root.rho.as_ref().unwrap(), &out.responses[0].rho).unwrap();
    println!("\ntrace distance between delivered state and replay: {d:.3e}");
}
