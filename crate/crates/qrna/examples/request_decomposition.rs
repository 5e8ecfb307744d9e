//! Break a distributed state request into its sub-request dag.
//!
//! A three-qubit cluster state wanted at Node11, Node55 and Node77 turns
//! into seven sub-requests: one creation at the central network, one Bell
//! pair per destination, and one teleportation per destination that waits
//! on both. Run with `cargo run --example request_decomposition`.

use qrna::link::{SimConfig, SimContext};
use qrna::protocol::{decompose, Env, Provenance, Strategy};
use qrna::request::{wire, Message, QubitAddress};
use qrna::request::{Encoding, NamedState, Request, StateRequest, StateSpec};
use qrna::topology::{build_tables, link_cost, Topology};

const TOPOLOGY: &str = include_str!(concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/fixtures/smallnet.topo"
));

fn main() {
    let topo = Topology::parse(TOPOLOGY).unwrap();
    let tables = build_tables(&topo, &link_cost).unwrap();
    let mut ctx = SimContext::new(SimConfig::default());
    let mut env = Env::new(&topo, &tables, &mut ctx);

    let request = StateRequest {
        id: 1,
        spec: StateSpec::Named(NamedState::LinearCluster(3)),
        f_min: 0.99,
        s_max: 0.1,
        targets: vec![
            QubitAddress::new("Node11", 1000),
            QubitAddress::new("Node55", 1000),
            QubitAddress::new("Node77", 1000),
        ],
        encoding: Encoding::Raw,
    };
    println!(
        "application request:\n  {}\n",
        wire::encode(&Message::Request(Request::State(request.clone())))
    );

    let prov = Provenance::new("Node11", 1);
    let dag = decompose(&mut env, &request, &prov, "Node11", &Strategy::default()).unwrap();

    println!("decomposed into {} sub-requests:", dag.nodes.len());
    for node in &dag.nodes {
        println!(
            "  [{}] at {}: {}",
            node.request.id(),
            node.executor,
            wire::encode(&Message::Request(node.request.clone()))
        );
    }

    println!("\ndependencies (prerequisite -> dependent):");
    for &(from, to) in &dag.edges {
        println!(
            "  {} -> {}",
            dag.nodes[from].request.id(),
            dag.nodes[to].request.id()
        );
    }

    println!("\ndelivery plan (built qubit -> application address):");
    for (built, node, parent_vaddr) in &dag.delivery {
        println!("  {} -> {node}:{parent_vaddr}", dag.namespace.id(*built));
    }
}
