//! Build and print hierarchical routing tables.
//!
//! Each node sees its own network precisely and remote networks as single
//! opaque names, so tables stay small no matter how deep the internetwork
//! nests. Run with `cargo run --example routing_tables`.

use qrna::harness::render_routes;
use qrna::topology::{link_cost, resolve_destination, select_path, Topology};

const TOPOLOGY: &str = include_str!(concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/fixtures/smallnet.topo"
));

fn main() {
    let topo = Topology::parse(TOPOLOGY).expect("bundled topology parses");

    println!("== routing tables ==\n");
    print!("{}", render_routes(&topo).expect("connected topology"));

    println!("\n== destination resolution at Node11 ==");
    for target in ["Node19", "Node55", "Node77", "Net5"] {
        let seen = resolve_destination(&topo, "Node11", target).unwrap();
        println!("{target:>7} is seen as {seen}");
    }

    println!("\n== co-level paths ==");
    for (src, dst) in [
        ("Node11", "Node19"),
        ("Node11", "Net7"),
        ("Node51", "Node55"),
    ] {
        let path = select_path(&topo, src, dst, &link_cost).unwrap();
        println!("{src} -> {dst}: {}", path.join(" -> "));
    }
}
