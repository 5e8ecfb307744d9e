//! Splice two pairs into one longer pair at a rendezvous node.
//!
//! A Bell-state measurement at the middle node converts pairs A-B and B-C
//! into a single A-C pair, at the cost of composing their imperfections.
//! Imperfect local gates degrade the result further. Run with
//! `cargo run --example entanglement_swapping`.

use qrna::link::{generate_pair, swap, BoundId, SimConfig, SimContext};
use qrna::request::FullVirtualId;
use qrna::topology::Link;

fn spliced(f1: f64, f2: f64, p_gate: f64) -> f64 {
    let mut ctx = SimContext::new(SimConfig {
        p_gate,
        ..SimConfig::default()
    });
    let bid = |node: &str, v: u64| BoundId::new(node, FullVirtualId::new("A", 1, v));
    let left_link = Link {
        a: "A".into(),
        b: "B".into(),
        cost: 1.0,
        f_link: f1,
        p_gen: 1.0,
        c_delay: 0.0,
    };
    let right_link = Link {
        a: "B".into(),
        b: "C".into(),
        cost: 1.0,
        f_link: f2,
        p_gen: 1.0,
        c_delay: 0.0,
    };
    let left = generate_pair(&mut ctx, &left_link, bid("A", 1), bid("B", 2), 1, 1).unwrap();
    let right = generate_pair(&mut ctx, &right_link, bid("B", 3), bid("C", 4), 1, 1).unwrap();
    swap(&mut ctx, left, right, 1).unwrap().nominal_f
}

fn main() {
    let (f1, f2) = (0.95, 0.90);
    println!("splicing Werner({f1}) with Werner({f2}):\n");

    let ideal = spliced(f1, f2, 0.0);
    let composed = f1 * f2 + (1.0 - f1) * (1.0 - f2) / 3.0;
    println!("  ideal gates:      F = {ideal:.6}");
    println!("  frame composition F1 F2 + (1-F1)(1-F2)/3 = {composed:.6}");

    for p_gate in [0.01, 0.05] {
        let noisy = spliced(f1, f2, p_gate);
        println!("  depolarizing p_gate={p_gate}: F = {noisy:.6}");
    }
}
