//! Move qubits between nodes with pre-shared pairs and classical bits.
//!
//! Teleports a |+> state over a perfect channel and over noisy Werner
//! channels, then moves one half of an entangled pair to show that
//! teleportation preserves entanglement with untouched qubits. Run with
//! `cargo run --example teleportation`.

use num_complex::Complex64;
use qrna::engine::StateVector;
use qrna::link::{generate_pair, teleport, BoundId, SimConfig, SimContext};
use qrna::request::FullVirtualId;
use qrna::topology::Link;

fn channel_link(f: f64) -> Link {
    Link {
        a: "Alice".into(),
        b: "Bob".into(),
        cost: 1.0,
        f_link: f,
        p_gen: 1.0,
        c_delay: 0.0,
    }
}

fn bid(node: &str, v: u64) -> BoundId {
    BoundId::new(node, FullVirtualId::new("Alice", 1, v))
}

fn main() {
    let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let plus = StateVector::from_amplitudes(vec![r, r]).unwrap();

    println!("teleporting |+> over Werner channels:");
    for f_chan in [1.0, 0.95, 0.85] {
        let mut ctx = SimContext::new(SimConfig::default());
        let data = bid("Alice", 1);
        ctx.store
            .alloc_pure(std::slice::from_ref(&data), &plus)
            .unwrap();
        let channel = generate_pair(
            &mut ctx,
            &channel_link(f_chan),
            bid("Alice", 2),
            bid("Bob", 3),
            1,
            1,
        )
        .unwrap();
        let arrived = teleport(&mut ctx, data, channel, 1).unwrap();
        let fidelity = ctx
            .store
            .reduced_state(std::slice::from_ref(&arrived))
            .unwrap()
            .fidelity(&plus)
            .unwrap();
        println!(
            "  channel F={f_chan:.2}: delivered at {} with fidelity {fidelity:.6}",
            arrived.node
        );
    }

    println!("\nteleporting half of an entangled pair:");
    let mut ctx = SimContext::new(SimConfig::default());
    let far_link = Link {
        a: "Bob".into(),
        b: "Carol".into(),
        cost: 1.0,
        f_link: 1.0,
        p_gen: 1.0,
        c_delay: 0.0,
    };
    let pair = generate_pair(
        &mut ctx,
        &channel_link(1.0),
        bid("Alice", 1),
        bid("Bob", 2),
        1,
        1,
    )
    .unwrap();
    let channel = generate_pair(&mut ctx, &far_link, bid("Bob", 3), bid("Carol", 4), 1, 1).unwrap();
    let moved = teleport(&mut ctx, pair.b.clone(), channel, 1).unwrap();
    let entangled_f = ctx.store.pair_fidelity(&pair.a, &moved).unwrap();
    println!(
        "  Alice~Bob pair became Alice~{} with Bell fidelity {entangled_f:.6}",
        moved.node
    );
}
