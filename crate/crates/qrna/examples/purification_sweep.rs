//! Sweep input fidelity through one purification round.
//!
//! Shows the success probability and output fidelity of the recurrence
//! protocol for Werner inputs from 0.55 to 0.95: above one half the round
//! always improves the pair it keeps. Run with
//! `cargo run --example purification_sweep`.

use qrna::link::{generate_pair, purify, BoundId, SimConfig, SimContext};
use qrna::request::FullVirtualId;
use qrna::topology::Link;
use qrna::trace::EventKind;

fn main() {
    println!(
        "{:>6} {:>10} {:>10} {:>8}",
        "F_in", "P(succ)", "F_out", "gain"
    );
    for step in 0..9 {
        let f = 0.55 + 0.05 * step as f64;
        let link = Link {
            a: "A".into(),
            b: "B".into(),
            cost: 1.0,
            f_link: f,
            p_gen: 1.0,
            c_delay: 0.0,
        };
        let mut ctx = SimContext::new(SimConfig::default());
        let bid = |node: &str, v: u64| BoundId::new(node, FullVirtualId::new("A", 1, v));
        let keep = generate_pair(&mut ctx, &link, bid("A", 1), bid("B", 2), 1, 1).unwrap();
        let sac = generate_pair(&mut ctx, &link, bid("A", 3), bid("B", 4), 1, 1).unwrap();
        let out = purify(&mut ctx, keep, sac, 1).unwrap();

        // the traced round carries the exact success probability
        let ev = ctx
            .trace
            .events()
            .iter()
            .find(|e| e.kind == EventKind::Purify)
            .unwrap();
        let p_succ: f64 = qrna::trace::detail_fields(&ev.detail)
            .into_iter()
            .find(|(k, _)| k == "psucc")
            .map(|(_, v)| v.parse().unwrap())
            .unwrap();

        println!(
            "{f:>6.2} {p_succ:>10.6} {:>10.6} {:>+8.4}",
            out.nominal_f,
            out.nominal_f - f
        );
    }
}
