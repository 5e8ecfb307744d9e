//! Purify-and-swap primitives over simulated links.
//!
//! Elementary pair generation, recurrence purification, entanglement
//! swapping and teleportation, all executed as explicit circuits on the
//! density-matrix backend with LOCC-respecting bookkeeping: gates act only
//! on co-located qubits, and measurement outcomes travel between nodes as
//! classical trace messages.

pub mod store;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::engine::{EngineError, GateKind, OutcomeSelect};
use crate::request::wire::fmt_dec;
use crate::request::VmapError;
use crate::topology::Link;
use crate::trace::{EventKind, Trace};

pub use store::{BoundId, StateStore};

/// How measurement outcomes and generation attempts are decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Generation always succeeds; measurements take the first possible
    /// branch (outcome 0 unless impossible). Fully reproducible without
    /// randomness.
    Deterministic,
    /// Seeded sampling of generation attempts and Born-rule outcomes.
    Stochastic,
}

impl Mode {
    pub fn token(self) -> &'static str {
        match self {
            Mode::Deterministic => "deterministic",
            Mode::Stochastic => "stochastic",
        }
    }

    pub fn from_token(tok: &str) -> Option<Mode> {
        Some(match tok {
            "deterministic" => Mode::Deterministic,
            "stochastic" => Mode::Stochastic,
            _ => return None,
        })
    }
}

/// Tunable run parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Depolarizing probability applied to both qubits after every
    /// two-qubit gate.
    pub p_gate: f64,
    /// Purification rounds allowed per link (0 disables purification).
    pub purify_rounds: u32,
    /// Retries per stochastic sub-operation before giving up.
    pub retry_cap: u32,
    /// Elementary pairs a single request may consume per link.
    pub pair_cap: u32,
    /// Cap on qubits in any one entangled register.
    pub qubit_cap: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            mode: Mode::Deterministic,
            seed: 0,
            p_gate: 0.0,
            purify_rounds: 2,
            retry_cap: 4,
            pair_cap: 8,
            qubit_cap: crate::engine::DEFAULT_QUBIT_CAP,
        }
    }
}

/// Resource usage tallies reported at the end of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub pairs_generated: u64,
    pub purify_attempts: u64,
    pub purify_successes: u64,
    pub swaps: u64,
    pub teleports: u64,
}

/// Mutable simulation state threaded through every operation: the global
/// state store, the trace, the seeded RNG and the knobs.
#[derive(Debug)]
pub struct SimContext {
    pub store: StateStore,
    pub trace: Trace,
    pub rng: ChaCha12Rng,
    pub cfg: SimConfig,
    pub counters: Counters,
}

impl SimContext {
    pub fn new(cfg: SimConfig) -> SimContext {
        SimContext {
            store: StateStore::new(cfg.qubit_cap),
            trace: Trace::new(),
            rng: ChaCha12Rng::seed_from_u64(cfg.seed),
            cfg,
            counters: Counters::default(),
        }
    }

    /// Outcome selection for the configured mode: first-possible-branch in
    /// deterministic runs, seeded Born sampling otherwise.
    pub fn select_outcome(&mut self) -> OutcomeSelect {
        match self.cfg.mode {
            Mode::Deterministic => OutcomeSelect::Deterministic,
            Mode::Stochastic => OutcomeSelect::Sampled(self.rng.gen()),
        }
    }
}

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("pair generation over {a}~{b} failed (attempt {attempt})")]
    GenerationFailed { a: String, b: String, attempt: u32 },
    #[error("purification failed; both pairs consumed")]
    PurificationFailed,
    #[error("pairs do not span the required endpoints: {0}")]
    MismatchedEndpoints(String),
    #[error("pairs share no common node")]
    NoCommonNode,
    #[error("gate at {node} touches remote qubit {qubit}")]
    Locc { node: String, qubit: BoundId },
    #[error("unknown qubit {0}")]
    UnknownQubit(BoundId),
    #[error(transparent)]
    Vmap(#[from] VmapError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Where a pair came from, for diagnostics and tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pedigree {
    Elementary {
        link: (String, String),
    },
    Purified {
        base: Box<Pedigree>,
        rounds: u32,
    },
    Swapped {
        at: String,
        left: Box<Pedigree>,
        right: Box<Pedigree>,
    },
    /// Reconstructed from named qubits whose construction record lives
    /// elsewhere (e.g. a pair delivered by an earlier request).
    Named,
}

/// A live two-qubit entangled resource spanning two nodes.
#[derive(Debug, Clone)]
pub struct EntangledPairHandle {
    pub a: BoundId,
    pub b: BoundId,
    pub pedigree: Pedigree,
    /// Fidelity with |Phi+>, recomputed from the global state after every
    /// operation that touches the pair.
    pub nominal_f: f64,
}

impl EntangledPairHandle {
    pub fn endpoint_at(&self, node: &str) -> Option<&BoundId> {
        if self.a.node == node {
            Some(&self.a)
        } else if self.b.node == node {
            Some(&self.b)
        } else {
            None
        }
    }

    pub fn spans(&self, x: &str, y: &str) -> bool {
        (self.a.node == x && self.b.node == y) || (self.a.node == y && self.b.node == x)
    }
}

/// One elementary pair generation attempt over a physical link. In
/// stochastic mode the attempt succeeds with the link's generation
/// probability; every attempt is traced.
pub fn generate_pair(
    ctx: &mut SimContext,
    link: &Link,
    a: BoundId,
    b: BoundId,
    request_id: u64,
    attempt: u32,
) -> Result<EntangledPairHandle, LinkError> {
    let ok = match ctx.cfg.mode {
        Mode::Deterministic => true,
        Mode::Stochastic => ctx.rng.gen::<f64>() < link.p_gen,
    };
    ctx.trace.emit(
        &a.node,
        EventKind::PairGen,
        request_id,
        format!(
            "link={}~{} qa={} qb={} flink={} attempt={} ok={}",
            link.a,
            link.b,
            a,
            b,
            fmt_dec(link.f_link),
            attempt,
            u8::from(ok),
        ),
    );
    if !ok {
        return Err(LinkError::GenerationFailed {
            a: link.a.clone(),
            b: link.b.clone(),
            attempt,
        });
    }
    ctx.store.alloc_werner(&a, &b, link.f_link)?;
    ctx.counters.pairs_generated += 1;
    Ok(EntangledPairHandle {
        nominal_f: ctx.store.pair_fidelity(&a, &b)?,
        a,
        b,
        pedigree: Pedigree::Elementary {
            link: (link.a.clone(), link.b.clone()),
        },
    })
}

/// Orient `pair` so its first endpoint sits at `node`.
fn oriented<'p>(pair: &'p EntangledPairHandle, node: &str) -> (&'p BoundId, &'p BoundId) {
    if pair.a.node == node {
        (&pair.a, &pair.b)
    } else {
        (&pair.b, &pair.a)
    }
}

/// One recurrence-purification round: bilateral CNOT at both ends, Z-measure
/// the sacrificed pair, keep on matching outcomes. On success the kept
/// pair's state is the renormalized surviving branch and the sacrificed
/// qubits are freed; on failure every qubit of both pairs is consumed.
pub fn purify(
    ctx: &mut SimContext,
    keep: EntangledPairHandle,
    sacrifice: EntangledPairHandle,
    request_id: u64,
) -> Result<EntangledPairHandle, LinkError> {
    let node_a = keep.a.node.clone();
    let node_b = keep.b.node.clone();
    if !sacrifice.spans(&node_a, &node_b) {
        return Err(LinkError::MismatchedEndpoints(format!(
            "keep spans {}~{}, sacrifice spans {}~{}",
            node_a, node_b, sacrifice.a.node, sacrifice.b.node
        )));
    }
    let (sac_a, sac_b) = {
        let (x, y) = oriented(&sacrifice, &node_a);
        (x.clone(), y.clone())
    };
    let p_gate = ctx.cfg.p_gate;
    ctx.counters.purify_attempts += 1;

    // bilateral CNOTs, keep side controls
    ctx.store
        .apply_gate_at(&node_a, GateKind::Cnot, &[&keep.a, &sac_a])?;
    ctx.store.apply_depolarizing(&keep.a, p_gate)?;
    ctx.store.apply_depolarizing(&sac_a, p_gate)?;
    ctx.store
        .apply_gate_at(&node_b, GateKind::Cnot, &[&keep.b, &sac_b])?;
    ctx.store.apply_depolarizing(&keep.b, p_gate)?;
    ctx.store.apply_depolarizing(&sac_b, p_gate)?;

    // success probability = P(outcomes agree), computed exactly on probe
    // copies before collapsing the live state
    let mut p_succ = 0.0;
    for outcome in [false, true] {
        let mut probe = ctx.store.clone();
        let first = probe.measure_and_release(&sac_a, OutcomeSelect::Forced(outcome));
        let pa = match first {
            Ok((_, p)) => p,
            Err(LinkError::Engine(EngineError::ImpossibleBranch(_))) => continue,
            Err(e) => return Err(e),
        };
        match probe.measure_and_release(&sac_b, OutcomeSelect::Forced(outcome)) {
            Ok((_, pb)) => p_succ += pa * pb,
            Err(LinkError::Engine(EngineError::ImpossibleBranch(_))) => {}
            Err(e) => return Err(e),
        }
    }

    let sel_a = ctx.select_outcome();
    let (ma, _) = ctx.store.measure_and_release(&sac_a, sel_a)?;
    let sel_b = ctx.select_outcome();
    let (mb, _) = ctx.store.measure_and_release(&sac_b, sel_b)?;

    // the parity comparison is two-way classical messaging
    ctx.trace.emit(
        &node_a,
        EventKind::Msg,
        request_id,
        format!("from={node_a} to={node_b} payload=parity:{}", u8::from(ma)),
    );
    ctx.trace.emit(
        &node_b,
        EventKind::Msg,
        request_id,
        format!("from={node_b} to={node_a} payload=parity:{}", u8::from(mb)),
    );

    let ok = ma == mb;
    let f = if ok {
        ctx.store.pair_fidelity(&keep.a, &keep.b)?
    } else {
        0.0
    };
    ctx.trace.emit(
        &node_a,
        EventKind::Purify,
        request_id,
        format!(
            "keep=({},{}) sac=({},{}) pgate={} ma={} mb={} psucc={} ok={} f={}",
            keep.a,
            keep.b,
            sac_a,
            sac_b,
            fmt_dec(p_gate),
            u8::from(ma),
            u8::from(mb),
            fmt_dec(p_succ),
            u8::from(ok),
            fmt_dec(f),
        ),
    );
    if !ok {
        ctx.store.release(&keep.a)?;
        ctx.store.release(&keep.b)?;
        return Err(LinkError::PurificationFailed);
    }
    ctx.counters.purify_successes += 1;
    let rounds = match &keep.pedigree {
        Pedigree::Purified { rounds, .. } => rounds + 1,
        _ => 1,
    };
    Ok(EntangledPairHandle {
        a: keep.a,
        b: keep.b,
        pedigree: Pedigree::Purified {
            base: Box::new(keep.pedigree),
            rounds,
        },
        nominal_f: f,
    })
}

/// Entanglement swapping: a Bell-state measurement at the common node turns
/// pairs A-B and B-C into a pair A-C, with the Pauli correction applied at C
/// after the outcomes arrive classically.
pub fn swap(
    ctx: &mut SimContext,
    left: EntangledPairHandle,
    right: EntangledPairHandle,
    request_id: u64,
) -> Result<EntangledPairHandle, LinkError> {
    let mut commons: Vec<&str> = Vec::new();
    for n in [&left.a.node, &left.b.node] {
        if (right.a.node == *n || right.b.node == *n) && !commons.contains(&n.as_str()) {
            commons.push(n);
        }
    }
    commons.sort();
    let Some(&common) = commons.first() else {
        return Err(LinkError::NoCommonNode);
    };
    let common = common.to_string();
    let (left_b, left_a) = {
        let (x, y) = oriented(&left, &common);
        (x.clone(), y.clone())
    };
    let (right_b, right_c) = {
        let (x, y) = oriented(&right, &common);
        (x.clone(), y.clone())
    };
    let p_gate = ctx.cfg.p_gate;

    // Bell-state measurement at the common node
    ctx.store
        .apply_gate_at(&common, GateKind::Cnot, &[&left_b, &right_b])?;
    ctx.store.apply_depolarizing(&left_b, p_gate)?;
    ctx.store.apply_depolarizing(&right_b, p_gate)?;
    ctx.store.apply_gate_at(&common, GateKind::H, &[&left_b])?;
    let sel1 = ctx.select_outcome();
    let (m1, _) = ctx.store.measure_and_release(&left_b, sel1)?;
    let sel2 = ctx.select_outcome();
    let (m2, _) = ctx.store.measure_and_release(&right_b, sel2)?;

    ctx.trace.emit(
        &common,
        EventKind::Msg,
        request_id,
        format!(
            "from={} to={} payload=corrections:{}{}",
            common,
            right_c.node,
            u8::from(m1),
            u8::from(m2)
        ),
    );
    if m2 {
        ctx.store
            .apply_gate_at(&right_c.node, GateKind::X, &[&right_c])?;
    }
    if m1 {
        ctx.store
            .apply_gate_at(&right_c.node, GateKind::Z, &[&right_c])?;
    }
    ctx.counters.swaps += 1;
    let f = ctx.store.pair_fidelity(&left_a, &right_c)?;
    ctx.trace.emit(
        &common,
        EventKind::Swap,
        request_id,
        format!(
            "left=({},{}) right=({},{}) pgate={} m1={} m2={} f={}",
            left_a,
            left_b,
            right_b,
            right_c,
            fmt_dec(p_gate),
            u8::from(m1),
            u8::from(m2),
            fmt_dec(f),
        ),
    );
    Ok(EntangledPairHandle {
        a: left_a,
        b: right_c,
        pedigree: Pedigree::Swapped {
            at: common,
            left: Box::new(left.pedigree),
            right: Box::new(right.pedigree),
        },
        nominal_f: f,
    })
}

/// Teleport the data qubit across the channel pair: Bell measurement at the
/// sender, Pauli corrections at the receiver, and the virtual id rebinds to
/// the receiving node. The channel is consumed.
pub fn teleport(
    ctx: &mut SimContext,
    data: BoundId,
    channel: EntangledPairHandle,
    request_id: u64,
) -> Result<BoundId, LinkError> {
    let here = data.node.clone();
    let Some(_) = channel.endpoint_at(&here) else {
        return Err(LinkError::MismatchedEndpoints(format!(
            "channel spans {}~{}, data is at {}",
            channel.a.node, channel.b.node, here
        )));
    };
    let (chan_a, chan_b) = {
        let (x, y) = oriented(&channel, &here);
        (x.clone(), y.clone())
    };
    if chan_b.node == here {
        return Err(LinkError::MismatchedEndpoints(
            "channel does not leave the data's node".into(),
        ));
    }
    let p_gate = ctx.cfg.p_gate;

    ctx.store
        .apply_gate_at(&here, GateKind::Cnot, &[&data, &chan_a])?;
    ctx.store.apply_depolarizing(&data, p_gate)?;
    ctx.store.apply_depolarizing(&chan_a, p_gate)?;
    ctx.store.apply_gate_at(&here, GateKind::H, &[&data])?;
    let sel1 = ctx.select_outcome();
    let (m1, _) = ctx.store.measure_and_release(&data, sel1)?;
    let sel2 = ctx.select_outcome();
    let (m2, _) = ctx.store.measure_and_release(&chan_a, sel2)?;

    ctx.trace.emit(
        &here,
        EventKind::Msg,
        request_id,
        format!(
            "from={} to={} payload=corrections:{}{}",
            here,
            chan_b.node,
            u8::from(m1),
            u8::from(m2)
        ),
    );
    if m2 {
        ctx.store
            .apply_gate_at(&chan_b.node, GateKind::X, &[&chan_b])?;
    }
    if m1 {
        ctx.store
            .apply_gate_at(&chan_b.node, GateKind::Z, &[&chan_b])?;
    }
    let arrived = BoundId::new(chan_b.node.clone(), data.id.clone());
    ctx.store.relabel(&chan_b, &arrived)?;
    ctx.counters.teleports += 1;
    ctx.trace.emit(
        &here,
        EventKind::Teleport,
        request_id,
        format!(
            "data={} chan=({},{}) pgate={} m1={} m2={}",
            data,
            chan_a,
            chan_b,
            fmt_dec(p_gate),
            u8::from(m1),
            u8::from(m2),
        ),
    );
    Ok(arrived)
}
