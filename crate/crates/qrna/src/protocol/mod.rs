//! Recursive request execution.
//!
//! A request arriving at a node is processed locally, possibly split into
//! sub-requests with freshly minted virtual addresses, retargeted at network
//! boundaries, and forwarded hop by hop along the routing tables until every
//! piece lands at a node that can execute it against the quantum state
//! store. Responses flow back as values; every receive and response is
//! traced.
//!
//! Virtual addresses are scoped by (requester, request id): each request
//! carries this namespace as provenance, and a decomposing node mints the
//! addresses of its sub-requests in the namespace (decomposer, parent id),
//! rebinding delivered qubits to the parent's own names at the end.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::link::{self, BoundId, EntangledPairHandle, LinkError, Pedigree, SimContext};
use crate::request::{
    check_response, validate, wire, ActionRequest, CircuitItem, Encoding, FullVirtualId, Message,
    NamedState, Request, RequestError, Response, StateRequest, StateSpec, Status, Violation,
};
use crate::topology::{
    link_cost, next_physical_hop, physical_path, select_center, swap_order, RoutingTable, SwapPlan,
    Topology, TopologyError,
};
use crate::trace::EventKind;

/// Virtual-address namespace a request's targets live in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub requester: String,
    pub request_id: u64,
}

impl Provenance {
    pub fn new(requester: impl Into<String>, request_id: u64) -> Provenance {
        Provenance {
            requester: requester.into(),
            request_id,
        }
    }

    pub fn id(&self, vaddr: u64) -> FullVirtualId {
        FullVirtualId::new(self.requester.clone(), self.request_id, vaddr)
    }
}

/// Global strategy for satisfying a distributed state request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    /// Create the state at a well-placed element, then move qubits outward
    /// by teleportation.
    CreateAndTeleport,
    /// Allocate qubits in place and execute the circuit with teleported
    /// gates. Recognized but not executable.
    TeleportGates,
}

#[derive(Debug, Clone)]
pub struct Strategy {
    pub kind: StrategyKind,
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy {
            kind: StrategyKind::CreateAndTeleport,
        }
    }
}

/// One sub-request with its intended executor.
#[derive(Debug, Clone)]
pub struct DagNode {
    pub executor: String,
    pub request: Request,
}

/// Dependency DAG of decomposed sub-requests. All sub-request targets live
/// in `namespace`; `delivery` maps each finally delivered qubit back to the
/// parent request's own address.
#[derive(Debug, Clone)]
pub struct SubRequestDag {
    pub namespace: Provenance,
    pub nodes: Vec<DagNode>,
    /// (prerequisite, dependent) index pairs.
    pub edges: Vec<(usize, usize)>,
    /// (namespace vaddr of the built qubit, final node, parent vaddr).
    pub delivery: Vec<(u64, String, u64)>,
}

#[derive(Debug, Error)]
pub enum ProtoError {
    #[error("recursion limit {0} exceeded")]
    RecursionLimit(u32),
    #[error("invalid request: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("strategy {0:?} is not executable")]
    UnsupportedStrategy(StrategyKind),
    #[error("network {0} has no eligible member node")]
    NoEligibleMember(String),
    #[error("sub-request dag contains a cycle")]
    CycleDetected,
    #[error("sub-request {id} failed")]
    SubRequestFailed { id: u64 },
    #[error("pair generation exhausted {attempts} attempts over {a}~{b}")]
    GenerationExhausted { a: String, b: String, attempts: u32 },
    #[error("link budget used {used} pairs on {a}~{b}, cap {cap}")]
    PairCapExceeded {
        a: String,
        b: String,
        used: u32,
        cap: u32,
    },
    #[error("action circuit is not locally executable: {0}")]
    NonLocalAction(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Request(#[from] RequestError),
}

/// Everything a delivery needs: the network, its routing tables, and the
/// mutable simulation context.
pub struct Env<'a> {
    pub topo: &'a Topology,
    pub tables: &'a BTreeMap<String, RoutingTable>,
    pub ctx: &'a mut SimContext,
    next_id: u64,
    recursion_limit: u32,
}

impl<'a> Env<'a> {
    pub fn new(
        topo: &'a Topology,
        tables: &'a BTreeMap<String, RoutingTable>,
        ctx: &'a mut SimContext,
    ) -> Env<'a> {
        Env {
            topo,
            tables,
            ctx,
            next_id: 1,
            recursion_limit: 16,
        }
    }

    /// Sub-request ids are allocated above every id seen so far.
    pub fn reserve_ids_above(&mut self, id: u64) {
        self.next_id = self.next_id.max(id + 1);
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }
}

/// Deliver a request at a node and return its response. Failures surface as
/// FAIL responses, never panics; every path emits a RSP trace event at the
/// completing node.
pub fn deliver(
    env: &mut Env,
    request: Request,
    prov: &Provenance,
    from: &str,
    at: &str,
    depth: u32,
) -> Response {
    let id = request.id();
    env.reserve_ids_above(id);
    env.ctx.trace.emit(
        at,
        EventKind::ReqRecv,
        id,
        format!(
            "from={from} wire={}",
            wire::encode(&Message::Request(request.clone()))
        ),
    );
    match process(env, request, prov, at, depth) {
        Ok(resp) => resp,
        Err(err) => {
            let resp = Response::failed(id);
            env.ctx.trace.emit(
                at,
                EventKind::Rsp,
                id,
                format!(
                    "status=FAIL f={} s={} targets=() err={}",
                    wire::fmt_dec(0.0),
                    wire::fmt_dec(0.0),
                    compact(&err.to_string()),
                ),
            );
            resp
        }
    }
}

/// Trace details are single-line; collapse whitespace out of error text.
fn compact(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join("_")
}

fn respond(env: &mut Env, at: &str, resp: &Response, bids: &[BoundId]) {
    let targets = bids
        .iter()
        .map(|b| b.to_string())
        .collect::<Vec<_>>()
        .join(",");
    env.ctx.trace.emit(
        at,
        EventKind::Rsp,
        resp.id,
        format!(
            "status={} f={} s={} targets=({})",
            resp.status.token(),
            wire::fmt_dec(resp.measured_f),
            wire::fmt_dec(resp.measured_s),
            targets,
        ),
    );
}

fn process(
    env: &mut Env,
    request: Request,
    prov: &Provenance,
    at: &str,
    depth: u32,
) -> Result<Response, ProtoError> {
    if depth > env.recursion_limit {
        return Err(ProtoError::RecursionLimit(env.recursion_limit));
    }
    let violations = validate(&request);
    if !violations.is_empty() {
        return Err(ProtoError::Invalid(violations));
    }
    // retarget network names this node gateways for
    let request = map_boundary_at(env.topo, request, at)?;

    let all_local = request.targets().iter().all(|t| t.node == at);
    match &request {
        Request::Action(action) => {
            if all_local || action.targets[0].node == at {
                let action = action.clone();
                execute_action(env, &action, prov, at)
            } else {
                let anchor = action.targets[0].node.clone();
                forward(env, request, prov, at, &anchor, depth)
            }
        }
        Request::State(state) => {
            if all_local {
                let state = state.clone();
                return create_local(env, &state, prov, at);
            }
            if is_bell_pair(state) {
                let first = state.targets[0].node.clone();
                return if first == at {
                    let state = state.clone();
                    fulfill_pair_request(env, &state, prov, at)
                } else {
                    forward(env, request, prov, at, &first, depth)
                };
            }
            // one foreign visible destination covering every target:
            // forward the request whole and let that destination plan it
            let mut dests: BTreeSet<String> = BTreeSet::new();
            for t in &state.targets {
                dests.insert(crate::topology::resolve_destination(env.topo, at, &t.node)?);
            }
            if dests.len() == 1 {
                let dest = dests.into_iter().next().unwrap();
                if dest != at {
                    return forward(env, request, prov, at, &dest, depth);
                }
            }
            let state = state.clone();
            decompose_and_run(env, &state, prov, at, depth)
        }
    }
}

fn is_bell_pair(state: &StateRequest) -> bool {
    matches!(state.spec, StateSpec::Named(NamedState::BellPhiPlus))
        && state.targets.len() == 2
        && state.targets[0].node != state.targets[1].node
}

/// Hand the request to the next physical hop toward `dest`.
fn forward(
    env: &mut Env,
    request: Request,
    prov: &Provenance,
    at: &str,
    dest: &str,
    depth: u32,
) -> Result<Response, ProtoError> {
    match next_physical_hop(env.topo, env.tables, at, dest)? {
        Some(next) => {
            env.ctx.trace.emit(
                at,
                EventKind::Msg,
                request.id(),
                format!("from={at} to={next} payload=forward:{dest}"),
            );
            Ok(deliver(env, request, prov, at, &next, depth + 1))
        }
        None => {
            // this node is where the destination is handled; reprocess in
            // place (the boundary mapping happens on entry)
            process(env, request, prov, at, depth + 1)
        }
    }
}

/// Replace target names of any network that `at` belongs to with a concrete
/// member node chosen here (the receiving gateway hosts them).
fn map_boundary_at(topo: &Topology, request: Request, at: &str) -> Result<Request, ProtoError> {
    let boundaries: BTreeSet<String> = request
        .targets()
        .iter()
        .filter(|t| topo.is_network(&t.node) && topo.is_within(at, &t.node))
        .map(|t| t.node.clone())
        .collect();
    let mut request = request;
    for boundary in boundaries {
        request = map_boundary(topo, request, &boundary, Some(at))?;
    }
    Ok(request)
}

/// Retarget a request addressed to a network onto a concrete member node:
/// the supplied chooser if it lies inside, otherwise the network's first
/// declared gateway, otherwise its smallest node.
pub fn map_boundary(
    topo: &Topology,
    mut request: Request,
    boundary: &str,
    chooser: Option<&str>,
) -> Result<Request, ProtoError> {
    if !topo.is_network(boundary) {
        return Ok(request);
    }
    let host = match chooser {
        Some(node) if topo.is_within(node, boundary) && topo.is_node(node) => node.to_string(),
        _ => {
            let gateways = topo.gateways_of(boundary)?;
            let nodes = topo.nodes_within(boundary);
            gateways
                .into_iter()
                .find(|g| topo.is_node(g))
                .or_else(|| nodes.into_iter().next())
                .ok_or_else(|| ProtoError::NoEligibleMember(boundary.to_string()))?
        }
    };
    for t in request.targets_mut() {
        if t.node == boundary {
            t.node = host.clone();
        }
    }
    Ok(request)
}

/// Create the requested state locally: bind fresh qubits under the request's
/// own names, prepare the state, and check it.
fn create_local(
    env: &mut Env,
    state: &StateRequest,
    prov: &Provenance,
    at: &str,
) -> Result<Response, ProtoError> {
    let vaddrs: Vec<u64> = state.targets.iter().map(|t| t.vaddr).collect();
    let psi =
        crate::request::target_state_with_cap(&state.spec, &vaddrs, env.ctx.store.qubit_cap())?;
    let bids: Vec<BoundId> = state
        .targets
        .iter()
        .map(|t| BoundId::new(at, prov.id(t.vaddr)))
        .collect();
    env.ctx.store.alloc_pure(&bids, &psi)?;
    let qubits = bids
        .iter()
        .map(|b| b.to_string())
        .collect::<Vec<_>>()
        .join(",");
    env.ctx.trace.emit(
        at,
        EventKind::Create,
        state.id,
        format!("qubits=({qubits}) spec={}", spec_expr(&state.spec),),
    );
    let rho = env.ctx.store.reduced_state(&bids)?;
    let resp = check_response(&rho, state)?;
    respond(env, at, &resp, &bids);
    Ok(resp)
}

fn spec_expr(spec: &StateSpec) -> String {
    wire::fmt_spec(spec)
}

/// Execute an action circuit anchored at this node. The canonical
/// teleportation pattern runs through the link layer; anything else executes
/// gate by gate with a composite trace event.
fn execute_action(
    env: &mut Env,
    action: &ActionRequest,
    prov: &Provenance,
    at: &str,
) -> Result<Response, ProtoError> {
    let node_of = |vaddr: u64| -> Option<String> {
        action
            .targets
            .iter()
            .find(|t| t.vaddr == vaddr)
            .map(|t| t.node.clone())
    };
    let bid_of =
        |vaddr: u64| -> Option<BoundId> { node_of(vaddr).map(|n| BoundId::new(n, prov.id(vaddr))) };

    if let Some((data_va, chan_a_va, chan_b_va)) = teleport_pattern(&action.circuit) {
        let data = bid_of(data_va).ok_or_else(|| missing(data_va))?;
        let chan_a = bid_of(chan_a_va).ok_or_else(|| missing(chan_a_va))?;
        let chan_b = bid_of(chan_b_va).ok_or_else(|| missing(chan_b_va))?;
        let nominal_f = env.ctx.store.pair_fidelity(&chan_a, &chan_b)?;
        let channel = EntangledPairHandle {
            a: chan_a,
            b: chan_b,
            pedigree: Pedigree::Named,
            nominal_f,
        };
        link::teleport(env.ctx, data, channel, action.id)?;
        let (resp, survivors) = action_response(env, action, prov)?;
        respond(env, at, &resp, &survivors);
        return Ok(resp);
    }

    // generic path: every gate must be local to one node
    let mut outcomes: BTreeMap<u64, bool> = BTreeMap::new();
    for item in &action.circuit {
        match item {
            CircuitItem::Gate(g) => {
                let bids: Vec<BoundId> = g
                    .targets
                    .iter()
                    .map(|&va| bid_of(va).ok_or_else(|| missing(va)))
                    .collect::<Result<_, _>>()?;
                let homes: BTreeSet<&str> = bids.iter().map(|b| b.node.as_str()).collect();
                if homes.len() != 1 {
                    return Err(ProtoError::NonLocalAction(format!(
                        "gate {} spans nodes {homes:?}",
                        g.kind.token()
                    )));
                }
                let home = bids[0].node.clone();
                let refs: Vec<&BoundId> = bids.iter().collect();
                env.ctx.store.apply_gate_at(&home, g.kind, &refs)?;
                if g.kind.arity() == 2 {
                    for b in &bids {
                        env.ctx.store.apply_depolarizing(b, env.ctx.cfg.p_gate)?;
                    }
                }
            }
            CircuitItem::Measure(va) => {
                let bid = bid_of(*va).ok_or_else(|| missing(*va))?;
                let sel = env.ctx.select_outcome();
                let (m, _) = env.ctx.store.measure_and_release(&bid, sel)?;
                outcomes.insert(*va, m);
            }
            CircuitItem::CorrectX { target, cond } | CircuitItem::CorrectZ { target, cond } => {
                let fire = *outcomes.get(cond).ok_or_else(|| {
                    ProtoError::NonLocalAction(format!(
                        "correction conditioned on unmeasured address {cond}"
                    ))
                })?;
                if fire {
                    let bid = bid_of(*target).ok_or_else(|| missing(*target))?;
                    if bid.node != at {
                        // the outcome travels classically before the remote
                        // node can correct
                        env.ctx.trace.emit(
                            at,
                            EventKind::Msg,
                            action.id,
                            format!("from={at} to={} payload=corrections:{cond}", bid.node),
                        );
                    }
                    let kind = if matches!(item, CircuitItem::CorrectX { .. }) {
                        crate::engine::GateKind::X
                    } else {
                        crate::engine::GateKind::Z
                    };
                    env.ctx
                        .store
                        .apply_gate_at(&bid.node.clone(), kind, &[&bid])?;
                }
            }
        }
    }
    let outcome_list = outcomes
        .iter()
        .map(|(va, m)| format!("{va}:{}", u8::from(*m)))
        .collect::<Vec<_>>()
        .join(",");
    let target_list = action
        .targets
        .iter()
        .map(|t| format!("{}@{}", prov.id(t.vaddr), t.node))
        .collect::<Vec<_>>()
        .join(",");
    env.ctx.trace.emit(
        at,
        EventKind::Create,
        action.id,
        format!(
            "action=[{}] qubits=({target_list}) outcomes=({outcome_list}) pgate={}",
            circuit_expr(&action.circuit),
            wire::fmt_dec(env.ctx.cfg.p_gate),
        ),
    );
    let (resp, survivors) = action_response(env, action, prov)?;
    respond(env, at, &resp, &survivors);
    Ok(resp)
}

fn missing(vaddr: u64) -> ProtoError {
    ProtoError::Invalid(vec![Violation::UnknownCircuitAddress(vaddr)])
}

fn circuit_expr(circuit: &[CircuitItem]) -> String {
    wire::fmt_items(circuit)
}

/// Actions have no pure target state; the response reports the reduced state
/// of whichever action targets survive the circuit, with a vacuous fidelity.
fn action_response(
    env: &mut Env,
    action: &ActionRequest,
    prov: &Provenance,
) -> Result<(Response, Vec<BoundId>), ProtoError> {
    let survivors: Vec<BoundId> = action
        .targets
        .iter()
        .map(|t| BoundId::new(t.node.clone(), prov.id(t.vaddr)))
        .filter(|b| env.ctx.store.is_bound(b))
        .collect();
    let rho = env.ctx.store.reduced_state(&survivors)?;
    let measured_s = rho.entropy();
    let resp = Response {
        id: action.id,
        rho,
        measured_f: 1.0,
        measured_s,
        status: Status::Ok,
    };
    Ok((resp, survivors))
}

/// Recognize the canonical teleport circuit
/// CNOT(d,a); H(d); M(d); M(a); XIF(b,a); ZIF(b,d) and pull out (d, a, b).
fn teleport_pattern(circuit: &[CircuitItem]) -> Option<(u64, u64, u64)> {
    use CircuitItem::*;
    match circuit {
        [Gate(g1), Gate(g2), Measure(m1), Measure(m2), CorrectX {
            target: bx,
            cond: cx,
        }, CorrectZ {
            target: bz,
            cond: cz,
        }] => {
            if g1.kind != crate::engine::GateKind::Cnot || g2.kind != crate::engine::GateKind::H {
                return None;
            }
            let (d, a) = (g1.targets[0], g1.targets[1]);
            if g2.targets[0] != d || *m1 != d || *m2 != a {
                return None;
            }
            if bx != bz || *cx != a || *cz != d {
                return None;
            }
            Some((d, a, *bx))
        }
        _ => None,
    }
}

/// Break a multi-destination state request into creation + pairs +
/// teleports around a chosen center.
pub fn decompose(
    env: &mut Env,
    state: &StateRequest,
    prov: &Provenance,
    at: &str,
    strategy: &Strategy,
) -> Result<SubRequestDag, ProtoError> {
    if strategy.kind == StrategyKind::TeleportGates {
        return Err(ProtoError::UnsupportedStrategy(StrategyKind::TeleportGates));
    }
    env.reserve_ids_above(state.id);
    let target_nodes: Vec<String> = state.targets.iter().map(|t| t.node.clone()).collect();
    let center = select_center(env.topo, at, &target_nodes, &link_cost)?;
    let namespace = Provenance::new(at, state.id);

    // every target inside the center network: hand the whole request over
    if env.topo.is_network(&center)
        && state
            .targets
            .iter()
            .all(|t| env.topo.is_within(&t.node, &center))
    {
        let forwarded = StateRequest {
            id: env.fresh_id(),
            ..state.clone()
        };
        return Ok(SubRequestDag {
            namespace: prov.clone(),
            nodes: vec![DagNode {
                executor: center,
                request: Request::State(forwarded),
            }],
            edges: Vec::new(),
            delivery: Vec::new(),
        });
    }

    let mut next_vaddr = state.targets.iter().map(|t| t.vaddr).max().unwrap_or(0) + 1;
    let mut mint = || {
        let v = next_vaddr;
        next_vaddr += 1;
        v
    };

    let k = state.targets.len();
    let creation_vaddrs: Vec<u64> = (0..k).map(|_| mint()).collect();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut delivery = Vec::new();

    let creation = StateRequest {
        id: env.fresh_id(),
        spec: state.spec.clone(),
        f_min: state.f_min,
        s_max: state.s_max,
        targets: creation_vaddrs
            .iter()
            .map(|&va| crate::request::QubitAddress::new(center.clone(), va))
            .collect(),
        encoding: Encoding::Raw,
    };
    nodes.push(DagNode {
        executor: center.clone(),
        request: Request::State(creation),
    });

    for (i, target) in state.targets.iter().enumerate() {
        delivery.push((creation_vaddrs[i], target.node.clone(), target.vaddr));
        if target.node == center {
            continue; // already where it belongs
        }
        let pair_center = mint();
        let pair_far = mint();
        let pair = StateRequest {
            id: env.fresh_id(),
            spec: StateSpec::Named(NamedState::BellPhiPlus),
            f_min: state.f_min,
            s_max: state.s_max,
            targets: vec![
                crate::request::QubitAddress::new(center.clone(), pair_center),
                crate::request::QubitAddress::new(target.node.clone(), pair_far),
            ],
            encoding: Encoding::Raw,
        };
        let pair_idx = nodes.len();
        nodes.push(DagNode {
            executor: center.clone(),
            request: Request::State(pair),
        });
        let teleport = ActionRequest {
            id: env.fresh_id(),
            circuit: vec![
                CircuitItem::Gate(crate::engine::gate::cnot(creation_vaddrs[i], pair_center)),
                CircuitItem::Gate(crate::engine::gate::h(creation_vaddrs[i])),
                CircuitItem::Measure(creation_vaddrs[i]),
                CircuitItem::Measure(pair_center),
                CircuitItem::CorrectX {
                    target: pair_far,
                    cond: pair_center,
                },
                CircuitItem::CorrectZ {
                    target: pair_far,
                    cond: creation_vaddrs[i],
                },
            ],
            f_min: state.f_min,
            s_max: state.s_max,
            targets: vec![
                crate::request::QubitAddress::new(center.clone(), creation_vaddrs[i]),
                crate::request::QubitAddress::new(center.clone(), pair_center),
                crate::request::QubitAddress::new(target.node.clone(), pair_far),
            ],
            encoding: Encoding::Raw,
        };
        let teleport_idx = nodes.len();
        nodes.push(DagNode {
            executor: center.clone(),
            request: Request::Action(teleport),
        });
        edges.push((0, teleport_idx));
        edges.push((pair_idx, teleport_idx));
    }

    Ok(SubRequestDag {
        namespace,
        nodes,
        edges,
        delivery,
    })
}

/// Deterministic topological order (ready nodes run in index order).
pub fn topological_order(dag: &SubRequestDag) -> Result<Vec<usize>, ProtoError> {
    let n = dag.nodes.len();
    let mut indegree = vec![0usize; n];
    for &(_, to) in &dag.edges {
        indegree[to] += 1;
    }
    let mut order = Vec::with_capacity(n);
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    while let Some(&next) = ready.iter().next() {
        ready.remove(&next);
        order.push(next);
        for &(from, to) in &dag.edges {
            if from == next {
                indegree[to] -= 1;
                if indegree[to] == 0 {
                    ready.insert(to);
                }
            }
        }
    }
    if order.len() != n {
        return Err(ProtoError::CycleDetected);
    }
    Ok(order)
}

/// Run a sub-request dag to completion in dependency order. A FAIL from any
/// sub-request fails the whole dag (its namespace is cleaned up by the
/// caller); constraint violations propagate to the final check instead.
pub fn execute_dag(
    env: &mut Env,
    dag: &SubRequestDag,
    at: &str,
    depth: u32,
) -> Result<Vec<Response>, ProtoError> {
    execute_dag_in_order(env, dag, at, depth, &topological_order(dag)?)
}

/// As [`execute_dag`] but with an explicit (already topological) order,
/// which lets tests shuffle independent sub-requests.
pub fn execute_dag_in_order(
    env: &mut Env,
    dag: &SubRequestDag,
    at: &str,
    depth: u32,
    order: &[usize],
) -> Result<Vec<Response>, ProtoError> {
    let mut responses: Vec<Option<Response>> = vec![None; dag.nodes.len()];
    for &idx in order {
        let node = &dag.nodes[idx];
        let resp = deliver(env, node.request.clone(), &dag.namespace, at, at, depth + 1);
        if resp.status == Status::Fail {
            let id = resp.id;
            responses[idx] = Some(resp);
            return Err(ProtoError::SubRequestFailed { id });
        }
        responses[idx] = Some(resp);
    }
    Ok(responses.into_iter().map(|r| r.expect("all run")).collect())
}

fn decompose_and_run(
    env: &mut Env,
    state: &StateRequest,
    prov: &Provenance,
    at: &str,
    depth: u32,
) -> Result<Response, ProtoError> {
    let dag = decompose(env, state, prov, at, &Strategy::default())?;
    let subs = dag
        .nodes
        .iter()
        .map(|n| n.request.id().to_string())
        .collect::<Vec<_>>()
        .join(",");
    let deps = dag
        .edges
        .iter()
        .map(|&(a, b)| {
            format!(
                "{}->{}",
                dag.nodes[a].request.id(),
                dag.nodes[b].request.id()
            )
        })
        .collect::<Vec<_>>()
        .join(",");
    let center = dag
        .nodes
        .first()
        .map(|n| n.executor.clone())
        .unwrap_or_default();
    env.ctx.trace.emit(
        at,
        EventKind::Decompose,
        state.id,
        format!("center={center} subs=({subs}) deps=({deps})"),
    );

    let outcome = (|| -> Result<Response, ProtoError> {
        execute_dag(env, &dag, at, depth)?;

        // hand the delivered qubits over to the parent's own names
        let mut bids = Vec::with_capacity(state.targets.len());
        for &(built_vaddr, ref node, parent_vaddr) in &dag.delivery {
            let built = BoundId::new(node.clone(), dag.namespace.id(built_vaddr));
            let final_bid = BoundId::new(node.clone(), prov.id(parent_vaddr));
            env.ctx.store.relabel(&built, &final_bid)?;
            env.ctx.trace.emit(
                node,
                EventKind::Rebind,
                state.id,
                format!("old={built} new={final_bid}"),
            );
            bids.push(final_bid);
        }
        if dag.delivery.is_empty() {
            // the whole request was forwarded; qubits are already under the
            // parent names
            bids = state
                .targets
                .iter()
                .map(|t| BoundId::new(t.node.clone(), prov.id(t.vaddr)))
                .collect();
        }
        let rho = env.ctx.store.reduced_state(&bids)?;
        let resp = check_response(&rho, state)?;
        respond(env, at, &resp, &bids);
        Ok(resp)
    })();

    if outcome.is_err() {
        release_namespace(env, &dag.namespace);
    }
    outcome
}

/// Free every binding minted under a namespace (failure cleanup).
fn release_namespace(env: &mut Env, ns: &Provenance) {
    let doomed: Vec<BoundId> = env
        .ctx
        .store
        .bound_ids()
        .filter(|b| b.id.requester == ns.requester && b.id.request_id == ns.request_id)
        .cloned()
        .collect();
    for bid in doomed {
        let _ = env.ctx.store.release(&bid);
    }
}

/// Build an end-to-end Bell pair between the two named target nodes:
/// generate elementary pairs along the physical path, purify each link up to
/// its budget, swap along the balanced plan, then bind the ends to the
/// request's own names and check the delivered state.
fn fulfill_pair_request(
    env: &mut Env,
    state: &StateRequest,
    prov: &Provenance,
    at: &str,
) -> Result<Response, ProtoError> {
    let x = &state.targets[0];
    let y = &state.targets[1];
    let chain = physical_path(env.topo, &x.node, &y.node, &link_cost)?;
    let links = chain.len() - 1;
    let per_link_target = if links > 0 {
        state.f_min.powf(1.0 / links as f64)
    } else {
        state.f_min
    };
    let ns = Provenance::new(at, state.id);
    let outcome = (|| -> Result<Response, ProtoError> {
        let plan = swap_order(&chain);
        // the internal namespace may coincide with the request's own (a pair
        // request submitted directly at this node), so mint above its vaddrs
        let mut vaddr = state.targets.iter().map(|t| t.vaddr).max().unwrap_or(0);
        let mut mint = |node: &str| -> BoundId {
            vaddr += 1;
            BoundId::new(node, ns.id(vaddr))
        };
        let mut link_budgets: BTreeMap<(String, String), u32> = BTreeMap::new();
        let mut pairs: BTreeMap<(String, String), EntangledPairHandle> = BTreeMap::new();
        for (u, v) in plan.leaves() {
            let handle = build_link_pair(
                env,
                state,
                &mut mint,
                &mut link_budgets,
                (&u, &v),
                per_link_target,
            )?;
            pairs.insert((u, v), handle);
        }
        let end = execute_swaps(env, &plan, &mut pairs, state.id)?;

        // bind the delivered ends to the request's own addresses
        let end_x = end.endpoint_at(&x.node).expect("pair spans x").clone();
        let end_y = end.endpoint_at(&y.node).expect("pair spans y").clone();
        let bid_x = BoundId::new(x.node.clone(), prov.id(x.vaddr));
        let bid_y = BoundId::new(y.node.clone(), prov.id(y.vaddr));
        env.ctx.store.relabel(&end_x, &bid_x)?;
        env.ctx.trace.emit(
            &x.node,
            EventKind::Rebind,
            state.id,
            format!("old={end_x} new={bid_x}"),
        );
        env.ctx.store.relabel(&end_y, &bid_y)?;
        env.ctx.trace.emit(
            &y.node,
            EventKind::Rebind,
            state.id,
            format!("old={end_y} new={bid_y}"),
        );
        let rho = env
            .ctx
            .store
            .reduced_state(&[bid_x.clone(), bid_y.clone()])?;
        let resp = check_response(&rho, state)?;
        respond(env, at, &resp, &[bid_x, bid_y]);
        Ok(resp)
    })();
    if outcome.is_err() {
        release_namespace(env, &ns);
    }
    outcome
}

/// One link's pair: generate (with retries), then purify toward the
/// per-link fidelity budget within the round cap.
fn build_link_pair(
    env: &mut Env,
    state: &StateRequest,
    mint: &mut dyn FnMut(&str) -> BoundId,
    budgets: &mut BTreeMap<(String, String), u32>,
    ends: (&str, &str),
    per_link_target: f64,
) -> Result<EntangledPairHandle, ProtoError> {
    let (u, v) = ends;
    let link = env
        .topo
        .link_between(u, v)
        .ok_or_else(|| TopologyError::NoLink(u.to_string(), v.to_string()))?
        .clone();
    let budget = budgets.entry((u.to_string(), v.to_string())).or_insert(0);
    let request_id = state.id;

    let mut generate =
        |env: &mut Env, budget: &mut u32| -> Result<EntangledPairHandle, ProtoError> {
            for attempt in 1..=env.ctx.cfg.retry_cap + 1 {
                if *budget >= env.ctx.cfg.pair_cap {
                    return Err(ProtoError::PairCapExceeded {
                        a: u.to_string(),
                        b: v.to_string(),
                        used: *budget,
                        cap: env.ctx.cfg.pair_cap,
                    });
                }
                let a = mint(u);
                let b = mint(v);
                match link::generate_pair(env.ctx, &link, a, b, request_id, attempt) {
                    Ok(handle) => {
                        *budget += 1;
                        return Ok(handle);
                    }
                    Err(LinkError::GenerationFailed { .. }) => continue,
                    Err(e) => return Err(e.into()),
                }
            }
            Err(ProtoError::GenerationExhausted {
                a: u.to_string(),
                b: v.to_string(),
                attempts: env.ctx.cfg.retry_cap + 1,
            })
        };

    let mut keep = generate(env, budget)?;
    let mut rounds = 0;
    while keep.nominal_f < per_link_target - 1e-12 && rounds < env.ctx.cfg.purify_rounds {
        let sacrifice = generate(env, budget)?;
        rounds += 1;
        match link::purify(env.ctx, keep.clone(), sacrifice, request_id) {
            Ok(updated) => keep = updated,
            Err(LinkError::PurificationFailed) => {
                // both pairs are gone; start the link over
                keep = generate(env, budget)?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(keep)
}

fn execute_swaps(
    env: &mut Env,
    plan: &SwapPlan,
    pairs: &mut BTreeMap<(String, String), EntangledPairHandle>,
    request_id: u64,
) -> Result<EntangledPairHandle, ProtoError> {
    match plan {
        SwapPlan::Link { a, b } => Ok(pairs
            .remove(&(a.clone(), b.clone()))
            .expect("link pair built")),
        SwapPlan::Swap { left, right, .. } => {
            let l = execute_swaps(env, left, pairs, request_id)?;
            let r = execute_swaps(env, right, pairs, request_id)?;
            Ok(link::swap(env.ctx, l, r, request_id)?)
        }
    }
}

#[cfg(test)]
mod tests;
