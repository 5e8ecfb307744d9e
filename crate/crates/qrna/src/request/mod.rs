//! The protocol data model: state specifications, qubit naming and virtual
//! addressing, request/action/response tuples, and constraint checking of
//! delivered states.
//!
//! A request asks the network for a pure state |psi> on a set of
//! (node, virtual address) targets, constrained by a minimum fidelity and a
//! maximum von Neumann entropy; the response reports the delivered density
//! matrix together with both measured quantities.

pub mod vmap;
pub mod wire;

use num_complex::Complex64;
use thiserror::Error;

use crate::engine::{gate::GateOp, DensityMatrix, EngineError, StateVector, DEFAULT_QUBIT_CAP};

pub use vmap::{VirtualMap, VmapError};
pub use wire::{decode, encode, ParseError};

/// Gate applications inside request circuits reference qubits by virtual
/// address.
pub type CircuitGate = GateOp<u64>;

/// Built-in state families the network knows how to build without an
/// explicit circuit.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedState {
    /// |Phi+> = (|00> + |11>)/sqrt(2).
    BellPhiPlus,
    /// (|0...0> + |1...1>)/sqrt(2) on n qubits.
    Ghz(usize),
    /// alpha|0...0> + beta|1...1> on n qubits.
    Fanout {
        alpha: Complex64,
        beta: Complex64,
        n: usize,
    },
    /// H on every qubit, then CZ on each adjacent pair.
    LinearCluster(usize),
}

impl NamedState {
    pub fn n_qubits(&self) -> usize {
        match *self {
            NamedState::BellPhiPlus => 2,
            NamedState::Ghz(n) => n,
            NamedState::Fanout { n, .. } => n,
            NamedState::LinearCluster(n) => n,
        }
    }
}

/// What state a request asks for: an explicit circuit over the request's
/// virtual addresses (starting from all-|0>), or a named family.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Circuit(Vec<CircuitGate>),
    Named(NamedState),
}

/// A (node-or-network name, virtual address) pair naming one requested qubit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QubitAddress {
    pub node: String,
    pub vaddr: u64,
}

impl QubitAddress {
    pub fn new(node: impl Into<String>, vaddr: u64) -> QubitAddress {
        QubitAddress {
            node: node.into(),
            vaddr,
        }
    }
}

impl std::fmt::Display for QubitAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.node, self.vaddr)
    }
}

/// Globally scoped virtual qubit name: the requesting node and request id
/// qualify the requester-chosen virtual address.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FullVirtualId {
    pub requester: String,
    pub request_id: u64,
    pub vaddr: u64,
}

impl FullVirtualId {
    pub fn new(requester: impl Into<String>, request_id: u64, vaddr: u64) -> FullVirtualId {
        FullVirtualId {
            requester: requester.into(),
            request_id,
            vaddr,
        }
    }
}

impl std::fmt::Display for FullVirtualId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}.{}", self.requester, self.request_id, self.vaddr)
    }
}

/// Requested encoding of the delivered state. Only `Raw` (unencoded qubits)
/// is executable; other tokens parse but fail validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Encoding {
    Raw,
    Other(String),
}

/// Request for a state to be created across a set of targets.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRequest {
    pub id: u64,
    pub spec: StateSpec,
    pub f_min: f64,
    pub s_max: f64,
    pub targets: Vec<QubitAddress>,
    pub encoding: Encoding,
}

/// One step of an action circuit: a gate, a Z measurement, or a Pauli
/// correction conditioned on an earlier measurement outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum CircuitItem {
    Gate(CircuitGate),
    Measure(u64),
    /// Apply X to `target` iff the recorded outcome at `cond` was 1.
    CorrectX {
        target: u64,
        cond: u64,
    },
    /// Apply Z to `target` iff the recorded outcome at `cond` was 1.
    CorrectZ {
        target: u64,
        cond: u64,
    },
}

impl CircuitItem {
    /// Virtual addresses this item touches.
    pub fn vaddrs(&self) -> Vec<u64> {
        match self {
            CircuitItem::Gate(g) => g.targets.clone(),
            CircuitItem::Measure(a) => vec![*a],
            CircuitItem::CorrectX { target, cond } | CircuitItem::CorrectZ { target, cond } => {
                vec![*target, *cond]
            }
        }
    }
}

/// Request for operations to be executed on already-named qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRequest {
    pub id: u64,
    pub circuit: Vec<CircuitItem>,
    pub f_min: f64,
    pub s_max: f64,
    pub targets: Vec<QubitAddress>,
    pub encoding: Encoding,
}

/// Either kind of request, as carried on the wire.
#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    State(StateRequest),
    Action(ActionRequest),
}

impl Request {
    pub fn id(&self) -> u64 {
        match self {
            Request::State(r) => r.id,
            Request::Action(r) => r.id,
        }
    }

    pub fn targets(&self) -> &[QubitAddress] {
        match self {
            Request::State(r) => &r.targets,
            Request::Action(r) => &r.targets,
        }
    }

    pub fn targets_mut(&mut self) -> &mut Vec<QubitAddress> {
        match self {
            Request::State(r) => &mut r.targets,
            Request::Action(r) => &mut r.targets,
        }
    }

    pub fn f_min(&self) -> f64 {
        match self {
            Request::State(r) => r.f_min,
            Request::Action(r) => r.f_min,
        }
    }

    pub fn s_max(&self) -> f64 {
        match self {
            Request::State(r) => r.s_max,
            Request::Action(r) => r.s_max,
        }
    }
}

/// Outcome classification of a completed request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ConstraintViolation,
    Fail,
}

impl Status {
    pub fn token(self) -> &'static str {
        match self {
            Status::Ok => "OK",
            Status::ConstraintViolation => "CONSTRAINT_VIOLATION",
            Status::Fail => "FAIL",
        }
    }

    pub fn from_token(tok: &str) -> Option<Status> {
        Some(match tok {
            "OK" => Status::Ok,
            "CONSTRAINT_VIOLATION" => Status::ConstraintViolation,
            "FAIL" => Status::Fail,
            _ => return None,
        })
    }
}

/// The delivered result for a request: the density matrix over the request's
/// targets (in target order) plus the recomputed fidelity and entropy.
#[derive(Debug, Clone)]
pub struct Response {
    pub id: u64,
    pub rho: DensityMatrix,
    pub measured_f: f64,
    pub measured_s: f64,
    pub status: Status,
}

impl Response {
    /// The classical summary carried on the wire; the density matrix itself
    /// is the delivered quantum state and never serializes.
    pub fn summary(&self) -> ResponseSummary {
        ResponseSummary {
            id: self.id,
            status: self.status,
            measured_f: self.measured_f,
            measured_s: self.measured_s,
        }
    }

    /// A FAIL response carrying no qubits.
    pub fn failed(id: u64) -> Response {
        Response {
            id,
            rho: DensityMatrix::scalar(),
            measured_f: 0.0,
            measured_s: 0.0,
            status: Status::Fail,
        }
    }
}

/// Wire-level response line.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSummary {
    pub id: u64,
    pub status: Status,
    pub measured_f: f64,
    pub measured_s: f64,
}

/// Any message of the request grammar.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Request(Request),
    Response(ResponseSummary),
}

/// A single validation failure, reported as data.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("f_min {0} outside [0,1]")]
    FidelityRange(f64),
    #[error("s_max {0} is negative or not finite")]
    EntropyRange(f64),
    #[error("request has no targets")]
    NoTargets,
    #[error("duplicate target {0}")]
    DuplicateTarget(QubitAddress),
    #[error("spec takes {spec} qubits but request lists {targets} targets")]
    QubitCountMismatch { spec: usize, targets: usize },
    #[error("circuit references undeclared virtual address {0}")]
    UnknownCircuitAddress(u64),
    #[error("circuit references ambiguous virtual address {0} (several targets share it)")]
    AmbiguousCircuitAddress(u64),
    #[error("unsupported encoding {0:?}")]
    UnsupportedEncoding(String),
    #[error("fanout amplitudes break normalization: |a|^2+|b|^2 = {0}")]
    NotNormalized(f64),
    #[error("node name {0:?} is not a valid token")]
    BadNodeName(String),
    #[error("named state has zero qubits")]
    EmptySpec,
    #[error("correction condition {0} must be a measured address")]
    BadCorrectionSource(u64),
}

#[derive(Debug, Error)]
pub enum RequestError {
    #[error("invalid request: {0:?}")]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// True for the token charset shared by node names and identifiers in the
/// wire grammar.
pub fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().unwrap().is_ascii_alphabetic()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Check every type invariant of a request; violations come back as data.
pub fn validate(request: &Request) -> Vec<Violation> {
    let mut out = Vec::new();
    let targets = request.targets();
    let f_min = request.f_min();
    let s_max = request.s_max();
    if !(0.0..=1.0).contains(&f_min) || !f_min.is_finite() {
        out.push(Violation::FidelityRange(f_min));
    }
    if s_max < 0.0 || !s_max.is_finite() {
        out.push(Violation::EntropyRange(s_max));
    }
    if targets.is_empty() {
        out.push(Violation::NoTargets);
    }
    for (i, t) in targets.iter().enumerate() {
        if targets[i + 1..].contains(t) {
            out.push(Violation::DuplicateTarget(t.clone()));
        }
        if !valid_name(&t.node) {
            out.push(Violation::BadNodeName(t.node.clone()));
        }
    }
    let encoding = match request {
        Request::State(r) => &r.encoding,
        Request::Action(r) => &r.encoding,
    };
    if let Encoding::Other(name) = encoding {
        out.push(Violation::UnsupportedEncoding(name.clone()));
    }
    match request {
        Request::State(r) => validate_spec(&r.spec, targets, &mut out),
        Request::Action(r) => validate_circuit(&r.circuit, targets, &mut out),
    }
    out
}

fn vaddr_unambiguous(targets: &[QubitAddress], vaddr: u64) -> Result<bool, ()> {
    let mut hits = targets.iter().filter(|t| t.vaddr == vaddr);
    match (hits.next(), hits.next()) {
        (None, _) => Ok(false),
        (Some(_), None) => Ok(true),
        (Some(_), Some(_)) => Err(()),
    }
}

fn validate_spec(spec: &StateSpec, targets: &[QubitAddress], out: &mut Vec<Violation>) {
    match spec {
        StateSpec::Named(named) => {
            let n = named.n_qubits();
            if n == 0 {
                out.push(Violation::EmptySpec);
            } else if !targets.is_empty() && n != targets.len() {
                out.push(Violation::QubitCountMismatch {
                    spec: n,
                    targets: targets.len(),
                });
            }
            if let NamedState::Fanout { alpha, beta, .. } = named {
                let norm = alpha.norm_sqr() + beta.norm_sqr();
                if (norm - 1.0).abs() > 1e-12 {
                    out.push(Violation::NotNormalized(norm));
                }
            }
        }
        StateSpec::Circuit(gates) => {
            for g in gates {
                for &a in &g.targets {
                    match vaddr_unambiguous(targets, a) {
                        Ok(true) => {}
                        Ok(false) => out.push(Violation::UnknownCircuitAddress(a)),
                        Err(()) => out.push(Violation::AmbiguousCircuitAddress(a)),
                    }
                }
            }
        }
    }
}

fn validate_circuit(circuit: &[CircuitItem], targets: &[QubitAddress], out: &mut Vec<Violation>) {
    let mut measured: Vec<u64> = Vec::new();
    for item in circuit {
        for a in item.vaddrs() {
            match vaddr_unambiguous(targets, a) {
                Ok(true) => {}
                Ok(false) => out.push(Violation::UnknownCircuitAddress(a)),
                Err(()) => out.push(Violation::AmbiguousCircuitAddress(a)),
            }
        }
        match item {
            CircuitItem::Measure(a) => measured.push(*a),
            CircuitItem::CorrectX { cond, .. } | CircuitItem::CorrectZ { cond, .. } => {
                if !measured.contains(cond) {
                    out.push(Violation::BadCorrectionSource(*cond));
                }
            }
            CircuitItem::Gate(_) => {}
        }
    }
}

/// The pure state a spec asks for. `vaddr_order` gives the request's target
/// virtual addresses in target order, which fixes the tensor position of
/// each circuit address.
pub fn target_state(spec: &StateSpec, vaddr_order: &[u64]) -> Result<StateVector, RequestError> {
    target_state_with_cap(spec, vaddr_order, DEFAULT_QUBIT_CAP)
}

pub fn target_state_with_cap(
    spec: &StateSpec,
    vaddr_order: &[u64],
    cap: usize,
) -> Result<StateVector, RequestError> {
    let n = match spec {
        StateSpec::Named(named) => named.n_qubits(),
        StateSpec::Circuit(_) => vaddr_order.len(),
    };
    if n == 0 {
        return Err(RequestError::Invalid(vec![Violation::EmptySpec]));
    }
    if n > cap {
        return Err(RequestError::Engine(EngineError::ResourceLimit {
            requested: n,
            cap,
        }));
    }
    match spec {
        StateSpec::Named(NamedState::BellPhiPlus) => {
            let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            Ok(StateVector::fanout(r, r, 2).map_err(RequestError::Engine)?)
        }
        StateSpec::Named(NamedState::Ghz(n)) => {
            let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            Ok(StateVector::fanout(r, r, *n).map_err(RequestError::Engine)?)
        }
        StateSpec::Named(NamedState::Fanout { alpha, beta, n }) => {
            Ok(StateVector::fanout(*alpha, *beta, *n).map_err(RequestError::Engine)?)
        }
        StateSpec::Named(NamedState::LinearCluster(n)) => {
            let mut v = StateVector::zero(*n);
            for gate in cluster_gates(*n) {
                v.apply_gate(&gate).map_err(RequestError::Engine)?;
            }
            Ok(v)
        }
        StateSpec::Circuit(gates) => {
            let mut v = StateVector::zero(n);
            for g in gates {
                let mut positions = Vec::with_capacity(g.targets.len());
                for &a in &g.targets {
                    let p = vaddr_order.iter().position(|&x| x == a).ok_or_else(|| {
                        RequestError::Invalid(vec![Violation::UnknownCircuitAddress(a)])
                    })?;
                    positions.push(p);
                }
                let g2 = GateOp {
                    kind: g.kind,
                    targets: positions,
                };
                v.apply_gate(&g2).map_err(RequestError::Engine)?;
            }
            Ok(v)
        }
    }
}

/// The canonical circuit for a linear cluster state: H everywhere, then CZ
/// along the chain. Positions index tensor factors.
pub fn cluster_gates(n: usize) -> Vec<GateOp<usize>> {
    let mut gates = Vec::new();
    for k in 0..n {
        gates.push(crate::engine::gate::h(k));
    }
    for k in 0..n.saturating_sub(1) {
        gates.push(crate::engine::gate::cz(k, k + 1));
    }
    gates
}

/// Measure a delivered state against a request's constraints. `rho`'s qubit
/// order must already follow the request's target order.
pub fn check_response(
    rho: &DensityMatrix,
    request: &StateRequest,
) -> Result<Response, RequestError> {
    if rho.n_qubits() != request.targets.len() {
        return Err(RequestError::Engine(EngineError::Shape(format!(
            "delivered state has {} qubits for {} targets",
            rho.n_qubits(),
            request.targets.len()
        ))));
    }
    let vaddrs: Vec<u64> = request.targets.iter().map(|t| t.vaddr).collect();
    let target = target_state(&request.spec, &vaddrs)?;
    let measured_f = rho.fidelity(&target).map_err(RequestError::Engine)?;
    let measured_s = rho.entropy();
    let status = if measured_f >= request.f_min && measured_s <= request.s_max {
        Status::Ok
    } else {
        Status::ConstraintViolation
    };
    Ok(Response {
        id: request.id,
        rho: rho.clone(),
        measured_f,
        measured_s,
        status,
    })
}
