//! Flat replay oracle.
//!
//! Reads a run trace and re-executes every physical operation it records in
//! one flat density-matrix register: no virtual maps, no routing, no
//! protocol bookkeeping, just the recorded gates, noise channels and forced
//! measurement branches. Qubits allocate on first use and leave the register
//! the moment they are measured or discarded, so the register stays within
//! the qubit cap. Each response line is then re-checked against the replayed
//! state, independently of everything the protocol engine computed along the
//! way.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{
    gate::GateOp, DensityMatrix, EngineError, GateKind, NoiseChannel, OutcomeSelect, QubitLabel,
    DEFAULT_QUBIT_CAP,
};
use crate::request::{
    target_state, wire, CircuitItem, Message, ParseError, Request, RequestError, StateSpec,
};
use crate::trace::{detail_fields, EventKind, Trace, TraceEvent};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("event {seq}: {message}")]
    Event { seq: u64, message: String },
    #[error(transparent)]
    Wire(#[from] ParseError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Request(#[from] RequestError),
}

/// One replayed response line.
#[derive(Debug, Clone)]
pub struct OracleRow {
    pub request_id: u64,
    pub reported_status: String,
    pub reported_f: f64,
    pub reported_s: f64,
    /// Recomputed from the replayed state; absent for responses that
    /// delivered no qubits.
    pub oracle_f: Option<f64>,
    pub oracle_s: Option<f64>,
    pub rho: Option<DensityMatrix>,
}

impl OracleRow {
    /// Largest |reported - replayed| over fidelity and entropy.
    pub fn deviation(&self) -> f64 {
        match (self.oracle_f, self.oracle_s) {
            (Some(f), Some(s)) => (f - self.reported_f).abs().max((s - self.reported_s).abs()),
            _ => 0.0,
        }
    }
}

/// One flat register of labeled qubits, keyed by the trace's qubit tokens.
struct FlatRegister {
    reg: Option<DensityMatrix>,
    labels: BTreeMap<String, QubitLabel>,
    next_label: u64,
    cap: usize,
}

impl FlatRegister {
    fn new(cap: usize) -> FlatRegister {
        FlatRegister {
            reg: None,
            labels: BTreeMap::new(),
            next_label: 0,
            cap,
        }
    }

    fn label(&self, key: &str, seq: u64) -> Result<QubitLabel, OracleError> {
        self.labels
            .get(key)
            .copied()
            .ok_or_else(|| OracleError::Event {
                seq,
                message: format!("unknown qubit token {key:?}"),
            })
    }

    fn admit(
        &mut self,
        keys: &[String],
        factor: DensityMatrix,
        seq: u64,
    ) -> Result<(), OracleError> {
        for key in keys {
            if self.labels.contains_key(key) {
                return Err(OracleError::Event {
                    seq,
                    message: format!("qubit token {key:?} allocated twice"),
                });
            }
        }
        let live = self.reg.as_ref().map(|r| r.n_qubits()).unwrap_or(0);
        if live + keys.len() > self.cap {
            return Err(OracleError::Engine(EngineError::ResourceLimit {
                requested: live + keys.len(),
                cap: self.cap,
            }));
        }
        for (key, &label) in keys.iter().zip(factor.qubit_order()) {
            self.labels.insert(key.clone(), label);
        }
        self.reg = Some(match self.reg.take() {
            None => factor,
            Some(reg) => reg.tensor(&factor)?,
        });
        self.validate()
    }

    fn alloc_fresh_labels(&mut self, n: usize) -> Vec<QubitLabel> {
        (0..n)
            .map(|_| {
                let l = QubitLabel(self.next_label);
                self.next_label += 1;
                l
            })
            .collect()
    }

    fn apply(&mut self, kind: GateKind, keys: &[&str], seq: u64) -> Result<(), OracleError> {
        let labels: Vec<QubitLabel> = keys
            .iter()
            .map(|k| self.label(k, seq))
            .collect::<Result<_, _>>()?;
        let gate = GateOp::new(kind, labels)?;
        let reg = self.reg.take().expect("register live");
        self.reg = Some(reg.apply_gate(&gate)?);
        self.validate()
    }

    fn depolarize(&mut self, key: &str, p: f64, seq: u64) -> Result<(), OracleError> {
        if p == 0.0 {
            return Ok(());
        }
        let label = self.label(key, seq)?;
        let reg = self.reg.take().expect("register live");
        self.reg = Some(reg.apply_channel(NoiseChannel::Depolarizing { p }, &[label])?);
        self.validate()
    }

    /// Project a qubit onto the recorded outcome, renormalize, and remove it
    /// from the register.
    fn project_out(&mut self, key: &str, outcome: bool, seq: u64) -> Result<(), OracleError> {
        let label = self.label(key, seq)?;
        let reg = self.reg.take().expect("register live");
        let (_, _, post) = reg.measure_z(label, OutcomeSelect::Forced(outcome))?;
        self.remove(key, label, post)
    }

    /// Trace a qubit out without measuring.
    fn discard(&mut self, key: &str, seq: u64) -> Result<(), OracleError> {
        let label = self.label(key, seq)?;
        let reg = self.reg.take().expect("register live");
        self.remove(key, label, reg)
    }

    fn remove(
        &mut self,
        key: &str,
        label: QubitLabel,
        state: DensityMatrix,
    ) -> Result<(), OracleError> {
        self.labels.remove(key);
        if state.n_qubits() == 1 {
            self.reg = None;
        } else {
            self.reg = Some(state.discard(label)?);
        }
        self.validate()
    }

    fn rename(&mut self, old: &str, new: &str, seq: u64) -> Result<(), OracleError> {
        let label = self.label(old, seq)?;
        if self.labels.contains_key(new) {
            return Err(OracleError::Event {
                seq,
                message: format!("rename target {new:?} already live"),
            });
        }
        self.labels.remove(old);
        self.labels.insert(new.to_string(), label);
        Ok(())
    }

    fn reduced(&self, keys: &[String], seq: u64) -> Result<DensityMatrix, OracleError> {
        let labels: Vec<QubitLabel> = keys
            .iter()
            .map(|k| self.label(k, seq))
            .collect::<Result<_, _>>()?;
        let reg = self.reg.as_ref().ok_or_else(|| OracleError::Event {
            seq,
            message: "no live register at response time".into(),
        })?;
        let traced = reg.partial_trace(&labels)?;
        let ordered = traced.permuted(&labels)?;
        let normalized: Vec<QubitLabel> = (0..keys.len() as u64).map(QubitLabel).collect();
        Ok(ordered.relabeled(&normalized))
    }

    fn validate(&self) -> Result<(), OracleError> {
        if let Some(reg) = &self.reg {
            reg.validate()?;
        }
        Ok(())
    }
}

fn field<'d>(fields: &'d [(String, String)], key: &str, seq: u64) -> Result<&'d str, OracleError> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| OracleError::Event {
            seq,
            message: format!("missing detail field {key:?}"),
        })
}

fn parse_list(raw: &str) -> Vec<String> {
    let inner = raw.trim_start_matches('(').trim_end_matches(')');
    if inner.is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(|s| s.to_string()).collect()
    }
}

fn parse_f64(raw: &str, seq: u64) -> Result<f64, OracleError> {
    raw.parse().map_err(|e| OracleError::Event {
        seq,
        message: format!("bad float {raw:?}: {e}"),
    })
}

fn parse_bit(raw: &str, seq: u64) -> Result<bool, OracleError> {
    match raw {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(OracleError::Event {
            seq,
            message: format!("bad bit {raw:?}"),
        }),
    }
}

/// The virtual-address component of a qubit token
/// `requester.request.vaddr@node`.
fn token_vaddr(token: &str, seq: u64) -> Result<u64, OracleError> {
    token
        .split('@')
        .next()
        .and_then(|fvid| fvid.rsplit('.').next())
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| OracleError::Event {
            seq,
            message: format!("malformed qubit token {token:?}"),
        })
}

fn token_fvid(token: &str) -> &str {
    token.split('@').next().unwrap_or(token)
}

fn token_node(token: &str) -> &str {
    token.split('@').nth(1).unwrap_or("")
}

/// Replay a trace with the default register cap.
pub fn replay(trace: &Trace) -> Result<Vec<OracleRow>, OracleError> {
    replay_with_cap(trace, DEFAULT_QUBIT_CAP)
}

pub fn replay_with_cap(trace: &Trace, cap: usize) -> Result<Vec<OracleRow>, OracleError> {
    let mut reg = FlatRegister::new(cap);
    let mut requests: BTreeMap<u64, Request> = BTreeMap::new();
    let mut rows = Vec::new();

    for ev in trace.events() {
        match ev.kind {
            EventKind::ReqRecv => {
                let wire_text = ev
                    .detail
                    .split_once("wire=")
                    .map(|(_, w)| w)
                    .ok_or_else(|| OracleError::Event {
                        seq: ev.seq,
                        message: "REQ_RECV without wire form".into(),
                    })?;
                if let Message::Request(req) = wire::decode(wire_text)? {
                    requests.entry(req.id()).or_insert(req);
                }
            }
            EventKind::Create => replay_create(&mut reg, ev)?,
            EventKind::PairGen => {
                let fields = detail_fields(&ev.detail);
                if field(&fields, "ok", ev.seq)? != "1" {
                    continue;
                }
                let qa = field(&fields, "qa", ev.seq)?.to_string();
                let qb = field(&fields, "qb", ev.seq)?.to_string();
                let f_link = parse_f64(field(&fields, "flink", ev.seq)?, ev.seq)?;
                let labels = reg.alloc_fresh_labels(2);
                let werner = DensityMatrix::werner_pair([labels[0], labels[1]], f_link)?;
                reg.admit(&[qa, qb], werner, ev.seq)?;
            }
            EventKind::Purify => {
                let fields = detail_fields(&ev.detail);
                let keep = parse_list(field(&fields, "keep", ev.seq)?);
                let sac = parse_list(field(&fields, "sac", ev.seq)?);
                let p_gate = parse_f64(field(&fields, "pgate", ev.seq)?, ev.seq)?;
                let ma = parse_bit(field(&fields, "ma", ev.seq)?, ev.seq)?;
                let mb = parse_bit(field(&fields, "mb", ev.seq)?, ev.seq)?;
                let ok = field(&fields, "ok", ev.seq)? == "1";
                reg.apply(GateKind::Cnot, &[&keep[0], &sac[0]], ev.seq)?;
                reg.depolarize(&keep[0], p_gate, ev.seq)?;
                reg.depolarize(&sac[0], p_gate, ev.seq)?;
                reg.apply(GateKind::Cnot, &[&keep[1], &sac[1]], ev.seq)?;
                reg.depolarize(&keep[1], p_gate, ev.seq)?;
                reg.depolarize(&sac[1], p_gate, ev.seq)?;
                reg.project_out(&sac[0], ma, ev.seq)?;
                reg.project_out(&sac[1], mb, ev.seq)?;
                if !ok {
                    reg.discard(&keep[0], ev.seq)?;
                    reg.discard(&keep[1], ev.seq)?;
                }
            }
            EventKind::Swap => {
                let fields = detail_fields(&ev.detail);
                let left = parse_list(field(&fields, "left", ev.seq)?);
                let right = parse_list(field(&fields, "right", ev.seq)?);
                let p_gate = parse_f64(field(&fields, "pgate", ev.seq)?, ev.seq)?;
                let m1 = parse_bit(field(&fields, "m1", ev.seq)?, ev.seq)?;
                let m2 = parse_bit(field(&fields, "m2", ev.seq)?, ev.seq)?;
                // left=(far, here), right=(here, far)
                reg.apply(GateKind::Cnot, &[&left[1], &right[0]], ev.seq)?;
                reg.depolarize(&left[1], p_gate, ev.seq)?;
                reg.depolarize(&right[0], p_gate, ev.seq)?;
                reg.apply(GateKind::H, &[&left[1]], ev.seq)?;
                reg.project_out(&left[1], m1, ev.seq)?;
                reg.project_out(&right[0], m2, ev.seq)?;
                if m2 {
                    reg.apply(GateKind::X, &[&right[1]], ev.seq)?;
                }
                if m1 {
                    reg.apply(GateKind::Z, &[&right[1]], ev.seq)?;
                }
            }
            EventKind::Teleport => {
                let fields = detail_fields(&ev.detail);
                let data = field(&fields, "data", ev.seq)?.to_string();
                let chan = parse_list(field(&fields, "chan", ev.seq)?);
                let p_gate = parse_f64(field(&fields, "pgate", ev.seq)?, ev.seq)?;
                let m1 = parse_bit(field(&fields, "m1", ev.seq)?, ev.seq)?;
                let m2 = parse_bit(field(&fields, "m2", ev.seq)?, ev.seq)?;
                reg.apply(GateKind::Cnot, &[&data, &chan[0]], ev.seq)?;
                reg.depolarize(&data, p_gate, ev.seq)?;
                reg.depolarize(&chan[0], p_gate, ev.seq)?;
                reg.apply(GateKind::H, &[&data], ev.seq)?;
                reg.project_out(&data, m1, ev.seq)?;
                reg.project_out(&chan[0], m2, ev.seq)?;
                if m2 {
                    reg.apply(GateKind::X, &[&chan[1]], ev.seq)?;
                }
                if m1 {
                    reg.apply(GateKind::Z, &[&chan[1]], ev.seq)?;
                }
                // the data qubit now lives at the receiving node
                let arrived = format!("{}@{}", token_fvid(&data), token_node(&chan[1]));
                reg.rename(&chan[1], &arrived, ev.seq)?;
            }
            EventKind::Rebind => {
                let fields = detail_fields(&ev.detail);
                let old = field(&fields, "old", ev.seq)?.to_string();
                let new = field(&fields, "new", ev.seq)?.to_string();
                if old != new {
                    reg.rename(&old, &new, ev.seq)?;
                }
            }
            EventKind::Msg | EventKind::Decompose => {}
            EventKind::Rsp => {
                let fields = detail_fields(&ev.detail);
                let status = field(&fields, "status", ev.seq)?.to_string();
                let reported_f = parse_f64(field(&fields, "f", ev.seq)?, ev.seq)?;
                let reported_s = parse_f64(field(&fields, "s", ev.seq)?, ev.seq)?;
                let targets = parse_list(field(&fields, "targets", ev.seq)?);
                let mut row = OracleRow {
                    request_id: ev.request_id,
                    reported_status: status,
                    reported_f,
                    reported_s,
                    oracle_f: None,
                    oracle_s: None,
                    rho: None,
                };
                if !targets.is_empty() {
                    let rho = reg.reduced(&targets, ev.seq)?;
                    let request =
                        requests
                            .get(&ev.request_id)
                            .ok_or_else(|| OracleError::Event {
                                seq: ev.seq,
                                message: format!("RSP for unknown request {}", ev.request_id),
                            })?;
                    row.oracle_f = Some(match request {
                        Request::State(state) => {
                            let vaddrs: Vec<u64> = targets
                                .iter()
                                .map(|t| token_vaddr(t, ev.seq))
                                .collect::<Result<_, _>>()?;
                            let target = target_state(&state.spec, &vaddrs)?;
                            rho.fidelity(&target)?
                        }
                        // actions have no pure target; mirror the engine's
                        // vacuous report
                        Request::Action(_) => 1.0,
                    });
                    row.oracle_s = Some(rho.entropy());
                    row.rho = Some(rho);
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// CREATE events carry either a fresh state preparation (`spec=...`) or a
/// generic action circuit (`action=[...]`).
fn replay_create(reg: &mut FlatRegister, ev: &TraceEvent) -> Result<(), OracleError> {
    let fields = detail_fields(&ev.detail);
    let qubits = parse_list(field(&fields, "qubits", ev.seq)?);
    if let Some((_, spec_text)) = fields.iter().find(|(k, _)| k == "spec") {
        let spec: StateSpec = wire::parse_spec_expr(spec_text)?;
        let vaddrs: Vec<u64> = qubits
            .iter()
            .map(|t| token_vaddr(t, ev.seq))
            .collect::<Result<_, _>>()?;
        let psi = target_state(&spec, &vaddrs)?;
        let labels = reg.alloc_fresh_labels(qubits.len());
        let factor = DensityMatrix::from_pure(&labels, &psi)?;
        reg.admit(&qubits, factor, ev.seq)?;
        return Ok(());
    }

    // generic action: replay the circuit against recorded outcomes
    let circuit_text = field(&fields, "action", ev.seq)?
        .trim_start_matches('[')
        .trim_end_matches(']')
        .to_string();
    let items = wire::parse_items_expr(&circuit_text)?;
    let p_gate = parse_f64(field(&fields, "pgate", ev.seq)?, ev.seq)?;
    let mut outcomes: BTreeMap<u64, bool> = BTreeMap::new();
    for entry in parse_list(field(&fields, "outcomes", ev.seq)?) {
        let (va, bit) = entry.split_once(':').ok_or_else(|| OracleError::Event {
            seq: ev.seq,
            message: format!("bad outcome entry {entry:?}"),
        })?;
        outcomes.insert(
            va.parse().map_err(|_| OracleError::Event {
                seq: ev.seq,
                message: format!("bad outcome address {va:?}"),
            })?,
            parse_bit(bit, ev.seq)?,
        );
    }
    let mut key_of: BTreeMap<u64, String> = BTreeMap::new();
    for token in &qubits {
        key_of.insert(token_vaddr(token, ev.seq)?, token.clone());
    }
    let lookup = |va: u64| -> Result<&String, OracleError> {
        key_of.get(&va).ok_or_else(|| OracleError::Event {
            seq: ev.seq,
            message: format!("action references unlisted address {va}"),
        })
    };
    for item in &items {
        match item {
            CircuitItem::Gate(g) => {
                let keys: Vec<&str> = g
                    .targets
                    .iter()
                    .map(|&va| lookup(va).map(|s| s.as_str()))
                    .collect::<Result<_, _>>()?;
                reg.apply(g.kind, &keys, ev.seq)?;
                if g.kind.arity() == 2 {
                    for k in keys {
                        reg.depolarize(k, p_gate, ev.seq)?;
                    }
                }
            }
            CircuitItem::Measure(va) => {
                let outcome = *outcomes.get(va).ok_or_else(|| OracleError::Event {
                    seq: ev.seq,
                    message: format!("no recorded outcome for address {va}"),
                })?;
                let key = lookup(*va)?.clone();
                reg.project_out(&key, outcome, ev.seq)?;
            }
            CircuitItem::CorrectX { target, cond } | CircuitItem::CorrectZ { target, cond } => {
                let fire = *outcomes.get(cond).ok_or_else(|| OracleError::Event {
                    seq: ev.seq,
                    message: format!("correction reads unrecorded outcome {cond}"),
                })?;
                if fire {
                    let kind = if matches!(item, CircuitItem::CorrectX { .. }) {
                        GateKind::X
                    } else {
                        GateKind::Z
                    };
                    let key = lookup(*target)?.clone();
                    reg.apply(kind, &[&key], ev.seq)?;
                }
            }
        }
    }
    Ok(())
}
