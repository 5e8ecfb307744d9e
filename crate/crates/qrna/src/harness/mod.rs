//! Batch front-end: scenario files, deterministic runs, reports, routing
//! table dumps, and the flat replay oracle used to cross-check the engine.

pub mod oracle;

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::link::{BoundId, Counters, Mode, SimConfig, SimContext};
use crate::protocol::{deliver, Env, Provenance};
use crate::request::{wire, Message, Request, Response, Status};
use crate::topology::{build_tables, link_cost, RoutingTable, Topology, TopologyError};
use crate::trace::Trace;

pub use oracle::{replay, OracleError, OracleRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario line {line}: {message}")]
    Scenario { line: usize, message: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("invariant violated after request {request_id}: {message}")]
    Invariant { request_id: u64, message: String },
    #[error("{0}")]
    Io(String),
}

/// A parsed scenario: knobs plus an ordered list of submissions.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Topology file referenced by the scenario, if any (resolved relative
    /// to the scenario file's directory by the loader).
    pub topology: Option<PathBuf>,
    pub mode: Mode,
    pub seed: u64,
    pub p_gate: f64,
    pub purify_rounds: u32,
    pub retry_cap: u32,
    pub pair_cap: u32,
    pub qubit_cap: usize,
    /// (origin node, request) in submission order.
    pub submissions: Vec<(String, Request)>,
}

impl Default for Scenario {
    fn default() -> Self {
        let cfg = SimConfig::default();
        Scenario {
            topology: None,
            mode: cfg.mode,
            seed: cfg.seed,
            p_gate: cfg.p_gate,
            purify_rounds: cfg.purify_rounds,
            retry_cap: cfg.retry_cap,
            pair_cap: cfg.pair_cap,
            qubit_cap: cfg.qubit_cap,
            submissions: Vec::new(),
        }
    }
}

impl Scenario {
    /// Parse the line-oriented scenario format:
    ///
    /// ```text
    /// topology <path>
    /// mode deterministic|stochastic
    /// seed <u64>
    /// pgate <dec>
    /// purify_rounds <n>
    /// retry_cap <n>
    /// pair_cap <n>
    /// qubit_cap <n>
    /// submit <origin-node> REQ <id> ...
    /// ```
    pub fn parse(text: &str) -> Result<Scenario, HarnessError> {
        let mut sc = Scenario::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| HarnessError::Scenario {
                line: line_no,
                message,
            };
            let (key, rest) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| err(format!("expected a directive with arguments, got {line:?}")))?;
            let rest = rest.trim();
            match key {
                "topology" => sc.topology = Some(PathBuf::from(rest)),
                "mode" => {
                    sc.mode = Mode::from_token(rest)
                        .ok_or_else(|| err(format!("unknown mode {rest:?}")))?
                }
                "seed" => sc.seed = rest.parse().map_err(|e| err(format!("bad seed: {e}")))?,
                "pgate" => {
                    sc.p_gate = rest.parse().map_err(|e| err(format!("bad pgate: {e}")))?;
                    if !(0.0..=1.0).contains(&sc.p_gate) {
                        return Err(err(format!("pgate {} outside [0,1]", sc.p_gate)));
                    }
                }
                "purify_rounds" => {
                    sc.purify_rounds = rest
                        .parse()
                        .map_err(|e| err(format!("bad purify_rounds: {e}")))?
                }
                "retry_cap" => {
                    sc.retry_cap = rest
                        .parse()
                        .map_err(|e| err(format!("bad retry_cap: {e}")))?
                }
                "pair_cap" => {
                    sc.pair_cap = rest
                        .parse()
                        .map_err(|e| err(format!("bad pair_cap: {e}")))?
                }
                "qubit_cap" => {
                    sc.qubit_cap = rest
                        .parse()
                        .map_err(|e| err(format!("bad qubit_cap: {e}")))?
                }
                "submit" => {
                    let (origin, wire_line) = rest
                        .split_once(char::is_whitespace)
                        .ok_or_else(|| err("submit needs an origin and a request".into()))?;
                    let msg = wire::decode(wire_line.trim())
                        .map_err(|e| err(format!("bad request: {e}")))?;
                    match msg {
                        Message::Request(req) => sc.submissions.push((origin.to_string(), req)),
                        Message::Response(_) => return Err(err("cannot submit a response".into())),
                    }
                }
                other => return Err(err(format!("unknown directive {other:?}"))),
            }
        }
        Ok(sc)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            mode: self.mode,
            seed: self.seed,
            p_gate: self.p_gate,
            purify_rounds: self.purify_rounds,
            retry_cap: self.retry_cap,
            pair_cap: self.pair_cap,
            qubit_cap: self.qubit_cap,
        }
    }
}

/// Everything a run produces.
#[derive(Debug)]
pub struct RunOutput {
    pub responses: Vec<Response>,
    pub trace: Trace,
    pub report: String,
    pub counters: Counters,
    pub all_ok: bool,
}

/// Execute every submission of a scenario over a topology. Engine failures
/// surface as FAIL rows; any internal invariant breach aborts the run.
pub fn run(topo: &Topology, scenario: &Scenario) -> Result<RunOutput, HarnessError> {
    let tables = build_tables(topo, &link_cost)?;
    let mut ctx = SimContext::new(scenario.sim_config());
    let mut responses = Vec::new();
    let mut delivered: Vec<BoundId> = Vec::new();

    for (origin, request) in &scenario.submissions {
        let id = request.id();
        let resp = if !topo.is_node(origin) {
            let resp = Response::failed(id);
            ctx.trace.emit(
                origin,
                crate::trace::EventKind::ReqRecv,
                id,
                format!(
                    "from=client wire={}",
                    wire::encode(&Message::Request(request.clone()))
                ),
            );
            ctx.trace.emit(
                origin,
                crate::trace::EventKind::Rsp,
                id,
                format!(
                    "status=FAIL f={} s={} targets=() err=unknown_origin",
                    wire::fmt_dec(0.0),
                    wire::fmt_dec(0.0)
                ),
            );
            resp
        } else {
            let prov = Provenance::new(origin.clone(), id);
            let mut env = Env::new(topo, &tables, &mut ctx);
            deliver(&mut env, request.clone(), &prov, "client", origin, 0)
        };

        if resp.status != Status::Fail {
            for t in request.targets() {
                let bid = BoundId::new(
                    t.node.clone(),
                    crate::request::FullVirtualId::new(origin.clone(), id, t.vaddr),
                );
                if ctx.store.is_bound(&bid) {
                    delivered.push(bid);
                }
            }
        }
        ctx.store
            .validate_all()
            .map_err(|e| HarnessError::Invariant {
                request_id: id,
                message: e.to_string(),
            })?;
        ctx.store
            .audit(&delivered)
            .map_err(|message| HarnessError::Invariant {
                request_id: id,
                message,
            })?;
        responses.push(resp);
    }

    ctx.trace
        .check_well_formed()
        .map_err(|message| HarnessError::Invariant {
            request_id: 0,
            message,
        })?;

    let report = render_report(&responses, &ctx.counters);
    let all_ok = responses.iter().all(|r| r.status == Status::Ok);
    Ok(RunOutput {
        responses,
        trace: ctx.trace,
        report,
        counters: ctx.counters,
        all_ok,
    })
}

fn render_report(responses: &[Response], counters: &Counters) -> String {
    let mut out = String::new();
    for r in responses {
        out.push_str(&format!(
            "request {} status={} f={} s={}\n",
            r.id,
            r.status.token(),
            wire::fmt_dec(r.measured_f),
            wire::fmt_dec(r.measured_s),
        ));
    }
    out.push_str(&format!(
        "totals pairs_generated={} purify_attempts={} purify_successes={} swaps={} teleports={}\n",
        counters.pairs_generated,
        counters.purify_attempts,
        counters.purify_successes,
        counters.swaps,
        counters.teleports,
    ));
    out
}

/// Render every node's routing table in canonical order.
pub fn render_routes(topo: &Topology) -> Result<String, TopologyError> {
    let tables = build_tables(topo, &link_cost)?;
    Ok(render_tables(&tables))
}

fn render_tables(tables: &BTreeMap<String, RoutingTable>) -> String {
    let mut out = String::new();
    for (i, table) in tables.values().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&table.to_string());
    }
    out
}

/// Compare generated routing tables against a golden rendering; the error
/// carries a line diff.
pub fn check_tables(topo: &Topology, golden: &str) -> Result<(), String> {
    let actual = match render_routes(topo) {
        Ok(a) => a,
        Err(e) => return Err(format!("failed to build tables: {e}")),
    };
    if actual == golden {
        return Ok(());
    }
    let mut diff = String::from("routing tables differ from golden:\n");
    let a: Vec<&str> = actual.lines().collect();
    let g: Vec<&str> = golden.lines().collect();
    for i in 0..a.len().max(g.len()) {
        let left = a.get(i).copied().unwrap_or("<missing>");
        let right = g.get(i).copied().unwrap_or("<missing>");
        if left != right {
            diff.push_str(&format!("  line {}: got {left:?}, want {right:?}\n", i + 1));
        }
    }
    Err(diff)
}
