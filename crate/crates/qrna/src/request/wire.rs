//! Canonical line-oriented wire format for requests and responses.
//!
//! Grammar (one message per line):
//!
//! ```text
//! REQ <id> STATE spec=<spec> fmin=<dec> smax=<dec> targets=(<name>:<vaddr>,...) enc=RAW
//! REQ <id> ACTION circuit=[<item>;...] fmin=<dec> smax=<dec> targets=(<name>:<vaddr>,...) enc=RAW
//! RSP <id> status=<OK|CONSTRAINT_VIOLATION|FAIL> f=<dec> s=<dec>
//! ```
//!
//! Spec expressions: `BELL`, `GHZ(n)`, `CLUSTER(n)`,
//! `FANOUT(a_re,a_im,b_re,b_im,n)`, `CIRCUIT[H(0);CZ(0,1);...]`.
//! Action items: gates, `M(a)` for a Z measurement, and `XIF(t,c)` /
//! `ZIF(t,c)` for Pauli corrections conditioned on the outcome at `c`.
//!
//! Encoding is canonical: fixed field order and floats printed as decimal
//! scientific notation with 17 significant digits, so equal values encode to
//! identical bytes. The decoder is lenient about float spellings (scenario
//! files are written by hand) and reports failures with a byte offset.

use num_complex::Complex64;

use super::{
    ActionRequest, CircuitGate, CircuitItem, Encoding, Message, NamedState, QubitAddress, Request,
    ResponseSummary, StateRequest, StateSpec, Status,
};
use crate::engine::gate::{GateKind, GateOp};

/// Malformed wire input, with the byte offset of the failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

/// Canonical 17-significant-digit decimal form.
pub fn fmt_dec(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x }; // normalize -0.0
    format!("{x:.16e}")
}

/// Render a message in canonical form (no trailing newline).
pub fn encode(msg: &Message) -> String {
    match msg {
        Message::Request(Request::State(r)) => format!(
            "REQ {} STATE spec={} fmin={} smax={} targets=({}) enc={}",
            r.id,
            fmt_spec(&r.spec),
            fmt_dec(r.f_min),
            fmt_dec(r.s_max),
            fmt_targets(&r.targets),
            fmt_enc(&r.encoding),
        ),
        Message::Request(Request::Action(r)) => format!(
            "REQ {} ACTION circuit=[{}] fmin={} smax={} targets=({}) enc={}",
            r.id,
            fmt_items(&r.circuit),
            fmt_dec(r.f_min),
            fmt_dec(r.s_max),
            fmt_targets(&r.targets),
            fmt_enc(&r.encoding),
        ),
        Message::Response(r) => format!(
            "RSP {} status={} f={} s={}",
            r.id,
            r.status.token(),
            fmt_dec(r.measured_f),
            fmt_dec(r.measured_s),
        ),
    }
}

fn fmt_enc(e: &Encoding) -> String {
    match e {
        Encoding::Raw => "RAW".into(),
        Encoding::Other(s) => s.clone(),
    }
}

fn fmt_targets(targets: &[QubitAddress]) -> String {
    targets
        .iter()
        .map(|t| format!("{}:{}", t.node, t.vaddr))
        .collect::<Vec<_>>()
        .join(",")
}

pub(crate) fn fmt_gate(g: &CircuitGate) -> String {
    let args = g
        .targets
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(",");
    format!("{}({})", g.kind.token(), args)
}

pub(crate) fn fmt_items(items: &[CircuitItem]) -> String {
    items
        .iter()
        .map(|it| match it {
            CircuitItem::Gate(g) => fmt_gate(g),
            CircuitItem::Measure(a) => format!("M({a})"),
            CircuitItem::CorrectX { target, cond } => format!("XIF({target},{cond})"),
            CircuitItem::CorrectZ { target, cond } => format!("ZIF({target},{cond})"),
        })
        .collect::<Vec<_>>()
        .join(";")
}

pub(crate) fn fmt_spec(spec: &StateSpec) -> String {
    match spec {
        StateSpec::Named(NamedState::BellPhiPlus) => "BELL".into(),
        StateSpec::Named(NamedState::Ghz(n)) => format!("GHZ({n})"),
        StateSpec::Named(NamedState::LinearCluster(n)) => format!("CLUSTER({n})"),
        StateSpec::Named(NamedState::Fanout { alpha, beta, n }) => format!(
            "FANOUT({},{},{},{},{n})",
            fmt_dec(alpha.re),
            fmt_dec(alpha.im),
            fmt_dec(beta.re),
            fmt_dec(beta.im),
        ),
        StateSpec::Circuit(gates) => format!(
            "CIRCUIT[{}]",
            gates.iter().map(fmt_gate).collect::<Vec<_>>().join(";")
        ),
    }
}

/// Parse a standalone spec expression (as embedded in trace details).
pub fn parse_spec_expr(text: &str) -> Result<StateSpec, ParseError> {
    let mut c = Cursor::new(text);
    let spec = parse_spec(&mut c)?;
    c.end()?;
    Ok(spec)
}

/// Parse a standalone action item list (the inside of `circuit=[...]`).
pub fn parse_items_expr(text: &str) -> Result<Vec<CircuitItem>, ParseError> {
    let mut c = Cursor::new(text);
    let items = if text.is_empty() {
        Vec::new()
    } else {
        parse_items(&mut c)?
    };
    c.end()?;
    Ok(items)
}

/// Parse one wire line.
pub fn decode(line: &str) -> Result<Message, ParseError> {
    let mut c = Cursor::new(line);
    let msg = if c.try_lit("REQ ") {
        let id = c.u64()?;
        c.lit(" ")?;
        if c.try_lit("STATE ") {
            c.lit("spec=")?;
            let spec = parse_spec(&mut c)?;
            c.lit(" fmin=")?;
            let f_min = c.f64()?;
            c.lit(" smax=")?;
            let s_max = c.f64()?;
            c.lit(" targets=(")?;
            let targets = parse_targets(&mut c)?;
            c.lit(") enc=")?;
            let encoding = parse_enc(&mut c)?;
            Message::Request(Request::State(StateRequest {
                id,
                spec,
                f_min,
                s_max,
                targets,
                encoding,
            }))
        } else if c.try_lit("ACTION ") {
            c.lit("circuit=[")?;
            let circuit = parse_items(&mut c)?;
            c.lit("] fmin=")?;
            let f_min = c.f64()?;
            c.lit(" smax=")?;
            let s_max = c.f64()?;
            c.lit(" targets=(")?;
            let targets = parse_targets(&mut c)?;
            c.lit(") enc=")?;
            let encoding = parse_enc(&mut c)?;
            Message::Request(Request::Action(ActionRequest {
                id,
                circuit,
                f_min,
                s_max,
                targets,
                encoding,
            }))
        } else {
            return Err(c.err("expected STATE or ACTION"));
        }
    } else if c.try_lit("RSP ") {
        let id = c.u64()?;
        c.lit(" status=")?;
        let tok = c.name()?;
        let status = Status::from_token(&tok).ok_or_else(|| c.err("unknown status"))?;
        c.lit(" f=")?;
        let measured_f = c.f64()?;
        c.lit(" s=")?;
        let measured_s = c.f64()?;
        Message::Response(ResponseSummary {
            id,
            status,
            measured_f,
            measured_s,
        })
    } else {
        return Err(c.err("expected REQ or RSP"));
    };
    c.end()?;
    Ok(msg)
}

fn parse_enc(c: &mut Cursor) -> Result<Encoding, ParseError> {
    let tok = c.name()?;
    Ok(if tok == "RAW" {
        Encoding::Raw
    } else {
        Encoding::Other(tok)
    })
}

fn parse_targets(c: &mut Cursor) -> Result<Vec<QubitAddress>, ParseError> {
    let mut out = Vec::new();
    if c.peek() == Some(')') {
        return Ok(out);
    }
    loop {
        let node = c.name()?;
        c.lit(":")?;
        let vaddr = c.u64()?;
        out.push(QubitAddress { node, vaddr });
        if !c.try_lit(",") {
            break;
        }
    }
    Ok(out)
}

fn parse_gate_args(c: &mut Cursor) -> Result<Vec<u64>, ParseError> {
    c.lit("(")?;
    let mut args = vec![c.u64()?];
    while c.try_lit(",") {
        args.push(c.u64()?);
    }
    c.lit(")")?;
    Ok(args)
}

fn parse_gate(c: &mut Cursor, tok: &str) -> Result<CircuitGate, ParseError> {
    let kind = GateKind::from_token(tok).ok_or_else(|| c.err(&format!("unknown gate {tok:?}")))?;
    let args = parse_gate_args(c)?;
    GateOp::new(kind, args).map_err(|e| c.err(&e.to_string()))
}

fn parse_spec(c: &mut Cursor) -> Result<StateSpec, ParseError> {
    let tok = c.name()?;
    Ok(match tok.as_str() {
        "BELL" => StateSpec::Named(NamedState::BellPhiPlus),
        "GHZ" => {
            c.lit("(")?;
            let n = c.u64()? as usize;
            c.lit(")")?;
            StateSpec::Named(NamedState::Ghz(n))
        }
        "CLUSTER" => {
            c.lit("(")?;
            let n = c.u64()? as usize;
            c.lit(")")?;
            StateSpec::Named(NamedState::LinearCluster(n))
        }
        "FANOUT" => {
            c.lit("(")?;
            let are = c.f64()?;
            c.lit(",")?;
            let aim = c.f64()?;
            c.lit(",")?;
            let bre = c.f64()?;
            c.lit(",")?;
            let bim = c.f64()?;
            c.lit(",")?;
            let n = c.u64()? as usize;
            c.lit(")")?;
            StateSpec::Named(NamedState::Fanout {
                alpha: Complex64::new(are, aim),
                beta: Complex64::new(bre, bim),
                n,
            })
        }
        "CIRCUIT" => {
            c.lit("[")?;
            let mut gates = Vec::new();
            if c.peek() != Some(']') {
                loop {
                    let tok = c.name()?;
                    gates.push(parse_gate(c, &tok)?);
                    if !c.try_lit(";") {
                        break;
                    }
                }
            }
            c.lit("]")?;
            StateSpec::Circuit(gates)
        }
        other => return Err(c.err(&format!("unknown spec form {other:?}"))),
    })
}

fn parse_items(c: &mut Cursor) -> Result<Vec<CircuitItem>, ParseError> {
    let mut items = Vec::new();
    if c.peek() == Some(']') {
        return Ok(items);
    }
    loop {
        let tok = c.name()?;
        let item = match tok.as_str() {
            "M" => {
                c.lit("(")?;
                let a = c.u64()?;
                c.lit(")")?;
                CircuitItem::Measure(a)
            }
            "XIF" | "ZIF" => {
                c.lit("(")?;
                let target = c.u64()?;
                c.lit(",")?;
                let cond = c.u64()?;
                c.lit(")")?;
                if tok == "XIF" {
                    CircuitItem::CorrectX { target, cond }
                } else {
                    CircuitItem::CorrectZ { target, cond }
                }
            }
            gate => CircuitItem::Gate(parse_gate(c, gate)?),
        };
        items.push(item);
        if !c.try_lit(";") {
            break;
        }
    }
    Ok(items)
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(s: &'a str) -> Cursor<'a> {
        Cursor { s, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn err(&self, message: &str) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn lit(&mut self, lit: &str) -> Result<(), ParseError> {
        if self.try_lit(lit) {
            Ok(())
        } else {
            Err(self.err(&format!("expected {lit:?}")))
        }
    }

    fn try_lit(&mut self, lit: &str) -> bool {
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn take_while<F: Fn(char) -> bool>(&mut self, pred: F) -> &'a str {
        let rest = self.rest();
        let end = rest
            .char_indices()
            .find(|&(_, ch)| !pred(ch))
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn name(&mut self) -> Result<String, ParseError> {
        let tok = self.take_while(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-');
        if tok.is_empty() || !tok.chars().next().unwrap().is_ascii_alphabetic() {
            return Err(ParseError {
                offset: self.pos - tok.len(),
                message: "expected a name".into(),
            });
        }
        Ok(tok.to_string())
    }

    fn u64(&mut self) -> Result<u64, ParseError> {
        let start = self.pos;
        let tok = self.take_while(|ch| ch.is_ascii_digit());
        tok.parse::<u64>().map_err(|e| ParseError {
            offset: start,
            message: format!("expected an unsigned integer: {e}"),
        })
    }

    fn f64(&mut self) -> Result<f64, ParseError> {
        let start = self.pos;
        let bytes = self.s.as_bytes();
        let n = bytes.len();
        let mut i = self.pos;
        if i < n && (bytes[i] == b'+' || bytes[i] == b'-') {
            i += 1;
        }
        while i < n && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < n && (bytes[i] == b'e' || bytes[i] == b'E') {
            i += 1;
            if i < n && (bytes[i] == b'+' || bytes[i] == b'-') {
                i += 1;
            }
            while i < n && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        let tok = &self.s[start..i];
        let v = tok.parse::<f64>().map_err(|e| ParseError {
            offset: start,
            message: format!("expected a decimal number: {e}"),
        })?;
        self.pos = i;
        Ok(v)
    }

    fn end(&self) -> Result<(), ParseError> {
        if self.rest().is_empty() {
            Ok(())
        } else {
            Err(self.err("trailing input"))
        }
    }
}
