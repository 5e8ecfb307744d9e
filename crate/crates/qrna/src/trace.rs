//! Deterministic run traces.
//!
//! One event per line, tab-separated fixed fields
//! `seq<TAB>node<TAB>kind<TAB>request-id<TAB>detail`, floats printed with 17
//! significant digits. The trace is a total record: every physical operation
//! the simulator performs (state creation, pair generation, purification,
//! swapping, teleportation, rebinding) appears with enough detail for the
//! flat oracle to replay it and recheck every reported fidelity.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// A request arrived at a node (detail carries the wire form).
    ReqRecv,
    /// A request was broken into sub-requests.
    Decompose,
    /// Local quantum execution: creation of a requested state, or a generic
    /// action circuit with its recorded outcomes.
    Create,
    /// Elementary pair generation attempt over a link.
    PairGen,
    /// One purification round over two pairs.
    Purify,
    /// Entanglement swapping at a rendezvous node.
    Swap,
    /// Teleportation of a data qubit over a channel pair.
    Teleport,
    /// A logical qubit changed its virtual name (delivery handoff).
    Rebind,
    /// Classical message between nodes.
    Msg,
    /// A response was issued.
    Rsp,
}

impl EventKind {
    pub fn token(self) -> &'static str {
        match self {
            EventKind::ReqRecv => "REQ_RECV",
            EventKind::Decompose => "DECOMPOSE",
            EventKind::Create => "CREATE",
            EventKind::PairGen => "PAIR_GEN",
            EventKind::Purify => "PURIFY",
            EventKind::Swap => "SWAP",
            EventKind::Teleport => "TELEPORT",
            EventKind::Rebind => "REBIND",
            EventKind::Msg => "MSG",
            EventKind::Rsp => "RSP",
        }
    }

    pub fn from_token(tok: &str) -> Option<EventKind> {
        Some(match tok {
            "REQ_RECV" => EventKind::ReqRecv,
            "DECOMPOSE" => EventKind::Decompose,
            "CREATE" => EventKind::Create,
            "PAIR_GEN" => EventKind::PairGen,
            "PURIFY" => EventKind::Purify,
            "SWAP" => EventKind::Swap,
            "TELEPORT" => EventKind::Teleport,
            "REBIND" => EventKind::Rebind,
            "MSG" => EventKind::Msg,
            "RSP" => EventKind::Rsp,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub seq: u64,
    pub node: String,
    pub kind: EventKind,
    pub request_id: u64,
    pub detail: String,
}

impl TraceEvent {
    pub fn render(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.seq,
            self.node,
            self.kind.token(),
            self.request_id,
            self.detail
        )
    }
}

#[derive(Debug, Error)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

/// An append-only event log with a strictly increasing sequence counter.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Trace {
        Trace::default()
    }

    pub fn emit(&mut self, node: &str, kind: EventKind, request_id: u64, detail: String) {
        debug_assert!(!detail.contains('\t') && !detail.contains('\n'));
        self.events.push(TraceEvent {
            seq: self.events.len() as u64 + 1,
            node: node.to_string(),
            kind,
            request_id,
            detail,
        });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&ev.render());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trace, TraceParseError> {
        let mut events = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.splitn(5, '\t').collect();
            if fields.len() != 5 {
                return Err(TraceParseError {
                    line: line_no,
                    message: format!("expected 5 tab-separated fields, got {}", fields.len()),
                });
            }
            let seq: u64 = fields[0].parse().map_err(|e| TraceParseError {
                line: line_no,
                message: format!("bad seq: {e}"),
            })?;
            let kind = EventKind::from_token(fields[2]).ok_or_else(|| TraceParseError {
                line: line_no,
                message: format!("unknown event kind {:?}", fields[2]),
            })?;
            let request_id: u64 = fields[3].parse().map_err(|e| TraceParseError {
                line: line_no,
                message: format!("bad request id: {e}"),
            })?;
            events.push(TraceEvent {
                seq,
                node: fields[1].to_string(),
                kind,
                request_id,
                detail: fields[4].to_string(),
            });
        }
        Ok(Trace { events })
    }

    /// Sequence numbers must increase strictly and every RSP must follow a
    /// REQ_RECV with the same request id.
    pub fn check_well_formed(&self) -> Result<(), String> {
        let mut last = 0;
        for ev in &self.events {
            if ev.seq <= last {
                return Err(format!("seq {} not strictly increasing", ev.seq));
            }
            last = ev.seq;
            if ev.kind == EventKind::Rsp {
                let seen = self
                    .events
                    .iter()
                    .take_while(|e| e.seq < ev.seq)
                    .any(|e| e.kind == EventKind::ReqRecv && e.request_id == ev.request_id);
                if !seen {
                    return Err(format!(
                        "RSP for request {} has no prior REQ_RECV",
                        ev.request_id
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Split a detail string into key=value pairs; values may contain anything
/// but whitespace except when parenthesized.
pub fn detail_fields(detail: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    let flush = |tok: &mut String, out: &mut Vec<(String, String)>| {
        if tok.is_empty() {
            return;
        }
        if let Some((k, v)) = tok.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        }
        tok.clear();
    };
    for ch in detail.chars() {
        match ch {
            '(' | '[' => {
                depth += 1;
                current.push(ch);
            }
            ')' | ']' => {
                depth = depth.saturating_sub(1);
                current.push(ch);
            }
            ' ' if depth == 0 => flush(&mut current, &mut out),
            _ => current.push(ch),
        }
    }
    flush(&mut current, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_roundtrip() {
        let mut t = Trace::new();
        t.emit(
            "Node11",
            EventKind::ReqRecv,
            1,
            "from=client wire=REQ 1".into(),
        );
        t.emit("Node19", EventKind::Msg, 1, "from=Node11 to=Node19".into());
        t.emit("Node11", EventKind::Rsp, 1, "status=OK f=1 s=0".into());
        let text = t.render();
        let parsed = Trace::parse(&text).unwrap();
        assert_eq!(parsed.events(), t.events());
        parsed.check_well_formed().unwrap();
    }

    #[test]
    fn rsp_without_req_rejected() {
        let mut t = Trace::new();
        t.emit("Node11", EventKind::Rsp, 9, "status=FAIL f=0 s=0".into());
        assert!(t.check_well_formed().is_err());
    }

    #[test]
    fn detail_fields_respect_parens() {
        let fields = detail_fields("keep=(a@X,b@Y) pgate=0 ok=1");
        assert_eq!(fields[0], ("keep".into(), "(a@X,b@Y)".into()));
        assert_eq!(fields[1], ("pgate".into(), "0".into()));
        assert_eq!(fields[2], ("ok".into(), "1".into()));
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = Trace::parse("1\tN\tREQ_RECV\t1\n").unwrap_err();
        assert_eq!(err.line, 1);
    }
}
