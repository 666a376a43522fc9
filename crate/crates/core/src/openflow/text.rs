use thiserror::Error;

use super::{FlowAction, FlowMatch, FlowMod, FlowModOp, FlowStat, OpenFlowMsg, OutAction, RemovedReason};
use crate::kernel::SimTime;
use crate::net::{Packet, PacketMeta, PortId, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty line")]
    Empty,
    #[error("bad timestamp `{0}`")]
    Time(String),
    #[error("unknown message `{0}`")]
    UnknownMessage(String),
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("malformed token `{0}`")]
    Token(String),
}

/// Splits on `sep` except inside double quotes (backslash escapes honoured).
fn split_unquoted(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut in_quotes = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        match c {
            '\\' if in_quotes => escaped = true,
            '"' => in_quotes = !in_quotes,
            c if c == sep && !in_quotes => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

pub(super) fn render_match(m: &FlowMatch) -> String {
    let mut parts = Vec::new();
    if let Some(p) = m.in_port {
        parts.push(format!("in_port={p}"));
    }
    for (path, v) in &m.predicates {
        parts.push(format!("{path}={}", v.render()));
    }
    format!("[{}]", parts.join(","))
}

fn render_actions(actions: &[FlowAction]) -> String {
    let parts: Vec<String> = actions.iter().map(ToString::to_string).collect();
    format!("[{}]", parts.join(","))
}

/// Canonical log line: `<secs with 6 decimals> <OFPT_NAME> key=value ...`.
pub fn render_msg(at: SimTime, msg: &OpenFlowMsg) -> String {
    let head = format!("{at} {} sw={}", msg.name(), msg.switch());
    let with_fields = |mut s: String, pkt: &Packet| {
        let f = pkt.render_fields();
        if !f.is_empty() {
            s.push(' ');
            s.push_str(&f);
        }
        s
    };
    match msg {
        OpenFlowMsg::PacketIn { in_port, pkt, .. } => with_fields(format!("{head} in_port={in_port}"), pkt),
        OpenFlowMsg::PacketOut { pkt, action, .. } => {
            let action = match action {
                OutAction::Output(p) => format!("output:{p}"),
                OutAction::Flood => "flood".to_string(),
            };
            with_fields(format!("{head} action={action}"), pkt)
        }
        OpenFlowMsg::FlowMod(m) => format!(
            "{head} op={} priority={} hard_timeout={} match={} actions={}",
            match m.op {
                FlowModOp::Add => "add",
                FlowModOp::Modify => "modify",
                FlowModOp::Delete => "delete",
            },
            m.priority,
            m.hard_timeout.to_decimal_secs(),
            render_match(&m.matching),
            render_actions(&m.actions)
        ),
        OpenFlowMsg::FlowRemoved {
            matching,
            priority,
            packets,
            bytes,
            duration,
            reason: RemovedReason::HardTimeout,
            ..
        } => format!(
            "{head} reason=hard_timeout priority={priority} match={} packets={packets} bytes={bytes} duration={}",
            render_match(matching),
            duration.to_decimal_secs()
        ),
        OpenFlowMsg::StatsRequest { window_id, .. } => format!("{head} window={window_id}"),
        OpenFlowMsg::StatsReply {
            window_id,
            flows,
            table_accesses,
            ..
        } => {
            let mut s = format!("{head} window={window_id} table_accesses={table_accesses} flows={}", flows.len());
            for f in flows {
                s.push_str(&format!(" flow={}/{}/{}", render_match(&f.matching), f.packets, f.bytes));
            }
            s
        }
    }
}

fn parse_match(tok: &str) -> Result<FlowMatch, ParseError> {
    let inner = tok
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| ParseError::Token(tok.to_string()))?;
    let mut m = FlowMatch::default();
    if inner.is_empty() {
        return Ok(m);
    }
    for part in split_unquoted(inner, ',') {
        let (k, v) = part.split_once('=').ok_or_else(|| ParseError::Token(part.to_string()))?;
        if k == "in_port" {
            m.in_port = Some(v.parse().map_err(|_| ParseError::Token(part.to_string()))?);
        } else {
            let v = Scalar::parse_rendered(v).ok_or_else(|| ParseError::Token(part.to_string()))?;
            m.predicates.insert(k.to_string(), v);
        }
    }
    Ok(m)
}

fn parse_action(tok: &str) -> Result<FlowAction, ParseError> {
    Ok(match tok {
        "flood" => FlowAction::Flood,
        "drop" => FlowAction::Drop,
        "controller" => FlowAction::ToController,
        _ => FlowAction::Output(parse_port(tok.strip_prefix("output:"), tok)?),
    })
}

fn parse_port(s: Option<&str>, tok: &str) -> Result<PortId, ParseError> {
    s.and_then(|p| p.parse().ok())
        .ok_or_else(|| ParseError::Token(tok.to_string()))
}

fn parse_actions(tok: &str) -> Result<Vec<FlowAction>, ParseError> {
    let inner = tok
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| ParseError::Token(tok.to_string()))?;
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(parse_action).collect()
}

struct Fields<'a> {
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn get(&self, key: &'static str) -> Result<&'a str, ParseError> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or(ParseError::Missing(key))
    }

    fn num<T: std::str::FromStr>(&self, key: &'static str) -> Result<T, ParseError> {
        let v = self.get(key)?;
        v.parse().map_err(|_| ParseError::Token(format!("{key}={v}")))
    }

    fn time(&self, key: &'static str) -> Result<SimTime, ParseError> {
        let v = self.get(key)?;
        SimTime::parse_decimal_secs(v).map_err(|_| ParseError::Time(v.to_string()))
    }

    /// Tokens after the fixed keys, read as packet fields.
    fn packet(&self, skip: &[&str]) -> Result<Packet, ParseError> {
        let mut fields = Vec::new();
        for (k, v) in &self.pairs {
            if skip.contains(k) {
                continue;
            }
            let v = Scalar::parse_rendered(v).ok_or_else(|| ParseError::Token(format!("{k}={v}")))?;
            fields.push((k.to_string(), v));
        }
        Ok(Packet::from_fields(PacketMeta::default(), fields))
    }
}

/// Parses a line produced by [`render_msg`]. Packet metadata is not part of the text
/// form, so parsed packets carry default metadata.
pub fn parse_line(line: &str) -> Result<(SimTime, OpenFlowMsg), ParseError> {
    let tokens = split_unquoted(line.trim(), ' ');
    let mut it = tokens.into_iter().filter(|t| !t.is_empty());
    let time = it.next().ok_or(ParseError::Empty)?;
    let at = SimTime::parse_decimal_secs(time).map_err(|_| ParseError::Time(time.to_string()))?;
    let name = it.next().ok_or(ParseError::Missing("message"))?;
    let mut pairs = Vec::new();
    let mut flow_tokens = Vec::new();
    for tok in it {
        let (k, v) = tok.split_once('=').ok_or_else(|| ParseError::Token(tok.to_string()))?;
        if k == "flow" {
            flow_tokens.push(v);
        } else {
            pairs.push((k, v));
        }
    }
    let f = Fields { pairs };
    let switch = f.get("sw")?.to_string();
    let msg = match name {
        "OFPT_PACKET_IN" => OpenFlowMsg::PacketIn {
            switch,
            in_port: f.num("in_port")?,
            pkt: f.packet(&["sw", "in_port"])?,
        },
        "OFPT_PACKET_OUT" => {
            let a = f.get("action")?;
            let action = if a == "flood" {
                OutAction::Flood
            } else {
                OutAction::Output(parse_port(a.strip_prefix("output:"), a)?)
            };
            OpenFlowMsg::PacketOut {
                switch,
                action,
                pkt: f.packet(&["sw", "action"])?,
            }
        }
        "OFPT_FLOW_MOD" => OpenFlowMsg::FlowMod(FlowMod {
            switch,
            op: match f.get("op")? {
                "add" => FlowModOp::Add,
                "modify" => FlowModOp::Modify,
                "delete" => FlowModOp::Delete,
                other => return Err(ParseError::Token(format!("op={other}"))),
            },
            priority: f.num("priority")?,
            hard_timeout: f.time("hard_timeout")?,
            matching: parse_match(f.get("match")?)?,
            actions: parse_actions(f.get("actions")?)?,
        }),
        "OFPT_FLOW_REMOVED" => {
            if f.get("reason")? != "hard_timeout" {
                return Err(ParseError::Token(format!("reason={}", f.get("reason")?)));
            }
            OpenFlowMsg::FlowRemoved {
                switch,
                matching: parse_match(f.get("match")?)?,
                priority: f.num("priority")?,
                packets: f.num("packets")?,
                bytes: f.num("bytes")?,
                duration: f.time("duration")?,
                reason: RemovedReason::HardTimeout,
            }
        }
        "OFPT_STATS_REQUEST" => OpenFlowMsg::StatsRequest {
            switch,
            window_id: f.num("window")?,
        },
        "OFPT_STATS_REPLY" => {
            let mut flows = Vec::new();
            for tok in flow_tokens {
                let (m, rest) = tok
                    .rsplit_once(']')
                    .ok_or_else(|| ParseError::Token(tok.to_string()))?;
                let mut nums = rest.trim_start_matches('/').split('/');
                let mut next = || -> Result<u64, ParseError> {
                    nums.next()
                        .and_then(|n| n.parse().ok())
                        .ok_or_else(|| ParseError::Token(tok.to_string()))
                };
                flows.push(FlowStat {
                    matching: parse_match(&format!("{m}]"))?,
                    packets: next()?,
                    bytes: next()?,
                });
            }
            OpenFlowMsg::StatsReply {
                switch,
                window_id: f.num("window")?,
                table_accesses: f.num("table_accesses")?,
                flows,
            }
        }
        other => return Err(ParseError::UnknownMessage(other.to_string())),
    };
    Ok((at, msg))
}
