//! The six control messages exchanged between switches and the controller, and their
//! canonical one-line text rendering.

mod text;

use std::collections::BTreeMap;
use std::fmt;

use crate::kernel::SimTime;
use crate::net::{Packet, PortId, Scalar};

pub use text::{parse_line, render_msg, ParseError};

/// Exact-match predicate over packet fields plus an optional ingress port.
/// An empty predicate set with no port matches everything.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FlowMatch {
    pub predicates: BTreeMap<String, Scalar>,
    pub in_port: Option<PortId>,
}

impl FlowMatch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, path: &str, value: impl Into<Scalar>) -> Self {
        self.predicates.insert(path.to_string(), value.into());
        self
    }

    pub fn on_port(mut self, port: PortId) -> Self {
        self.in_port = Some(port);
        self
    }

    /// `{in_port?, ip.src, ip.dst}` pair match used for host-to-host flows.
    pub fn pair(in_port: Option<PortId>, src: &str, dst: &str) -> Self {
        FlowMatch {
            predicates: BTreeMap::from([
                ("ip.dst".to_string(), Scalar::str(dst)),
                ("ip.src".to_string(), Scalar::str(src)),
            ]),
            in_port,
        }
    }

    pub fn matches(&self, pkt: &Packet, in_port: PortId) -> bool {
        if self.in_port.is_some_and(|p| p != in_port) {
            return false;
        }
        self.predicates
            .iter()
            .all(|(path, want)| pkt.get(path).is_ok_and(|have| have == want))
    }

    pub fn src(&self) -> Option<&str> {
        self.predicates.get("ip.src").and_then(Scalar::as_str)
    }

    pub fn dst(&self) -> Option<&str> {
        self.predicates.get("ip.dst").and_then(Scalar::as_str)
    }
}

impl fmt::Display for FlowMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&text::render_match(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlowAction {
    Output(PortId),
    Flood,
    Drop,
    ToController,
}

impl fmt::Display for FlowAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowAction::Output(p) => write!(f, "output:{p}"),
            FlowAction::Flood => f.write_str("flood"),
            FlowAction::Drop => f.write_str("drop"),
            FlowAction::ToController => f.write_str("controller"),
        }
    }
}

/// Forwarding instruction carried by a PACKET_OUT.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutAction {
    Output(PortId),
    Flood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowModOp {
    Add,
    Modify,
    Delete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovedReason {
    HardTimeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowMod {
    pub switch: String,
    pub op: FlowModOp,
    pub matching: FlowMatch,
    pub actions: Vec<FlowAction>,
    pub priority: u16,
    /// Zero means the entry never expires.
    pub hard_timeout: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowStat {
    pub matching: FlowMatch,
    pub packets: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpenFlowMsg {
    PacketIn {
        switch: String,
        in_port: PortId,
        pkt: Packet,
    },
    PacketOut {
        switch: String,
        pkt: Packet,
        action: OutAction,
    },
    FlowMod(FlowMod),
    FlowRemoved {
        switch: String,
        matching: FlowMatch,
        priority: u16,
        packets: u64,
        bytes: u64,
        duration: SimTime,
        reason: RemovedReason,
    },
    StatsRequest {
        switch: String,
        window_id: u64,
    },
    /// Per-window deltas since the previous reply.
    StatsReply {
        switch: String,
        window_id: u64,
        flows: Vec<FlowStat>,
        table_accesses: u64,
    },
}

impl OpenFlowMsg {
    pub fn name(&self) -> &'static str {
        match self {
            OpenFlowMsg::PacketIn { .. } => "OFPT_PACKET_IN",
            OpenFlowMsg::PacketOut { .. } => "OFPT_PACKET_OUT",
            OpenFlowMsg::FlowMod(_) => "OFPT_FLOW_MOD",
            OpenFlowMsg::FlowRemoved { .. } => "OFPT_FLOW_REMOVED",
            OpenFlowMsg::StatsRequest { .. } => "OFPT_STATS_REQUEST",
            OpenFlowMsg::StatsReply { .. } => "OFPT_STATS_REPLY",
        }
    }

    pub fn switch(&self) -> &str {
        match self {
            OpenFlowMsg::PacketIn { switch, .. }
            | OpenFlowMsg::PacketOut { switch, .. }
            | OpenFlowMsg::FlowRemoved { switch, .. }
            | OpenFlowMsg::StatsRequest { switch, .. }
            | OpenFlowMsg::StatsReply { switch, .. } => switch,
            OpenFlowMsg::FlowMod(m) => &m.switch,
        }
    }

    /// Direction on the control channel.
    pub fn to_controller(&self) -> bool {
        matches!(
            self,
            OpenFlowMsg::PacketIn { .. } | OpenFlowMsg::FlowRemoved { .. } | OpenFlowMsg::StatsReply { .. }
        )
    }
}

pub const MESSAGE_NAMES: [&str; 6] = [
    "OFPT_PACKET_IN",
    "OFPT_PACKET_OUT",
    "OFPT_FLOW_MOD",
    "OFPT_FLOW_REMOVED",
    "OFPT_STATS_REQUEST",
    "OFPT_STATS_REPLY",
];
