//! OpenFlow switch. The data plane (frame forwarding) and the control plane (message
//! handling) are separate types that share only the flow table and the miss buffer.

mod table;

use std::collections::BTreeMap;

use crate::kernel::{NodeIdx, SimTime};
use crate::net::{Packet, PortId};
use crate::openflow::{FlowAction, FlowMod, FlowModOp, OpenFlowMsg, OutAction, RemovedReason};

pub use crate::openflow::FlowMatch;
pub use table::{FlowEntry, FlowId, FlowTable};

pub const DEFAULT_MAX_BUFFERED: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    Rule(FlowId),
    BufferFull,
    /// Buffered miss packet discarded because a drop rule covering it was installed.
    Purged(FlowId),
}

impl DropReason {
    fn render(self) -> String {
        match self {
            DropReason::Rule(id) => format!("flow:{}", id.0),
            DropReason::BufferFull => "buffer_full".into(),
            DropReason::Purged(id) => format!("purge:{}", id.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SwitchEffect {
    Transmit { port: PortId, pkt: Packet },
    ToController(OpenFlowMsg),
    Dropped { reason: DropReason, pkt: Packet },
}

/// Packets that missed the table and await a controller decision.
#[derive(Debug, Clone)]
pub struct MissBuffer {
    pending: BTreeMap<u64, (PortId, Packet)>,
    capacity: usize,
}

impl MissBuffer {
    pub fn new(capacity: usize) -> Self {
        MissBuffer {
            pending: BTreeMap::new(),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    fn push(&mut self, in_port: PortId, pkt: Packet) -> bool {
        if self.pending.len() >= self.capacity {
            return false;
        }
        self.pending.insert(pkt.meta.uid, (in_port, pkt));
        true
    }

    fn release(&mut self, uid: u64) -> Option<(PortId, Packet)> {
        self.pending.remove(&uid)
    }

    fn purge(&mut self, m: &FlowMatch) -> Vec<Packet> {
        let uids: Vec<u64> = self
            .pending
            .iter()
            .filter(|(_, (port, p))| m.matches(p, *port))
            .map(|(u, _)| *u)
            .collect();
        uids.into_iter()
            .filter_map(|u| self.pending.remove(&u).map(|(_, p)| p))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SwitchCounters {
    pub frames_in: u64,
    pub dropped_by_rule: u64,
    pub dropped_buffer_full: u64,
    pub purged: u64,
    /// Transmissions per (output port, ip.dst).
    pub transmitted: BTreeMap<(PortId, String), u64>,
}

/// Forwarding application: looks packets up in the flow table and executes actions.
#[derive(Debug, Clone)]
pub struct DataPlane {
    node: NodeIdx,
    name: String,
    ports: Vec<PortId>,
    counters: SwitchCounters,
}

impl DataPlane {
    fn flood(&self, in_port: PortId, pkt: &Packet, out: &mut Vec<SwitchEffect>) {
        for &port in self.ports.iter().filter(|&&p| p != in_port) {
            out.push(SwitchEffect::Transmit { port, pkt: pkt.clone() });
        }
    }

    fn count_tx(&mut self, effects: &[SwitchEffect]) {
        for e in effects {
            if let SwitchEffect::Transmit { port, pkt } = e {
                let dst = pkt.ip_dst().unwrap_or_default().to_string();
                *self.counters.transmitted.entry((*port, dst)).or_default() += 1;
            }
        }
    }

    fn handle_frame(
        &mut self,
        table: &mut FlowTable,
        buffer: &mut MissBuffer,
        in_port: PortId,
        mut pkt: Packet,
        now: SimTime,
        log: &mut Vec<String>,
    ) -> Vec<SwitchEffect> {
        self.counters.frames_in += 1;
        pkt.meta.ingress = Some((self.node, in_port));
        let mut out = Vec::new();
        let hit = table
            .match_packet(&pkt, in_port, now)
            .map(|e| (e.id, e.actions.clone()));
        match hit {
            Some((id, actions)) => {
                for action in actions {
                    match action {
                        FlowAction::Output(port) => out.push(SwitchEffect::Transmit { port, pkt: pkt.clone() }),
                        FlowAction::Flood => self.flood(in_port, &pkt, &mut out),
                        FlowAction::ToController => out.push(SwitchEffect::ToController(OpenFlowMsg::PacketIn {
                            switch: self.name.clone(),
                            in_port,
                            pkt: pkt.clone(),
                        })),
                        FlowAction::Drop => {
                            self.counters.dropped_by_rule += 1;
                            let reason = DropReason::Rule(id);
                            log.push(drop_line(now, &self.name, in_port, reason, &pkt));
                            out.push(SwitchEffect::Dropped { reason, pkt: pkt.clone() });
                            break;
                        }
                    }
                }
            }
            None => {
                if buffer.push(in_port, pkt.clone()) {
                    out.push(SwitchEffect::ToController(OpenFlowMsg::PacketIn {
                        switch: self.name.clone(),
                        in_port,
                        pkt,
                    }));
                } else {
                    self.counters.dropped_buffer_full += 1;
                    let reason = DropReason::BufferFull;
                    log.push(drop_line(now, &self.name, in_port, reason, &pkt));
                    out.push(SwitchEffect::Dropped { reason, pkt });
                }
            }
        }
        self.count_tx(&out);
        out
    }
}

/// Outcome of a FLOW_MOD, for timer bookkeeping by the caller.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowModResult {
    pub added: Option<FlowEntry>,
    /// Entries removed without a FLOW_REMOVED (explicit deletes and add-replacements).
    pub removed: Vec<FlowEntry>,
    pub purged: Vec<Packet>,
}

/// Flow processing application: applies controller messages and reports to it.
#[derive(Debug, Clone)]
pub struct ControlPlane {
    name: String,
}

impl ControlPlane {
    fn apply_flow_mod(
        &mut self,
        table: &mut FlowTable,
        buffer: &mut MissBuffer,
        msg: &FlowMod,
        now: SimTime,
        log: &mut Vec<String>,
    ) -> FlowModResult {
        let mut result = FlowModResult::default();
        let mut installed: Option<FlowId> = None;
        let add = |table: &mut FlowTable, log: &mut Vec<String>, result: &mut FlowModResult| {
            let (id, replaced) = table.insert(
                msg.matching.clone(),
                msg.actions.clone(),
                msg.priority,
                msg.hard_timeout,
                now,
            );
            log.push(format!(
                "{now} FLOW_ADD sw={} id={} priority={} hard_timeout={} match={} actions={}",
                self.name,
                id.0,
                msg.priority,
                msg.hard_timeout.to_decimal_secs(),
                msg.matching,
                render_actions(&msg.actions)
            ));
            result.removed.extend(replaced);
            result.added = table.get(id).cloned();
            id
        };
        match msg.op {
            FlowModOp::Add => installed = Some(add(table, log, &mut result)),
            FlowModOp::Modify => {
                let ids = table.modify(&msg.matching, &msg.actions, msg.priority);
                if ids.is_empty() {
                    installed = Some(add(table, log, &mut result));
                } else {
                    for id in ids {
                        log.push(format!(
                            "{now} FLOW_MOD sw={} id={} priority={} match={} actions={}",
                            self.name,
                            id.0,
                            msg.priority,
                            msg.matching,
                            render_actions(&msg.actions)
                        ));
                        installed.get_or_insert(id);
                    }
                }
            }
            FlowModOp::Delete => {
                for e in table.delete(&msg.matching) {
                    log.push(format!("{now} FLOW_DELETE sw={} id={} match={}", self.name, e.id.0, e.matching));
                    result.removed.push(e);
                }
            }
        }
        if let (Some(id), true) = (installed, msg.actions.contains(&FlowAction::Drop)) {
            for pkt in buffer.purge(&msg.matching) {
                let port = pkt.meta.ingress.map_or(0, |(_, p)| p);
                log.push(drop_line(now, &self.name, port, DropReason::Purged(id), &pkt));
                result.purged.push(pkt);
            }
        }
        result
    }

    fn packet_out(
        &mut self,
        data: &mut DataPlane,
        buffer: &mut MissBuffer,
        pkt: Packet,
        action: OutAction,
    ) -> Vec<SwitchEffect> {
        let in_port = buffer
            .release(pkt.meta.uid)
            .map(|(p, _)| p)
            .or(pkt.meta.ingress.map(|(_, p)| p))
            .unwrap_or(0);
        let mut out = Vec::new();
        match action {
            OutAction::Output(port) => out.push(SwitchEffect::Transmit { port, pkt }),
            OutAction::Flood => data.flood(in_port, &pkt, &mut out),
        }
        data.count_tx(&out);
        out
    }

    fn expire(&mut self, table: &mut FlowTable, now: SimTime, log: &mut Vec<String>) -> (Vec<FlowEntry>, Vec<OpenFlowMsg>) {
        let removed = table.expire(now);
        let msgs = removed
            .iter()
            .map(|e| {
                log.push(format!(
                    "{now} FLOW_EXPIRE sw={} id={} match={} packets={} bytes={}",
                    self.name, e.id.0, e.matching, e.pkt_count, e.byte_count
                ));
                OpenFlowMsg::FlowRemoved {
                    switch: self.name.clone(),
                    matching: e.matching.clone(),
                    priority: e.priority,
                    packets: e.pkt_count,
                    bytes: e.byte_count,
                    duration: now - e.installed_at,
                    reason: RemovedReason::HardTimeout,
                }
            })
            .collect();
        (removed, msgs)
    }

    fn stats_reply(&mut self, table: &mut FlowTable, window_id: u64) -> OpenFlowMsg {
        let (flows, table_accesses) = table.take_window();
        OpenFlowMsg::StatsReply {
            switch: self.name.clone(),
            window_id,
            flows: flows
                .into_iter()
                .map(|(matching, packets, bytes)| crate::openflow::FlowStat {
                    matching,
                    packets,
                    bytes,
                })
                .collect(),
            table_accesses,
        }
    }
}

fn render_actions(actions: &[FlowAction]) -> String {
    let parts: Vec<String> = actions.iter().map(ToString::to_string).collect();
    format!("[{}]", parts.join(","))
}

fn drop_line(now: SimTime, sw: &str, in_port: PortId, reason: DropReason, pkt: &Packet) -> String {
    format!(
        "{now} DROP sw={sw} in_port={in_port} reason={} uid={} ip.src={} ip.dst={}",
        reason.render(),
        pkt.meta.uid,
        pkt.ip_src().unwrap_or("-"),
        pkt.ip_dst().unwrap_or("-")
    )
}

#[derive(Debug, Clone)]
pub struct Switch {
    pub node: NodeIdx,
    pub name: String,
    table: FlowTable,
    buffer: MissBuffer,
    data: DataPlane,
    control: ControlPlane,
    log: Vec<String>,
}

impl Switch {
    pub fn new(node: NodeIdx, name: &str, data_ports: Vec<PortId>, max_buffered: usize) -> Self {
        Switch {
            node,
            name: name.to_string(),
            table: FlowTable::new(),
            buffer: MissBuffer::new(max_buffered),
            data: DataPlane {
                node,
                name: name.to_string(),
                ports: data_ports,
                counters: SwitchCounters::default(),
            },
            control: ControlPlane { name: name.to_string() },
            log: Vec::new(),
        }
    }

    pub fn table(&self) -> &FlowTable {
        &self.table
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn counters(&self) -> &SwitchCounters {
        &self.data.counters
    }

    pub fn log(&self) -> &[String] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<String> {
        std::mem::take(&mut self.log)
    }

    /// A frame arrived on data port `in_port`.
    pub fn handle_frame(&mut self, in_port: PortId, pkt: Packet, now: SimTime) -> Vec<SwitchEffect> {
        self.data
            .handle_frame(&mut self.table, &mut self.buffer, in_port, pkt, now, &mut self.log)
    }

    pub fn apply_flow_mod(&mut self, msg: &FlowMod, now: SimTime) -> FlowModResult {
        self.control
            .apply_flow_mod(&mut self.table, &mut self.buffer, msg, now, &mut self.log)
    }

    /// Handles a controller message; returns the resulting effects and FLOW_MOD outcome.
    pub fn handle_control(&mut self, msg: OpenFlowMsg, now: SimTime) -> (Vec<SwitchEffect>, Option<FlowModResult>) {
        match msg {
            OpenFlowMsg::FlowMod(m) => {
                let r = self.apply_flow_mod(&m, now);
                (Vec::new(), Some(r))
            }
            OpenFlowMsg::PacketOut { pkt, action, .. } => (
                self.control.packet_out(&mut self.data, &mut self.buffer, pkt, action),
                None,
            ),
            OpenFlowMsg::StatsRequest { window_id, .. } => (
                vec![SwitchEffect::ToController(self.control.stats_reply(&mut self.table, window_id))],
                None,
            ),
            _ => (Vec::new(), None),
        }
    }

    /// Removes every entry whose hard timeout elapsed at `now`; one FLOW_REMOVED each.
    pub fn expire_flows(&mut self, now: SimTime) -> (Vec<FlowEntry>, Vec<OpenFlowMsg>) {
        self.control.expire(&mut self.table, now, &mut self.log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{PacketMeta, Provenance, Scalar};

    fn pkt(uid: u64, src: &str, dst: &str) -> Packet {
        Packet::from_fields(
            PacketMeta::new(uid, None, SimTime::ZERO, Provenance::Normal),
            [("ip.src", Scalar::str(src)), ("ip.dst", Scalar::str(dst))],
        )
    }

    fn sw() -> Switch {
        Switch::new(NodeIdx(0), "Switch1", vec![1, 2, 3, 4, 5], 2)
    }

    fn add(sw: &mut Switch, m: FlowMatch, actions: Vec<FlowAction>, priority: u16) -> FlowModResult {
        sw.apply_flow_mod(
            &FlowMod {
                switch: "Switch1".into(),
                op: FlowModOp::Add,
                matching: m,
                actions,
                priority,
                hard_timeout: SimTime::from_secs(30),
            },
            SimTime::ZERO,
        )
    }

    #[test]
    fn miss_sends_packet_in_and_buffers() {
        let mut s = sw();
        let out = s.handle_frame(1, pkt(1, "192.168.0.1", "192.168.0.2"), SimTime::from_millis(1));
        assert!(matches!(&out[..], [SwitchEffect::ToController(OpenFlowMsg::PacketIn { in_port: 1, .. })]));
        assert_eq!(s.buffered(), 1);
    }

    #[test]
    fn buffer_full_drops() {
        let mut s = sw();
        s.handle_frame(1, pkt(1, "a", "b"), SimTime::ZERO);
        s.handle_frame(1, pkt(2, "a", "b"), SimTime::ZERO);
        let out = s.handle_frame(1, pkt(3, "a", "b"), SimTime::ZERO);
        assert!(matches!(&out[..], [SwitchEffect::Dropped { reason: DropReason::BufferFull, .. }]));
        assert_eq!(s.counters().dropped_buffer_full, 1);
    }

    #[test]
    fn drop_rule_discards_without_controller() {
        let mut s = sw();
        add(&mut s, FlowMatch::pair(None, "c3", "s2"), vec![FlowAction::Drop], 100);
        let out = s.handle_frame(3, pkt(1, "c3", "s2"), SimTime::ZERO);
        assert!(matches!(&out[..], [SwitchEffect::Dropped { reason: DropReason::Rule(_), .. }]));
        assert_eq!(s.counters().dropped_by_rule, 1);
        assert!(s.log().last().unwrap().contains(" DROP sw=Switch1 in_port=3 reason=flow:1"));
    }

    #[test]
    fn flood_skips_ingress() {
        let mut s = sw();
        add(&mut s, FlowMatch::new(), vec![FlowAction::Flood], 1);
        let out = s.handle_frame(3, pkt(1, "a", "b"), SimTime::ZERO);
        let ports: Vec<PortId> = out
            .iter()
            .map(|e| match e {
                SwitchEffect::Transmit { port, .. } => *port,
                other => panic!("{other:?}"),
            })
            .collect();
        assert_eq!(ports, vec![1, 2, 4, 5]);
    }

    #[test]
    fn drop_rule_outranks_forwarding() {
        let mut s = sw();
        add(&mut s, FlowMatch::pair(Some(3), "c3", "s2"), vec![FlowAction::Output(6)], 10);
        add(&mut s, FlowMatch::pair(None, "c3", "s2"), vec![FlowAction::Drop], 100);
        let out = s.handle_frame(3, pkt(1, "c3", "s2"), SimTime::ZERO);
        assert!(matches!(&out[..], [SwitchEffect::Dropped { .. }]));
    }

    #[test]
    fn modify_refines_flood_to_output() {
        let mut s = sw();
        let m = FlowMatch::pair(Some(1), "a", "b");
        add(&mut s, m.clone(), vec![FlowAction::Flood], 10);
        s.apply_flow_mod(
            &FlowMod {
                switch: "Switch1".into(),
                op: FlowModOp::Modify,
                matching: m,
                actions: vec![FlowAction::Output(2)],
                priority: 10,
                hard_timeout: SimTime::from_secs(30),
            },
            SimTime::ZERO,
        );
        let out = s.handle_frame(1, pkt(1, "a", "b"), SimTime::ZERO);
        assert!(matches!(&out[..], [SwitchEffect::Transmit { port: 2, .. }]));
        assert!(s.log().iter().any(|l| l.contains("FLOW_MOD")));
    }

    #[test]
    fn modify_missing_acts_as_add() {
        let mut s = sw();
        let r = s.apply_flow_mod(
            &FlowMod {
                switch: "Switch1".into(),
                op: FlowModOp::Modify,
                matching: FlowMatch::pair(None, "a", "b"),
                actions: vec![FlowAction::Output(2)],
                priority: 10,
                hard_timeout: SimTime::from_secs(30),
            },
            SimTime::ZERO,
        );
        assert!(r.added.is_some());
        assert_eq!(s.table().len(), 1);
    }

    #[test]
    fn delete_removes_silently() {
        let mut s = sw();
        let m = FlowMatch::pair(None, "a", "b");
        add(&mut s, m.clone(), vec![FlowAction::Output(2)], 10);
        let r = s.apply_flow_mod(
            &FlowMod {
                switch: "Switch1".into(),
                op: FlowModOp::Delete,
                matching: m,
                actions: vec![],
                priority: 0,
                hard_timeout: SimTime::ZERO,
            },
            SimTime::from_secs(10),
        );
        assert_eq!(r.removed.len(), 1);
        let (removed, msgs) = s.expire_flows(SimTime::from_secs(40));
        assert!(removed.is_empty() && msgs.is_empty());
    }

    #[test]
    fn expiry_reports_final_counters() {
        let mut s = sw();
        s.apply_flow_mod(
            &FlowMod {
                switch: "Switch1".into(),
                op: FlowModOp::Add,
                matching: FlowMatch::pair(Some(1), "a", "b"),
                actions: vec![FlowAction::Output(2)],
                priority: 10,
                hard_timeout: SimTime::from_secs(30),
            },
            SimTime::from_secs(2),
        );
        s.handle_frame(1, pkt(7, "a", "b"), SimTime::from_secs(3));
        assert!(s.expire_flows(SimTime::from_secs(31)).1.is_empty());
        let (_, msgs) = s.expire_flows(SimTime::from_secs(32));
        match &msgs[..] {
            [OpenFlowMsg::FlowRemoved { packets: 1, duration, .. }] => assert_eq!(*duration, SimTime::from_secs(30)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn packet_out_releases_buffer() {
        let mut s = sw();
        let p = pkt(9, "a", "b");
        s.handle_frame(3, p.clone(), SimTime::ZERO);
        let (out, _) = s.handle_control(
            OpenFlowMsg::PacketOut {
                switch: "Switch1".into(),
                pkt: p,
                action: OutAction::Flood,
            },
            SimTime::ZERO,
        );
        assert_eq!(out.len(), 4);
        assert_eq!(s.buffered(), 0);
    }

    #[test]
    fn drop_rule_purges_buffered_miss() {
        let mut s = sw();
        s.handle_frame(3, pkt(9, "c3", "s2"), SimTime::ZERO);
        let r = add(&mut s, FlowMatch::pair(None, "c3", "s2"), vec![FlowAction::Drop], 100);
        assert_eq!(r.purged.len(), 1);
        assert_eq!(s.buffered(), 0);
    }

    #[test]
    fn stats_reply_reports_window_deltas() {
        let mut s = sw();
        add(&mut s, FlowMatch::pair(Some(1), "a", "b"), vec![FlowAction::Output(2)], 10);
        for uid in 0..3 {
            s.handle_frame(1, pkt(uid, "a", "b"), SimTime::ZERO);
        }
        let (out, _) = s.handle_control(
            OpenFlowMsg::StatsRequest {
                switch: "Switch1".into(),
                window_id: 4,
            },
            SimTime::ZERO,
        );
        match &out[..] {
            [SwitchEffect::ToController(OpenFlowMsg::StatsReply { window_id: 4, flows, table_accesses: 3, .. })] => {
                assert_eq!(flows[0].packets, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn matched_plus_missed_equals_presented() {
        let mut s = Switch::new(NodeIdx(0), "S", vec![1, 2], 1 << 20);
        add(&mut s, FlowMatch::new().with("ip.dst", "b"), vec![FlowAction::Output(2)], 10);
        for uid in 0..50u64 {
            let dst = if uid % 3 == 0 { "b" } else { "c" };
            s.handle_frame(1, pkt(uid, "a", dst), SimTime::ZERO);
            if uid == 25 {
                s.expire_flows(SimTime::from_secs(31));
                add(&mut s, FlowMatch::new().with("ip.dst", "b"), vec![FlowAction::Output(2)], 10);
            }
        }
        assert_eq!(
            s.table().total_matched() + s.table().misses(),
            s.counters().frames_in
        );
    }
}
