//! Reactive controller: learns host locations from PACKET_INs, installs flood rules for
//! unknown destinations and refines them into unicast rules once a reply is seen.

use std::collections::BTreeMap;

use crate::kernel::SimTime;
use crate::monitoring::{DetectionConfig, Marker, Mitigation, Monitor, MonitorConfig};
use crate::net::{Packet, PortId, BROADCAST_ADDR};
use crate::openflow::{FlowAction, FlowMatch, FlowMod, FlowModOp, OpenFlowMsg, OutAction};

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerBehavior {
    pub polling_interval: SimTime,
    pub detection: DetectionConfig,
    pub forward_priority: u16,
    pub mitigation_priority: u16,
    pub flow_timeout: SimTime,
    pub flood_timeout: SimTime,
    pub mitigation_timeout: SimTime,
    pub processing_delay: SimTime,
}

impl Default for ControllerBehavior {
    fn default() -> Self {
        ControllerBehavior {
            polling_interval: SimTime::from_secs(30),
            detection: DetectionConfig::default(),
            forward_priority: 10,
            mitigation_priority: 100,
            flow_timeout: SimTime::from_secs(30),
            flood_timeout: SimTime::from_secs(1),
            mitigation_timeout: SimTime::from_secs(30),
            processing_delay: SimTime::ZERO,
        }
    }
}

/// Address → port, per switch.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HostLocations {
    by_switch: BTreeMap<String, BTreeMap<String, PortId>>,
}

impl HostLocations {
    pub fn get(&self, switch: &str, address: &str) -> Option<PortId> {
        self.by_switch.get(switch)?.get(address).copied()
    }

    /// Returns true if the location was new or changed.
    pub fn learn(&mut self, switch: &str, address: &str, port: PortId) -> bool {
        let slot = self.by_switch.entry(switch.to_string()).or_default();
        slot.insert(address.to_string(), port) != Some(port)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, PortId)> {
        self.by_switch
            .iter()
            .flat_map(|(sw, m)| m.iter().map(move |(a, p)| (sw.as_str(), a.as_str(), *p)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstalledFlow {
    pub actions: Vec<FlowAction>,
    pub priority: u16,
    pub installed_at: SimTime,
}

/// Controller state reduced to what the control log determines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ControllerState {
    pub locations: HostLocations,
    pub installed: BTreeMap<(String, FlowMatch), InstalledFlow>,
}

impl ControllerState {
    /// Applies one logged control message.
    pub fn observe(&mut self, at: SimTime, msg: &OpenFlowMsg) {
        match msg {
            OpenFlowMsg::PacketIn { switch, in_port, pkt } => {
                if let Some(src) = pkt.ip_src() {
                    self.locations.learn(switch, src, *in_port);
                }
            }
            OpenFlowMsg::FlowMod(m) => {
                let key = (m.switch.clone(), m.matching.clone());
                match m.op {
                    FlowModOp::Delete => {
                        self.installed.remove(&key);
                    }
                    FlowModOp::Modify if self.installed.contains_key(&key) => {
                        let e = self.installed.get_mut(&key).unwrap();
                        e.actions = m.actions.clone();
                        e.priority = m.priority;
                    }
                    _ => {
                        self.installed.insert(
                            key,
                            InstalledFlow {
                                actions: m.actions.clone(),
                                priority: m.priority,
                                installed_at: at,
                            },
                        );
                    }
                }
            }
            OpenFlowMsg::FlowRemoved { switch, matching, .. } => {
                self.installed.remove(&(switch.clone(), matching.clone()));
            }
            _ => {}
        }
    }

    pub fn replay<'a>(log: impl IntoIterator<Item = &'a (SimTime, OpenFlowMsg)>) -> Self {
        let mut s = ControllerState::default();
        for (at, msg) in log {
            s.observe(*at, msg);
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    behavior: ControllerBehavior,
    state: ControllerState,
    monitor: Monitor,
    log: Vec<String>,
}

impl Controller {
    pub fn new(behavior: ControllerBehavior) -> Self {
        let monitor = Monitor::new(MonitorConfig {
            interval: behavior.polling_interval,
            detection: behavior.detection,
            mitigation_priority: behavior.mitigation_priority,
            mitigation_timeout: behavior.mitigation_timeout,
        });
        Controller {
            behavior,
            state: ControllerState::default(),
            monitor,
            log: Vec::new(),
        }
    }

    pub fn behavior(&self) -> &ControllerBehavior {
        &self.behavior
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    pub fn markers(&self) -> &[Marker] {
        self.monitor.markers()
    }

    pub fn log(&self) -> &[String] {
        &self.log
    }

    fn flow_mod(&mut self, now: SimTime, m: FlowMod, out: &mut Vec<OpenFlowMsg>) {
        let msg = OpenFlowMsg::FlowMod(m);
        self.state.observe(now, &msg);
        out.push(msg);
    }

    fn install(&mut self, now: SimTime, switch: &str, matching: FlowMatch, action: FlowAction, out: &mut Vec<OpenFlowMsg>) {
        let timeout = if action == FlowAction::Flood {
            self.behavior.flood_timeout
        } else {
            self.behavior.flow_timeout
        };
        self.log.push(format!(
            "{now} INSTALL sw={switch} match={matching} actions=[{action}] priority={} hard_timeout={}",
            self.behavior.forward_priority,
            timeout.to_decimal_secs()
        ));
        self.flow_mod(
            now,
            FlowMod {
                switch: switch.to_string(),
                op: FlowModOp::Add,
                matching,
                actions: vec![action],
                priority: self.behavior.forward_priority,
                hard_timeout: timeout,
            },
            out,
        );
    }

    fn reinstall_drop(&mut self, now: SimTime, m: &Mitigation, why: &str, out: &mut Vec<OpenFlowMsg>) {
        self.log.push(format!(
            "{now} MITIGATE sw={} src={} dst={} reinstall={why}",
            m.switch, m.src, m.dst
        ));
        let rule = self.monitor.drop_rule(m);
        self.flow_mod(now, rule, out);
    }

    /// Flood-then-refine forwarding decision for a table miss.
    pub fn handle_packet_in(&mut self, now: SimTime, switch: &str, in_port: PortId, pkt: Packet) -> Vec<OpenFlowMsg> {
        let mut out = Vec::new();
        let (Some(src), Some(dst)) = (pkt.ip_src().map(str::to_string), pkt.ip_dst().map(str::to_string)) else {
            self.log.push(format!("{now} IGNORE sw={switch} in_port={in_port} uid={} reason=no_address", pkt.meta.uid));
            return out;
        };
        // Port 0 marks frames placed into the switch by an attack; they reveal no location.
        if in_port != 0 && self.state.locations.learn(switch, &src, in_port) {
            self.log.push(format!("{now} LEARN sw={switch} addr={src} port={in_port}"));
        }
        if self.monitor.is_mitigated(switch, &src, &dst) {
            let m = Mitigation {
                switch: switch.to_string(),
                src,
                dst,
            };
            self.reinstall_drop(now, &m, "packet_in", &mut out);
            return out;
        }
        if dst == BROADCAST_ADDR {
            out.push(OpenFlowMsg::PacketOut {
                switch: switch.to_string(),
                pkt,
                action: OutAction::Flood,
            });
            return out;
        }
        match self.state.locations.get(switch, &dst) {
            Some(port) => {
                self.install(now, switch, FlowMatch::pair(Some(in_port), &src, &dst), FlowAction::Output(port), &mut out);
                self.refine(now, switch, &dst, &src, in_port, &mut out);
                out.push(OpenFlowMsg::PacketOut {
                    switch: switch.to_string(),
                    pkt,
                    action: OutAction::Output(port),
                });
            }
            None => {
                self.install(now, switch, FlowMatch::pair(Some(in_port), &src, &dst), FlowAction::Flood, &mut out);
                out.push(OpenFlowMsg::PacketOut {
                    switch: switch.to_string(),
                    pkt,
                    action: OutAction::Flood,
                });
            }
        }
        out
    }

    /// Turns installed flood rules from `src` toward `dst` into unicast rules on `port`.
    fn refine(&mut self, now: SimTime, switch: &str, src: &str, dst: &str, port: PortId, out: &mut Vec<OpenFlowMsg>) {
        let stale: Vec<(FlowMatch, u16)> = self
            .state
            .installed
            .iter()
            .filter(|((sw, m), f)| {
                sw == switch && m.src() == Some(src) && m.dst() == Some(dst) && f.actions == [FlowAction::Flood]
            })
            .map(|((_, m), f)| (m.clone(), f.priority))
            .collect();
        for (matching, priority) in stale {
            self.log.push(format!("{now} REFINE sw={switch} match={matching} actions=[output:{port}]"));
            self.flow_mod(
                now,
                FlowMod {
                    switch: switch.to_string(),
                    op: FlowModOp::Modify,
                    matching,
                    actions: vec![FlowAction::Output(port)],
                    priority,
                    hard_timeout: self.behavior.flow_timeout,
                },
                out,
            );
        }
    }

    pub fn handle_flow_removed(&mut self, now: SimTime, switch: &str, matching: &FlowMatch, priority: u16) -> Vec<OpenFlowMsg> {
        let mut out = Vec::new();
        if self.state.installed.remove(&(switch.to_string(), matching.clone())).is_none() {
            self.log.push(format!("{now} WARN sw={switch} unknown_flow match={matching}"));
            return out;
        }
        self.log.push(format!("{now} FORGET sw={switch} match={matching}"));
        if priority == self.behavior.mitigation_priority {
            if let (Some(src), Some(dst)) = (matching.src(), matching.dst()) {
                if self.monitor.is_mitigated(switch, src, dst) {
                    let m = Mitigation {
                        switch: switch.to_string(),
                        src: src.to_string(),
                        dst: dst.to_string(),
                    };
                    self.reinstall_drop(now, &m, "expired", &mut out);
                }
            }
        }
        out
    }

    pub fn poll(&mut self, now: SimTime, window_id: u64, switches: &[String]) -> Vec<OpenFlowMsg> {
        self.monitor.poll(now, window_id, switches)
    }

    /// Dispatches one message arriving from a switch.
    pub fn handle(&mut self, now: SimTime, msg: OpenFlowMsg) -> Vec<OpenFlowMsg> {
        match msg {
            OpenFlowMsg::PacketIn { switch, in_port, pkt } => self.handle_packet_in(now, &switch, in_port, pkt),
            OpenFlowMsg::FlowRemoved {
                switch,
                matching,
                priority,
                ..
            } => self.handle_flow_removed(now, &switch, &matching, priority),
            OpenFlowMsg::StatsReply {
                switch,
                window_id,
                flows,
                table_accesses,
            } => {
                let mods = self.monitor.handle_stats_reply(now, &switch, window_id, flows, table_accesses);
                let mut out = Vec::new();
                for m in mods {
                    self.log.push(format!(
                        "{now} MITIGATE sw={} match={} priority={}",
                        m.switch, m.matching, m.priority
                    ));
                    self.flow_mod(now, m, &mut out);
                }
                out
            }
            other => {
                self.log.push(format!("{now} WARN unexpected {}", other.name()));
                Vec::new()
            }
        }
    }

    /// Detection log lines (CSV, without header).
    pub fn detection_log(&self) -> &[String] {
        self.monitor.log()
    }
}
