//! The simulated network: hosts, switches and the controller wired to the event kernel,
//! with the attack engine's interception hooks on every stack boundary.

use std::collections::BTreeMap;

use rand::Rng;

use crate::asl::{AttackConfig, Direction, NodePrimitive};
use crate::attack::{
    run_activation, Activation, AttackRef, Ase, AseError, Boundary, Fired, Flow, Holder, InterceptPoint, PutRequest,
    Verdict,
};
use crate::controller::Controller;
use crate::kernel::rng::node_rng;
use crate::kernel::{Event, EventId, Handler, HandlerError, NodeIdx, Scheduler, SimTime, Target};
use crate::net::{
    cbr_tick, CbrApp, CbrState, NodeKind, Packet, PacketMeta, PortId, Provenance, Scalar, Schema, Topology,
    BROADCAST_ADDR,
};
use crate::openflow::{render_msg, OpenFlowMsg};
use crate::scenario::Scenario;
use crate::switch::{FlowId, FlowModResult, Switch, SwitchEffect};

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Data(Packet),
    Control(OpenFlowMsg),
}

/// Where an injected packet resumes its journey.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resume {
    /// Host outbound path, starting at this index of [`Boundary::OUTBOUND`].
    Host(usize),
    /// Switch data plane, as if the frame arrived on this port.
    Switch(PortId),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Announce,
    AppTick { app: usize },
    Frame { port: PortId, body: Body },
    FlowExpire { id: FlowId },
    Poll { k: u64 },
    AttackTimer { holder: Holder, attack: AttackRef },
    Inject { resume: Resume, pkt: Packet },
    PutDeliver { direction: Direction, update_stats: bool, pkt: Packet },
}

/// Delivered packet as seen by a host application.
#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    pub at: SimTime,
    pub host: NodeIdx,
    pub uid: u64,
    pub provenance: Provenance,
    /// Counted in the reception metrics.
    pub counted: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeStats {
    pub sent: u64,
    pub received: u64,
    pub discarded: u64,
    pub last_sent: Option<SimTime>,
    pub last_received: Option<SimTime>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Logs {
    pub control: Vec<String>,
    pub switch: Vec<String>,
    pub attack: Vec<String>,
    pub reception: Vec<String>,
}

pub struct World {
    topo: Topology,
    schema: Schema,
    duration: SimTime,
    apps: Vec<CbrApp>,
    app_state: Vec<CbrState>,
    app_events: Vec<Option<EventId>>,
    switches: BTreeMap<NodeIdx, Switch>,
    switch_delay: BTreeMap<NodeIdx, SimTime>,
    switch_names: Vec<String>,
    controller: Controller,
    controller_node: NodeIdx,
    flow_timers: BTreeMap<(NodeIdx, FlowId), EventId>,
    ase: Option<Ase>,
    destroyed: BTreeMap<NodeIdx, SimTime>,
    next_uid: u64,
    stats: BTreeMap<NodeIdx, NodeStats>,
    receptions: Vec<Reception>,
    unattached_drops: u64,
    logs: Logs,
}

/// Returns whether attacks on a node of this kind act at this boundary crossing.
fn acts_at(kind: &NodeKind, boundary: Boundary, flow: Flow) -> bool {
    match kind {
        NodeKind::Host(_) => boundary == Boundary::IpEth,
        NodeKind::Switch { .. } => boundary == Boundary::EthWire && flow == Flow::Inbound,
        NodeKind::Controller => false,
    }
}

fn outbound_index(b: Boundary) -> usize {
    Boundary::OUTBOUND.iter().position(|x| *x == b).expect("boundary")
}

impl World {
    /// Builds the network and schedules its initial events. `attack = None` leaves the
    /// attack engine out entirely.
    pub fn new(
        scenario: &Scenario,
        attack: Option<AttackConfig>,
        sched: &mut Scheduler<Payload>,
    ) -> Result<World, AseError> {
        let topo = scenario.topology.clone();
        let controller_node = topo.controller().expect("validated scenario has a controller");
        let mut switches = BTreeMap::new();
        let mut switch_delay = BTreeMap::new();
        for (idx, node) in topo.switches() {
            let spec = scenario.switch_spec(&node.name);
            switches.insert(idx, Switch::new(idx, &node.name, topo.data_ports(idx), spec.max_buffered));
            switch_delay.insert(idx, spec.processing_delay);
        }
        let switch_names = topo
            .connected_switches()
            .into_iter()
            .map(|s| topo.name(s).to_string())
            .collect();
        let ase = match attack {
            Some(cfg) => {
                let (mut ase, requests) = Ase::init(cfg, &topo)?;
                for r in requests {
                    let target = match r.holder {
                        Holder::Node(n) => Target::Node(n),
                        Holder::Global => Target::Engine,
                    };
                    let id = sched
                        .schedule(r.at, target, Payload::AttackTimer { holder: r.holder, attack: r.attack })
                        .expect("scheduled at start");
                    ase.record_timer(r.holder, r.attack, id);
                }
                Some(ase)
            }
            None => None,
        };
        for (idx, node) in topo.hosts() {
            if node.host().is_some_and(|h| h.announce) {
                sched.schedule(SimTime::ZERO, Target::Node(idx), Payload::Announce).expect("t = 0");
            }
        }
        let mut rngs = BTreeMap::new();
        let mut apps = Vec::new();
        let mut app_events = Vec::new();
        for (i, spec) in scenario.apps.iter().enumerate() {
            let mut app = spec.cbr.clone();
            if spec.start_jitter > SimTime::ZERO {
                let rng = rngs
                    .entry(app.src)
                    .or_insert_with(|| node_rng(scenario.seed, topo.name(app.src)));
                let jitter = rng.gen_range(0..=spec.start_jitter.as_micros());
                app.start += SimTime::from_micros(jitter);
                app.stop = app.stop.map(|s| s.max(app.start));
            }
            let id = sched
                .schedule(app.start, Target::Node(app.src), Payload::AppTick { app: i })
                .expect("start is not negative");
            app_events.push(Some(id));
            apps.push(app);
        }
        let interval = scenario.behavior.polling_interval;
        if interval > SimTime::ZERO && interval <= scenario.duration {
            sched
                .schedule(interval, Target::Node(controller_node), Payload::Poll { k: 1 })
                .expect("future");
        }
        Ok(World {
            schema: scenario.schema.clone(),
            duration: scenario.duration,
            app_state: vec![CbrState::default(); apps.len()],
            apps,
            app_events,
            switches,
            switch_delay,
            switch_names,
            controller: Controller::new(scenario.behavior.clone()),
            controller_node,
            flow_timers: BTreeMap::new(),
            ase,
            destroyed: BTreeMap::new(),
            next_uid: 1,
            stats: BTreeMap::new(),
            receptions: Vec::new(),
            unattached_drops: 0,
            logs: Logs::default(),
            topo,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn switch(&self, node: NodeIdx) -> Option<&Switch> {
        self.switches.get(&node)
    }

    pub fn ase(&self) -> Option<&Ase> {
        self.ase.as_ref()
    }

    pub fn logs(&self) -> &Logs {
        &self.logs
    }

    pub fn receptions(&self) -> &[Reception] {
        &self.receptions
    }

    pub fn stats(&self, node: NodeIdx) -> NodeStats {
        self.stats.get(&node).copied().unwrap_or_default()
    }

    pub fn destroyed(&self) -> &BTreeMap<NodeIdx, SimTime> {
        &self.destroyed
    }

    pub fn app_states(&self) -> &[CbrState] {
        &self.app_state
    }

    pub fn apps(&self) -> &[CbrApp] {
        &self.apps
    }

    pub fn unattached_drops(&self) -> u64 {
        self.unattached_drops
    }

    pub fn duration(&self) -> SimTime {
        self.duration
    }

    fn uid(&mut self) -> u64 {
        let u = self.next_uid;
        self.next_uid += 1;
        u
    }

    fn name(&self, n: NodeIdx) -> &str {
        self.topo.name(n)
    }

    fn is_destroyed(&self, n: NodeIdx) -> bool {
        self.destroyed.contains_key(&n)
    }

    fn attack_log(&mut self, line: String) {
        self.logs.attack.push(line);
    }

    /// Puts `body` on `port` of `node`; it arrives at the far end after `delay` plus latency.
    fn transmit(&mut self, sched: &mut Scheduler<Payload>, node: NodeIdx, port: PortId, body: Body, delay: SimTime) {
        let hop = match self.topo.route(node, port) {
            Ok(h) => h,
            Err(_) => {
                self.unattached_drops += 1;
                return;
            }
        };
        match &body {
            Body::Control(msg) => self.logs.control.push(render_msg(sched.now() + delay, msg)),
            Body::Data(_) => {
                let s = self.stats.entry(node).or_default();
                s.sent += 1;
                s.last_sent = Some(sched.now());
            }
        }
        sched.schedule_in(delay + hop.latency, Target::Node(hop.to.node), Payload::Frame { port: hop.to.port, body });
    }

    /// Runs the attack hook for one boundary crossing; `None` means the packet was swallowed.
    fn hook(&mut self, sched: &mut Scheduler<Payload>, point: InterceptPoint, pkt: Packet) -> Option<Packet> {
        let Some(ase) = self.ase.as_ref() else {
            return Some(pkt);
        };
        if ase.armed(point.node).is_empty() || !acts_at(&self.topo.node(point.node).kind, point.boundary, point.flow) {
            return Some(pkt);
        }
        let now = sched.now();
        let uid = pkt.meta.uid;
        let in_port = pkt.meta.ingress.map_or(0, |(_, p)| p);
        let out = ase.intercept(point, pkt, &self.schema, now);
        let at = format!(
            "node={} boundary={}:{}",
            self.name(point.node),
            point.boundary.name(),
            point.flow.name()
        );
        for (i, fault) in &out.fired {
            let attack = AttackRef::Conditional(*i);
            let line = match fault {
                None => format!("{now} FIRE {at} attack={attack} uid={uid}"),
                Some(f) => format!("{now} FAULT {at} attack={attack} uid={uid} error=\"{f}\""),
            };
            self.attack_log(line);
        }
        match out.verdict {
            Verdict::Swallow => self.attack_log(format!("{now} SWALLOW {at} uid={uid}")),
            Verdict::Replace => self.attack_log(format!("{now} REPLACE {at} uid={uid}")),
            Verdict::Pass => {}
        }
        let resume = match self.topo.node(point.node).kind {
            NodeKind::Switch { .. } => Resume::Switch(in_port),
            _ => Resume::Host(outbound_index(point.boundary) + 1),
        };
        for (p, delay) in out.sends {
            self.schedule_inject(sched, point.node, resume, p, delay);
        }
        self.schedule_puts(sched, Some(point.node), out.puts);
        out.pkt
    }

    fn schedule_inject(&mut self, sched: &mut Scheduler<Payload>, node: NodeIdx, resume: Resume, mut pkt: Packet, delay: SimTime) {
        pkt.meta.uid = self.uid();
        pkt.meta.origin = Some(node);
        sched.schedule_in(delay, Target::Node(node), Payload::Inject { resume, pkt });
    }

    fn schedule_puts(&mut self, sched: &mut Scheduler<Payload>, origin: Option<NodeIdx>, puts: Vec<PutRequest>) {
        let now = sched.now();
        for put in puts {
            for name in &put.nodes {
                let Ok(target) = self.topo.lookup(name) else {
                    self.attack_log(format!("{now} SKIP put target={name} reason=unknown_node"));
                    continue;
                };
                let mut pkt = put.pkt.clone_injected(self.uid(), now);
                if pkt.meta.origin.is_none() {
                    pkt.meta.origin = origin;
                }
                sched.schedule_in(
                    put.delay,
                    Target::Node(target),
                    Payload::PutDeliver {
                        direction: put.direction,
                        update_stats: put.update_stats,
                        pkt,
                    },
                );
            }
        }
    }

    /// Sends `pkt` down a host's stack starting at boundary index `from`.
    fn host_send(&mut self, sched: &mut Scheduler<Payload>, node: NodeIdx, mut pkt: Packet, from: usize) {
        for &boundary in &Boundary::OUTBOUND[from.min(4)..] {
            let point = InterceptPoint {
                node,
                boundary,
                flow: Flow::Outbound,
            };
            match self.hook(sched, point, pkt) {
                Some(p) => pkt = p,
                None => return,
            }
        }
        self.transmit(sched, node, 1, Body::Data(pkt), SimTime::ZERO);
    }

    fn host_receive(&mut self, sched: &mut Scheduler<Payload>, node: NodeIdx, mut pkt: Packet) {
        for &boundary in &Boundary::INBOUND {
            let point = InterceptPoint {
                node,
                boundary,
                flow: Flow::Inbound,
            };
            match self.hook(sched, point, pkt) {
                Some(p) => pkt = p,
                None => return,
            }
        }
        let counted = pkt.ip_dst().is_some() && pkt.ip_dst() == self.topo.address(node);
        self.deliver(sched.now(), node, pkt, counted);
    }

    fn deliver(&mut self, now: SimTime, node: NodeIdx, pkt: Packet, counted: bool) {
        let s = self.stats.entry(node).or_default();
        s.received += 1;
        s.last_received = Some(now);
        self.logs.reception.push(format!(
            "{now} RX host={} uid={} src={} dst={} provenance={} counted={}",
            self.topo.name(node),
            pkt.meta.uid,
            pkt.ip_src().unwrap_or("-"),
            pkt.ip_dst().unwrap_or("-"),
            pkt.provenance().name(),
            u8::from(counted)
        ));
        self.receptions.push(Reception {
            at: now,
            host: node,
            uid: pkt.meta.uid,
            provenance: pkt.provenance(),
            counted,
        });
    }

    fn switch_frame(&mut self, sched: &mut Scheduler<Payload>, node: NodeIdx, in_port: PortId, pkt: Packet) {
        let now = sched.now();
        let sw = self.switches.get_mut(&node).expect("switch");
        let effects = sw.handle_frame(in_port, pkt, now);
        self.logs.switch.extend(sw.take_log());
        self.switch_effects(sched, node, effects);
    }

    fn switch_effects(&mut self, sched: &mut Scheduler<Payload>, node: NodeIdx, effects: Vec<SwitchEffect>) {
        let delay = self.switch_delay.get(&node).copied().unwrap_or(SimTime::ZERO);
        for e in effects {
            match e {
                SwitchEffect::Transmit { port, pkt } => self.transmit(sched, node, port, Body::Data(pkt), delay),
                SwitchEffect::ToController(msg) => {
                    let port = self.topo.control_port(node).expect("connected switch");
                    self.transmit(sched, node, port, Body::Control(msg), delay);
                }
                SwitchEffect::Dropped { .. } => {}
            }
        }
    }

    fn flow_timers(&mut self, sched: &mut Scheduler<Payload>, node: NodeIdx, result: FlowModResult) {
        for e in result.removed {
            if let Some(id) = self.flow_timers.remove(&(node, e.id)) {
                sched.cancel(id);
            }
        }
        if let Some(entry) = result.added {
            if let Some(at) = entry.expires_at() {
                let id = sched
                    .schedule(at, Target::Node(node), Payload::FlowExpire { id: entry.id })
                    .expect("expiry lies ahead");
                self.flow_timers.insert((node, entry.id), id);
            }
        }
    }

    fn controller_send(&mut self, sched: &mut Scheduler<Payload>, msgs: Vec<OpenFlowMsg>) {
        let delay = self.controller.behavior().processing_delay;
        for msg in msgs {
            let Ok(sw) = self.topo.lookup(msg.switch()) else {
                continue;
            };
            let Some(port) = self.topo.controller_port_for(sw) else {
                continue;
            };
            self.transmit(sched, self.controller_node, port, Body::Control(msg), delay);
        }
    }

    fn destroy(&mut self, sched: &mut Scheduler<Payload>, node: NodeIdx) {
        let now = sched.now();
        if self.destroyed.contains_key(&node) {
            return;
        }
        self.destroyed.insert(node, now);
        for (i, app) in self.apps.iter().enumerate() {
            if app.src == node {
                if let Some(id) = self.app_events[i].take() {
                    sched.cancel(id);
                }
            }
        }
        let timers: Vec<_> = self.flow_timers.range((node, FlowId(0))..=(node, FlowId(u64::MAX))).map(|(k, v)| (*k, *v)).collect();
        for (k, id) in timers {
            sched.cancel(id);
            self.flow_timers.remove(&k);
        }
        self.attack_log(format!("{now} DESTROY node={}", self.name(node)));
    }

    fn attack_timer(&mut self, sched: &mut Scheduler<Payload>, holder: Holder, attack: AttackRef) {
        let now = sched.now();
        if let Holder::Node(n) = holder {
            if self.is_destroyed(n) {
                self.attack_log(format!("{now} SKIP attack={attack} node={} reason=destroyed", self.name(n)));
                return;
            }
        }
        let Some(ase) = self.ase.as_mut() else {
            return;
        };
        let holder_name = match holder {
            Holder::Node(n) => self.topo.name(n).to_string(),
            Holder::Global => "global".to_string(),
        };
        match ase.on_timer_fire(holder, attack, now) {
            Fired::Physical(NodePrimitive::Destroy { .. }) => {
                if let Holder::Node(n) = holder {
                    self.destroy(sched, n);
                }
            }
            Fired::Physical(NodePrimitive::Move { position, .. }) => {
                if let Holder::Node(n) = holder {
                    self.topo.set_position(n, position);
                    self.attack_log(format!(
                        "{now} MOVE node={holder_name} position={},{},{}",
                        position[0], position[1], position[2]
                    ));
                }
            }
            Fired::Armed => self.attack_log(format!("{now} ARM node={holder_name} attack={attack}")),
            Fired::Periodic { events, next } => {
                let origin = match holder {
                    Holder::Node(n) => Some(n),
                    Holder::Global => None,
                };
                self.attack_log(format!("{now} FIRE node={holder_name} attack={attack}"));
                match run_activation(&events, Activation::default(), &self.schema, origin, now) {
                    Ok(act) => {
                        if let Some(n) = origin {
                            let resume = Resume::Host(outbound_index(Boundary::AppUdp) + 1);
                            let resume = match self.topo.node(n).kind {
                                NodeKind::Switch { .. } => Resume::Switch(0),
                                _ => resume,
                            };
                            for (p, delay) in act.sends {
                                self.schedule_inject(sched, n, resume, p, delay);
                            }
                        }
                        self.schedule_puts(sched, origin, act.puts);
                    }
                    Err(f) => self.attack_log(format!(
                        "{now} FAULT node={holder_name} attack={attack} error=\"{f}\""
                    )),
                }
                if next <= self.duration {
                    let target = match holder {
                        Holder::Node(n) => Target::Node(n),
                        Holder::Global => Target::Engine,
                    };
                    let id = sched
                        .schedule(next, target, Payload::AttackTimer { holder, attack })
                        .expect("period is positive");
                    if let Some(ase) = self.ase.as_mut() {
                        ase.record_timer(holder, attack, id);
                    }
                }
            }
            Fired::Stale => {}
        }
    }

    fn on_node_event(&mut self, sched: &mut Scheduler<Payload>, node: NodeIdx, payload: Payload) -> Result<(), HandlerError> {
        let now = sched.now();
        if node == self.controller_node {
            match payload {
                Payload::Frame {
                    body: Body::Control(msg), ..
                } => {
                    let out = self.controller.handle(now, msg);
                    self.controller_send(sched, out);
                }
                Payload::Poll { k } => {
                    let names = self.switch_names.clone();
                    let out = self.controller.poll(now, k, &names);
                    self.controller_send(sched, out);
                    let interval = self.controller.behavior().polling_interval;
                    let next = now + interval;
                    if next <= self.duration {
                        sched.schedule(next, Target::Node(node), Payload::Poll { k: k + 1 }).expect("future");
                    }
                }
                other => return Err(HandlerError::new(format!("controller cannot handle {other:?}"))),
            }
            return Ok(());
        }
        if self.is_destroyed(node) {
            match payload {
                Payload::AttackTimer { holder, attack } => self.attack_timer(sched, holder, attack),
                Payload::PutDeliver { pkt, .. } => {
                    let name = self.name(node).to_string();
                    self.attack_log(format!("{now} SKIP put node={name} uid={} reason=destroyed", pkt.meta.uid));
                }
                Payload::Frame { .. } | Payload::Inject { .. } => self.stats.entry(node).or_default().discarded += 1,
                _ => {}
            }
            return Ok(());
        }
        let is_switch = self.switches.contains_key(&node);
        match payload {
            Payload::Announce => {
                let host = self.topo.node(node).host().expect("host").clone();
                let uid = self.uid();
                let meta = PacketMeta::new(uid, Some(node), now, Provenance::Normal);
                let mut pkt = Packet::new(meta);
                let set = |pkt: &mut Packet, path: &str, v: Scalar| pkt.set(&self.schema, path, v);
                set(&mut pkt, "ip.src", Scalar::str(&host.address)).map_err(|e| HandlerError::new(e.to_string()))?;
                set(&mut pkt, "ip.dst", Scalar::str(BROADCAST_ADDR)).map_err(|e| HandlerError::new(e.to_string()))?;
                set(&mut pkt, "eth.src", Scalar::str(&host.mac)).map_err(|e| HandlerError::new(e.to_string()))?;
                set(&mut pkt, "app.size", Scalar::Int(0)).map_err(|e| HandlerError::new(e.to_string()))?;
                self.host_send(sched, node, pkt, 0);
            }
            Payload::AppTick { app } => {
                let uid = self.uid();
                let (pkt, next) = cbr_tick(&self.apps[app], &mut self.app_state[app], now, &self.topo, &self.schema, uid)
                    .map_err(|e| HandlerError::new(e.to_string()))?;
                self.app_events[app] = match next {
                    Some(t) if t <= self.duration => Some(
                        sched
                            .schedule(t, Target::Node(node), Payload::AppTick { app })
                            .expect("future tick"),
                    ),
                    _ => None,
                };
                self.host_send(sched, node, pkt, 0);
            }
            Payload::Frame { port, body } => match (body, is_switch) {
                (Body::Data(pkt), true) => {
                    let point = InterceptPoint {
                        node,
                        boundary: Boundary::EthWire,
                        flow: Flow::Inbound,
                    };
                    let mut pkt = pkt;
                    pkt.meta.ingress = Some((node, port));
                    if let Some(pkt) = self.hook(sched, point, pkt) {
                        self.switch_frame(sched, node, port, pkt);
                    }
                }
                (Body::Control(msg), true) => {
                    let sw = self.switches.get_mut(&node).expect("switch");
                    let (effects, result) = sw.handle_control(msg, now);
                    self.logs.switch.extend(sw.take_log());
                    if let Some(r) = result {
                        self.flow_timers(sched, node, r);
                    }
                    self.switch_effects(sched, node, effects);
                }
                (Body::Data(pkt), false) => self.host_receive(sched, node, pkt),
                (Body::Control(msg), false) => {
                    return Err(HandlerError::new(format!("host received control message {}", msg.name())));
                }
            },
            Payload::FlowExpire { id } => {
                self.flow_timers.remove(&(node, id));
                let sw = self.switches.get_mut(&node).expect("switch");
                let (removed, msgs) = sw.expire_flows(now);
                self.logs.switch.extend(sw.take_log());
                for e in removed {
                    if let Some(t) = self.flow_timers.remove(&(node, e.id)) {
                        sched.cancel(t);
                    }
                }
                let port = self.topo.control_port(node).expect("connected switch");
                let delay = self.switch_delay.get(&node).copied().unwrap_or(SimTime::ZERO);
                for m in msgs {
                    self.transmit(sched, node, port, Body::Control(m), delay);
                }
            }
            Payload::AttackTimer { holder, attack } => self.attack_timer(sched, holder, attack),
            Payload::Inject { resume, pkt } => {
                let line = format!(
                    "{now} INJECT node={} uid={} src={} dst={}",
                    self.name(node),
                    pkt.meta.uid,
                    pkt.ip_src().unwrap_or("-"),
                    pkt.ip_dst().unwrap_or("-")
                );
                self.attack_log(line);
                match resume {
                    Resume::Host(from) => self.host_send(sched, node, pkt, from),
                    Resume::Switch(port) => {
                        let mut pkt = pkt;
                        pkt.meta.ingress = Some((node, port));
                        self.switch_frame(sched, node, port, pkt);
                    }
                }
            }
            Payload::PutDeliver {
                direction,
                update_stats,
                pkt,
            } => {
                let line = format!(
                    "{now} PUT node={} direction={} uid={} update_stats={}",
                    self.name(node),
                    direction.name(),
                    pkt.meta.uid,
                    u8::from(update_stats)
                );
                self.attack_log(line);
                match (is_switch, direction) {
                    (true, _) => {
                        let mut pkt = pkt;
                        pkt.meta.ingress = Some((node, 0));
                        self.switch_frame(sched, node, 0, pkt);
                    }
                    (false, Direction::Tx) => self.host_send(sched, node, pkt, 0),
                    (false, Direction::Rx) => self.deliver(now, node, pkt, update_stats),
                }
            }
            Payload::Poll { .. } => return Err(HandlerError::new("poll delivered to a non-controller node")),
        }
        Ok(())
    }
}

impl Handler<Payload> for World {
    fn handle(&mut self, event: Event<Payload>, sched: &mut Scheduler<Payload>) -> Result<(), HandlerError> {
        match event.target {
            Target::Node(n) => self.on_node_event(sched, n, event.payload),
            Target::Engine => match event.payload {
                Payload::AttackTimer { holder, attack } => {
                    self.attack_timer(sched, holder, attack);
                    Ok(())
                }
                other => Err(HandlerError::new(format!("engine cannot handle {other:?}"))),
            },
        }
    }

    fn describe_target(&self, target: Target) -> String {
        match target {
            Target::Node(n) => self.topo.name(n).to_string(),
            Target::Engine => "global".to_string(),
        }
    }
}
