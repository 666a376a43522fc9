//! Attack simulation engine: per-node attack lists and timers, interception of packets
//! crossing stack boundaries, and execution of message primitives.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::asl::{eval_condition, AttackConfig, MessagePrimitive, NodePrimitive, Value, INTERCEPTED};
use crate::asl::{ConditionalAttack, Direction, UnconditionalAttack};
use crate::kernel::{EventId, NodeIdx, SimTime};
use crate::net::{FieldType, NodeKind, Packet, PacketMeta, Provenance, Scalar, Schema, Topology, DEFAULT_CREATED_SIZE};

/// Adjacent layer pair a packet crosses inside a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Boundary {
    AppUdp,
    UdpIp,
    IpEth,
    EthWire,
}

impl Boundary {
    /// Top to bottom.
    pub const OUTBOUND: [Boundary; 4] = [Boundary::AppUdp, Boundary::UdpIp, Boundary::IpEth, Boundary::EthWire];
    pub const INBOUND: [Boundary; 4] = [Boundary::EthWire, Boundary::IpEth, Boundary::UdpIp, Boundary::AppUdp];

    pub fn name(self) -> &'static str {
        match self {
            Boundary::AppUdp => "app/udp",
            Boundary::UdpIp => "udp/ip",
            Boundary::IpEth => "ip/eth",
            Boundary::EthWire => "eth/wire",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Flow {
    Inbound,
    Outbound,
}

impl Flow {
    pub fn name(self) -> &'static str {
        match self {
            Flow::Inbound => "in",
            Flow::Outbound => "out",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InterceptPoint {
    pub node: NodeIdx,
    pub boundary: Boundary,
    pub flow: Flow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttackRef {
    Physical(usize),
    Conditional(usize),
    Unconditional(usize),
}

impl fmt::Display for AttackRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackRef::Physical(i) => write!(f, "p{}", i + 1),
            AttackRef::Conditional(i) => write!(f, "c{}", i + 1),
            AttackRef::Unconditional(i) => write!(f, "u{}", i + 1),
        }
    }
}

/// Owner of attack lists and timers: a node's local processor or the global one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Holder {
    Node(NodeIdx),
    Global,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttackLists {
    pub lp: Vec<usize>,
    pub lc: Vec<usize>,
    pub lu: Vec<usize>,
}

impl AttackLists {
    pub fn len(&self) -> usize {
        self.lp.len() + self.lc.len() + self.lu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttackTimers {
    pub tp: BTreeMap<usize, EventId>,
    pub tc: BTreeMap<usize, EventId>,
    pub tu: BTreeMap<usize, EventId>,
}

impl AttackTimers {
    fn slot(&mut self, attack: AttackRef) -> (&mut BTreeMap<usize, EventId>, usize) {
        match attack {
            AttackRef::Physical(i) => (&mut self.tp, i),
            AttackRef::Conditional(i) => (&mut self.tc, i),
            AttackRef::Unconditional(i) => (&mut self.tu, i),
        }
    }

    pub fn get(&self, attack: AttackRef) -> Option<EventId> {
        match attack {
            AttackRef::Physical(i) => self.tp.get(&i),
            AttackRef::Conditional(i) => self.tc.get(&i),
            AttackRef::Unconditional(i) => self.tu.get(&i),
        }
        .copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimerRequest {
    pub holder: Holder,
    pub attack: AttackRef,
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AseError {
    #[error("attack references unknown node `{0}`")]
    UnknownNode(String),
}

/// What a fired timer asks the caller to do.
#[derive(Debug, Clone, PartialEq)]
pub enum Fired {
    Physical(NodePrimitive),
    Armed,
    Periodic { events: Vec<MessagePrimitive>, next: SimTime },
    /// Timer no longer belongs to a live attack.
    Stale,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{primitive}: {message}")]
pub struct PrimitiveFault {
    pub primitive: &'static str,
    pub message: String,
}

fn fault<T>(primitive: &'static str, message: impl Into<String>) -> Result<T, PrimitiveFault> {
    Err(PrimitiveFault {
        primitive,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PutRequest {
    pub pkt: Packet,
    pub nodes: Vec<String>,
    pub direction: Direction,
    pub update_stats: bool,
    pub delay: SimTime,
}

/// Bindings and effects of one attack activation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Activation {
    pub packets: BTreeMap<String, Packet>,
    pub values: BTreeMap<String, Scalar>,
    pub intercepted: bool,
    pub swallowed: bool,
    pub changed: bool,
    pub sends: Vec<(Packet, SimTime)>,
    pub puts: Vec<PutRequest>,
}

impl Activation {
    pub fn intercepting(pkt: Packet) -> Self {
        let mut a = Activation {
            intercepted: true,
            ..Activation::default()
        };
        a.packets.insert(INTERCEPTED.to_string(), pkt);
        a
    }

    fn is_intercepted(&self, var: &str) -> bool {
        self.intercepted && var == INTERCEPTED
    }

    fn packet(&self, prim: &'static str, var: &str) -> Result<&Packet, PrimitiveFault> {
        match self.packets.get(var) {
            Some(p) => Ok(p),
            None => fault(prim, format!("unknown packet variable `{var}`")),
        }
    }

    fn resolve(&self, prim: &'static str, v: &Value) -> Result<Scalar, PrimitiveFault> {
        match v {
            Value::Lit(s) => Ok(s.clone()),
            Value::Var(name) => match self.values.get(name) {
                Some(s) => Ok(s.clone()),
                None => fault(prim, format!("unknown variable `{name}`")),
            },
        }
    }
}

/// Fresh attack packet: every schema field at its default, `app.size` at the default size.
pub fn blank_packet(schema: &Schema, origin: Option<NodeIdx>, now: SimTime) -> Packet {
    let mut p = Packet::new(PacketMeta::new(0, origin, now, Provenance::AttackInjected));
    for (path, ty) in schema.iter() {
        let v = if path == "app.size" && ty == FieldType::Int {
            Scalar::Int(DEFAULT_CREATED_SIZE)
        } else {
            ty.default_value()
        };
        p.set(schema, path, v).expect("schema field");
    }
    p
}

pub fn exec_primitive(
    prim: &MessagePrimitive,
    act: &mut Activation,
    schema: &Schema,
    origin: Option<NodeIdx>,
    now: SimTime,
) -> Result<(), PrimitiveFault> {
    let name = prim.name();
    let set_err = |e: crate::net::FieldError| PrimitiveFault {
        primitive: name,
        message: e.to_string(),
    };
    match prim {
        MessagePrimitive::Drop { pkt } => {
            act.packet(name, pkt)?;
            if act.is_intercepted(pkt) {
                act.swallowed = true;
            } else {
                act.packets.remove(pkt);
            }
        }
        MessagePrimitive::Create { pkt, fields } => {
            let mut p = blank_packet(schema, origin, now);
            for (f, v) in fields {
                let v = act.resolve(name, v)?;
                p.set(schema, f, v).map_err(set_err)?;
            }
            act.packets.insert(pkt.clone(), p);
        }
        MessagePrimitive::Clone { src, dst } => {
            let copy = act.packet(name, src)?.clone_injected(0, now);
            act.packets.insert(dst.clone(), copy);
        }
        MessagePrimitive::Change { pkt, field, value } => {
            let v = act.resolve(name, value)?;
            act.packet(name, pkt)?;
            let target = act.packets.get_mut(pkt).expect("checked");
            target.set(schema, field, v).map_err(set_err)?;
            if act.is_intercepted(pkt) {
                act.changed = true;
            }
        }
        MessagePrimitive::Send { pkt, delay } => {
            if act.is_intercepted(pkt) {
                return fault(name, format!("`{pkt}` was not produced by create or clone"));
            }
            let p = act.packet(name, pkt)?.clone();
            act.sends.push((p, *delay));
        }
        MessagePrimitive::Retrieve { pkt, field, var } => {
            let v = match act.packet(name, pkt)?.get(field) {
                Ok(v) => v.clone(),
                Err(e) => return fault(name, e.to_string()),
            };
            act.values.insert(var.clone(), v);
        }
        MessagePrimitive::Put {
            pkt,
            nodes,
            direction,
            update_stats,
            delay,
        } => {
            let p = act.packet(name, pkt)?.clone();
            act.puts.push(PutRequest {
                pkt: p,
                nodes: nodes.clone(),
                direction: *direction,
                update_stats: *update_stats,
                delay: *delay,
            });
        }
    }
    Ok(())
}

/// Runs an event list as one transaction.
pub fn run_activation(
    events: &[MessagePrimitive],
    mut act: Activation,
    schema: &Schema,
    origin: Option<NodeIdx>,
    now: SimTime,
) -> Result<Activation, PrimitiveFault> {
    for e in events {
        exec_primitive(e, &mut act, schema, origin, now)?;
    }
    Ok(act)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Swallow,
    Replace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterceptOutcome {
    pub verdict: Verdict,
    /// The packet that continues, absent when swallowed.
    pub pkt: Option<Packet>,
    pub sends: Vec<(Packet, SimTime)>,
    pub puts: Vec<PutRequest>,
    /// Attacks whose filter matched, with their fault if the activation aborted.
    pub fired: Vec<(usize, Option<PrimitiveFault>)>,
}

impl InterceptOutcome {
    pub fn pass(pkt: Packet) -> Self {
        InterceptOutcome {
            verdict: Verdict::Pass,
            pkt: Some(pkt),
            sends: Vec::new(),
            puts: Vec::new(),
            fired: Vec::new(),
        }
    }
}

/// Engine state built from a configuration.
#[derive(Debug, Clone)]
pub struct Ase {
    cfg: AttackConfig,
    lists: BTreeMap<Holder, AttackLists>,
    timers: BTreeMap<Holder, AttackTimers>,
    armed: BTreeMap<NodeIdx, Vec<usize>>,
}

impl Ase {
    /// Builds per-node lists and returns one timer request per (attack, node).
    pub fn init(cfg: AttackConfig, topo: &Topology) -> Result<(Ase, Vec<TimerRequest>), AseError> {
        let mut cfg = cfg;
        cfg.sort();
        let mut lists: BTreeMap<Holder, AttackLists> = BTreeMap::new();
        let mut requests = Vec::new();
        let node = |name: &str| match topo.lookup(name) {
            Ok(idx) if !matches!(topo.node(idx).kind, NodeKind::Controller) => Ok(idx),
            _ => Err(AseError::UnknownNode(name.to_string())),
        };
        for (i, p) in cfg.physical.iter().enumerate() {
            let n = node(p.node())?;
            lists.entry(Holder::Node(n)).or_default().lp.push(i);
            requests.push(TimerRequest {
                holder: Holder::Node(n),
                attack: AttackRef::Physical(i),
                at: p.at(),
            });
        }
        for (i, a) in cfg.conditional.iter().enumerate() {
            for name in &a.nodes {
                let n = node(name)?;
                lists.entry(Holder::Node(n)).or_default().lc.push(i);
                requests.push(TimerRequest {
                    holder: Holder::Node(n),
                    attack: AttackRef::Conditional(i),
                    at: a.start,
                });
            }
        }
        for (i, a) in cfg.unconditional.iter().enumerate() {
            let holders: Vec<Holder> = if a.nodes.is_empty() {
                vec![Holder::Global]
            } else {
                a.nodes.iter().map(|n| node(n).map(Holder::Node)).collect::<Result<_, _>>()?
            };
            for h in holders {
                lists.entry(h).or_default().lu.push(i);
                requests.push(TimerRequest {
                    holder: h,
                    attack: AttackRef::Unconditional(i),
                    at: a.start,
                });
            }
        }
        requests.sort_by_key(|r| r.at);
        Ok((
            Ase {
                cfg,
                lists,
                timers: BTreeMap::new(),
                armed: BTreeMap::new(),
            },
            requests,
        ))
    }

    pub fn config(&self) -> &AttackConfig {
        &self.cfg
    }

    pub fn lists(&self, holder: Holder) -> Option<&AttackLists> {
        self.lists.get(&holder)
    }

    pub fn timers(&self, holder: Holder) -> Option<&AttackTimers> {
        self.timers.get(&holder)
    }

    pub fn holders(&self) -> impl Iterator<Item = Holder> + '_ {
        self.lists.keys().copied()
    }

    pub fn record_timer(&mut self, holder: Holder, attack: AttackRef, id: EventId) {
        let (map, i) = self.timers.entry(holder).or_default().slot(attack);
        map.insert(i, id);
    }

    pub fn armed(&self, node: NodeIdx) -> &[usize] {
        self.armed.get(&node).map_or(&[], Vec::as_slice)
    }

    pub fn conditional(&self, i: usize) -> &ConditionalAttack {
        &self.cfg.conditional[i]
    }

    pub fn unconditional(&self, i: usize) -> &UnconditionalAttack {
        &self.cfg.unconditional[i]
    }

    pub fn on_timer_fire(&mut self, holder: Holder, attack: AttackRef, now: SimTime) -> Fired {
        let Some(lists) = self.lists.get_mut(&holder) else {
            return Fired::Stale;
        };
        match attack {
            AttackRef::Physical(i) => {
                let Some(pos) = lists.lp.iter().position(|&x| x == i) else {
                    return Fired::Stale;
                };
                lists.lp.remove(pos);
                if let Some(t) = self.timers.get_mut(&holder) {
                    t.tp.remove(&i);
                }
                Fired::Physical(self.cfg.physical[i].clone())
            }
            AttackRef::Conditional(i) => {
                let Holder::Node(n) = holder else {
                    return Fired::Stale;
                };
                if !lists.lc.contains(&i) {
                    return Fired::Stale;
                }
                let armed = self.armed.entry(n).or_default();
                if !armed.contains(&i) {
                    armed.push(i);
                }
                Fired::Armed
            }
            AttackRef::Unconditional(i) => {
                if !lists.lu.contains(&i) {
                    return Fired::Stale;
                }
                let a = &self.cfg.unconditional[i];
                Fired::Periodic {
                    events: a.events.clone(),
                    next: now + a.period,
                }
            }
        }
    }

    /// Runs every armed conditional attack of `point.node` against `pkt`, in arming order.
    pub fn intercept(&self, point: InterceptPoint, pkt: Packet, schema: &Schema, now: SimTime) -> InterceptOutcome {
        let mut out = InterceptOutcome::pass(pkt);
        for &i in self.armed(point.node) {
            let current = out.pkt.as_ref().expect("not swallowed");
            let a = &self.cfg.conditional[i];
            if !eval_condition(&a.filter, current, &BTreeMap::new()) {
                continue;
            }
            match run_activation(&a.events, Activation::intercepting(current.clone()), schema, Some(point.node), now) {
                Ok(mut act) => {
                    out.fired.push((i, None));
                    out.sends.append(&mut act.sends);
                    out.puts.append(&mut act.puts);
                    if act.swallowed {
                        out.verdict = Verdict::Swallow;
                        out.pkt = None;
                        break;
                    }
                    if act.changed {
                        out.verdict = Verdict::Replace;
                        out.pkt = act.packets.remove(INTERCEPTED);
                    }
                }
                Err(f) => out.fired.push((i, Some(f))),
            }
        }
        out
    }
}
