use std::collections::BTreeMap;

use super::ir::*;
use super::{AslError, ErrorKind};
use crate::net::{FieldType, NodeKind, Schema, Topology};

/// Name of the intercepted packet inside a conditional attack.
pub const INTERCEPTED: &str = "pkt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    Host,
    Switch,
    Controller,
}

/// What attack text is checked against: node names and the packet schema.
#[derive(Debug, Clone)]
pub struct AslContext {
    nodes: BTreeMap<String, NodeRole>,
    schema: Schema,
}

impl AslContext {
    pub fn new(schema: Schema) -> Self {
        AslContext {
            nodes: BTreeMap::new(),
            schema,
        }
    }

    pub fn with_node(mut self, name: &str, role: NodeRole) -> Self {
        self.nodes.insert(name.to_string(), role);
        self
    }

    pub fn from_topology(topo: &Topology, schema: &Schema) -> Self {
        let mut ctx = AslContext::new(schema.clone());
        for (_, node) in topo.nodes() {
            let role = match node.kind {
                NodeKind::Host(_) => NodeRole::Host,
                NodeKind::Switch { .. } => NodeRole::Switch,
                NodeKind::Controller => NodeRole::Controller,
            };
            ctx.nodes.insert(node.name.clone(), role);
        }
        ctx
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn role(&self, name: &str) -> Option<NodeRole> {
        self.nodes.get(name).copied()
    }
}

pub(crate) type Check = Result<(), (ErrorKind, String)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PacketOrigin {
    Intercepted,
    Produced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Binding {
    Packet(PacketOrigin),
    Scalar(FieldType),
}

/// Variables visible at a point of one activation.
#[derive(Debug, Clone, Default)]
pub(crate) struct Env {
    vars: BTreeMap<String, Binding>,
    global: bool,
}

impl Env {
    pub fn conditional() -> Self {
        let mut env = Env::default();
        env.vars
            .insert(INTERCEPTED.to_string(), Binding::Packet(PacketOrigin::Intercepted));
        env
    }

    pub fn unconditional(global: bool) -> Self {
        Env {
            vars: BTreeMap::new(),
            global,
        }
    }
}

fn fail<T>(kind: ErrorKind, msg: impl Into<String>) -> Result<T, (ErrorKind, String)> {
    Err((kind, msg.into()))
}

impl AslContext {
    /// Nodes that may carry attacks: hosts and switches.
    pub(crate) fn check_node(&self, name: &str) -> Check {
        match self.role(name) {
            Some(NodeRole::Host | NodeRole::Switch) => Ok(()),
            Some(NodeRole::Controller) => fail(ErrorKind::UnknownNode, format!("`{name}` is the controller and cannot be attacked")),
            None => fail(ErrorKind::UnknownNode, format!("unknown node `{name}`")),
        }
    }

    pub(crate) fn check_field(&self, path: &str) -> Result<FieldType, (ErrorKind, String)> {
        self.schema
            .field_type(path)
            .ok_or_else(|| (ErrorKind::UnknownField, format!("unknown field `{path}`")))
    }

    fn packet(&self, env: &Env, var: &str) -> Result<PacketOrigin, (ErrorKind, String)> {
        match env.vars.get(var) {
            Some(Binding::Packet(o)) => Ok(*o),
            Some(Binding::Scalar(_)) => fail(ErrorKind::TypeMismatch, format!("`{var}` is a value, not a packet")),
            None => fail(ErrorKind::UndefinedVariable, format!("undefined packet `{var}`")),
        }
    }

    fn scalar(&self, env: &Env, var: &str) -> Result<FieldType, (ErrorKind, String)> {
        match env.vars.get(var) {
            Some(Binding::Scalar(t)) => Ok(*t),
            Some(Binding::Packet(_)) => fail(ErrorKind::TypeMismatch, format!("`{var}` is a packet, not a value")),
            None => fail(ErrorKind::UndefinedVariable, format!("undefined variable `{var}`")),
        }
    }

    fn value_type(&self, env: &Env, v: &Value) -> Result<FieldType, (ErrorKind, String)> {
        match v {
            Value::Lit(s) => Ok(s.field_type()),
            Value::Var(name) => self.scalar(env, name),
        }
    }

    fn assign(&self, env: &Env, field: &str, v: &Value) -> Check {
        let want = self.check_field(field)?;
        let got = self.value_type(env, v)?;
        if want != got {
            return fail(
                ErrorKind::TypeMismatch,
                format!("`{field}` holds {} but is given {}", want.name(), got.name()),
            );
        }
        Ok(())
    }

    fn bind(&self, env: &mut Env, var: &str, b: Binding) -> Check {
        match env.vars.get(var) {
            Some(Binding::Packet(PacketOrigin::Intercepted)) => {
                fail(ErrorKind::TypeMismatch, format!("`{var}` names the intercepted packet"))
            }
            Some(old) if std::mem::discriminant(old) != std::mem::discriminant(&b) => {
                fail(ErrorKind::TypeMismatch, format!("`{var}` is rebound with a different kind"))
            }
            _ => {
                env.vars.insert(var.to_string(), b);
                Ok(())
            }
        }
    }

    pub(crate) fn check_event(&self, env: &mut Env, ev: &MessagePrimitive) -> Check {
        match ev {
            MessagePrimitive::Drop { pkt } => self.packet(env, pkt).map(|_| ()),
            MessagePrimitive::Create { pkt, fields } => {
                for (f, v) in fields {
                    self.assign(env, f, v)?;
                }
                self.bind(env, pkt, Binding::Packet(PacketOrigin::Produced))
            }
            MessagePrimitive::Clone { src, dst } => {
                self.packet(env, src)?;
                self.bind(env, dst, Binding::Packet(PacketOrigin::Produced))
            }
            MessagePrimitive::Change { pkt, field, value } => {
                self.packet(env, pkt)?;
                self.assign(env, field, value)
            }
            MessagePrimitive::Send { pkt, .. } => {
                if self.packet(env, pkt)? == PacketOrigin::Intercepted {
                    return fail(ErrorKind::IllegalSend, format!("`{pkt}` was not produced by create or clone"));
                }
                if env.global {
                    return fail(ErrorKind::IllegalSend, "send needs a node; use put in attacks without nodes");
                }
                Ok(())
            }
            MessagePrimitive::Retrieve { pkt, field, var } => {
                self.packet(env, pkt)?;
                let t = self.check_field(field)?;
                self.bind(env, var, Binding::Scalar(t))
            }
            MessagePrimitive::Put { pkt, nodes, .. } => {
                self.packet(env, pkt)?;
                if nodes.is_empty() {
                    return fail(ErrorKind::Syntax, "put needs at least one destination node");
                }
                nodes.iter().try_for_each(|n| self.check_node(n))
            }
        }
    }

    fn operand_type(&self, env: &Env, o: &Operand) -> Result<FieldType, (ErrorKind, String)> {
        match o {
            Operand::Field(f) => self.check_field(f),
            Operand::Var(v) => self.scalar(env, v),
            Operand::Lit(s) => Ok(s.field_type()),
        }
    }

    pub(crate) fn check_condition(&self, env: &Env, c: &Condition) -> Check {
        match c {
            Condition::Cmp(op, a, b) => {
                let (ta, tb) = (self.operand_type(env, a)?, self.operand_type(env, b)?);
                if ta != tb {
                    return fail(
                        ErrorKind::TypeMismatch,
                        format!("`{}` compares {} with {}", op.symbol(), ta.name(), tb.name()),
                    );
                }
                Ok(())
            }
            Condition::And(a, b) | Condition::Or(a, b) => {
                self.check_condition(env, a)?;
                self.check_condition(env, b)
            }
            Condition::Not(a) => self.check_condition(env, a),
        }
    }

    /// Checks a whole configuration; diagnostics carry no source position.
    pub fn validate(&self, cfg: &AttackConfig) -> Result<(), AslError> {
        let wrap = |(kind, msg): (ErrorKind, String)| AslError::new(kind, 0, 0, msg);
        for p in &cfg.physical {
            self.check_node(p.node()).map_err(wrap)?;
            if let NodePrimitive::Move { position, .. } = p {
                if position.iter().any(|c| !c.is_finite()) {
                    return Err(wrap((ErrorKind::Syntax, "coordinates must be finite".into())));
                }
            }
        }
        for a in &cfg.conditional {
            if a.nodes.is_empty() {
                return Err(wrap((ErrorKind::Syntax, "conditional attack needs nodes".into())));
            }
            a.nodes.iter().try_for_each(|n| self.check_node(n)).map_err(wrap)?;
            let mut env = Env::conditional();
            self.check_condition(&env, &a.filter).map_err(wrap)?;
            self.check_events(&mut env, &a.events).map_err(wrap)?;
        }
        for a in &cfg.unconditional {
            if a.period.as_micros() == 0 {
                return Err(wrap((ErrorKind::Syntax, "period must be positive".into())));
            }
            a.nodes.iter().try_for_each(|n| self.check_node(n)).map_err(wrap)?;
            let mut env = Env::unconditional(a.nodes.is_empty());
            self.check_events(&mut env, &a.events).map_err(wrap)?;
        }
        if !cfg.is_sorted() {
            return Err(wrap((ErrorKind::Syntax, "attacks are not in chronological order".into())));
        }
        Ok(())
    }

    fn check_events(&self, env: &mut Env, events: &[MessagePrimitive]) -> Check {
        if events.is_empty() {
            return fail(ErrorKind::Syntax, "attack has no events");
        }
        events.iter().try_for_each(|e| self.check_event(env, e))
    }
}
