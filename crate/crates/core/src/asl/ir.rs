use std::fmt;

use crate::kernel::SimTime;
use crate::net::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Tx,
    Rx,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Tx => "TX",
            Direction::Rx => "RX",
        }
    }
}

/// Right-hand side of `create` and `change`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Lit(Scalar),
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    Field(String),
    Var(String),
    Lit(Scalar),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CmpOp::Eq => "eq",
            CmpOp::Ne => "ne",
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
        }
    }

    pub fn from_name(name: &str) -> Option<CmpOp> {
        CmpOp::ALL.into_iter().find(|op| op.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Cmp(CmpOp, Operand, Operand),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
    Not(Box<Condition>),
}

impl Condition {
    pub fn cmp(op: CmpOp, lhs: Operand, rhs: Operand) -> Self {
        Condition::Cmp(op, lhs, rhs)
    }

    pub fn and(a: Condition, b: Condition) -> Self {
        Condition::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Condition, b: Condition) -> Self {
        Condition::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Condition) -> Self {
        Condition::Not(Box::new(a))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodePrimitive {
    Destroy { node: String, at: SimTime },
    Move { node: String, at: SimTime, position: [f64; 3] },
}

impl NodePrimitive {
    pub fn at(&self) -> SimTime {
        match self {
            NodePrimitive::Destroy { at, .. } | NodePrimitive::Move { at, .. } => *at,
        }
    }

    pub fn node(&self) -> &str {
        match self {
            NodePrimitive::Destroy { node, .. } | NodePrimitive::Move { node, .. } => node,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessagePrimitive {
    Drop { pkt: String },
    Create { pkt: String, fields: Vec<(String, Value)> },
    Clone { src: String, dst: String },
    Change { pkt: String, field: String, value: Value },
    Send { pkt: String, delay: SimTime },
    Retrieve { pkt: String, field: String, var: String },
    Put {
        pkt: String,
        nodes: Vec<String>,
        direction: Direction,
        update_stats: bool,
        delay: SimTime,
    },
}

impl MessagePrimitive {
    pub fn name(&self) -> &'static str {
        match self {
            MessagePrimitive::Drop { .. } => "drop",
            MessagePrimitive::Create { .. } => "create",
            MessagePrimitive::Clone { .. } => "clone",
            MessagePrimitive::Change { .. } => "change",
            MessagePrimitive::Send { .. } => "send",
            MessagePrimitive::Retrieve { .. } => "retrieve",
            MessagePrimitive::Put { .. } => "put",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalAttack {
    pub start: SimTime,
    pub nodes: Vec<String>,
    pub filter: Condition,
    pub events: Vec<MessagePrimitive>,
}

/// Periodic attack. An empty node list makes it a global one run by the coordinator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnconditionalAttack {
    pub start: SimTime,
    pub period: SimTime,
    pub nodes: Vec<String>,
    pub events: Vec<MessagePrimitive>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttackConfig {
    pub physical: Vec<NodePrimitive>,
    pub conditional: Vec<ConditionalAttack>,
    pub unconditional: Vec<UnconditionalAttack>,
}

impl AttackConfig {
    pub fn is_empty(&self) -> bool {
        self.physical.is_empty() && self.conditional.is_empty() && self.unconditional.is_empty()
    }

    /// Stable sort of every section by occurrence or start time.
    pub fn sort(&mut self) {
        self.physical.sort_by_key(NodePrimitive::at);
        self.conditional.sort_by_key(|a| a.start);
        self.unconditional.sort_by_key(|a| a.start);
    }

    pub fn is_sorted(&self) -> bool {
        self.physical.is_sorted_by_key(NodePrimitive::at)
            && self.conditional.is_sorted_by_key(|a| a.start)
            && self.unconditional.is_sorted_by_key(|a| a.start)
    }

    /// Sets the period of every unconditional attack.
    pub fn set_period(&mut self, period: SimTime) {
        for a in &mut self.unconditional {
            a.period = period;
        }
    }
}

impl fmt::Display for AttackConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::pretty::pretty(self))
    }
}
