//! Three-section XML form of an attack configuration.
//!
//! ```xml
//! <attacks version="1">
//!   <physical> destroy | move ... </physical>
//!   <conditional> <attack start=".."> nodes filter events </attack> ... </conditional>
//!   <unconditional> <attack start=".." period=".."> nodes events </attack> ... </unconditional>
//! </attacks>
//! ```

use quick_xml::escape::escape;
use roxmltree::{Document, Node};
use thiserror::Error;

use super::ir::*;
use crate::kernel::SimTime;
use crate::net::Scalar;

pub const XML_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XmlError {
    #[error("malformed XML: {0}")]
    Malformed(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

struct W {
    out: String,
    depth: usize,
}

impl W {
    fn line(&mut self, s: &str) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn open(&mut self, s: &str) {
        self.line(s);
        self.depth += 1;
    }

    fn close(&mut self, s: &str) {
        self.depth -= 1;
        self.line(s);
    }
}

fn attr(v: &str) -> String {
    escape(v).into_owned()
}

fn t(x: SimTime) -> String {
    x.to_decimal_secs()
}

fn scalar_elem(s: &Scalar) -> String {
    match s {
        Scalar::Int(v) => format!("<int value=\"{v}\"/>"),
        Scalar::Str(v) => format!("<str value=\"{}\"/>", attr(v)),
    }
}

fn value_elem(v: &Value) -> String {
    match v {
        Value::Lit(s) => scalar_elem(s),
        Value::Var(n) => format!("<var name=\"{}\"/>", attr(n)),
    }
}

fn write_nodes(w: &mut W, tag: &str, nodes: &[String]) {
    if nodes.is_empty() {
        w.line(&format!("<{tag}/>"));
        return;
    }
    w.open(&format!("<{tag}>"));
    for n in nodes {
        w.line(&format!("<node name=\"{}\"/>", attr(n)));
    }
    w.close(&format!("</{tag}>"));
}

fn write_condition(w: &mut W, c: &Condition) {
    match c {
        Condition::Cmp(op, a, b) => {
            let operand = |o: &Operand| match o {
                Operand::Field(f) => format!("<field path=\"{}\"/>", attr(f)),
                Operand::Var(v) => format!("<var name=\"{}\"/>", attr(v)),
                Operand::Lit(s) => scalar_elem(s),
            };
            w.line(&format!("<cmp op=\"{}\">{}{}</cmp>", op.name(), operand(a), operand(b)));
        }
        Condition::And(a, b) | Condition::Or(a, b) => {
            let tag = if matches!(c, Condition::And(..)) { "and" } else { "or" };
            w.open(&format!("<{tag}>"));
            write_condition(w, a);
            write_condition(w, b);
            w.close(&format!("</{tag}>"));
        }
        Condition::Not(a) => {
            w.open("<not>");
            write_condition(w, a);
            w.close("</not>");
        }
    }
}

fn write_event(w: &mut W, e: &MessagePrimitive) {
    match e {
        MessagePrimitive::Drop { pkt } => w.line(&format!("<drop pkt=\"{}\"/>", attr(pkt))),
        MessagePrimitive::Create { pkt, fields } => {
            if fields.is_empty() {
                w.line(&format!("<create pkt=\"{}\"/>", attr(pkt)));
                return;
            }
            w.open(&format!("<create pkt=\"{}\">", attr(pkt)));
            for (f, v) in fields {
                w.line(&format!("<set field=\"{}\">{}</set>", attr(f), value_elem(v)));
            }
            w.close("</create>");
        }
        MessagePrimitive::Clone { src, dst } => {
            w.line(&format!("<clone src=\"{}\" dst=\"{}\"/>", attr(src), attr(dst)))
        }
        MessagePrimitive::Change { pkt, field, value } => w.line(&format!(
            "<change pkt=\"{}\" field=\"{}\">{}</change>",
            attr(pkt),
            attr(field),
            value_elem(value)
        )),
        MessagePrimitive::Send { pkt, delay } => {
            w.line(&format!("<send pkt=\"{}\" delay=\"{}\"/>", attr(pkt), t(*delay)))
        }
        MessagePrimitive::Retrieve { pkt, field, var } => w.line(&format!(
            "<retrieve pkt=\"{}\" field=\"{}\" var=\"{}\"/>",
            attr(pkt),
            attr(field),
            attr(var)
        )),
        MessagePrimitive::Put {
            pkt,
            nodes,
            direction,
            update_stats,
            delay,
        } => {
            w.open(&format!(
                "<put pkt=\"{}\" direction=\"{}\" update_stats=\"{update_stats}\" delay=\"{}\">",
                attr(pkt),
                direction.name(),
                t(*delay)
            ));
            for n in nodes {
                w.line(&format!("<node name=\"{}\"/>", attr(n)));
            }
            w.close("</put>");
        }
    }
}

fn write_events(w: &mut W, events: &[MessagePrimitive]) {
    w.open("<events>");
    for e in events {
        write_event(w, e);
    }
    w.close("</events>");
}

pub fn to_xml(cfg: &AttackConfig) -> String {
    let mut w = W {
        out: String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"),
        depth: 0,
    };
    w.open(&format!("<attacks version=\"{XML_VERSION}\">"));
    w.open("<physical>");
    for p in &cfg.physical {
        match p {
            NodePrimitive::Destroy { node, at } => {
                w.line(&format!("<destroy node=\"{}\" time=\"{}\"/>", attr(node), t(*at)))
            }
            NodePrimitive::Move { node, at, position: [x, y, z] } => w.line(&format!(
                "<move node=\"{}\" time=\"{}\" x=\"{x}\" y=\"{y}\" z=\"{z}\"/>",
                attr(node),
                t(*at)
            )),
        }
    }
    w.close("</physical>");
    w.open("<conditional>");
    for a in &cfg.conditional {
        w.open(&format!("<attack start=\"{}\">", t(a.start)));
        write_nodes(&mut w, "nodes", &a.nodes);
        w.open("<filter>");
        write_condition(&mut w, &a.filter);
        w.close("</filter>");
        write_events(&mut w, &a.events);
        w.close("</attack>");
    }
    w.close("</conditional>");
    w.open("<unconditional>");
    for a in &cfg.unconditional {
        w.open(&format!("<attack start=\"{}\" period=\"{}\">", t(a.start), t(a.period)));
        write_nodes(&mut w, "nodes", &a.nodes);
        write_events(&mut w, &a.events);
        w.close("</attack>");
    }
    w.close("</unconditional>");
    w.close("</attacks>");
    w.out
}

fn violation<T>(msg: impl Into<String>) -> Result<T, XmlError> {
    Err(XmlError::SchemaViolation(msg.into()))
}

fn elements<'a, 'i>(n: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    n.children().filter(Node::is_element)
}

fn req<'a>(n: Node<'a, '_>, name: &str) -> Result<&'a str, XmlError> {
    n.attribute(name).map_or_else(
        || violation(format!("<{}> lacks attribute `{name}`", n.tag_name().name())),
        Ok,
    )
}

fn time_attr(n: Node, name: &str) -> Result<SimTime, XmlError> {
    let raw = req(n, name)?;
    SimTime::parse_decimal_secs(raw).or_else(|e| violation(format!("bad time `{raw}`: {e}")))
}

fn f64_attr(n: Node, name: &str) -> Result<f64, XmlError> {
    let raw = req(n, name)?;
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => violation(format!("bad coordinate `{raw}`")),
    }
}

fn only_child<'a, 'i>(n: Node<'a, 'i>) -> Result<Node<'a, 'i>, XmlError> {
    let mut it = elements(n);
    match (it.next(), it.next()) {
        (Some(c), None) => Ok(c),
        _ => violation(format!("<{}> needs exactly one child", n.tag_name().name())),
    }
}

fn read_scalar(n: Node) -> Result<Option<Scalar>, XmlError> {
    match n.tag_name().name() {
        "int" => {
            let raw = req(n, "value")?;
            raw.parse()
                .map(|v| Some(Scalar::Int(v)))
                .or_else(|_| violation(format!("bad integer `{raw}`")))
        }
        "str" => Ok(Some(Scalar::Str(req(n, "value")?.to_string()))),
        _ => Ok(None),
    }
}

fn read_value(n: Node) -> Result<Value, XmlError> {
    if let Some(s) = read_scalar(n)? {
        return Ok(Value::Lit(s));
    }
    match n.tag_name().name() {
        "var" => Ok(Value::Var(req(n, "name")?.to_string())),
        other => violation(format!("unexpected <{other}> where a value belongs")),
    }
}

fn read_operand(n: Node) -> Result<Operand, XmlError> {
    if let Some(s) = read_scalar(n)? {
        return Ok(Operand::Lit(s));
    }
    match n.tag_name().name() {
        "field" => Ok(Operand::Field(req(n, "path")?.to_string())),
        "var" => Ok(Operand::Var(req(n, "name")?.to_string())),
        other => violation(format!("unexpected <{other}> in comparison")),
    }
}

fn two<'a, 'i>(n: Node<'a, 'i>) -> Result<(Node<'a, 'i>, Node<'a, 'i>), XmlError> {
    let kids: Vec<_> = elements(n).collect();
    match kids[..] {
        [a, b] => Ok((a, b)),
        _ => violation(format!("<{}> needs exactly two children", n.tag_name().name())),
    }
}

fn read_condition(n: Node) -> Result<Condition, XmlError> {
    match n.tag_name().name() {
        "cmp" => {
            let raw = req(n, "op")?;
            let op = CmpOp::from_name(raw).map_or_else(|| violation(format!("unknown operator `{raw}`")), Ok)?;
            let (a, b) = two(n)?;
            Ok(Condition::cmp(op, read_operand(a)?, read_operand(b)?))
        }
        "and" => {
            let (a, b) = two(n)?;
            Ok(Condition::and(read_condition(a)?, read_condition(b)?))
        }
        "or" => {
            let (a, b) = two(n)?;
            Ok(Condition::or(read_condition(a)?, read_condition(b)?))
        }
        "not" => Ok(Condition::not(read_condition(only_child(n)?)?)),
        other => violation(format!("unexpected <{other}> in filter")),
    }
}

fn read_node_names(n: Node) -> Result<Vec<String>, XmlError> {
    elements(n)
        .map(|c| match c.tag_name().name() {
            "node" => Ok(req(c, "name")?.to_string()),
            other => violation(format!("unexpected <{other}> in node list")),
        })
        .collect()
}

fn read_event(n: Node) -> Result<MessagePrimitive, XmlError> {
    let s = |name| req(n, name).map(str::to_string);
    Ok(match n.tag_name().name() {
        "drop" => MessagePrimitive::Drop { pkt: s("pkt")? },
        "create" => {
            let fields = elements(n)
                .map(|c| {
                    if c.tag_name().name() != "set" {
                        return violation(format!("unexpected <{}> in create", c.tag_name().name()));
                    }
                    Ok((req(c, "field")?.to_string(), read_value(only_child(c)?)?))
                })
                .collect::<Result<_, _>>()?;
            MessagePrimitive::Create { pkt: s("pkt")?, fields }
        }
        "clone" => MessagePrimitive::Clone {
            src: s("src")?,
            dst: s("dst")?,
        },
        "change" => MessagePrimitive::Change {
            pkt: s("pkt")?,
            field: s("field")?,
            value: read_value(only_child(n)?)?,
        },
        "send" => MessagePrimitive::Send {
            pkt: s("pkt")?,
            delay: time_attr(n, "delay")?,
        },
        "retrieve" => MessagePrimitive::Retrieve {
            pkt: s("pkt")?,
            field: s("field")?,
            var: s("var")?,
        },
        "put" => MessagePrimitive::Put {
            pkt: s("pkt")?,
            nodes: read_node_names(n)?,
            direction: match req(n, "direction")? {
                "TX" => Direction::Tx,
                "RX" => Direction::Rx,
                other => return violation(format!("bad direction `{other}`")),
            },
            update_stats: match req(n, "update_stats")? {
                "true" => true,
                "false" => false,
                other => return violation(format!("bad update_stats `{other}`")),
            },
            delay: time_attr(n, "delay")?,
        },
        other => return violation(format!("unknown primitive <{other}>")),
    })
}

struct AttackParts {
    nodes: Vec<String>,
    filter: Option<Condition>,
    events: Vec<MessagePrimitive>,
}

fn read_attack(n: Node, conditional: bool) -> Result<AttackParts, XmlError> {
    if n.tag_name().name() != "attack" {
        let section = if conditional { "conditional" } else { "unconditional" };
        return violation(format!("<{}> does not belong in <{section}>", n.tag_name().name()));
    }
    let mut parts = AttackParts {
        nodes: Vec::new(),
        filter: None,
        events: Vec::new(),
    };
    let mut seen_events = false;
    for c in elements(n) {
        match c.tag_name().name() {
            "nodes" => parts.nodes = read_node_names(c)?,
            "filter" if conditional => parts.filter = Some(read_condition(only_child(c)?)?),
            "events" => {
                seen_events = true;
                parts.events = elements(c).map(read_event).collect::<Result<_, _>>()?;
            }
            other => return violation(format!("unexpected <{other}> in attack")),
        }
    }
    if conditional && parts.filter.is_none() {
        return violation("conditional attack lacks <filter>");
    }
    if !seen_events {
        return violation("attack lacks <events>");
    }
    Ok(parts)
}

/// Reads a document written by [`to_xml`]. Sections are re-sorted chronologically.
pub fn from_xml(text: &str) -> Result<AttackConfig, XmlError> {
    let doc = Document::parse(text).map_err(|e| XmlError::Malformed(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "attacks" {
        return violation("root element must be <attacks>");
    }
    match root.attribute("version") {
        Some(XML_VERSION) => {}
        other => return violation(format!("unsupported version {other:?}")),
    }
    let sections: Vec<_> = elements(root).collect();
    let names: Vec<&str> = sections.iter().map(|s| s.tag_name().name()).collect();
    if names != ["physical", "conditional", "unconditional"] {
        return violation(format!("expected sections physical, conditional, unconditional; found {names:?}"));
    }
    let mut cfg = AttackConfig::default();
    for p in elements(sections[0]) {
        cfg.physical.push(match p.tag_name().name() {
            "destroy" => NodePrimitive::Destroy {
                node: req(p, "node")?.to_string(),
                at: time_attr(p, "time")?,
            },
            "move" => NodePrimitive::Move {
                node: req(p, "node")?.to_string(),
                at: time_attr(p, "time")?,
                position: [f64_attr(p, "x")?, f64_attr(p, "y")?, f64_attr(p, "z")?],
            },
            other => return violation(format!("<{other}> does not belong in <physical>")),
        });
    }
    for a in elements(sections[1]) {
        let parts = read_attack(a, true)?;
        cfg.conditional.push(ConditionalAttack {
            start: time_attr(a, "start")?,
            nodes: parts.nodes,
            filter: parts.filter.expect("checked above"),
            events: parts.events,
        });
    }
    for a in elements(sections[2]) {
        let parts = read_attack(a, false)?;
        if a.attribute("period").is_none() {
            return violation("unconditional attack lacks `period`");
        }
        cfg.unconditional.push(UnconditionalAttack {
            start: time_attr(a, "start")?,
            period: time_attr(a, "period")?,
            nodes: parts.nodes,
            events: parts.events,
        });
    }
    cfg.sort();
    Ok(cfg)
}
