use std::fmt::Write;

use super::ir::*;
use crate::net::Scalar;

/// Text the lexer reads back as a dotted numeric run.
fn is_address_like(s: &str) -> bool {
    let mut chars = s.chars();
    let first_ok = match (chars.next(), chars.next()) {
        (Some(a), _) if a.is_ascii_digit() => true,
        (Some('.'), Some(b)) => b.is_ascii_digit(),
        _ => false,
    };
    first_ok
        && s.chars().all(|c| c.is_ascii_digit() || c == '.')
        && s.matches('.').count() >= 2
        && !s.ends_with('.')
}

pub fn literal(s: &Scalar) -> String {
    match s {
        Scalar::Int(v) => v.to_string(),
        Scalar::Str(s) if is_address_like(s) => s.clone(),
        Scalar::Str(s) => {
            let escaped = s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n");
            format!("\"{escaped}\"")
        }
    }
}

fn value(v: &Value) -> String {
    match v {
        Value::Lit(s) => literal(s),
        Value::Var(n) => n.clone(),
    }
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Field(f) => f.clone(),
        Operand::Var(v) => v.clone(),
        Operand::Lit(s) => literal(s),
    }
}

fn nested(c: &Condition) -> String {
    match c {
        Condition::And(..) | Condition::Or(..) => format!("({})", condition(c)),
        _ => condition(c),
    }
}

pub fn condition(c: &Condition) -> String {
    match c {
        Condition::Cmp(op, a, b) => format!("{} {} {}", operand(a), op.symbol(), operand(b)),
        Condition::And(a, b) => format!("{} and {}", nested(a), nested(b)),
        Condition::Or(a, b) => format!("{} or {}", nested(a), nested(b)),
        Condition::Not(a) => format!("not {}", nested(a)),
    }
}

fn nodes(list: &[String]) -> String {
    format!("[{}]", list.join(", "))
}

pub fn event(e: &MessagePrimitive) -> String {
    match e {
        MessagePrimitive::Drop { pkt } => format!("drop({pkt})"),
        MessagePrimitive::Create { pkt, fields } => {
            let mut s = format!("create({pkt}");
            for (f, v) in fields {
                let _ = write!(s, ", {f}, {}", value(v));
            }
            s + ")"
        }
        MessagePrimitive::Clone { src, dst } => format!("clone({src}, {dst})"),
        MessagePrimitive::Change { pkt, field, value: v } => format!("change({pkt}, {field}, {})", value(v)),
        MessagePrimitive::Send { pkt, delay } => format!("send({pkt}, {})", delay.to_decimal_secs()),
        MessagePrimitive::Retrieve { pkt, field, var } => format!("retrieve({pkt}, {field}, {var})"),
        MessagePrimitive::Put {
            pkt,
            nodes: targets,
            direction,
            update_stats,
            delay,
        } => format!(
            "put({pkt}, {}, {}, {update_stats}, {})",
            nodes(targets),
            direction.name(),
            delay.to_decimal_secs()
        ),
    }
}

fn events(list: &[MessagePrimitive]) -> String {
    list.iter().map(event).collect::<Vec<_>>().join("; ")
}

/// Canonical source form; parsing it yields the same configuration.
pub fn pretty(cfg: &AttackConfig) -> String {
    let mut out = String::new();
    for p in &cfg.physical {
        match p {
            NodePrimitive::Destroy { node, at } => {
                let _ = writeln!(out, "destroy({node}, {});", at.to_decimal_secs());
            }
            NodePrimitive::Move { node, at, position: [x, y, z] } => {
                let _ = writeln!(out, "move({node}, {}, {x}, {y}, {z});", at.to_decimal_secs());
            }
        }
    }
    for a in &cfg.conditional {
        let _ = writeln!(
            out,
            "from {} nodes = {} do {{ filter({}) {} }};",
            a.start.to_decimal_secs(),
            nodes(&a.nodes),
            condition(&a.filter),
            events(&a.events)
        );
    }
    for a in &cfg.unconditional {
        let targets = if a.nodes.is_empty() {
            String::new()
        } else {
            format!(" nodes = {}", nodes(&a.nodes))
        };
        let _ = writeln!(
            out,
            "from {} every {}{targets} do {{ {} }};",
            a.start.to_decimal_secs(),
            a.period.to_decimal_secs(),
            events(&a.events)
        );
    }
    out
}
