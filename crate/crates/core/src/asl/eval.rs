use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::ir::{CmpOp, Condition, Operand};
use crate::net::{Packet, Scalar};

fn resolve<'a>(o: &'a Operand, pkt: &'a Packet, vars: &'a BTreeMap<String, Scalar>) -> Option<&'a Scalar> {
    match o {
        Operand::Field(f) => pkt.get(f).ok(),
        Operand::Var(v) => vars.get(v),
        Operand::Lit(s) => Some(s),
    }
}

/// Total evaluation: a comparison with an absent field or variable, or across types, is false.
pub fn eval_condition(expr: &Condition, pkt: &Packet, vars: &BTreeMap<String, Scalar>) -> bool {
    match expr {
        Condition::Cmp(op, a, b) => {
            let (Some(a), Some(b)) = (resolve(a, pkt, vars), resolve(b, pkt, vars)) else {
                return false;
            };
            let Some(ord) = a.compare(b) else {
                return false;
            };
            match op {
                CmpOp::Eq => ord == Ordering::Equal,
                CmpOp::Ne => ord != Ordering::Equal,
                CmpOp::Lt => ord == Ordering::Less,
                CmpOp::Le => ord != Ordering::Greater,
                CmpOp::Gt => ord == Ordering::Greater,
                CmpOp::Ge => ord != Ordering::Less,
            }
        }
        Condition::And(a, b) => eval_condition(a, pkt, vars) && eval_condition(b, pkt, vars),
        Condition::Or(a, b) => eval_condition(a, pkt, vars) || eval_condition(b, pkt, vars),
        Condition::Not(a) => !eval_condition(a, pkt, vars),
    }
}
