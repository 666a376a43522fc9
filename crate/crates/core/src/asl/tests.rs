use std::collections::BTreeMap;

use super::*;
use crate::kernel::SimTime;
use crate::net::{Packet, PacketMeta, Provenance, Scalar, Schema};

fn ctx() -> AslContext {
    let mut c = AslContext::new(Schema::default());
    for h in ["Client1", "Client2", "Client3", "Client4", "Server1", "Server2", "Server3"] {
        c = c.with_node(h, NodeRole::Host);
    }
    c.with_node("Switch1", NodeRole::Switch)
        .with_node("Controller", NodeRole::Controller)
}

fn ok(src: &str) -> AttackConfig {
    parse(src, &ctx()).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

fn err(src: &str) -> AslError {
    parse(src, &ctx()).unwrap_err()
}

fn fig1_packet() -> Packet {
    Packet::from_fields(
        PacketMeta::new(1, None, SimTime::ZERO, Provenance::Normal),
        [
            ("ip.src", Scalar::str("192.168.0.1")),
            ("ip.dst", Scalar::str("192.168.0.2")),
        ],
    )
}

#[test]
fn destroy_statement() {
    let cfg = ok("destroy(Client3, 50)");
    assert_eq!(
        cfg.physical,
        vec![NodePrimitive::Destroy {
            node: "Client3".into(),
            at: SimTime::from_secs(50)
        }]
    );
}

#[test]
fn dos_attack() {
    let cfg = ok("from 90 every 0.025 nodes = [Client3] do { create(p, ip.src, 192.168.0.13, ip.dst, 192.168.0.22, udp.dstPort, 5000); send(p, 0) }");
    assert_eq!(cfg.unconditional.len(), 1);
    let a = &cfg.unconditional[0];
    assert_eq!(a.start, SimTime::from_secs(90));
    assert_eq!(a.period, SimTime::from_millis(25));
    assert_eq!(a.nodes, vec!["Client3"]);
    assert_eq!(
        a.events[0],
        MessagePrimitive::Create {
            pkt: "p".into(),
            fields: vec![
                ("ip.src".into(), Value::Lit(Scalar::str("192.168.0.13"))),
                ("ip.dst".into(), Value::Lit(Scalar::str("192.168.0.22"))),
                ("udp.dstPort".into(), Value::Lit(Scalar::Int(5000))),
            ]
        }
    );
}

#[test]
fn conditional_drop() {
    let cfg = ok("from 10 nodes = [Switch1] do { filter(ip.dst == 192.168.0.22) drop(pkt) }");
    let a = &cfg.conditional[0];
    assert_eq!(a.start, SimTime::from_secs(10));
    assert_eq!(a.events, vec![MessagePrimitive::Drop { pkt: "pkt".into() }]);
    assert_eq!(
        a.filter,
        Condition::cmp(
            CmpOp::Eq,
            Operand::Field("ip.dst".into()),
            Operand::Lit(Scalar::str("192.168.0.22"))
        )
    );
}

#[test]
fn grammar_fragments_parse() {
    // The two statement shapes with their placeholders filled in, everything else verbatim.
    let conditional = "from T nodes = <list of nodes> do {\n  filter(<condition>) <list of events>\n}"
        .replace("<list of nodes>", "[Switch1, Client1]")
        .replace("<condition>", "pkt.ip.dst == 192.168.0.2")
        .replace("<list of events>", "clone(pkt, q); send(q, 0.01)")
        .replace("from T", "from 12.5");
    assert_eq!(ok(&conditional).conditional.len(), 1);
    let periodic = "from T every P do {<list of events>}"
        .replace("<list of events>", "create(p, ip.dst, 192.168.0.21); put(p, [Server1], RX, true, 0)")
        .replace("T", "5")
        .replace("P", "1");
    let cfg = ok(&periodic);
    assert_eq!(cfg.unconditional[0].period, SimTime::from_secs(1));
    assert!(cfg.unconditional[0].nodes.is_empty());
    let prims = "destroy(Client1, 1); move(Client2, 2, 1, 2, 3);\n\
        from 0 nodes = [Client1] do { filter(udp.dstPort >= 0)\n\
        drop(pkt); create(p, app.size, 64); clone(pkt, q); change(q, ip.dst, 192.168.0.23);\n\
        send(q, 0.5); retrieve(pkt, ip.src, v); put(q, [Server1, Server3], TX, false, 0.5) }";
    let cfg = ok(prims);
    assert_eq!(cfg.physical.len(), 2);
    assert_eq!(cfg.conditional[0].events.len(), 7);
}

#[test]
fn error_kinds_with_positions() {
    let e = err("destroy(Client9, 5)");
    assert_eq!((e.kind, e.line, e.col), (ErrorKind::UnknownNode, 1, 9));
    let e = err("from 1 nodes = [Client1] do {\n filter(ip.ttl == 5) drop(pkt) }");
    assert_eq!((e.kind, e.line), (ErrorKind::UnknownField, 2));
    let e = err("from 1 nodes = [Client1] do { filter(ip.dst == 1.2.3.4) send(q, 0) }");
    assert_eq!(e.kind, ErrorKind::UndefinedVariable);
    let e = err("from 1 nodes = [Client1] do { filter(ip.dst == 1.2.3.4) send(pkt, 0) }");
    assert_eq!((e.kind, e.col), (ErrorKind::IllegalSend, 57));
    let e = err("from 1 nodes = [Client1] do { filter(udp.dstPort == 1.2.3.4) drop(pkt) }");
    assert_eq!(e.kind, ErrorKind::TypeMismatch);
    let e = err("from 1 every 1 do { create(p, ip.dst, 1.2.3.4); send(p, 0) }");
    assert_eq!(e.kind, ErrorKind::IllegalSend);
    let e = err("from 1 every 1 nodes = [Client1] do { drop(pkt) }");
    assert_eq!(e.kind, ErrorKind::UndefinedVariable);
    let e = err("from 1 nodes = [Client1] do { drop(pkt) }");
    assert_eq!(e.kind, ErrorKind::Syntax);
    let e = err("from 1 every 0 nodes = [Client1] do { create(p); send(p, 0) }");
    assert_eq!(e.kind, ErrorKind::Syntax);
    let e = err("from 1 nodes = [Controller] do { filter(ip.dst == 1.2.3.4) drop(pkt) }");
    assert_eq!(e.kind, ErrorKind::UnknownNode);
    let e = err("from 1 every 1 nodes = [Client1] do { }");
    assert_eq!(e.kind, ErrorKind::Syntax);
    let e = err("destroy(Client1, 0.0000001)");
    assert_eq!(e.kind, ErrorKind::Syntax);
    assert!(e.to_string().starts_with("1:18: SyntaxError"), "{e}");
}

#[test]
fn variable_order_matters() {
    let e = err("from 1 nodes = [Client1] do { filter(ip.dst == 1.2.3.4) create(q, ip.dst, v); retrieve(pkt, ip.src, v) }");
    assert_eq!(e.kind, ErrorKind::UndefinedVariable);
    ok("from 1 nodes = [Client1] do { filter(ip.dst == 1.2.3.4) retrieve(pkt, ip.src, v); create(q, ip.dst, v); send(q, 0) }");
}

#[test]
fn results_are_chronological() {
    let cfg = ok("destroy(Client1, 50); destroy(Client2, 10); move(Client3, 30, 0, 0, 0)");
    let times: Vec<u64> = cfg.physical.iter().map(|p| p.at().as_micros() / 1_000_000).collect();
    assert_eq!(times, vec![10, 30, 50]);
    assert!(cfg.is_sorted());
}

#[test]
fn eval_examples() {
    let p = fig1_packet();
    let none = BTreeMap::new();
    let c = |src: &str| ok(&format!("from 0 nodes = [Switch1] do {{ filter({src}) drop(pkt) }}")).conditional[0]
        .filter
        .clone();
    assert!(eval_condition(&c("ip.dst == 192.168.0.2"), &p, &none));
    assert!(!eval_condition(&c("udp.dstPort < 100"), &p, &none));
    assert!(eval_condition(&c("not udp.dstPort < 100"), &p, &none));
    assert!(!eval_condition(&c("udp.dstPort != 100"), &p, &none));
    assert!(eval_condition(&c("ip.src == 192.168.0.1 && (ip.dst == 1.1.1.1 || ip.dst == 192.168.0.2)"), &p, &none));
}

#[test]
fn variables_in_conditions() {
    let p = fig1_packet();
    let expr = Condition::cmp(CmpOp::Eq, Operand::Field("ip.src".into()), Operand::Var("v".into()));
    let mut vars = BTreeMap::new();
    assert!(!eval_condition(&expr, &p, &vars));
    vars.insert("v".to_string(), Scalar::str("192.168.0.1"));
    assert!(eval_condition(&expr, &p, &vars));
}

#[test]
fn xml_empty_config_has_three_sections() {
    let x = to_xml(&AttackConfig::default());
    for s in ["<physical>", "<conditional>", "<unconditional>"] {
        assert!(x.contains(s), "{x}");
    }
    assert_eq!(from_xml(&x).unwrap(), AttackConfig::default());
}

#[test]
fn xml_round_trip_dos() {
    let cfg = ok("from 90 every 0.025 nodes = [Client3] do { create(p, ip.src, 192.168.0.13, ip.dst, 192.168.0.22, udp.dstPort, 5000); send(p, 0) }");
    assert_eq!(from_xml(&to_xml(&cfg)).unwrap(), cfg);
}

#[test]
fn xml_misplaced_attack_is_rejected() {
    let cfg = ok("from 90 every 0.025 nodes = [Client3] do { create(p); send(p, 0) }");
    let x = to_xml(&cfg);
    let start = x.find("<attack ").unwrap();
    let end = x.find("</attack>").unwrap() + "</attack>".len();
    let block = &x[start..end];
    let moved = x.replace(block, "").replace("<physical>", &format!("<physical>{block}"));
    assert!(matches!(from_xml(&moved), Err(XmlError::SchemaViolation(_))));
    assert!(matches!(from_xml("<attacks"), Err(XmlError::Malformed(_))));
    assert!(matches!(
        from_xml("<attacks version=\"1\"><conditional/><physical/><unconditional/></attacks>"),
        Err(XmlError::SchemaViolation(_))
    ));
}

#[test]
fn xml_validates_against_context() {
    let cfg = from_xml(&to_xml(&ok("destroy(Client3, 5)"))).unwrap();
    ctx().validate(&cfg).unwrap();
    let bad = to_xml(&cfg).replace("Client3", "Nobody");
    let e = ctx().validate(&from_xml(&bad).unwrap()).unwrap_err();
    assert_eq!(e.kind, ErrorKind::UnknownNode);
}

#[test]
fn pretty_is_parseable() {
    let src = "from 5 nodes = [Switch1] do { filter(not (ip.dst == 1.2.3.4 or udp.dstPort > -3) and app.seq >= 2) \
               clone(pkt, q); change(q, eth.dst, \"a \\\"b\\\"\"); send(q, 1.5) }";
    let cfg = ok(src);
    assert_eq!(ok(&pretty(&cfg)), cfg);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    const NODES: [&str; 4] = ["Client1", "Client3", "Server2", "Switch1"];
    const STR_FIELDS: [&str; 4] = ["ip.src", "ip.dst", "eth.src", "eth.dst"];
    const INT_FIELDS: [&str; 4] = ["udp.dstPort", "udp.srcPort", "app.seq", "app.size"];

    fn time() -> impl Strategy<Value = SimTime> {
        (0u64..500_000_000).prop_map(SimTime::from_micros)
    }

    fn str_lit() -> impl Strategy<Value = Scalar> {
        prop_oneof![
            (0u8..=255, 0u8..=255).prop_map(|(a, b)| Scalar::str(format!("192.168.{a}.{b}"))),
            "[ a-zA-Z0-9_\"\\\\.-]{0,8}".prop_map(Scalar::str),
        ]
    }

    fn int_lit() -> impl Strategy<Value = Scalar> {
        any::<i64>().prop_map(Scalar::Int)
    }

    fn cmp() -> impl Strategy<Value = Condition> {
        let op = proptest::sample::select(CmpOp::ALL.to_vec());
        prop_oneof![
            (op.clone(), proptest::sample::select(STR_FIELDS.to_vec()), str_lit())
                .prop_map(|(o, f, l)| Condition::cmp(o, Operand::Field(f.into()), Operand::Lit(l))),
            (op.clone(), proptest::sample::select(INT_FIELDS.to_vec()), int_lit())
                .prop_map(|(o, f, l)| Condition::cmp(o, Operand::Lit(l), Operand::Field(f.into()))),
            (op, proptest::sample::select(INT_FIELDS.to_vec()), proptest::sample::select(INT_FIELDS.to_vec()))
                .prop_map(|(o, a, b)| Condition::cmp(o, Operand::Field(a.into()), Operand::Field(b.into()))),
        ]
    }

    fn condition() -> impl Strategy<Value = Condition> {
        cmp().prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Condition::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Condition::or(a, b)),
                inner.prop_map(Condition::not),
            ]
        })
    }

    fn node_list() -> impl Strategy<Value = Vec<String>> {
        proptest::sample::subsequence(NODES.to_vec(), 1..=3).prop_map(|v| v.into_iter().map(String::from).collect())
    }

    fn assignment() -> impl Strategy<Value = (String, Value)> {
        prop_oneof![
            (proptest::sample::select(STR_FIELDS.to_vec()), str_lit()).prop_map(|(f, l)| (f.to_string(), Value::Lit(l))),
            (proptest::sample::select(INT_FIELDS.to_vec()), int_lit()).prop_map(|(f, l)| (f.to_string(), Value::Lit(l))),
        ]
    }

    /// Well-formed event chains: a retrieved value, a created packet and a clone.
    fn events(conditional: bool) -> impl Strategy<Value = Vec<MessagePrimitive>> {
        (
            prop::collection::vec(assignment(), 0..4),
            time(),
            node_list(),
            any::<bool>(),
            any::<bool>(),
            0usize..4,
        )
            .prop_map(move |(fields, delay, nodes, rx, stats, extra)| {
                let mut ev = Vec::new();
                let base = if conditional { "pkt" } else { "p" };
                ev.push(MessagePrimitive::Create { pkt: "p".into(), fields });
                if conditional {
                    ev.push(MessagePrimitive::Retrieve {
                        pkt: "pkt".into(),
                        field: "ip.src".into(),
                        var: "v".into(),
                    });
                    ev.push(MessagePrimitive::Change {
                        pkt: "p".into(),
                        field: "ip.dst".into(),
                        value: Value::Var("v".into()),
                    });
                }
                ev.push(MessagePrimitive::Clone { src: base.into(), dst: "q".into() });
                if extra > 0 {
                    ev.push(MessagePrimitive::Send { pkt: "q".into(), delay });
                }
                if extra > 1 {
                    ev.push(MessagePrimitive::Put {
                        pkt: "p".into(),
                        nodes,
                        direction: if rx { Direction::Rx } else { Direction::Tx },
                        update_stats: stats,
                        delay,
                    });
                }
                if extra > 2 && conditional {
                    ev.push(MessagePrimitive::Drop { pkt: "pkt".into() });
                }
                ev
            })
    }

    fn physical() -> impl Strategy<Value = NodePrimitive> {
        let node = proptest::sample::select(NODES.to_vec()).prop_map(String::from);
        prop_oneof![
            (node.clone(), time()).prop_map(|(node, at)| NodePrimitive::Destroy { node, at }),
            (node, time(), [-1e6..1e6f64, -1e6..1e6f64, -1e6..1e6f64])
                .prop_map(|(node, at, position)| NodePrimitive::Move { node, at, position }),
        ]
    }

    prop_compose! {
        fn config()(
            physical in prop::collection::vec(physical(), 0..4),
            conditional in prop::collection::vec((time(), node_list(), condition(), events(true)), 0..3),
            unconditional in prop::collection::vec((time(), 1u64..10_000_000, node_list(), events(false)), 0..3),
        ) -> AttackConfig {
            let mut cfg = AttackConfig {
                physical,
                conditional: conditional
                    .into_iter()
                    .map(|(start, nodes, filter, events)| ConditionalAttack { start, nodes, filter, events })
                    .collect(),
                unconditional: unconditional
                    .into_iter()
                    .map(|(start, p, nodes, events)| UnconditionalAttack {
                        start,
                        period: SimTime::from_micros(p),
                        nodes,
                        events,
                    })
                    .collect(),
            };
            cfg.sort();
            cfg
        }
    }

    fn packet() -> impl Strategy<Value = Packet> {
        (
            prop::option::of(proptest::sample::select(vec!["192.168.0.1", "192.168.0.2", "x"])),
            prop::option::of(-3i64..3),
            prop::option::of(-3i64..3),
        )
            .prop_map(|(dst, port, seq)| {
                let mut p = Packet::new(PacketMeta::new(0, None, SimTime::ZERO, Provenance::Normal));
                let schema = Schema::default();
                if let Some(d) = dst {
                    p.set(&schema, "ip.dst", Scalar::str(d)).unwrap();
                }
                if let Some(v) = port {
                    p.set(&schema, "udp.dstPort", Scalar::Int(v)).unwrap();
                }
                if let Some(v) = seq {
                    p.set(&schema, "app.seq", Scalar::Int(v)).unwrap();
                }
                p
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn generated_configs_validate(cfg in config()) {
            prop_assert!(ctx().validate(&cfg).is_ok(), "{:?}", ctx().validate(&cfg));
        }

        #[test]
        fn parse_inverts_pretty(cfg in config()) {
            let text = pretty(&cfg);
            let back = parse(&text, &ctx()).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(back, cfg);
        }

        #[test]
        fn xml_round_trips(cfg in config()) {
            prop_assert_eq!(from_xml(&to_xml(&cfg)).unwrap(), cfg);
        }

        #[test]
        fn de_morgan(a in condition(), b in condition(), p in packet()) {
            let vars = BTreeMap::new();
            let lhs = Condition::not(Condition::and(a.clone(), b.clone()));
            let rhs = Condition::or(Condition::not(a.clone()), Condition::not(b.clone()));
            prop_assert_eq!(eval_condition(&lhs, &p, &vars), eval_condition(&rhs, &p, &vars));
            let lhs = Condition::not(Condition::or(a.clone(), b.clone()));
            let rhs = Condition::and(Condition::not(a), Condition::not(b));
            prop_assert_eq!(eval_condition(&lhs, &p, &vars), eval_condition(&rhs, &p, &vars));
        }

        #[test]
        fn absent_path_comparisons_are_false(op in proptest::sample::select(CmpOp::ALL.to_vec()), v in any::<i64>()) {
            let p = Packet::new(PacketMeta::new(0, None, SimTime::ZERO, Provenance::Normal));
            let c = Condition::cmp(op, Operand::Field("udp.dstPort".into()), Operand::Lit(Scalar::Int(v)));
            prop_assert!(!eval_condition(&c, &p, &BTreeMap::new()));
        }
    }
}
