//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdnsim::asl::{from_xml, parse, to_xml, AslContext, AttackConfig};
use sdnsim::attack::{AttackRef, Holder};
use sdnsim::experiment::{load_attack, parse_attack, run, Overrides, RunOutput, CORPUS};
use sdnsim::kernel::{Scheduler, SimTime};
use sdnsim::monitoring::{dest_entropy, normalized_entropy, StatsWindow};
use sdnsim::net::{Packet, PacketMeta, PortId, Provenance, Scalar};
use sdnsim::openflow::{parse_line, FlowAction, FlowMatch, FlowStat, OpenFlowMsg};
use sdnsim::scenario::{Scenario, FIG4};
use sdnsim::sim::{Payload, World};
use sdnsim::switch::{FlowEntry, FlowTable};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn within(value: f64, target: f64, tol: f64, what: &str) -> Result<(), String> {
    check(
        (value - target).abs() <= tol,
        format!("{what} = {value:.4}, expected {target} ± {tol}"),
    )
}

fn secs(t: SimTime) -> f64 {
    t.as_secs_f64()
}

fn dos_run(rate: f64, interval: u64) -> RunOutput {
    let s = Scenario::fig4();
    let atk = load_attack("builtin:dos", &s).expect("builtin attack");
    let o = Overrides {
        rate: Some(rate),
        interval: Some(SimTime::from_secs(interval)),
        ..Overrides::default()
    };
    run(&s, Some(&atk), &o).expect("run")
}

fn criterion_1() -> Outcome {
    let s = Scenario::fig4();
    let started = Instant::now();
    let out = run(&s, None, &Overrides::default()).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let m = &out.metrics;
    let (s1, s2, s3) = (m.mean("Server1", 20, 90), m.mean("Server2", 20, 90), m.mean("Server3", 20, 90));
    within(s2, 8.33, 0.2, "Server2 mean over (20,90]")?;
    within(s1, 10.0, 0.1, "Server1 mean over (20,90]")?;
    within(s3, 5.0, 0.1, "Server3 mean over (20,90]")?;
    check(elapsed < Duration::from_secs(5), format!("runtime {elapsed:?}"))?;
    Ok(format!("Server1={s1:.3} Server2={s2:.3} Server3={s3:.3} runtime={:.0?}", elapsed))
}

fn criterion_2() -> Outcome {
    let mut attack_means = Vec::new();
    let mut detail = Vec::new();
    for r in [15.0, 25.0, 40.0] {
        let out = dos_run(r, 30);
        let during = out.metrics.mean("Server2", 95, 115);
        let after = out.metrics.mean("Server2", 125, 195);
        let marker = out.first_mitigation().ok_or(format!("R={r}: no mitigation marker"))?;
        within(during, 8.33 + r, 1.0, &format!("R={r}: Server2 mean over (95,115]"))?;
        within(secs(marker), 120.0, 0.1, &format!("R={r}: mitigation marker"))?;
        within(after, 5.0, 0.2, &format!("R={r}: Server2 mean over (125,195]"))?;
        attack_means.push(during);
        detail.push(format!("R={r}: {during:.2}/{:.3}s/{after:.2}", secs(marker)));
    }
    check(
        attack_means.windows(2).all(|w| w[0] < w[1]),
        format!("attack-phase means not increasing: {attack_means:?}"),
    )?;
    Ok(detail.join(" "))
}

fn criterion_3() -> Outcome {
    let mut detail = Vec::new();
    for (i, expected) in [(10u64, 100.0), (30, 120.0), (60, 120.0)] {
        let out = dos_run(40.0, i);
        let marker = out.first_mitigation().ok_or(format!("I={i}: no mitigation marker"))?;
        within(secs(marker), expected, 0.1, &format!("I={i}: mitigation marker"))?;
        let latency = secs(marker) - 90.0;
        check(
            latency <= i as f64 + 0.1,
            format!("I={i}: mitigation latency {latency:.3} s exceeds I + 0.1 s"),
        )?;
        detail.push(format!("I={i}: {:.3}s", secs(marker)));
    }
    Ok(detail.join(" "))
}

fn criterion_4() -> Outcome {
    let s = Scenario::fig4();
    let out = run(&s, None, &Overrides::default()).map_err(|e| e.to_string())?;
    let msgs: Vec<(SimTime, OpenFlowMsg)> = out
        .logs
        .control
        .iter()
        .map(|l| parse_line(l).map_err(|e| format!("{l}: {e}")))
        .collect::<Result<_, _>>()?;
    let pairs = [
        ("192.168.0.11", "192.168.0.21"),
        ("192.168.0.12", "192.168.0.22"),
        ("192.168.0.13", "192.168.0.22"),
        ("192.168.0.14", "192.168.0.23"),
    ];
    let end = s.duration;
    let mut counts = Vec::new();
    for (src, dst) in pairs {
        let removed: Vec<SimTime> = msgs
            .iter()
            .filter_map(|(t, m)| match m {
                OpenFlowMsg::FlowRemoved { matching, .. } if matching.src() == Some(src) && matching.dst() == Some(dst) => {
                    Some(*t)
                }
                _ => None,
            })
            .collect();
        let packet_ins: Vec<SimTime> = msgs
            .iter()
            .filter_map(|(t, m)| match m {
                OpenFlowMsg::PacketIn { pkt, .. } if pkt.ip_src() == Some(src) && pkt.ip_dst() == Some(dst) => Some(*t),
                _ => None,
            })
            .collect();
        // One removal per 30 s period over the run.
        let periods = (end.as_micros() / SimTime::from_secs(30).as_micros()) as usize;
        check(
            removed.len() == periods,
            format!("{src}->{dst}: {} FLOW_REMOVED, expected {periods}", removed.len()),
        )?;
        for w in removed.windows(2) {
            let gap = secs(w[1]) - secs(w[0]);
            check((30.0..31.0).contains(&gap), format!("{src}->{dst}: removal gap {gap:.3} s"))?;
        }
        for t in &removed {
            let next = packet_ins.iter().find(|p| *p >= t);
            match next {
                Some(p) if secs(*p) - secs(*t) < 1.0 => {}
                _ if *t + SimTime::from_secs(1) > end => {}
                _ => return Err(format!("{src}->{dst}: no PACKET_IN within 1 s of removal at {t}")),
            }
        }
        counts.push(removed.len());
    }
    Ok(format!("FLOW_REMOVED per pair {counts:?}, each re-established in < 1 s"))
}

/// Independent matcher: every predicate equal and the port, if any, equal.
fn oracle_matches(m: &FlowMatch, pkt: &Packet, in_port: PortId) -> bool {
    m.in_port.is_none_or(|p| p == in_port)
        && m.predicates.iter().all(|(path, v)| pkt.get(path).ok() == Some(v))
}

fn oracle_lookup<'a>(entries: &'a [FlowEntry], pkt: &Packet, in_port: PortId) -> Option<&'a FlowEntry> {
    let mut hits: Vec<&FlowEntry> = entries.iter().filter(|e| oracle_matches(&e.matching, pkt, in_port)).collect();
    hits.sort_by(|a, b| b.priority.cmp(&a.priority).then(a.id.cmp(&b.id)));
    hits.first().copied()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let addrs = ["10.0.0.1", "10.0.0.2", "10.0.0.3", "10.0.0.4"];
    let cases = 10_000;
    let mut hits = 0;
    for case in 0..cases {
        let mut table = FlowTable::new();
        for _ in 0..rng.gen_range(0..12) {
            let mut m = FlowMatch::new();
            if rng.gen_bool(0.6) {
                m = m.with("ip.src", Scalar::str(addrs[rng.gen_range(0..4)]));
            }
            if rng.gen_bool(0.6) {
                m = m.with("ip.dst", Scalar::str(addrs[rng.gen_range(0..4)]));
            }
            if rng.gen_bool(0.3) {
                m = m.with("udp.dstPort", Scalar::Int(rng.gen_range(5000..5003)));
            }
            if rng.gen_bool(0.4) {
                m = m.on_port(rng.gen_range(1..4));
            }
            let actions = vec![[FlowAction::Drop, FlowAction::Flood, FlowAction::Output(2)][rng.gen_range(0..3)]];
            table.insert(m, actions, rng.gen_range(0..4) * 10, SimTime::ZERO, SimTime::ZERO);
        }
        let pkt = Packet::from_fields(
            PacketMeta::new(case, None, SimTime::ZERO, Provenance::Normal),
            [
                ("ip.src", Scalar::str(addrs[rng.gen_range(0..4)])),
                ("ip.dst", Scalar::str(addrs[rng.gen_range(0..4)])),
                ("udp.dstPort", Scalar::Int(rng.gen_range(5000..5003))),
            ],
        );
        let in_port: PortId = rng.gen_range(1..4);
        let expected = oracle_lookup(table.entries(), &pkt, in_port).map(|e| e.id);
        let got = table.match_packet(&pkt, in_port, SimTime::ZERO).map(|e| e.id);
        check(got == expected, format!("case {case}: got {got:?}, oracle {expected:?}"))?;
        hits += usize::from(got.is_some());
    }
    Ok(format!("{cases}/{cases} cases agree ({hits} hits)"))
}

fn criterion_6() -> Outcome {
    let s = Scenario::fig4();
    for (name, text) in CORPUS {
        let cfg = parse_attack(text, &s).map_err(|e| format!("{name}: {e}"))?;
        check(cfg.physical.len() + cfg.conditional.len() + cfg.unconditional.len() == 1, format!("{name}: one attack"))?;
        let back = from_xml(&to_xml(&cfg)).map_err(|e| format!("{name}: {e}"))?;
        check(back == cfg, format!("{name}: XML round trip differs"))?;
        let out = run(&s, Some(&cfg), &Overrides::default()).map_err(|e| format!("{name}: {e}"))?;
        check(
            !out.logs.attack.iter().any(|l| l.contains(" FAULT ")),
            format!("{name}: primitive fault during run"),
        )?;
    }
    let names: Vec<&str> = CORPUS.iter().map(|(n, _)| *n).collect();
    check(
        names == ["destroy", "move", "drop", "create", "clone", "change", "send", "retrieve", "put"],
        "corpus covers every primitive",
    )?;
    let ctx = AslContext::from_topology(&s.topology, &s.schema);
    let conditional = "from T nodes = <list of nodes> do {\n  filter(<condition>) <list of events>\n}"
        .replace("from T", "from 10")
        .replace("<list of nodes>", "[Switch1]")
        .replace("<condition>", "ip.dst == 192.168.0.22")
        .replace("<list of events>", "drop(pkt)");
    let periodic = "from T every P do {<list of events>}"
        .replace("from T every P", "from 30 every 1")
        .replace("<list of events>", "create(p, ip.dst, 192.168.0.21); put(p, [Server1], RX, true, 0)");
    for (label, src) in [("conditional", conditional), ("periodic", periodic), ("destroy", "destroy(Client3, 50)".into())] {
        parse(&src, &ctx).map_err(|e| format!("fragment {label}: {e}"))?;
    }
    Ok(format!("{} files parse, validate, round-trip and run; 3 grammar fragments parse", CORPUS.len()))
}

fn criterion_7() -> Outcome {
    let s = Scenario::fig4();
    let src = "destroy(Client4, 50)\n\
        from 10 nodes = [Switch1] do { filter(ip.dst == 192.168.0.99) drop(pkt) }\n\
        from 20 every 2.5 nodes = [Client1] do { create(p, ip.src, 192.168.0.11, ip.dst, 192.168.0.21); send(p, 0) }";
    let cfg = parse_attack(src, &s).map_err(|e| e.to_string())?;
    let mut sched: Scheduler<Payload> = Scheduler::new().with_trace();
    let mut world = World::new(&s, Some(cfg), &mut sched).map_err(|e| e.to_string())?;
    let node = |n: &str| s.topology.lookup(n).expect("node");
    let (c4, sw, c1) = (Holder::Node(node("Client4")), Holder::Node(node("Switch1")), Holder::Node(node("Client1")));
    {
        let ase = world.ase().expect("engine");
        let mut entries = 0;
        for h in ase.holders() {
            let lists = ase.lists(h).expect("lists");
            let timers = ase.timers(h).ok_or(format!("{h:?}: no timers"))?;
            let keys = |m: &BTreeMap<usize, _>| m.keys().copied().collect::<Vec<usize>>();
            check(lists.lp == keys(&timers.tp), format!("{h:?}: LP/TP mismatch"))?;
            check(lists.lc == keys(&timers.tc), format!("{h:?}: LC/TC mismatch"))?;
            check(lists.lu == keys(&timers.tu), format!("{h:?}: LU/TU mismatch"))?;
            for id in timers.tp.values().chain(timers.tc.values()).chain(timers.tu.values()) {
                check(sched.is_pending(*id), format!("{h:?}: timer {id} not started"))?;
            }
            entries += lists.len();
        }
        check(entries == 3, format!("{entries} list entries, expected 3"))?;
        check(ase.lists(c4).is_some_and(|l| l.lp == [0]), "LP_Client4 holds the physical attack")?;
    }
    sched.run_until(SimTime::from_secs(60), &mut world).map_err(|e| e.to_string())?;
    let ase = world.ase().expect("engine");
    check(ase.lists(c4).is_some_and(|l| l.lp.is_empty()), "physical attack still in LP_Client4 after firing")?;
    check(ase.timers(c4).is_some_and(|t| t.tp.is_empty()), "physical timer still in TP_Client4 after firing")?;
    check(ase.lists(sw).is_some_and(|l| l.lc == [0]), "conditional attack left LC_Switch1")?;
    check(ase.armed(node("Switch1")) == [0], "conditional attack not armed")?;
    check(ase.lists(c1).is_some_and(|l| l.lu == [0]), "unconditional attack left LU_Client1")?;
    let next = ase.timers(c1).and_then(|t| t.get(AttackRef::Unconditional(0)));
    check(next.is_some_and(|id| sched.is_pending(id)), "periodic timer not rescheduled")?;
    let fires: Vec<SimTime> = sched
        .trace()
        .iter()
        .filter(|e| e.label.contains("AttackTimer") && e.label.contains("Unconditional(0)"))
        .map(|e| e.fire_at)
        .collect();
    check(fires.len() == 17, format!("{} periodic firings in [20, 60], expected 17", fires.len()))?;
    check(fires[0] == SimTime::from_secs(20), "first firing not at 20 s")?;
    for w in fires.windows(2) {
        check(w[1] - w[0] == SimTime::from_millis(2500), format!("refire gap {} ", w[1] - w[0]))?;
    }
    Ok("lists/timers in bijection; LP emptied on fire; LC/LU persist; refire every +P exactly".into())
}

fn criterion_8() -> Outcome {
    let s = Scenario::fig4();
    let without = run(&s, None, &Overrides::default()).map_err(|e| e.to_string())?;
    let empty = run(&s, Some(&AttackConfig::default()), &Overrides::default()).map_err(|e| e.to_string())?;
    for ((name, a), (_, b)) in without.files().iter().zip(empty.files().iter()) {
        check(a == b, format!("{name} differs"))?;
    }
    check(without.report.trace_digest == empty.report.trace_digest, "event trace digests differ")?;
    Ok(format!("all {} outputs and the event digest identical", without.files().len()))
}

fn criterion_9() -> Outcome {
    let jittered = Scenario::from_toml(&FIG4.replace("[[apps]]", "[[apps]]\nstart_jitter = 0.5")).map_err(|e| e.to_string())?;
    let s = Scenario::fig4();
    let atk = load_attack("builtin:dos", &s).map_err(|e| e.to_string())?;
    let cases: Vec<(&str, &Scenario, Option<&AttackConfig>)> =
        vec![("baseline", &s, None), ("attack", &s, Some(&atk)), ("jittered", &jittered, Some(&atk))];
    for (label, sc, a) in cases {
        let o = Overrides {
            seed: Some(7),
            ..Overrides::default()
        };
        let first = run(sc, a, &o).map_err(|e| e.to_string())?;
        let second = run(sc, a, &o).map_err(|e| e.to_string())?;
        check(first.files() == second.files(), format!("{label}: outputs differ between runs"))?;
        check(first.report.trace_digest == second.report.trace_digest, format!("{label}: digests differ"))?;
    }
    let a = run(&jittered, None, &Overrides { seed: Some(1), ..Overrides::default() }).map_err(|e| e.to_string())?;
    let b = run(&jittered, None, &Overrides { seed: Some(2), ..Overrides::default() }).map_err(|e| e.to_string())?;
    check(a.report.trace_digest != b.report.trace_digest, "seed has no effect on a jittered scenario")?;
    Ok("repeated runs byte-identical (baseline, attack, jittered); seeds differentiate".into())
}

/// Independent entropy: `-sum p ln p / ln n` with natural logarithms.
fn reference_entropy(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let h: f64 = counts
        .iter()
        .filter(|c| **c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum();
    h / (counts.len() as f64).ln()
}

fn window(flows: &[(&str, &str, u64)]) -> StatsWindow {
    StatsWindow {
        switch: "Switch1".into(),
        window_id: 1,
        start: SimTime::ZERO,
        end: SimTime::from_secs(30),
        flows: flows
            .iter()
            .map(|(s, d, n)| FlowStat {
                matching: FlowMatch::pair(None, s, d),
                packets: *n,
                bytes: n * 142,
            })
            .collect(),
        table_accesses: flows.iter().map(|f| f.2).sum(),
    }
}

fn criterion_10() -> Outcome {
    let uniform = normalized_entropy(&[25, 25, 25, 25]).map_err(|e| e.to_string())?;
    check(uniform == 1.0, format!("uniform 4-way H = {uniform}"))?;
    let w = window(&[("a", "s1", 40), ("b", "s1", 60), ("c", "s2", 0), ("d", "s3", 0)]);
    let single = dest_entropy(&w).map_err(|e| e.to_string())?;
    check(single == 0.0 && single.is_sign_positive(), format!("single-destination window H = {single}"))?;
    let single_counts = normalized_entropy(&[100, 0, 0]).map_err(|e| e.to_string())?;
    check(single_counts == 0.0, format!("single-destination counts H = {single_counts}"))?;

    let s = Scenario::fig4();
    let out = run(&s, None, &Overrides::default()).map_err(|e| e.to_string())?;
    check(out.anomalies.is_empty(), format!("{} anomalies in the attack-free run", out.anomalies.len()))?;
    check(
        !out.detection_log.iter().any(|l| l.contains(",ANOMALY,")),
        "ANOMALY line in the attack-free detection log",
    )?;
    let steady = out.windows.iter().find(|w| w.window_id == 2).ok_or("no second window")?;
    let h = dest_entropy(steady).map_err(|e| e.to_string())?;
    let counts: Vec<u64> = sdnsim::monitoring::dest_counts(&steady.pair_counts()).into_values().collect();
    let oracle = reference_entropy(&counts);
    check((h - oracle).abs() < 1e-12, format!("window H {h} disagrees with reference {oracle}"))?;
    let rate_oracle = reference_entropy(&[300, 250, 150]);
    within(h, rate_oracle, 0.005, "fig4 window H vs rate-derived reference")?;
    within(h, 0.977, 0.005, &format!("fig4 30 s window H (counts {counts:?}, independent value {oracle:.6})"))
        .map_err(|e| format!("uniform, single-destination and no-anomaly clauses hold; {e}"))?;
    Ok(format!("H(uniform)=1, H(single)=0, fig4 window H={h:.4}, no anomalies"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("baseline reproduction", criterion_1),
        ("attack-rate sweep, I = 30 s", criterion_2),
        ("polling-interval sweep, R = 40", criterion_3),
        ("flow lifecycle", criterion_4),
        ("matching oracle", criterion_5),
        ("ASL conformance corpus", criterion_6),
        ("injection bookkeeping", criterion_7),
        ("zero-attack transparency", criterion_8),
        ("determinism", criterion_9),
        ("detection correctness", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    std::panic::set_hook(Box::new(|_| {}));
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2} ({name})", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| label.contains(p.as_str())) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("{label}: PASS  {detail}"),
            Err(why) => {
                failed += 1;
                println!("{label}: FAIL  {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
