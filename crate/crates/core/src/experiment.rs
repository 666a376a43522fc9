//! Experiment runner: one seeded simulation of a scenario with an optional attack, and the
//! files it produces.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::asl::{from_xml, parse, AslContext, AslError, AttackConfig, XmlError};
use crate::attack::AseError;
use crate::kernel::{NodeIdx, RunReport, Scheduler, SimError, SimTime, MICROS_PER_SEC};
use crate::monitoring::{Anomaly, Marker, MarkerKind, StatsWindow, DETECTION_LOG_HEADER};
use crate::net::{CbrApp, Provenance};
use crate::scenario::Scenario;
use crate::sim::{Logs, Payload, Reception, World};

pub const DOS_ASL: &str = include_str!("../assets/attacks/dos.asl");
pub const DOS_XML: &str = include_str!("../assets/attacks/dos.xml");

/// One attack file per primitive, keyed by primitive name.
pub const CORPUS: [(&str, &str); 9] = [
    ("destroy", include_str!("../assets/attacks/corpus/destroy.asl")),
    ("move", include_str!("../assets/attacks/corpus/move.asl")),
    ("drop", include_str!("../assets/attacks/corpus/drop.asl")),
    ("create", include_str!("../assets/attacks/corpus/create.asl")),
    ("clone", include_str!("../assets/attacks/corpus/clone.asl")),
    ("change", include_str!("../assets/attacks/corpus/change.asl")),
    ("send", include_str!("../assets/attacks/corpus/send.asl")),
    ("retrieve", include_str!("../assets/attacks/corpus/retrieve.asl")),
    ("put", include_str!("../assets/attacks/corpus/put.asl")),
];

pub const CSV_HEADER: &str = "second,host,total,normal,injected";

/// Files written by [`RunOutput::write_dir`].
pub const OUTPUT_FILES: [&str; 8] = [
    "reception.csv",
    "markers.csv",
    "detection.csv",
    "control.log",
    "switch.log",
    "controller.log",
    "attack.log",
    "reception.log",
];

#[derive(Debug, Error)]
pub enum AttackLoadError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("unknown builtin attack `{0}`")]
    UnknownBuiltin(String),
    #[error("{0}")]
    Asl(#[from] AslError),
    #[error("{0}")]
    Xml(#[from] XmlError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Attack(#[from] AseError),
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error("invalid override: {0}")]
    Override(String),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

/// Parses ASL or XML text (chosen by content) and validates it against `scenario`.
pub fn parse_attack(text: &str, scenario: &Scenario) -> Result<AttackConfig, AttackLoadError> {
    let ctx = AslContext::from_topology(&scenario.topology, &scenario.schema);
    if text.trim_start().starts_with('<') {
        let cfg = from_xml(text)?;
        ctx.validate(&cfg)?;
        Ok(cfg)
    } else {
        Ok(parse(text, &ctx)?)
    }
}

/// Loads `builtin:dos`, `builtin:dos.xml`, `builtin:<primitive>` from the corpus, or a file path.
pub fn load_attack(spec: &str, scenario: &Scenario) -> Result<AttackConfig, AttackLoadError> {
    let text = match spec.strip_prefix("builtin:") {
        Some("dos") => DOS_ASL.to_string(),
        Some("dos.xml") => DOS_XML.to_string(),
        Some(name) if CORPUS.iter().any(|(n, _)| *n == name) => {
            CORPUS.iter().find(|(n, _)| *n == name).map(|(_, t)| t.to_string()).expect("present")
        }
        Some(other) => return Err(AttackLoadError::UnknownBuiltin(other.to_string())),
        None => std::fs::read_to_string(spec).map_err(|e| AttackLoadError::Io {
            path: spec.to_string(),
            message: e.to_string(),
        })?,
    };
    parse_attack(&text, scenario)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub interval: Option<SimTime>,
    /// Injection rate in packets per second for every periodic attack.
    pub rate: Option<f64>,
    pub seed: Option<u64>,
    pub duration: Option<SimTime>,
}

impl Overrides {
    pub fn apply(&self, scenario: &Scenario, attack: Option<&AttackConfig>) -> Result<(Scenario, Option<AttackConfig>), RunError> {
        let mut s = scenario.clone();
        if let Some(i) = self.interval {
            if i == SimTime::ZERO {
                return Err(RunError::Override("interval must be positive".into()));
            }
            s.behavior.polling_interval = i;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(d) = self.duration {
            s.duration = d;
        }
        let mut a = attack.cloned();
        if let Some(r) = self.rate {
            if !(r.is_finite() && r > 0.0) {
                return Err(RunError::Override(format!("rate must be positive, got {r}")));
            }
            if let Some(cfg) = a.as_mut() {
                cfg.set_period(CbrApp::period_for_rate(r));
            }
        }
        Ok((s, a))
    }
}

/// Per-second reception counts per host, split by provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsSeries {
    pub seconds: u64,
    /// Host names in ascending order.
    pub hosts: Vec<String>,
    /// `(second, host) -> [normal, injected]`; absent keys are zero.
    buckets: BTreeMap<(u64, String), [u64; 2]>,
}

/// Second `s` covers `(s - 1, s]`; receptions at exactly 0 fall into second 1.
pub fn bucket_of(at: SimTime) -> u64 {
    at.as_micros().div_ceil(MICROS_PER_SEC).max(1)
}

impl MetricsSeries {
    pub fn new(hosts: Vec<String>, duration: SimTime) -> Self {
        let mut hosts = hosts;
        hosts.sort();
        MetricsSeries {
            seconds: bucket_of(duration),
            hosts,
            buckets: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, at: SimTime, host: &str, provenance: Provenance) {
        let slot = self.buckets.entry((bucket_of(at), host.to_string())).or_default();
        match provenance {
            Provenance::Normal => slot[0] += 1,
            Provenance::AttackInjected => slot[1] += 1,
        }
    }

    /// `(normal, injected)` for one bucket.
    pub fn get(&self, second: u64, host: &str) -> (u64, u64) {
        let [n, i] = self.buckets.get(&(second, host.to_string())).copied().unwrap_or_default();
        (n, i)
    }

    pub fn total(&self, second: u64, host: &str) -> u64 {
        let (n, i) = self.get(second, host);
        n + i
    }

    /// Mean total over the buckets `s` with `from < s <= to`.
    pub fn mean(&self, host: &str, from: u64, to: u64) -> f64 {
        let n = to.saturating_sub(from);
        if n == 0 {
            return 0.0;
        }
        let sum: u64 = (from + 1..=to).map(|s| self.total(s, host)).sum();
        sum as f64 / n as f64
    }

    pub fn host_total(&self, host: &str) -> u64 {
        self.buckets
            .iter()
            .filter(|((_, h), _)| h == host)
            .map(|(_, [n, i])| n + i)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.hosts.len() * self.seconds as usize);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for s in 1..=self.seconds {
            for h in &self.hosts {
                let (n, i) = self.get(s, h);
                let _ = writeln!(out, "{s},{h},{},{n},{i}", n + i);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub attack: Option<AttackConfig>,
    pub metrics: MetricsSeries,
    pub markers: Vec<Marker>,
    pub windows: Vec<StatsWindow>,
    pub anomalies: Vec<Anomaly>,
    pub logs: Logs,
    pub controller_log: Vec<String>,
    pub detection_log: Vec<String>,
    pub receptions: Vec<Reception>,
    pub report: RunReport,
    pub world: WorldSummary,
}

/// Counters read from the finished world.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorldSummary {
    /// Packets emitted per app, in scenario order.
    pub emitted: Vec<u64>,
    /// `(switch name, port, destination address) -> frames transmitted`.
    pub forwarded: BTreeMap<(String, u16, String), u64>,
    pub dropped_by_rule: u64,
    pub dropped_buffer_full: u64,
    pub purged: u64,
    pub buffered_at_end: usize,
    pub discarded_at_destroyed: u64,
    pub unattached_drops: u64,
    pub destroyed: BTreeMap<String, SimTime>,
    /// `(node name) -> (frames sent, last send, last counted reception)`.
    pub activity: BTreeMap<String, (u64, Option<SimTime>, Option<SimTime>)>,
}

impl RunOutput {
    pub fn markers_of(&self, kind: MarkerKind) -> impl Iterator<Item = &Marker> {
        self.markers.iter().filter(move |m| m.kind == kind)
    }

    pub fn first_mitigation(&self) -> Option<SimTime> {
        self.markers_of(MarkerKind::Mitigate).map(|m| m.at).next()
    }

    pub fn markers_csv(&self) -> String {
        let mut out = String::from("time,kind,detail\n");
        for m in &self.markers {
            let _ = writeln!(out, "{},{},{}", m.at, m.kind.name(), m.detail);
        }
        out
    }

    pub fn detection_csv(&self) -> String {
        lines(std::iter::once(DETECTION_LOG_HEADER.to_string()).chain(self.detection_log.iter().cloned()))
    }

    /// Every output file name with its content, in [`OUTPUT_FILES`] order.
    pub fn files(&self) -> Vec<(&'static str, String)> {
        vec![
            ("reception.csv", self.metrics.to_csv()),
            ("markers.csv", self.markers_csv()),
            ("detection.csv", self.detection_csv()),
            ("control.log", lines(self.logs.control.iter().cloned())),
            ("switch.log", lines(self.logs.switch.iter().cloned())),
            ("controller.log", lines(self.controller_log.iter().cloned())),
            ("attack.log", lines(self.logs.attack.iter().cloned())),
            ("reception.log", lines(self.logs.reception.iter().cloned())),
        ]
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), RunError> {
        let io = |p: &Path, e: std::io::Error| RunError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        for (name, content) in self.files() {
            let p = dir.join(name);
            std::fs::write(&p, content).map_err(|e| io(&p, e))?;
        }
        Ok(())
    }
}

fn lines(it: impl Iterator<Item = String>) -> String {
    let mut out = String::new();
    for l in it {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

/// Runs `scenario` (with `overrides` applied) to its duration. `attack = None` runs
/// without the attack engine.
pub fn run(scenario: &Scenario, attack: Option<&AttackConfig>, overrides: &Overrides) -> Result<RunOutput, RunError> {
    let (scenario, attack) = overrides.apply(scenario, attack)?;
    let mut sched: Scheduler<Payload> = Scheduler::new();
    let mut world = World::new(&scenario, attack.clone(), &mut sched)?;
    let report = sched.run_until(scenario.duration, &mut world)?;
    Ok(collect(scenario, attack, world, report))
}

fn collect(scenario: Scenario, attack: Option<AttackConfig>, world: World, report: RunReport) -> RunOutput {
    let topo = world.topology();
    let hosts: Vec<String> = topo.hosts().map(|(_, n)| n.name.clone()).collect();
    let mut metrics = MetricsSeries::new(hosts, scenario.duration);
    let mut last_counted: BTreeMap<NodeIdx, SimTime> = BTreeMap::new();
    for r in world.receptions() {
        if r.counted {
            metrics.record(r.at, topo.name(r.host), r.provenance);
            last_counted.insert(r.host, r.at);
        }
    }
    let mut summary = WorldSummary {
        emitted: world.app_states().iter().map(|s| s.emitted).collect(),
        unattached_drops: world.unattached_drops(),
        ..WorldSummary::default()
    };
    for (idx, node) in topo.nodes() {
        let st = world.stats(idx);
        summary.discarded_at_destroyed += st.discarded;
        summary
            .activity
            .insert(node.name.clone(), (st.sent, st.last_sent, last_counted.get(&idx).copied()));
        if let Some(sw) = world.switch(idx) {
            let c = sw.counters();
            summary.dropped_by_rule += c.dropped_by_rule;
            summary.dropped_buffer_full += c.dropped_buffer_full;
            summary.purged += c.purged;
            summary.buffered_at_end += sw.buffered();
            for ((port, dst), n) in &c.transmitted {
                summary.forwarded.insert((node.name.clone(), *port, dst.clone()), *n);
            }
        }
    }
    for (n, t) in world.destroyed() {
        summary.destroyed.insert(topo.name(*n).to_string(), *t);
    }
    let controller = world.controller();
    RunOutput {
        metrics,
        markers: controller.markers().to_vec(),
        windows: controller.monitor().windows().to_vec(),
        anomalies: controller.monitor().anomalies().to_vec(),
        logs: world.logs().clone(),
        controller_log: controller.log().to_vec(),
        detection_log: controller.detection_log().to_vec(),
        receptions: world.receptions().to_vec(),
        report,
        world: summary,
        scenario,
        attack,
    }
}
