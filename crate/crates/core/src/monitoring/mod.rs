//! Statistics polling, destination-entropy and rate-bound anomaly detection, and
//! persistent drop-rule mitigation.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::kernel::SimTime;
use crate::openflow::{FlowAction, FlowMatch, FlowMod, FlowModOp, FlowStat, OpenFlowMsg};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    /// Normalized entropy below this raises an anomaly; zero disables the check.
    pub entropy_threshold: f64,
    /// Packets per second received by one destination.
    pub rate_bound_rx: f64,
    /// Packets per second sent by one source.
    pub rate_bound_tx: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            entropy_threshold: 0.8,
            rate_bound_rx: 20.0,
            rate_bound_tx: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsWindow {
    pub switch: String,
    pub window_id: u64,
    pub start: SimTime,
    pub end: SimTime,
    pub flows: Vec<FlowStat>,
    pub table_accesses: u64,
}

impl StatsWindow {
    pub fn length_secs(&self) -> f64 {
        (self.end - self.start).as_secs_f64()
    }

    /// Packet deltas per (source, destination), skipping flows without both addresses.
    pub fn pair_counts(&self) -> BTreeMap<(String, String), u64> {
        let mut out = BTreeMap::new();
        for f in &self.flows {
            if let (Some(s), Some(d)) = (f.matching.src(), f.matching.dst()) {
                *out.entry((s.to_string(), d.to_string())).or_default() += f.packets;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EntropyError {
    #[error("window carries no packets")]
    EmptyWindow,
}

/// Shannon entropy (base 2) of the count distribution, divided by log2 of its length.
/// A single category yields 1.
pub fn normalized_entropy(counts: &[u64]) -> Result<f64, EntropyError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(EntropyError::EmptyWindow);
    }
    if counts.len() == 1 {
        return Ok(1.0);
    }
    let total = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * (total / c as f64).log2()
        })
        .sum();
    Ok(h / (counts.len() as f64).log2())
}

/// Per-destination packet totals of a window.
pub fn dest_counts(pairs: &BTreeMap<(String, String), u64>) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for ((_, d), n) in pairs {
        *out.entry(d.clone()).or_default() += n;
    }
    out
}

pub fn dest_entropy(window: &StatsWindow) -> Result<f64, EntropyError> {
    let counts: Vec<u64> = dest_counts(&window.pair_counts()).into_values().collect();
    normalized_entropy(&counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AnomalyKind {
    EntropyDrop,
    RateBoundRx,
    RateBoundTx,
}

impl AnomalyKind {
    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::EntropyDrop => "entropy",
            AnomalyKind::RateBoundRx => "rate_rx",
            AnomalyKind::RateBoundTx => "rate_tx",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anomaly {
    pub window_id: u64,
    pub switch: String,
    pub victim: String,
    pub suspect: String,
    pub kind: AnomalyKind,
    /// Entropy value or offending rate in packets per second.
    pub evidence: f64,
}

/// Largest value wins; ties go to the lexicographically lowest key.
fn argmax<'a>(it: impl Iterator<Item = (&'a String, u64)>) -> Option<&'a String> {
    let mut best: Option<(&String, u64)> = None;
    for (k, v) in it {
        if best.is_none_or(|(bk, bv)| v > bv || (v == bv && k < bk)) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k)
}

/// Runs every check on `window`. Pairs for which `excluded` holds are ignored.
pub fn detect(
    window: &StatsWindow,
    config: &DetectionConfig,
    excluded: impl Fn(&str, &str) -> bool,
) -> Vec<Anomaly> {
    let pairs: BTreeMap<(String, String), u64> = window
        .pair_counts()
        .into_iter()
        .filter(|((s, d), _)| !excluded(s, d))
        .collect();
    let dests = dest_counts(&pairs);
    let mut sources: BTreeMap<String, u64> = BTreeMap::new();
    for ((s, _), n) in &pairs {
        *sources.entry(s.clone()).or_default() += n;
    }
    let secs = window.length_secs();
    let suspect_toward = |victim: &str| {
        argmax(pairs.iter().filter(|((_, d), _)| d == victim).map(|((s, _), n)| (s, *n))).cloned()
    };
    let anomaly = |kind, victim: &str, suspect: String, evidence| Anomaly {
        window_id: window.window_id,
        switch: window.switch.clone(),
        victim: victim.to_string(),
        suspect,
        kind,
        evidence,
    };
    let mut out = Vec::new();

    let counts: Vec<u64> = dests.values().copied().collect();
    if config.entropy_threshold > 0.0 {
        if let Ok(h) = normalized_entropy(&counts) {
            if h < config.entropy_threshold {
                if let Some(victim) = argmax(dests.iter().map(|(d, n)| (d, *n))) {
                    if let Some(suspect) = suspect_toward(victim) {
                        out.push(anomaly(AnomalyKind::EntropyDrop, victim, suspect, h));
                    }
                }
            }
        }
    }
    if secs > 0.0 {
        for (d, n) in &dests {
            let rate = *n as f64 / secs;
            if rate > config.rate_bound_rx {
                if let Some(suspect) = suspect_toward(d) {
                    out.push(anomaly(AnomalyKind::RateBoundRx, d, suspect, rate));
                }
            }
        }
        for (s, n) in &sources {
            let rate = *n as f64 / secs;
            if rate > config.rate_bound_tx {
                let victim = argmax(pairs.iter().filter(|((ps, _), _)| ps == s).map(|((_, d), n)| (d, *n)));
                if let Some(victim) = victim {
                    out.push(anomaly(AnomalyKind::RateBoundTx, victim, s.clone(), rate));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mitigation {
    pub switch: String,
    pub src: String,
    pub dst: String,
}

impl Mitigation {
    pub fn matching(&self) -> FlowMatch {
        FlowMatch::pair(None, &self.src, &self.dst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MarkerKind {
    Poll,
    Detect,
    Mitigate,
}

impl MarkerKind {
    pub fn name(self) -> &'static str {
        match self {
            MarkerKind::Poll => "poll",
            MarkerKind::Detect => "detect",
            MarkerKind::Mitigate => "mitigate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub at: SimTime,
    pub kind: MarkerKind,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct MonitorConfig {
    pub interval: SimTime,
    pub detection: DetectionConfig,
    pub mitigation_priority: u16,
    pub mitigation_timeout: SimTime,
}

pub const DETECTION_LOG_HEADER: &str = "time,event,switch,window,victim,suspect,value,detail";

/// Controller-side monitoring state.
#[derive(Debug, Clone)]
pub struct Monitor {
    config: MonitorConfig,
    issued: BTreeSet<(String, u64)>,
    mitigations: BTreeSet<Mitigation>,
    windows: Vec<StatsWindow>,
    anomalies: Vec<Anomaly>,
    markers: Vec<Marker>,
    log: Vec<String>,
}

impl Monitor {
    pub fn new(config: MonitorConfig) -> Self {
        Monitor {
            config,
            issued: BTreeSet::new(),
            mitigations: BTreeSet::new(),
            windows: Vec::new(),
            anomalies: Vec::new(),
            markers: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    pub fn mitigations(&self) -> &BTreeSet<Mitigation> {
        &self.mitigations
    }

    pub fn is_mitigated(&self, switch: &str, src: &str, dst: &str) -> bool {
        self.mitigations.contains(&Mitigation {
            switch: switch.to_string(),
            src: src.to_string(),
            dst: dst.to_string(),
        })
    }

    pub fn windows(&self) -> &[StatsWindow] {
        &self.windows
    }

    pub fn anomalies(&self) -> &[Anomaly] {
        &self.anomalies
    }

    pub fn markers(&self) -> &[Marker] {
        &self.markers
    }

    pub fn log(&self) -> &[String] {
        &self.log
    }

    /// One request per switch for window `k`, issued at `k * interval`.
    pub fn poll(&mut self, now: SimTime, window_id: u64, switches: &[String]) -> Vec<OpenFlowMsg> {
        self.markers.push(Marker {
            at: now,
            kind: MarkerKind::Poll,
            detail: format!("window={window_id}"),
        });
        switches
            .iter()
            .map(|sw| {
                self.issued.insert((sw.clone(), window_id));
                OpenFlowMsg::StatsRequest {
                    switch: sw.clone(),
                    window_id,
                }
            })
            .collect()
    }

    pub fn drop_rule(&self, m: &Mitigation) -> FlowMod {
        FlowMod {
            switch: m.switch.clone(),
            op: FlowModOp::Add,
            matching: m.matching(),
            actions: vec![FlowAction::Drop],
            priority: self.config.mitigation_priority,
            hard_timeout: self.config.mitigation_timeout,
        }
    }

    /// Records a persistent mitigation; `None` if it already exists.
    pub fn mitigate(&mut self, now: SimTime, anomaly: &Anomaly) -> Option<FlowMod> {
        let m = Mitigation {
            switch: anomaly.switch.clone(),
            src: anomaly.suspect.clone(),
            dst: anomaly.victim.clone(),
        };
        if !self.mitigations.insert(m.clone()) {
            return None;
        }
        self.log.push(format!(
            "{},MITIGATE,{},{},{},{},{},drop",
            now, m.switch, anomaly.window_id, m.dst, m.src, self.config.mitigation_priority
        ));
        self.markers.push(Marker {
            at: now,
            kind: MarkerKind::Mitigate,
            detail: format!("sw={} src={} dst={}", m.switch, m.src, m.dst),
        });
        Some(self.drop_rule(&m))
    }

    /// Ends a mitigation and returns the delete for its rule. No policy calls this.
    pub fn revoke(&mut self, m: &Mitigation) -> Option<FlowMod> {
        self.mitigations.remove(m).then(|| FlowMod {
            op: FlowModOp::Delete,
            actions: Vec::new(),
            ..self.drop_rule(m)
        })
    }

    /// Analyzes one reply and returns the mitigation rules to install.
    pub fn handle_stats_reply(
        &mut self,
        now: SimTime,
        switch: &str,
        window_id: u64,
        flows: Vec<FlowStat>,
        table_accesses: u64,
    ) -> Vec<FlowMod> {
        if !self.issued.remove(&(switch.to_string(), window_id)) {
            self.log.push(format!("{now},UNSOLICITED,{switch},{window_id},,,,"));
            return Vec::new();
        }
        let end = SimTime::from_micros(self.config.interval.as_micros() * window_id);
        let window = StatsWindow {
            switch: switch.to_string(),
            window_id,
            start: end.saturating_sub(self.config.interval),
            end,
            flows,
            table_accesses,
        };
        let total: u64 = window.flows.iter().map(|f| f.packets).sum();
        self.log.push(format!(
            "{now},WINDOW,{switch},{window_id},,,{total},start={} end={} flows={} accesses={table_accesses}",
            window.start.to_decimal_secs(),
            window.end.to_decimal_secs(),
            window.flows.len()
        ));
        let active: BTreeMap<(String, String), u64> = window
            .pair_counts()
            .into_iter()
            .filter(|((s, d), _)| !self.is_mitigated(switch, s, d))
            .collect();
        let dests = dest_counts(&active);
        match normalized_entropy(&dests.values().copied().collect::<Vec<_>>()) {
            Ok(h) => self.log.push(format!(
                "{now},ENTROPY,{switch},{window_id},,,{h:.6},dests={}",
                dests.len()
            )),
            Err(e) => self.log.push(format!("{now},ENTROPY,{switch},{window_id},,,,{e}")),
        }
        let anomalies = detect(&window, &self.config.detection, |s, d| self.is_mitigated(switch, s, d));
        let mut mods = Vec::new();
        for a in &anomalies {
            self.log.push(format!(
                "{now},ANOMALY,{switch},{window_id},{},{},{:.6},{}",
                a.victim,
                a.suspect,
                a.evidence,
                a.kind.name()
            ));
            self.markers.push(Marker {
                at: now,
                kind: MarkerKind::Detect,
                detail: format!("kind={} victim={} suspect={}", a.kind.name(), a.victim, a.suspect),
            });
            mods.extend(self.mitigate(now, a));
        }
        self.anomalies.extend(anomalies);
        self.windows.push(window);
        mods
    }
}
