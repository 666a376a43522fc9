//! Scenario files: topology, traffic, packet schema and controller behavior in TOML.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::controller::ControllerBehavior;
use crate::kernel::SimTime;
use crate::monitoring::DetectionConfig;
use crate::net::{CbrApp, FieldType, PortId, Schema, Topology, CBR_FIELDS};
use crate::switch::DEFAULT_MAX_BUFFERED;

pub const FIG4: &str = include_str!("../assets/scenarios/fig4.toml");
pub const FIG1: &str = include_str!("../assets/scenarios/fig1.toml");

const DEFAULT_LATENCY: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl ToString) -> ScenarioError {
    ScenarioError::Validation {
        path: path.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionFile {
    entropy_threshold: Option<f64>,
    rate_bound_rx: Option<f64>,
    rate_bound_tx: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerFile {
    name: String,
    polling_interval: Option<f64>,
    flow_timeout: Option<f64>,
    flood_timeout: Option<f64>,
    mitigation_timeout: Option<f64>,
    forward_priority: Option<u16>,
    mitigation_priority: Option<u16>,
    processing_delay: Option<f64>,
    detection: Option<DetectionFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SwitchFile {
    name: String,
    ports: PortId,
    control_latency: Option<f64>,
    processing_delay: Option<f64>,
    max_buffered: Option<usize>,
    position: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HostFile {
    name: String,
    address: String,
    mac: Option<String>,
    #[serde(default)]
    announce: bool,
    position: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkFile {
    a: String,
    #[serde(default = "one")]
    a_port: PortId,
    b: String,
    #[serde(default = "one")]
    b_port: PortId,
    latency: Option<f64>,
}

fn one() -> PortId {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AppFile {
    src: String,
    dst: String,
    rate: Option<f64>,
    period: Option<f64>,
    #[serde(default)]
    start: f64,
    stop: Option<f64>,
    payload: Option<i64>,
    src_port: Option<i64>,
    dst_port: Option<i64>,
    #[serde(default)]
    start_jitter: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    duration: f64,
    #[serde(default)]
    seed: u64,
    controller: ControllerFile,
    #[serde(default)]
    switches: Vec<SwitchFile>,
    #[serde(default)]
    hosts: Vec<HostFile>,
    #[serde(default)]
    links: Vec<LinkFile>,
    #[serde(default)]
    apps: Vec<AppFile>,
    schema: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppSpec {
    pub cbr: CbrApp,
    /// Upper bound of a uniform random delay added to the start, drawn per source node.
    pub start_jitter: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchSpec {
    pub processing_delay: SimTime,
    pub max_buffered: usize,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub topology: Topology,
    pub schema: Schema,
    pub apps: Vec<AppSpec>,
    pub behavior: ControllerBehavior,
    pub switches: BTreeMap<String, SwitchSpec>,
    pub duration: SimTime,
    pub seed: u64,
}

fn secs(path: &str, v: f64) -> Result<SimTime, ScenarioError> {
    if !v.is_finite() || v < 0.0 {
        return Err(invalid(path, format!("must be a non-negative number of seconds, got {v}")));
    }
    Ok(SimTime::from_secs_f64(v))
}

fn opt_secs(path: &str, v: Option<f64>, default: SimTime) -> Result<SimTime, ScenarioError> {
    v.map_or(Ok(default), |v| secs(path, v))
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.message().to_string()))?;
        build(file)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Scenario::from_toml(&text)
    }

    /// `fig4` or `fig1`.
    pub fn builtin(name: &str) -> Option<Scenario> {
        let text = match name {
            "fig4" => FIG4,
            "fig1" => FIG1,
            _ => return None,
        };
        Some(Scenario::from_toml(text).expect("builtin scenario is valid"))
    }

    pub fn fig4() -> Scenario {
        Scenario::builtin("fig4").expect("builtin")
    }

    pub fn switch_spec(&self, name: &str) -> SwitchSpec {
        self.switches.get(name).copied().unwrap_or(SwitchSpec {
            processing_delay: SimTime::ZERO,
            max_buffered: DEFAULT_MAX_BUFFERED,
        })
    }
}

fn build(f: ScenarioFile) -> Result<Scenario, ScenarioError> {
    let mut topo = Topology::new();
    let schema = match &f.schema {
        None => Schema::default(),
        Some(map) => {
            let mut fields = Vec::new();
            for (path, ty) in map {
                let t = match ty.as_str() {
                    "int" => FieldType::Int,
                    "str" => FieldType::Str,
                    other => return Err(invalid(format!("schema.{path}"), format!("unknown type `{other}`"))),
                };
                fields.push((path.clone(), t));
            }
            Schema::new(fields)
        }
    };
    for field in CBR_FIELDS {
        if !schema.contains(field) {
            return Err(invalid("schema", format!("missing required field `{field}`")));
        }
    }
    let mut switches = BTreeMap::new();
    for (i, h) in f.hosts.iter().enumerate() {
        let path = format!("hosts[{i}]");
        let idx = topo
            .add_host(&h.name, &h.address, h.mac.as_deref(), h.announce)
            .map_err(|e| invalid(&path, e))?;
        if let Some(p) = h.position {
            topo.set_position(idx, p);
        }
    }
    for (i, s) in f.switches.iter().enumerate() {
        let path = format!("switches[{i}]");
        if s.ports == 0 || s.ports == PortId::MAX {
            return Err(invalid(format!("{path}.ports"), "must be between 1 and 65534"));
        }
        let idx = topo.add_switch(&s.name, s.ports).map_err(|e| invalid(&path, e))?;
        if let Some(p) = s.position {
            topo.set_position(idx, p);
        }
        switches.insert(
            s.name.clone(),
            SwitchSpec {
                processing_delay: opt_secs(&format!("{path}.processing_delay"), s.processing_delay, SimTime::ZERO)?,
                max_buffered: s.max_buffered.unwrap_or(DEFAULT_MAX_BUFFERED),
            },
        );
    }
    topo.add_controller(&f.controller.name)
        .map_err(|e| invalid("controller.name", e))?;
    for (i, s) in f.switches.iter().enumerate() {
        let path = format!("switches[{i}].control_latency");
        let lat = opt_secs(&path, s.control_latency, SimTime::from_secs_f64(DEFAULT_LATENCY))?;
        topo.connect_control(&s.name, lat).map_err(|e| invalid(&path, e))?;
    }
    for (i, l) in f.links.iter().enumerate() {
        let path = format!("links[{i}]");
        let lat = opt_secs(&format!("{path}.latency"), l.latency, SimTime::from_secs_f64(DEFAULT_LATENCY))?;
        topo.connect(&l.a, l.a_port, &l.b, l.b_port, lat)
            .map_err(|e| invalid(&path, e))?;
    }
    let mut apps = Vec::new();
    for (i, a) in f.apps.iter().enumerate() {
        let path = format!("apps[{i}]");
        let endpoint = |name: &str, field: &str| {
            let idx = topo.lookup(name).map_err(|e| invalid(format!("{path}.{field}"), e))?;
            if !topo.node(idx).is_host() {
                return Err(invalid(format!("{path}.{field}"), format!("`{name}` is not a host")));
            }
            if topo.route(idx, 1).is_err() {
                return Err(invalid(format!("{path}.{field}"), format!("`{name}` has no link")));
            }
            Ok(idx)
        };
        let src = endpoint(&a.src, "src")?;
        let dst = endpoint(&a.dst, "dst")?;
        let period = match (a.rate, a.period) {
            (Some(r), None) if r.is_finite() && r > 0.0 => CbrApp::period_for_rate(r),
            (None, Some(p)) if p.is_finite() && p > 0.0 => SimTime::from_secs_f64(p),
            (Some(_), Some(_)) => return Err(invalid(&path, "give either `rate` or `period`, not both")),
            (None, None) => return Err(invalid(&path, "needs `rate` or `period`")),
            _ => return Err(invalid(&path, "rate and period must be positive")),
        };
        if period.as_micros() == 0 {
            return Err(invalid(&path, "period rounds to zero"));
        }
        let start = secs(&format!("{path}.start"), a.start)?;
        let stop = a.stop.map(|s| secs(&format!("{path}.stop"), s)).transpose()?;
        if stop.is_some_and(|s| s < start) {
            return Err(invalid(format!("{path}.stop"), "precedes start"));
        }
        apps.push(AppSpec {
            cbr: CbrApp {
                src,
                dst,
                period,
                start,
                stop,
                payload: a.payload.unwrap_or(100),
                src_port: a.src_port.unwrap_or(4000 + i as i64),
                dst_port: a.dst_port.unwrap_or(5000),
            },
            start_jitter: secs(&format!("{path}.start_jitter"), a.start_jitter)?,
        });
    }
    let c = &f.controller;
    let d = c.detection.as_ref();
    let dflt = DetectionConfig::default();
    let detection = DetectionConfig {
        entropy_threshold: d.and_then(|d| d.entropy_threshold).unwrap_or(dflt.entropy_threshold),
        rate_bound_rx: d.and_then(|d| d.rate_bound_rx).unwrap_or(dflt.rate_bound_rx),
        rate_bound_tx: d.and_then(|d| d.rate_bound_tx).unwrap_or(dflt.rate_bound_tx),
    };
    if !(0.0..=1.0).contains(&detection.entropy_threshold) {
        return Err(invalid("controller.detection.entropy_threshold", "must lie in [0, 1]"));
    }
    if detection.rate_bound_rx <= 0.0 || detection.rate_bound_tx <= 0.0 {
        return Err(invalid("controller.detection", "rate bounds must be positive"));
    }
    let base = ControllerBehavior::default();
    let behavior = ControllerBehavior {
        polling_interval: opt_secs("controller.polling_interval", c.polling_interval, base.polling_interval)?,
        detection,
        forward_priority: c.forward_priority.unwrap_or(base.forward_priority),
        mitigation_priority: c.mitigation_priority.unwrap_or(base.mitigation_priority),
        flow_timeout: opt_secs("controller.flow_timeout", c.flow_timeout, base.flow_timeout)?,
        flood_timeout: opt_secs("controller.flood_timeout", c.flood_timeout, base.flood_timeout)?,
        mitigation_timeout: opt_secs("controller.mitigation_timeout", c.mitigation_timeout, base.mitigation_timeout)?,
        processing_delay: opt_secs("controller.processing_delay", c.processing_delay, base.processing_delay)?,
    };
    if behavior.polling_interval.as_micros() == 0 {
        return Err(invalid("controller.polling_interval", "must be positive"));
    }
    if behavior.mitigation_priority <= behavior.forward_priority {
        return Err(invalid("controller.mitigation_priority", "must exceed forward_priority"));
    }
    topo.validate().map_err(|e| invalid("controller", e))?;
    Ok(Scenario {
        name: f.name,
        topology: topo,
        schema,
        apps,
        behavior,
        switches,
        duration: secs("duration", f.duration)?,
        seed: f.seed,
    })
}
