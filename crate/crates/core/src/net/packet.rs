use std::cmp::Ordering;
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::kernel::{NodeIdx, SimTime};

pub const BROADCAST_ADDR: &str = "255.255.255.255";

/// Bytes of eth + ip + udp header added to `app.size` when counting wire bytes.
pub const HEADER_BYTES: u64 = 42;

/// Default payload of a packet produced by `create` when `app.size` is not given.
pub const DEFAULT_CREATED_SIZE: i64 = 100;

/// A packet field value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scalar {
    Int(i64),
    Str(String),
}

impl Scalar {
    pub fn str(s: impl Into<String>) -> Self {
        Scalar::Str(s.into())
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Scalar::Str(s) => Some(s),
            Scalar::Int(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Scalar::Int(i) => Some(*i),
            Scalar::Str(_) => None,
        }
    }

    pub fn field_type(&self) -> FieldType {
        match self {
            Scalar::Int(_) => FieldType::Int,
            Scalar::Str(_) => FieldType::Str,
        }
    }

    /// Ordering between two values of the same type; `None` across types.
    pub fn compare(&self, other: &Scalar) -> Option<Ordering> {
        match (self, other) {
            (Scalar::Int(a), Scalar::Int(b)) => Some(a.cmp(b)),
            (Scalar::Str(a), Scalar::Str(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    /// Log-token rendering. Strings that would read back as integers, or that contain
    /// separators, are quoted.
    pub fn render(&self) -> String {
        match self {
            Scalar::Int(i) => i.to_string(),
            Scalar::Str(s) => {
                let plain = !s.is_empty()
                    && s.parse::<i64>().is_err()
                    && !s.starts_with('"')
                    && !s
                        .chars()
                        .any(|c| c.is_whitespace() || matches!(c, '=' | ',' | '[' | ']' | '/' | '\\'));
                if plain {
                    s.clone()
                } else {
                    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
                }
            }
        }
    }

    /// Inverse of [`Scalar::render`].
    pub fn parse_rendered(token: &str) -> Option<Scalar> {
        if let Some(inner) = token.strip_prefix('"') {
            let inner = inner.strip_suffix('"')?;
            let mut out = String::new();
            let mut chars = inner.chars();
            while let Some(c) = chars.next() {
                if c == '\\' {
                    out.push(chars.next()?);
                } else {
                    out.push(c);
                }
            }
            return Some(Scalar::Str(out));
        }
        if token.is_empty() {
            return None;
        }
        Some(match token.parse::<i64>() {
            Ok(i) => Scalar::Int(i),
            Err(_) => Scalar::Str(token.to_string()),
        })
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

impl From<&str> for Scalar {
    fn from(v: &str) -> Self {
        Scalar::Str(v.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldType {
    Int,
    Str,
}

impl FieldType {
    pub fn default_value(self) -> Scalar {
        match self {
            FieldType::Int => Scalar::Int(0),
            FieldType::Str => Scalar::Str(String::new()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldType::Int => "int",
            FieldType::Str => "str",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("path `{0}` is absent from the packet")]
    PathAbsent(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{path}` expects {expected} values, got {got}")]
    TypeMismatch {
        path: String,
        expected: &'static str,
        got: &'static str,
    },
}

/// The set of dot-path fields a scenario's packets may carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    fields: IndexMap<String, FieldType>,
}

impl Default for Schema {
    fn default() -> Self {
        use FieldType::*;
        Schema::new([
            ("eth.src", Str),
            ("eth.dst", Str),
            ("ip.src", Str),
            ("ip.dst", Str),
            ("ip.proto", Int),
            ("udp.srcPort", Int),
            ("udp.dstPort", Int),
            ("tcp.srcPort", Int),
            ("tcp.dstPort", Int),
            ("tcp.flags", Int),
            ("app.seq", Int),
            ("app.size", Int),
        ])
    }
}

impl Schema {
    pub fn new<I, S>(fields: I) -> Self
    where
        I: IntoIterator<Item = (S, FieldType)>,
        S: Into<String>,
    {
        Schema {
            fields: fields.into_iter().map(|(p, t)| (p.into(), t)).collect(),
        }
    }

    pub fn field_type(&self, path: &str) -> Option<FieldType> {
        self.fields.get(path).copied()
    }

    pub fn contains(&self, path: &str) -> bool {
        self.fields.contains_key(path)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, FieldType)> {
        self.fields.iter().map(|(p, t)| (p.as_str(), *t))
    }

    pub fn check(&self, path: &str, value: &Scalar) -> Result<(), FieldError> {
        let expected = self
            .field_type(path)
            .ok_or_else(|| FieldError::UnknownField(path.to_string()))?;
        if expected != value.field_type() {
            return Err(FieldError::TypeMismatch {
                path: path.to_string(),
                expected: expected.name(),
                got: value.field_type().name(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Provenance {
    #[default]
    Normal,
    AttackInjected,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Normal => "normal",
            Provenance::AttackInjected => "injected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PacketMeta {
    /// Unique per run; 0 for packets built outside a simulation.
    pub uid: u64,
    pub origin: Option<NodeIdx>,
    /// Last (switch, port) the packet entered on.
    pub ingress: Option<(NodeIdx, u16)>,
    pub created_at: SimTime,
    provenance: Provenance,
}

impl PacketMeta {
    pub fn new(uid: u64, origin: Option<NodeIdx>, created_at: SimTime, provenance: Provenance) -> Self {
        PacketMeta {
            uid,
            origin,
            ingress: None,
            created_at,
            provenance,
        }
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// A packet: an insertion-ordered map from dot-path to value, plus simulator metadata.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Packet {
    fields: IndexMap<String, Scalar>,
    pub meta: PacketMeta,
}

impl Packet {
    pub fn new(meta: PacketMeta) -> Self {
        Packet {
            fields: IndexMap::new(),
            meta,
        }
    }

    /// Builds a packet from `(path, value)` pairs without schema checks.
    pub fn from_fields<I, S>(meta: PacketMeta, fields: I) -> Self
    where
        I: IntoIterator<Item = (S, Scalar)>,
        S: Into<String>,
    {
        Packet {
            fields: fields.into_iter().map(|(p, v)| (p.into(), v)).collect(),
            meta,
        }
    }

    pub fn get(&self, path: &str) -> Result<&Scalar, FieldError> {
        self.fields
            .get(path)
            .ok_or_else(|| FieldError::PathAbsent(path.to_string()))
    }

    pub fn get_str(&self, path: &str) -> Option<&str> {
        self.fields.get(path).and_then(Scalar::as_str)
    }

    pub fn get_int(&self, path: &str) -> Option<i64> {
        self.fields.get(path).and_then(Scalar::as_int)
    }

    pub fn set(&mut self, schema: &Schema, path: &str, value: Scalar) -> Result<(), FieldError> {
        schema.check(path, &value)?;
        self.fields.insert(path.to_string(), value);
        Ok(())
    }

    /// Builder form of [`Packet::set`].
    pub fn with(mut self, schema: &Schema, path: &str, value: Scalar) -> Result<Packet, FieldError> {
        self.set(schema, path, value)?;
        Ok(self)
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, &Scalar)> {
        self.fields.iter().map(|(p, v)| (p.as_str(), v))
    }

    pub fn ip_src(&self) -> Option<&str> {
        self.get_str("ip.src")
    }

    pub fn ip_dst(&self) -> Option<&str> {
        self.get_str("ip.dst")
    }

    pub fn wire_bytes(&self) -> u64 {
        HEADER_BYTES + self.get_int("app.size").unwrap_or(0).max(0) as u64
    }

    pub fn provenance(&self) -> Provenance {
        self.meta.provenance
    }

    /// Deep copy marked as attack-injected under a fresh uid.
    pub fn clone_injected(&self, uid: u64, now: SimTime) -> Packet {
        Packet {
            fields: self.fields.clone(),
            meta: PacketMeta {
                uid,
                origin: self.meta.origin,
                ingress: None,
                created_at: now,
                provenance: Provenance::AttackInjected,
            },
        }
    }

    /// `path=value` tokens separated by spaces, in field order.
    pub fn render_fields(&self) -> String {
        self.fields
            .iter()
            .map(|(p, v)| format!("{p}={}", v.render()))
            .collect::<Vec<_>>()
            .join(" ")
    }
}
