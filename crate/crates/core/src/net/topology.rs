use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::kernel::{NodeIdx, SimTime};

pub type PortId = u16;

#[derive(Debug, Clone, PartialEq)]
pub struct HostSpec {
    pub address: String,
    pub mac: String,
    /// Send a single presence frame at t = 0 so the controller can locate the host.
    pub announce: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Host(HostSpec),
    Switch { ports: PortId },
    Controller,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    pub position: [f64; 3],
}

impl Node {
    pub fn is_host(&self) -> bool {
        matches!(self.kind, NodeKind::Host(_))
    }

    pub fn is_switch(&self) -> bool {
        matches!(self.kind, NodeKind::Switch { .. })
    }

    pub fn host(&self) -> Option<&HostSpec> {
        match &self.kind {
            NodeKind::Host(h) => Some(h),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub node: NodeIdx,
    pub port: PortId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Data,
    Control,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub a: Endpoint,
    pub b: Endpoint,
    pub latency: SimTime,
    pub kind: LinkKind,
}

impl Link {
    pub fn far_end(&self, from: Endpoint) -> Endpoint {
        if from == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Where a frame put on `(node, port)` ends up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hop {
    pub to: Endpoint,
    pub latency: SimTime,
    pub kind: LinkKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("duplicate node name `{0}`")]
    DuplicateName(String),
    #[error("duplicate host address `{0}`")]
    DuplicateAddress(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("port {port} of `{node}` is already attached to a link")]
    PortInUse { node: String, port: PortId },
    #[error("port {port} does not exist on `{node}`")]
    NoSuchPort { node: String, port: PortId },
    #[error("data link endpoint `{0}` must be a host or a switch")]
    BadDataEndpoint(String),
    #[error("control links connect a switch to the controller; `{0}` is not a switch")]
    BadControlEndpoint(String),
    #[error("scenario declares no controller")]
    NoController,
    #[error("scenario declares more than one controller")]
    MultipleControllers,
    #[error("port {port} of `{node}` is not attached")]
    UnattachedPort { node: String, port: PortId },
}

#[derive(Debug, Clone, Default)]
pub struct Topology {
    nodes: Vec<Node>,
    by_name: HashMap<String, NodeIdx>,
    by_address: HashMap<String, NodeIdx>,
    links: Vec<Link>,
    ports: BTreeMap<(NodeIdx, PortId), usize>,
    controller: Option<NodeIdx>,
    control_links: BTreeMap<NodeIdx, usize>,
    next_controller_port: PortId,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    fn add_node(&mut self, name: &str, kind: NodeKind) -> Result<NodeIdx, TopologyError> {
        if self.by_name.contains_key(name) {
            return Err(TopologyError::DuplicateName(name.to_string()));
        }
        let idx = NodeIdx(self.nodes.len() as u32);
        self.nodes.push(Node {
            name: name.to_string(),
            kind,
            position: [0.0; 3],
        });
        self.by_name.insert(name.to_string(), idx);
        Ok(idx)
    }

    pub fn add_host(&mut self, name: &str, address: &str, mac: Option<&str>, announce: bool) -> Result<NodeIdx, TopologyError> {
        if self.by_address.contains_key(address) {
            return Err(TopologyError::DuplicateAddress(address.to_string()));
        }
        let mac = mac
            .map(str::to_string)
            .unwrap_or_else(|| format!("02:00:00:00:{:02x}:{:02x}", self.nodes.len() >> 8, self.nodes.len() & 0xff));
        let idx = self.add_node(
            name,
            NodeKind::Host(HostSpec {
                address: address.to_string(),
                mac,
                announce,
            }),
        )?;
        self.by_address.insert(address.to_string(), idx);
        Ok(idx)
    }

    pub fn add_switch(&mut self, name: &str, ports: PortId) -> Result<NodeIdx, TopologyError> {
        self.add_node(name, NodeKind::Switch { ports })
    }

    pub fn add_controller(&mut self, name: &str) -> Result<NodeIdx, TopologyError> {
        if self.controller.is_some() {
            return Err(TopologyError::MultipleControllers);
        }
        let idx = self.add_node(name, NodeKind::Controller)?;
        self.controller = Some(idx);
        self.next_controller_port = 1;
        Ok(idx)
    }

    pub fn set_position(&mut self, node: NodeIdx, position: [f64; 3]) {
        self.nodes[node.index()].position = position;
    }

    fn port_count(&self, node: NodeIdx) -> PortId {
        match self.nodes[node.index()].kind {
            NodeKind::Host(_) => 1,
            NodeKind::Switch { ports } => ports,
            NodeKind::Controller => PortId::MAX,
        }
    }

    fn attach(&mut self, ep: Endpoint, link: usize) -> Result<(), TopologyError> {
        let name = self.nodes[ep.node.index()].name.clone();
        if self.ports.contains_key(&(ep.node, ep.port)) {
            return Err(TopologyError::PortInUse { node: name, port: ep.port });
        }
        self.ports.insert((ep.node, ep.port), link);
        Ok(())
    }

    /// Connects two data ports. Ports are numbered from 1.
    pub fn connect(&mut self, a: &str, a_port: PortId, b: &str, b_port: PortId, latency: SimTime) -> Result<usize, TopologyError> {
        let mut eps = [Endpoint { node: NodeIdx(0), port: 0 }; 2];
        for (slot, (name, port)) in eps.iter_mut().zip([(a, a_port), (b, b_port)]) {
            let node = self.lookup(name)?;
            if matches!(self.nodes[node.index()].kind, NodeKind::Controller) {
                return Err(TopologyError::BadDataEndpoint(name.to_string()));
            }
            if port == 0 || port > self.port_count(node) {
                return Err(TopologyError::NoSuchPort { node: name.to_string(), port });
            }
            *slot = Endpoint { node, port };
        }
        for ep in eps {
            if self.ports.contains_key(&(ep.node, ep.port)) {
                return Err(TopologyError::PortInUse {
                    node: self.nodes[ep.node.index()].name.clone(),
                    port: ep.port,
                });
            }
        }
        let idx = self.links.len();
        self.links.push(Link {
            a: eps[0],
            b: eps[1],
            latency,
            kind: LinkKind::Data,
        });
        self.attach(eps[0], idx)?;
        self.attach(eps[1], idx)?;
        Ok(idx)
    }

    /// Connects a switch's management port (one past its last data port) to the controller.
    pub fn connect_control(&mut self, switch: &str, latency: SimTime) -> Result<usize, TopologyError> {
        let sw = self.lookup(switch)?;
        let ports = match self.nodes[sw.index()].kind {
            NodeKind::Switch { ports } => ports,
            _ => return Err(TopologyError::BadControlEndpoint(switch.to_string())),
        };
        let ctrl = self.controller.ok_or(TopologyError::NoController)?;
        let a = Endpoint { node: sw, port: ports + 1 };
        let b = Endpoint {
            node: ctrl,
            port: self.next_controller_port,
        };
        let idx = self.links.len();
        self.attach(a, idx)?;
        self.next_controller_port += 1;
        self.ports.insert((ctrl, b.port), idx);
        self.links.push(Link {
            a,
            b,
            latency,
            kind: LinkKind::Control,
        });
        self.control_links.insert(sw, idx);
        Ok(idx)
    }

    pub fn lookup(&self, name: &str) -> Result<NodeIdx, TopologyError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| TopologyError::UnknownNode(name.to_string()))
    }

    pub fn node(&self, idx: NodeIdx) -> &Node {
        &self.nodes[idx.index()]
    }

    pub fn name(&self, idx: NodeIdx) -> &str {
        &self.nodes[idx.index()].name
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeIdx, &Node)> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (NodeIdx(i as u32), n))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn hosts(&self) -> impl Iterator<Item = (NodeIdx, &Node)> {
        self.nodes().filter(|(_, n)| n.is_host())
    }

    pub fn switches(&self) -> impl Iterator<Item = (NodeIdx, &Node)> {
        self.nodes().filter(|(_, n)| n.is_switch())
    }

    pub fn controller(&self) -> Option<NodeIdx> {
        self.controller
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn host_by_address(&self, address: &str) -> Option<NodeIdx> {
        self.by_address.get(address).copied()
    }

    pub fn address(&self, idx: NodeIdx) -> Option<&str> {
        self.node(idx).host().map(|h| h.address.as_str())
    }

    pub fn route(&self, node: NodeIdx, port: PortId) -> Result<Hop, TopologyError> {
        let link = self
            .ports
            .get(&(node, port))
            .map(|&i| &self.links[i])
            .ok_or_else(|| TopologyError::UnattachedPort {
                node: self.name(node).to_string(),
                port,
            })?;
        Ok(Hop {
            to: link.far_end(Endpoint { node, port }),
            latency: link.latency,
            kind: link.kind,
        })
    }

    /// Data ports of `switch` that have a link attached, ascending.
    pub fn data_ports(&self, switch: NodeIdx) -> Vec<PortId> {
        self.ports
            .range((switch, 0)..=(switch, PortId::MAX))
            .filter(|(_, &l)| self.links[l].kind == LinkKind::Data)
            .map(|(&(_, p), _)| p)
            .collect()
    }

    pub fn has_port(&self, node: NodeIdx, port: PortId) -> bool {
        port >= 1 && port <= self.port_count(node)
    }

    /// Link kind attached at `(node, port)`, if any.
    pub fn link_kind(&self, node: NodeIdx, port: PortId) -> Option<LinkKind> {
        self.ports.get(&(node, port)).map(|&i| self.links[i].kind)
    }

    pub fn control_port(&self, switch: NodeIdx) -> Option<PortId> {
        self.control_links.get(&switch).map(|&i| self.links[i].a.port)
    }

    /// Controller-side port that reaches `switch`.
    pub fn controller_port_for(&self, switch: NodeIdx) -> Option<PortId> {
        self.control_links.get(&switch).map(|&i| self.links[i].b.port)
    }

    /// Switches with a control link, ascending.
    pub fn connected_switches(&self) -> Vec<NodeIdx> {
        self.control_links.keys().copied().collect()
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        if self.controller.is_none() {
            return Err(TopologyError::NoController);
        }
        Ok(())
    }
}
