//! Network model: topology, dot-path addressed packets, and CBR traffic sources.

mod cbr;
mod packet;
mod topology;

pub use cbr::{cbr_tick, CbrApp, CbrState, CBR_FIELDS};
pub use packet::{
    FieldError, FieldType, Packet, PacketMeta, Provenance, Scalar, Schema, BROADCAST_ADDR,
    DEFAULT_CREATED_SIZE, HEADER_BYTES,
};
pub use topology::{Endpoint, Hop, HostSpec, Link, LinkKind, Node, NodeKind, PortId, Topology, TopologyError};
