//! Deterministic discrete-event kernel: integer-microsecond clock, a `(time, seq)`
//! ordered event queue with cancellation, and seeded per-node random streams.

mod queue;
pub mod rng;
mod time;

pub use queue::{
    Event, EventId, Handler, HandlerError, NodeIdx, RunReport, Scheduler, SimError, Target,
    TraceEntry,
};
pub use time::{SimTime, TimeParseError, MICROS_PER_SEC};
