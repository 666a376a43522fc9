use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Debug};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::time::SimTime;

/// Index of a node in the scenario topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeIdx(pub u32);

impl NodeIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Recipient of an event: a node or the engine itself (global coordinators).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Node(NodeIdx),
    Engine,
}

/// Handle returned by [`Scheduler::schedule`]; equal to the event's insertion sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub id: EventId,
    pub fire_at: SimTime,
    pub target: Target,
    pub payload: P,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: Target,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub dispatched: u64,
    pub clock: SimTime,
    /// SHA-256 over every event dispatched so far, in dispatch order.
    pub trace_digest: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("cannot schedule at {at}: clock is already at {now}")]
    PastTime { at: SimTime, now: SimTime },
    #[error("handler fault at {at} in {target} (event {event}): {message}")]
    HandlerFault {
        at: SimTime,
        target: String,
        event: EventId,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct HandlerError(pub String);

impl HandlerError {
    pub fn new(msg: impl Into<String>) -> Self {
        HandlerError(msg.into())
    }
}

pub trait Handler<P> {
    fn handle(&mut self, event: Event<P>, sched: &mut Scheduler<P>) -> Result<(), HandlerError>;

    fn describe_target(&self, target: Target) -> String {
        format!("{target:?}")
    }
}

/// Event queue plus simulated clock. Dispatch order is `(fire_at, seq)`.
pub struct Scheduler<P> {
    now: SimTime,
    next_seq: u64,
    queue: BTreeMap<(SimTime, u64), (Target, P)>,
    pending: HashMap<u64, SimTime>,
    dispatched: u64,
    digest: Sha256,
    trace: Option<Vec<TraceEntry>>,
}

impl<P: Debug> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P: Debug> Scheduler<P> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 1,
            queue: BTreeMap::new(),
            pending: HashMap::new(),
            dispatched: 0,
            digest: Sha256::new(),
            trace: None,
        }
    }

    /// Keeps a copy of every dispatched event (time, seq, target, payload) for inspection.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn trace(&self) -> &[TraceEntry] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn schedule(&mut self, fire_at: SimTime, target: Target, payload: P) -> Result<EventId, SimError> {
        if fire_at < self.now {
            return Err(SimError::PastTime { at: fire_at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.insert((fire_at, seq), (target, payload));
        self.pending.insert(seq, fire_at);
        Ok(EventId(seq))
    }

    /// Schedules `delay` after the current clock; never fails.
    pub fn schedule_in(&mut self, delay: SimTime, target: Target, payload: P) -> EventId {
        let at = self.now + delay;
        self.schedule(at, target, payload)
            .expect("now + delay is never in the past")
    }

    pub fn cancel(&mut self, id: EventId) -> bool {
        match self.pending.remove(&id.0) {
            Some(at) => self.queue.remove(&(at, id.0)).is_some(),
            None => false,
        }
    }

    pub fn is_pending(&self, id: EventId) -> bool {
        self.pending.contains_key(&id.0)
    }

    fn pop_due(&mut self, t_end: SimTime) -> Option<Event<P>> {
        let (&(at, seq), _) = self.queue.first_key_value()?;
        if at > t_end {
            return None;
        }
        let (_, (target, payload)) = self.queue.pop_first()?;
        self.pending.remove(&seq);
        Some(Event {
            id: EventId(seq),
            fire_at: at,
            target,
            payload,
        })
    }

    pub fn run_until<H: Handler<P>>(&mut self, t_end: SimTime, handler: &mut H) -> Result<RunReport, SimError> {
        let mut count = 0;
        while let Some(event) = self.pop_due(t_end) {
            debug_assert!(event.fire_at >= self.now);
            self.now = event.fire_at;
            self.record(&event);
            count += 1;
            let (at, target, id) = (event.fire_at, event.target, event.id);
            handler.handle(event, self).map_err(|e| SimError::HandlerFault {
                at,
                target: handler.describe_target(target),
                event: id,
                message: e.0,
            })?;
        }
        if t_end > self.now {
            self.now = t_end;
        }
        Ok(RunReport {
            dispatched: count,
            clock: self.now,
            trace_digest: self.trace_digest(),
        })
    }

    fn record(&mut self, event: &Event<P>) {
        self.dispatched += 1;
        let label = format!("{:?}", event.payload);
        let line = format!(
            "{} {} {:?} {}\n",
            event.fire_at, event.id.0, event.target, label
        );
        self.digest.update(line.as_bytes());
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEntry {
                fire_at: event.fire_at,
                seq: event.id.0,
                target: event.target,
                label,
            });
        }
    }

    pub fn trace_digest(&self) -> String {
        hex::encode(self.digest.clone().finalize())
    }
}
