use std::collections::BTreeMap;

use crate::kernel::SimTime;
use crate::net::{Packet, PortId};
use crate::openflow::{FlowAction, FlowMatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowId(pub u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowEntry {
    pub id: FlowId,
    pub matching: FlowMatch,
    pub actions: Vec<FlowAction>,
    pub priority: u16,
    /// Zero means permanent.
    pub hard_timeout: SimTime,
    pub installed_at: SimTime,
    pub last_matched: Option<SimTime>,
    pub pkt_count: u64,
    pub byte_count: u64,
}

impl FlowEntry {
    pub fn expires_at(&self) -> Option<SimTime> {
        (self.hard_timeout > SimTime::ZERO).then(|| self.installed_at + self.hard_timeout)
    }

    fn sort_key(&self) -> (std::cmp::Reverse<u16>, FlowId) {
        (std::cmp::Reverse(self.priority), self.id)
    }
}

/// Flow entries kept in `(priority desc, id asc)` order; lookup returns the first hit.
#[derive(Debug, Clone, Default)]
pub struct FlowTable {
    entries: Vec<FlowEntry>,
    next_id: u64,
    accesses: u64,
    misses: u64,
    /// Packet counts of entries that have left the table.
    retired_pkts: u64,
    /// Per-match deltas since the last stats snapshot; reinstalls of the same match merge.
    window: BTreeMap<FlowMatch, (u64, u64)>,
    window_accesses: u64,
}

impl FlowTable {
    pub fn new() -> Self {
        FlowTable {
            next_id: 1,
            ..Default::default()
        }
    }

    pub fn entries(&self) -> &[FlowEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn accesses(&self) -> u64 {
        self.accesses
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn total_matched(&self) -> u64 {
        self.retired_pkts + self.entries.iter().map(|e| e.pkt_count).sum::<u64>()
    }

    pub fn get(&self, id: FlowId) -> Option<&FlowEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    fn resort(&mut self) {
        self.entries.sort_by_key(FlowEntry::sort_key);
    }

    /// Inserts a fresh entry. An existing entry with identical match and priority is
    /// replaced (and returned) as OpenFlow's add semantics prescribe.
    pub fn insert(
        &mut self,
        matching: FlowMatch,
        actions: Vec<FlowAction>,
        priority: u16,
        hard_timeout: SimTime,
        now: SimTime,
    ) -> (FlowId, Option<FlowEntry>) {
        let replaced = self
            .entries
            .iter()
            .position(|e| e.priority == priority && e.matching == matching)
            .map(|i| self.retire(i));
        let id = FlowId(self.next_id);
        self.next_id += 1;
        let entry = FlowEntry {
            id,
            matching,
            actions,
            priority,
            hard_timeout,
            installed_at: now,
            last_matched: None,
            pkt_count: 0,
            byte_count: 0,
        };
        let pos = self
            .entries
            .partition_point(|e| e.sort_key() < entry.sort_key());
        self.entries.insert(pos, entry);
        (id, replaced)
    }

    fn retire(&mut self, idx: usize) -> FlowEntry {
        let e = self.entries.remove(idx);
        self.retired_pkts += e.pkt_count;
        e
    }

    /// Replaces actions and priority of every entry whose match equals `matching`.
    pub fn modify(&mut self, matching: &FlowMatch, actions: &[FlowAction], priority: u16) -> Vec<FlowId> {
        let mut ids = Vec::new();
        for e in self.entries.iter_mut().filter(|e| &e.matching == matching) {
            e.actions = actions.to_vec();
            e.priority = priority;
            ids.push(e.id);
        }
        self.resort();
        ids
    }

    pub fn delete(&mut self, matching: &FlowMatch) -> Vec<FlowEntry> {
        let mut removed = Vec::new();
        while let Some(i) = self.entries.iter().position(|e| &e.matching == matching) {
            removed.push(self.retire(i));
        }
        removed
    }

    pub fn remove(&mut self, id: FlowId) -> Option<FlowEntry> {
        let i = self.entries.iter().position(|e| e.id == id)?;
        Some(self.retire(i))
    }

    /// Removes and returns entries whose hard timeout has elapsed at `now`, in table order.
    pub fn expire(&mut self, now: SimTime) -> Vec<FlowEntry> {
        let mut removed = Vec::new();
        let mut i = 0;
        while i < self.entries.len() {
            if self.entries[i].expires_at().is_some_and(|t| t <= now) {
                removed.push(self.retire(i));
            } else {
                i += 1;
            }
        }
        removed
    }

    /// Returns per-match `(packets, bytes)` deltas and the table-access delta since the
    /// previous call, then starts a new window. Installed entries without traffic are
    /// reported with zero deltas.
    pub fn take_window(&mut self) -> (Vec<(FlowMatch, u64, u64)>, u64) {
        let mut window = std::mem::take(&mut self.window);
        for e in &self.entries {
            window.entry(e.matching.clone()).or_default();
        }
        let accesses = std::mem::take(&mut self.window_accesses);
        (
            window.into_iter().map(|(m, (p, b))| (m, p, b)).collect(),
            accesses,
        )
    }

    /// Read-only lookup.
    pub fn find(&self, pkt: &Packet, in_port: PortId) -> Option<&FlowEntry> {
        self.entries.iter().find(|e| e.matching.matches(pkt, in_port))
    }

    /// Lookup that updates counters: the table access counter always, and the hit
    /// entry's packet/byte counters on a match.
    pub fn match_packet(&mut self, pkt: &Packet, in_port: PortId, now: SimTime) -> Option<&FlowEntry> {
        self.accesses += 1;
        self.window_accesses += 1;
        match self.entries.iter().position(|e| e.matching.matches(pkt, in_port)) {
            Some(i) => {
                let e = &mut self.entries[i];
                e.pkt_count += 1;
                e.byte_count += pkt.wire_bytes();
                e.last_matched = Some(now);
                let w = self.window.entry(e.matching.clone()).or_default();
                w.0 += 1;
                w.1 += pkt.wire_bytes();
                Some(&self.entries[i])
            }
            None => {
                self.misses += 1;
                None
            }
        }
    }
}
