use crate::kernel::{NodeIdx, SimTime, MICROS_PER_SEC};

use super::packet::{FieldError, Packet, PacketMeta, Provenance, Scalar, Schema};
use super::topology::Topology;

/// Constant-bit-rate UDP source.
///
/// Emissions happen at `start + k * period` for every `k` with emission time before `stop`,
/// and always at `start` itself, so `stop == start` yields exactly one packet and a
/// `[0, 10 s]` app at 10 pkt/s yields 100.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbrApp {
    pub src: NodeIdx,
    pub dst: NodeIdx,
    pub period: SimTime,
    pub start: SimTime,
    /// `None` runs until the end of the simulation.
    pub stop: Option<SimTime>,
    pub payload: i64,
    pub src_port: i64,
    pub dst_port: i64,
}

impl CbrApp {
    /// Period for a rate in packets per second, rounded to the microsecond.
    pub fn period_for_rate(rate: f64) -> SimTime {
        SimTime::from_micros((MICROS_PER_SEC as f64 / rate).round().max(1.0) as u64)
    }

    pub fn rate(&self) -> f64 {
        MICROS_PER_SEC as f64 / self.period.as_micros() as f64
    }

    pub fn next_after(&self, tick: SimTime) -> Option<SimTime> {
        let next = tick + self.period;
        match self.stop {
            Some(stop) if next >= stop => None,
            _ => Some(next),
        }
    }
}

/// Per-app mutable state (sequence numbering).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CbrState {
    pub next_seq: i64,
    pub emitted: u64,
}

/// Emits one packet for `app` at `now` and returns it with the next tick time.
pub fn cbr_tick(
    app: &CbrApp,
    state: &mut CbrState,
    now: SimTime,
    topo: &Topology,
    schema: &Schema,
    uid: u64,
) -> Result<(Packet, Option<SimTime>), FieldError> {
    let src = topo.node(app.src).host().expect("app source is a host");
    let dst = topo.node(app.dst).host().expect("app destination is a host");
    let meta = PacketMeta::new(uid, Some(app.src), now, Provenance::Normal);
    let mut pkt = Packet::new(meta);
    pkt.set(schema, "ip.src", Scalar::str(&src.address))?;
    pkt.set(schema, "ip.dst", Scalar::str(&dst.address))?;
    pkt.set(schema, "ip.proto", Scalar::Int(17))?;
    pkt.set(schema, "udp.srcPort", Scalar::Int(app.src_port))?;
    pkt.set(schema, "udp.dstPort", Scalar::Int(app.dst_port))?;
    pkt.set(schema, "app.seq", Scalar::Int(state.next_seq))?;
    pkt.set(schema, "app.size", Scalar::Int(app.payload))?;
    pkt.set(schema, "eth.src", Scalar::str(&src.mac))?;
    pkt.set(schema, "eth.dst", Scalar::str(&dst.mac))?;
    state.next_seq += 1;
    state.emitted += 1;
    Ok((pkt, app.next_after(now)))
}

/// Fields every scenario schema must define for CBR traffic.
pub const CBR_FIELDS: [&str; 9] = [
    "ip.src",
    "ip.dst",
    "ip.proto",
    "udp.srcPort",
    "udp.dstPort",
    "app.seq",
    "app.size",
    "eth.src",
    "eth.dst",
];

#[cfg(test)]
mod tests {
    use super::*;

    fn topo() -> Topology {
        let mut t = Topology::new();
        t.add_host("Client1", "192.168.0.11", None, true).unwrap();
        t.add_host("Server1", "192.168.0.21", None, true).unwrap();
        t
    }

    fn run(app: &CbrApp, horizon: SimTime) -> Vec<(SimTime, Packet)> {
        let t = topo();
        let schema = Schema::default();
        let mut state = CbrState::default();
        let mut out = Vec::new();
        let mut tick = Some(app.start);
        while let Some(now) = tick.filter(|&n| n <= horizon) {
            let (p, next) = cbr_tick(app, &mut state, now, &t, &schema, out.len() as u64).unwrap();
            out.push((now, p));
            tick = next;
        }
        out
    }

    fn app(period: SimTime, start: SimTime, stop: Option<SimTime>) -> CbrApp {
        CbrApp {
            src: NodeIdx(0),
            dst: NodeIdx(1),
            period,
            start,
            stop,
            payload: 512,
            src_port: 4000,
            dst_port: 5000,
        }
    }

    #[test]
    fn ten_pps_for_ten_seconds() {
        let a = app(CbrApp::period_for_rate(10.0), SimTime::ZERO, Some(SimTime::from_secs(10)));
        let out = run(&a, SimTime::from_secs(100));
        assert_eq!(out.len(), 100);
        assert_eq!(out[0].1.ip_src(), Some("192.168.0.11"));
        assert_eq!(out[0].1.ip_dst(), Some("192.168.0.21"));
    }

    #[test]
    fn three_hundred_ms_over_thirty_seconds() {
        let a = app(SimTime::from_millis(300), SimTime::ZERO, Some(SimTime::from_secs(30)));
        assert_eq!(run(&a, SimTime::from_secs(100)).len(), 100);
    }

    #[test]
    fn stop_equal_start_emits_once() {
        let t = SimTime::from_secs(5);
        let a = app(SimTime::from_millis(100), t, Some(t));
        assert_eq!(run(&a, SimTime::from_secs(100)).len(), 1);
    }

    #[test]
    fn exact_period_and_increasing_seq() {
        let a = app(SimTime::from_millis(200), SimTime::from_millis(7), None);
        let out = run(&a, SimTime::from_secs(20));
        for w in out.windows(2) {
            assert_eq!(w[1].0 - w[0].0, SimTime::from_millis(200));
            assert_eq!(
                w[1].1.get_int("app.seq").unwrap(),
                w[0].1.get_int("app.seq").unwrap() + 1
            );
        }
        assert_eq!(out[0].1.get_int("app.seq"), Some(0));
    }

    #[test]
    fn rate_to_period() {
        assert_eq!(CbrApp::period_for_rate(40.0), SimTime::from_micros(25_000));
        assert_eq!(CbrApp::period_for_rate(15.0), SimTime::from_micros(66_667));
    }
}
