//! Deterministic discrete-event message bus between the control center and
//! outlets. There is one logical timeline and no sockets; latency and loss are
//! drawn from a seeded stream in scheduling order.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::control::{Command, OutletId, ParameterBundle, Telemetry};
use crate::error::{Result, invalid};
use crate::provenance::Provenance;
use crate::rng::{SimRng, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    ControlCenter,
    Outlet(OutletId),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::ControlCenter => write!(f, "cc"),
            Endpoint::Outlet(id) => write!(f, "outlet{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Bundle,
    Telemetry,
    Command,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Bundle => "bundle",
            MessageKind::Telemetry => "telemetry",
            MessageKind::Command => "command",
        }
    }
}

/// Payloads are shared read-only; a broadcast does not copy the bundle.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Bundle(Arc<ParameterBundle>),
    Telemetry(Telemetry),
    Command(Command),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub payload: Payload,
    pub send_time: f64,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self.payload {
            Payload::Bundle(_) => MessageKind::Bundle,
            Payload::Telemetry(_) => MessageKind::Telemetry,
            Payload::Command(_) => MessageKind::Command,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Latency {
    Fixed { s: f64 },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeliverySpec {
    pub latency: Latency,
    pub drop_probability: f64,
    pub seed: u64,
    /// Preserve send order per (src, dst) pair.
    pub fifo: bool,
}

impl Default for DeliverySpec {
    fn default() -> Self {
        Self {
            latency: Latency::Fixed { s: 0.0 },
            drop_probability: 0.0,
            seed: 0,
            fifo: true,
        }
    }
}

impl DeliverySpec {
    pub fn validate(&self) -> Result<()> {
        match self.latency {
            Latency::Fixed { s } if s >= 0.0 => {}
            Latency::Uniform { lo, hi } if lo >= 0.0 && lo <= hi => {}
            other => return Err(invalid(format!("bad latency {other:?}"))),
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(invalid(format!("drop probability {} outside [0, 1]", self.drop_probability)));
        }
        Ok(())
    }
}

/// A message leaving the bus.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub time: f64,
    pub seq: u64,
    pub msg: Message,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_send: f64,
    pub t_deliver: Option<f64>,
    pub kind: MessageKind,
    pub src: Endpoint,
    pub dst: Endpoint,
    pub dropped: bool,
}

struct Pending(Delivery);

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.time.total_cmp(&self.0.time).then(other.0.seq.cmp(&self.0.seq))
    }
}

pub struct Bus {
    spec: DeliverySpec,
    clock: f64,
    seq: u64,
    rng: SimRng,
    pending: BinaryHeap<Pending>,
    last_per_pair: BTreeMap<(Endpoint, Endpoint), f64>,
    trace: Vec<TraceRow>,
    record_trace: bool,
}

impl Bus {
    pub fn new(spec: DeliverySpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            clock: 0.0,
            seq: 0,
            rng: substream(spec.seed, 0),
            pending: BinaryHeap::new(),
            last_per_pair: BTreeMap::new(),
            trace: Vec::new(),
            record_trace: true,
        })
    }

    pub fn with_clock(mut self, t: f64) -> Self {
        self.clock = t;
        self
    }

    pub fn set_record_trace(&mut self, on: bool) {
        self.record_trace = on;
    }

    /// Changes link reliability from now on, e.g. to cut every link after an event.
    pub fn set_drop_probability(&mut self, p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("drop probability {p} outside [0, 1]")));
        }
        self.spec.drop_probability = p;
        Ok(())
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    fn sample_latency(&mut self) -> f64 {
        match self.spec.latency {
            Latency::Fixed { s } => s,
            Latency::Uniform { lo, hi } if hi > lo => self.rng.random_range(lo..hi),
            Latency::Uniform { lo, .. } => lo,
        }
    }

    /// Enqueues a delivery or records a drop. Returns the delivery time.
    pub fn schedule(&mut self, msg: Message) -> Result<Option<f64>> {
        if msg.send_time < self.clock {
            return Err(invalid(format!(
                "message sent at {} before bus clock {}",
                msg.send_time, self.clock
            )));
        }
        // both draws happen for every message so one link's fate never shifts another's
        let latency = self.sample_latency();
        let dropped = self.rng.random::<f64>() < self.spec.drop_probability;
        let mut time = msg.send_time + latency;
        if dropped {
            if self.record_trace {
                self.trace.push(TraceRow {
                    t_send: msg.send_time,
                    t_deliver: None,
                    kind: msg.kind(),
                    src: msg.src,
                    dst: msg.dst,
                    dropped: true,
                });
            }
            return Ok(None);
        }
        if self.spec.fifo {
            let last = self.last_per_pair.entry((msg.src, msg.dst)).or_insert(f64::NEG_INFINITY);
            time = time.max(*last);
            *last = time;
        }
        if self.record_trace {
            self.trace.push(TraceRow {
                t_send: msg.send_time,
                t_deliver: Some(time),
                kind: msg.kind(),
                src: msg.src,
                dst: msg.dst,
                dropped: false,
            });
        }
        let seq = self.seq;
        self.seq += 1;
        self.pending.push(Pending(Delivery { time, seq, msg }));
        Ok(Some(time))
    }

    /// Sends the same payload to every recipient.
    pub fn schedule_broadcast<I>(
        &mut self,
        src: Endpoint,
        recipients: I,
        payload: Payload,
        send_time: f64,
    ) -> Result<usize>
    where
        I: IntoIterator<Item = Endpoint>,
    {
        let mut delivered = 0;
        for dst in recipients {
            let msg = Message { src, dst, payload: payload.clone(), send_time };
            delivered += usize::from(self.schedule(msg)?.is_some());
        }
        Ok(delivered)
    }

    /// Pops every delivery due at or before `t`, ordered by (time, sequence).
    pub fn advance(&mut self, t: f64) -> Result<Vec<Delivery>> {
        if t < self.clock {
            return Err(invalid(format!("cannot rewind bus from {} to {t}", self.clock)));
        }
        let mut out = Vec::new();
        while self.pending.peek().is_some_and(|p| p.0.time <= t) {
            out.push(self.pending.pop().expect("peeked").0);
        }
        self.clock = t;
        Ok(out)
    }
}

pub fn write_delivery_trace<W: Write>(
    mut out: W,
    trace: &[TraceRow],
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_header(&mut out)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_send", "t_deliver", "kind", "src", "dst", "dropped"])?;
    for r in trace {
        w.write_record([
            r.t_send.to_string(),
            r.t_deliver.map(|t| t.to_string()).unwrap_or_default(),
            r.kind.as_str().to_string(),
            r.src.to_string(),
            r.dst.to_string(),
            r.dropped.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
