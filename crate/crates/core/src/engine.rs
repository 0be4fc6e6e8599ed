//! Deterministic discrete-event core shared by every backend.
//!
//! Time is integer picoseconds. Events at equal timestamps dispatch by kind
//! priority (completions free resources before same-instant issues, which run
//! before new arrivals), then by payload id, then by insertion order.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::controller::{MemoryRequest, Op};

/// Simulation time in picoseconds.
pub type Picos = u64;

pub const PS_PER_NS: u64 = 1_000;

pub fn ns(v: f64) -> Picos {
    (v * PS_PER_NS as f64).round() as Picos
}

pub fn to_ns(ps: Picos) -> f64 {
    ps as f64 / PS_PER_NS as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EventKind {
    /// An array read/write or buffer-served read finished.
    StepComplete { op: u64 },
    /// A holding-buffer writeback finished restoring its row.
    Writeback { op: u64 },
    /// The controller should try to issue its next operation.
    Issue,
    RequestArrival { request: u64 },
    RunEnd,
}

impl EventKind {
    pub fn priority(&self) -> u8 {
        match self {
            EventKind::StepComplete { .. } => 0,
            EventKind::Writeback { .. } => 1,
            EventKind::Issue => 2,
            EventKind::RequestArrival { .. } => 3,
            EventKind::RunEnd => 4,
        }
    }

    fn id(&self) -> u64 {
        match *self {
            EventKind::StepComplete { op } | EventKind::Writeback { op } => op,
            EventKind::RequestArrival { request } => request,
            EventKind::Issue | EventKind::RunEnd => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub time: Picos,
    pub kind: EventKind,
    seq: u64,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.kind.priority(), self.kind.id(), self.seq).cmp(&(
            other.time,
            other.kind.priority(),
            other.kind.id(),
            other.seq,
        ))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: Picos,
    dispatched: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> Picos {
        self.now
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Schedules `kind` at `time`. Scheduling into the past is a logic error.
    pub fn schedule(&mut self, time: Picos, kind: EventKind) {
        assert!(time >= self.now, "event {kind:?} scheduled at {time} before now {}", self.now);
        self.seq += 1;
        self.heap.push(Reverse(Event { time, kind, seq: self.seq }));
    }

    pub fn pop(&mut self) -> Option<Event> {
        let Reverse(ev) = self.heap.pop()?;
        debug_assert!(ev.time >= self.now);
        self.now = ev.time;
        self.dispatched += 1;
        Some(ev)
    }

    pub fn peek_time(&self) -> Option<Picos> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// One request's journey through a backend.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Completion {
    pub request_id: u64,
    pub op: Op,
    pub address: u64,
    pub arrival: Picos,
    /// When the request left the front-end queue (equal to `completion` for
    /// buffer hits served on arrival).
    pub issue: Picos,
    pub completion: Picos,
    /// Returned line for reads.
    pub data: Option<Vec<u8>>,
    pub served_from_buffer: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AcceptError {
    QueueFull,
}

/// A memory model driven by the event loop.
pub trait Backend {
    /// Offers a request to the front-end. `Err(QueueFull)` asks the caller to
    /// retry after the next completion.
    fn accept(
        &mut self,
        now: Picos,
        req: MemoryRequest,
        events: &mut EventQueue,
        out: &mut Vec<Completion>,
    ) -> Result<(), AcceptError>;

    fn handle(&mut self, now: Picos, kind: EventKind, events: &mut EventQueue, out: &mut Vec<Completion>);

    /// True once no request, operation or writeback is outstanding.
    fn is_quiescent(&self) -> bool;
}
