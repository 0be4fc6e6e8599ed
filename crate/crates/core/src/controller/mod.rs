//! E-O-E control unit: DRAM-command front end, address/data queues, write and
//! three-step read sequencing, the holding buffer with opportunistic
//! writeback, and pipelined issue bounded by the read/write windows.
//!
//! Array effects are applied when an operation's optical phase completes.
//! Requests leave the queues strictly in arrival order; a read waits at the
//! head while any write or read to the same line is in flight. A write drops
//! the line's holding-buffer entry when it issues, not when it arrives, so
//! reads queued ahead of it still see the old data. Holding-buffer
//! writebacks use the write path whenever no write data is buffered and the
//! head of the queue cannot issue; a read that finds the buffer full forces
//! the oldest entry out.

mod holding;
mod window;

use std::collections::{HashMap, VecDeque};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::{OpcmArray, ReadTranscript};
use crate::device::TransmissionModel;
use crate::engine::{ns, AcceptError, Backend, Completion, EventKind, EventQueue, Picos};
use crate::geometry::{decode_address, AddressError, ArrayGeometry, DecodedAddress};

pub use holding::{HoldingBuffer, HoldingEntry};
pub use window::RateWindow;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("unknown DRAM command `{0}`")]
    UnknownCommand(String),
    #[error("request queue full")]
    QueueFull,
    #[error(transparent)]
    Address(#[from] AddressError),
    #[error("write to {0:#x} carries no data")]
    MissingData(u64),
    #[error("read from {0:#x} carries a payload")]
    UnexpectedData(u64),
    #[error("payload is {got} bytes, cache line is {want}")]
    DataLength { got: usize, want: usize },
    #[error("invalid timing: {0}")]
    InvalidTiming(&'static str),
    #[error("invalid controller parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Op {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MemoryRequest {
    pub id: u64,
    pub arrival: Picos,
    pub op: Op,
    pub address: u64,
    pub data: Option<Vec<u8>>,
}

impl MemoryRequest {
    pub fn read(id: u64, arrival: Picos, address: u64) -> Self {
        Self { id, arrival, op: Op::Read, address, data: None }
    }

    pub fn write(id: u64, arrival: Picos, address: u64, data: Vec<u8>) -> Self {
        Self { id, arrival, op: Op::Write, address, data: Some(data) }
    }

    pub fn check(&self, cacheline_bytes: usize) -> Result<(), ControllerError> {
        match (self.op, &self.data) {
            (Op::Write, None) => Err(ControllerError::MissingData(self.address)),
            (Op::Read, Some(_)) => Err(ControllerError::UnexpectedData(self.address)),
            (Op::Write, Some(d)) if d.len() != cacheline_bytes => {
                Err(ControllerError::DataLength { got: d.len(), want: cacheline_bytes })
            }
            _ => Ok(()),
        }
    }
}

/// Device timing, stored in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TimingParams {
    pub t_set: Picos,
    pub t_reset: Picos,
    pub t_read: Picos,
    pub t_burst: Picos,
    pub t_eoe: Picos,
}

impl TimingParams {
    pub fn cosmos() -> Self {
        Self { t_set: ns(160.0), t_reset: ns(25.0), t_read: ns(25.0), t_burst: ns(1.0), t_eoe: ns(5.0) }
    }

    /// EPCM has no E-O-E stage; `t_eoe` is unused by that backend.
    pub fn epcm() -> Self {
        Self { t_set: ns(120.0), t_reset: ns(50.0), t_read: ns(60.0), t_burst: ns(4.0), t_eoe: ns(0.0) }
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        if [self.t_set, self.t_reset, self.t_read, self.t_burst, self.t_eoe].contains(&0) {
            return Err(ControllerError::InvalidTiming("all timing parameters must be positive"));
        }
        if !(self.t_eoe <= self.t_read && self.t_read <= self.t_set) {
            return Err(ControllerError::InvalidTiming("need t_eoe <= t_read <= t_set"));
        }
        Ok(())
    }

    pub fn write_latency(&self) -> Picos {
        self.t_eoe + self.t_set
    }

    pub fn read_latency(&self) -> Picos {
        self.t_eoe + self.t_read
    }
}

/// Aggregate bits that may be in flight per `t_SET` (writes) and per
/// `t_read` (reads) across the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParallelismCaps {
    pub write_window_bits: u64,
    pub read_window_bits: u64,
}

impl ParallelismCaps {
    pub fn from_cells(write_cells: u64, read_cells: u64, bits_per_cell: u32) -> Self {
        Self {
            write_window_bits: write_cells * bits_per_cell as u64,
            read_window_bits: read_cells * bits_per_cell as u64,
        }
    }

    /// 32 writes and 5 reads per bank across 8 banks.
    pub fn reference(bits_per_cell: u32) -> Self {
        Self::from_cells(32 * 8, 5 * 8, bits_per_cell)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControllerParams {
    pub holding_capacity: usize,
    pub queue_capacity: usize,
    /// Readings may exceed full transmission by this much before decode fails.
    pub ratio_tolerance: f64,
    /// Relative amplitude of uniform multiplicative noise on each intensity
    /// sample; zero disables noise.
    pub read_noise: f64,
    pub noise_seed: u64,
    /// Keep a per-issue log (for invariant checks).
    pub record_issues: bool,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            holding_capacity: 16,
            queue_capacity: 64,
            ratio_tolerance: 0.0,
            read_noise: 0.0,
            noise_seed: 0,
            record_issues: false,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if self.holding_capacity == 0 {
            return Err(ControllerError::InvalidParams("holding_capacity must be at least 1"));
        }
        if self.queue_capacity == 0 {
            return Err(ControllerError::InvalidParams("queue_capacity must be at least 1"));
        }
        if !(0.0..0.5).contains(&self.read_noise) || self.ratio_tolerance < 0.0 {
            return Err(ControllerError::InvalidParams("noise must be in [0, 0.5), tolerance >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DramCommand {
    Activate { row: u64 },
    Precharge,
    Refresh,
    Read { address: u64 },
    Write { address: u64, data: Vec<u8> },
}

/// Command mnemonics understood by the front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Act,
    Pre,
    Ref,
    Rd,
    Wr,
}

impl FromStr for CommandKind {
    type Err = ControllerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "ACT" => CommandKind::Act,
            "PRE" => CommandKind::Pre,
            "REF" => CommandKind::Ref,
            "RD" | "R" => CommandKind::Rd,
            "WR" | "W" => CommandKind::Wr,
            _ => return Err(ControllerError::UnknownCommand(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandOutcome {
    Ignored,
    Enqueued,
    ServedFromBuffer,
}

/// What the E-O-E unit decided to do with an incoming request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HazardDisposition {
    /// Read satisfied from a valid holding-buffer entry.
    ServeFromBuffer,
    /// Write whose line sits in the holding buffer. The entry stays valid for
    /// reads queued ahead of the write and is dropped when the write issues.
    InvalidateAndQueue,
    /// Ordinary in-order processing.
    Queue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RowAddress {
    pub tile_row: u32,
    pub tile_col: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ColumnAddress {
    pub bank_group: u32,
    pub cell_row: u32,
}

#[derive(Debug, Clone)]
struct Queued {
    id: u64,
    op: Op,
    arrival: Picos,
    address: u64,
    row: RowAddress,
    column: ColumnAddress,
}

impl Queued {
    fn decoded(&self) -> DecodedAddress {
        DecodedAddress {
            bank_group: self.column.bank_group,
            tile_row: self.row.tile_row,
            tile_col: self.row.tile_col,
            cell_row: self.column.cell_row,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueKind {
    Read,
    Write,
    BufferRead,
    OpportunisticWriteback,
    ForcedWriteback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IssueRecord {
    pub time: Picos,
    pub kind: IssueKind,
    pub address: u64,
}

#[derive(Debug, Clone)]
enum InFlight {
    Read { req: Queued, issue: Picos },
    Write { req: Queued, issue: Picos, data: Vec<u8> },
    BufferRead { req: Queued, issue: Picos, data: Vec<u8> },
    Writeback { entry: u64, address: u64, data: Vec<u8> },
}

#[derive(Debug, Clone, Copy, Default)]
struct LineState {
    reads_in_flight: u32,
    writes_in_flight: u32,
    /// Accepted writes not yet committed to the array.
    writes_pending: u32,
}

impl LineState {
    fn is_idle(&self) -> bool {
        self.reads_in_flight == 0 && self.writes_in_flight == 0 && self.writes_pending == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ControllerStats {
    pub activate_noops: u64,
    pub precharge_noops: u64,
    pub refresh_noops: u64,
    pub array_reads: u64,
    pub array_writes: u64,
    pub buffer_hits: u64,
    pub opportunistic_writebacks: u64,
    pub forced_writebacks: u64,
    pub writebacks_completed: u64,
    pub writebacks_superseded: u64,
    pub queue_full_rejections: u64,
    pub issue_events: u64,
    /// Smallest gap between consecutive issue events, if at least two happened.
    pub min_issue_spacing: Option<Picos>,
    pub holding_high_water: usize,
}

enum Progress {
    Issued,
    RetryAt(Picos),
    Blocked,
}

impl Progress {
    fn earliest(self, other: Progress) -> Progress {
        match (self, other) {
            (Progress::RetryAt(a), Progress::RetryAt(b)) => Progress::RetryAt(a.min(b)),
            (Progress::RetryAt(t), _) | (_, Progress::RetryAt(t)) => Progress::RetryAt(t),
            (a, _) => a,
        }
    }
}

/// The COSMOS controller together with the array it drives.
pub struct Controller {
    geometry: ArrayGeometry,
    timing: TimingParams,
    params: ControllerParams,
    array: OpcmArray,
    queue: VecDeque<Queued>,
    data_buffer: VecDeque<(u64, Vec<u8>)>,
    holding: HoldingBuffer,
    write_window: RateWindow,
    read_window: RateWindow,
    in_flight: HashMap<u64, InFlight>,
    lines: HashMap<u64, LineState>,
    next_issue_time: Picos,
    last_issue: Option<Picos>,
    issue_pending_at: Option<Picos>,
    next_op: u64,
    next_command_id: u64,
    noise: ChaCha8Rng,
    bank_busy: Vec<(Picos, Picos)>,
    transcripts: Option<Vec<(u64, Vec<ReadTranscript>)>>,
    issue_log: Vec<IssueRecord>,
    stats: ControllerStats,
}

impl Controller {
    pub fn new(
        geometry: ArrayGeometry,
        model: TransmissionModel,
        timing: TimingParams,
        caps: ParallelismCaps,
        params: ControllerParams,
    ) -> Result<Self, ControllerError> {
        timing.validate()?;
        params.validate()?;
        if caps.write_window_bits == 0 || caps.read_window_bits == 0 {
            return Err(ControllerError::InvalidParams("window sizes must be positive"));
        }
        Ok(Self {
            geometry,
            timing,
            params,
            array: OpcmArray::new(geometry, model),
            queue: VecDeque::new(),
            data_buffer: VecDeque::new(),
            holding: HoldingBuffer::new(params.holding_capacity),
            write_window: RateWindow::new(caps.write_window_bits, timing.t_set),
            read_window: RateWindow::new(caps.read_window_bits, timing.t_read),
            in_flight: HashMap::new(),
            lines: HashMap::new(),
            next_issue_time: 0,
            last_issue: None,
            issue_pending_at: None,
            next_op: 0,
            next_command_id: 1 << 62,
            noise: ChaCha8Rng::seed_from_u64(params.noise_seed),
            bank_busy: vec![(0, 0); geometry.bank_count as usize],
            transcripts: None,
            issue_log: Vec::new(),
            stats: ControllerStats::default(),
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn timing(&self) -> &TimingParams {
        &self.timing
    }

    pub fn array(&self) -> &OpcmArray {
        &self.array
    }

    pub fn holding_buffer(&self) -> &HoldingBuffer {
        &self.holding
    }

    pub fn stats(&self) -> ControllerStats {
        ControllerStats { holding_high_water: self.holding.high_water(), ..self.stats.clone() }
    }

    pub fn issue_log(&self) -> &[IssueRecord] {
        &self.issue_log
    }

    /// Starts keeping the photodetector transcript of every array read.
    pub fn record_transcripts(&mut self) {
        self.transcripts.get_or_insert_with(Vec::new);
    }

    pub fn transcripts(&self) -> &[(u64, Vec<ReadTranscript>)] {
        self.transcripts.as_deref().unwrap_or(&[])
    }

    pub fn row_address_queue(&self) -> impl Iterator<Item = RowAddress> + '_ {
        self.queue.iter().map(|q| q.row)
    }

    pub fn column_address_queue(&self) -> impl Iterator<Item = ColumnAddress> + '_ {
        self.queue.iter().map(|q| q.column)
    }

    pub fn data_buffer_len(&self) -> usize {
        self.data_buffer.len()
    }

    pub fn in_flight_write_bits(&self, now: Picos) -> f64 {
        self.write_window.backlog_bits(now)
    }

    pub fn in_flight_read_bits(&self, now: Picos) -> f64 {
        self.read_window.backlog_bits(now)
    }

    pub fn next_issue_time(&self) -> Picos {
        self.next_issue_time
    }

    /// Busy time of each bank's optical path, as a union of intervals.
    pub fn bank_busy_time(&self) -> Vec<Picos> {
        self.bank_busy.iter().map(|&(busy, _)| busy).collect()
    }

    fn line_bits(&self) -> u64 {
        self.geometry.cacheline_bits() as u64
    }

    fn line_mut(&mut self, address: u64) -> &mut LineState {
        self.lines.entry(address).or_default()
    }

    fn settle_line(&mut self, address: u64) {
        if self.lines.get(&address).is_some_and(|l| l.is_idle()) {
            self.lines.remove(&address);
        }
    }

    fn fresh_op(&mut self) -> u64 {
        self.next_op += 1;
        self.next_op
    }

    fn schedule_issue(&mut self, at: Picos, events: &mut EventQueue) {
        let at = at.max(events.now());
        if matches!(self.issue_pending_at, Some(p) if p <= at) {
            return;
        }
        self.issue_pending_at = Some(at);
        events.schedule(at, EventKind::Issue);
    }

    /// Classifies an incoming request against the holding buffer.
    pub fn hazard_check(&self, op: Op, address: u64) -> HazardDisposition {
        let write_pending = self.lines.get(&address).is_some_and(|l| l.writes_pending > 0);
        match (op, self.holding.lookup(address).is_some()) {
            // a queued write makes the entry stale for anyone arriving later
            (Op::Read, true) if write_pending => HazardDisposition::Queue,
            (Op::Read, true) => HazardDisposition::ServeFromBuffer,
            (Op::Write, true) => HazardDisposition::InvalidateAndQueue,
            _ => HazardDisposition::Queue,
        }
    }

    /// DRAM-style front door. ACT/PRE/REF have no meaning for the optical
    /// array and are only counted.
    pub fn accept_command(
        &mut self,
        now: Picos,
        cmd: DramCommand,
        events: &mut EventQueue,
        out: &mut Vec<Completion>,
    ) -> Result<CommandOutcome, ControllerError> {
        let req = match cmd {
            DramCommand::Activate { .. } => {
                self.stats.activate_noops += 1;
                return Ok(CommandOutcome::Ignored);
            }
            DramCommand::Precharge => {
                self.stats.precharge_noops += 1;
                return Ok(CommandOutcome::Ignored);
            }
            DramCommand::Refresh => {
                self.stats.refresh_noops += 1;
                return Ok(CommandOutcome::Ignored);
            }
            DramCommand::Read { address } => MemoryRequest::read(self.next_command_id, now, address),
            DramCommand::Write { address, data } => {
                MemoryRequest::write(self.next_command_id, now, address, data)
            }
        };
        self.next_command_id += 1;
        self.submit(now, req, events, out)
    }

    /// Validates and enqueues a read or write.
    pub fn submit(
        &mut self,
        now: Picos,
        req: MemoryRequest,
        events: &mut EventQueue,
        _out: &mut Vec<Completion>,
    ) -> Result<CommandOutcome, ControllerError> {
        req.check(self.geometry.cacheline_bytes as usize)?;
        let decoded = decode_address(req.address, &self.geometry)?;
        let disposition = self.hazard_check(req.op, req.address);
        if disposition == HazardDisposition::ServeFromBuffer {
            let data = self.holding.lookup(req.address).map(<[u8]>::to_vec).unwrap_or_default();
            let op = self.fresh_op();
            let q = self.queued(&req, decoded);
            self.stats.buffer_hits += 1;
            self.in_flight.insert(op, InFlight::BufferRead { req: q, issue: now, data });
            events.schedule(now + self.timing.t_eoe, EventKind::StepComplete { op });
            return Ok(CommandOutcome::ServedFromBuffer);
        }
        if self.queue.len() >= self.params.queue_capacity {
            self.stats.queue_full_rejections += 1;
            return Err(ControllerError::QueueFull);
        }
        let q = self.queued(&req, decoded);
        if let Some(data) = req.data {
            self.line_mut(req.address).writes_pending += 1;
            self.data_buffer.push_back((req.id, data));
        }
        self.queue.push_back(q);
        self.schedule_issue(self.next_issue_time, events);
        Ok(CommandOutcome::Enqueued)
    }

    fn queued(&self, req: &MemoryRequest, d: DecodedAddress) -> Queued {
        Queued {
            id: req.id,
            op: req.op,
            arrival: req.arrival,
            address: req.address,
            row: RowAddress { tile_row: d.tile_row, tile_col: d.tile_col },
            column: ColumnAddress { bank_group: d.bank_group, cell_row: d.cell_row },
        }
    }

    fn note_issue(&mut self, now: Picos, kind: IssueKind, address: u64) {
        if let Some(prev) = self.last_issue {
            let gap = now - prev;
            self.stats.min_issue_spacing = Some(self.stats.min_issue_spacing.map_or(gap, |m| m.min(gap)));
        }
        self.last_issue = Some(now);
        self.stats.issue_events += 1;
        self.next_issue_time = now + self.timing.t_eoe;
        if self.params.record_issues {
            self.issue_log.push(IssueRecord { time: now, kind, address });
        }
    }

    fn mark_banks_busy(&mut self, bank_group: u32, start: Picos, end: Picos) {
        for bank in self.geometry.banks_of_group(bank_group) {
            let (busy, until) = &mut self.bank_busy[bank as usize];
            if start >= *until {
                *busy += end - start;
            } else if end > *until {
                *busy += end - *until;
            }
            *until = (*until).max(end);
        }
    }

    fn try_issue(&mut self, now: Picos, events: &mut EventQueue) {
        if now < self.next_issue_time {
            self.schedule_issue(self.next_issue_time, events);
            return;
        }
        let progress = match self.queue.front() {
            Some(head) if head.op == Op::Read => match self.issue_read(now, events) {
                Progress::Issued => Progress::Issued,
                // the write path is free while no write data is buffered
                stalled if self.data_buffer.is_empty() => {
                    match self.issue_writeback(now, events, IssueKind::OpportunisticWriteback) {
                        Progress::Issued => Progress::Issued,
                        other => stalled.earliest(other),
                    }
                }
                stalled => stalled,
            },
            Some(_) => self.issue_write(now, events),
            None => self.issue_writeback(now, events, IssueKind::OpportunisticWriteback),
        };
        match progress {
            Progress::Issued => self.schedule_issue(self.next_issue_time, events),
            Progress::RetryAt(t) => self.schedule_issue(t, events),
            Progress::Blocked => {}
        }
    }

    fn issue_read(&mut self, now: Picos, events: &mut EventQueue) -> Progress {
        let head = self.queue.front().expect("read at head").clone();
        if let Some(data) = self.holding.lookup(head.address).map(<[u8]>::to_vec) {
            self.queue.pop_front();
            let op = self.fresh_op();
            self.stats.buffer_hits += 1;
            self.note_issue(now, IssueKind::BufferRead, head.address);
            self.in_flight.insert(op, InFlight::BufferRead { req: head, issue: now, data });
            events.schedule(now + self.timing.t_eoe, EventKind::StepComplete { op });
            return Progress::Issued;
        }
        let line = self.lines.get(&head.address).copied().unwrap_or_default();
        if line.reads_in_flight > 0 || line.writes_in_flight > 0 {
            return Progress::Blocked;
        }
        if !self.holding.has_room() {
            return self.issue_writeback(now, events, IssueKind::ForcedWriteback);
        }
        let bits = self.line_bits();
        let earliest = self.read_window.earliest_start(bits);
        if earliest > now {
            return Progress::RetryAt(earliest);
        }
        self.queue.pop_front();
        self.read_window.reserve(now, bits);
        self.holding.reserve();
        self.line_mut(head.address).reads_in_flight += 1;
        self.stats.array_reads += 1;
        self.note_issue(now, IssueKind::Read, head.address);
        let start = now + self.timing.t_eoe;
        let done = start + self.timing.t_read;
        self.mark_banks_busy(head.column.bank_group, start, done);
        let op = self.fresh_op();
        self.in_flight.insert(op, InFlight::Read { req: head, issue: now });
        events.schedule(done, EventKind::StepComplete { op });
        Progress::Issued
    }

    fn issue_write(&mut self, now: Picos, events: &mut EventQueue) -> Progress {
        let bits = self.line_bits();
        let earliest = self.write_window.earliest_start(bits);
        if earliest > now {
            return Progress::RetryAt(earliest);
        }
        let head = self.queue.pop_front().expect("write at head");
        let (id, data) = self.data_buffer.pop_front().expect("write data buffered");
        debug_assert_eq!(id, head.id);
        // every earlier read of this line has left the queue by now
        self.holding.invalidate(head.address);
        self.write_window.reserve(now, bits);
        self.line_mut(head.address).writes_in_flight += 1;
        self.stats.array_writes += 1;
        self.note_issue(now, IssueKind::Write, head.address);
        let start = now + self.timing.t_eoe;
        let done = start + self.timing.t_set;
        self.mark_banks_busy(head.column.bank_group, start, done);
        let op = self.fresh_op();
        self.in_flight.insert(op, InFlight::Write { req: head, issue: now, data });
        events.schedule(done, EventKind::StepComplete { op });
        Progress::Issued
    }

    fn issue_writeback(&mut self, now: Picos, events: &mut EventQueue, kind: IssueKind) -> Progress {
        let Some(entry) = self.holding.next_writeback() else {
            return Progress::Blocked;
        };
        let (entry_id, address, data) = (entry.id, entry.address, entry.data.clone());
        let bits = self.line_bits();
        let earliest = self.write_window.earliest_start(bits);
        if earliest > now {
            return Progress::RetryAt(earliest);
        }
        self.write_window.reserve(now, bits);
        let op = self.fresh_op();
        self.holding.mark_writeback(entry_id, op);
        self.line_mut(address).writes_in_flight += 1;
        match kind {
            IssueKind::ForcedWriteback => self.stats.forced_writebacks += 1,
            _ => self.stats.opportunistic_writebacks += 1,
        }
        self.note_issue(now, kind, address);
        let d = decode_address(address, &self.geometry).expect("buffered address is valid");
        let start = now + self.timing.t_eoe;
        let done = start + self.timing.t_set;
        self.mark_banks_busy(d.bank_group, start, done);
        self.in_flight.insert(op, InFlight::Writeback { entry: entry_id, address, data });
        events.schedule(done, EventKind::Writeback { op });
        Progress::Issued
    }

    fn complete(&mut self, now: Picos, op: u64, events: &mut EventQueue, out: &mut Vec<Completion>) {
        let Some(job) = self.in_flight.remove(&op) else {
            panic!("completion for unknown op {op}");
        };
        match job {
            InFlight::Read { req, issue } => {
                let d = req.decoded();
                let amp = self.params.read_noise;
                let rng = &mut self.noise;
                let mut noise = || if amp > 0.0 { 1.0 + rng.gen_range(-amp..=amp) } else { 1.0 };
                let (data, transcript) = self
                    .array
                    .read_line_destructive(&d, self.params.ratio_tolerance, &mut noise)
                    .expect("read ratio within tolerance");
                if let Some(log) = self.transcripts.as_mut() {
                    log.push((req.id, transcript));
                }
                let line = self.line_mut(req.address);
                line.reads_in_flight -= 1;
                // Reads queued behind this one still need the data even when a
                // write is waiting; only a write already issued makes it stale.
                if line.writes_in_flight == 0 {
                    self.holding.insert(req.address, data.clone());
                } else {
                    self.holding.release();
                }
                self.settle_line(req.address);
                out.push(Completion {
                    request_id: req.id,
                    op: Op::Read,
                    address: req.address,
                    arrival: req.arrival,
                    issue,
                    completion: now,
                    data: Some(data),
                    served_from_buffer: false,
                });
            }
            InFlight::Write { req, issue, data } => {
                self.array.write_line(&req.decoded(), &data);
                let line = self.line_mut(req.address);
                line.writes_in_flight -= 1;
                line.writes_pending -= 1;
                self.settle_line(req.address);
                out.push(Completion {
                    request_id: req.id,
                    op: Op::Write,
                    address: req.address,
                    arrival: req.arrival,
                    issue,
                    completion: now,
                    data: None,
                    served_from_buffer: false,
                });
            }
            InFlight::BufferRead { req, issue, data } => out.push(Completion {
                request_id: req.id,
                op: Op::Read,
                address: req.address,
                arrival: req.arrival,
                issue,
                completion: now,
                data: Some(data),
                served_from_buffer: true,
            }),
            InFlight::Writeback { entry, address, data } => {
                let d = decode_address(address, &self.geometry).expect("buffered address is valid");
                self.array.write_line(&d, &data);
                self.line_mut(address).writes_in_flight -= 1;
                self.settle_line(address);
                self.stats.writebacks_completed += 1;
                if !self.holding.finish_writeback(entry) {
                    self.stats.writebacks_superseded += 1;
                }
            }
        }
        self.schedule_issue(now, events);
    }
}

impl Backend for Controller {
    fn accept(
        &mut self,
        now: Picos,
        req: MemoryRequest,
        events: &mut EventQueue,
        out: &mut Vec<Completion>,
    ) -> Result<(), AcceptError> {
        match self.submit(now, req, events, out) {
            Ok(_) => Ok(()),
            Err(ControllerError::QueueFull) => Err(AcceptError::QueueFull),
            Err(e) => panic!("request reached the controller unvalidated: {e}"),
        }
    }

    fn handle(&mut self, now: Picos, kind: EventKind, events: &mut EventQueue, out: &mut Vec<Completion>) {
        match kind {
            EventKind::StepComplete { op } | EventKind::Writeback { op } => self.complete(now, op, events, out),
            EventKind::Issue => {
                if self.issue_pending_at == Some(now) {
                    self.issue_pending_at = None;
                    self.try_issue(now, events);
                }
            }
            EventKind::RequestArrival { .. } | EventKind::RunEnd => {}
        }
    }

    fn is_quiescent(&self) -> bool {
        self.queue.is_empty() && self.in_flight.is_empty() && self.holding.is_empty()
    }
}
