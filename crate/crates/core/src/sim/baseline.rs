//! Comparison backends: an electrically-controlled PCM with an open-row
//! buffer per bank, and a DRAM with constant latency.

use std::collections::HashMap;

use serde::Serialize;

use crate::controller::{MemoryRequest, Op, TimingParams};
use crate::engine::{ns, AcceptError, Backend, Completion, EventKind, EventQueue, Picos};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpcmParams {
    pub timing: TimingParams,
    pub banks: u32,
    pub row_bytes: u64,
    pub cacheline_bytes: u32,
    pub bus_bits: u32,
    pub burst_length: u32,
}

impl Default for EpcmParams {
    fn default() -> Self {
        Self {
            timing: TimingParams::epcm(),
            banks: 4,
            row_bytes: 8192,
            cacheline_bytes: 64,
            bus_bits: 64,
            burst_length: 4,
        }
    }
}

impl EpcmParams {
    /// Time to move one line over the bus.
    pub fn transfer_time(&self) -> Picos {
        let line_bits = self.cacheline_bytes as u64 * 8;
        let per_burst = self.bus_bits as u64 * self.burst_length as u64;
        line_bits.div_ceil(per_burst) * self.timing.t_burst
    }

    fn bank_and_row(&self, address: u64) -> (usize, u64) {
        let line = address / self.cacheline_bytes as u64;
        let bank = line % self.banks as u64;
        let lines_per_row = (self.row_bytes / self.cacheline_bytes as u64).max(1);
        (bank as usize, line / self.banks as u64 / lines_per_row)
    }
}

struct Pending {
    req: MemoryRequest,
    start: Picos,
}

/// Line-interleaved banks, each serving its requests one at a time in
/// arrival order. Reads that hit the open row pay only the transfer; writes
/// go straight to the cells and leave the row buffer alone.
pub struct EpcmBackend {
    params: EpcmParams,
    open_rows: Vec<Option<u64>>,
    bank_free: Vec<Picos>,
    bank_busy: Vec<Picos>,
    store: HashMap<u64, Vec<u8>>,
    in_flight: HashMap<u64, Pending>,
    next_op: u64,
    row_hits: u64,
    row_misses: u64,
}

impl EpcmBackend {
    pub fn new(params: EpcmParams) -> Self {
        let banks = params.banks as usize;
        Self {
            params,
            open_rows: vec![None; banks],
            bank_free: vec![0; banks],
            bank_busy: vec![0; banks],
            store: HashMap::new(),
            in_flight: HashMap::new(),
            next_op: 0,
            row_hits: 0,
            row_misses: 0,
        }
    }

    pub fn row_hits(&self) -> u64 {
        self.row_hits
    }

    pub fn row_misses(&self) -> u64 {
        self.row_misses
    }

    pub fn bank_busy_time(&self) -> &[Picos] {
        &self.bank_busy
    }

    pub fn stored(&self, address: u64) -> Option<&[u8]> {
        self.store.get(&address).map(Vec::as_slice)
    }

    fn service_time(&mut self, req: &MemoryRequest, bank: usize, row: u64) -> Picos {
        let t = &self.params.timing;
        let transfer = self.params.transfer_time();
        match req.op {
            Op::Read if self.open_rows[bank] == Some(row) => {
                self.row_hits += 1;
                transfer
            }
            Op::Read => {
                self.row_misses += 1;
                self.open_rows[bank] = Some(row);
                t.t_read + transfer
            }
            Op::Write => {
                let all_zero = req.data.as_deref().is_some_and(|d| d.iter().all(|&b| b == 0));
                transfer + if all_zero { t.t_reset } else { t.t_set }
            }
        }
    }
}

impl Backend for EpcmBackend {
    fn accept(
        &mut self,
        now: Picos,
        req: MemoryRequest,
        events: &mut EventQueue,
        _out: &mut Vec<Completion>,
    ) -> Result<(), AcceptError> {
        let (bank, row) = self.params.bank_and_row(req.address);
        let start = now.max(self.bank_free[bank]);
        let done = start + self.service_time(&req, bank, row);
        self.bank_busy[bank] += done - start;
        self.bank_free[bank] = done;
        self.next_op += 1;
        self.in_flight.insert(self.next_op, Pending { req, start });
        events.schedule(done, EventKind::StepComplete { op: self.next_op });
        Ok(())
    }

    fn handle(&mut self, now: Picos, kind: EventKind, _events: &mut EventQueue, out: &mut Vec<Completion>) {
        let EventKind::StepComplete { op } = kind else { return };
        let Pending { req, start } = self.in_flight.remove(&op).expect("known op");
        let data = match req.op {
            Op::Write => {
                self.store.insert(req.address, req.data.expect("write data"));
                None
            }
            Op::Read => Some(
                self.store
                    .get(&req.address)
                    .cloned()
                    .unwrap_or_else(|| vec![0; self.params.cacheline_bytes as usize]),
            ),
        };
        out.push(Completion {
            request_id: req.id,
            op: req.op,
            address: req.address,
            arrival: req.arrival,
            issue: start,
            completion: now,
            data,
            served_from_buffer: false,
        });
    }

    fn is_quiescent(&self) -> bool {
        self.in_flight.is_empty()
    }
}

/// Unlimited parallelism at a fixed latency.
pub struct FixedDramBackend {
    latency: Picos,
    cacheline_bytes: usize,
    store: HashMap<u64, Vec<u8>>,
    in_flight: HashMap<u64, MemoryRequest>,
    next_op: u64,
}

impl FixedDramBackend {
    pub fn new(latency: Picos, cacheline_bytes: usize) -> Self {
        Self { latency, cacheline_bytes, store: HashMap::new(), in_flight: HashMap::new(), next_op: 0 }
    }

    pub fn ddr4() -> Self {
        Self::new(ns(40.0), 64)
    }

    pub fn latency(&self) -> Picos {
        self.latency
    }
}

impl Backend for FixedDramBackend {
    fn accept(
        &mut self,
        now: Picos,
        req: MemoryRequest,
        events: &mut EventQueue,
        _out: &mut Vec<Completion>,
    ) -> Result<(), AcceptError> {
        self.next_op += 1;
        self.in_flight.insert(self.next_op, req);
        events.schedule(now + self.latency, EventKind::StepComplete { op: self.next_op });
        Ok(())
    }

    fn handle(&mut self, now: Picos, kind: EventKind, _events: &mut EventQueue, out: &mut Vec<Completion>) {
        let EventKind::StepComplete { op } = kind else { return };
        let req = self.in_flight.remove(&op).expect("known op");
        let data = match req.op {
            Op::Write => {
                self.store.insert(req.address, req.data.expect("write data"));
                None
            }
            Op::Read => Some(self.store.get(&req.address).cloned().unwrap_or_else(|| vec![0; self.cacheline_bytes])),
        };
        out.push(Completion {
            request_id: req.id,
            op: req.op,
            address: req.address,
            arrival: req.arrival,
            issue: now - self.latency,
            completion: now,
            data,
            served_from_buffer: false,
        });
    }

    fn is_quiescent(&self) -> bool {
        self.in_flight.is_empty()
    }
}
