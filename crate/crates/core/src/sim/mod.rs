//! Trace-driven simulation: system presets, the event loop that feeds a
//! backend, and report assembly.

pub mod baseline;
pub mod stats;
pub mod trace;

use std::collections::VecDeque;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::array::OpcmArray;
use crate::controller::{
    Controller, ControllerError, ControllerParams, MemoryRequest, Op, ParallelismCaps, TimingParams,
};
use crate::device::{EpcmCellParams, TransmissionModel};
use crate::endurance::{lifetime_years, LifetimeParams};
use crate::engine::{ns, to_ns, AcceptError, Backend, Completion, EventKind, EventQueue, Picos};
use crate::geometry::{decode_address, ArrayGeometry};
use crate::optics::{read_energy_per_bit, write_energy_per_bit, EnergyModelParams, PublishedValues};

use baseline::{EpcmBackend, EpcmParams, FixedDramBackend};
use stats::{gbps, mean_ns, EnergyBreakdown, RejectedRequest, StatsReport, Traffic};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("reports `{left}` and `{right}` were produced from different traces")]
    TraceMismatch { left: String, right: String },
    #[error("simulation stalled at {time_ns} ns with {pending} requests outstanding")]
    Deadlock { time_ns: f64, pending: usize },
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BaselineKind {
    Cosmos,
    Epcm,
    FixedDram,
}

impl BaselineKind {
    pub fn label(&self) -> &'static str {
        match self {
            BaselineKind::Cosmos => "COSMOS",
            BaselineKind::Epcm => "EPCM",
            BaselineKind::FixedDram => "FIXED_DRAM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CosmosConfig {
    pub geometry: ArrayGeometry,
    pub model: TransmissionModel,
    pub timing: TimingParams,
    pub caps: ParallelismCaps,
    pub params: ControllerParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BackendConfig {
    Cosmos(CosmosConfig),
    Epcm(EpcmParams),
    FixedDram { latency: Picos, cacheline_bytes: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyPerBit {
    pub read_pj: f64,
    pub write_pj: f64,
    pub writeback_pj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    pub name: String,
    pub backend: BackendConfig,
    pub energy: EnergyPerBit,
    pub capacity_bytes: u64,
    pub max_writes_per_cell: f64,
    pub core_frequency_hz: f64,
    pub seed: u64,
}

pub const PRESETS: [&str; 5] = ["cosmos-4bit", "cosmos-2bit", "cosmos-8bit", "epcm-2bit", "fixed-dram"];

/// Per-bit energies of a COSMOS configuration from the optical energy model.
pub fn cosmos_energy(c: &CosmosConfig, e: &EnergyModelParams) -> EnergyPerBit {
    let p = PublishedValues::default();
    let write = write_energy_per_bit(e, &c.geometry, &c.timing, &c.caps, &p).pj_per_bit.computed;
    let read = read_energy_per_bit(e, &c.geometry, &c.timing, &c.caps, &p).pj_per_bit.computed;
    EnergyPerBit { read_pj: read, write_pj: write, writeback_pj: write }
}

impl SystemConfig {
    pub fn cosmos(name: &str, geometry: ArrayGeometry) -> Self {
        let c = CosmosConfig {
            geometry,
            model: TransmissionModel::new(geometry.bits_per_cell),
            timing: TimingParams::cosmos(),
            caps: ParallelismCaps::reference(geometry.bits_per_cell),
            params: ControllerParams::default(),
        };
        Self {
            name: name.to_string(),
            energy: cosmos_energy(&c, &EnergyModelParams::default()),
            capacity_bytes: geometry.capacity_bytes(),
            backend: BackendConfig::Cosmos(c),
            max_writes_per_cell: 1e6,
            core_frequency_hz: 1e9,
            seed: 0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "cosmos-4bit" => Self::cosmos(name, ArrayGeometry::cosmos_4bit()),
            "cosmos-2bit" => Self::cosmos(name, ArrayGeometry::cosmos_2bit()),
            "cosmos-8bit" => Self::cosmos(name, ArrayGeometry::cosmos_8bit()),
            "epcm-2bit" => {
                let cell = EpcmCellParams::default();
                Self {
                    name: name.to_string(),
                    backend: BackendConfig::Epcm(EpcmParams::default()),
                    energy: EnergyPerBit {
                        read_pj: cell.read_energy_pj_per_bit,
                        write_pj: cell.write_energy_pj_per_bit,
                        writeback_pj: 0.0,
                    },
                    capacity_bytes: 1 << 31,
                    max_writes_per_cell: 1e6,
                    core_frequency_hz: 1e9,
                    seed: 0,
                }
            }
            "fixed-dram" => Self {
                name: name.to_string(),
                backend: BackendConfig::FixedDram { latency: ns(40.0), cacheline_bytes: 64 },
                energy: EnergyPerBit { read_pj: 40.0, write_pj: 40.0, writeback_pj: 0.0 },
                capacity_bytes: 1 << 31,
                max_writes_per_cell: 1e6,
                core_frequency_hz: 1e9,
                seed: 0,
            },
            _ => return None,
        })
    }

    pub fn kind(&self) -> BaselineKind {
        match self.backend {
            BackendConfig::Cosmos(_) => BaselineKind::Cosmos,
            BackendConfig::Epcm(_) => BaselineKind::Epcm,
            BackendConfig::FixedDram { .. } => BaselineKind::FixedDram,
        }
    }

    pub fn cacheline_bytes(&self) -> u32 {
        match &self.backend {
            BackendConfig::Cosmos(c) => c.geometry.cacheline_bytes,
            BackendConfig::Epcm(p) => p.cacheline_bytes,
            BackendConfig::FixedDram { cacheline_bytes, .. } => *cacheline_bytes,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        match &self.backend {
            BackendConfig::Cosmos(c) => {
                c.geometry.validate().map_err(|e| SimError::Config(e.to_string()))?;
                c.model.validate().map_err(|e| SimError::Config(e.to_string()))?;
                if c.model.bits_per_cell != c.geometry.bits_per_cell {
                    return bad("transmission model and geometry disagree on bits per cell".into());
                }
                c.timing.validate()?;
                c.params.validate()?;
                if c.caps.write_window_bits == 0 || c.caps.read_window_bits == 0 {
                    return bad("window sizes must be positive".into());
                }
            }
            BackendConfig::Epcm(p) => {
                if p.banks == 0 || p.cacheline_bytes == 0 || p.bus_bits == 0 || p.burst_length == 0 {
                    return bad("EPCM bank, line and bus parameters must be positive".into());
                }
            }
            BackendConfig::FixedDram { latency, cacheline_bytes } => {
                if *latency == 0 || *cacheline_bytes == 0 {
                    return bad("fixed latency and line size must be positive".into());
                }
            }
        }
        if !(self.max_writes_per_cell > 0.0 && self.core_frequency_hz > 0.0) {
            return bad("endurance and frequency must be positive".into());
        }
        Ok(())
    }
}

/// Hex SHA-256 of the canonical trace text.
pub fn trace_digest(requests: &[MemoryRequest]) -> String {
    trace::hex_string(&Sha256::digest(trace::write_trace(requests).as_bytes()))
}

/// Drives one backend with a request stream until nothing is outstanding.
/// Requests refused with a full queue wait, in order, and are offered again
/// after every backend event.
pub struct Simulation<B: Backend> {
    backend: B,
    events: EventQueue,
    requests: Vec<MemoryRequest>,
    stalled: VecDeque<usize>,
    completions: Vec<Completion>,
}

impl<B: Backend> Simulation<B> {
    pub fn new(backend: B, requests: Vec<MemoryRequest>) -> Self {
        let mut events = EventQueue::new();
        for (i, r) in requests.iter().enumerate() {
            events.schedule(r.arrival, EventKind::RequestArrival { request: i as u64 });
        }
        Self { backend, events, requests, stalled: VecDeque::new(), completions: Vec::new() }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn backend_mut(&mut self) -> &mut B {
        &mut self.backend
    }

    pub fn completions(&self) -> &[Completion] {
        &self.completions
    }

    pub fn now(&self) -> Picos {
        self.events.now()
    }

    pub fn events_dispatched(&self) -> u64 {
        self.events.dispatched()
    }

    fn offer(&mut self, idx: usize) -> bool {
        let now = self.events.now();
        let req = self.requests[idx].clone();
        match self.backend.accept(now, req, &mut self.events, &mut self.completions) {
            Ok(()) => true,
            Err(AcceptError::QueueFull) => false,
        }
    }

    fn retry_stalled(&mut self) {
        while let Some(&idx) = self.stalled.front() {
            if !self.offer(idx) {
                break;
            }
            self.stalled.pop_front();
        }
    }

    /// Dispatches one event; false once the event queue is empty.
    pub fn step(&mut self) -> bool {
        let Some(ev) = self.events.pop() else { return false };
        match ev.kind {
            EventKind::RequestArrival { request } => {
                let idx = request as usize;
                if !self.stalled.is_empty() || !self.offer(idx) {
                    self.stalled.push_back(idx);
                }
            }
            kind => {
                self.backend.handle(ev.time, kind, &mut self.events, &mut self.completions);
                self.retry_stalled();
            }
        }
        true
    }

    pub fn run_to_quiescence(&mut self) -> Result<(), SimError> {
        while self.step() {}
        if !self.stalled.is_empty() || !self.backend.is_quiescent() {
            return Err(SimError::Deadlock {
                time_ns: to_ns(self.events.now()),
                pending: self.stalled.len() + self.requests.len() - self.completions.len(),
            });
        }
        Ok(())
    }

    pub fn into_parts(self) -> (B, Vec<Completion>) {
        (self.backend, self.completions)
    }
}

pub struct RunOutput {
    pub report: StatsReport,
    pub completions: Vec<Completion>,
    /// Final cell array, for the COSMOS backend.
    pub array: Option<OpcmArray>,
}

fn screen(config: &SystemConfig, requests: &[MemoryRequest]) -> (Vec<MemoryRequest>, Vec<RejectedRequest>) {
    let line = config.cacheline_bytes() as u64;
    let mut ok = Vec::with_capacity(requests.len());
    let mut rejected = Vec::new();
    for r in requests {
        let verdict = r.check(line as usize).map_err(|e| e.to_string()).and_then(|()| match &config.backend {
            BackendConfig::Cosmos(c) => decode_address(r.address, &c.geometry).map(|_| ()).map_err(|e| e.to_string()),
            _ if r.address % line != 0 => Err(format!("address {:#x} is not line aligned", r.address)),
            _ if r.address >= config.capacity_bytes => Err(format!("address {:#x} is out of range", r.address)),
            _ => Ok(()),
        });
        match verdict {
            Ok(()) => ok.push(r.clone()),
            Err(reason) => rejected.push(RejectedRequest { request_id: r.id, reason }),
        }
    }
    (ok, rejected)
}

/// Runs `requests` through the configured backend to quiescence.
pub fn run(config: &SystemConfig, requests: &[MemoryRequest]) -> Result<RunOutput, SimError> {
    config.validate()?;
    let digest = trace_digest(requests);
    let (accepted, rejected) = screen(config, requests);
    let first_arrival = accepted.iter().map(|r| r.arrival).min();
    let line_bits = config.cacheline_bytes() as u64 * 8;

    let (completions, dispatched, busy, array, ctrl) = match &config.backend {
        BackendConfig::Cosmos(c) => {
            let controller = Controller::new(c.geometry, c.model, c.timing, c.caps, c.params)?;
            let mut sim = Simulation::new(controller, accepted);
            sim.run_to_quiescence()?;
            let dispatched = sim.events_dispatched();
            let (controller, completions) = sim.into_parts();
            let busy = controller.bank_busy_time();
            let stats = controller.stats();
            (completions, dispatched, busy, Some(controller.array().clone()), Some(stats))
        }
        BackendConfig::Epcm(p) => {
            let mut sim = Simulation::new(EpcmBackend::new(*p), accepted);
            sim.run_to_quiescence()?;
            let dispatched = sim.events_dispatched();
            let (b, completions) = sim.into_parts();
            (completions, dispatched, b.bank_busy_time().to_vec(), None, None)
        }
        BackendConfig::FixedDram { latency, cacheline_bytes } => {
            let mut sim = Simulation::new(FixedDramBackend::new(*latency, *cacheline_bytes as usize), accepted);
            sim.run_to_quiescence()?;
            let dispatched = sim.events_dispatched();
            let (_, completions) = sim.into_parts();
            (completions, dispatched, Vec::new(), None, None)
        }
    };

    let t = Traffic::from_completions(&completions, first_arrival);
    let line_bytes = config.cacheline_bytes() as u64;
    let e = &config.energy;
    let (array_reads, array_writes, writebacks) = match &ctrl {
        Some(s) => (s.array_reads, s.array_writes, s.writebacks_completed),
        None => (t.reads, t.writes, 0),
    };
    let nj = |ops: u64, pj: f64| ops as f64 * line_bits as f64 * pj / 1000.0;
    let per_bit = |nj: f64, ops: u64| if ops == 0 { 0.0 } else { nj * 1000.0 / (ops * line_bits) as f64 };
    let read_nj = nj(array_reads, e.read_pj);
    let write_nj = nj(array_writes, e.write_pj);
    let writeback_nj = nj(writebacks, e.writeback_pj);
    let total_nj = read_nj + write_nj + writeback_nj;
    let energy = EnergyBreakdown {
        read_nj,
        write_nj,
        writeback_nj,
        total_nj,
        read_pj_per_bit: per_bit(read_nj, t.reads),
        write_pj_per_bit: per_bit(write_nj, t.writes),
        writeback_pj_per_bit: per_bit(writeback_nj, writebacks),
        pj_per_bit: per_bit(total_nj, t.reads + t.writes),
    };

    let bytes = (t.reads + t.writes) * line_bytes;
    let lifetime = if config.kind() == BaselineKind::FixedDram || bytes == 0 || t.span == 0 {
        None
    } else {
        let cycles = to_ns(t.span) * config.core_frequency_hz / 1e9;
        lifetime_years(&LifetimeParams {
            size_bytes: config.capacity_bytes as f64,
            max_writes_per_cell: config.max_writes_per_cell,
            bytes_per_cycle: bytes as f64 / cycles,
            frequency_hz: config.core_frequency_hz,
        })
        .ok()
    };
    let utilization = busy
        .iter()
        .map(|&b| if t.span == 0 { 0.0 } else { b as f64 / t.span as f64 })
        .collect();
    let holding_capacity = match &config.backend {
        BackendConfig::Cosmos(c) => Some(c.params.holding_capacity),
        _ => None,
    };

    let report = StatsReport {
        config: config.name.clone(),
        backend: config.kind().label().to_string(),
        trace_digest: digest,
        requests: requests.len() as u64,
        reads: requests.iter().filter(|r| r.op == Op::Read).count() as u64,
        writes: requests.iter().filter(|r| r.op == Op::Write).count() as u64,
        completed: completions.len() as u64,
        rejected,
        span_ns: to_ns(t.span),
        read_throughput_gbps: gbps(t.reads * line_bytes, t.span),
        write_throughput_gbps: gbps(t.writes * line_bytes, t.span),
        throughput_gbps: gbps(bytes, t.span),
        avg_read_latency_ns: mean_ns(t.read_latency_sum, t.reads),
        avg_write_latency_ns: mean_ns(t.write_latency_sum, t.writes),
        avg_memory_latency_ns: mean_ns(t.read_latency_sum + t.write_latency_sum, t.reads + t.writes),
        max_read_latency_ns: to_ns(t.max_read),
        max_write_latency_ns: to_ns(t.max_write),
        energy,
        holding_buffer_high_water: ctrl.as_ref().map(|s| s.holding_high_water),
        holding_buffer_capacity: holding_capacity,
        wear: array.as_ref().map(OpcmArray::wear_summary),
        lifetime_years: lifetime,
        bank_utilization: utilization,
        controller: ctrl,
        events_dispatched: dispatched,
    };
    Ok(RunOutput { report, completions, array })
}
