#![allow(dead_code)]

use std::collections::HashMap;

use cosmos_sim::controller::{
    Controller, ControllerParams, ControllerStats, IssueKind, MemoryRequest, Op, ParallelismCaps, TimingParams,
};
use cosmos_sim::device::TransmissionModel;
use cosmos_sim::engine::{ns, Completion, Picos};
use cosmos_sim::geometry::{decode_address, ArrayGeometry};
use cosmos_sim::sim::Simulation;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every valid geometry with 4x4-cell tiles, 2x2 tiles per bank and 2 banks.
pub fn small_geometries() -> Vec<ArrayGeometry> {
    let mut out = Vec::new();
    for g in [1u32, 2] {
        for b in [1u32, 2, 4, 8] {
            let bits = g * 4 * b;
            if bits % 8 != 0 {
                continue;
            }
            let geom = ArrayGeometry {
                bits_per_cell: b,
                cells_per_tile_side: 4,
                tile_rows_per_bank: 2,
                tile_cols_per_bank: 2,
                bank_count: 2,
                banks_per_cacheline: g,
                cacheline_bytes: bits / 8,
            };
            geom.validate().expect("small geometry is valid");
            out.push(geom);
        }
    }
    out
}

pub fn controller(geom: ArrayGeometry, caps: ParallelismCaps, params: ControllerParams) -> Controller {
    Controller::new(geom, TransmissionModel::new(geom.bits_per_cell), TimingParams::cosmos(), caps, params)
        .expect("valid controller")
}

pub fn line_addresses(geom: &ArrayGeometry, lines: u64) -> Vec<u64> {
    let lines = lines.min(geom.line_count());
    (0..lines).map(|i| i * geom.cacheline_bytes as u64).collect()
}

/// Randomized request stream with deliberate same-line pairs (RAR, WAR, WAW,
/// RAW) and bursts of reads over distinct lines to overflow the holding buffer.
pub fn hazard_trace(geom: &ArrayGeometry, len: usize, working_lines: u64, seed: u64) -> Vec<MemoryRequest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lines = line_addresses(geom, working_lines);
    let line_bytes = geom.cacheline_bytes as usize;
    let mut out: Vec<MemoryRequest> = Vec::with_capacity(len);
    let mut t: Picos = 0;
    let push = |out: &mut Vec<MemoryRequest>, t: Picos, op: Op, addr: u64, rng: &mut ChaCha8Rng| {
        let id = out.len() as u64;
        out.push(match op {
            Op::Read => MemoryRequest::read(id, t, addr),
            Op::Write => {
                let mut data = vec![0u8; line_bytes];
                rng.fill(&mut data[..]);
                MemoryRequest::write(id, t, addr, data)
            }
        });
    };
    while out.len() < len {
        let addr = *lines.choose(&mut rng).unwrap();
        let choice = rng.gen_range(0..10);
        let gap = |rng: &mut ChaCha8Rng| match rng.gen_range(0..10) {
            0 => ns(200.0),
            1..=3 => 0,
            _ => rng.gen_range(0..ns(40.0)),
        };
        match choice {
            0..=3 => {
                let op = if rng.gen_bool(0.5) { Op::Read } else { Op::Write };
                push(&mut out, t, op, addr, &mut rng);
            }
            4..=7 => {
                let (a, b) = [(Op::Read, Op::Read), (Op::Write, Op::Read), (Op::Write, Op::Write), (Op::Read, Op::Write)]
                    [choice - 4];
                push(&mut out, t, a, addr, &mut rng);
                t += gap(&mut rng);
                push(&mut out, t, b, addr, &mut rng);
            }
            _ => {
                // distinct-line read burst
                let mut burst = lines.clone();
                burst.shuffle(&mut rng);
                for &a in burst.iter().take(24) {
                    push(&mut out, t, Op::Read, a, &mut rng);
                    t += rng.gen_range(0..ns(2.0));
                }
            }
        }
        t += gap(&mut rng);
    }
    out.truncate(len);
    out
}

pub struct OracleOutcome {
    pub data_mismatches: usize,
    pub array_mismatches: usize,
    pub completions: usize,
    pub stats: ControllerStats,
}

/// Runs `requests` to quiescence and checks every read and the final array
/// against a map replaying the same requests in arrival order.
pub fn check_against_golden(ctrl: Controller, requests: &[MemoryRequest]) -> OracleOutcome {
    let geom = *ctrl.geometry();
    let zero = vec![0u8; geom.cacheline_bytes as usize];
    let mut golden: HashMap<u64, Vec<u8>> = HashMap::new();
    let mut expected: HashMap<u64, Vec<u8>> = HashMap::new();
    for r in requests {
        match r.op {
            Op::Read => {
                expected.insert(r.id, golden.get(&r.address).unwrap_or(&zero).clone());
            }
            Op::Write => {
                golden.insert(r.address, r.data.clone().unwrap());
            }
        }
    }
    let mut sim = Simulation::new(ctrl, requests.to_vec());
    sim.run_to_quiescence().expect("reaches quiescence");
    let (ctrl, completions) = sim.into_parts();
    let data_mismatches = completions
        .iter()
        .filter(|c: &&Completion| c.op == Op::Read)
        .filter(|c| c.data.as_ref() != expected.get(&c.request_id))
        .count();
    let mut array_mismatches = 0;
    let touched: std::collections::BTreeSet<u64> = requests.iter().map(|r| r.address).collect();
    for addr in touched {
        let d = decode_address(addr, &geom).unwrap();
        if &ctrl.array().peek_line(&d) != golden.get(&addr).unwrap_or(&zero) {
            array_mismatches += 1;
        }
    }
    OracleOutcome { data_mismatches, array_mismatches, completions: completions.len(), stats: ctrl.stats() }
}

pub struct OracleSegment {
    pub label: &'static str,
    pub geometry: ArrayGeometry,
    pub holding_capacity: usize,
    pub working_lines: u64,
}

/// The mix used for the 10^5-operation integrity suite.
pub fn oracle_segments() -> Vec<OracleSegment> {
    let small = small_geometries().into_iter().find(|g| g.bits_per_cell == 4 && g.banks_per_cacheline == 2).unwrap();
    vec![
        OracleSegment { label: "4-bit, 16-entry buffer", geometry: ArrayGeometry::cosmos_4bit(), holding_capacity: 16, working_lines: 48 },
        OracleSegment { label: "4-bit, 2-entry buffer", geometry: ArrayGeometry::cosmos_4bit(), holding_capacity: 2, working_lines: 32 },
        OracleSegment { label: "8-bit, 4-entry buffer", geometry: ArrayGeometry::cosmos_8bit(), holding_capacity: 4, working_lines: 64 },
        OracleSegment { label: "small array, 1-entry buffer", geometry: small, holding_capacity: 1, working_lines: 16 },
    ]
}

pub fn run_segment(seg: &OracleSegment, ops: usize, seed: u64) -> OracleOutcome {
    let params = ControllerParams { holding_capacity: seg.holding_capacity, ..ControllerParams::default() };
    let ctrl = controller(seg.geometry, ParallelismCaps::reference(seg.geometry.bits_per_cell), params);
    let trace = hazard_trace(&seg.geometry, ops, seg.working_lines, seed);
    check_against_golden(ctrl, &trace)
}

/// Steps a hazard trace event by event and checks the controller protocol:
/// buffer occupancy, window limits, amorphized buffered rows, high-water
/// reporting and E-O-E issue spacing. Returns the high-water mark.
pub fn check_protocol(
    geom: ArrayGeometry,
    caps: ParallelismCaps,
    holding: usize,
    queue: usize,
    len: usize,
    seed: u64,
) -> Result<usize, String> {
    let params = ControllerParams {
        holding_capacity: holding,
        queue_capacity: queue,
        record_issues: true,
        ..ControllerParams::default()
    };
    let line_bits = geom.cacheline_bits() as f64;
    let trace = hazard_trace(&geom, len, geom.line_count(), seed);
    let mut sim = Simulation::new(controller(geom, caps, params), trace);
    let mut observed_max = 0;
    let zero = vec![0u8; geom.cacheline_bytes as usize];
    macro_rules! ensure {
        ($cond:expr, $($msg:tt)+) => {
            let ok: bool = $cond;
            if !ok {
                return Err(format!($($msg)+));
            }
        };
    }
    while sim.step() {
        let now = sim.now();
        let c = sim.backend();
        let hb = c.holding_buffer();
        ensure!(hb.len() + hb.reserved() <= holding, "{geom}: buffer over capacity at {now}");
        observed_max = observed_max.max(hb.len());
        ensure!(
            c.in_flight_write_bits(now) <= (caps.write_window_bits as f64).max(line_bits) + 1e-9,
            "{geom}: write window exceeded at {now}"
        );
        ensure!(
            c.in_flight_read_bits(now) <= (caps.read_window_bits as f64).max(line_bits) + 1e-9,
            "{geom}: read window exceeded at {now}"
        );
        // a buffered line is amorphized in the array until written back
        for e in hb.entries() {
            let d = decode_address(e.address, &geom).unwrap();
            ensure!(c.array().peek_line(&d) == zero, "{geom}: buffered line {:#x} not amorphized", e.address);
        }
    }
    ensure!(sim.backend().holding_buffer().is_empty(), "{geom}: buffer not drained");
    let stats = sim.backend().stats();
    ensure!(stats.holding_high_water == observed_max, "high water {} but observed {observed_max}", stats.holding_high_water);
    ensure!(stats.holding_high_water <= holding, "high water above capacity");

    let t_eoe = sim.backend().timing().t_eoe;
    let log = sim.backend().issue_log();
    ensure!(log.len() as u64 == stats.issue_events, "issue log incomplete");
    for w in log.windows(2) {
        ensure!(w[1].time - w[0].time >= t_eoe, "issues at {} and {}", w[0].time, w[1].time);
    }
    if let Some(m) = stats.min_issue_spacing {
        ensure!(m >= t_eoe, "minimum spacing {m} below t_EOE");
    }
    let writebacks = log
        .iter()
        .filter(|r| matches!(r.kind, IssueKind::ForcedWriteback | IssueKind::OpportunisticWriteback))
        .count() as u64;
    ensure!(writebacks == stats.writebacks_completed, "writeback count mismatch");
    Ok(observed_max)
}
