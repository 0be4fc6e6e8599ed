//! Text traces and synthetic trace generation.
//!
//! One request per line: `<time_ns> <R|W> <hex_address> [<hex_data>]`.
//! Lines starting with `#` are comments. Times may carry up to three
//! decimals (picosecond resolution). A write without data receives a
//! payload derived from the seed and its line number.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::controller::{MemoryRequest, Op};
use crate::engine::{Picos, PS_PER_NS};
use crate::geometry::ArrayGeometry;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown trace pattern `{0}` (SATURATE_W, SATURATE_R, MIXED(<fraction>), RANDOM)")]
    UnknownPattern(String),
    #[error("trace length must be positive")]
    EmptyTrace,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedTrace {
    pub requests: Vec<MemoryRequest>,
    pub warnings: Vec<String>,
}

fn parse_time(s: &str) -> Result<Picos, String> {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || !(frac.is_empty() || digits(frac)) {
        return Err(format!("bad time `{s}`"));
    }
    if frac.len() > 3 {
        return Err(format!("time `{s}` is finer than a picosecond"));
    }
    let whole: u64 = int.parse().map_err(|_| format!("time `{s}` out of range"))?;
    let frac_ps: u64 = if frac.is_empty() { 0 } else { format!("{frac:0<3}").parse().unwrap() };
    whole
        .checked_mul(PS_PER_NS)
        .and_then(|p| p.checked_add(frac_ps))
        .ok_or_else(|| format!("time `{s}` out of range"))
}

fn format_time(ps: Picos) -> String {
    let (whole, frac) = (ps / PS_PER_NS, ps % PS_PER_NS);
    if frac == 0 {
        whole.to_string()
    } else {
        format!("{whole}.{frac:03}").trim_end_matches('0').to_string()
    }
}

fn parse_hex_bytes(s: &str) -> Result<Vec<u8>, String> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    if !s.len().is_multiple_of(2) {
        return Err("data has an odd number of hex digits".into());
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(|_| format!("bad hex data near `{}`", &s[i..i + 2])))
        .collect()
}

pub fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Payload used for writes that carry no data.
pub fn fill_payload(seed: u64, index: u64, len: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut data = vec![0u8; len];
    rng.fill_bytes(&mut data);
    data
}

/// Parses a trace. Requests are returned sorted by arrival; ids follow line order.
pub fn load_trace(text: &str, cacheline_bytes: usize, seed: u64) -> Result<LoadedTrace, TraceError> {
    let mut out = LoadedTrace::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| TraceError::Parse { line: i + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(err(format!("expected 3 or 4 fields, got {}", fields.len())));
        }
        let arrival = parse_time(fields[0]).map_err(err)?;
        let op = match fields[1] {
            "R" | "r" => Op::Read,
            "W" | "w" => Op::Write,
            other => return Err(err(format!("operation must be R or W, got `{other}`"))),
        };
        let addr_txt = fields[2].strip_prefix("0x").or_else(|| fields[2].strip_prefix("0X")).unwrap_or(fields[2]);
        let address = u64::from_str_radix(addr_txt, 16).map_err(|_| err(format!("bad address `{}`", fields[2])))?;
        let id = out.requests.len() as u64;
        let data = match (op, fields.get(3)) {
            (Op::Read, Some(_)) => return Err(err("read carries data".into())),
            (Op::Read, None) => None,
            (Op::Write, Some(hex)) => {
                let d = parse_hex_bytes(hex).map_err(err)?;
                if d.len() != cacheline_bytes {
                    return Err(err(format!("data is {} bytes, cache line is {cacheline_bytes}", d.len())));
                }
                Some(d)
            }
            (Op::Write, None) => Some(fill_payload(seed, (i + 1) as u64, cacheline_bytes)),
        };
        out.requests.push(MemoryRequest { id, arrival, op, address, data });
    }
    if let Some(pos) = out.requests.windows(2).position(|w| w[1].arrival < w[0].arrival) {
        out.warnings.push(format!(
            "arrival times are not monotonic (request {} precedes its predecessor); sorted stably",
            pos + 1
        ));
        out.requests.sort_by_key(|r| r.arrival);
    }
    Ok(out)
}

pub fn write_trace(requests: &[MemoryRequest]) -> String {
    let mut s = String::new();
    for r in requests {
        let op = match r.op {
            Op::Read => 'R',
            Op::Write => 'W',
        };
        write!(s, "{} {op} {:#x}", format_time(r.arrival), r.address).unwrap();
        if let Some(d) = &r.data {
            write!(s, " {}", hex_string(d)).unwrap();
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TracePattern {
    SaturateWrite,
    SaturateRead,
    Mixed { read_fraction: f64 },
    Random,
}

impl FromStr for TracePattern {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        match up.as_str() {
            "SATURATE_W" => return Ok(TracePattern::SaturateWrite),
            "SATURATE_R" => return Ok(TracePattern::SaturateRead),
            "RANDOM" => return Ok(TracePattern::Random),
            _ => {}
        }
        let frac = up
            .strip_prefix("MIXED(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|f| f.trim().parse::<f64>().ok())
            .filter(|f| (0.0..=1.0).contains(f))
            .ok_or_else(|| TraceError::UnknownPattern(s.to_string()))?;
        Ok(TracePattern::Mixed { read_fraction: frac })
    }
}

/// Knobs for synthetic traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenOptions {
    /// Spacing between arrivals for MIXED and RANDOM.
    pub gap: Picos,
    /// Distinct lines touched by MIXED.
    pub working_set_lines: u64,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self { gap: 200 * PS_PER_NS, working_set_lines: 4096 }
    }
}

/// Deterministic synthetic trace for `geom`.
pub fn gen_trace(
    pattern: TracePattern,
    length: usize,
    seed: u64,
    geom: &ArrayGeometry,
    opts: &GenOptions,
) -> Result<Vec<MemoryRequest>, TraceError> {
    if length == 0 {
        return Err(TraceError::EmptyTrace);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let line = geom.cacheline_bytes as u64;
    let lines = geom.line_count();
    let payload = |rng: &mut ChaCha8Rng| {
        let mut d = vec![0u8; line as usize];
        rng.fill_bytes(&mut d);
        d
    };
    let mut out = Vec::with_capacity(length);
    match pattern {
        TracePattern::SaturateWrite | TracePattern::SaturateRead => {
            for i in 0..length as u64 {
                let address = (i % lines) * line;
                out.push(if pattern == TracePattern::SaturateWrite {
                    MemoryRequest::write(i, 0, address, payload(&mut rng))
                } else {
                    MemoryRequest::read(i, 0, address)
                });
            }
        }
        TracePattern::Mixed { read_fraction } => {
            let reads = (read_fraction * length as f64).round() as usize;
            let mut ops: Vec<Op> = (0..length).map(|i| if i < reads { Op::Read } else { Op::Write }).collect();
            rand::seq::SliceRandom::shuffle(&mut ops[..], &mut rng);
            let ws = opts.working_set_lines.clamp(1, lines);
            for (i, op) in ops.into_iter().enumerate() {
                let address = rng.gen_range(0..ws) * line;
                let t = i as u64 * opts.gap;
                out.push(match op {
                    Op::Read => MemoryRequest::read(i as u64, t, address),
                    Op::Write => MemoryRequest::write(i as u64, t, address, payload(&mut rng)),
                });
            }
        }
        TracePattern::Random => {
            for i in 0..length as u64 {
                let address = rng.gen_range(0..lines) * line;
                let t = i * opts.gap;
                out.push(if rng.gen_bool(0.5) {
                    MemoryRequest::read(i, t, address)
                } else {
                    MemoryRequest::write(i, t, address, payload(&mut rng))
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_write() {
        let data = "aa".repeat(64);
        let t = load_trace(&format!("# c\n100 W 0x1000 {data}\n"), 64, 0).unwrap();
        assert_eq!(t.requests.len(), 1);
        let r = &t.requests[0];
        assert_eq!((r.arrival, r.op, r.address), (100_000, Op::Write, 0x1000));
        assert_eq!(r.data.as_deref(), Some(&[0xAA; 64][..]));
    }

    #[test]
    fn empty_and_malformed() {
        assert!(load_trace("", 64, 0).unwrap().requests.is_empty());
        let e = load_trace("0 R 0x0\n5 X 0x40\n", 64, 0).unwrap_err();
        assert_eq!(e, TraceError::Parse { line: 2, msg: "operation must be R or W, got `X`".into() });
        assert!(matches!(load_trace("1.0005 R 0x0", 64, 0), Err(TraceError::Parse { line: 1, .. })));
        assert!(load_trace("1 W 0x0 abcd", 64, 0).is_err());
        assert!(load_trace("1 R 0x0 abcd", 64, 0).is_err());
    }

    #[test]
    fn missing_data_is_seeded() {
        let a = load_trace("0 W 0x40\n", 64, 7).unwrap();
        let b = load_trace("0 W 0x40\n", 64, 7).unwrap();
        let c = load_trace("0 W 0x40\n", 64, 8).unwrap();
        assert_eq!(a.requests, b.requests);
        assert_ne!(a.requests[0].data, c.requests[0].data);
    }

    #[test]
    fn non_monotonic_times_warn_and_sort_stably() {
        let t = load_trace("10 R 0x0\n5 R 0x40\n5 R 0x80\n", 64, 0).unwrap();
        assert_eq!(t.warnings.len(), 1);
        let ids: Vec<u64> = t.requests.iter().map(|r| r.id).collect();
        assert_eq!(ids, vec![1, 2, 0]);
    }

    #[test]
    fn time_formatting() {
        assert_eq!(format_time(100_000), "100");
        assert_eq!(format_time(100_500), "100.5");
        assert_eq!(format_time(7), "0.007");
        assert_eq!(parse_time("0.007").unwrap(), 7);
        assert_eq!(parse_time("12.5").unwrap(), 12_500);
    }

    #[test]
    fn pattern_names() {
        assert_eq!("saturate_w".parse::<TracePattern>().unwrap(), TracePattern::SaturateWrite);
        assert_eq!("MIXED(0.67)".parse::<TracePattern>().unwrap(), TracePattern::Mixed { read_fraction: 0.67 });
        assert!("MIXED(2)".parse::<TracePattern>().is_err());
        assert!("burst".parse::<TracePattern>().is_err());
    }

    #[test]
    fn saturating_writes_share_time_zero() {
        let g = ArrayGeometry::cosmos_4bit();
        let t = gen_trace(TracePattern::SaturateWrite, 3, 1, &g, &GenOptions::default()).unwrap();
        assert!(t.iter().all(|r| r.arrival == 0 && r.op == Op::Write));
        let mut addrs: Vec<u64> = t.iter().map(|r| r.address).collect();
        addrs.dedup();
        assert_eq!(addrs.len(), 3);
    }

    #[test]
    fn generation_is_deterministic_and_exact() {
        let g = ArrayGeometry::cosmos_4bit();
        let o = GenOptions::default();
        let p = TracePattern::Mixed { read_fraction: 0.67 };
        let a = write_trace(&gen_trace(p, 10_000, 3, &g, &o).unwrap());
        let b = write_trace(&gen_trace(p, 10_000, 3, &g, &o).unwrap());
        assert_eq!(a, b);
        let reads = gen_trace(p, 10_000, 3, &g, &o).unwrap().iter().filter(|r| r.op == Op::Read).count();
        assert_eq!(reads, 6700);
        assert_eq!(gen_trace(p, 0, 3, &g, &o), Err(TraceError::EmptyTrace));
    }

    #[test]
    fn round_trip() {
        let g = ArrayGeometry::cosmos_4bit();
        let t = gen_trace(TracePattern::Random, 2_000, 9, &g, &GenOptions { gap: 1_234, ..Default::default() }).unwrap();
        let back = load_trace(&write_trace(&t), 64, 0).unwrap();
        assert!(back.warnings.is_empty());
        assert_eq!(back.requests, t);
    }
}
