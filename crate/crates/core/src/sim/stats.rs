//! Run statistics and cross-backend comparison.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::array::WearReport;
use crate::controller::{ControllerStats, Op};
use crate::engine::{to_ns, Completion, Picos};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub read_nj: f64,
    pub write_nj: f64,
    pub writeback_nj: f64,
    pub total_nj: f64,
    /// Per bit delivered to or from the requester.
    pub read_pj_per_bit: f64,
    pub write_pj_per_bit: f64,
    pub writeback_pj_per_bit: f64,
    pub pj_per_bit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRequest {
    pub request_id: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub config: String,
    pub backend: String,
    pub trace_digest: String,
    pub requests: u64,
    pub reads: u64,
    pub writes: u64,
    pub completed: u64,
    pub rejected: Vec<RejectedRequest>,
    pub span_ns: f64,
    pub read_throughput_gbps: f64,
    pub write_throughput_gbps: f64,
    pub throughput_gbps: f64,
    pub avg_read_latency_ns: f64,
    pub avg_write_latency_ns: f64,
    pub avg_memory_latency_ns: f64,
    pub max_read_latency_ns: f64,
    pub max_write_latency_ns: f64,
    pub energy: EnergyBreakdown,
    pub holding_buffer_high_water: Option<usize>,
    pub holding_buffer_capacity: Option<usize>,
    pub controller: Option<ControllerStats>,
    pub wear: Option<WearReport>,
    pub lifetime_years: Option<f64>,
    pub bank_utilization: Vec<f64>,
    pub events_dispatched: u64,
}

/// Latency and throughput figures derived from a set of completions.
pub(crate) struct Traffic {
    pub reads: u64,
    pub writes: u64,
    pub span: Picos,
    pub read_latency_sum: Picos,
    pub write_latency_sum: Picos,
    pub max_read: Picos,
    pub max_write: Picos,
}

impl Traffic {
    pub fn from_completions(completions: &[Completion], first_arrival: Option<Picos>) -> Self {
        let mut t = Traffic {
            reads: 0,
            writes: 0,
            span: 0,
            read_latency_sum: 0,
            write_latency_sum: 0,
            max_read: 0,
            max_write: 0,
        };
        let mut last = 0;
        for c in completions {
            let lat = c.completion - c.arrival;
            match c.op {
                Op::Read => {
                    t.reads += 1;
                    t.read_latency_sum += lat;
                    t.max_read = t.max_read.max(lat);
                }
                Op::Write => {
                    t.writes += 1;
                    t.write_latency_sum += lat;
                    t.max_write = t.max_write.max(lat);
                }
            }
            last = last.max(c.completion);
        }
        t.span = first_arrival.map_or(0, |f| last.saturating_sub(f));
        t
    }
}

pub(crate) fn mean_ns(sum: Picos, count: u64) -> f64 {
    if count == 0 {
        0.0
    } else {
        to_ns(sum) / count as f64
    }
}

/// Bytes per nanosecond is GB/s.
pub(crate) fn gbps(bytes: u64, span: Picos) -> f64 {
    if span == 0 {
        0.0
    } else {
        bytes as f64 / to_ns(span)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

impl StatsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut rows: Vec<(&str, String)> = vec![
            ("config", self.config.clone()),
            ("backend", self.backend.clone()),
            ("trace digest", self.trace_digest.clone()),
            ("requests", self.requests.to_string()),
            ("reads / writes", format!("{} / {}", self.reads, self.writes)),
            ("completed", self.completed.to_string()),
            ("rejected", self.rejected.len().to_string()),
            ("span (ns)", format!("{:.3}", self.span_ns)),
            ("read throughput (GB/s)", format!("{:.4}", self.read_throughput_gbps)),
            ("write throughput (GB/s)", format!("{:.4}", self.write_throughput_gbps)),
            ("throughput (GB/s)", format!("{:.4}", self.throughput_gbps)),
            ("avg read latency (ns)", format!("{:.3}", self.avg_read_latency_ns)),
            ("avg write latency (ns)", format!("{:.3}", self.avg_write_latency_ns)),
            ("avg memory latency (ns)", format!("{:.3}", self.avg_memory_latency_ns)),
            ("max read latency (ns)", format!("{:.3}", self.max_read_latency_ns)),
            ("max write latency (ns)", format!("{:.3}", self.max_write_latency_ns)),
            ("energy read / write / writeback (nJ)", format!(
                "{:.3} / {:.3} / {:.3}",
                self.energy.read_nj, self.energy.write_nj, self.energy.writeback_nj
            )),
            ("energy total (nJ)", format!("{:.3}", self.energy.total_nj)),
            ("energy per bit (pJ/bit)", format!("{:.4}", self.energy.pj_per_bit)),
        ];
        if let (Some(hw), Some(cap)) = (self.holding_buffer_high_water, self.holding_buffer_capacity) {
            rows.push(("holding buffer high water", format!("{hw} / {cap}")));
        }
        if let Some(w) = &self.wear {
            rows.push(("max writes per cell", w.max_writes_per_cell.to_string()));
            rows.push(("total cell writes", w.total_cell_writes.to_string()));
        }
        rows.push(("lifetime (years)", opt(self.lifetime_years)));
        if !self.bank_utilization.is_empty() {
            let u: Vec<String> = self.bank_utilization.iter().map(|u| format!("{u:.3}")).collect();
            rows.push(("bank utilization", u.join(" ")));
        }
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut s = String::new();
        for (k, v) in rows {
            writeln!(s, "{k:<width$}  {v}").unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub baseline: String,
    pub other: String,
    /// `other / baseline`; `None` when the baseline figure is zero.
    pub throughput_ratio: Option<f64>,
    pub read_throughput_ratio: Option<f64>,
    pub write_throughput_ratio: Option<f64>,
    pub latency_ratio: Option<f64>,
    pub energy_ratio: Option<f64>,
    /// Directional expectation checked for this pair, if any.
    pub expectation: Option<String>,
    pub expectation_met: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub trace_digest: String,
    pub rows: Vec<ComparisonRow>,
}

fn ratio(other: f64, base: f64) -> Option<f64> {
    (base != 0.0).then(|| other / base)
}

/// Pairwise ratios for every ordered pair `(i, j)` with `i < j`.
pub fn compare(reports: &[StatsReport]) -> Result<Comparison, SimError> {
    if reports.len() < 2 {
        return Err(SimError::Config("compare needs at least two reports".into()));
    }
    let digest = &reports[0].trace_digest;
    if let Some(r) = reports.iter().find(|r| &r.trace_digest != digest) {
        return Err(SimError::TraceMismatch { left: reports[0].config.clone(), right: r.config.clone() });
    }
    let mut rows = Vec::new();
    for (i, a) in reports.iter().enumerate() {
        for b in &reports[i + 1..] {
            let latency_ratio = ratio(b.avg_memory_latency_ns, a.avg_memory_latency_ns);
            let (expectation, met) = match (a.backend.as_str(), b.backend.as_str()) {
                ("COSMOS", "EPCM") => (
                    Some("COSMOS latency below EPCM".to_string()),
                    latency_ratio.map(|r| r > 1.0),
                ),
                ("EPCM", "COSMOS") => (
                    Some("COSMOS latency below EPCM".to_string()),
                    latency_ratio.map(|r| r < 1.0),
                ),
                _ => (None, None),
            };
            rows.push(ComparisonRow {
                baseline: a.config.clone(),
                other: b.config.clone(),
                throughput_ratio: ratio(b.throughput_gbps, a.throughput_gbps),
                read_throughput_ratio: ratio(b.read_throughput_gbps, a.read_throughput_gbps),
                write_throughput_ratio: ratio(b.write_throughput_gbps, a.write_throughput_gbps),
                latency_ratio,
                energy_ratio: ratio(b.energy.total_nj, a.energy.total_nj),
                expectation,
                expectation_met: met,
            });
        }
    }
    Ok(Comparison { trace_digest: digest.clone(), rows })
}

impl Comparison {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<16} {:<16} {:>10} {:>10} {:>10} {:>10} {:>10}  expectation",
            "baseline", "other", "thru", "read", "write", "latency", "energy"
        )
        .unwrap();
        for r in &self.rows {
            let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
            let exp = match (&r.expectation, r.expectation_met) {
                (Some(e), Some(true)) => format!("{e}: met"),
                (Some(e), Some(false)) => format!("{e}: NOT met"),
                (Some(e), None) => format!("{e}: n/a"),
                _ => String::new(),
            };
            writeln!(
                s,
                "{:<16} {:<16} {:>10} {:>10} {:>10} {:>10} {:>10}  {exp}",
                r.baseline,
                r.other,
                f(r.throughput_ratio),
                f(r.read_throughput_ratio),
                f(r.write_throughput_ratio),
                f(r.latency_ratio),
                f(r.energy_ratio),
            )
            .unwrap();
        }
        s
    }
}
