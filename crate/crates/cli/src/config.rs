//! Sectioned `key = value` run configuration.
//!
//! A `[system] preset` selects the starting point; every other key overrides
//! one value of it. Keys carry their unit in the name where one applies.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use cosmos_sim::controller::{ParallelismCaps, TimingParams};
use cosmos_sim::device::TransmissionModel;
use cosmos_sim::engine::ns;
use cosmos_sim::geometry::{validate_geometry, ArrayGeometry};
use cosmos_sim::optics::{AreaModelParams, DensityBasis, EnergyModelParams, PublishedValues};
use cosmos_sim::sim::{cosmos_energy, BackendConfig, SystemConfig, PRESETS};

/// (section, key, unit, meaning)
pub const KEYS: &[(&str, &str, &str, &str)] = &[
    ("system", "preset", "name", "starting point: cosmos-4bit, cosmos-2bit, cosmos-8bit, epcm-2bit, fixed-dram"),
    ("system", "name", "text", "report name (defaults to the preset)"),
    ("system", "seed", "integer", "seed for filled write payloads and read noise"),
    ("geometry", "bits_per_cell", "bits", "levels per cell are 2^bits"),
    ("geometry", "cells_per_tile_side", "cells", "tile is n x n cells"),
    ("geometry", "tile_rows_per_bank", "tiles", "tile rows in a bank"),
    ("geometry", "tile_cols_per_bank", "tiles", "tile columns in a bank"),
    ("geometry", "bank_count", "banks", "banks in the array"),
    ("geometry", "banks_per_cacheline", "banks", "banks a cache line is spread over"),
    ("geometry", "cacheline_bytes", "bytes", "cache line size"),
    ("geometry", "capacity_bytes", "bytes", "optional cross-check of the computed capacity"),
    ("timing", "t_set_ns", "ns", "SET (write) pulse"),
    ("timing", "t_reset_ns", "ns", "RESET pulse"),
    ("timing", "t_read_ns", "ns", "read sensing"),
    ("timing", "t_burst_ns", "ns", "bus burst"),
    ("timing", "t_eoe_ns", "ns", "electrical-optical conversion and issue spacing"),
    ("caps", "write_window_cells", "cells per t_set", "cells that may be written per SET period"),
    ("caps", "read_window_cells", "cells per t_read", "cells that may be read per read period"),
    ("controller", "holding_buffer_lines", "lines", "holding buffer slots"),
    ("controller", "queue_depth", "requests", "front-end queue depth"),
    ("controller", "ratio_tolerance", "fraction", "allowed excess of a read ratio above 1"),
    ("controller", "read_noise", "fraction", "uniform multiplicative photodetector noise amplitude"),
    ("epcm", "banks", "banks", "EPCM banks"),
    ("epcm", "row_bytes", "bytes", "EPCM row buffer size"),
    ("epcm", "bus_bits", "bits", "data bus width"),
    ("epcm", "burst_length", "beats", "beats per burst"),
    ("epcm", "cacheline_bytes", "bytes", "cache line size"),
    ("dram", "latency_ns", "ns", "fixed access latency"),
    ("dram", "cacheline_bytes", "bytes", "cache line size"),
    ("energy", "laser_per_signal_mw", "mW", "electrical laser and SOA power per optical signal"),
    ("energy", "dac_mw", "mW", "DAC power per write signal"),
    ("energy", "adc_mw", "mW", "ADC power per read channel"),
    ("energy", "wall_plug_efficiency", "fraction", "laser wall-plug efficiency"),
    ("energy", "read_power_per_bank_mw", "mW", "read-path power of one bank"),
    ("energy", "signals_per_bank_write", "signals", "signals per bank for one line write"),
    ("energy", "read_pj_per_bit", "pJ/bit", "override simulated read energy"),
    ("energy", "write_pj_per_bit", "pJ/bit", "override simulated write energy"),
    ("energy", "writeback_pj_per_bit", "pJ/bit", "override simulated writeback energy"),
    ("area", "gst_side_nm", "nm", "GST element side"),
    ("area", "gst_separation_nm", "nm", "gap between adjacent GSTs"),
    ("area", "mrr_diameter_um", "um", "microring diameter"),
    ("area", "layers", "layers", "stacked layers (defaults to the bank count)"),
    ("area", "density_basis", "footprint|all_layers", "area the density divides by"),
    ("budget", "signal_count", "signals", "optical signals powered by the laser"),
    ("endurance", "max_writes_per_cell", "writes", "cell endurance"),
    ("endurance", "core_frequency_hz", "Hz", "core clock used for bytes per cycle"),
    ("published", "write_energy_pj_per_bit", "pJ/bit", "reference write energy"),
    ("published", "read_energy_pj_per_bit", "pJ/bit", "reference read energy"),
    ("published", "write_power_mw", "mW", "reference aggregate write power"),
    ("published", "laser_power_per_signal_dbm", "dBm", "reference optical power per signal"),
    ("published", "laser_power_per_signal_mw", "mW", "reference optical power per signal"),
    ("published", "laser_electrical_per_signal_mw", "mW", "reference electrical power per signal"),
    ("published", "total_laser_power_w", "W", "reference total laser power"),
    ("published", "area_4bit_mm2", "mm2", "reference 4-bit array area"),
    ("published", "area_8bit_mm2", "mm2", "reference 8-bit array area"),
    ("published", "density_4bit_mb_per_mm2", "MB/mm2", "reference 4-bit density"),
    ("published", "density_8bit_mb_per_mm2", "MB/mm2", "reference 8-bit density"),
    ("tolerance", "write_energy_rel", "fraction", "allowed relative write energy deviation"),
    ("tolerance", "read_energy_rel", "fraction", "allowed relative read energy deviation"),
    ("tolerance", "laser_power_db", "dB", "allowed per-signal laser power deviation"),
    ("tolerance", "area_rel", "fraction", "allowed relative area deviation"),
    ("output", "dir", "path", "directory for report files"),
];

pub fn key_help() -> String {
    let mut s = String::from("Config keys ([section] key = value):\n");
    let mut section = "";
    for (sec, key, unit, what) in KEYS {
        if *sec != section {
            writeln!(s, "  [{sec}]").unwrap();
            section = sec;
        }
        writeln!(s, "    {key:<32} {unit:<20} {what}").unwrap();
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub write_energy_rel: f64,
    pub read_energy_rel: f64,
    pub laser_power_db: f64,
    pub area_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { write_energy_rel: 0.30, read_energy_rel: 0.005, laser_power_db: 0.5, area_rel: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub energy_model: EnergyModelParams,
    pub area: AreaModelParams,
    pub published: PublishedValues,
    pub tolerances: Tolerances,
    pub signal_count: u64,
    pub output_dir: Option<PathBuf>,
}

/// Signal count at which 0.95 mW per signal reaches 16.38 W.
pub const DEFAULT_SIGNAL_COUNT: u64 = 17_242;

impl RunConfig {
    pub fn from_preset(name: &str) -> Result<Self> {
        let system = SystemConfig::preset(name)
            .ok_or_else(|| anyhow!("unknown preset `{name}` (one of {})", PRESETS.join(", ")))?;
        Ok(Self {
            system,
            energy_model: EnergyModelParams::default(),
            area: AreaModelParams::default(),
            published: PublishedValues::default(),
            tolerances: Tolerances::default(),
            signal_count: DEFAULT_SIGNAL_COUNT,
            output_dir: None,
        })
    }

    /// Geometry of a COSMOS configuration.
    pub fn geometry(&self) -> Option<ArrayGeometry> {
        match &self.system.backend {
            BackendConfig::Cosmos(c) => Some(c.geometry),
            _ => None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let sections = split_sections(text)?;
        let preset = sections
            .get("system")
            .and_then(|s| s.get("preset"))
            .map(String::as_str)
            .unwrap_or("cosmos-4bit");
        let mut cfg = Self::from_preset(preset)?;
        let mut energy_overrides = BTreeMap::new();
        for (section, kv) in &sections {
            match section.as_str() {
                "system" => cfg.apply_system(kv)?,
                "geometry" => cfg.apply_geometry(kv)?,
                "timing" => cfg.apply_timing(kv)?,
                "caps" => cfg.apply_caps(kv)?,
                "controller" => cfg.apply_controller(kv)?,
                "epcm" => cfg.apply_epcm(kv)?,
                "dram" => cfg.apply_dram(kv)?,
                "energy" => {
                    cfg.apply_energy_model(kv)?;
                    energy_overrides = kv.clone();
                }
                "area" => cfg.apply_area(kv)?,
                "budget" => cfg.signal_count = num(kv, section, "signal_count")?,
                "endurance" => {
                    for (k, v) in kv {
                        let x = float(section, k, v)?;
                        match k.as_str() {
                            "max_writes_per_cell" => cfg.system.max_writes_per_cell = x,
                            "core_frequency_hz" => cfg.system.core_frequency_hz = x,
                            _ => unreachable!(),
                        }
                    }
                }
                "published" => cfg.apply_published(kv)?,
                "tolerance" => cfg.apply_tolerance(kv)?,
                "output" => cfg.output_dir = kv.get("dir").map(PathBuf::from),
                _ => unreachable!("sections are checked when split"),
            }
        }
        if let BackendConfig::Cosmos(c) = &cfg.system.backend {
            cfg.system.energy = cosmos_energy(c, &cfg.energy_model);
        }
        for (k, v) in &energy_overrides {
            let x = float("energy", k, v)?;
            match k.as_str() {
                "read_pj_per_bit" => cfg.system.energy.read_pj = x,
                "write_pj_per_bit" => cfg.system.energy.write_pj = x,
                "writeback_pj_per_bit" => cfg.system.energy.writeback_pj = x,
                _ => {}
            }
        }
        cfg.energy_model.validate().map_err(|e| anyhow!("[energy] {e}"))?;
        cfg.area.validate().map_err(|e| anyhow!("[area] {e}"))?;
        cfg.system.validate()?;
        Ok(cfg)
    }

    fn apply_system(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        if let Some(name) = kv.get("name") {
            self.system.name = name.clone();
        }
        if kv.contains_key("seed") {
            self.system.seed = num(kv, "system", "seed")?;
            if let BackendConfig::Cosmos(c) = &mut self.system.backend {
                c.params.noise_seed = self.system.seed;
            }
        }
        Ok(())
    }

    fn cosmos_only(&mut self, section: &str) -> Result<&mut cosmos_sim::sim::CosmosConfig> {
        match &mut self.system.backend {
            BackendConfig::Cosmos(c) => Ok(c),
            _ => bail!("[{section}] applies only to cosmos presets"),
        }
    }

    fn apply_geometry(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        let c = self.cosmos_only("geometry")?;
        let g = c.geometry;
        let mut raw: BTreeMap<String, String> = [
            ("bits_per_cell", g.bits_per_cell),
            ("cells_per_tile_side", g.cells_per_tile_side),
            ("tile_rows_per_bank", g.tile_rows_per_bank),
            ("tile_cols_per_bank", g.tile_cols_per_bank),
            ("bank_count", g.bank_count),
            ("banks_per_cacheline", g.banks_per_cacheline),
            ("cacheline_bytes", g.cacheline_bytes),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        raw.extend(kv.clone());
        let geom = validate_geometry(&raw).map_err(|e| anyhow!("[geometry] {e}"))?;
        let write_cells = c.caps.write_window_bits / g.bits_per_cell as u64;
        let read_cells = c.caps.read_window_bits / g.bits_per_cell as u64;
        c.geometry = geom;
        c.model = TransmissionModel::new(geom.bits_per_cell);
        c.caps = ParallelismCaps::from_cells(write_cells, read_cells, geom.bits_per_cell);
        self.system.capacity_bytes = geom.capacity_bytes();
        Ok(())
    }

    fn apply_timing(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        let timing: &mut TimingParams = match &mut self.system.backend {
            BackendConfig::Cosmos(c) => &mut c.timing,
            BackendConfig::Epcm(p) => &mut p.timing,
            BackendConfig::FixedDram { .. } => bail!("[timing] does not apply to fixed-dram; use [dram] latency_ns"),
        };
        for (k, v) in kv {
            let t = ns(nonneg("timing", k, v)?);
            match k.as_str() {
                "t_set_ns" => timing.t_set = t,
                "t_reset_ns" => timing.t_reset = t,
                "t_read_ns" => timing.t_read = t,
                "t_burst_ns" => timing.t_burst = t,
                "t_eoe_ns" => timing.t_eoe = t,
                _ => unreachable!(),
            }
        }
        Ok(())
    }

    fn apply_caps(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        let c = self.cosmos_only("caps")?;
        let b = c.geometry.bits_per_cell as u64;
        let mut write = c.caps.write_window_bits / b;
        let mut read = c.caps.read_window_bits / b;
        for k in kv.keys() {
            let v: u64 = num(kv, "caps", k)?;
            match k.as_str() {
                "write_window_cells" => write = v,
                "read_window_cells" => read = v,
                _ => unreachable!(),
            }
        }
        c.caps = ParallelismCaps::from_cells(write, read, b as u32);
        Ok(())
    }

    fn apply_controller(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        let c = self.cosmos_only("controller")?;
        for (k, v) in kv {
            match k.as_str() {
                "holding_buffer_lines" => c.params.holding_capacity = num(kv, "controller", k)?,
                "queue_depth" => c.params.queue_capacity = num(kv, "controller", k)?,
                "ratio_tolerance" => c.params.ratio_tolerance = nonneg("controller", k, v)?,
                "read_noise" => c.params.read_noise = nonneg("controller", k, v)?,
                _ => unreachable!(),
            }
        }
        Ok(())
    }

    fn apply_epcm(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        let BackendConfig::Epcm(p) = &mut self.system.backend else {
            bail!("[epcm] applies only to the epcm-2bit preset");
        };
        for k in kv.keys() {
            match k.as_str() {
                "banks" => p.banks = num(kv, "epcm", k)?,
                "row_bytes" => p.row_bytes = num(kv, "epcm", k)?,
                "bus_bits" => p.bus_bits = num(kv, "epcm", k)?,
                "burst_length" => p.burst_length = num(kv, "epcm", k)?,
                "cacheline_bytes" => p.cacheline_bytes = num(kv, "epcm", k)?,
                _ => unreachable!(),
            }
        }
        Ok(())
    }

    fn apply_dram(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        let BackendConfig::FixedDram { latency, cacheline_bytes } = &mut self.system.backend else {
            bail!("[dram] applies only to the fixed-dram preset");
        };
        for (k, v) in kv {
            match k.as_str() {
                "latency_ns" => *latency = ns(nonneg("dram", k, v)?),
                "cacheline_bytes" => *cacheline_bytes = num(kv, "dram", k)?,
                _ => unreachable!(),
            }
        }
        Ok(())
    }

    fn apply_energy_model(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        let e = &mut self.energy_model;
        for (k, v) in kv {
            match k.as_str() {
                "laser_per_signal_mw" => e.laser_per_signal_mw = float("energy", k, v)?,
                "dac_mw" => e.dac_mw = float("energy", k, v)?,
                "adc_mw" => e.adc_mw = float("energy", k, v)?,
                "wall_plug_efficiency" => e.wall_plug_efficiency = float("energy", k, v)?,
                "read_power_per_bank_mw" => e.read_power_per_bank_mw = float("energy", k, v)?,
                "signals_per_bank_write" => e.signals_per_bank_write = Some(num(kv, "energy", k)?),
                _ => {}
            }
        }
        Ok(())
    }

    fn apply_area(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        let a = &mut self.area;
        for (k, v) in kv {
            match k.as_str() {
                "gst_side_nm" => a.gst_side_nm = float("area", k, v)?,
                "gst_separation_nm" => a.gst_separation_nm = float("area", k, v)?,
                "mrr_diameter_um" => a.mrr_diameter_um = float("area", k, v)?,
                "layers" => a.layers = Some(num(kv, "area", k)?),
                "density_basis" => {
                    a.density_basis = match v.as_str() {
                        "footprint" => DensityBasis::Footprint,
                        "all_layers" => DensityBasis::AllLayers,
                        _ => bail!("[area] density_basis must be footprint or all_layers, got `{v}`"),
                    }
                }
                _ => unreachable!(),
            }
        }
        Ok(())
    }

    fn apply_published(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        let p = &mut self.published;
        for (k, v) in kv {
            let x = float("published", k, v)?;
            let slot = match k.as_str() {
                "write_energy_pj_per_bit" => &mut p.write_energy_pj_per_bit,
                "read_energy_pj_per_bit" => &mut p.read_energy_pj_per_bit,
                "write_power_mw" => &mut p.write_power_mw,
                "laser_power_per_signal_dbm" => &mut p.laser_power_per_signal_dbm,
                "laser_power_per_signal_mw" => &mut p.laser_power_per_signal_mw,
                "laser_electrical_per_signal_mw" => &mut p.laser_electrical_per_signal_mw,
                "total_laser_power_w" => &mut p.total_laser_power_w,
                "area_4bit_mm2" => &mut p.area_4bit_mm2,
                "area_8bit_mm2" => &mut p.area_8bit_mm2,
                "density_4bit_mb_per_mm2" => &mut p.density_4bit_mb_per_mm2,
                "density_8bit_mb_per_mm2" => &mut p.density_8bit_mb_per_mm2,
                _ => unreachable!(),
            };
            *slot = x;
        }
        Ok(())
    }

    fn apply_tolerance(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        let t = &mut self.tolerances;
        for (k, v) in kv {
            let x = nonneg("tolerance", k, v)?;
            match k.as_str() {
                "write_energy_rel" => t.write_energy_rel = x,
                "read_energy_rel" => t.read_energy_rel = x,
                "laser_power_db" => t.laser_power_db = x,
                "area_rel" => t.area_rel = x,
                _ => unreachable!(),
            }
        }
        Ok(())
    }
}

fn split_sections(text: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut out: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("line {}", i + 1);
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !KEYS.iter().any(|(s, ..)| *s == name) {
                bail!("{}: unknown section [{name}]", at());
            }
            section = Some(name.to_string());
            out.entry(name.to_string()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}: expected `key = value`, got `{line}`", at());
        };
        let Some(sec) = &section else {
            bail!("{}: key outside of a [section]", at());
        };
        let key = key.trim();
        if !KEYS.iter().any(|(s, k, ..)| s == sec && *k == key) {
            bail!("{}: unknown key `{key}` in [{sec}] (see --help for the key list)", at());
        }
        let entry = out.get_mut(sec).unwrap();
        if entry.insert(key.to_string(), value.trim().to_string()).is_some() {
            bail!("{}: duplicate key `{key}` in [{sec}]", at());
        }
    }
    Ok(out)
}

fn float(section: &str, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().with_context(|| format!("[{section}] {key}: `{v}` is not a number"))?;
    if !x.is_finite() {
        bail!("[{section}] {key}: `{v}` is not finite");
    }
    Ok(x)
}

fn nonneg(section: &str, key: &str, v: &str) -> Result<f64> {
    let x = float(section, key, v)?;
    if x < 0.0 {
        bail!("[{section}] {key}: must not be negative");
    }
    Ok(x)
}

fn num<T: std::str::FromStr>(kv: &BTreeMap<String, String>, section: &str, key: &str) -> Result<T> {
    let v = kv.get(key).ok_or_else(|| anyhow!("[{section}] {key} missing"))?;
    v.replace('_', "")
        .parse()
        .map_err(|_| anyhow!("[{section}] {key}: `{v}` is not a non-negative integer"))
}
