//! OPCM cell model: multi-level state, optical transmission, programming pulses
//! and wear counting.
//!
//! Level 0 is fully amorphous (a-GST, highest transmission) and the top level
//! is fully crystalline (c-GST). Intermediate levels sit on a straight line
//! between the two published transmission endpoints.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("level {level} out of range 0..={max}")]
    LevelOutOfRange { level: u32, max: u32 },
    #[error("transmission ratio {ratio} outside (0, {limit}]")]
    RatioOutOfRange { ratio: f64, limit: f64 },
    #[error("invalid transmission model: {0}")]
    InvalidModel(&'static str),
}

/// Per-cell crystallization level plus the number of programming operations
/// the cell has absorbed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CellState {
    pub level: u8,
    pub write_count: u32,
}

/// Wear counts operations, not state changes: rewriting the same level still
/// costs one programming pulse.
pub fn apply_write(cell: CellState, target_level: u8) -> CellState {
    CellState { level: target_level, write_count: cell.write_count + 1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransmissionModel {
    pub t_amorphous: f64,
    pub t_crystalline: f64,
    pub bits_per_cell: u32,
}

impl TransmissionModel {
    pub fn new(bits_per_cell: u32) -> Self {
        Self { t_amorphous: 1.0, t_crystalline: 0.21, bits_per_cell }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(0.0 < self.t_crystalline && self.t_crystalline < self.t_amorphous && self.t_amorphous <= 1.0)
        {
            return Err(DeviceError::InvalidModel("need 0 < t_crystalline < t_amorphous <= 1"));
        }
        if self.bits_per_cell == 0 || self.bits_per_cell > 8 {
            return Err(DeviceError::InvalidModel("bits_per_cell must be in 1..=8"));
        }
        Ok(())
    }

    pub fn max_level(&self) -> u32 {
        (1 << self.bits_per_cell) - 1
    }

    fn check(&self, level: u32) -> Result<(), DeviceError> {
        if level > self.max_level() {
            return Err(DeviceError::LevelOutOfRange { level, max: self.max_level() });
        }
        Ok(())
    }

    /// Optical transmission of a cell at `level`.
    pub fn transmission(&self, level: u32) -> Result<f64, DeviceError> {
        self.check(level)?;
        Ok(self.transmission_unchecked(level))
    }

    pub(crate) fn transmission_unchecked(&self, level: u32) -> f64 {
        let span = self.t_amorphous - self.t_crystalline;
        self.t_amorphous - span * level as f64 / self.max_level() as f64
    }

    /// Nearest level to a measured transmission ratio. `tolerance` is how far
    /// above full transmission a noisy reading may land before it is rejected.
    pub fn level_from_transmission_ratio(&self, ratio: f64, tolerance: f64) -> Result<u32, DeviceError> {
        let limit = self.t_amorphous + tolerance;
        if !(ratio > 0.0 && ratio <= limit) {
            return Err(DeviceError::RatioOutOfRange { ratio, limit });
        }
        let span = self.t_amorphous - self.t_crystalline;
        let max = self.max_level();
        let estimate = (self.t_amorphous - ratio) / span * max as f64;
        let level = estimate.round().clamp(0.0, max as f64) as u32;
        Ok(level)
    }

    /// Product of per-cell transmissions along one column waveguide.
    pub fn column_transmission<'a, I>(&self, cells: I) -> f64
    where
        I: IntoIterator<Item = &'a CellState>,
    {
        cells
            .into_iter()
            .map(|c| self.transmission_unchecked(c.level as u32))
            .product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PulseKind {
    Reset,
    Set,
    Partial,
    Read,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseSpec {
    pub energy_pj: f64,
    pub duration_ns: f64,
    pub kind: PulseKind,
}

/// Published programming-pulse envelope for GST cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseTable {
    pub reset: PulseSpec,
    pub set: PulseSpec,
    pub partial_energy_pj: (f64, f64),
    pub partial_duration_ns: (f64, f64),
    pub read: PulseSpec,
}

impl Default for PulseTable {
    fn default() -> Self {
        Self {
            reset: PulseSpec { energy_pj: 180.0, duration_ns: 25.0, kind: PulseKind::Reset },
            set: PulseSpec { energy_pj: 130.0, duration_ns: 250.0, kind: PulseKind::Set },
            partial_energy_pj: (60.0, 130.0),
            partial_duration_ns: (50.0, 250.0),
            // sub-ns readout; energy is nominal
            read: PulseSpec { energy_pj: 1.0, duration_ns: 0.5, kind: PulseKind::Read },
        }
    }
}

impl PulseTable {
    /// Pulse that programs a cell to `level`. Partial levels interpolate
    /// linearly over levels `1..=max` across the partial energy/duration ranges.
    pub fn write_pulse_for_level(&self, level: u32, bits_per_cell: u32) -> Result<PulseSpec, DeviceError> {
        let max = (1u32 << bits_per_cell) - 1;
        if level > max {
            return Err(DeviceError::LevelOutOfRange { level, max });
        }
        if level == 0 {
            return Ok(self.reset);
        }
        if level == max {
            return Ok(self.set);
        }
        let frac = (level - 1) as f64 / (max - 1) as f64;
        let lerp = |(lo, hi): (f64, f64)| lo + (hi - lo) * frac;
        Ok(PulseSpec {
            energy_pj: lerp(self.partial_energy_pj),
            duration_ns: lerp(self.partial_duration_ns),
            kind: PulseKind::Partial,
        })
    }
}

/// Electrically-controlled PCM parameters used by the EPCM baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpcmCellParams {
    pub bits_per_cell: u32,
    pub t_set_ns: f64,
    pub t_reset_ns: f64,
    pub t_read_ns: f64,
    pub write_energy_pj_per_bit: f64,
    pub read_energy_pj_per_bit: f64,
}

impl Default for EpcmCellParams {
    fn default() -> Self {
        Self {
            bits_per_cell: 2,
            t_set_ns: 120.0,
            t_reset_ns: 50.0,
            t_read_ns: 60.0,
            write_energy_pj_per_bit: 243.0,
            read_energy_pj_per_bit: 44.5,
        }
    }
}

/// Splits a line into per-cell levels, `bits_per_cell` bits at a time,
/// least-significant bit of byte 0 first.
pub fn levels_from_bytes(data: &[u8], bits_per_cell: u32) -> Vec<u8> {
    let total_bits = data.len() * 8;
    let b = bits_per_cell as usize;
    (0..total_bits / b)
        .map(|cell| {
            let mut level = 0u8;
            for k in 0..b {
                let bit = cell * b + k;
                if data[bit / 8] >> (bit % 8) & 1 == 1 {
                    level |= 1 << k;
                }
            }
            level
        })
        .collect()
}

/// Inverse of [`levels_from_bytes`].
pub fn bytes_from_levels(levels: &[u8], bits_per_cell: u32, out_len: usize) -> Vec<u8> {
    let b = bits_per_cell as usize;
    let mut out = vec![0u8; out_len];
    for (cell, &level) in levels.iter().enumerate() {
        for k in 0..b {
            if level >> k & 1 == 1 {
                let bit = cell * b + k;
                out[bit / 8] |= 1 << (bit % 8);
            }
        }
    }
    out
}
