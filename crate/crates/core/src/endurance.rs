//! Lifetime projection from write traffic, and per-cell wear statistics.

use serde::Serialize;
use thiserror::Error;

use crate::array::OpcmArray;
pub use crate::array::WearReport;

/// Scale constant of the lifetime formula.
pub const LIFETIME_DIVISOR: f64 = (1u64 << 25) as f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnduranceError {
    #[error("{0} must be positive and finite")]
    NonPositiveInput(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifetimeParams {
    pub size_bytes: f64,
    pub max_writes_per_cell: f64,
    /// Memory traffic in bytes per core cycle.
    pub bytes_per_cycle: f64,
    pub frequency_hz: f64,
}

impl LifetimeParams {
    pub fn new(size_bytes: f64, bytes_per_cycle: f64) -> Self {
        Self { size_bytes, max_writes_per_cell: 1e6, bytes_per_cycle, frequency_hz: 1e9 }
    }

    pub fn validate(&self) -> Result<(), EnduranceError> {
        for (name, v) in [
            ("size", self.size_bytes),
            ("max writes per cell", self.max_writes_per_cell),
            ("rate", self.bytes_per_cycle),
            ("frequency", self.frequency_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EnduranceError::NonPositiveInput(name));
            }
        }
        Ok(())
    }
}

pub fn lifetime_years(p: &LifetimeParams) -> Result<f64, EnduranceError> {
    p.validate()?;
    Ok(p.size_bytes * p.max_writes_per_cell / (p.bytes_per_cycle * p.frequency_hz * LIFETIME_DIVISOR))
}

pub fn wear_report(array: &OpcmArray) -> WearReport {
    array.wear_summary()
}
