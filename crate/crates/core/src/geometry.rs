//! Array geometry, the physical-address codec and optical signal assignment.
//!
//! A cache line is spread over `banks_per_cacheline` banks (a bank group) and
//! occupies one full cell row of one tile in each of them. The byte address is
//! decoded low to high as
//!
//! ```text
//! | tile_row | tile_col | cell_row | bank_group | line offset |
//! ```
//!
//! using mixed-radix arithmetic, which is a plain bit-field split whenever the
//! dimensions are powers of two (as in every shipped preset).

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("`{0}` must be strictly positive")]
    NonPositiveDimension(&'static str),
    #[error("missing geometry key `{0}`")]
    MissingKey(&'static str),
    #[error("unknown geometry key `{0}`")]
    UnknownKey(String),
    #[error("geometry key `{key}`: cannot parse `{value}` as an integer")]
    BadValue { key: String, value: String },
    #[error(
        "cache line does not fill one tile row per bank: g*n*b = {lhs} bits, 8*cacheline_bytes = {rhs} bits"
    )]
    ConstraintViolation { lhs: u64, rhs: u64 },
    #[error("bank_count {banks} is not divisible by banks_per_cacheline {group}")]
    IndivisibleBanks { banks: u64, group: u64 },
    #[error("bits_per_cell must be in 1..=8, got {0}")]
    BitsPerCell(u64),
    #[error("declared capacity {declared} bytes differs from computed {computed} bytes")]
    CapacityMismatch { declared: u64, computed: u64 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AddressError {
    #[error("address {addr:#x} is outside the {capacity:#x}-byte array")]
    OutOfRange { addr: u64, capacity: u64 },
    #[error("address {addr:#x} is not aligned to {align} bytes")]
    Misaligned { addr: u64, align: u64 },
    #[error("decoded coordinate {field}={value} exceeds bound {bound}")]
    CoordinateOutOfRange { field: &'static str, value: u32, bound: u32 },
}

/// Dimensions of the multi-banked OPCM array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ArrayGeometry {
    pub bits_per_cell: u32,
    pub cells_per_tile_side: u32,
    pub tile_rows_per_bank: u32,
    pub tile_cols_per_bank: u32,
    pub bank_count: u32,
    pub banks_per_cacheline: u32,
    pub cacheline_bytes: u32,
}

/// The keys accepted by [`validate_geometry`], with their units.
pub const GEOMETRY_KEYS: &[(&str, &str)] = &[
    ("bits_per_cell", "bits, 1..8"),
    ("cells_per_tile_side", "cells (n)"),
    ("tile_rows_per_bank", "tiles (m_r)"),
    ("tile_cols_per_bank", "tiles (m_c)"),
    ("bank_count", "banks (p)"),
    ("banks_per_cacheline", "banks (g)"),
    ("cacheline_bytes", "bytes, default 64"),
    ("capacity_bytes", "bytes, optional cross-check"),
];

impl ArrayGeometry {
    /// 4 bits/cell, 32x32-cell tiles, 512x1024 tiles/bank, 8 banks, 4 banks/line: 2 GiB.
    pub fn cosmos_4bit() -> Self {
        Self {
            bits_per_cell: 4,
            cells_per_tile_side: 32,
            tile_rows_per_bank: 512,
            tile_cols_per_bank: 1024,
            bank_count: 8,
            banks_per_cacheline: 4,
            cacheline_bytes: 64,
        }
    }

    /// 2 bits/cell; a line then needs all 8 banks to fill one tile row each.
    pub fn cosmos_2bit() -> Self {
        Self {
            bits_per_cell: 2,
            tile_rows_per_bank: 1024,
            tile_cols_per_bank: 1024,
            banks_per_cacheline: 8,
            ..Self::cosmos_4bit()
        }
    }

    pub fn cosmos_8bit() -> Self {
        Self {
            bits_per_cell: 8,
            tile_rows_per_bank: 512,
            tile_cols_per_bank: 512,
            banks_per_cacheline: 2,
            ..Self::cosmos_4bit()
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let fields: [(&'static str, u32); 7] = [
            ("bits_per_cell", self.bits_per_cell),
            ("cells_per_tile_side", self.cells_per_tile_side),
            ("tile_rows_per_bank", self.tile_rows_per_bank),
            ("tile_cols_per_bank", self.tile_cols_per_bank),
            ("bank_count", self.bank_count),
            ("banks_per_cacheline", self.banks_per_cacheline),
            ("cacheline_bytes", self.cacheline_bytes),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(GeometryError::NonPositiveDimension(name));
            }
        }
        if self.bits_per_cell > 8 {
            return Err(GeometryError::BitsPerCell(self.bits_per_cell as u64));
        }
        let lhs = self.banks_per_cacheline as u64
            * self.cells_per_tile_side as u64
            * self.bits_per_cell as u64;
        let rhs = 8 * self.cacheline_bytes as u64;
        if lhs != rhs {
            return Err(GeometryError::ConstraintViolation { lhs, rhs });
        }
        if !self.bank_count.is_multiple_of(self.banks_per_cacheline) {
            return Err(GeometryError::IndivisibleBanks {
                banks: self.bank_count as u64,
                group: self.banks_per_cacheline as u64,
            });
        }
        Ok(())
    }

    pub fn capacity_bits(&self) -> u64 {
        self.bank_count as u64
            * self.tile_rows_per_bank as u64
            * self.tile_cols_per_bank as u64
            * self.cells_per_bank_tile() as u64
            * self.bits_per_cell as u64
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bits() / 8
    }

    pub fn cells_per_bank_tile(&self) -> u32 {
        self.cells_per_tile_side * self.cells_per_tile_side
    }

    pub fn total_cells(&self) -> u64 {
        self.bank_count as u64
            * self.tile_rows_per_bank as u64
            * self.tile_cols_per_bank as u64
            * self.cells_per_bank_tile() as u64
    }

    pub fn bank_groups(&self) -> u32 {
        self.bank_count / self.banks_per_cacheline
    }

    pub fn cacheline_bits(&self) -> u32 {
        self.cacheline_bytes * 8
    }

    /// Cells touched by one cache-line access (`g * n`).
    pub fn cells_per_line(&self) -> u32 {
        self.banks_per_cacheline * self.cells_per_tile_side
    }

    pub fn max_level(&self) -> u8 {
        ((1u32 << self.bits_per_cell) - 1) as u8
    }

    pub fn line_count(&self) -> u64 {
        self.capacity_bytes() / self.cacheline_bytes as u64
    }

    /// Banks making up `bank_group`, in chunk order.
    pub fn banks_of_group(&self, bank_group: u32) -> std::ops::Range<u32> {
        let start = bank_group * self.banks_per_cacheline;
        start..start + self.banks_per_cacheline
    }
}

impl fmt::Display for ArrayGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} banks (groups of {}) x {}x{} tiles x {}x{} cells x {} b/cell = {} bytes",
            self.bank_count,
            self.banks_per_cacheline,
            self.tile_rows_per_bank,
            self.tile_cols_per_bank,
            self.cells_per_tile_side,
            self.cells_per_tile_side,
            self.bits_per_cell,
            self.capacity_bytes()
        )
    }
}

/// Builds a geometry from a raw key-value section and checks every structural
/// constraint. `capacity_bytes`, when present, must agree with the computed size.
pub fn validate_geometry(raw: &BTreeMap<String, String>) -> Result<ArrayGeometry, GeometryError> {
    for key in raw.keys() {
        if !GEOMETRY_KEYS.iter().any(|(k, _)| k == key) {
            return Err(GeometryError::UnknownKey(key.clone()));
        }
    }
    let get = |key: &'static str, default: Option<u64>| -> Result<u64, GeometryError> {
        match raw.get(key) {
            Some(v) => parse_u64(v).ok_or_else(|| GeometryError::BadValue {
                key: key.to_string(),
                value: v.clone(),
            }),
            None => default.ok_or(GeometryError::MissingKey(key)),
        }
    };
    let narrow = |key: &'static str, v: u64| -> Result<u32, GeometryError> {
        u32::try_from(v).map_err(|_| GeometryError::BadValue {
            key: key.to_string(),
            value: v.to_string(),
        })
    };
    let geom = ArrayGeometry {
        bits_per_cell: narrow("bits_per_cell", get("bits_per_cell", None)?)?,
        cells_per_tile_side: narrow("cells_per_tile_side", get("cells_per_tile_side", None)?)?,
        tile_rows_per_bank: narrow("tile_rows_per_bank", get("tile_rows_per_bank", None)?)?,
        tile_cols_per_bank: narrow("tile_cols_per_bank", get("tile_cols_per_bank", None)?)?,
        bank_count: narrow("bank_count", get("bank_count", None)?)?,
        banks_per_cacheline: narrow("banks_per_cacheline", get("banks_per_cacheline", None)?)?,
        cacheline_bytes: narrow("cacheline_bytes", get("cacheline_bytes", Some(64))?)?,
    };
    geom.validate()?;
    if raw.contains_key("capacity_bytes") {
        let declared = get("capacity_bytes", None)?;
        let computed = geom.capacity_bytes();
        if declared != computed {
            return Err(GeometryError::CapacityMismatch { declared, computed });
        }
    }
    Ok(geom)
}

fn parse_u64(s: &str) -> Option<u64> {
    let s = s.trim().replace('_', "");
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => s.parse().ok(),
    }
}

/// A cache-line address resolved to array coordinates. The cell column is
/// absent: a line always engages a full tile row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DecodedAddress {
    pub bank_group: u32,
    pub tile_row: u32,
    pub tile_col: u32,
    pub cell_row: u32,
}

pub fn decode_address(addr: u64, geom: &ArrayGeometry) -> Result<DecodedAddress, AddressError> {
    let capacity = geom.capacity_bytes();
    if addr >= capacity {
        return Err(AddressError::OutOfRange { addr, capacity });
    }
    let line_bytes = geom.cacheline_bytes as u64;
    if !addr.is_multiple_of(line_bytes) {
        return Err(AddressError::Misaligned { addr, align: line_bytes });
    }
    let mut line = addr / line_bytes;
    let groups = geom.bank_groups() as u64;
    let n = geom.cells_per_tile_side as u64;
    let cols = geom.tile_cols_per_bank as u64;

    let bank_group = (line % groups) as u32;
    line /= groups;
    let cell_row = (line % n) as u32;
    line /= n;
    let tile_col = (line % cols) as u32;
    let tile_row = (line / cols) as u32;
    Ok(DecodedAddress { bank_group, tile_row, tile_col, cell_row })
}

pub fn encode_address(d: &DecodedAddress, geom: &ArrayGeometry) -> Result<u64, AddressError> {
    let bounds = [
        ("bank_group", d.bank_group, geom.bank_groups()),
        ("tile_row", d.tile_row, geom.tile_rows_per_bank),
        ("tile_col", d.tile_col, geom.tile_cols_per_bank),
        ("cell_row", d.cell_row, geom.cells_per_tile_side),
    ];
    for (field, value, bound) in bounds {
        if value >= bound {
            return Err(AddressError::CoordinateOutOfRange { field, value, bound });
        }
    }
    let n = geom.cells_per_tile_side as u64;
    let cols = geom.tile_cols_per_bank as u64;
    let groups = geom.bank_groups() as u64;
    let line = ((d.tile_row as u64 * cols + d.tile_col as u64) * n + d.cell_row as u64) * groups
        + d.bank_group as u64;
    Ok(line * geom.cacheline_bytes as u64)
}

/// Optical signals engaged by one cache-line access. Indices are 1-based to
/// match wavelength numbering: rows use `1..=n` (TRA channel), columns use
/// `n+1..=2n` (TCA channel), and each bank listens on its own spatial mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignalSet {
    pub row_wavelength_index: u32,
    pub column_wavelength_indices: Vec<u32>,
    pub mode_indices: Vec<u32>,
}

pub fn signals_for_access(
    d: &DecodedAddress,
    geom: &ArrayGeometry,
) -> Result<SignalSet, AddressError> {
    // reuse the bounds check
    encode_address(d, geom)?;
    let n = geom.cells_per_tile_side;
    Ok(SignalSet {
        row_wavelength_index: d.cell_row + 1,
        column_wavelength_indices: (n + 1..=2 * n).collect(),
        mode_indices: geom.banks_of_group(d.bank_group).map(|b| b + 1).collect(),
    })
}
