//! Sparse storage for the OPCM cell array and the optical operations the
//! controller performs on it.
//!
//! Only rows that have been programmed at least once are materialized; every
//! other cell is amorphous with zero wear. Rows are keyed so that all rows of
//! one tile are contiguous, which makes column products a range scan.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::device::{
    apply_write, bytes_from_levels, levels_from_bytes, CellState, DeviceError, TransmissionModel,
};
use crate::geometry::{ArrayGeometry, DecodedAddress};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    pub bank: u32,
    pub tile_row: u32,
    pub tile_col: u32,
    pub cell_row: u32,
}

/// Intensities seen by the photodetectors during one three-step read of a
/// single bank's tile row, as fractions of the injected read intensity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReadTranscript {
    pub bank: u32,
    pub first_pass: Vec<f64>,
    pub second_pass: Vec<f64>,
    pub first_volts: Vec<f64>,
    pub second_volts: Vec<f64>,
    pub levels: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct OpcmArray {
    geometry: ArrayGeometry,
    model: TransmissionModel,
    rows: BTreeMap<RowKey, Vec<CellState>>,
    /// Photodetector gain, volts per unit of normalized intensity.
    pub volts_per_intensity: f64,
}

impl OpcmArray {
    pub fn new(geometry: ArrayGeometry, model: TransmissionModel) -> Self {
        Self { geometry, model, rows: BTreeMap::new(), volts_per_intensity: 1.0 }
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn model(&self) -> &TransmissionModel {
        &self.model
    }

    fn row_key(d: &DecodedAddress, bank: u32) -> RowKey {
        RowKey { bank, tile_row: d.tile_row, tile_col: d.tile_col, cell_row: d.cell_row }
    }

    pub fn cell(&self, key: RowKey, col: u32) -> CellState {
        self.rows
            .get(&key)
            .map(|r| r[col as usize])
            .unwrap_or_default()
    }

    pub fn row(&self, key: &RowKey) -> Option<&[CellState]> {
        self.rows.get(key).map(|r| r.as_slice())
    }

    /// All materialized rows, in key order.
    pub fn rows(&self) -> impl Iterator<Item = (&RowKey, &[CellState])> {
        self.rows.iter().map(|(k, v)| (k, v.as_slice()))
    }

    fn row_mut(&mut self, key: RowKey) -> &mut Vec<CellState> {
        let n = self.geometry.cells_per_tile_side as usize;
        self.rows.entry(key).or_insert_with(|| vec![CellState::default(); n])
    }

    /// Superposition write: the row signal plus each column signal programs
    /// exactly the cells at their crossings in every bank of the group.
    pub fn write_line(&mut self, d: &DecodedAddress, data: &[u8]) {
        let levels = levels_from_bytes(data, self.geometry.bits_per_cell);
        let n = self.geometry.cells_per_tile_side as usize;
        let banks: Vec<u32> = self.geometry.banks_of_group(d.bank_group).collect();
        for (chunk, bank) in banks.into_iter().enumerate() {
            let row = self.row_mut(Self::row_key(d, bank));
            for (cell, &level) in row.iter_mut().zip(&levels[chunk * n..(chunk + 1) * n]) {
                *cell = apply_write(*cell, level);
            }
        }
    }

    /// Column transmissions for one tile, one entry per cell column.
    fn tile_columns(&self, bank: u32, tile_row: u32, tile_col: u32) -> Vec<f64> {
        let n = self.geometry.cells_per_tile_side;
        let lo = RowKey { bank, tile_row, tile_col, cell_row: 0 };
        let hi = RowKey { bank, tile_row, tile_col, cell_row: n - 1 };
        let mut cols = vec![1.0f64; n as usize];
        for (_, row) in self.rows.range(lo..=hi) {
            for (acc, cell) in cols.iter_mut().zip(row) {
                *acc *= self.model.transmission_unchecked(cell.level as u32);
            }
        }
        cols
    }

    /// Three-step destructive read of one line: sample every column, RESET the
    /// target row in each bank, sample again, and decode each cell from the
    /// ratio of the two readings. The row is left amorphized.
    pub fn read_line_destructive(
        &mut self,
        d: &DecodedAddress,
        ratio_tolerance: f64,
        noise: &mut dyn FnMut() -> f64,
    ) -> Result<(Vec<u8>, Vec<ReadTranscript>), DeviceError> {
        let n = self.geometry.cells_per_tile_side as usize;
        let banks: Vec<u32> = self.geometry.banks_of_group(d.bank_group).collect();
        let mut levels = Vec::with_capacity(n * banks.len());
        let mut transcripts = Vec::with_capacity(banks.len());
        for bank in banks {
            let first: Vec<f64> = self
                .tile_columns(bank, d.tile_row, d.tile_col)
                .into_iter()
                .map(|i| i * noise())
                .collect();
            let row = self.row_mut(Self::row_key(d, bank));
            for cell in row.iter_mut() {
                *cell = apply_write(*cell, 0);
            }
            let second: Vec<f64> = self
                .tile_columns(bank, d.tile_row, d.tile_col)
                .into_iter()
                .map(|i| i * noise())
                .collect();
            let mut bank_levels = Vec::with_capacity(n);
            for (i1, i2) in first.iter().zip(&second) {
                let level = self.model.level_from_transmission_ratio(i1 / i2, ratio_tolerance)?;
                bank_levels.push(level as u8);
            }
            levels.extend_from_slice(&bank_levels);
            let v = self.volts_per_intensity;
            transcripts.push(ReadTranscript {
                bank,
                first_volts: first.iter().map(|i| i * v).collect(),
                second_volts: second.iter().map(|i| i * v).collect(),
                first_pass: first,
                second_pass: second,
                levels: bank_levels,
            });
        }
        let data = bytes_from_levels(&levels, self.geometry.bits_per_cell, self.geometry.cacheline_bytes as usize);
        Ok((data, transcripts))
    }

    /// Data currently encoded in the cells of a line, read without disturbing them.
    pub fn peek_line(&self, d: &DecodedAddress) -> Vec<u8> {
        let n = self.geometry.cells_per_tile_side as usize;
        let mut levels = Vec::with_capacity(self.geometry.cells_per_line() as usize);
        for bank in self.geometry.banks_of_group(d.bank_group) {
            match self.rows.get(&Self::row_key(d, bank)) {
                Some(row) => levels.extend(row.iter().map(|c| c.level)),
                None => levels.extend(std::iter::repeat_n(0, n)),
            }
        }
        bytes_from_levels(&levels, self.geometry.bits_per_cell, self.geometry.cacheline_bytes as usize)
    }

    pub fn wear_summary(&self) -> WearReport {
        let mut max = 0u32;
        let mut total = 0u64;
        let mut per_bank = vec![0u64; self.geometry.bank_count as usize];
        for (key, row) in &self.rows {
            for c in row {
                max = max.max(c.write_count);
                total += c.write_count as u64;
                per_bank[key.bank as usize] += c.write_count as u64;
            }
        }
        let cells = self.geometry.total_cells();
        WearReport {
            max_writes_per_cell: max,
            mean_writes_per_cell: if cells == 0 { 0.0 } else { total as f64 / cells as f64 },
            total_cell_writes: total,
            per_bank_writes: per_bank,
        }
    }
}

/// Post-run wear statistics over every cell of the array.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WearReport {
    pub max_writes_per_cell: u32,
    pub mean_writes_per_cell: f64,
    pub total_cell_writes: u64,
    pub per_bank_writes: Vec<u64>,
}
