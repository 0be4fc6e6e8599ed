//! Optical power budget, laser power, per-bit energy and array area.
//!
//! Every calculator that is checked against a published figure returns a
//! [`Deviation`] carrying both numbers; nothing is reconciled silently.

use serde::Serialize;
use thiserror::Error;

use crate::controller::{ParallelismCaps, TimingParams};
use crate::engine::to_ns;
use crate::geometry::ArrayGeometry;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("power must be positive, got {0} mW")]
    NonPositivePower(f64),
    #[error("budget chain has no target power")]
    MissingTarget,
    #[error("budget chain has {0} target powers, expected one")]
    MultipleTargets(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid parameter: {0}")]
    InvalidParams(&'static str),
}

/// Reference figures that calculators are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PublishedValues {
    pub write_energy_pj_per_bit: f64,
    pub read_energy_pj_per_bit: f64,
    /// Aggregate write power quoted for two lines in flight.
    pub write_power_mw: f64,
    pub laser_power_per_signal_dbm: f64,
    pub laser_power_per_signal_mw: f64,
    pub laser_electrical_per_signal_mw: f64,
    pub total_laser_power_w: f64,
    pub area_4bit_mm2: f64,
    pub area_8bit_mm2: f64,
    pub density_4bit_mb_per_mm2: f64,
    pub density_8bit_mb_per_mm2: f64,
}

impl Default for PublishedValues {
    fn default() -> Self {
        Self {
            write_energy_pj_per_bit: 40.68,
            read_energy_pj_per_bit: 11.6,
            write_power_mw: 334.8,
            laser_power_per_signal_dbm: -7.22,
            laser_power_per_signal_mw: 0.19,
            laser_electrical_per_signal_mw: 0.95,
            total_laser_power_w: 16.38,
            area_4bit_mm2: 268.43,
            area_8bit_mm2: 67.1,
            density_4bit_mb_per_mm2: 7.63,
            density_8bit_mb_per_mm2: 30.52,
        }
    }
}

impl PublishedValues {
    pub fn area_for(&self, bits_per_cell: u32) -> Option<f64> {
        match bits_per_cell {
            4 => Some(self.area_4bit_mm2),
            8 => Some(self.area_8bit_mm2),
            _ => None,
        }
    }

    pub fn density_for(&self, bits_per_cell: u32) -> Option<f64> {
        match bits_per_cell {
            4 => Some(self.density_4bit_mb_per_mm2),
            8 => Some(self.density_8bit_mb_per_mm2),
            _ => None,
        }
    }
}

/// A computed figure beside the published one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Deviation {
    pub computed: f64,
    pub published: f64,
    /// `computed - published`.
    pub delta: f64,
    /// `delta / published`.
    pub relative: f64,
}

impl Deviation {
    pub fn new(computed: f64, published: f64) -> Self {
        let delta = computed - published;
        Self { computed, published, delta, relative: delta / published }
    }

    pub fn within(&self, relative_tolerance: f64) -> bool {
        self.relative.abs() <= relative_tolerance
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> Result<f64, OpticsError> {
    // also rejects NaN
    if mw.is_nan() || mw <= 0.0 {
        return Err(OpticsError::NonPositivePower(mw));
    }
    Ok(10.0 * mw.log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Loss,
    Gain,
    TargetPower,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetComponent {
    pub name: String,
    pub kind: ComponentKind,
    /// dB for losses and gains, dBm for the target.
    pub value: f64,
}

impl BudgetComponent {
    pub fn loss(name: &str, db: f64) -> Self {
        Self { name: name.into(), kind: ComponentKind::Loss, value: db }
    }

    pub fn gain(name: &str, db: f64) -> Self {
        Self { name: name.into(), kind: ComponentKind::Gain, value: db }
    }

    pub fn target(name: &str, dbm: f64) -> Self {
        Self { name: name.into(), kind: ComponentKind::TargetPower, value: dbm }
    }

    /// Contribution to the path in dB; losses count negative whatever sign
    /// they were written with.
    pub fn signed_db(&self) -> f64 {
        match self.kind {
            ComponentKind::Loss => -self.value.abs(),
            ComponentKind::Gain => self.value.abs(),
            ComponentKind::TargetPower => 0.0,
        }
    }
}

/// Laser-to-cell path of the 2 GB array, with the SET switching power as target.
pub fn reference_budget_chain() -> Vec<BudgetComponent> {
    vec![
        BudgetComponent::loss("coupling", 1.0),
        BudgetComponent::loss("mrr_drop_eoe", 0.5),
        BudgetComponent::loss("mrr_through_eoe", 3.2),
        BudgetComponent::loss("propagation_laser_to_soa", 0.09),
        BudgetComponent::gain("soa", 20.0),
        BudgetComponent::loss("propagation_soa_to_array", 0.09),
        BudgetComponent::loss("bending", 0.167),
        BudgetComponent::loss("mrr_drop_array", 0.5),
        BudgetComponent::loss("mrr_through_array", 3.2),
        BudgetComponent::loss("propagation_in_array", 4.91),
        // 135 pJ over 250 ns
        BudgetComponent::target("gst_set_power", -2.67),
    ]
}

/// Parses `name,kind,value` lines; `#` starts a comment.
pub fn parse_budget(text: &str) -> Result<Vec<BudgetComponent>, OpticsError> {
    let mut chain = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| OpticsError::Parse { line: i + 1, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [name, kind, value] = fields[..] else {
            return Err(err(format!("expected name,kind,value, got {} fields", fields.len())));
        };
        let value: f64 = value.parse().map_err(|_| err(format!("bad number `{value}`")))?;
        if !value.is_finite() {
            return Err(err(format!("non-finite value `{value}`")));
        }
        let kind = match kind {
            "loss_db" => ComponentKind::Loss,
            "gain_db" => ComponentKind::Gain,
            "target_dbm" => ComponentKind::TargetPower,
            other => return Err(err(format!("unknown kind `{other}` (loss_db, gain_db, target_dbm)"))),
        };
        chain.push(BudgetComponent { name: name.to_string(), kind, value });
    }
    Ok(chain)
}

pub fn chain_gain_db(chain: &[BudgetComponent]) -> f64 {
    chain.iter().map(BudgetComponent::signed_db).sum()
}

fn target_of(chain: &[BudgetComponent]) -> Result<f64, OpticsError> {
    let targets: Vec<f64> = chain
        .iter()
        .filter(|c| c.kind == ComponentKind::TargetPower)
        .map(|c| c.value)
        .collect();
    match targets[..] {
        [t] => Ok(t),
        [] => Err(OpticsError::MissingTarget),
        _ => Err(OpticsError::MultipleTargets(targets.len())),
    }
}

/// Laser output per signal, in dBm, so that the target power arrives at the cell.
pub fn required_laser_power_per_signal(chain: &[BudgetComponent]) -> Result<f64, OpticsError> {
    Ok(target_of(chain)? - chain_gain_db(chain))
}

/// Total electrical laser power in watts.
pub fn total_laser_electrical_power(per_signal_optical_mw: f64, signal_count: u64, efficiency: f64) -> f64 {
    per_signal_optical_mw / efficiency * signal_count as f64 / 1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub chain_gain_db: f64,
    pub target_dbm: f64,
    pub per_signal_dbm: Deviation,
    pub per_signal_mw: f64,
    /// Electrical draw per signal at the configured wall-plug efficiency.
    pub per_signal_electrical_mw: f64,
    /// The same, starting from the published per-signal power.
    pub published_per_signal_electrical_mw: f64,
    pub signal_count: u64,
    pub total_laser_power_w: Deviation,
    /// Signal count at which the published per-signal draw reaches the
    /// published total.
    pub implied_signal_count: f64,
}

pub fn budget_report(
    chain: &[BudgetComponent],
    efficiency: f64,
    signal_count: u64,
    published: &PublishedValues,
) -> Result<BudgetReport, OpticsError> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(OpticsError::InvalidParams("efficiency must be in (0, 1]"));
    }
    let target = target_of(chain)?;
    let dbm = required_laser_power_per_signal(chain)?;
    let mw = dbm_to_mw(dbm);
    let published_mw = dbm_to_mw(published.laser_power_per_signal_dbm);
    let published_elec = published.laser_power_per_signal_mw / efficiency;
    Ok(BudgetReport {
        chain_gain_db: chain_gain_db(chain),
        target_dbm: target,
        per_signal_dbm: Deviation::new(dbm, published.laser_power_per_signal_dbm),
        per_signal_mw: mw,
        per_signal_electrical_mw: mw / efficiency,
        published_per_signal_electrical_mw: published_elec,
        signal_count,
        total_laser_power_w: Deviation::new(
            total_laser_electrical_power(published_mw, signal_count, efficiency),
            published.total_laser_power_w,
        ),
        implied_signal_count: published.total_laser_power_w * 1000.0
            / published.laser_electrical_per_signal_mw,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyModelParams {
    /// Electrical laser (and SOA) power per optical signal.
    pub laser_per_signal_mw: f64,
    pub dac_mw: f64,
    pub adc_mw: f64,
    pub wall_plug_efficiency: f64,
    /// Signals driven per bank for one line write; `None` means one row
    /// signal plus one per cell column.
    pub signals_per_bank_write: Option<u32>,
    /// Total read-path power for one bank's parallel reads.
    pub read_power_per_bank_mw: f64,
}

impl Default for EnergyModelParams {
    fn default() -> Self {
        Self {
            laser_per_signal_mw: 0.95,
            dac_mw: 0.3,
            adc_mw: 0.3,
            wall_plug_efficiency: 0.20,
            signals_per_bank_write: None,
            read_power_per_bank_mw: 9.3,
        }
    }
}

impl EnergyModelParams {
    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.wall_plug_efficiency > 0.0 && self.wall_plug_efficiency <= 1.0) {
            return Err(OpticsError::InvalidParams("wall_plug_efficiency must be in (0, 1]"));
        }
        if !(self.laser_per_signal_mw > 0.0 && self.read_power_per_bank_mw > 0.0) {
            return Err(OpticsError::InvalidParams("powers must be positive"));
        }
        if self.dac_mw < 0.0 || self.adc_mw < 0.0 {
            return Err(OpticsError::InvalidParams("converter powers must be non-negative"));
        }
        Ok(())
    }
}

/// mW × ns = pJ, spread over `bits`.
pub fn energy_per_bit_pj(power_mw: f64, duration_ns: f64, bits: f64) -> f64 {
    power_mw * duration_ns / bits
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WriteEnergy {
    pub lines_in_window: f64,
    pub signals_in_flight: f64,
    pub power_mw: f64,
    pub pj_per_bit: Deviation,
    /// Energy per bit implied by the published aggregate write power.
    pub published_power_pj_per_bit: f64,
}

/// Every signal writing the lines that fit in the write window draws laser
/// plus DAC power for a full `t_SET`.
pub fn write_energy_per_bit(
    params: &EnergyModelParams,
    geom: &ArrayGeometry,
    timing: &TimingParams,
    caps: &ParallelismCaps,
    published: &PublishedValues,
) -> WriteEnergy {
    let line_bits = geom.cacheline_bits() as f64;
    let lines = caps.write_window_bits as f64 / line_bits;
    let per_bank = params
        .signals_per_bank_write
        .unwrap_or(1 + geom.cells_per_tile_side) as f64;
    let signals = lines * geom.banks_per_cacheline as f64 * per_bank;
    let power = signals * (params.laser_per_signal_mw + params.dac_mw);
    let t = to_ns(timing.t_set);
    let bits = caps.write_window_bits as f64;
    WriteEnergy {
        lines_in_window: lines,
        signals_in_flight: signals,
        power_mw: power,
        pj_per_bit: Deviation::new(energy_per_bit_pj(power, t, bits), published.write_energy_pj_per_bit),
        published_power_pj_per_bit: energy_per_bit_pj(published.write_power_mw, t, bits),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadEnergy {
    pub reads_per_bank_in_window: f64,
    pub bits_per_bank_in_window: f64,
    pub pj_per_bit: Deviation,
}

/// One bank's read-path power over `t_read`, spread over the cells it
/// senses in parallel.
pub fn read_energy_per_bit(
    params: &EnergyModelParams,
    geom: &ArrayGeometry,
    timing: &TimingParams,
    caps: &ParallelismCaps,
    published: &PublishedValues,
) -> ReadEnergy {
    let b = geom.bits_per_cell as f64;
    let reads = caps.read_window_bits as f64 / (geom.bank_count as f64 * b);
    let bits = reads * b;
    ReadEnergy {
        reads_per_bank_in_window: reads,
        bits_per_bank_in_window: bits,
        pj_per_bit: Deviation::new(
            energy_per_bit_pj(params.read_power_per_bank_mw, to_ns(timing.t_read), bits),
            published.read_energy_pj_per_bit,
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityBasis {
    /// One stacked layer.
    Footprint,
    /// Sum over every layer.
    AllLayers,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaModelParams {
    pub gst_side_nm: f64,
    pub gst_separation_nm: f64,
    pub mrr_diameter_um: f64,
    /// Stacked layers; `None` means one per bank.
    pub layers: Option<u32>,
    pub density_basis: DensityBasis,
}

impl Default for AreaModelParams {
    fn default() -> Self {
        Self {
            gst_side_nm: 500.0,
            gst_separation_nm: 50.0,
            mrr_diameter_um: 5.0,
            layers: None,
            density_basis: DensityBasis::Footprint,
        }
    }
}

impl AreaModelParams {
    pub fn validate(&self) -> Result<(), OpticsError> {
        let ok = self.gst_side_nm > 0.0
            && self.gst_separation_nm > 0.0
            && self.mrr_diameter_um > 0.0
            && self.layers != Some(0);
        if !ok {
            return Err(OpticsError::InvalidParams("area dimensions must be positive"));
        }
        Ok(())
    }
}

/// Length of a line of `cells` GSTs plus the ring at its head, in nm.
pub fn side_length_nm(cells: u64, gst_side_nm: f64, separation_nm: f64, mrr_nm: f64) -> f64 {
    if cells == 0 {
        return mrr_nm;
    }
    cells as f64 * gst_side_nm + (cells - 1) as f64 * separation_nm + mrr_nm
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaReport {
    pub cells_per_row: u64,
    pub cells_per_column: u64,
    pub row_side_um: f64,
    pub column_side_um: f64,
    pub layer_area_mm2: f64,
    pub layers: u32,
    pub total_area_mm2: f64,
    pub density_mb_per_mm2: f64,
    pub published_area_mm2: Option<Deviation>,
    pub published_density_mb_per_mm2: Option<Deviation>,
    /// Square of bare GSTs on the longer side, without separation or rings.
    pub bare_square_area_mm2: f64,
}

pub fn array_area_and_density(
    params: &AreaModelParams,
    geom: &ArrayGeometry,
    published: &PublishedValues,
) -> AreaReport {
    let n = geom.cells_per_tile_side as u64;
    let row_cells = n * geom.tile_cols_per_bank as u64;
    let col_cells = n * geom.tile_rows_per_bank as u64;
    let mrr_nm = params.mrr_diameter_um * 1000.0;
    let row_nm = side_length_nm(row_cells, params.gst_side_nm, params.gst_separation_nm, mrr_nm);
    let col_nm = side_length_nm(col_cells, params.gst_side_nm, params.gst_separation_nm, mrr_nm);
    let layer_mm2 = row_nm * col_nm * 1e-12;
    let layers = params.layers.unwrap_or(geom.bank_count);
    let total = layer_mm2 * layers as f64;
    let basis = match params.density_basis {
        DensityBasis::Footprint => layer_mm2,
        DensityBasis::AllLayers => total,
    };
    let mb = geom.capacity_bytes() as f64 / (1u64 << 20) as f64;
    let density = mb / basis;
    let bare = (row_cells.max(col_cells) as f64 * params.gst_side_nm * 1e-6).powi(2);
    AreaReport {
        cells_per_row: row_cells,
        cells_per_column: col_cells,
        row_side_um: row_nm / 1000.0,
        column_side_um: col_nm / 1000.0,
        layer_area_mm2: layer_mm2,
        layers,
        total_area_mm2: total,
        density_mb_per_mm2: density,
        published_area_mm2: published.area_for(geom.bits_per_cell).map(|p| Deviation::new(basis, p)),
        published_density_mb_per_mm2: published
            .density_for(geom.bits_per_cell)
            .map(|p| Deviation::new(density, p)),
        bare_square_area_mm2: bare,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn dbm_conversions() {
        assert_eq!(dbm_to_mw(0.0), 1.0);
        assert!(close(dbm_to_mw(-7.22), 0.18967, 1e-4));
        assert!(close(dbm_to_mw(-7.22), 0.19, 5e-3));
        assert!(matches!(mw_to_dbm(0.0), Err(OpticsError::NonPositivePower(_))));
        assert!((mw_to_dbm(135.0 / 250.0).unwrap() + 2.67).abs() < 0.01);
    }

    #[test]
    fn budget_examples() {
        let t = BudgetComponent::target("set", -2.67);
        assert_eq!(required_laser_power_per_signal(std::slice::from_ref(&t)).unwrap(), -2.67);
        let one = [BudgetComponent::loss("coupling", -1.0), t.clone()];
        assert!(close(required_laser_power_per_signal(&one).unwrap(), -1.67, 1e-12));
        assert_eq!(required_laser_power_per_signal(&[]), Err(OpticsError::MissingTarget));
        assert_eq!(
            required_laser_power_per_signal(&[t.clone(), t]),
            Err(OpticsError::MultipleTargets(2))
        );
        let chain = reference_budget_chain();
        assert!(close(chain_gain_db(&chain), 6.343, 1e-12));
        let dbm = required_laser_power_per_signal(&chain).unwrap();
        assert!(close(dbm, -9.013, 1e-12));
        let r = budget_report(&chain, 0.2, 17_242, &PublishedValues::default()).unwrap();
        assert!((r.per_signal_dbm.delta + 1.793).abs() < 1e-9);
        assert!((r.implied_signal_count - 17_242.1).abs() < 0.1);
    }

    #[test]
    fn laser_power() {
        let per = total_laser_electrical_power(0.19, 1, 0.2) * 1000.0;
        assert!(close(per, 0.95, 1e-12));
        assert_eq!(total_laser_electrical_power(0.5, 2, 1.0), 0.001);
    }

    #[test]
    fn budget_file_parsing() {
        let text = "# path\ncoupling, loss_db, -1\nsoa,gain_db,20\n\nset,target_dbm,-2.67 # SET\n";
        let chain = parse_budget(text).unwrap();
        assert_eq!(chain.len(), 3);
        assert!(close(required_laser_power_per_signal(&chain).unwrap(), -21.67, 1e-12));
        let e = parse_budget("a,loss_db,1\nb,weird,2").unwrap_err();
        assert!(matches!(e, OpticsError::Parse { line: 2, .. }));
        assert!(parse_budget("a,loss_db").is_err());
        assert!(parse_budget("a,loss_db,abc").is_err());
    }

    #[test]
    fn energy_unit_checks() {
        assert_eq!(energy_per_bit_pj(1.0, 1.0, 1.0), 1.0);
        assert!(close(energy_per_bit_pj(9.3, 25.0, 20.0), 11.625, 1e-12));
    }

    #[test]
    fn preset_energies() {
        let g = ArrayGeometry::cosmos_4bit();
        let t = TimingParams::cosmos();
        let caps = ParallelismCaps::reference(4);
        let p = PublishedValues::default();
        let w = write_energy_per_bit(&EnergyModelParams::default(), &g, &t, &caps, &p);
        assert_eq!(w.lines_in_window, 2.0);
        assert_eq!(w.signals_in_flight, 264.0);
        assert!(close(w.pj_per_bit.computed, 51.5625, 1e-12));
        assert!(w.pj_per_bit.within(0.30));
        assert!(close(w.published_power_pj_per_bit, 52.3125, 1e-12));
        let r = read_energy_per_bit(&EnergyModelParams::default(), &g, &t, &caps, &p);
        assert_eq!(r.reads_per_bank_in_window, 5.0);
        assert!(close(r.pj_per_bit.computed, 11.625, 1e-12));
    }

    #[test]
    fn energy_scales_with_time_and_bits() {
        let g = ArrayGeometry::cosmos_4bit();
        let t = TimingParams::cosmos();
        let caps = ParallelismCaps::reference(4);
        let p = PublishedValues::default();
        let e = EnergyModelParams::default();
        let base = write_energy_per_bit(&e, &g, &t, &caps, &p).pj_per_bit.computed;
        let t2 = TimingParams { t_set: 2 * t.t_set, ..t };
        let doubled = write_energy_per_bit(&e, &g, &t2, &caps, &p).pj_per_bit.computed;
        assert!(close(doubled, 2.0 * base, 1e-12));

        let r4 = read_energy_per_bit(&e, &g, &t, &caps, &p).pj_per_bit.computed;
        let g2 = ArrayGeometry::cosmos_2bit();
        let r2 = read_energy_per_bit(&e, &g2, &t, &ParallelismCaps::reference(2), &p).pj_per_bit.computed;
        assert!(close(r2, 2.0 * r4, 1e-12));
    }

    #[test]
    fn area_pitch_arithmetic() {
        assert_eq!(side_length_nm(1, 500.0, 50.0, 0.0), 500.0);
        assert_eq!(side_length_nm(1, 500.0, 50.0, 0.0).powi(2) * 1e-6, 0.25);
        assert_eq!(side_length_nm(2, 500.0, 50.0, 0.0), 1050.0);
        let g = ArrayGeometry::cosmos_4bit();
        let a = array_area_and_density(&AreaModelParams::default(), &g, &PublishedValues::default());
        assert_eq!((a.cells_per_column, a.cells_per_row), (16_384, 32_768));
        assert!(close(a.column_side_um, 9016.15, 1e-12));
        assert!(close(a.row_side_um, 18_027.35, 1e-12));
        assert!(close(a.layer_area_mm2, 9016.15 * 18_027.35 * 1e-6, 1e-12));
        assert!(close(a.bare_square_area_mm2, 268.435456, 1e-12));
        assert!(a.published_area_mm2.unwrap().delta < 0.0);
        let p = PublishedValues::default();
        assert!(close(p.area_4bit_mm2 / p.area_8bit_mm2, 4.0, 1e-3));
    }

    proptest! {
        #[test]
        fn dbm_round_trip(mw in 1e-6f64..1e6) {
            let back = dbm_to_mw(mw_to_dbm(mw).unwrap());
            prop_assert!(close(back, mw, 1e-12));
        }

        #[test]
        fn chain_sum_is_permutation_invariant(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut chain = reference_budget_chain();
            let before = required_laser_power_per_signal(&chain).unwrap();
            chain.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let after = required_laser_power_per_signal(&chain).unwrap();
            prop_assert!((before - after).abs() < 1e-12);
        }

        #[test]
        fn energy_is_homogeneous_in_power(k in 0.1f64..10.0) {
            let g = ArrayGeometry::cosmos_4bit();
            let t = TimingParams::cosmos();
            let caps = ParallelismCaps::reference(4);
            let p = PublishedValues::default();
            let e = EnergyModelParams::default();
            let scaled = EnergyModelParams {
                laser_per_signal_mw: e.laser_per_signal_mw * k,
                dac_mw: e.dac_mw * k,
                read_power_per_bank_mw: e.read_power_per_bank_mw * k,
                ..e
            };
            let w = write_energy_per_bit(&e, &g, &t, &caps, &p).pj_per_bit.computed;
            let ws = write_energy_per_bit(&scaled, &g, &t, &caps, &p).pj_per_bit.computed;
            prop_assert!(close(ws, k * w, 1e-12));
            let r = read_energy_per_bit(&e, &g, &t, &caps, &p).pj_per_bit.computed;
            let rs = read_energy_per_bit(&scaled, &g, &t, &caps, &p).pj_per_bit.computed;
            prop_assert!(close(rs, k * r, 1e-12));
        }

        #[test]
        fn area_monotone_in_dimensions(
            side in 100.0f64..1000.0,
            sep in 10.0f64..100.0,
            mrr in 1.0f64..10.0,
            bump in 1.0f64..50.0,
        ) {
            let g = ArrayGeometry::cosmos_4bit();
            let p = PublishedValues::default();
            let base = AreaModelParams { gst_side_nm: side, gst_separation_nm: sep, mrr_diameter_um: mrr, ..Default::default() };
            let a = array_area_and_density(&base, &g, &p).layer_area_mm2;
            for bigger in [
                AreaModelParams { gst_side_nm: side + bump, ..base },
                AreaModelParams { gst_separation_nm: sep + bump, ..base },
                AreaModelParams { mrr_diameter_um: mrr + bump, ..base },
            ] {
                prop_assert!(array_area_and_density(&bigger, &g, &p).layer_area_mm2 > a);
            }
        }
    }
}
